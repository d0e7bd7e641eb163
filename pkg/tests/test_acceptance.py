"""Exit criteria of the package, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line, and the lines are repeated in the
terminal summary.  The whole module takes roughly twenty minutes on one core.
Spike trains use dt = 1e-3 inside D and dt = eps/20 outside it.
"""
import math

import numpy as np
import pytest
from scipy import stats as sps

from mmo_fhn import _kernels as K
from mmo_fhn.core import _f_and_log1p, f_derivatives, first_integral, implicit_f, q_drift
from mmo_fhn.markov import estimate_kernel, geometric_tail, qsd_replay
from mmo_fhn.oracle import mc_checks
from mmo_fhn.params import DerivedParams, ModelParams, derive_params, params_from_scaled
from mmo_fhn.poincare import default_chart, run_spike_train
from mmo_fhn.stats import SweepPoint, bootstrap_pole, n_distribution, phi_spike_prob, summary_curves

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

EPS = 1e-4
SIGMA = 0.1
DT = 1e-3
N_SPIKES = 1000
SWEEP = (0.12, 0.05, 0.01, -0.09)
# at mu_t = 0.12 intervals run to thousands of turns; counts above this are
# censored, which leaves P(N = 1) untouched and only lowers the sample mean
CENSOR = {0.12: 300}


def _d(mu_t, sigma_t=SIGMA, eps=EPS):
    return derive_params(params_from_scaled(mu_t, sigma_t, eps))


def _train(mu_t, seed, **chart_kw):
    d = _d(mu_t)
    return run_spike_train(d, default_chart(d, **chart_kw), N_SPIKES, seed, dt_scaled=DT,
                           max_saos=CENSOR.get(mu_t))


def _kernel(d, n_bins=64, samples_per_bin=500, seed=0, n_boot=100):
    return estimate_kernel(d, default_chart(d), n_bins=n_bins, samples_per_bin=samples_per_bin,
                           master_seed=seed, dt=DT, n_boot=n_boot)


@pytest.fixture(scope="module")
def sweep_trains():
    return {mu: _train(mu, 100 + i) for i, mu in enumerate(SWEEP)}


@pytest.fixture(scope="module")
def sweep_kernels():
    return {mu: _kernel(_d(mu), seed=200 + i) for i, mu in enumerate(SWEEP)}


# ---------------------------------------------------------------- 1

def test_c01_phi_law(sweep_trains, report):
    ok = True
    parts = []
    for mu in SWEEP:
        dist = n_distribution(sweep_trains[mu].N)
        phi = phi_spike_prob(mu_t=mu, sigma_t=SIGMA)
        se = math.sqrt(phi * (1 - phi) / dist.total)
        good = abs(dist.p1 - phi) <= 3 * se
        ok &= good
        parts.append(f"mu={mu:+.2f} P1={dist.p1:.4f} Phi={phi:.4f} ({(dist.p1 - phi) / se:+.1f} se)")
    report("C1 Phi law", ok, "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- 2

def test_c02_coin_flip(report):
    d = _d(0.0)
    p = d.params
    # the first noise channel exactly cancels the Hopf distance
    assert p.sigma1 ** 2 == pytest.approx(p.eps * d.delta / (3 * d.alpha_star), rel=1e-12)
    assert abs(d.mu_t) < 1e-12
    dist = n_distribution(run_spike_train(d, default_chart(d), N_SPIKES, 300, dt_scaled=DT).N)
    ok = abs(dist.p1 - 0.5) <= 0.05
    report("C2 coin flip at mu_t=0", ok, f"P1={dist.p1:.4f} +- {dist.p1_se:.4f}")
    assert ok


# ---------------------------------------------------------------- 3

def test_c03_geometric_tail(sweep_trains, sweep_kernels, report):
    ns = sweep_trains[0.05].N
    tail = {e.n: e for e in geometric_tail(ns) if 3 <= e.n <= 8}
    events = sum(e.p * e.at_risk for e in tail.values())
    at_risk = sum(e.at_risk for e in tail.values())
    h = events / at_risk
    h_se = math.sqrt(h * (1 - h) / at_risk)
    flat = all(abs(e.p - h) <= 3 * math.sqrt(h * (1 - h) / e.at_risk) for e in tail.values()) and len(tail) == 6
    lam_mgf, lam_mgf_se = bootstrap_pole(ns, n_boot=100, seed=1)
    k = sweep_kernels[0.05]
    agree_mgf = abs(h - (1 - lam_mgf)) <= 3 * math.hypot(h_se, lam_mgf_se)
    agree_kernel = abs(h - (1 - k.lambda0)) <= 3 * math.hypot(h_se, k.lambda0_se)
    ok = flat and agree_mgf and agree_kernel
    haz = ", ".join(f"{n}:{e.p:.4f}" for n, e in sorted(tail.items()))
    report("C3 geometric tail", ok,
           f"hazards n=3..8 [{haz}] pooled {h:.4f}+-{h_se:.4f} (flat={flat}); "
           f"MGF 1-lambda0={1 - lam_mgf:.4f}+-{lam_mgf_se:.4f} (agree={agree_mgf}); "
           f"kernel 1-lambda0={1 - k.lambda0:.4f}+-{k.lambda0_se:.4f} (agree={agree_kernel})")
    assert ok


# ---------------------------------------------------------------- 4

def test_c04_qsd_replay(sweep_kernels, report):
    k = sweep_kernels[0.05]
    lam = k.lambda0
    ns = qsd_replay(k, 100_000, master_seed=4)
    # about 50 cells of equal geometric probability, the last one open
    edges = np.unique(np.ceil(np.log1p(-np.arange(1, 50) / 50) / math.log(lam)).astype(np.int64))
    edges = edges[edges >= 1]
    cdf = 1.0 - lam ** edges.astype(float)
    probs = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
    obs = np.bincount(np.searchsorted(edges, ns, side="left"), minlength=probs.size).astype(float)
    pval = sps.chisquare(obs, probs * ns.size).pvalue
    ok = pval > 0.01
    report("C4 QSD replay", ok, f"lambda0={lam:.5f}, {probs.size} cells, chi-squared p={pval:.3f}")
    assert ok


# ---------------------------------------------------------------- 5

def test_c05_estimator_ordering(sweep_trains, sweep_kernels, report):
    pts = [SweepPoint(_d(mu), sweep_trains[mu].N, sweep_kernels[mu].lambda0, sweep_kernels[mu].lambda0_se)
           for mu in SWEEP]
    rows = summary_curves(pts)
    ok = True
    parts = []
    for mu, r in zip(SWEEP, rows):
        a = r.p1 - r.one_minus_lambda0 >= -math.hypot(r.p1_se, r.one_minus_lambda0_se)
        b = r.p1 - r.inv_mean >= -math.hypot(r.p1_se, r.inv_mean_se)
        ok &= a and b
        parts.append(f"mu={mu:+.2f} P1={r.p1:.4f} 1-lam={r.one_minus_lambda0:.4f} 1/EN={r.inv_mean:.4f}")
    report("C5 estimator ordering", ok, "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- 6

def test_c06_weak_noise_scaling(report):
    mu = 0.1
    ratios, log_en = [], []
    for i, k in enumerate((6, 5, 4, 3, 2)):
        sigma = mu / k
        ker = estimate_kernel(_d(mu, sigma), default_chart(_d(mu, sigma)), n_bins=16, samples_per_bin=2000,
                              master_seed=600 + i, dt=DT, n_boot=0)
        ratios.append(k * k)
        log_en.append(-math.log(1 - ker.lambda0) if ker.lambda0 < 1 else math.inf)
    finite = all(math.isfinite(v) for v in log_en)
    if finite:
        fit = sps.linregress(ratios, log_en)
        ok = fit.slope > 0 and fit.rvalue ** 2 > 0.9 and all(np.diff(log_en[::-1]) > 0)
        detail = f"slope={fit.slope:.3f} R2={fit.rvalue ** 2:.3f}"
    else:
        ok = False
        detail = "no spike observed within the budget at some noise levels"
    pts = ", ".join(f"{r}:{v:.2f}" for r, v in zip(ratios, log_en))
    report("C6 weak-noise scaling", ok, f"log E[N] by mu^2/sigma^2 [{pts}]; {detail}")
    assert ok


# ---------------------------------------------------------------- 7

def test_c07_gaussian_oracle(report):
    base = _d(0.05)
    ok = True
    parts = []
    # at 0.007 the tail probabilities are ~1e-28; 0.05 puts them near 0.06
    for s in (0.007, 0.05):
        d = DerivedParams(**{**base.__dict__, "sigma1_t": s, "sigma2_t": s, "sigma_t": math.hypot(s, s)})
        res = mc_checks(d, 1.5, H_values=(0.0, 0.01), n_paths=100_000, master_seed=7)
        ok &= all(r.passed for r in res)
        parts.append(f"sigma_i={s}: " + ", ".join(
            f"{r.name} {r.observed:.5g} vs {r.expected:.5g} (tol {r.tolerance:.2g})" for r in res))
    report("C7 Gaussian oracle", ok, "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- 8

def test_c08_first_integral(report):
    path = K.rk4_scaled_path(0.0, 0.15, 20000, 1e-3, 0.0, 0.0, 0.0, 1.0, 1)
    ang = np.unwrap(np.arctan2(path[:, 1] - 0.5, path[:, 0]))
    n_rev = int(np.argmax(np.abs(ang - ang[0]) >= 2 * np.pi))
    q = first_integral(path[: n_rev + 1, 0], path[: n_rev + 1, 1])
    drift_q = float(np.max(np.abs(q - q[0])))

    d = derive_params(ModelParams(a=1 / math.sqrt(3) + 0.002, c=0.0, eps=0.01))
    k9 = 1.0 / (9.0 * d.alpha_star ** 2)
    target = q_drift(-0.8, 0.3, d)
    errs = []
    for h in (1e-3, 5e-4, 2.5e-4):
        p = K.rk4_scaled_path(-0.8, 0.3, 1, h, d.mu, d.sqrt_eps, d.c, k9, 1)
        errs.append(abs((first_integral(*p[1]) - first_integral(*p[0])) / h - target) / abs(target))
    order_one = all(1.8 < errs[i] / errs[i + 1] < 2.2 for i in range(2))
    ok = drift_q < 1e-8 and n_rev > 0 and order_one
    report("C8 first integral", ok,
           f"max |Q - Q0| over one turn {drift_q:.2e}; relative FD errors {', '.join(f'{e:.2e}' for e in errs)}")
    assert ok


# ---------------------------------------------------------------- 9

def test_c09_f_suite(report):
    u = np.round(np.arange(-5000, 5001) * 1e-3, 12)
    f = implicit_f(u)
    f1, f2 = f_derivatives(u)
    bounds = bool(np.all(f > -1.0) and np.all(f >= 2.0 * u) and np.all(f2 > 0.0))
    h = 1e-5
    # d log(1+f)/du = f'/(1+f) keeps full relative precision where f is close to -1
    _, w = _f_and_log1p(u)
    fp, wp = _f_and_log1p(u + h)
    fm, wm = _f_and_log1p(u - h)
    dw = (wp - wm) / (2 * h)
    err1 = np.abs(dw * np.exp(w) - f1) / np.abs(f1)
    err1 = np.where(u == 0, np.abs((fp - fm) / (2 * h) - f1) / np.abs(f1), err1)
    err2 = np.abs((f_derivatives(u + h)[0] - f_derivatives(u - h)[0]) / (2 * h) - f2) / np.abs(f2)
    ok = bounds and err1.max() < 1e-6 and err2.max() < 1e-6
    report("C9 f suite", ok, f"bounds={bounds}; max rel FD error f' {err1.max():.1e}, f'' {err2.max():.1e}")
    assert ok


# ---------------------------------------------------------------- 10

def test_c10_chart_robustness(sweep_trains, report):
    mu, seed = 0.01, 100 + SWEEP.index(0.01)
    base = sweep_trains[mu].N
    variants = {"rho x2": dict(rho=0.1), "F +0.05": dict(f_offset=0.05), "F -0.05": dict(f_offset=-0.05)}
    cells = [1, 2, 3, 4, 5]

    def hist(ns):
        return np.array([np.mean(ns == c) for c in cells] + [np.mean(ns > cells[-1])])

    hb = hist(base)
    ok = True
    parts = []
    for name, kw in variants.items():
        hv = hist(_train(mu, seed, **kw).N)
        se = np.sqrt(hb * (1 - hb) / base.size + hv * (1 - hv) / N_SPIKES)
        z = np.abs(hv - hb) / np.where(se > 0, se, np.inf)
        ok &= bool(np.all(z < 2))
        parts.append(f"{name} max {z.max():.2f} se")
    report("C10 chart robustness", ok, "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- kernel discretisation

def test_kernel_bin_count_robustness(sweep_kernels, report):
    k64 = sweep_kernels[0.05]
    k128 = _kernel(_d(0.05), n_bins=128, samples_per_bin=250, seed=201)
    diff = abs(k128.lambda0 - k64.lambda0)
    ok = diff < k64.lambda0_se
    report("Kernel 64 vs 128 bins", ok,
           f"lambda0 {k64.lambda0:.5f} vs {k128.lambda0:.5f}, diff {diff:.5f}, se {k64.lambda0_se:.5f}")
    assert ok
