import math

import numpy as np
import pytest

from mmo_fhn import _kernels as K
from mmo_fhn.core import original_to_scaled, scaled_to_original
from mmo_fhn.errors import NonFinite, StepTooLarge
from mmo_fhn.oracle import z0_deterministic
from mmo_fhn.params import ModelParams, derive_params, params_from_scaled
from mmo_fhn.rng import make_rng_stream
from mmo_fhn.sde import SimConfig, deterministic_params, simulate_linearized, simulate_original, simulate_scaled


def test_simconfig_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0, t_max=1.0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, t_max=0.05)
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, t_max=1.0, record_every=0)


def test_stiffness_guards():
    p = ModelParams(a=0.6, c=0.0, eps=0.01)
    with pytest.raises(StepTooLarge):
        simulate_original(p, 0.0, 0.0, SimConfig(dt=0.002, t_max=1.0, frame="original"))
    with pytest.raises(StepTooLarge):
        simulate_scaled(derive_params(p), 0.0, 0.3, SimConfig(dt=0.02, t_max=1.0))


def test_blowup_guard():
    p = ModelParams(a=0.6, c=0.0, eps=0.01)
    with pytest.raises(NonFinite):
        simulate_original(p, 12.0, 0.0, SimConfig(dt=1e-3, t_max=1.0, frame="original",
                                                 scheme="deterministic_rk4"))


def test_quiet_original_run_settles_at_p():
    p = ModelParams(a=0.58, c=0.0, eps=0.05)
    alpha = derive_params(p).alpha
    x0 = alpha + 0.05
    path = simulate_original(p, x0, x0 ** 3 - x0, SimConfig(dt=1e-3, t_max=50.0, frame="original",
                                                            record_every=1000))
    x, y = path.states[-1]
    assert math.hypot(x - alpha, y - (alpha ** 3 - alpha)) < 1e-3
    assert np.all(np.diff(path.times) > 0)
    assert len(path.times) == path.states.shape[0]


def test_quiet_original_run_below_separatrix_spikes():
    p = ModelParams(a=0.58, c=0.0, eps=0.05)
    alpha = derive_params(p).alpha
    # well below the fold and the separatrix through it
    path = simulate_original(p, alpha, alpha ** 3 - alpha - 0.2, SimConfig(dt=1e-3, t_max=10.0, frame="original"))
    x = path.states[:, 0]
    assert x.min() < -0.5
    assert abs(x[-1] - alpha) < 0.1


def test_original_path_reproducible():
    p = ModelParams(a=0.58, c=0.0, eps=0.01, sigma1=1e-3, sigma2=1e-3)
    cfg = SimConfig(dt=1e-4, t_max=0.5, seed=42, frame="original")
    a = simulate_original(p, -1.0, 0.0, cfg)
    b = simulate_original(p, -1.0, 0.0, cfg)
    assert np.array_equal(a.states, b.states)
    c = simulate_original(p, -1.0, 0.0, SimConfig(dt=1e-4, t_max=0.5, seed=43, frame="original"))
    assert not np.array_equal(a.states, c.states)


def test_scaled_path_reproducible():
    d = derive_params(params_from_scaled(0.05, 0.1, 1e-4))
    cfg = SimConfig(dt=1e-3, t_max=5.0, seed=7)
    assert np.array_equal(simulate_scaled(d, -1.0, 0.3, cfg).states, simulate_scaled(d, -1.0, 0.3, cfg).states)


def test_scaled_quiet_path_spirals_into_focus():
    # eps is tiny here, so the focus sits at (-mu, 1/2)
    d = derive_params(params_from_scaled(0.05, 0.0, 1e-12))
    path = simulate_scaled(d, -1.0, 0.3, SimConfig(dt=1e-3, t_max=200.0, record_every=64))
    xi, z = path.states[:, 0], path.states[:, 1]
    dist = np.hypot(xi + 0.05, z - 0.5)
    assert dist[-1] < 0.05 * dist[0]
    # it gets there by turning around P several times
    ang = np.unwrap(np.arctan2(z - 0.5, xi + 0.05))
    assert abs(ang[-1] - ang[0]) > 4 * math.pi


def test_quiet_frames_agree():
    p = ModelParams(a=1 / math.sqrt(3) + 0.003, c=0.0, eps=0.01)
    d = derive_params(p)
    x0, y0 = scaled_to_original(-0.6, 0.35, d)
    t = 0.05
    orig = simulate_original(p, x0, y0, SimConfig(dt=1e-5, t_max=t, frame="original", scheme="deterministic_rk4"))
    scal = simulate_scaled(d, -0.6, 0.35, SimConfig(dt=1e-4, t_max=t / d.sqrt_eps, scheme="deterministic_rk4"))
    xi, z = original_to_scaled(*orig.states[-1], d)
    assert xi == pytest.approx(scal.states[-1, 0], abs=1e-6)
    assert z == pytest.approx(scal.states[-1, 1], abs=1e-6)


def _strong_errors(order_dts, n_paths, d, t_end):
    """Mean |X_dt - X_ref| at t_end on matched Brownian paths."""
    k9 = 1.0 / (9.0 * d.alpha_star ** 2)
    fine_dt = order_dts[-1] / 8
    n_fine = int(round(t_end / fine_dt))
    stream = make_rng_stream(11, 0)
    errs = {dt: [] for dt in order_dts}
    for _ in range(n_paths):
        g = stream.normals(n_fine)
        ref, _ = K.em_scaled_path(-0.5, 0.3, g, fine_dt, d.mu_t, d.sigma1_t, d.sigma2_t, d.sqrt_eps, d.c, k9,
                                  n_fine, 10.0)
        for dt in order_dts:
            m = int(round(dt / fine_dt))
            gc = g.reshape(-1, m, 2).sum(axis=1) / math.sqrt(m)
            out, _ = K.em_scaled_path(-0.5, 0.3, gc, dt, d.mu_t, d.sigma1_t, d.sigma2_t, d.sqrt_eps, d.c, k9,
                                      gc.shape[0], 10.0)
            errs[dt].append(np.hypot(*(out[-1] - ref[-1])))
    return [float(np.mean(errs[dt])) for dt in order_dts]


def test_strong_order_one_half_with_multiplicative_noise():
    d = derive_params(params_from_scaled(0.05, 0.3, 1e-4, sigma1_share=1.0))
    e = _strong_errors([4e-3, 2e-3, 1e-3], 400, d, 1.0)
    ratios = [e[0] / e[1], e[1] / e[2]]
    for r in ratios:
        assert 1.2 < r < 1.7


def test_strong_order_one_with_additive_noise():
    d = derive_params(params_from_scaled(0.05, 0.3, 1e-4, sigma1_share=0.0))
    e = _strong_errors([4e-3, 2e-3, 1e-3], 200, d, 1.0)
    for r in (e[0] / e[1], e[1] / e[2]):
        assert 1.7 < r < 2.3


def test_rk4_fourth_order():
    d = derive_params(params_from_scaled(0.05, 0.0, 1e-2))
    k9 = 1.0 / (9.0 * d.alpha_star ** 2)

    def end(dt):
        n = int(round(2.0 / dt))
        return K.rk4_scaled_path(-0.5, 0.3, n, dt, d.mu_t, d.sqrt_eps, d.c, k9, n)[-1]

    ref = end(1e-4)
    e = [np.linalg.norm(end(dt) - ref) for dt in (0.04, 0.02, 0.01)]
    assert e[0] / e[1] == pytest.approx(16.0, rel=0.15)
    assert e[1] / e[2] == pytest.approx(16.0, rel=0.15)


def test_ito_drift_is_mu_tilde():
    d = derive_params(params_from_scaled(0.05, 0.5, 1e-12, sigma1_share=1.0))
    assert d.mu - d.mu_t == pytest.approx(0.25)
    k9 = 1.0 / (9.0 * d.alpha_star ** 2)
    t, dt, n_paths = 0.02, 1e-4, 8000
    n = int(round(t / dt))
    stream = make_rng_stream(5, 0)
    zs = np.empty(n_paths)
    for i in range(n_paths):
        out, _ = K.em_scaled_path(-0.1, 0.0, stream.normals(n), dt, d.mu_t, d.sigma1_t, d.sigma2_t,
                                  d.sqrt_eps, d.c, k9, n, 10.0)
        zs[i] = out[-1, 1]
    rate = zs.mean() / t
    se = zs.std(ddof=1) / math.sqrt(n_paths) / t
    assert abs(rate - d.mu_t) < 3 * se + 0.05
    assert abs(rate - d.mu) > 0.15


def test_quiet_linearized_path_matches_closed_form():
    d = derive_params(params_from_scaled(0.05, 0.0, 1e-4))
    path = simulate_linearized(d, 0.0, -3.0, 3.0, SimConfig(dt=1e-4, t_max=6.0))
    ref = z0_deterministic(3.0, 0.0, -3.0, 0.05)
    assert path.states[-1, 0] == pytest.approx(ref, rel=1e-3)


def test_deterministic_params_drop_noise():
    p = ModelParams(a=0.6, c=0.1, eps=0.01, sigma1=1e-3, sigma2=2e-3)
    d = deterministic_params(p)
    assert d.sigma_t == 0.0 and d.mu_t == d.mu


# ---------------------------------------------------------------- random streams

def test_streams_reproducible_and_distinct():
    a = make_rng_stream(42, 0).normals(10_000)
    assert np.array_equal(a, make_rng_stream(42, 0).normals(10_000))
    assert not np.array_equal(a, make_rng_stream(43, 0).normals(10_000))


def test_neighbouring_streams_uncorrelated():
    a = make_rng_stream(42, 0).normals(10_000)
    b = make_rng_stream(42, 1).normals(10_000)
    for i in range(2):
        for j in range(2):
            assert abs(np.corrcoef(a[:, i], b[:, j])[0, 1]) < 0.05


def test_stream_rejects_negative_seed():
    with pytest.raises(ValueError):
        make_rng_stream(-1, 0)


def test_decimation_matches_full_path_across_chunks():
    d = derive_params(params_from_scaled(0.05, 0.01, 1e-4))
    full = simulate_scaled(d, -0.3, 0.5, SimConfig(dt=1e-4, t_max=30.0, seed=3))
    thin = simulate_scaled(d, -0.3, 0.5, SimConfig(dt=1e-4, t_max=30.0, seed=3, record_every=7))
    assert np.array_equal(thin.states, full.states[::7])
    assert np.allclose(thin.times, full.times[::7])
