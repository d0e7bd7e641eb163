"""Statistics of the number N of small oscillations between spikes."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import InsufficientTail
from .params import DerivedParams

DEFAULT_R_GRID = np.arange(1001, 3001) / 1000.0
DEFAULT_SLOPE_THRESHOLD = 1e3
REGIME_CUTOFF = 3.0
_PI_QUARTER = math.pi ** 0.25


def normal_cdf(x: float) -> float:
    """Standard normal CDF through erfc, clamped away from 0."""
    return max(0.5 * math.erfc(-x / math.sqrt(2.0)), 1e-300)


@dataclass(frozen=True)
class NDistribution:
    samples: np.ndarray

    @property
    def counts(self) -> dict:
        return dict(sorted(Counter(self.samples.tolist()).items()))

    @property
    def total(self) -> int:
        return int(self.samples.size)

    @property
    def p1(self) -> float:
        return float(np.mean(self.samples == 1))

    @property
    def p1_se(self) -> float:
        p = self.p1
        return math.sqrt(p * (1.0 - p) / self.total)

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def mean_se(self) -> float:
        return float(self.samples.std(ddof=1) / math.sqrt(self.total)) if self.total > 1 else float("nan")

    def log_mgf(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        ns = self.samples.astype(float)
        vals, cnt = np.unique(ns, return_counts=True)
        lr = np.log(r)[..., None]
        return logsumexp(lr * vals, axis=-1, b=cnt) - math.log(self.total)

    def mgf(self, r) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_mgf(r))


def n_distribution(ns: Iterable[int]) -> NDistribution:
    a = np.asarray(list(ns) if not isinstance(ns, np.ndarray) else ns, dtype=np.int64)
    if a.size == 0:
        raise ValueError("need at least one sample")
    if np.any(a < 1):
        raise ValueError("N must be >= 1")
    return NDistribution(a)


def mgf_pole_lambda0(dist: NDistribution, r_grid: Sequence[float] | None = None,
                     slope_threshold: float = DEFAULT_SLOPE_THRESHOLD) -> float:
    """1/r* where r* is the first grid point at which d/dr E[r^N] exceeds the threshold.

    The slope is the centred difference on the grid.  Returns NaN if the
    threshold is never reached.
    """
    if int(dist.samples.max()) < 5:
        raise InsufficientTail("largest observed N is below 5")
    r = DEFAULT_R_GRID if r_grid is None else np.asarray(r_grid, dtype=float)
    if r.size < 3:
        raise ValueError("r grid needs at least 3 points")
    m = dist.mgf(r)
    with np.errstate(invalid="ignore", over="ignore"):
        slope = (m[2:] - m[:-2]) / (r[2:] - r[:-2])
    hit = np.nonzero(slope > slope_threshold)[0]
    if hit.size == 0:
        return float("nan")
    return float(1.0 / r[hit[0] + 1])


def phi_spike_prob(d: DerivedParams | None = None, *, mu_t: float | None = None, sigma_t: float | None = None) -> float:
    """Gaussian approximation Phi(-pi^(1/4) mu_t / sigma_t) of P(N = 1)."""
    if d is not None:
        mu_t, sigma_t = d.mu_t, d.sigma_t
    if not sigma_t or sigma_t <= 0:
        raise ValueError("sigma_t must be positive")
    return normal_cdf(-_PI_QUARTER * mu_t / sigma_t)


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    ratio: float
    sigma_over_delta_eps14: float
    sigma_over_eps34: float
    log10_dist_sqrt_delta_eps: float
    log10_dist_delta_eps14: float


def classify_regime(d: DerivedParams, cutoff: float = REGIME_CUTOFF) -> RegimeReport:
    """Weak / intermediate / strong noise from mu_t / sigma_t, plus the raw scale ratios."""
    if not d.sigma_t > 0:
        raise ValueError("sigma_t must be positive")
    p = d.params
    ratio = d.mu_t / d.sigma_t
    if ratio > cutoff:
        regime = "weak"
    elif ratio < -cutoff:
        regime = "strong"
    else:
        regime = "intermediate"
    sigma = math.hypot(p.sigma1, p.sigma2)
    delta, eps = d.delta, p.eps
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = sigma / (eps ** 0.25 * delta) if delta != 0 else math.inf
        b1 = math.log10(sigma / math.sqrt(delta * eps)) if delta > 0 and sigma > 0 else math.nan
        b2 = math.log10(sigma / (delta * eps ** 0.25)) if delta > 0 and sigma > 0 else math.nan
    return RegimeReport(regime, ratio, r1, sigma / eps ** 0.75, b1, b2)


@dataclass(frozen=True)
class SweepPoint:
    """One parameter point of a sweep: parameters, N samples, optional kernel eigenvalue."""

    d: DerivedParams
    ns: np.ndarray
    lambda0: float | None = None
    lambda0_se: float | None = None


@dataclass(frozen=True)
class CurveRow:
    ratio: float
    p1: float
    p1_se: float
    inv_mean: float
    inv_mean_se: float
    one_minus_lambda0: float
    one_minus_lambda0_se: float
    phi: float


def bootstrap_pole(ns: np.ndarray, n_boot: int = 100, seed: int = 0, **kw) -> tuple[float, float]:
    """MGF-pole estimate of lambda0 and its bootstrap standard error."""
    est = mgf_pole_lambda0(n_distribution(ns), **kw)
    rng = np.random.Generator(np.random.Philox(seed))
    reps = []
    for _ in range(n_boot):
        s = rng.choice(ns, size=ns.size, replace=True)
        if s.max() >= 5:
            reps.append(mgf_pole_lambda0(n_distribution(s), **kw))
    reps = np.asarray(reps)
    reps = reps[np.isfinite(reps)]
    se = float(reps.std(ddof=1)) if reps.size > 1 else float("nan")
    return est, se


def summary_curves(points: Sequence[SweepPoint], min_spikes: int = 200, n_boot: int = 100) -> list[CurveRow]:
    """Rows of (mu_t/sigma_t, P(N=1), 1/E[N], 1 - lambda0, Phi) with standard errors.

    ``1 - lambda0`` comes from the kernel eigenvalue when the point carries
    one, otherwise from the MGF pole with a bootstrap error.
    """
    rows = []
    for i, pt in enumerate(points):
        ns = np.asarray(pt.ns, dtype=np.int64)
        if ns.size < min_spikes:
            raise ValueError(f"sweep point {i} has {ns.size} spikes, need >= {min_spikes}")
        dist = n_distribution(ns)
        inv = 1.0 / dist.mean
        inv_se = dist.mean_se / dist.mean ** 2
        if pt.lambda0 is not None:
            lam, lam_se = pt.lambda0, pt.lambda0_se if pt.lambda0_se is not None else float("nan")
        else:
            try:
                lam, lam_se = bootstrap_pole(ns, n_boot=n_boot, seed=i)
            except InsufficientTail:
                lam, lam_se = 0.0, float("nan")
        rows.append(CurveRow(pt.d.mu_t / pt.d.sigma_t, dist.p1, dist.p1_se, inv, inv_se,
                             1.0 - lam, lam_se, phi_spike_prob(pt.d)))
    return rows
