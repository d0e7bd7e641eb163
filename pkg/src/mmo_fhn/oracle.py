"""Closed-form references for the linearised dynamics near the separatrix.

Near z = 0 the scaled system reduces, to first order, to

    dz = (mu_t + t z) dt - sigma1_t t dW1 + sigma2_t dW2,

whose solution is Gaussian.  The functions here give its mean, variance and
tail probabilities, plus two auxiliary closed forms, and run Monte-Carlo
cross-checks against :func:`mmo_fhn.sde.linearized_terminal_coupled`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .params import DerivedParams
from .sde import linearized_terminal_coupled
from .stats import normal_cdf

_QUAD = dict(epsabs=0.0, epsrel=1e-12, limit=200)


def _integral(fn, a, b):
    if a == b:
        return 0.0
    return quad(fn, a, b, **_QUAD)[0]


def z0_deterministic(t, z0: float, t0: float, mu_t: float):
    """Noise-free solution started from ``z0`` at ``t0``."""
    def one(tt):
        return math.exp(tt * tt / 2.0) * (
            z0 * math.exp(-t0 * t0 / 2.0) + mu_t * _integral(lambda s: math.exp(-s * s / 2.0), t0, tt)
        )

    if np.ndim(t) == 0:
        return one(float(t))
    return np.array([one(float(tt)) for tt in np.ravel(t)]).reshape(np.shape(t))


def zeta(s, t0: float):
    """exp(s^2) [exp(-t0^2) + int_{t0}^{s} exp(-u^2) du]."""
    def one(ss):
        if ss < t0:
            raise ValueError("zeta needs s >= t0")
        if ss == t0:
            return 1.0
        return math.exp(ss * ss) * (math.exp(-t0 * t0) + _integral(lambda u: math.exp(-u * u), t0, ss))

    if np.ndim(s) == 0:
        return one(float(s))
    return np.array([one(float(x)) for x in np.ravel(s)]).reshape(np.shape(s))


@dataclass(frozen=True)
class LinearizedLaw:
    """Gaussian law of z at T = 2L for the linearised SDE started at t0 = -2L.

    The integrals ``i_mean``, ``i_s1``, ``i_s2`` are kept unscaled so that
    ratios stay finite when exp(4 L^2) overflows.
    """

    L: float
    z0: float
    mu_t: float
    sigma1_t: float
    sigma2_t: float
    i_mean: float
    i_s1: float
    i_s2: float

    @property
    def t0(self) -> float:
        return -2.0 * self.L

    @property
    def T(self) -> float:
        return 2.0 * self.L

    @property
    def _noise_weight(self) -> float:
        return self.sigma1_t ** 2 * self.i_s1 + self.sigma2_t ** 2 * self.i_s2

    @property
    def log_scale(self) -> float:
        return 2.0 * self.L * self.L

    @property
    def mean(self) -> float:
        return self.z0 + self.mu_t * math.exp(self.log_scale) * self.i_mean if self.mu_t else self.z0

    @property
    def variance(self) -> float:
        w = self._noise_weight
        if w == 0.0:
            return 0.0
        return math.exp(2.0 * self.log_scale + math.log(w))

    def standardized(self, H: float) -> float:
        """(H + E z_T) / sd(z_T), evaluated without forming exp(4 L^2)."""
        w = self._noise_weight
        if w <= 0.0:
            raise ValueError("variance is zero")
        return ((H + self.z0) * math.exp(-self.log_scale) + self.mu_t * self.i_mean) / math.sqrt(w)


def linearized_law(d: DerivedParams, L: float, z0: float = 0.0) -> LinearizedLaw:
    if not L > 0:
        raise ValueError("L must be positive")
    a, b = -2.0 * L, 2.0 * L
    i0 = _integral(lambda s: math.exp(-s * s / 2.0), a, b)
    i1 = _integral(lambda s: s * s * math.exp(-s * s), a, b)
    i2 = _integral(lambda s: math.exp(-s * s), a, b)
    return LinearizedLaw(L, z0, d.mu_t, d.sigma1_t, d.sigma2_t, i0, i1, i2)


def hit_prob_below(law: LinearizedLaw, H: float) -> float:
    """P(z_T <= -H) for the Gaussian law."""
    return normal_cdf(-law.standardized(H))


def large_L_ratio(d: DerivedParams) -> float:
    """Limit of E z_T / sd(z_T) as L grows, with z0 = 0."""
    return math.sqrt(2.0 * math.pi) * d.mu_t / math.sqrt(
        math.sqrt(math.pi) * (d.sigma1_t ** 2 / 2.0 + d.sigma2_t ** 2)
    )


# ---------------------------------------------------------------- Monte-Carlo cross-checks

@dataclass(frozen=True)
class CheckResult:
    name: str
    observed: float
    expected: float
    tolerance: float
    passed: bool


def mc_checks(d: DerivedParams, L: float, z0: float = 0.0, H_values=(0.0, 0.01), n_paths: int = 100_000,
              dt: float = 1e-3, master_seed: int = 0) -> list[CheckResult]:
    """Monte-Carlo moments and tail probabilities of z_T against the Gaussian law.

    The estimator is ``2 * fine - coarse`` over Euler paths with steps dt/2
    and dt on shared increments, which removes the O(dt) weak bias.
    Tolerances: 3 standard errors for the mean and the probabilities, 5 %
    relative for the variance.
    """
    law = linearized_law(d, L, z0)
    fine, coarse = linearized_terminal_coupled(d, z0, law.t0, law.T, dt, n_paths, master_seed)
    n = n_paths
    out = []

    comb = 2.0 * fine - coarse
    mean = float(comb.mean())
    se = float(comb.std(ddof=1) / math.sqrt(n))
    out.append(CheckResult("mean", mean, law.mean, 3.0 * se, abs(mean - law.mean) <= 3.0 * se))

    var = 2.0 * float(fine.var(ddof=1)) - float(coarse.var(ddof=1))
    tol = 0.05 * law.variance
    out.append(CheckResult("variance", var, law.variance, tol, abs(var - law.variance) <= tol))

    for H in H_values:
        ind = 2.0 * (fine <= -H) - 1.0 * (coarse <= -H)
        p = float(ind.mean())
        expected = hit_prob_below(law, H)
        # binomial error of the fine estimate, inflated by the extrapolation spread when larger
        se_p = max(math.sqrt(max(expected * (1.0 - expected), 0.0) / n), float(ind.std(ddof=1)) / math.sqrt(n))
        tol = 3.0 * se_p
        out.append(CheckResult(f"P(z_T<=-{H:g})", p, expected, tol, abs(p - expected) <= tol))
    return out
