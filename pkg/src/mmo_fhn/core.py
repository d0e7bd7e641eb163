"""Coordinate changes, the first integral Q and the (Q, phi) chart around P."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceFailure, OutOfDomain
from .params import DerivedParams

# Taylor coefficients of f at 0 (orders 1..9)
_F_SERIES = np.array([
    2.0, 4.0 / 3.0, 2.0 / 9.0, -8.0 / 135.0, 1.0 / 135.0, 32.0 / 8505.0,
    -139.0 / 42525.0, 32.0 / 25515.0, -571.0 / 4592700.0,
])
_F1_SERIES = np.array([k * c for k, c in enumerate(_F_SERIES, start=1)])  # f', orders 0..8
_F2_SERIES = np.array([k * (k - 1) * c for k, c in enumerate(_F_SERIES, start=1)])[1:]  # f'', 0..7

_SERIES_F = 2e-2
_SERIES_F2 = 5e-2


def _poly(coeffs, u, first_power):
    out = np.zeros_like(u)
    for c in coeffs[::-1]:
        out = out * u + c
    return out * u ** first_power


class AngleState(NamedTuple):
    Q: float
    phi: float


class AngleCoeffs(NamedTuple):
    f1_lead: float
    f2_lead: float
    psi1: np.ndarray
    psi2: np.ndarray


def first_integral(xi, z):
    """Q = 2 z exp(1 - 2z - 2 xi^2), conserved by xi' = 1/2 - z, z' = 2 xi z."""
    xi = np.asarray(xi, dtype=float)
    z = np.asarray(z, dtype=float)
    q = 2.0 * z * np.exp(1.0 - 2.0 * z - 2.0 * xi * xi)
    return q if q.ndim else float(q)


def q_drift(xi, z, d: DerivedParams, mu: float | None = None):
    """Time derivative of Q along the deterministic scaled vector field.

    ``mu`` defaults to ``d.mu`` (noise-free system); pass ``d.mu_t`` to get the
    first-order part of the noisy drift.
    """
    if mu is None:
        mu = d.mu
    xi = np.asarray(xi, dtype=float)
    z = np.asarray(z, dtype=float)
    a2 = 9.0 * d.alpha_star ** 2
    x2 = xi * xi
    bracket = 2.0 * mu * (1.0 - 2.0 * z) + d.sqrt_eps * (
        4.0 * x2 * x2 / a2 + d.c * (4.0 * z * x2 - 6.0 * x2 + 4.0 * z * z - 4.0 * z + 1.0)
    )
    out = bracket * np.exp(1.0 - 2.0 * z - 2.0 * x2)
    return out if out.ndim else float(out)


def _solve_f(u: np.ndarray) -> np.ndarray:
    # Work in w = log(1 + f): h(w) = 2u^2 - (e^w - 1 - w) is monotone on each side of 0.
    u2 = 2.0 * u * u
    pos = u > 0
    lo = np.where(pos, 0.0, -1.0 - u2)
    hi = np.where(pos, np.log(2.0 + u2) + 1.0, 0.0)
    w = np.where(pos, np.log1p(u2 + np.sqrt(2.0 * u2 + u2 * u2)), -u2 - 1.0 + np.exp(-1.0 - u2))
    w = np.clip(w, lo, hi)
    for _ in range(100):
        em1 = np.expm1(w)
        h = u2 - (em1 - w)
        # h < 0 beyond the root on either side
        outside = h < 0
        hi = np.where(pos & outside, w, hi)
        lo = np.where(pos & ~outside, w, lo)
        lo = np.where(~pos & outside, w, lo)
        hi = np.where(~pos & ~outside, w, hi)
        dh = -em1
        with np.errstate(divide="ignore", invalid="ignore"):
            wn = w - h / dh
        bad = ~np.isfinite(wn) | (wn <= lo) | (wn >= hi)
        wn = np.where(bad, 0.5 * (lo + hi), wn)
        step = np.abs(wn - w)
        w = wn
        if np.all(step <= 4e-16 * np.maximum(np.abs(w), 1e-300)):
            break
    else:
        raise ConvergenceFailure("implicit_f did not converge")
    return w


def _f_and_log1p(u: np.ndarray):
    """Return (f, log(1 + f)); the second stays accurate when f rounds to -1."""
    flat = np.atleast_1d(u).ravel()
    f = np.empty_like(flat)
    w = np.empty_like(flat)
    small = np.abs(flat) < _SERIES_F
    f[small] = _poly(_F_SERIES, flat[small], 1)
    w[small] = np.log1p(f[small])
    big = ~small
    if np.any(big):
        w[big] = _solve_f(flat[big])
        f[big] = np.expm1(w[big])
    # f + 1 below the resolution of doubles: keep f strictly above -1
    f = np.maximum(f, np.nextafter(-1.0, 0.0))
    return f.reshape(np.shape(u)), w.reshape(np.shape(u))


def implicit_f(u):
    """Solve log(1 + f) - f = -2 u^2 for f with the sign of u (f > -1)."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("implicit_f needs finite arguments")
    f, _ = _f_and_log1p(u)
    return f if f.ndim else float(f)


def f_derivatives(u):
    """``(f'(u), f''(u))`` from f' = 4u(1+f)/f and f'' = 4(1+f)/f (1 - 4u^2/f^2)."""
    u = np.asarray(u, dtype=float)
    f, w = _f_and_log1p(u)
    one_f = np.exp(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = 4.0 * u * one_f / f
        d2 = 4.0 * one_f / f * (1.0 - 4.0 * u * u / (f * f))
    d1 = np.where(np.abs(u) < _SERIES_F, _poly(_F1_SERIES, u, 0), d1)
    d2 = np.where(np.abs(u) < _SERIES_F2, _poly(_F2_SERIES, u, 0), d2)
    if d1.ndim == 0:
        return float(d1), float(d2)
    return d1, d2


def _f_over_u(u):
    """f(u)/u, continuous at 0 with value 2."""
    u = np.asarray(u, dtype=float)
    f = np.asarray(implicit_f(u))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = f / u
    return np.where(np.abs(u) < _SERIES_F, _poly(_F_SERIES, u, 0), r), f


def to_angle(xi, z) -> AngleState:
    """Map (xi, z) with z > 0 and Q in (0, 1] to (Q, phi), phi in (-pi, pi].

    xi = -s sin(phi), X = s cos(phi) with s = sqrt(-log(Q)/2) and
    X = sign(2z - 1) sqrt((2z - 1 - log 2z)/2).  At P itself the angle is
    undefined and phi = 0 is returned.
    """
    xi = np.asarray(xi, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise OutOfDomain("to_angle needs z > 0")
    q = np.asarray(first_integral(xi, z))
    if np.any(q > 1.0 + 1e-12) or np.any(q <= 0):
        raise OutOfDomain("to_angle needs Q in (0, 1]")
    g = 2.0 * z - 1.0
    X = np.sign(g) * np.sqrt(np.maximum(g - np.log1p(g), 0.0) / 2.0)
    phi = np.arctan2(-xi, X) + 0.0
    phi = np.where(phi == -math.pi, math.pi, phi)
    q = np.minimum(q, 1.0)
    if q.ndim == 0:
        return AngleState(float(q), float(phi))
    return AngleState(q, phi)


def from_angle(s: AngleState):
    q = np.asarray(s.Q, dtype=float)
    phi = np.asarray(s.phi, dtype=float)
    if np.any(q <= 0) or np.any(q > 1.0):
        raise OutOfDomain("from_angle needs Q in (0, 1]")
    r = np.sqrt(-np.log(q) / 2.0)
    xi = -r * np.sin(phi)
    z = 0.5 * (1.0 + np.asarray(implicit_f(r * np.cos(phi))))
    if xi.ndim == 0:
        return float(xi), float(z)
    return xi, z


def original_to_scaled(x, y, d: DerivedParams):
    a_s = d.alpha_star
    eps = d.eps
    u = np.asarray(x, dtype=float) - a_s
    v = np.asarray(y, dtype=float) - (a_s ** 3 - a_s)
    xi1 = u / math.sqrt(eps)
    eta = v / eps
    z1 = eta - 3.0 * a_s * xi1 * xi1 + 1.0 / (6.0 * a_s)
    xi = -3.0 * a_s * xi1
    z = 3.0 * a_s * z1
    if xi.ndim == 0:
        return float(xi), float(z)
    return xi, z


def scaled_to_original(xi, z, d: DerivedParams):
    a_s = d.alpha_star
    eps = d.eps
    xi1 = -np.asarray(xi, dtype=float) / (3.0 * a_s)
    z1 = np.asarray(z, dtype=float) / (3.0 * a_s)
    eta = 3.0 * a_s * xi1 * xi1 + z1 - 1.0 / (6.0 * a_s)
    x = math.sqrt(eps) * xi1 + a_s
    y = eps * eta + (a_s ** 3 - a_s)
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def angle_sde_coeffs(s: AngleState, d: DerivedParams) -> AngleCoeffs:
    """Leading drifts and exact diffusion rows of (Q, phi).

    ``f1_lead`` multiplies the effective drift parameter in dQ, ``f2_lead`` is
    the O(1) rotation speed of phi.  ``psi1`` and ``psi2`` are the
    coefficients of (dW1, dW2) in dQ and dphi, obtained from Ito's formula
    applied to the scaled system.
    """
    q = float(s.Q)
    phi = float(s.phi)
    if not (0.0 < q < 1.0):
        raise OutOfDomain("angle_sde_coeffs needs Q in (0, 1)")
    r = math.sqrt(-math.log(q) / 2.0)
    cphi, sphi = math.cos(phi), math.sin(phi)
    X = r * cphi
    g, f = _f_over_u(X)
    g, f = float(g), float(f)
    s1, s2 = d.sigma1_t, d.sigma2_t
    f1 = -2.0 * q * f / (1.0 + f)
    f2 = 0.5 * g
    psi1 = np.array([
        4.0 * s1 * r * sphi * q / (1.0 + f),
        -2.0 * s2 * q * f / (1.0 + f),
    ])
    psi2 = np.array([
        -s1 * (cphi / r + g) / (1.0 + f),
        -s2 * sphi * g / (2.0 * r * (1.0 + f)),
    ])
    return AngleCoeffs(f1, f2, psi1, psi2)
