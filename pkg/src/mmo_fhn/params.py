"""Model parameters and the derived scaled quantities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateC, NoRoot


@dataclass(frozen=True)
class ModelParams:
    """User-facing parameters of

        dx = (1/eps)(x - x^3 + y) dt + sigma1/sqrt(eps) dW1
        dy = (a - b x - c y) dt + sigma2 dW2

    Construction folds ``b`` into the other parameters by rescaling time
    (``t -> b t``), so the stored ``a, c, eps, sigma2`` always belong to the
    ``b = 1`` system.  ``time_scale`` is the factor converting the internal
    time back to the caller's time: ``t_user = t_internal / time_scale``.
    """

    a: float
    c: float
    eps: float
    sigma1: float = 0.0
    sigma2: float = 0.0
    b: float = 1.0
    time_scale: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not (self.eps > 0):
            raise ValueError("eps must be positive")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("noise intensities must be non-negative")
        if not (self.b > 0):
            raise ValueError("b must be positive")
        if self.b != 1.0:
            b = float(self.b)
            object.__setattr__(self, "a", self.a / b)
            object.__setattr__(self, "c", self.c / b)
            object.__setattr__(self, "eps", self.eps * b)
            object.__setattr__(self, "sigma2", self.sigma2 / math.sqrt(b))
            object.__setattr__(self, "b", 1.0)
            object.__setattr__(self, "time_scale", b)
        if abs(self.c) >= 1.0 / math.sqrt(self.eps):
            raise DegenerateC(f"|c|={abs(self.c)} must be below 1/sqrt(eps)={1 / math.sqrt(self.eps)}")


@dataclass(frozen=True)
class DerivedParams:
    """Stationary point and scaled parameters of the normal form near the Hopf point."""

    params: ModelParams
    alpha: float
    alpha_star: float
    delta: float
    mu: float
    sigma1_t: float
    sigma2_t: float
    mu_t: float
    sigma_t: float

    @property
    def eps(self) -> float:
        return self.params.eps

    @property
    def c(self) -> float:
        return self.params.c

    @property
    def sqrt_eps(self) -> float:
        return math.sqrt(self.params.eps)


def _solve_alpha(a: float, c: float) -> float:
    """Root of ``alpha + c (alpha^3 - alpha) = a``; the middle one if there are three."""
    if c == 0.0:
        return float(a)

    def g(x):
        return x + c * (x * x * x - x) - a

    def dg(x):
        return 1.0 - c + 3.0 * c * x * x

    if abs(c) < 1e-6:
        # the middle root stays near a; np.roots overflows for a tiny leading coefficient
        x = float(a)
    else:
        roots = np.roots([c, 0.0, 1.0 - c, -a])
        real = np.sort(roots[np.abs(roots.imag) <= 1e-7 * np.maximum(1.0, np.abs(roots))].real)
        if real.size == 0:
            raise NoRoot("cubic for the stationary point has no real root")
        x = float(real[len(real) // 2]) if real.size >= 3 else float(real[0])
    # polish
    for _ in range(100):
        d = dg(x)
        if d == 0.0:
            break
        step = g(x) / d
        x -= step
        if abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    if not math.isfinite(x) or abs(g(x)) > 1e-12 * max(1.0, abs(a)):
        raise NoRoot(f"stationary-point solve failed (residual {g(x)!r})")
    return x


def derive_params(p: ModelParams) -> DerivedParams:
    a, c, eps = p.a, p.c, p.eps
    if abs(c) >= 1.0 / math.sqrt(eps):
        raise DegenerateC("|c| must be below 1/sqrt(eps)")
    alpha = _solve_alpha(a, c)
    alpha_star = math.sqrt((1.0 - c * eps) / 3.0)
    delta = a - alpha_star - c * (alpha_star ** 3 - alpha_star)
    mu = 3.0 * alpha_star * delta / math.sqrt(eps)
    scale = 3.0 * alpha_star * eps ** -0.75
    s1 = -scale * p.sigma1
    s2 = scale * p.sigma2
    return DerivedParams(
        params=p,
        alpha=alpha,
        alpha_star=alpha_star,
        delta=delta,
        mu=mu,
        sigma1_t=s1,
        sigma2_t=s2,
        mu_t=mu - s1 * s1,
        sigma_t=math.hypot(s1, s2),
    )


def params_from_scaled(mu_t: float, sigma_t: float, eps: float, sigma1_share: float = 0.5) -> ModelParams:
    """Invert the scaled triple ``(mu_t, sigma_t, eps)`` with ``c = 0``.

    ``sigma1_share`` is the fraction of ``sigma_t**2`` carried by the first
    noise channel; the default splits it evenly.
    """
    if not (0.0 <= sigma1_share <= 1.0):
        raise ValueError("sigma1_share must lie in [0, 1]")
    if sigma_t < 0 or eps <= 0:
        raise ValueError("need sigma_t >= 0 and eps > 0")
    alpha_star = 1.0 / math.sqrt(3.0)
    s1 = sigma_t * math.sqrt(sigma1_share)
    s2 = sigma_t * math.sqrt(1.0 - sigma1_share)
    scale = 3.0 * alpha_star * eps ** -0.75
    mu = mu_t + s1 * s1
    delta = mu * math.sqrt(eps) / (3.0 * alpha_star)
    return ModelParams(a=alpha_star + delta, c=0.0, eps=eps, sigma1=s1 / scale, sigma2=s2 / scale)
