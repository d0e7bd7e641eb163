"""Seeded Euler-Maruyama and RK4 integration in both coordinate frames."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import _kernels as K
from ._jit import USE_NUMBA
from .errors import NonFinite, StepTooLarge
from .params import DerivedParams, ModelParams, derive_params
from .rng import RngStream, make_rng_stream

GUARD_BOX = 10.0
SCALED_MAX_DT = 0.01
CHUNK = 1 << 18


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_max: float
    seed: int = 0
    frame: Literal["original", "scaled"] = "scaled"
    scheme: Literal["euler_maruyama", "deterministic_rk4"] = "euler_maruyama"
    stream_index: int = 0
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_max > self.dt:
            raise ValueError("t_max must exceed dt")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass
class Path:
    times: np.ndarray
    states: np.ndarray
    frame: str
    events: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)


def _noise_chunks(stream: RngStream, n: int, size: int):
    done = 0
    while done < n:
        m = min(size, n - done)
        yield stream.normals(m)
        done += m


def _run_chunked(step_fn, start, n, every, stream):
    pieces = [np.asarray(start, dtype=float).reshape(1, 2)]
    state = start
    done = 0
    # chunks are whole multiples of the decimation so the grid stays global
    for noise in _noise_chunks(stream, n, every * max(1, CHUNK // every)):
        out, fail = step_fn(state, noise)
        if fail >= 0:
            pieces.append(out[1:])
            recorded = np.concatenate(pieces)
            raise NonFinite(f"state left the guard box after {done + fail} steps (last recorded {recorded[-1]})")
        pieces.append(out[1:])
        state = out[-1]
        done += noise.shape[0]
    return np.concatenate(pieces)


def simulate_original(p: ModelParams, x0: float, y0: float, cfg: SimConfig) -> Path:
    """Integrate the FitzHugh-Nagumo system in (x, y) with time step ``cfg.dt`` (original time)."""
    if cfg.dt > p.eps / 10.0:
        raise StepTooLarge(f"dt={cfg.dt} exceeds eps/10={p.eps / 10.0}")
    n = cfg.n_steps
    every = cfg.record_every
    if cfg.scheme == "deterministic_rk4":
        states = K.rk4_original_path(float(x0), float(y0), n, cfg.dt, p.eps, p.a, p.c, every)
        if not np.all(np.abs(states) <= GUARD_BOX):
            raise NonFinite("deterministic path left the guard box")
    else:
        stream = make_rng_stream(cfg.seed, cfg.stream_index)

        def step(state, noise):
            return K.em_original_path(float(state[0]), float(state[1]), noise, cfg.dt, p.eps, p.a, p.c,
                                      p.sigma1, p.sigma2, every, GUARD_BOX)

        states = _run_chunked(step, (float(x0), float(y0)), n, every, stream)
    times = np.arange(states.shape[0]) * (cfg.dt * every)
    return Path(times, states, "original")


def simulate_scaled(d: DerivedParams, xi0: float, z0: float, cfg: SimConfig) -> Path:
    """Integrate the scaled normal form in (xi, z) (Ito drift with ``mu_t``)."""
    if cfg.dt > SCALED_MAX_DT:
        raise StepTooLarge(f"dt={cfg.dt} exceeds {SCALED_MAX_DT}")
    k9 = 1.0 / (9.0 * d.alpha_star ** 2)
    n = cfg.n_steps
    every = cfg.record_every
    if cfg.scheme == "deterministic_rk4":
        states = K.rk4_scaled_path(float(xi0), float(z0), n, cfg.dt, d.mu_t, d.sqrt_eps, d.c, k9, every)
        if not np.all(np.abs(states) <= GUARD_BOX):
            raise NonFinite("deterministic path left the guard box")
    else:
        stream = make_rng_stream(cfg.seed, cfg.stream_index)

        def step(state, noise):
            return K.em_scaled_path(float(state[0]), float(state[1]), noise, cfg.dt, d.mu_t, d.sigma1_t,
                                    d.sigma2_t, d.sqrt_eps, d.c, k9, every, GUARD_BOX)

        states = _run_chunked(step, (float(xi0), float(z0)), n, every, stream)
    times = np.arange(states.shape[0]) * (cfg.dt * every)
    return Path(times, states, "scaled")


def simulate_linearized(d: DerivedParams, z0: float, t0: float, t1: float, cfg: SimConfig) -> Path:
    """Single path of dz = (mu_t + t z) dt - s1 t dW1 + s2 dW2 on [t0, t1]."""
    if not t0 < t1:
        raise ValueError("need t0 < t1")
    n = int(round((t1 - t0) / cfg.dt))
    dt = (t1 - t0) / n
    stream = make_rng_stream(cfg.seed, cfg.stream_index)
    noise = stream.normals(n)
    sq = math.sqrt(dt)
    z = np.empty(n + 1)
    z[0] = z0
    t = t0 + dt * np.arange(n + 1)
    s1, s2 = d.sigma1_t, d.sigma2_t
    for i in range(n):
        z[i + 1] = z[i] + (d.mu_t + t[i] * z[i]) * dt - s1 * t[i] * sq * noise[i, 0] + s2 * sq * noise[i, 1]
    if not np.all(np.isfinite(z)) or np.any(np.abs(z) > 1e12):
        raise NonFinite("linearized path diverged")
    every = cfg.record_every
    return Path(t[::every], z[::every, None], "linearized")


def _batches(n_paths, per_path):
    batch = max(1, min(n_paths, (1 << 22) // per_path))
    for b, start in enumerate(range(0, n_paths, batch)):
        yield b, start, min(batch, n_paths - start)


def linearized_terminal(d: DerivedParams, z0: float, t0: float, t1: float, dt: float,
                        n_paths: int, master_seed: int) -> np.ndarray:
    """Terminal values of ``n_paths`` independent linearized paths.

    Paths are processed in batches; batch ``b`` draws its increments from
    stream ``(master_seed, b)``.
    """
    if not t0 < t1:
        raise ValueError("need t0 < t1")
    n = int(round((t1 - t0) / dt))
    dt = (t1 - t0) / n
    out = np.empty(n_paths)
    fn = K.em_linearized_terminal if USE_NUMBA else K.em_linearized_terminal_vec
    for b, start, m in _batches(n_paths, 2 * n):
        noise = make_rng_stream(master_seed, b).normals(m * n).reshape(m, n, 2)
        out[start:start + m] = fn(float(z0), float(t0), n, dt, d.mu_t, d.sigma1_t, d.sigma2_t, noise)
    return out


def linearized_terminal_coupled(d: DerivedParams, z0: float, t0: float, t1: float, dt: float,
                                n_paths: int, master_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Terminal values at steps ``dt/2`` and ``dt`` on shared Brownian paths.

    ``2 * fine - coarse`` cancels the first-order weak error of the scheme.
    """
    if not t0 < t1:
        raise ValueError("need t0 < t1")
    n = int(round((t1 - t0) / dt))
    dt = (t1 - t0) / n
    fine = np.empty(n_paths)
    coarse = np.empty(n_paths)
    fn = K.em_linearized_coupled if USE_NUMBA else K.em_linearized_coupled_vec
    for b, start, m in _batches(n_paths, 4 * n):
        noise = make_rng_stream(master_seed, b).normals(m * 2 * n).reshape(m, 2 * n, 2)
        f, c = fn(float(z0), float(t0), n, dt, d.mu_t, d.sigma1_t, d.sigma2_t, noise)
        fine[start:start + m] = f
        coarse[start:start + m] = c
    return fine, coarse


def deterministic_params(p: ModelParams) -> DerivedParams:
    """Derived parameters of the same model with both noise intensities set to zero."""
    return derive_params(ModelParams(a=p.a, c=p.c, eps=p.eps))
