"""Binned substochastic kernel of the return map on F and its principal eigentriple."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotConverged
from .params import DerivedParams
from .poincare import SPIKE, Chart, count_saos_batch
from .rng import make_rng_stream


@dataclass
class KernelEstimate:
    bin_edges: np.ndarray
    matrix: np.ndarray
    counts: np.ndarray
    lambda0: float
    pi0: np.ndarray
    h0: np.ndarray
    lambda0_se: float = float("nan")
    horizon_counts: np.ndarray | None = None
    # per-row destination bins, -1 for a spike
    outcomes: list = field(default_factory=list, repr=False)

    @property
    def n_bins(self) -> int:
        return self.matrix.shape[0]

    @property
    def row_mass(self) -> np.ndarray:
        return self.matrix.sum(axis=1)


def principal_eigen(m, tol: float = 1e-10, max_iter: int = 100_000):
    """Perron eigenvalue with left (probability) and right eigenvectors, by power iteration.

    The returned ``pi0`` sums to one and ``h0`` is scaled so that pi0 . h0 = 1.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ValueError("matrix must be square")
    if np.any(m < 0):
        raise ValueError("matrix must be nonnegative")
    if not np.any(m):
        return 0.0, np.full(n, 1.0 / n), np.ones(n)

    def power(a):
        v = np.full(n, 1.0 / n)
        lam = 0.0
        for it in range(max_iter):
            w = a @ v
            s = w.sum()
            if s == 0.0:
                raise NotConverged("iteration collapsed to zero (nilpotent or reducible kernel)")
            lam_new = s / v.sum()
            w = w / s
            # the eigenvalue can settle long before the vector does
            if it > 0 and abs(lam_new - lam) < tol and np.abs(w - v).sum() < tol:
                return lam_new, w
            v = w
            lam = lam_new
        raise NotConverged(f"power iteration did not converge in {max_iter} iterations")

    lam_r, h = power(m)
    lam_l, pi = power(m.T)
    lam = 0.5 * (lam_r + lam_l)
    pi = pi / pi.sum()
    h = h / (pi @ h)
    return float(lam), pi, h


def _assemble(outcomes, n_bins):
    mat = np.zeros((n_bins, n_bins))
    counts = np.zeros(n_bins, dtype=np.int64)
    for i, row in enumerate(outcomes):
        row = np.asarray(row, dtype=np.int64)
        counts[i] = row.size
        if row.size:
            dest = row[row >= 0]
            np.add.at(mat[i], dest, 1.0)
            mat[i] /= row.size
    return mat, counts


def estimate_kernel(d: DerivedParams, chart: Chart, n_bins: int = 64, samples_per_bin: int = 500,
                    master_seed: int = 0, dt: float = 1e-4, t_max: float = 1000.0, n_boot: int = 100,
                    threads: int | None = None) -> KernelEstimate:
    """Monte-Carlo kernel: row i starts ``samples_per_bin`` runs at the midpoint of bin i.

    Run j of row i uses stream ``(master_seed, i * samples_per_bin + j)``.
    Rotations, back-windings and quiescent returns land in the bin of their
    exit position; spikes leave the row deficit; runs that hit the horizon
    are excluded from the row and counted in ``horizon_counts``.
    """
    if n_bins < 2 or samples_per_bin < 1:
        raise ValueError("need n_bins >= 2 and samples_per_bin >= 1")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    rs = np.repeat(mids, samples_per_bin)
    streams = [make_rng_stream(master_seed, k) for k in range(rs.size)]
    res = count_saos_batch(d, chart, rs.tolist(), streams, dt=dt, t_max=t_max, threads=threads, strict=False)
    outcomes = []
    horizon = np.zeros(n_bins, dtype=np.int64)
    for i in range(n_bins):
        row = []
        for o in res[i * samples_per_bin:(i + 1) * samples_per_bin]:
            if o is None:
                horizon[i] += 1
            elif o.kind == SPIKE:
                row.append(-1)
            else:
                row.append(min(int(o.r_exit * n_bins), n_bins - 1))
        outcomes.append(np.array(row, dtype=np.int64))
    mat, counts = _assemble(outcomes, n_bins)
    lam, pi, h = principal_eigen(mat)
    se = bootstrap_lambda0(outcomes, n_bins, n_boot, master_seed) if n_boot > 1 else float("nan")
    return KernelEstimate(edges, mat, counts, lam, pi, h, se, horizon, outcomes)


def bootstrap_lambda0(outcomes, n_bins: int, n_boot: int = 100, seed: int = 0) -> float:
    """Standard error of lambda0 from resampling each row's outcome list."""
    rng = np.random.Generator(np.random.Philox(key=seed ^ 0xB007))
    lams = []
    for _ in range(n_boot):
        resampled = [rng.choice(row, size=row.size, replace=True) if row.size else row for row in outcomes]
        mat, _ = _assemble(resampled, n_bins)
        try:
            lams.append(principal_eigen(mat)[0])
        except NotConverged:
            continue
    return float(np.std(lams, ddof=1)) if len(lams) > 1 else float("nan")


@dataclass(frozen=True)
class TailEntry:
    n: int
    p: float
    se: float
    at_risk: int


def geometric_tail(ns, censor_at: int | None = None) -> list[TailEntry]:
    """Empirical hazards P(N = n+1 | N > n) with binomial standard errors.

    Entries with no survivors are omitted.  With ``censor_at`` set, values
    above it only count as survivors, so hazards are reported for
    n + 1 <= censor_at only.
    """
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size == 0:
        raise ValueError("need at least one sample")
    top = int(ns.max()) if censor_at is None else min(int(ns.max()), censor_at)
    out = []
    for n in range(0, top):
        at_risk = int(np.sum(ns > n))
        if at_risk == 0:
            continue
        p = float(np.sum(ns == n + 1)) / at_risk
        out.append(TailEntry(n, p, math.sqrt(p * (1.0 - p) / at_risk), at_risk))
    return out


def qsd_replay(k: KernelEstimate, n_chains: int, master_seed: int = 0, max_steps: int = 10 ** 7) -> np.ndarray:
    """Number of transitions until absorption for chains started from pi0.

    Each chain starts in a bin drawn from pi0; N counts the visits to F
    before the chain falls into the cemetery state.
    """
    m = k.matrix
    n = m.shape[0]
    rng = make_rng_stream(master_seed, 0).generator
    deficit = np.clip(1.0 - m.sum(axis=1), 0.0, None)
    full = np.hstack([m, deficit[:, None]])
    cum = np.cumsum(full, axis=1)
    cum /= cum[:, -1:]
    pi = np.clip(k.pi0, 0.0, None)
    state = rng.choice(n, size=n_chains, p=pi / pi.sum())
    N = np.ones(n_chains, dtype=np.int64)
    alive = np.arange(n_chains)
    for _ in range(max_steps):
        u = rng.random(alive.size)
        nxt = (u[:, None] > cum[state]).sum(axis=1)
        dead = nxt == n
        keep = ~dead
        alive = alive[keep]
        state = nxt[keep]
        if alive.size == 0:
            return N
        N[alive] += 1
    raise NotConverged("chains did not absorb within max_steps")
