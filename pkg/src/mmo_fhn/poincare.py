"""Counting small-amplitude oscillations between spikes.

The counting chart lives in scaled coordinates (xi, z).  A spike is an exit
from the rectangle D.  Rotations are counted by signed crossings of the
broken line F that rises from the bottom of D and then runs horizontally to
the small ball B around the focus P: one positive crossing (downward through
the horizontal arm, rightward through the vertical one) is one full
counter-clockwise turn around P.
"""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from ._jit import USE_NUMBA
from .errors import ChartInvalid, HorizonExceeded, NonFinite, StepTooCoarse
from .params import DerivedParams
from .rng import RngStream, make_rng_stream

DEFAULT_DT_SCALED = 1e-4
ONCE_BLOCK = 4096
TRAIN_BLOCK = 1 << 16
NUMPY_BATCH = 1024

SPIKE = "spike"
ROTATION = "rotation"
QUIESCENT = "quiescent"
BACKWINDING = "backwinding"
_KIND = {
    K.EV_SPIKE: SPIKE,
    K.EV_ROTATION: ROTATION,
    K.EV_QUIESCENT: QUIESCENT,
    K.EV_BACKWIND: BACKWINDING,
}


def stationary_point(d: DerivedParams) -> tuple[float, float]:
    """Focus of the scaled drift, by Newton's method from (-mu_t, 1/2)."""
    se, c, mu = d.sqrt_eps, d.c, d.mu_t
    k9 = 1.0 / (9.0 * d.alpha_star ** 2)
    xi, z = -mu, 0.5
    for _ in range(100):
        f1, f2 = K.drift_scaled(xi, z, mu, se, c, k9)
        j11 = se * (c - 3.0 * k9 * xi * xi)
        j12 = -1.0
        j21 = 2.0 * z + se * (8.0 * k9 * xi ** 3 - 6.0 * c * xi)
        j22 = 2.0 * xi - se * c
        det = j11 * j22 - j12 * j21
        dxi = (f1 * j22 - f2 * j12) / det
        dz = (j11 * f2 - j21 * f1) / det
        xi -= dxi
        z -= dz
        if abs(dxi) + abs(dz) < 1e-15:
            break
    return float(xi), float(z)


@dataclass(frozen=True)
class Chart:
    xi_lo: float
    xi_hi: float
    z_lo: float
    z_hi: float
    xi_p: float
    z_p: float
    rho: float
    z_f: float
    xi_f_lo: float
    xi_f_hi: float
    M: int = 10
    separatrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (self.xi_lo + self.rho < self.xi_p < self.xi_hi - self.rho
                and self.z_lo + self.rho < self.z_p < self.z_hi - self.rho):
            raise ChartInvalid("ball B is not inside D")
        if not (self.xi_lo < self.xi_f_lo < self.xi_f_hi):
            raise ChartInvalid("section F is empty or touches the side of D")
        if not (self.z_lo < self.z_f < self.z_hi):
            raise ChartInvalid("section F is not inside D")
        if self.M < 1:
            raise ChartInvalid("M must be positive")
        if self.separatrix is not None:
            s = self.separatrix
            inside = (s[:, 0] > self.xi_lo) & (s[:, 0] < self.xi_hi) & (s[:, 1] > self.z_lo) & (s[:, 1] < self.z_hi)
            if not np.any(inside):
                raise ChartInvalid("separatrix does not meet D")

    def to_array(self) -> np.ndarray:
        a = np.empty(K.N_CHART)
        a[K.C_XIL], a[K.C_XIH], a[K.C_ZL], a[K.C_ZH] = self.xi_lo, self.xi_hi, self.z_lo, self.z_hi
        a[K.C_XIP], a[K.C_ZP], a[K.C_RHO] = self.xi_p, self.z_p, self.rho
        a[K.C_ZF], a[K.C_FLO], a[K.C_FHI], a[K.C_M] = self.z_f, self.xi_f_lo, self.xi_f_hi, self.M
        return a

    @property
    def f_length(self) -> float:
        return (self.z_f - self.z_lo) + (self.xi_f_hi - self.xi_f_lo)

    def point_on_f(self, r: float) -> tuple[float, float]:
        """Point T(r, 0) of F by arclength; r = 0 on the bottom of D, r = 1 at the ball."""
        s = r * self.f_length
        lv = self.z_f - self.z_lo
        if s <= lv:
            return self.xi_f_lo, self.z_lo + s
        return self.xi_f_lo + (s - lv), self.z_f

    def r_of(self, xi: float, z: float) -> float:
        """Arclength parameter of a point of F."""
        if xi <= self.xi_f_lo and z <= self.z_f:
            return (z - self.z_lo) / self.f_length
        return (self.z_f - self.z_lo + xi - self.xi_f_lo) / self.f_length

    def inside(self, xi, z):
        return (self.xi_lo < xi) & (xi < self.xi_hi) & (self.z_lo < z) & (z < self.z_hi)


def default_chart(d: DerivedParams, rho: float = 0.05, f_offset: float = 0.0, z_top: float = 15.0,
                  M: int = 10, f_left: float = -2.5, with_separatrix: bool = False) -> Chart:
    """D = [-3, 3] x [-0.3, z_top], B = ball(P, rho), F a broken line through height z_P + f_offset.

    F rises from the bottom of D along xi = f_left, then runs horizontally at
    z_P + f_offset to its first contact with B (to xi_P when the offset puts
    F out of reach of B).  The vertical arm catches paths reinjected along
    the slow manifold near z = 0, so their first passage below P is counted.
    """
    xi_p, z_p = stationary_point(d)
    if not (math.isfinite(xi_p) and math.isfinite(z_p)):
        raise ChartInvalid("stationary point not found")
    z_f = z_p + f_offset
    gap = rho * rho - f_offset * f_offset
    xi_f_hi = xi_p - math.sqrt(gap) if gap > 0 else xi_p
    if not (-3.0 + rho < xi_p < 3.0 - rho and -0.3 + rho < z_p < z_top - rho):
        raise ChartInvalid(f"P=({xi_p:.4g}, {z_p:.4g}) with its ball does not fit in D")
    sep = compute_separatrix(d) if with_separatrix else None
    return Chart(-3.0, 3.0, -0.3, z_top, xi_p, z_p, rho, z_f, f_left, xi_f_hi, M, sep)


def compute_separatrix(d: DerivedParams, dt: float | None = None, t_max: float = 20.0,
                       xi_stop: float = -4.0, max_points: int = 20000) -> np.ndarray:
    """Backward orbit of the fold (-1/sqrt 3, 2/(3 sqrt 3)), returned in scaled coordinates.

    Integration is RK4 in original coordinates with step ``-dt`` and stops
    when the orbit passes ``xi_stop``, leaves [-10, 10]^2 or reaches ``t_max``.
    """
    p = d.params
    if dt is None:
        dt = p.eps / 50.0
    x, y = -1.0 / math.sqrt(3.0), 2.0 / (3.0 * math.sqrt(3.0))
    chunk = 4096
    pts = [np.array([[x, y]])]
    t = 0.0
    while t < t_max:
        seg = K.rk4_original_path(x, y, chunk, -dt, p.eps, p.a, p.c, 1)[1:]
        t += chunk * dt
        # the tail of a chunk may have blown up after leaving the box; it is cut below
        with np.errstate(over="ignore", invalid="ignore"):
            xs, zs = _orig_to_scaled_arr(seg, d)
        stop = (xs < xi_stop) | ~np.all(np.abs(seg) <= 10.0, axis=1)
        if np.any(stop):
            seg = seg[: int(np.argmax(stop)) + 1]
            pts.append(seg)
            break
        pts.append(seg)
        x, y = float(seg[-1, 0]), float(seg[-1, 1])
    orig = np.concatenate(pts)
    xs, zs = _orig_to_scaled_arr(orig, d)
    out = np.column_stack([xs, zs])
    if out.shape[0] > max_points:
        keep = np.unique(np.linspace(0, out.shape[0] - 1, max_points).astype(int))
        out = out[keep]
    return out


def _orig_to_scaled_arr(pts, d):
    from .core import original_to_scaled

    return original_to_scaled(pts[:, 0], pts[:, 1], d)


def lift_winding(path_segment, chart: Chart) -> np.ndarray:
    """Lifted angle of the segment around P, counter-clockwise positive."""
    pts = np.asarray(getattr(path_segment, "states", path_segment), dtype=float)
    dx = pts[:, 0] - chart.xi_p
    dz = pts[:, 1] - chart.z_p
    if np.any(dx * dx + dz * dz < chart.rho * chart.rho):
        raise ValueError("segment enters the ball B")
    raw = np.arctan2(dz, dx)
    inc = np.diff(raw)
    inc = (inc + math.pi) % (2.0 * math.pi) - math.pi
    if np.any(np.abs(inc) > math.pi / 2):
        i = int(np.argmax(np.abs(inc) > math.pi / 2))
        raise StepTooCoarse(f"angle jumps by {inc[i]:.3f} rad at step {i}")
    return raw[0] + np.concatenate([[0.0], np.cumsum(inc)])


# ---------------------------------------------------------------- single counts

@dataclass(frozen=True)
class SaoOutcome:
    kind: str
    r_exit: float
    t_elapsed: float
    via_ball: bool = False


def kernel_params(d: DerivedParams, dt_scaled: float = DEFAULT_DT_SCALED, dt_original: float | None = None) -> np.ndarray:
    p = d.params
    if dt_original is None:
        dt_original = p.eps / 20.0
    v = np.empty(K.N_PARAMS)
    v[K.P_MU_T], v[K.P_S1T], v[K.P_S2T] = d.mu_t, d.sigma1_t, d.sigma2_t
    v[K.P_SE], v[K.P_C], v[K.P_K9] = d.sqrt_eps, d.c, 1.0 / (9.0 * d.alpha_star ** 2)
    v[K.P_EPS], v[K.P_A], v[K.P_AST] = p.eps, p.a, d.alpha_star
    v[K.P_DTS], v[K.P_DTO] = dt_scaled, dt_original
    v[K.P_SQS], v[K.P_SQO] = math.sqrt(dt_scaled), math.sqrt(dt_original)
    v[K.P_S1O], v[K.P_S2O] = p.sigma1, p.sigma2
    v[K.P_YSH] = d.alpha_star ** 3 - d.alpha_star
    return v


def _start_state(chart: Chart, r: float):
    S = np.zeros(K.N_SF)
    I = np.zeros(K.N_SI, dtype=np.int64)
    S[K.S_XI], S[K.S_Z] = chart.point_on_f(r)
    I[K.I_MODE] = K.MODE_SCALED
    I[K.I_PHASE] = K.PH_COUNT
    # the start point counts as the first hit of F
    I[K.I_K] = 1
    return S, I


def _outcome(ev, S, I):
    if ev == K.EV_BLOWUP:
        raise NonFinite("scaled state diverged")
    return SaoOutcome(_KIND[ev], float(S[K.S_R]), float(S[K.S_TS]), bool(I[K.I_BALL]))


def _once_scalar(d, chart, r, stream, P, C, max_steps):
    S, I = _start_state(chart, r)
    left = max_steps
    while True:
        noise = stream.normals(ONCE_BLOCK)
        ev, _, taken = K.hybrid_run(S, I, noise, 0, P, C, left)
        left -= taken
        if ev == K.EV_HORIZON or (ev == K.EV_NONE and left <= 0):
            return None
        if ev != K.EV_NONE:
            return _outcome(ev, S, I)


def _once_batch_vec(chart, rs, streams, P, C, max_steps):
    m = len(rs)
    S = np.zeros((m, K.N_SF))
    I = np.zeros((m, K.N_SI), dtype=np.int64)
    for i, r in enumerate(rs):
        S[i], I[i] = _start_state(chart, r)
    rows = np.arange(m)
    results: list = [None] * m
    noise = None
    step = 0
    while rows.size and step < max_steps:
        b = step % ONCE_BLOCK
        if b == 0:
            noise = np.stack([streams[i].normals(ONCE_BLOCK) for i in rows])
        ev = K.hybrid_step_vec(S, I, noise[:, b, 0], noise[:, b, 1], P, C)
        step += 1
        hit = ev != K.EV_NONE
        if np.any(hit):
            for j in np.nonzero(hit)[0]:
                results[rows[j]] = _outcome(int(ev[j]), S[j], I[j])
            keep = ~hit
            rows, S, I, noise = rows[keep], S[keep], I[keep], noise[keep]
    return results


def count_saos_batch(d: DerivedParams, chart: Chart, rs: Sequence[float], streams: Sequence[RngStream],
                     dt: float = DEFAULT_DT_SCALED, t_max: float = 1000.0, threads: int | None = None,
                     strict: bool = True) -> list:
    """Independent single counts from F positions ``rs``, run ``i`` driven by ``streams[i]``.

    Entries that hit the horizon are ``None`` when ``strict`` is false;
    otherwise :class:`HorizonExceeded` is raised.
    """
    for r in rs:
        if not 0.0 < r < 1.0:
            raise ValueError("start position must lie in (0, 1)")
    P = kernel_params(d, dt)
    C = chart.to_array()
    max_steps = int(math.ceil(t_max / dt))
    if USE_NUMBA:
        def job(i):
            return _once_scalar(d, chart, rs[i], streams[i], P, C, max_steps)

        n_thr = threads or 1
        if n_thr > 1:
            with ThreadPoolExecutor(n_thr) as ex:
                out = list(ex.map(job, range(len(rs))))
        else:
            out = [job(i) for i in range(len(rs))]
    else:
        out = []
        for s in range(0, len(rs), NUMPY_BATCH):
            out.extend(_once_batch_vec(chart, rs[s:s + NUMPY_BATCH], streams[s:s + NUMPY_BATCH], P, C, max_steps))
    if strict and any(o is None for o in out):
        raise HorizonExceeded(f"{sum(o is None for o in out)} runs unresolved after t={t_max}")
    return out


def count_saos_once(d: DerivedParams, chart: Chart, r: float, stream: RngStream,
                    dt: float = DEFAULT_DT_SCALED, t_max: float = 1000.0) -> SaoOutcome:
    """Integrate from T(r, 0) until a spike, a full turn, a quiescent return or back-winding."""
    return count_saos_batch(d, chart, [r], [stream], dt, t_max)[0]


# ---------------------------------------------------------------- spike trains

@dataclass(frozen=True)
class SpikeRecord:
    N: int
    R: np.ndarray
    isi_scaled: float
    isi_original: float
    censored: bool = False
    via_ball: bool = False

    @property
    def entry_point(self) -> float:
        return float(self.R[0])


@dataclass
class SpikeTrain:
    records: list
    eps: float
    censor_at: int | None = None

    @property
    def N(self) -> np.ndarray:
        return np.array([r.N for r in self.records], dtype=np.int64)

    @property
    def isi_original(self) -> np.ndarray:
        return np.array([r.isi_original for r in self.records])

    @property
    def isi_scaled(self) -> np.ndarray:
        return np.array([r.isi_scaled for r in self.records])

    @property
    def censored(self) -> np.ndarray:
        return np.array([r.censored for r in self.records], dtype=bool)

    def __len__(self):
        return len(self.records)


POST_SPIKE_STATE = (-1.0, 0.0)


def _fresh_train_state():
    S = np.zeros(K.N_SF)
    I = np.zeros(K.N_SI, dtype=np.int64)
    S[K.S_X], S[K.S_Y] = POST_SPIKE_STATE
    I[K.I_MODE] = K.MODE_ORIGINAL
    I[K.I_PHASE] = K.PH_EXCURSION
    I[K.I_ARMED] = 1
    return S, I


class _TrainBook:
    """Per-chain bookkeeping shared by both backends.

    An exit from D only closes the interval once the path reaches the far
    branch; if it comes back into D first, counting resumes where it stopped.
    The interval is closed at the moment of reinjection, so every ISI is
    measured between equivalent points of consecutive excursions.
    """

    def __init__(self, quota, se, max_saos, max_steps):
        self.quota = quota
        self.se = se
        self.max_saos = max_saos
        self.max_steps = max_steps
        self.records: list = []
        self.R: list = []
        self.pending = False
        self.steps = 0

    @property
    def done(self):
        return len(self.records) >= self.quota

    def _close(self, S, I, censored):
        t_o = S[K.S_TO] + self.se * S[K.S_TS]
        n = len(self.R)
        self.records.append(SpikeRecord(n, np.array(self.R), t_o / self.se, t_o, censored, bool(I[K.I_BALL])))
        self.R = []
        self.pending = False
        S[K.S_TS] = 0.0
        S[K.S_TO] = 0.0
        self.steps = 0

    def handle(self, ev, S, I):
        """Process one event; returns True when the state was renewed."""
        if ev == K.EV_ENTRY:
            self.R = [float(S[K.S_R])]
        elif ev in (K.EV_ROTATION, K.EV_BACKWIND, K.EV_QUIESCENT):
            self.R.append(float(S[K.S_R]))
            if self.max_saos is not None and len(self.R) > self.max_saos:
                self._close(S, I, True)
                S2, I2 = _fresh_train_state()
                S[:] = S2
                I[:] = I2
                return True
        elif ev == K.EV_SPIKE:
            self.pending = True
        elif ev == K.EV_RESUME:
            self.pending = False
        elif ev == K.EV_REINJECT:
            if self.pending:
                if not self.R:
                    # escaped before reaching F: no position on F to report
                    self.R = [math.nan]
                self._close(S, I, False)
        elif ev == K.EV_BLOWUP:
            raise NonFinite("state left the guard box during a spike train")
        return False


def _train_scalar(P, C, book: _TrainBook, stream: RngStream):
    S, I = _fresh_train_state()
    noise = stream.normals(TRAIN_BLOCK)
    pos = 0
    while not book.done:
        budget = book.max_steps - book.steps
        ev, pos, taken = K.hybrid_run(S, I, noise, pos, P, C, budget)
        book.steps += taken
        if ev == K.EV_HORIZON:
            raise HorizonExceeded(f"no spike within {book.max_steps} steps")
        if ev == K.EV_NONE:
            noise = stream.normals(TRAIN_BLOCK)
            pos = 0
            continue
        book.handle(ev, S, I)
    return book.records


def _train_vec(P, C, books, streams):
    m = len(books)
    S = np.zeros((m, K.N_SF))
    I = np.zeros((m, K.N_SI), dtype=np.int64)
    for i in range(m):
        S[i], I[i] = _fresh_train_state()
    rows = np.arange(m)
    step = 0
    noise = None
    while rows.size:
        b = step % TRAIN_BLOCK
        if b == 0:
            noise = np.stack([streams[i].normals(TRAIN_BLOCK) for i in rows])
        ev = K.hybrid_step_vec(S, I, noise[:, b, 0], noise[:, b, 1], P, C)
        step += 1
        for j in range(rows.size):
            books[rows[j]].steps += 1
        hit = np.nonzero(ev != K.EV_NONE)[0]
        for j in hit:
            books[rows[j]].handle(int(ev[j]), S[j], I[j])
        over = [j for j in range(rows.size) if books[rows[j]].steps >= books[rows[j]].max_steps]
        if over:
            raise HorizonExceeded(f"no spike within {books[rows[over[0]]].max_steps} steps")
        keep = np.array([not books[i].done for i in rows], dtype=bool)
        if not keep.all():
            rows, S, I, noise = rows[keep], S[keep], I[keep], noise[keep]
    return [b.records for b in books]


def run_spike_train(d: DerivedParams, chart: Chart, n_spikes: int, master_seed: int,
                    dt_scaled: float = DEFAULT_DT_SCALED, dt_original: float | None = None,
                    n_chains: int = 1, max_saos: int | None = None, max_steps_per_isi: int = 10 ** 10,
                    threads: int | None = None) -> SpikeTrain:
    """Simulate ``n_spikes`` interspike intervals.

    Each of the ``n_chains`` independent chains starts at the post-spike state
    (x, y) = (-1, 0), integrates the original system outside D and the scaled
    one inside, and records the number N of turns around P between
    consecutive exits from D.  Chain ``j`` uses stream ``(master_seed, j)``.

    With ``max_saos`` set, an interval whose count exceeds it is closed as a
    censored record with ``N = max_saos + 1`` and the chain restarts from the
    post-spike state.  Counts up to ``max_saos`` are unaffected.
    """
    if n_spikes < 1:
        raise ValueError("n_spikes must be >= 1")
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    if max_saos is not None and max_saos < 1:
        raise ValueError("max_saos must be >= 1")
    P = kernel_params(d, dt_scaled, dt_original)
    C = chart.to_array()
    quotas = [n_spikes // n_chains + (1 if j < n_spikes % n_chains else 0) for j in range(n_chains)]
    books = [_TrainBook(q, d.sqrt_eps, max_saos, max_steps_per_isi) for q in quotas if q > 0]
    streams = [make_rng_stream(master_seed, j) for j in range(len(books))]
    if USE_NUMBA:
        n_thr = min(threads or 1, len(books))
        if n_thr > 1:
            with ThreadPoolExecutor(n_thr) as ex:
                parts = list(ex.map(lambda j: _train_scalar(P, C, books[j], streams[j]), range(len(books))))
        else:
            parts = [_train_scalar(P, C, books[j], streams[j]) for j in range(len(books))]
    else:
        parts = _train_vec(P, C, books, streams)
    records = [r for part in parts for r in part]
    return SpikeTrain(records, d.eps, max_saos)


# ---------------------------------------------------------------- clusters

@dataclass(frozen=True)
class ClusterHistogram:
    sizes: dict
    p: float
    n0: int

    def pmf(self) -> dict:
        total = sum(self.sizes.values())
        return {k: v / total for k, v in sorted(self.sizes.items())} if total else {}


def cluster_lengths(train, n0: int) -> ClusterHistogram:
    """Histogram of maximal runs of consecutive intervals with N <= n0."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    ns = train.N if isinstance(train, SpikeTrain) else np.asarray(list(train), dtype=np.int64)
    small = ns <= n0
    sizes: Counter = Counter()
    run = 0
    for s in small:
        if s:
            run += 1
        elif run:
            sizes[run] += 1
            run = 0
    if run:
        sizes[run] += 1
    p = float(small.mean()) if ns.size else float("nan")
    return ClusterHistogram(dict(sorted(sizes.items())), p, n0)


def n_histogram(ns: Iterable[int]) -> dict:
    return dict(sorted(Counter(int(n) for n in ns).items()))
