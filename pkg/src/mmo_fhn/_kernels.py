"""Step kernels shared by the simulators and the SAO counter.

Scalar kernels are compiled by :func:`mmo_fhn._jit.njit`.  The ``*_vec``
twins advance a batch of independent paths in lockstep with numpy and are
used when the numba backend is off.  Both consume exactly one pair of
standard normals per step and evaluate the same expressions in the same
order, so they produce bitwise-identical trajectories from identical noise.
"""
import math

import numpy as np

from ._jit import njit

# parameter vector layout
P_MU_T, P_S1T, P_S2T, P_SE, P_C, P_K9, P_EPS, P_A, P_AST, P_DTS, P_DTO, P_SQS, P_SQO, P_S1O, P_S2O, P_YSH = range(16)
N_PARAMS = 16

# chart vector layout
C_XIL, C_XIH, C_ZL, C_ZH, C_XIP, C_ZP, C_RHO, C_ZF, C_FLO, C_FHI, C_M = range(11)
N_CHART = 11

# float state: xi, z, x, y, scaled-mode clock, original-mode clock, r of last event
S_XI, S_Z, S_X, S_Y, S_TS, S_TO, S_R = range(7)
N_SF = 7
# int state: mode, phase, winding count, visited B, reinjection reached, phase before leaving D
I_MODE, I_PHASE, I_K, I_BALL, I_ARMED, I_PREV = range(6)
N_SI = 6

MODE_SCALED = 0
MODE_ORIGINAL = 1

PH_EXCURSION = 0
PH_WAIT_F = 1
PH_COUNT = 2
PH_BALL = 3
PH_AFTER_BALL = 4

EV_NONE = 0
EV_ENTRY = 1
EV_ROTATION = 2
EV_BACKWIND = 3
EV_QUIESCENT = 4
EV_SPIKE = 5
EV_HORIZON = 6
EV_BLOWUP = 7
# spike trains only: an exit from D is confirmed once the path reaches the
# far branch (x < REINJECT_X), and withdrawn if it re-enters D before that
EV_REINJECT = 8
EV_RESUME = 9

EVENT_NAMES = {
    EV_NONE: "none",
    EV_ENTRY: "entry",
    EV_ROTATION: "rotation",
    EV_BACKWIND: "backwinding",
    EV_QUIESCENT: "quiescent",
    EV_SPIKE: "spike",
    EV_HORIZON: "horizon",
    EV_BLOWUP: "blowup",
    EV_REINJECT: "reinjection",
    EV_RESUME: "resume",
}

ORIGINAL_BOX = 10.0
REINJECT_X = 0.0


# ---------------------------------------------------------------- drifts

@njit
def drift_scaled(xi, z, mu_t, se, c, k9):
    fx = 0.5 - z + se * (c * xi - k9 * xi * xi * xi)
    fz = mu_t + 2.0 * xi * z + se * (2.0 * k9 * xi * xi * xi * xi + c * (0.5 - 3.0 * xi * xi - z))
    return fx, fz


@njit
def drift_original(x, y, inv_eps, a, c):
    return (x - x * x * x + y) * inv_eps, a - x - c * y


# ---------------------------------------------------------------- plain path integrators

@njit
def em_scaled_path(xi0, z0, noise, dt, mu_t, s1t, s2t, se, c, k9, every, box):
    n = noise.shape[0]
    m = n // every + 1
    out = np.empty((m, 2))
    out[0, 0] = xi0
    out[0, 1] = z0
    xi = xi0
    z = z0
    sq = math.sqrt(dt)
    j = 1
    for i in range(n):
        g1 = noise[i, 0]
        g2 = noise[i, 1]
        fx, fz = drift_scaled(xi, z, mu_t, se, c, k9)
        xn = xi + fx * dt + s1t * sq * g1
        z = z + fz * dt - 2.0 * s1t * xi * sq * g1 + s2t * sq * g2
        xi = xn
        if not (abs(xi) <= box and abs(z) <= box):
            return out[:j], i + 1
        if (i + 1) % every == 0:
            out[j, 0] = xi
            out[j, 1] = z
            j += 1
    return out[:j], -1


@njit
def em_original_path(x0, y0, noise, dt, eps, a, c, s1, s2, every, box):
    n = noise.shape[0]
    m = n // every + 1
    out = np.empty((m, 2))
    out[0, 0] = x0
    out[0, 1] = y0
    x = x0
    y = y0
    sq = math.sqrt(dt)
    inv_eps = 1.0 / eps
    b1 = s1 / math.sqrt(eps) * sq
    b2 = s2 * sq
    j = 1
    for i in range(n):
        fx, fy = drift_original(x, y, inv_eps, a, c)
        xn = x + fx * dt + b1 * noise[i, 0]
        y = y + fy * dt + b2 * noise[i, 1]
        x = xn
        if not (abs(x) <= box and abs(y) <= box):
            return out[:j], i + 1
        if (i + 1) % every == 0:
            out[j, 0] = x
            out[j, 1] = y
            j += 1
    return out[:j], -1


@njit
def rk4_scaled_path(xi0, z0, n, dt, mu_t, se, c, k9, every):
    out = np.empty((n // every + 1, 2))
    out[0, 0] = xi0
    out[0, 1] = z0
    xi = xi0
    z = z0
    j = 1
    for i in range(n):
        a1, b1 = drift_scaled(xi, z, mu_t, se, c, k9)
        a2, b2 = drift_scaled(xi + 0.5 * dt * a1, z + 0.5 * dt * b1, mu_t, se, c, k9)
        a3, b3 = drift_scaled(xi + 0.5 * dt * a2, z + 0.5 * dt * b2, mu_t, se, c, k9)
        a4, b4 = drift_scaled(xi + dt * a3, z + dt * b3, mu_t, se, c, k9)
        xi = xi + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        z = z + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        if (i + 1) % every == 0:
            out[j, 0] = xi
            out[j, 1] = z
            j += 1
    return out[:j]


@njit
def rk4_original_path(x0, y0, n, dt, eps, a, c, every):
    out = np.empty((n // every + 1, 2))
    out[0, 0] = x0
    out[0, 1] = y0
    x = x0
    y = y0
    ie = 1.0 / eps
    j = 1
    for i in range(n):
        a1, b1 = drift_original(x, y, ie, a, c)
        a2, b2 = drift_original(x + 0.5 * dt * a1, y + 0.5 * dt * b1, ie, a, c)
        a3, b3 = drift_original(x + 0.5 * dt * a2, y + 0.5 * dt * b2, ie, a, c)
        a4, b4 = drift_original(x + dt * a3, y + dt * b3, ie, a, c)
        x = x + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        y = y + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        if (i + 1) % every == 0:
            out[j, 0] = x
            out[j, 1] = y
            j += 1
    return out[:j]


@njit
def em_linearized_terminal(z0, t0, n, dt, mu_t, s1t, s2t, noise):
    """Terminal values of dz = (mu_t + t z) dt - s1t t dW1 + s2t dW2 for a batch of paths."""
    m = noise.shape[0]
    out = np.empty(m)
    sq = math.sqrt(dt)
    for p in range(m):
        z = z0
        t = t0
        for i in range(n):
            z = z + (mu_t + t * z) * dt - s1t * t * sq * noise[p, i, 0] + s2t * sq * noise[p, i, 1]
            t = t0 + (i + 1) * dt
        out[p] = z
    return out


def em_linearized_terminal_vec(z0, t0, n, dt, mu_t, s1t, s2t, noise):
    m = noise.shape[0]
    z = np.full(m, float(z0))
    sq = math.sqrt(dt)
    t = t0
    for i in range(n):
        z = z + (mu_t + t * z) * dt - s1t * t * sq * noise[:, i, 0] + s2t * sq * noise[:, i, 1]
        t = t0 + (i + 1) * dt
    return z


# ---------------------------------------------------------------- coordinate maps used inside kernels

@njit
def _to_scaled(x, y, P):
    ast = P[P_AST]
    xi1 = (x - ast) / P[P_SE]
    eta = (y - P[P_YSH]) / P[P_EPS]
    z1 = eta - 3.0 * ast * xi1 * xi1 + 1.0 / (6.0 * ast)
    return -3.0 * ast * xi1, 3.0 * ast * z1


@njit
def _to_original(xi, z, P):
    ast = P[P_AST]
    xi1 = -xi / (3.0 * ast)
    z1 = z / (3.0 * ast)
    eta = 3.0 * ast * xi1 * xi1 + z1 - 1.0 / (6.0 * ast)
    return P[P_SE] * xi1 + ast, P[P_EPS] * eta + P[P_YSH]


@njit
def _inside_d(xi, z, C):
    return C[C_XIL] < xi < C[C_XIH] and C[C_ZL] < z < C[C_ZH]


# ---------------------------------------------------------------- chart logic

@njit
def f_crossing(xo, zo, xi, z, C):
    """Signed crossing of F by the step (xo, zo) -> (xi, z) and the r of the crossing.

    F is the broken line made of a vertical arm ``xi = C_FLO`` from the bottom
    of D up to ``z = C_ZF`` and a horizontal arm ``z = C_ZF`` from there to
    ``xi = C_FHI``.  Crossing the horizontal arm downwards or the vertical arm
    rightwards counts +1; the opposite directions count -1.  Points on the
    line belong to the side reached by a positive crossing.
    """
    zf = C[C_ZF]
    fv = C[C_FLO]
    zl = C[C_ZL]
    lv = zf - zl
    total = lv + (C[C_FHI] - fv)
    sgn = 0
    r = 0.0
    above_o = zo > zf
    above_n = z > zf
    if above_o != above_n:
        xs = xo + (zf - zo) / (z - zo) * (xi - xo)
        if fv <= xs <= C[C_FHI]:
            sgn += 1 if above_o else -1
            r = (lv + xs - fv) / total
    left_o = xo < fv
    left_n = xi < fv
    if left_o != left_n:
        zs = zo + (fv - xo) / (xi - xo) * (z - zo)
        if zl <= zs <= zf:
            sgn += 1 if left_o else -1
            r = (zs - zl) / total
    return sgn, r


@njit
def chart_step(xo, zo, xi, z, S, I, C):
    """Update the counting state for the step (xo, zo) -> (xi, z) and return an event code.

    Both points must be scaled coordinates; the old point is inside D.
    An exit before the first hit of F is reported as a spike with r = NaN.
    """
    if not _inside_d(xi, z, C):
        ph = I[I_PHASE]
        I[I_PHASE] = PH_EXCURSION
        I[I_PREV] = ph
        I[I_ARMED] = 0
        S[S_R] = 0.0 if ph >= PH_COUNT else math.nan
        return EV_SPIKE
    ev = EV_NONE
    ph = I[I_PHASE]
    sgn, r = f_crossing(xo, zo, xi, z, C)
    if sgn != 0:
        # after a backward hit the path sits on the far side of F, one crossing short
        reset = 1 if sgn > 0 else 0
        if ph == PH_WAIT_F:
            if sgn > 0:
                I[I_PHASE] = PH_COUNT
                I[I_K] = 1
                I[I_BALL] = 0
                S[S_R] = r
                ev = EV_ENTRY
        elif ph == PH_COUNT:
            k = I[I_K] + sgn
            if k == 2:
                I[I_K] = 1
                S[S_R] = r
                ev = EV_ROTATION
            elif k == -int(C[C_M]):
                I[I_K] = reset
                S[S_R] = r
                ev = EV_BACKWIND
            else:
                I[I_K] = k
        elif ph == PH_AFTER_BALL:
            I[I_PHASE] = PH_COUNT
            I[I_K] = reset
            S[S_R] = r
            ev = EV_QUIESCENT
    ph = I[I_PHASE]
    if ph >= PH_COUNT:
        dx = xi - C[C_XIP]
        dz = z - C[C_ZP]
        in_ball = dx * dx + dz * dz < C[C_RHO] * C[C_RHO]
        if in_ball and ph != PH_BALL and ev == EV_NONE:
            I[I_PHASE] = PH_BALL
            I[I_BALL] = 1
        elif ph == PH_BALL and not in_ball:
            I[I_PHASE] = PH_AFTER_BALL
    return ev


@njit
def hybrid_run(S, I, noise, pos, P, C, max_steps):
    """Advance one path until an event, the end of the noise block or the step budget.

    Returns ``(event, new_pos, steps_taken)``.  Inside D the scaled system is
    integrated with step ``P[P_DTS]``; outside D the original system with
    step ``P[P_DTO]``.
    """
    n = noise.shape[0]
    mu_t = P[P_MU_T]
    s1t = P[P_S1T]
    s2t = P[P_S2T]
    se = P[P_SE]
    c = P[P_C]
    k9 = P[P_K9]
    dts = P[P_DTS]
    dto = P[P_DTO]
    sqs = P[P_SQS]
    inv_eps = 1.0 / P[P_EPS]
    a = P[P_A]
    b1 = P[P_S1O] / se * P[P_SQO]
    b2 = P[P_S2O] * P[P_SQO]
    steps = 0
    while pos < n:
        if steps >= max_steps:
            return EV_HORIZON, pos, steps
        g1 = noise[pos, 0]
        g2 = noise[pos, 1]
        pos += 1
        steps += 1
        if I[I_MODE] == MODE_SCALED:
            xi = S[S_XI]
            z = S[S_Z]
            fx, fz = drift_scaled(xi, z, mu_t, se, c, k9)
            xn = xi + fx * dts + s1t * sqs * g1
            zn = z + fz * dts - 2.0 * s1t * xi * sqs * g1 + s2t * sqs * g2
            S[S_XI] = xn
            S[S_Z] = zn
            S[S_TS] += dts
            if not (abs(xn) < 1e6 and abs(zn) < 1e6):
                return EV_BLOWUP, pos, steps
            ev = chart_step(xi, z, xn, zn, S, I, C)
            if I[I_PHASE] == PH_EXCURSION:
                I[I_MODE] = MODE_ORIGINAL
                x, y = _to_original(xn, zn, P)
                S[S_X] = x
                S[S_Y] = y
            if ev != EV_NONE:
                return ev, pos, steps
        else:
            x = S[S_X]
            y = S[S_Y]
            fx, fy = drift_original(x, y, inv_eps, a, c)
            xn = x + fx * dto + b1 * g1
            yn = y + fy * dto + b2 * g2
            S[S_X] = xn
            S[S_Y] = yn
            S[S_TO] += dto
            if not (abs(xn) <= ORIGINAL_BOX and abs(yn) <= ORIGINAL_BOX):
                return EV_BLOWUP, pos, steps
            if I[I_ARMED] == 0 and xn < REINJECT_X:
                I[I_ARMED] = 1
                return EV_REINJECT, pos, steps
            xi, z = _to_scaled(xn, yn, P)
            if _inside_d(xi, z, C):
                I[I_MODE] = MODE_SCALED
                S[S_XI] = xi
                S[S_Z] = z
                if I[I_ARMED] == 1:
                    I[I_PHASE] = PH_WAIT_F
                else:
                    I[I_PHASE] = I[I_PREV]
                    return EV_RESUME, pos, steps
    return EV_NONE, pos, steps


# ---------------------------------------------------------------- lockstep numpy twin

def hybrid_step_vec(S, I, g1, g2, P, C):
    """One step of :func:`hybrid_run` for every row of ``S``/``I``; returns event codes."""
    m = S.shape[0]
    ev = np.zeros(m, dtype=np.int64)
    mu_t, s1t, s2t, se, c, k9 = P[P_MU_T], P[P_S1T], P[P_S2T], P[P_SE], P[P_C], P[P_K9]
    dts, dto, sqs = P[P_DTS], P[P_DTO], P[P_SQS]
    inv_eps = 1.0 / P[P_EPS]
    b1 = P[P_S1O] / se * P[P_SQO]
    b2 = P[P_S2O] * P[P_SQO]
    scaled = I[:, I_MODE] == MODE_SCALED

    # scaled rows
    idx = np.nonzero(scaled)[0]
    if idx.size:
        xi = S[idx, S_XI]
        z = S[idx, S_Z]
        fx = 0.5 - z + se * (c * xi - k9 * xi * xi * xi)
        fz = mu_t + 2.0 * xi * z + se * (2.0 * k9 * xi * xi * xi * xi + c * (0.5 - 3.0 * xi * xi - z))
        xn = xi + fx * dts + s1t * sqs * g1[idx]
        zn = z + fz * dts - 2.0 * s1t * xi * sqs * g1[idx] + s2t * sqs * g2[idx]
        S[idx, S_XI] = xn
        S[idx, S_Z] = zn
        S[idx, S_TS] += dts
        blow = ~((np.abs(xn) < 1e6) & (np.abs(zn) < 1e6))
        e = chart_step_vec(xi, z, xn, zn, S, I, C, idx)
        left = I[idx, I_PHASE] == PH_EXCURSION
        if np.any(left):
            j = idx[left]
            I[j, I_MODE] = MODE_ORIGINAL
            x, y = _to_original_vec(xn[left], zn[left], P)
            S[j, S_X] = x
            S[j, S_Y] = y
        e[blow] = EV_BLOWUP
        ev[idx] = e

    idx = np.nonzero(~scaled)[0]
    if idx.size:
        x = S[idx, S_X]
        y = S[idx, S_Y]
        fx = (x - x * x * x + y) * inv_eps
        fy = P[P_A] - x - c * y
        xn = x + fx * dto + b1 * g1[idx]
        yn = y + fy * dto + b2 * g2[idx]
        S[idx, S_X] = xn
        S[idx, S_Y] = yn
        S[idx, S_TO] += dto
        blow = ~((np.abs(xn) <= ORIGINAL_BOX) & (np.abs(yn) <= ORIGINAL_BOX))
        arm = ~blow & (I[idx, I_ARMED] == 0) & (xn < REINJECT_X)
        I[idx[arm], I_ARMED] = 1
        xi, z = _to_scaled_vec(xn, yn, P)
        inside = _inside_d_vec(xi, z, C) & ~blow & ~arm
        armed = I[idx, I_ARMED] == 1
        j = idx[inside]
        I[j, I_MODE] = MODE_SCALED
        S[j, S_XI] = xi[inside]
        S[j, S_Z] = z[inside]
        fresh = inside & armed
        back = inside & ~armed
        I[idx[fresh], I_PHASE] = PH_WAIT_F
        I[idx[back], I_PHASE] = I[idx[back], I_PREV]
        ev[idx[arm]] = EV_REINJECT
        ev[idx[back]] = EV_RESUME
        ev[idx[blow]] = EV_BLOWUP
    return ev


def _to_scaled_vec(x, y, P):
    ast = P[P_AST]
    xi1 = (x - ast) / P[P_SE]
    eta = (y - P[P_YSH]) / P[P_EPS]
    z1 = eta - 3.0 * ast * xi1 * xi1 + 1.0 / (6.0 * ast)
    return -3.0 * ast * xi1, 3.0 * ast * z1


def _to_original_vec(xi, z, P):
    ast = P[P_AST]
    xi1 = -xi / (3.0 * ast)
    z1 = z / (3.0 * ast)
    eta = 3.0 * ast * xi1 * xi1 + z1 - 1.0 / (6.0 * ast)
    return P[P_SE] * xi1 + ast, P[P_EPS] * eta + P[P_YSH]


def _inside_d_vec(xi, z, C):
    return (C[C_XIL] < xi) & (xi < C[C_XIH]) & (C[C_ZL] < z) & (z < C[C_ZH])


def f_crossing_vec(xo, zo, xi, z, C):
    zf = C[C_ZF]
    fv = C[C_FLO]
    zl = C[C_ZL]
    lv = zf - zl
    total = lv + (C[C_FHI] - fv)
    sgn = np.zeros(xi.shape, dtype=np.int64)
    r = np.zeros(xi.shape)
    above_o = zo > zf
    above_n = z > zf
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = xo + (zf - zo) / (z - zo) * (xi - xo)
        zs = zo + (fv - xo) / (xi - xo) * (z - zo)
    h = (above_o != above_n) & (fv <= xs) & (xs <= C[C_FHI])
    sgn[h] += np.where(above_o[h], 1, -1)
    r[h] = (lv + xs[h] - fv) / total
    left_o = xo < fv
    left_n = xi < fv
    v = (left_o != left_n) & (zl <= zs) & (zs <= zf)
    sgn[v] += np.where(left_o[v], 1, -1)
    r[v] = (zs[v] - zl) / total
    return sgn, r


def chart_step_vec(xo, zo, xi, z, S, I, C, idx):
    m = idx.size
    ev = np.zeros(m, dtype=np.int64)
    ph = I[idx, I_PHASE].copy()
    inside = _inside_d_vec(xi, z, C)

    out = ~inside
    ev[out] = EV_SPIKE
    S[idx[out], S_R] = np.where(ph[out] >= PH_COUNT, 0.0, np.nan)
    I[idx[out], I_PREV] = ph[out]
    I[idx[out], I_ARMED] = 0
    I[idx[out], I_PHASE] = PH_EXCURSION

    sgn, r = f_crossing_vec(xo, zo, xi, z, C)
    on_f = inside & (sgn != 0)
    reset = np.where(sgn > 0, 1, 0)

    entry = on_f & (ph == PH_WAIT_F) & (sgn > 0)
    j = idx[entry]
    I[j, I_PHASE] = PH_COUNT
    I[j, I_K] = 1
    I[j, I_BALL] = 0
    S[j, S_R] = r[entry]
    ev[entry] = EV_ENTRY

    counting = on_f & (ph == PH_COUNT)
    k = I[idx, I_K] + sgn
    rot = counting & (k == 2)
    back = counting & (k == -int(C[C_M]))
    other = counting & ~rot & ~back
    I[idx[rot], I_K] = 1
    S[idx[rot], S_R] = r[rot]
    ev[rot] = EV_ROTATION
    I[idx[back], I_K] = reset[back]
    S[idx[back], S_R] = r[back]
    ev[back] = EV_BACKWIND
    I[idx[other], I_K] = k[other]

    quiet = on_f & (ph == PH_AFTER_BALL)
    j = idx[quiet]
    I[j, I_PHASE] = PH_COUNT
    I[j, I_K] = reset[quiet]
    S[j, S_R] = r[quiet]
    ev[quiet] = EV_QUIESCENT

    ph = I[idx, I_PHASE]
    dx = xi - C[C_XIP]
    dz = z - C[C_ZP]
    in_ball = dx * dx + dz * dz < C[C_RHO] * C[C_RHO]
    active = inside & (ph >= PH_COUNT)
    enter = active & in_ball & (ph != PH_BALL) & (ev == EV_NONE)
    leave = active & (ph == PH_BALL) & ~in_ball
    I[idx[enter], I_PHASE] = PH_BALL
    I[idx[enter], I_BALL] = 1
    I[idx[leave], I_PHASE] = PH_AFTER_BALL
    return ev


@njit
def scan_scaled_events(pts, xs, S, I, C):
    """Run the counting logic along a recorded path.

    ``pts`` holds the scaled points and ``xs`` the original x of the same
    samples.  Returns ``(index, event, r)`` triples as three arrays.  A spike
    is reported at the sample where the path left D, once the path has gone
    on to reach x < REINJECT_X; exits followed by a return to D are dropped.
    """
    n = pts.shape[0]
    idx = np.empty(n, dtype=np.int64)
    evs = np.empty(n, dtype=np.int64)
    rs = np.empty(n)
    m = 0
    pending = -1
    pending_r = 0.0
    inside_prev = I[I_PHASE] != PH_EXCURSION
    for i in range(1, n):
        xi = pts[i, 0]
        z = pts[i, 1]
        if inside_prev:
            ev = chart_step(pts[i - 1, 0], pts[i - 1, 1], xi, z, S, I, C)
            if ev == EV_SPIKE:
                pending = i
                pending_r = S[S_R]
            elif ev != EV_NONE:
                idx[m] = i
                evs[m] = ev
                rs[m] = S[S_R]
                m += 1
            inside_prev = I[I_PHASE] != PH_EXCURSION
        else:
            if I[I_ARMED] == 0 and xs[i] < REINJECT_X:
                I[I_ARMED] = 1
                if pending >= 0:
                    idx[m] = pending
                    evs[m] = EV_SPIKE
                    rs[m] = pending_r
                    m += 1
                    pending = -1
            if _inside_d(xi, z, C):
                if I[I_ARMED] == 1:
                    I[I_PHASE] = PH_WAIT_F
                else:
                    I[I_PHASE] = I[I_PREV]
                    pending = -1
                inside_prev = True
    return idx[:m], evs[:m], rs[:m]


@njit
def em_linearized_coupled(z0, t0, n, dt, mu_t, s1t, s2t, noise):
    """Terminal values at steps dt/2 (fine) and dt (coarse) driven by the same Brownian path.

    ``noise`` has shape (paths, 2 n, 2); each coarse increment is the sum of
    two fine ones.
    """
    m = noise.shape[0]
    fine = np.empty(m)
    coarse = np.empty(m)
    h = 0.5 * dt
    sqh = math.sqrt(h)
    for p in range(m):
        zf = z0
        zc = z0
        for i in range(n):
            t = t0 + i * dt
            g1a = noise[p, 2 * i, 0]
            g2a = noise[p, 2 * i, 1]
            g1b = noise[p, 2 * i + 1, 0]
            g2b = noise[p, 2 * i + 1, 1]
            zf = zf + (mu_t + t * zf) * h - s1t * t * sqh * g1a + s2t * sqh * g2a
            tm = t + h
            zf = zf + (mu_t + tm * zf) * h - s1t * tm * sqh * g1b + s2t * sqh * g2b
            zc = zc + (mu_t + t * zc) * dt - s1t * t * sqh * (g1a + g1b) + s2t * sqh * (g2a + g2b)
        fine[p] = zf
        coarse[p] = zc
    return fine, coarse


def em_linearized_coupled_vec(z0, t0, n, dt, mu_t, s1t, s2t, noise):
    m = noise.shape[0]
    zf = np.full(m, float(z0))
    zc = np.full(m, float(z0))
    h = 0.5 * dt
    sqh = math.sqrt(h)
    for i in range(n):
        t = t0 + i * dt
        g1a = noise[:, 2 * i, 0]
        g2a = noise[:, 2 * i, 1]
        g1b = noise[:, 2 * i + 1, 0]
        g2b = noise[:, 2 * i + 1, 1]
        zf = zf + (mu_t + t * zf) * h - s1t * t * sqh * g1a + s2t * sqh * g2a
        tm = t + h
        zf = zf + (mu_t + tm * zf) * h - s1t * tm * sqh * g1b + s2t * sqh * g2b
        zc = zc + (mu_t + t * zc) * dt - s1t * t * sqh * (g1a + g1b) + s2t * sqh * (g2a + g2b)
    return zf, zc
