"""Compiled evaluation of S(X|E) and the worst-case searches.

The probe Gram matrix only couples A with C and B with D, so in Gram
coordinates Eve's conditional states split into 2x2 blocks:

    X=0: (1-q)[wa|C><C| + wb|D><D|] + q[wa|A><A| + wb|B><B|]
    X=1: same with A<->C, B<->D
    E:   wa(|A><A| + |C><C|) + wb(|B><B| + |D><D|)

with wa = (1-D)/2, wb = D/2 and q the probability that Alice's bit is
flipped by her noise.  ``states.py`` builds the same operators explicitly;
the test suite holds both routes together.
"""

import math

import numpy as np
from numba import njit

BB84 = 0
SIX_STATE = 1

P_MAX = 1.0 - 1e-9
LAMBDA4_GRID = 41
LAMBDA4_TOL = 1e-6  # relative to the width of the feasible range
SCAN_POINTS = 21

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_TINY = 1e-14


@njit(cache=True)
def _eta(x):
    if x <= _TINY:
        return 0.0
    return -x * math.log2(x)


@njit(cache=True)
def _pair_entropy(w1, w2, overlap):
    # eigenvalues of w1|u><u| + w2|v><v| with <u|v> = overlap
    t = 0.5 * (w1 + w2)
    d = math.sqrt(0.25 * (w1 - w2) ** 2 + w1 * w2 * overlap * overlap)
    return _eta(t + d) + _eta(t - d)


@njit(cache=True)
def binary_entropy(q):
    if q <= 0.0 or q >= 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


@njit(cache=True)
def sxe(D, q, ac, bd):
    wa = 0.5 * (1.0 - D)
    wb = 0.5 * D
    block = _pair_entropy((1.0 - q) * wa, q * wa, ac) + _pair_entropy((1.0 - q) * wb, q * wb, bd)
    eve = _eta(wa * (1.0 + ac)) + _eta(wa * (1.0 - ac)) + _eta(wb * (1.0 + bd)) + _eta(wb * (1.0 - bd))
    # both X blocks share a spectrum
    return 2.0 * block - eve


@njit(cache=True)
def qber(D, p):
    return (1.0 - p) * D + 0.5 * p


@njit(cache=True)
def disturbance(Q, p):
    D = (Q - 0.5 * p) / (1.0 - p)
    if D < 0.0:
        return 0.0
    if D > 0.5:
        return 0.5
    return D


@njit(cache=True)
def _clip1(x):
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


@njit(cache=True)
def overlaps(protocol, D, p, lam4):
    Q = qber(D, p)
    if protocol == SIX_STATE:
        return _clip1((1.0 - 2.0 * Q) / ((1.0 - p) * (1.0 - D))), 0.0
    ac = (1.0 - 3.0 * Q + 2.0 * lam4) / ((1.0 - p) * (1.0 - D))
    bd = 0.0
    scale = (1.0 - p) * D
    if scale > 0.0:
        bd = (Q - 2.0 * lam4) / scale
    return _clip1(ac), _clip1(bd)


@njit(cache=True)
def lambda4_range(D, p):
    Q = qber(D, p)
    lo = max(0.0, 0.25 * p, 2.0 * Q - 1.0 + 0.25 * p)
    hi = min(Q, Q - 0.25 * p)
    if D == 0.0:
        lo = 0.25 * p
        hi = lo
    if lo > hi:
        lo = 0.5 * (lo + hi)
        hi = lo
    return lo, hi


@njit(cache=True)
def flip_probability(scenario, p):
    # Alice's bit is flipped by her depolarizing (S1), by the equivalent
    # pre-Eve noise (S2) or by classical noise (S4)
    if scenario == 1 or scenario == 2 or scenario == 4:
        return 0.5 * p
    return 0.0


@njit(cache=True)
def _sxe_at(protocol, scenario, D, p, lam4):
    ac, bd = overlaps(protocol, D, p, lam4)
    return sxe(D, flip_probability(scenario, p), ac, bd)


@njit(cache=True)
def min_sxe(protocol, scenario, D, p):
    """Eve's best S(X|E) at fixed (D, p); returns (value, lambda4)."""
    if protocol == SIX_STATE:
        return _sxe_at(protocol, scenario, D, p, 0.0), math.nan
    lo, hi = lambda4_range(D, p)
    if hi - lo <= 0.0:
        return _sxe_at(protocol, scenario, D, p, lo), lo
    n = LAMBDA4_GRID
    step = (hi - lo) / (n - 1)
    best = 0
    best_val = math.inf
    for i in range(n):
        v = _sxe_at(protocol, scenario, D, p, lo + i * step)
        if v < best_val:
            best_val = v
            best = i
    a = lo + max(best - 1, 0) * step
    b = lo + min(best + 1, n - 1) * step
    tol = max(LAMBDA4_TOL * (hi - lo), 1e-15)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = _sxe_at(protocol, scenario, D, p, c)
    fd = _sxe_at(protocol, scenario, D, p, d)
    it = 0
    while b - a > tol and it < 200:
        it += 1
        if fc < fd:
            b = d
            d = c
            fd = fc
            c = b - _INV_PHI * (b - a)
            fc = _sxe_at(protocol, scenario, D, p, c)
        else:
            a = c
            c = d
            fc = fd
            d = a + _INV_PHI * (b - a)
            fd = _sxe_at(protocol, scenario, D, p, d)
    x = 0.5 * (a + b)
    fx = _sxe_at(protocol, scenario, D, p, x)
    if fx <= best_val:
        return fx, x
    return best_val, lo + best * step


@njit(cache=True)
def worst_case(protocol, scenario, Q_obs, p, zeta, f_ec, leak_observed, n_points):
    """Minimum of S(X|E) - f_EC H(X|Y) over the statistical interval around Q_obs.

    Returns (objective, Q', S(X|E), H(X|Y), lambda4) at the minimizer.
    """
    lo = max(0.0, Q_obs - zeta)
    hi = min(0.5, Q_obs + zeta)
    if hi - lo <= 0.0 or n_points < 2:
        n_points = 1
    best_obj = math.inf
    best_q = lo
    best_s = 0.0
    best_h = 0.0
    best_l = math.nan
    for k in range(n_points):
        if n_points == 1:
            qp = Q_obs
        else:
            qp = lo + (hi - lo) * k / (n_points - 1)
        D = disturbance(qp, p)
        s, lam = min_sxe(protocol, scenario, D, p)
        if leak_observed:
            h = binary_entropy(Q_obs)
        else:
            h = binary_entropy(qber(D, p))
        obj = s - f_ec * h
        if obj < best_obj:
            best_obj = obj
            best_q = qp
            best_s = s
            best_h = h
            best_l = lam
    return best_obj, best_q, best_s, best_h, best_l


@njit(cache=True)
def worst_case_many(protocol, scenario, Q_obs, p, zetas, f_ec, leak_observed, n_points):
    out = np.empty((zetas.shape[0], 5))
    for i in range(zetas.shape[0]):
        r = worst_case(protocol, scenario, Q_obs, p, zetas[i], f_ec, leak_observed, n_points)
        for j in range(5):
            out[i, j] = r[j]
    return out
