"""Deterministic derivative-free 1-D searches."""

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_min(f, a, b, tol):
    """Golden-section search on [a, b]; returns (x, f(x)).

    Assumes ``f`` is unimodal on the bracket.  Stops once the bracket is
    narrower than ``tol``.
    """
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    # the bracket cannot shrink below float resolution
    tol = max(tol, 4e-16 * max(abs(a), abs(b)))
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def grid_then_golden(f, lo, hi, n_grid, tol, maximize=False):
    """Coarse grid on [lo, hi], then golden refinement between the best point's neighbours.

    The grid winner is kept unless refinement strictly improves on it, so
    the result is never worse than the best grid value.  Ties on the grid go
    to the smallest argument.
    """
    sign = -1.0 if maximize else 1.0
    g = lambda x: sign * f(x)
    if hi <= lo or n_grid < 2:
        return lo, f(lo)
    xs = np.linspace(lo, hi, n_grid)
    vals = [g(x) for x in xs]
    i = int(np.argmin(vals))
    best_x, best_v = float(xs[i]), vals[i]
    a, b = float(xs[max(i - 1, 0)]), float(xs[min(i + 1, n_grid - 1)])
    if b - a > tol:
        x, v = golden_min(g, a, b, tol)
        if v < best_v:
            best_x, best_v = x, v
    return best_x, sign * best_v


def bisect_root(f, lo, hi, tol):
    """Bisection for the sign change of ``f`` with f(lo) > 0 >= f(hi)."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo, hi
