"""Scalar root finding and maximization for the equilibrium and welfare solvers.

Design goals:

- Net-benefit functions may return -inf (unstable region); every routine here
  tolerates that.
- Deterministic results: ties resolve toward the smaller argument.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable

import numpy as np
from scipy import optimize

from wvq.errors import ConvergenceFailure

logger = logging.getLogger(__name__)

ScalarFn = Callable[[float], float]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

ROOT_XTOL = 1e-10
ROOT_MAXITER = 200
SCAN_STEP = 1e-3
MONOTONE_GRID = 101


def bisect_root(
    func: ScalarFn,
    lo: float,
    hi: float,
    *,
    xtol: float = ROOT_XTOL,
    maxiter: int = ROOT_MAXITER,
) -> float:
    try:
        return float(optimize.bisect(func, lo, hi, xtol=xtol, maxiter=maxiter))
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceFailure(f"bisection on [{lo}, {hi}] failed: {exc}") from exc


def sign_change_brackets(
    func: ScalarFn, lo: float, hi: float, step: float = SCAN_STEP
) -> list[tuple[float, float]]:
    """Return every [a, b] of a dense grid over which func goes from >= 0 to < 0."""

    grid = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    values = [func(float(x)) for x in grid]
    return [
        (float(grid[i]), float(grid[i + 1]))
        for i in range(len(grid) - 1)
        if values[i] >= 0.0 > values[i + 1]
    ]


def is_nonincreasing(
    func: ScalarFn, lo: float, hi: float, n: int = MONOTONE_GRID
) -> bool:
    values = [func(float(x)) for x in np.linspace(lo, hi, n)]
    return all(b <= a + 1e-12 for a, b in zip(values, values[1:], strict=False))


def three_way_root(func: ScalarFn, lo: float = 0.0, hi: float = 1.0) -> float:
    """Equilibrium of a join probability with net benefit `func`.

    Returns `hi` if func(hi) >= 0, `lo` if func(lo) <= 0, otherwise the root of
    func on (lo, hi). When func is not monotone on a grid the first sign change
    of a dense scan is bracketed instead of [lo, hi].
    """

    if func(hi) >= 0.0:
        return hi
    if func(lo) <= 0.0:
        return lo
    if is_nonincreasing(func, lo, hi):
        return bisect_root(func, lo, hi)

    brackets = sign_change_brackets(func, lo, hi)
    logger.warning(
        "net benefit is not monotone on [%g, %g]; %d sign change(s) found by scan",
        lo,
        hi,
        len(brackets),
    )
    if not brackets:
        raise ConvergenceFailure("no sign change found by dense scan")
    a, b = brackets[0]
    return bisect_root(func, a, b)


def golden_section_max(
    func: ScalarFn, lo: float, hi: float, *, tol: float
) -> tuple[float, float]:
    """Golden-section search for a maximum of a unimodal function on [lo, hi]."""

    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = func(c), func(d)
    iterations = 0
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = func(d)
        iterations += 1
        if iterations > 10_000:
            raise ConvergenceFailure("golden-section search did not converge")
    x = 0.5 * (a + b)
    return x, func(x)


def grid_argmax(values: np.ndarray) -> tuple[int, ...]:
    """First (lexicographically smallest) index of the maximum of `values`."""

    flat = int(np.argmax(values))
    return tuple(int(i) for i in np.unravel_index(flat, values.shape))


def refine_max(
    func: ScalarFn, x0: float, f0: float, *, radius: float, tol: float
) -> tuple[float, float]:
    """Refine a grid maximizer inside [x0 − radius, x0 + radius] ∩ [0, 1].

    The refined point is kept only if it strictly improves on the grid value.
    """

    lo, hi = max(0.0, x0 - radius), min(1.0, x0 + radius)
    if hi - lo <= tol:
        return x0, f0
    x, fx = golden_section_max(func, lo, hi, tol=tol)
    if fx > f0:
        return x, fx
    return x0, f0
