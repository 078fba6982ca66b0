"""Bracketing bisection helpers.

All solvers here are plain bisection: robust, derivative-free and exactly
reproducible. They are used for one-shot parameter solves (tilt exponents,
clip constants) and for inverting monotone log-likelihood-ratio curves, so
robustness matters more than iteration count.
"""

from __future__ import annotations

from typing import Callable


def solve_increasing(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    target: float,
    *,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Solve f(y) = target for nondecreasing f by bisection.

    Requires f(lo) <= target <= f(hi); raises ValueError when the bracket
    does not contain the target. Returns the bracket midpoint once the
    bracket width falls below ``tol`` (absolute) or ``max_iter`` is hit.
    """
    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo > target or f_hi < target:
        raise ValueError(
            f"target {target!r} not bracketed by f({lo!r})={f_lo!r}, f({hi!r})={f_hi!r}"
        )
    a, b = lo, hi
    for _ in range(max_iter):
        if b - a <= tol:
            break
        m = 0.5 * (a + b)
        if f(m) < target:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def solve_decreasing(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    target: float,
    *,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Solve f(y) = target for nonincreasing f by bisection."""
    return solve_increasing(lambda y: -f(y), lo, hi, -target, tol=tol, max_iter=max_iter)


def leftmost_true(
    pred: Callable[[float], bool],
    lo: float,
    hi: float,
    *,
    tol: float = 1e-13,
    max_iter: int = 200,
) -> float:
    """Smallest y in [lo, hi] with pred(y) true, for pred monotone false->true.

    The caller must guarantee pred(hi) is true and pred(lo) is false;
    endpoint cases are expected to be short-circuited before calling.
    """
    a, b = lo, hi
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a), abs(b)):
            break
        m = 0.5 * (a + b)
        if pred(m):
            b = m
        else:
            a = m
    return b
