"""Adaptive composite Simpson quadrature."""
from __future__ import annotations

from typing import Callable, Iterable

DEFAULT_REL_TOL = 1e-9
ABS_FLOOR = 1e-14
MAX_DEPTH = 40
_SEED_PANELS = 8


class QuadratureError(ArithmeticError):
    """Raised when refinement hits the depth limit without meeting tolerance."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


def adaptive_simpson(
    fn: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = ABS_FLOOR,
    max_depth: int = MAX_DEPTH,
) -> float:
    """Integrate a smooth ``fn`` over [a, b].

    The interval is first cut into a few panels to obtain a scale estimate;
    the local error target is ``max(rel_tol * |scale|, abs_tol)``, halved at
    every bisection.
    """
    if b == a:
        return 0.0
    if b < a:
        return -adaptive_simpson(fn, b, a, rel_tol, abs_tol, max_depth)

    h = (b - a) / _SEED_PANELS
    xs = [a + i * h / 2 for i in range(2 * _SEED_PANELS + 1)]
    xs[-1] = b
    ys = [fn(x) for x in xs]
    panels = []
    scale = 0.0
    for i in range(_SEED_PANELS):
        x0, xm, x1 = xs[2 * i], xs[2 * i + 1], xs[2 * i + 2]
        f0, fm, f1 = ys[2 * i], ys[2 * i + 1], ys[2 * i + 2]
        s = (x1 - x0) / 6.0 * (f0 + 4 * fm + f1)
        scale += abs(s)
        panels.append((x0, x1, f0, fm, f1, s))

    tol = max(rel_tol * scale, abs_tol)
    total = 0.0
    failed = False
    stack = [(*pan, tol / _SEED_PANELS, 0) for pan in reversed(panels)]
    while stack:
        x0, x1, f0, fm, f1, whole, eps, depth = stack.pop()
        xm = 0.5 * (x0 + x1)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x1)
        fl = fn(xl)
        fr = fn(xr)
        left = (xm - x0) / 6.0 * (f0 + 4 * fl + fm)
        right = (x1 - xm) / 6.0 * (fm + 4 * fr + f1)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps or xm <= x0 or xm >= x1:
            total += left + right + delta / 15.0
        elif depth >= max_depth:
            failed = True
            total += left + right + delta / 15.0
        else:
            stack.append((xm, x1, fm, fr, f1, right, eps / 2, depth + 1))
            stack.append((x0, xm, f0, fl, fm, left, eps / 2, depth + 1))
    if failed:
        raise QuadratureError(f"no convergence on [{a}, {b}] within depth {max_depth}", total)
    return total


def split_points(a: float, b: float, extra: Iterable[float]) -> list[float]:
    """Sorted panel edges of [a, b], including interior ``extra`` points."""
    pts = {a, b}
    pts.update(x for x in extra if a < x < b)
    return sorted(pts)


def integrate_panels(
    fn: Callable[[float], float],
    edges: list[float],
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = ABS_FLOOR,
) -> float:
    """Sum of adaptive Simpson over consecutive panels (nonnegative fn)."""
    total = 0.0
    bad = None
    for lo, hi in zip(edges, edges[1:]):
        try:
            total += adaptive_simpson(fn, lo, hi, rel_tol, abs_tol)
        except QuadratureError as exc:
            total += exc.estimate
            bad = (lo, hi)
    if bad is not None:
        raise QuadratureError(f"no convergence on panel {bad}", total)
    return total


def geometric_edges(t: float, start: float = 0.0) -> list[float]:
    """Edges t - 2^k (k >= 0) down to ``start``; dense near ``t``."""
    edges = [t]
    d = 1.0
    while t - d > start:
        edges.append(t - d)
        d *= 2.0
    edges.append(start)
    return sorted(set(edges))

