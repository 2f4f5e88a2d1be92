"""Closed-form quantities of the drifted frog model and the transience test.

Continuous model: Poisson field of intensity f on [0, inf), drift ``lam``.
Discrete model: Poisson(f(j)) sleepers at j >= 1, left-step probability p,
``rho = (1-p)/p`` and ``kappa = (1-p)/(2p-1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .intensity import CONTINUOUS, IntensityFn, ParameterError
from .quadrature import (
    ABS_FLOOR,
    DEFAULT_REL_TOL,
    QuadratureError,
    adaptive_simpson,
    geometric_edges,
    split_points,
)

STANDARD = "standard"
REMARK6 = "remark6"

DIVERGENT = "Divergent"
CONVERGENT = "Convergent"
INCONCLUSIVE = "Inconclusive"

TRANSIENT = "Transient"
NON_TRANSIENT = "NonTransient"
UNKNOWN = "Unknown"

_STATUS = {DIVERGENT: TRANSIENT, CONVERGENT: NON_TRANSIENT, INCONCLUSIVE: UNKNOWN}

# Largest finite horizon used by the default schedule (2**1000 ~ 1e301).
CONTINUOUS_HORIZON_LIMIT = 2.0**1000
# Largest J summed term by term.
DISCRETE_HORIZON_LIMIT = 2**22
_SUM_CHUNK = 1 << 20


@dataclass(frozen=True)
class Continuous:
    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ParameterError("drift lambda must be positive")

    @property
    def drift_factor(self) -> float:
        return 2.0 * self.lam


@dataclass(frozen=True)
class Discrete:
    p: float

    def __post_init__(self):
        if not 0.5 < self.p < 1.0:
            raise ParameterError("p must lie strictly between 1/2 and 1")
        alt = self.rho / (1.0 - self.rho)
        if not math.isclose(self.kappa, alt, rel_tol=1e-14 / (2 * self.p - 1), abs_tol=0):
            raise ParameterError(f"inconsistent kappa for p={self.p}: {self.kappa} vs {alt}")

    @property
    def rho(self) -> float:
        return (1.0 - self.p) / self.p

    @property
    def kappa(self) -> float:
        return (1.0 - self.p) / (2.0 * self.p - 1.0)


ModelParams = Continuous | Discrete


def _panel_eval(f: IntensityFn, b: float) -> Callable[[float], float]:
    """f on a panel ending at b, using the left limit at b itself."""
    fr = f._raw
    lim = f.left_limit(b)
    return lambda u: fr(u) if u < b else lim


def _integrate_composed(f, g, edges, rel_tol, abs_tol=ABS_FLOOR):
    """Sum over panels of int g(f(x), x) dx, with f right-continuous at edges."""
    total = 0.0
    bad = None
    for lo, hi in zip(edges, edges[1:]):
        fp = _panel_eval(f, hi)
        try:
            total += adaptive_simpson(lambda x, fp=fp: g(fp(x), x), lo, hi, rel_tol, abs_tol)
        except QuadratureError as exc:
            total += exc.estimate
            bad = (lo, hi)
    if bad is not None:
        raise QuadratureError(f"no convergence on panel {bad}", total)
    return total


# ---------------------------------------------------------------------------
# lambda_t and tau_j


def lambda_t(f: IntensityFn, t: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Poisson mean of surviving births at time t: int_0^t f(u) e^{-(t-u)} du."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 0.0
    edges = split_points(0.0, t, geometric_edges(t) + f.breakpoints_in(0.0, t))
    return _integrate_composed(f, lambda v, u: v * math.exp(u - t), edges, rel_tol)


@njit(cache=True)
def _tau_recurrence(fvals, rho):
    # fvals[i] = f(i + 1); out[i] = tau_{i+1}
    out = np.empty(fvals.size)
    acc = 0.0
    for i in range(fvals.size):
        out[i] = acc
        acc = rho * (acc + fvals[i])
    return out


def tau_sequence(f: IntensityFn, params: Discrete, J: int) -> np.ndarray:
    """Array ``[tau_1, ..., tau_J]``."""
    if J < 1:
        raise ValueError("J must be >= 1")
    fvals = f.evaluate(np.arange(1, J + 1, dtype=float))
    return _tau_recurrence(fvals, params.rho)


def tau_j(f: IntensityFn, params: Discrete, j: int) -> float:
    """sum_{i<j} rho^(j-i) f(i), via tau_{i+1} = rho (tau_i + f(i))."""
    if j < 1:
        raise ValueError("j must be >= 1")
    return float(tau_sequence(f, params, j)[-1])


# ---------------------------------------------------------------------------
# criterion integral / sum


def criterion_integrand(f: IntensityFn, lam: float, t: float, variant: str = STANDARD) -> float:
    v = f(t)
    w = math.exp(-v / (2.0 * lam))
    if variant == STANDARD:
        return w * v if v > 0 else 0.0
    if variant == REMARK6:
        return w * (1.0 + v)
    raise ValueError(f"unknown variant {variant!r}")


def _integrand_fn(lam: float, variant: str) -> Callable[[float, float], float]:
    """Criterion integrand as a function of (f(t), t)."""
    k = 1.0 / (2.0 * lam)
    if variant == STANDARD:
        return lambda v, t: v * math.exp(-k * v) if v > 0 else 0.0
    if variant == REMARK6:
        return lambda v, t: (1.0 + v) * math.exp(-k * v)
    raise ValueError(f"unknown variant {variant!r}")


def _dyadic_edges(lo: float, hi: float) -> list[float]:
    edges = [lo]
    x = max(1.0, 2.0 ** math.floor(math.log2(lo))) if lo > 0 else 1.0
    while x < hi:
        if x > lo:
            edges.append(x)
        x *= 2.0
    edges.append(hi)
    return edges


def _block_integral(f, g, lo, hi, rel_tol):
    edges = split_points(lo, hi, _dyadic_edges(lo, hi) + f.breakpoints_in(lo, hi))
    return _integrate_composed(f, g, edges, rel_tol)


def partial_integral(
    f: IntensityFn,
    lam: float,
    T: float,
    rel_tol: float = DEFAULT_REL_TOL,
    variant: str = STANDARD,
) -> float:
    """int_0^T of the criterion integrand."""
    if T < 0:
        raise ValueError("T must be >= 0")
    if T == 0:
        return 0.0
    return _block_integral(f, _integrand_fn(lam, variant), 0.0, T, rel_tol)


def _summands(f: IntensityFn, kappa: float, lo: int, hi: int) -> float:
    """sum_{j=lo}^{hi} exp(-kappa f(j)), chunked."""
    total = 0.0
    a = lo
    while a <= hi:
        b = min(hi, a + _SUM_CHUNK - 1)
        js = np.arange(a, b + 1, dtype=float)
        total += float(np.exp(-kappa * f.evaluate(js)).sum())
        a = b + 1
    return total


def partial_sum(f: IntensityFn, params: Discrete, J: int) -> float:
    """sum_{j=1}^J exp(-kappa f(j))."""
    if J < 1:
        raise ValueError("J must be >= 1")
    return _summands(f, params.kappa, 1, int(J))


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Schedule:
    """Doubling horizons ``T0 * 2**k`` for k = 0..doublings.

    ``doublings`` is an upper bound: horizons are clipped to where the
    intensity's closed form stays exact (and, for sums, to
    ``DISCRETE_HORIZON_LIMIT``), never below 4 doublings.
    """

    T0: float = 16.0
    doublings: int = 990
    delta: float = 1e-3
    ratio: float = 0.75
    divergent_margin: float = 0.1
    convergent_margin: float = 0.2

    def __post_init__(self):
        if not self.T0 > 0:
            raise ParameterError("T0 must be positive")
        if self.doublings < 4:
            raise ParameterError("need at least 4 doublings")
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        if not 0 < self.ratio < 1:
            raise ParameterError("ratio must lie in (0, 1)")

    def horizons(self, limit: float = math.inf) -> list[float]:
        hs = [self.T0 * 2.0**k for k in range(self.doublings + 1)]
        kept = [h for h in hs if h <= limit]
        return kept if len(kept) >= 5 else hs[:5]


@dataclass
class CriterionReport:
    checkpoints: list[tuple[float, float]]
    increments: list[float]
    classification: str
    implied_model_status: str
    variant: str = STANDARD
    tail_exponent: float = math.nan
    hypotheses_hold: bool = True
    notes: list[str] = field(default_factory=list)

    @property
    def final_value(self) -> float:
        return self.checkpoints[-1][1]

    def as_dict(self) -> dict:
        return {
            "classification": self.classification,
            "impliedModelStatus": self.implied_model_status,
            "variant": self.variant,
            "tailExponent": None if math.isnan(self.tail_exponent) else self.tail_exponent,
            "hypothesesHold": self.hypotheses_hold,
            "checkpoints": [list(c) for c in self.checkpoints],
            "increments": list(self.increments),
        }


def tail_exponent(horizons: list[float], increments: list[float]) -> float:
    """Power-law decay rate of the block increments in log(horizon).

    Increment k covers [H_k, H_{k+1}].  If the increments behave like
    (log H)^(-beta), the series of increments is summable iff beta > 1; an
    exponentially decaying tail gives a large beta, a growing one a negative
    beta.  Estimated by the secant between the middle and the last block.
    """
    n = len(increments)
    mid = n // 2
    h_mid, h_last = horizons[mid], horizons[n - 1]
    d_mid, d_last = increments[mid], increments[n - 1]
    if h_mid <= 1.0 or h_last <= h_mid:
        return math.nan
    if d_last <= 0.0:
        return math.inf
    if d_mid <= 0.0:
        return math.nan
    dl = math.log(math.log(h_last)) - math.log(math.log(h_mid))
    return -(math.log(d_last) - math.log(d_mid)) / dl


def _decide(horizons, values, schedule: Schedule) -> tuple[str, list[float], float]:
    increments = [b - a for a, b in zip(values, values[1:])]
    if len(increments) < 4:
        raise ValueError("need at least 5 horizons")
    last3 = increments[-3:]
    beta = tail_exponent(horizons, increments)
    tiny = schedule.delta * 1e-3
    if all(d < tiny for d in last3):
        return CONVERGENT, increments, beta
    prev = increments[-4:-1]
    if all(a > 0 and b / a <= schedule.ratio for a, b in zip(prev, last3)):
        return CONVERGENT, increments, beta
    if beta >= 1.0 + schedule.convergent_margin:
        return CONVERGENT, increments, beta
    if all(d >= schedule.delta for d in last3) and beta <= 1.0 + schedule.divergent_margin:
        return DIVERGENT, increments, beta
    return INCONCLUSIVE, increments, beta


def classify(
    partial_fn: Callable[[float], float],
    schedule: Schedule = Schedule(doublings=10),
    variant: str = STANDARD,
) -> CriterionReport:
    """Classify divergence of ``partial_fn`` along the doubling schedule.

    Convergent: the last three increments are all below ``delta * 1e-3``, or
    the last three increment ratios are all at most ``ratio``, or the tail
    exponent is at least ``1 + convergent_margin``.  Divergent: the last three
    increments are all at least ``delta`` and the tail exponent is at most
    ``1 + divergent_margin``.  Anything else is Inconclusive.
    """
    hs = schedule.horizons()
    vals = [partial_fn(h) for h in hs]
    cls, inc, beta = _decide(hs, vals, schedule)
    return CriterionReport(list(zip(hs, vals)), inc, cls, _STATUS[cls], variant, beta)


def criterion_report(
    f: IntensityFn,
    model: ModelParams,
    schedule: Schedule = Schedule(),
    variant: str = STANDARD,
    rel_tol: float = DEFAULT_REL_TOL,
) -> CriterionReport:
    """Evaluate the transience criterion of ``model`` for intensity ``f``.

    Values are always reported from 0; ``hypotheses_hold`` records whether f
    is eventually nondecreasing, which the equivalence with transience needs.
    """
    notes = []
    if isinstance(model, Continuous):
        if f.domain != CONTINUOUS:
            raise ParameterError("continuous model needs a continuous intensity")
        limit = min(CONTINUOUS_HORIZON_LIMIT, f.resolution_limit)
        hs = schedule.horizons(limit / 2.0)
        g = _integrand_fn(model.lam, variant)
        vals = [_block_integral(f, g, 0.0, hs[0], rel_tol)]
        for lo, hi in zip(hs, hs[1:]):
            vals.append(vals[-1] + _block_integral(f, g, lo, hi, rel_tol))
    else:
        if variant != STANDARD:
            raise ParameterError("the remark6 variant is defined for the continuous model only")
        limit = min(DISCRETE_HORIZON_LIMIT, f.resolution_limit)
        hs = [float(int(h)) for h in schedule.horizons(limit)]
        kappa = model.kappa
        vals = [_summands(f, kappa, 1, int(hs[0]))]
        for lo, hi in zip(hs, hs[1:]):
            vals.append(vals[-1] + _summands(f, kappa, int(lo) + 1, int(hi)))
    if len(hs) < schedule.doublings + 1:
        notes.append(f"horizon clipped at {hs[-1]:.6g}")
    cls, inc, beta = _decide(hs, vals, schedule)
    hyp = math.isfinite(f.monotone_from)
    if not hyp:
        notes.append("intensity is not eventually nondecreasing; criterion equivalence not guaranteed")
    return CriterionReport(list(zip(hs, vals)), inc, cls, _STATUS[cls], variant, beta, hyp, notes)


# ---------------------------------------------------------------------------
# expected counts


def expected_V(f: IntensityFn, T: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Expected number of 0 -> 1 jumps of Y on [0, T] (drift 1/2 normalisation).

    int_0^T exp(-lambda_t) (1 - e^{-t}) f(t) dt, with lambda_t carried panel
    to panel: lambda_x = e^{-(x-a)} lambda_a + int_a^x f(u) e^{-(x-u)} du.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if T == 0:
        return 0.0
    grid = [float(k) for k in range(1, int(math.ceil(T)))]
    edges = split_points(0.0, T, grid + f.breakpoints_in(0.0, T))
    total = 0.0
    lam_a = 0.0
    failed = False
    for a, b in zip(edges, edges[1:]):
        fr = _panel_eval(f, b)

        def lam_at(x, a=a, lam_a=lam_a, fr=fr):
            if x == a:
                return lam_a
            inner = adaptive_simpson(lambda u: fr(u) * math.exp(u - x), a, x, rel_tol)
            return math.exp(a - x) * lam_a + inner

        def outer(x, lam_at=lam_at, fr=fr):
            v = fr(x)
            if v == 0.0:
                return 0.0
            return math.exp(-lam_at(x)) * -math.expm1(-x) * v

        try:
            total += adaptive_simpson(outer, a, b, rel_tol)
        except QuadratureError as exc:
            total += exc.estimate
            failed = True
        lam_a = lam_at(b)
    if failed:
        raise QuadratureError("expected_V did not converge", total)
    return total


def expected_K(f: IntensityFn, params: Discrete, J: int) -> float:
    """sum_{j=1}^J exp(-tau_j) (1 - rho^j)."""
    taus = tau_sequence(f, params, J)
    j = np.arange(1, J + 1, dtype=float)
    return float(np.sum(np.exp(-taus) * -np.expm1(j * math.log(params.rho))))


# ---------------------------------------------------------------------------
# left of the origin


def _left_blocks(f_left: IntensityFn, model: ModelParams, rel_tol: float):
    """Yield (upper end, contribution) of successive doubling blocks."""
    if isinstance(model, Continuous):
        c = 2.0 * model.lam
        g = lambda v, x: v * math.exp(-c * x)  # noqa: E731
        lo, hi = 0.0, 1.0
        while True:
            edges = split_points(lo, hi, f_left.breakpoints_in(lo, hi))
            yield hi, _integrate_composed(f_left, g, edges, rel_tol, abs_tol=0.0)
            lo, hi = hi, 2.0 * hi
    else:
        log_rho = math.log(model.rho)
        lo, hi = 1, 1
        while True:
            js = np.arange(lo, hi + 1, dtype=float)
            yield float(hi), float(np.sum(np.exp(js * log_rho) * f_left.evaluate(js)))
            lo, hi = hi + 1, 2 * hi + 1


def left_side_mean(
    f_left: IntensityFn,
    model: ModelParams,
    tol: float = 1e-10,
    max_doublings: int = 60,
    rel_tol: float = DEFAULT_REL_TOL,
) -> float:
    """Mean number of frogs from the negative half-line that hit the origin.

    ``f_left`` is given mirrored: ``f_left(x)`` is the intensity at ``-x``.
    Continuous: int_0^inf e^{-2 lam x} f_left(x) dx.  Discrete:
    sum_{j>=1} rho^j f_left(j).  Returns ``inf`` if the doubling blocks have
    not dropped below ``tol`` after ``max_doublings``.
    """
    total = 0.0
    for k, (_, part) in enumerate(_left_blocks(f_left, model, rel_tol)):
        total += part
        if part < tol and k > 0:
            return total
        if not math.isfinite(total) or k >= max_doublings:
            return math.inf


def left_truncation(
    f_left: IntensityFn, model: ModelParams, eps: float = 1e-6, rel_tol: float = DEFAULT_REL_TOL
) -> float:
    """Smallest doubling horizon beyond which the remaining hitter mean is < eps."""
    total = left_side_mean(f_left, model, rel_tol=rel_tol)
    if not math.isfinite(total):
        raise ParameterError("left-side mean diverges; no finite truncation")
    acc = 0.0
    for hi, part in _left_blocks(f_left, model, rel_tol):
        acc += part
        if total - acc < eps:
            return hi
