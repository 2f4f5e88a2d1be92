"""Intensity functions for the sleeping-frog Poisson field.

Each intensity is an immutable object that can be evaluated pointwise,
vectorised over numpy arrays, and lowered to a compact ``(code, params)``
pair consumed by the numba simulation kernels (see :mod:`frogdrift._fkern`).

Piecewise definitions use half-open branches ``[lo, hi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _fkern as fk

CONTINUOUS = "continuous"
DISCRETE = "discrete"

# Above 2**52 the unit plateaus of the dyadic examples stop being representable.
DYADIC_RESOLUTION = 2.0**52


class DomainError(ValueError):
    """Evaluation point outside the intensity's domain."""


class ParameterError(ValueError):
    """Invalid model or intensity parameter."""


class IntensityFn:
    """Base class.  Subclasses provide ``_raw`` and ``_raw_array``."""

    domain: str = CONTINUOUS

    # -- metadata -----------------------------------------------------
    @property
    def monotone_from(self) -> float:
        """f is nondecreasing on ``[monotone_from, inf)``; ``inf`` if never."""
        return 0.0

    @property
    def resolution_limit(self) -> float:
        """Largest argument at which the closed form is still exact in floats."""
        return math.inf

    # -- evaluation ---------------------------------------------------
    def _check(self, x):
        if not math.isfinite(x) or x < 0:
            raise DomainError(f"{x!r} is outside the domain of {self!r}")
        if self.domain == DISCRETE and (x < 1 or x != math.floor(x)):
            raise DomainError(f"{x!r} is not a positive integer")

    def __call__(self, x) -> float:
        x = float(x)
        self._check(x)
        return self._raw(x)

    eval = __call__

    def evaluate(self, xs) -> np.ndarray:
        """Vectorised evaluation (no domain checks)."""
        return self._raw_array(np.asarray(xs, dtype=float))

    def _raw_array(self, xs: np.ndarray) -> np.ndarray:
        return np.array([self._raw(float(x)) for x in xs.ravel()]).reshape(xs.shape)

    def left_limit(self, x: float) -> float:
        """lim f(y) as y increases to x.  Equal to f(x) where f is continuous."""
        return self._raw(x)

    def breakpoints_in(self, lo: float, hi: float) -> list[float]:
        """Branch points of f in ``(lo, hi]``, ascending and deduplicated."""
        return []

    def sup_on(self, lo: float, hi: float) -> float:
        """Supremum of f over ``[lo, hi]``."""
        cands = [self._raw(lo), self._raw(hi)]
        cands += [self.left_limit(b) for b in self.breakpoints_in(lo, hi)]
        return max(cands)

    def kernel_spec(self) -> tuple[int, np.ndarray]:
        code, fam = self._family_spec()
        return code, np.concatenate(([1.0, 0.0, 1.0], np.asarray(fam, dtype=float)))

    def _family_spec(self) -> tuple[int, Sequence[float]]:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(IntensityFn):
    c: float
    domain: str = CONTINUOUS

    def __post_init__(self):
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ParameterError("constant intensity must be finite and >= 0")

    def _raw(self, x):
        return float(self.c)

    def _raw_array(self, xs):
        return np.full(xs.shape, float(self.c))

    def _family_spec(self):
        return fk.CONST, [self.c]


@dataclass(frozen=True)
class Linear(IntensityFn):
    """f(x) = a * x."""

    a: float = 1.0
    domain: str = CONTINUOUS

    def __post_init__(self):
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise ParameterError("slope must be finite and >= 0")

    def _raw(self, x):
        return self.a * x

    def _raw_array(self, xs):
        return self.a * xs

    def _family_spec(self):
        return fk.LINEAR, [self.a]


@dataclass(frozen=True)
class LogFamily(IntensityFn):
    """f(t) = C log(t + a)."""

    C: float
    a: float = 1.0
    domain: str = CONTINUOUS

    def __post_init__(self):
        if not (self.C >= 0 and math.isfinite(self.C)):
            raise ParameterError("C must be finite and >= 0")
        if not self.a >= 1:
            raise ParameterError("shift a must be >= 1 to keep f nonnegative")

    def _raw(self, x):
        return self.C * math.log(x + self.a)

    def _raw_array(self, xs):
        return self.C * np.log(xs + self.a)

    def _family_spec(self):
        return fk.LOG, [self.C, self.a]


@dataclass(frozen=True)
class LogLogFamily(IntensityFn):
    """f(t) = C1 log(t + 1) + C2 log log(t + e)."""

    C1: float
    C2: float
    domain: str = CONTINUOUS

    def __post_init__(self):
        if not (self.C1 >= 0 and self.C2 >= 0):
            raise ParameterError("C1 and C2 must be >= 0")

    def _raw(self, x):
        return self.C1 * math.log1p(x) + self.C2 * math.log(math.log(x + math.e))

    def _raw_array(self, xs):
        return self.C1 * np.log1p(xs) + self.C2 * np.log(np.log(xs + math.e))

    def _family_spec(self):
        return fk.LOGLOG, [self.C1, self.C2]


def _dyadic_plateau(x: float) -> bool:
    """True iff x lies in [2^n, 2^n + 1) for some n >= 1."""
    if x < 2.0:
        return False
    n = math.floor(math.log2(x))
    base = 2.0**n
    if base > x:  # log2 rounding
        base /= 2.0
    elif 2.0 * base <= x:
        base *= 2.0
    return x < base + 1.0


@dataclass(frozen=True)
class Example41(IntensityFn):
    """1 on [2^n, 2^n + 1) for n >= 1, t elsewhere."""

    domain: str = CONTINUOUS

    @property
    def monotone_from(self):
        return math.inf

    @property
    def resolution_limit(self):
        return DYADIC_RESOLUTION

    def _raw(self, x):
        return 1.0 if _dyadic_plateau(x) else x

    def left_limit(self, x):
        if x <= 0:
            return self._raw(x)
        # left limit equals the value just below x; only branch points differ
        if x >= 2.0 and math.log2(x).is_integer():
            return x
        if x >= 3.0 and math.log2(x - 1.0).is_integer():
            return 1.0
        return self._raw(x)

    def breakpoints_in(self, lo, hi):
        out = []
        n = 1
        while 2.0**n <= hi:
            for b in (2.0**n, 2.0**n + 1.0):
                if lo < b <= hi:
                    out.append(b)
            n += 1
        return sorted(set(out))

    def _family_spec(self):
        return fk.EX41, []


def _is_power_of_two(j: int) -> bool:
    return j >= 1 and (j & (j - 1)) == 0


@dataclass(frozen=True)
class Example42(IntensityFn):
    """On positive integers: 1 if j is a power of two, j otherwise."""

    domain: str = DISCRETE

    @property
    def monotone_from(self):
        return math.inf

    @property
    def resolution_limit(self):
        return DYADIC_RESOLUTION

    def _raw(self, x):
        j = int(x)
        return 1.0 if _is_power_of_two(j) else float(j)

    def _raw_array(self, xs):
        js = xs.astype(np.int64)
        pow2 = (js >= 1) & ((js & (js - 1)) == 0)
        return np.where(pow2, 1.0, js.astype(float))

    def breakpoints_in(self, lo, hi):
        out = []
        n = 0
        while 2**n <= hi:
            if lo < 2**n <= hi:
                out.append(float(2**n))
            n += 1
        return out

    def _family_spec(self):
        return fk.EX42, []


@dataclass(frozen=True)
class PiecewiseLinearTable(IntensityFn):
    """Linear interpolation through ``(breakpoints[i], values[i])``.

    Held constant outside the first/last knot.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...] = field(default=())
    domain: str = CONTINUOUS

    def __init__(self, breakpoints, values, domain: str = CONTINUOUS):
        bp = tuple(float(b) for b in breakpoints)
        vs = tuple(float(v) for v in values)
        if len(bp) == 0 or len(bp) != len(vs):
            raise ParameterError("table needs equally many (>=1) breakpoints and values")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ParameterError("table breakpoints must be strictly increasing")
        if any(v < 0 or not math.isfinite(v) for v in vs):
            raise ParameterError("table values must be finite and >= 0")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vs)
        object.__setattr__(self, "domain", domain)

    @property
    def monotone_from(self):
        vs = self.values
        i = len(vs) - 1
        while i > 0 and vs[i - 1] <= vs[i]:
            i -= 1
        return 0.0 if i == 0 else self.breakpoints[i]

    def _raw(self, x):
        return float(np.interp(x, self.breakpoints, self.values))

    def _raw_array(self, xs):
        return np.interp(xs, self.breakpoints, self.values)

    def breakpoints_in(self, lo, hi):
        return [b for b in self.breakpoints if lo < b <= hi]

    def _family_spec(self):
        n = len(self.breakpoints)
        return fk.TABLE, [float(n), *self.breakpoints, *self.values]


@dataclass(frozen=True)
class _Affine(IntensityFn):
    """x -> out_scale * inner(in_scale * x + shift)."""

    inner: IntensityFn
    in_scale: float
    shift: float
    out_scale: float

    @property
    def domain(self):  # type: ignore[override]
        return self.inner.domain

    def _to_inner(self, x):
        return self.in_scale * x + self.shift

    def _from_inner(self, y):
        return (y - self.shift) / self.in_scale

    @property
    def monotone_from(self):
        m = self.inner.monotone_from
        return max(0.0, self._from_inner(m)) if math.isfinite(m) else math.inf

    @property
    def resolution_limit(self):
        r = self.inner.resolution_limit
        return self._from_inner(r) if math.isfinite(r) else math.inf

    def _raw(self, x):
        return self.out_scale * self.inner._raw(self._to_inner(x))

    def _raw_array(self, xs):
        return self.out_scale * self.inner._raw_array(self._to_inner(xs))

    def left_limit(self, x):
        return self.out_scale * self.inner.left_limit(self._to_inner(x))

    def breakpoints_in(self, lo, hi):
        inner = self.inner.breakpoints_in(self._to_inner(lo), self._to_inner(hi))
        return sorted({self._from_inner(b) for b in inner if lo < self._from_inner(b) <= hi})

    def kernel_spec(self):
        code, p = self.inner.kernel_spec()
        p = p.copy()
        a, b, c = p[0], p[1], p[2]
        # inner(x) = c * base(a x + b)  =>  out * inner(s x + r) = out c * base(a s x + a r + b)
        p[0] = a * self.in_scale
        p[1] = a * self.shift + b
        p[2] = c * self.out_scale
        return code, p


class Shifted(_Affine):
    """x -> inner(x + r): the field seen from position r onward."""

    def __init__(self, inner: IntensityFn, r: float):
        if r < 0:
            raise ParameterError("shift must be >= 0")
        super().__init__(inner, 1.0, float(r), 1.0)

    def __repr__(self):
        return f"Shifted({self.inner!r}, r={self.shift})"


class Rescaled(_Affine):
    """x -> s * inner(s * x)."""

    def __init__(self, inner: IntensityFn, s: float):
        if not s > 0:
            raise ParameterError("scale must be positive")
        super().__init__(inner, float(s), 0.0, float(s))

    def __repr__(self):
        return f"Rescaled({self.inner!r}, s={self.in_scale})"


def rescale_to_half_drift(f: IntensityFn, lam: float) -> IntensityFn:
    """Intensity g with g(x) = f(x / 2lam) / 2lam.

    The model (f, lam) and the model (g, 1/2) are the same up to the spatial
    change of variables s = 2 lam t, so both share the criterion value.
    """
    if not lam > 0:
        raise ParameterError("drift must be positive")
    if f.domain != CONTINUOUS:
        raise ParameterError("rescaling only applies to continuous intensities")
    if lam == 0.5:
        return f
    if isinstance(f, Constant):
        return Constant(f.c / (2 * lam))
    return Rescaled(f, 1.0 / (2.0 * lam))


def eval(f: IntensityFn, x) -> float:  # noqa: A001 - mirrors the operation name
    return f(x)


def breakpoints_in(f: IntensityFn, lo: float, hi: float) -> list[float]:
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    return f.breakpoints_in(lo, hi)


def check_monotone(f: IntensityFn, start: float, stop: float, grid_step: float) -> bool:
    """Grid check that f is nondecreasing on [start, stop].

    A False result proves non-monotonicity; True is only evidence.  One-sided
    limits at breakpoints are included, so the built-in families are checked
    exactly.
    """
    if start > stop or not grid_step > 0:
        raise ValueError("need start <= stop and grid_step > 0")
    if f.domain == DISCRETE:
        lo = max(1, math.ceil(start))
        js = np.arange(lo, math.floor(stop) + 1, max(1, round(grid_step)))
        vals = f.evaluate(js)
        return bool(np.all(np.diff(vals) >= 0))
    n = int(math.floor((stop - start) / grid_step + 1e-9))
    pts = [start + i * grid_step for i in range(n + 1)]
    if pts[-1] < stop:
        pts.append(stop)
    seq: list[tuple[float, int, float]] = [(x, 1, f._raw(x)) for x in pts]
    for b in f.breakpoints_in(start, stop):
        seq.append((b, 0, f.left_limit(b)))
        seq.append((b, 1, f._raw(b)))
    seq.sort(key=lambda e: (e[0], e[1]))
    vals = [v for _, _, v in seq]
    return all(v2 >= v1 for v1, v2 in zip(vals, vals[1:]))


def from_spec(spec: dict) -> IntensityFn:
    """Build an intensity from its JSON config form."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ParameterError("intensity config must be an object with a 'kind'")
    kind = spec["kind"]
    allowed = {
        "constant": {"c"},
        "linear": {"a"},
        "log": {"C", "a"},
        "loglog": {"C1", "C2"},
        "example41": set(),
        "example42": set(),
        "table": {"breakpoints", "values"},
    }
    if kind not in allowed:
        raise ParameterError(f"unknown intensity kind {kind!r}")
    extra = set(spec) - allowed[kind] - {"kind"}
    if extra:
        raise ParameterError(f"unknown keys for {kind}: {sorted(extra)}")
    try:
        if kind == "constant":
            return Constant(float(spec["c"]))
        if kind == "linear":
            return Linear(float(spec.get("a", 1.0)))
        if kind == "log":
            return LogFamily(float(spec["C"]), float(spec.get("a", 1.0)))
        if kind == "loglog":
            return LogLogFamily(float(spec["C1"]), float(spec["C2"]))
        if kind == "example41":
            return Example41()
        if kind == "example42":
            return Example42()
        return PiecewiseLinearTable(spec["breakpoints"], spec["values"])
    except KeyError as exc:
        raise ParameterError(f"intensity {kind!r} is missing {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ParameterError(f"bad intensity {kind!r}: {exc}") from None
