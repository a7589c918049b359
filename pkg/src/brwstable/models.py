"""Offspring point-process laws and their analytic functionals.

A law describes the point process ``Z`` that every particle uses to place
its children relative to itself.  Besides samplers, each law exposes the
intensity Laplace transform ``m(theta) = E[sum_j exp(-theta X_j)]`` in closed
form where one exists, and the derived quantities used by the verification
layer: the contraction ratio ``kappa = m(alpha theta) / m(theta)**alpha`` and
the constant ``c`` in ``P(W_1(theta) > x) ~ c x**(-alpha)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Union

import mpmath
import numpy as np
from scipy.special import zeta

__all__ = [
    "Normal",
    "Exponential",
    "PointMass",
    "Uniform",
    "ParetoCountLaw",
    "FiniteCountLaw",
    "ParetoCount",
    "GaltonWatson",
    "InfinitePoints",
    "Custom",
    "LawReport",
    "OffspringSample",
    "LawError",
    "NoAnalyticFormError",
    "InfiniteTransformError",
    "UnsupportedLawError",
    "NoRootError",
    "AlphaRangeWarning",
    "laplace_m",
    "kappa",
    "check_conditions",
    "tail_constant_W1",
    "calibrate_infinite_example",
    "sample_offspring",
    "normalized_moment",
]


class LawError(ValueError):
    """Base class for law-level failures."""


class NoAnalyticFormError(LawError):
    pass


class InfiniteTransformError(LawError):
    pass


class UnsupportedLawError(LawError):
    pass


class NoRootError(LawError):
    pass


class AlphaRangeWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# displacement laws


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance >= 0:
            raise LawError(f"variance must be >= 0, got {self.variance}")

    def laplace(self, theta: float) -> float:
        return math.exp(-theta * self.mean + 0.5 * theta * theta * self.variance)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.mean + math.sqrt(self.variance) * rng.standard_normal(size)

    @property
    def positive(self) -> bool:
        return False


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise LawError(f"rate must be > 0, got {self.rate}")

    def laplace(self, theta: float) -> float:
        if theta <= -self.rate:
            return math.inf
        return self.rate / (self.rate + theta)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_exponential(size) / self.rate

    @property
    def positive(self) -> bool:
        return True


@dataclass(frozen=True)
class PointMass:
    location: float = 0.0

    def laplace(self, theta: float) -> float:
        return math.exp(-theta * self.location)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(self.location))

    @property
    def positive(self) -> bool:
        return self.location > 0


@dataclass(frozen=True)
class Uniform:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise LawError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    def laplace(self, theta: float) -> float:
        if theta == 0:
            return 1.0
        width = self.hi - self.lo
        return (math.exp(-theta * self.lo) - math.exp(-theta * self.hi)) / (theta * width)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * rng.random(size)

    @property
    def positive(self) -> bool:
        return self.lo > 0


DisplacementLaw = Union[Normal, Exponential, PointMass, Uniform]


# ---------------------------------------------------------------------------
# count laws


@dataclass(frozen=True)
class ParetoCountLaw:
    """Discretized Pareto count.

    ``P(N >= n) = min(1, d n**(-alpha))`` for ``n > min_count`` and ``N >= min_count``
    always, so ``P(N > x) ~ d x**(-alpha)``.  Draws are
    ``max(min_count, floor((d / U)**(1/alpha)))`` with ``U`` uniform on (0, 1].
    """

    alpha: float
    d: float
    min_count: int = 1

    def __post_init__(self):
        if not self.alpha > 1:
            raise LawError(f"count tail index must exceed 1, got {self.alpha}")
        if self.d < 0:
            raise LawError(f"scale d must be >= 0, got {self.d}")
        if self.min_count < 0:
            raise LawError("min_count must be >= 0")

    @classmethod
    def with_mean(cls, mean: float, alpha: float, min_count: int = 1) -> "ParetoCountLaw":
        """The member of the family with ``E[N] = mean``."""
        if mean <= min_count:
            raise LawError(f"mean {mean} must exceed min_count {min_count}")
        n1 = min_count + 1
        d = (mean - min_count) / zeta(alpha, n1)
        if d <= n1**alpha:
            return cls(alpha, float(d), min_count)
        lo, hi = 0.0, 1.0
        while cls(alpha, hi, min_count).mean < mean:
            hi *= 2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if cls(alpha, mid, min_count).mean < mean:
                lo = mid
            else:
                hi = mid
        return cls(alpha, 0.5 * (lo + hi), min_count)

    @property
    def _saturation(self) -> int:
        # largest n with d n^-alpha >= 1, floored at min_count
        if self.d == 0:
            return self.min_count
        return max(self.min_count, int(math.floor(self.d ** (1.0 / self.alpha))))

    def survival(self, n):
        """``P(N >= n)``, vectorized over integer ``n``."""
        n = np.asarray(n, dtype=float)
        with np.errstate(divide="ignore"):
            power = self.d * np.where(n > 0, n, 1.0) ** (-self.alpha)
        out = np.where(n <= self.min_count, 1.0, np.minimum(1.0, power))
        return out if out.ndim else float(out)

    def pmf(self, n):
        n = np.asarray(n)
        out = np.where(n >= self.min_count, self.survival(n) - self.survival(n + 1), 0.0)
        return out if out.ndim else float(out)

    @cached_property
    def mean(self) -> float:
        s = self._saturation
        return float(s + self.d * zeta(self.alpha, s + 1)) if self.d > 0 else float(s)

    def expect_exp_shift(self, s: float) -> float:
        """``E[exp(-s (N + 1))]`` for ``s > 0``."""
        if s <= 0:
            raise LawError("exponential shift requires s > 0")
        n_max = int(min(self.min_count + math.ceil(45.0 / s) + 2, 10_000_000))
        n = np.arange(self.min_count, n_max + 1)
        p = self.pmf(n)
        return float(np.sum(p * np.exp(-s * (n + 1.0))))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = 1.0 - rng.random(size)
        with np.errstate(divide="ignore", over="ignore"):
            v = np.floor((self.d / u) ** (1.0 / self.alpha))
        return np.maximum(self.min_count, v).astype(np.int64)

    def draw_one(self, rng: np.random.Generator) -> int:
        u = 1.0 - rng.random()
        v = int(math.floor(math.pow(self.d / u, 1.0 / self.alpha)))
        return max(self.min_count, v)

    @cached_property
    def tables(self) -> dict:
        """Point masses and dyadic bands for sampling sums of many counts."""
        return _pareto_tables(self)


SMALL_SPAN = 16
BAND_LIMIT = 2**60


def _pareto_tables(law: ParetoCountLaw) -> dict:
    alpha, d = law.alpha, law.d
    top = law._saturation + SMALL_SPAN
    small_v = np.arange(law.min_count, top + 1, dtype=np.int64)
    small_tail = np.array([law.survival(int(v)) for v in small_v])
    small_p = np.array([law.survival(int(v)) - law.survival(int(v) + 1) for v in small_v])
    lo_l, hi_l, p_l, g_l, mean_l, var_l = [], [], [], [], [], []
    lo = top + 1
    with mpmath.workdps(40):
        dd = mpmath.mpf(d)
        while True:
            last = 2 * lo > BAND_LIMIT
            hi = BAND_LIMIT * 4 if last else 2 * lo - 1
            g_lo = dd * mpmath.mpf(lo) ** (-alpha)
            g_hi = mpmath.mpf(0) if last else dd * mpmath.mpf(hi + 1) ** (-alpha)
            pb = g_lo - g_hi
            if last or pb == 0:
                mean, var = math.nan, math.nan
            else:
                s0 = dd * (mpmath.zeta(alpha, lo + 1) - mpmath.zeta(alpha, hi + 1))
                s1 = dd * (mpmath.zeta(alpha - 1, lo + 1) - mpmath.zeta(alpha - 1, hi + 1))
                m1 = lo * g_lo - hi * g_hi + s0
                m2 = lo**2 * g_lo - hi**2 * g_hi + 2 * s1 - s0
                mean = float(m1 / pb)
                var = float(max(m2 / pb - (m1 / pb) ** 2, 0))
            lo_l.append(lo)
            hi_l.append(hi)
            p_l.append(float(pb))
            g_l.append(float(g_lo))
            mean_l.append(mean)
            var_l.append(var)
            if last:
                break
            lo = 2 * lo
    return {
        "small_v": small_v,
        "small_p": small_p,
        "small_tail": small_tail,
        "band_lo": np.array(lo_l, dtype=np.int64),
        "band_hi": np.array(hi_l, dtype=np.int64),
        "band_p": np.array(p_l),
        "band_glo": np.array(g_l),
        "band_mean": np.array(mean_l),
        "band_var": np.array(var_l),
    }


@dataclass(frozen=True)
class FiniteCountLaw:
    """Count law with finite support; ``FiniteCountLaw((2,), (1.0,))`` is binary splitting."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(vals) != len(probs) or not vals:
            raise LawError("values and probs must be nonempty and of equal length")
        if any(v < 0 for v in vals) or any(p < 0 for p in probs):
            raise LawError("counts and probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise LawError(f"probabilities sum to {sum(probs)}, not 1")
        order = sorted(range(len(vals)), key=vals.__getitem__)
        object.__setattr__(self, "values", tuple(vals[i] for i in order))
        object.__setattr__(self, "probs", tuple(probs[i] for i in order))

    @classmethod
    def deterministic(cls, n: int) -> "FiniteCountLaw":
        return cls((n,), (1.0,))

    @property
    def mean(self) -> float:
        return float(sum(v * p for v, p in zip(self.values, self.probs)))

    @property
    def alpha(self) -> Optional[float]:
        return None

    def pmf(self, n):
        lookup = dict(zip(self.values, self.probs))
        n = np.asarray(n)
        out = np.vectorize(lambda k: lookup.get(int(k), 0.0), otypes=[float])(n)
        return out if out.ndim else float(out)

    def expect_exp_shift(self, s: float) -> float:
        return float(sum(p * math.exp(-s * (v + 1)) for v, p in zip(self.values, self.probs)))

    @cached_property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        idx = np.searchsorted(self.cumulative[:-1], u, side="right")
        return np.asarray(self.values, dtype=np.int64)[idx]

    def draw_one(self, rng: np.random.Generator) -> int:
        u = rng.random()
        cum = self.cumulative
        for i in range(len(self.values) - 1):
            if u < cum[i]:
                return self.values[i]
        return self.values[-1]

    @cached_property
    def tables(self) -> dict:
        p = np.asarray(self.probs)
        return {
            "fin_v": np.asarray(self.values, dtype=np.int64),
            "fin_cum": self.cumulative,
            "fin_p": p,
            "fin_tail": np.cumsum(p[::-1])[::-1],
        }


CountLaw = Union[ParetoCountLaw, FiniteCountLaw]


# ---------------------------------------------------------------------------
# offspring point processes


@dataclass(frozen=True)
class ParetoCount:
    """Pareto-tailed brood size with i.i.d. displacements independent of it."""

    tail_index: float
    d: float
    min_count: int = 1
    displacement: DisplacementLaw = field(default_factory=Normal)

    @classmethod
    def with_mean(cls, mean: float, tail_index: float, displacement: DisplacementLaw,
                  min_count: int = 1) -> "ParetoCount":
        count = ParetoCountLaw.with_mean(mean, tail_index, min_count)
        return cls(tail_index, count.d, min_count, displacement)

    @cached_property
    def count_law(self) -> ParetoCountLaw:
        return ParetoCountLaw(self.tail_index, self.d, self.min_count)

    @property
    def mean_count(self) -> float:
        return self.count_law.mean


@dataclass(frozen=True)
class GaltonWatson:
    """All children sit on their parent's position."""

    count_law: CountLaw

    @property
    def mean_count(self) -> float:
        return self.count_law.mean


@dataclass(frozen=True)
class InfinitePoints:
    """``X_k = Y_k 1{K >= k} + a k 1{K < k}``: K random points, then an infinite lattice."""

    k_law: ParetoCountLaw
    y_law: DisplacementLaw
    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise LawError(f"lattice spacing a must be > 0, got {self.a}")
        if self.k_law.min_count < 1:
            raise LawError("K must take positive integer values")

    @property
    def mean_count(self) -> float:
        return self.k_law.mean


@dataclass(frozen=True)
class Custom:
    """User-supplied sampler ``sampler(rng) -> displacements`` with optional analytic m."""

    sampler: Callable[[np.random.Generator], np.ndarray]
    m: Optional[Callable[[float], float]] = None
    name: str = "custom"


OffspringLaw = Union[ParetoCount, GaltonWatson, InfinitePoints, Custom]


# ---------------------------------------------------------------------------
# analytic functionals


def laplace_m(law: OffspringLaw, theta: float) -> float:
    """Intensity Laplace transform ``m(theta)``; ``math.inf`` outside the domain."""
    if isinstance(law, ParetoCount):
        lx = law.displacement.laplace(theta)
        return math.inf if math.isinf(lx) else law.count_law.mean * lx
    if isinstance(law, GaltonWatson):
        return law.count_law.mean
    if isinstance(law, InfinitePoints):
        s = theta * law.a
        if s <= 0:
            raise LawError("the lattice part of m needs theta * a > 0")
        ly = law.y_law.laplace(theta)
        if math.isinf(ly):
            return math.inf
        return law.k_law.mean * ly + law.k_law.expect_exp_shift(s) / (-math.expm1(-s))
    if isinstance(law, Custom):
        if law.m is None:
            raise NoAnalyticFormError(f"law {law.name!r} has no analytic m")
        return float(law.m(theta))
    raise TypeError(f"unknown law {law!r}")


def kappa(law: OffspringLaw, theta: float, alpha: float) -> float:
    """Contraction ratio ``m(alpha theta) / m(theta)**alpha``."""
    if not 1 < alpha < 2:
        warnings.warn(f"alpha={alpha} lies outside (1, 2)", AlphaRangeWarning, stacklevel=2)
    m1 = laplace_m(law, theta)
    ma = laplace_m(law, alpha * theta)
    if math.isinf(m1) or math.isinf(ma):
        raise InfiniteTransformError(f"m({theta})={m1}, m({alpha * theta})={ma}")
    return ma / m1**alpha


def normalized_moment(law: OffspringLaw, theta: float, p: float) -> float:
    """``m(p theta) / m(theta)**p``, log-convex in p."""
    return laplace_m(law, p * theta) / laplace_m(law, theta) ** p


@dataclass
class LawReport:
    m_theta: float
    m_alpha_theta: float
    kappa: float
    tail_constant_c: Optional[float]
    conditions: dict

    @property
    def ok(self) -> bool:
        return all(self.conditions.values())

    def failed(self) -> list:
        return [k for k, v in self.conditions.items() if not v]


def check_conditions(law: OffspringLaw, theta: float, alpha: float) -> LawReport:
    """Evaluate the standing assumptions; failures become flags, never exceptions."""
    flags = {"alpha_in_range": 1 < alpha < 2}
    mean = getattr(law, "mean_count", None)
    if mean is not None:
        flags["supercritical"] = mean > 1
    try:
        m1 = laplace_m(law, theta)
        ma = laplace_m(law, alpha * theta)
    except LawError:
        m1 = ma = math.nan
    flags["m_theta_finite"] = math.isfinite(m1)
    flags["m_alpha_theta_finite"] = math.isfinite(ma)
    k = ma / m1**alpha if (math.isfinite(m1) and math.isfinite(ma) and m1 > 0) else math.nan
    flags["kappa_lt_1"] = bool(k < 1)
    if isinstance(law, ParetoCount):
        lx = law.displacement.laplace(theta)
        lax = law.displacement.laplace(alpha * theta)
        rhs = law.count_law.mean ** (alpha - 1) * lx**alpha
        flags["contraction_condition"] = bool(lax < rhs < math.inf)
    try:
        c = tail_constant_W1(law, theta, alpha)
    except LawError:
        c = None
    return LawReport(m1, ma, k, c, flags)


def tail_constant_W1(law: OffspringLaw, theta: float, alpha: float) -> float:
    """Constant ``c`` with ``P(W_1(theta) > x) ~ c x**(-alpha)``.

    Heavy counts with light point weights: ``W_1`` behaves like ``N`` times the
    mean normalized point weight, whence ``c = d (E[e^{-theta X}] / m)**alpha``.
    """
    if isinstance(law, ParetoCount):
        count, lx = law.count_law, law.displacement.laplace(theta)
    elif isinstance(law, GaltonWatson):
        count, lx = law.count_law, 1.0
        if isinstance(count, FiniteCountLaw):
            return 0.0
    elif isinstance(law, InfinitePoints):
        count, lx = law.k_law, law.y_law.laplace(theta)
    else:
        raise UnsupportedLawError(f"no closed-form tail constant for {type(law).__name__}")
    if count.d == 0:
        return 0.0
    if abs(count.alpha - alpha) > 1e-12:
        raise UnsupportedLawError(f"count tail index {count.alpha} differs from alpha={alpha}")
    m = laplace_m(law, theta)
    return count.d * (lx / m) ** alpha


def calibrate_infinite_example(k_law: ParetoCountLaw, y_law: DisplacementLaw,
                               target_m: float = 1.0, a: float = 1.0,
                               theta_max: float = 1e6, tol: float = 1e-10) -> tuple:
    """Root-find theta with ``m(theta) = target_m`` for the lattice construction at fixed ``a``."""
    if k_law.mean <= 1:
        raise NoRootError(f"E[K]={k_law.mean} <= 1")
    if not y_law.positive:
        raise LawError("Y must be a positive random variable")
    law = InfinitePoints(k_law, y_law, a)

    def f(t):
        return laplace_m(law, t) - target_m

    hi = 1.0
    while f(hi) > 0:
        hi *= 2
        if hi > theta_max:
            raise NoRootError(f"m(theta) stays above {target_m} on (0, {theta_max}]")
    lo = hi / 2
    while f(lo) <= 0:
        lo /= 2
        if lo < 1e-300:
            raise NoRootError("no sign change found near 0")
    # bisect down to adjacent floats, then keep the better endpoint
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda t: abs(f(t)))
    if abs(f(best)) > tol:
        raise NoRootError(f"residual {abs(f(best)):.3g} exceeds {tol} at machine precision")
    return best, a


# ---------------------------------------------------------------------------
# sampling


@dataclass
class OffspringSample:
    points: np.ndarray
    truncated_weight_bound: float = 0.0


def lattice_length(theta: float, a: float, eps: float) -> int:
    """Number of lattice points kept after the random ones, at relative weight ``eps``."""
    if eps <= 0:
        raise LawError("an infinite point set needs a positive truncation weight")
    s = theta * a
    if s <= 0:
        raise LawError("lattice truncation needs theta * a > 0")
    one_minus_q = -math.expm1(-s)
    return int(math.floor(math.log(1.0 / (eps * one_minus_q)) / s)) + 1


def sample_offspring(law: OffspringLaw, theta: float, truncation_eps: float,
                     rng: np.random.Generator) -> OffspringSample:
    """Draw one realization of the offspring point process.

    Infinite lattices are cut at the first index whose remaining weight is
    below ``truncation_eps`` times the first lattice weight; the dropped
    weight ``sum_{k >= k*} e^{-theta a k}`` is returned alongside.
    """
    if truncation_eps < 0:
        raise LawError("truncation weight must be >= 0")
    if isinstance(law, ParetoCount):
        n = law.count_law.draw_one(rng)
        return OffspringSample(np.asarray(law.displacement.sample(rng, n), dtype=float))
    if isinstance(law, GaltonWatson):
        n = law.count_law.draw_one(rng)
        return OffspringSample(np.zeros(n))
    if isinstance(law, InfinitePoints):
        length = lattice_length(theta, law.a, truncation_eps)
        k = law.k_law.draw_one(rng)
        y = np.asarray(law.y_law.sample(rng, k), dtype=float)
        lattice = law.a * np.arange(k + 1, k + 1 + length, dtype=float)
        s = theta * law.a
        x_star = law.a * float(k + 1 + length)
        bound = math.exp(-theta * x_star) / -math.expm1(-s)
        return OffspringSample(np.concatenate([y, lattice]), bound)
    if isinstance(law, Custom):
        return OffspringSample(np.asarray(law.sampler(rng), dtype=float))
    raise TypeError(f"unknown law {law!r}")


# ---------------------------------------------------------------------------
# kernel tables

KIND_AGGREGATE, KIND_IID, KIND_INFINITE = 0, 1, 2
COUNT_PARETO, COUNT_FINITE = 0, 1
DISP_CODES = {PointMass: 0, Normal: 1, Exponential: 2, Uniform: 3}

_EMPTY_I = np.zeros(0, dtype=np.int64)
_EMPTY_F = np.zeros(0)


def _disp_params(disp: DisplacementLaw) -> tuple:
    if isinstance(disp, Normal):
        return math.sqrt(disp.variance), disp.mean, math.sqrt(disp.variance)
    if isinstance(disp, Exponential):
        return None, disp.rate, 0.0
    if isinstance(disp, Uniform):
        return None, disp.lo, disp.hi
    return None, disp.location, 0.0


def kernel_spec(law: OffspringLaw, theta: float, alpha: float,
                truncation_eps: float = 1e-12) -> dict:
    """Flat parameter/table dictionary shared by both simulation backends."""
    if isinstance(law, Custom):
        raise UnsupportedLawError("custom samplers only run on the Python backend")
    m1 = laplace_m(law, theta)
    ma = laplace_m(law, alpha * theta)
    if not (math.isfinite(m1) and math.isfinite(ma)):
        raise InfiniteTransformError(f"m({theta})={m1}, m({alpha * theta})={ma}")
    spec = {
        "theta": float(theta), "atheta": float(alpha * theta),
        "m_theta": float(m1), "m_atheta": float(ma),
        "small_v": _EMPTY_I, "small_p": _EMPTY_F, "small_tail": _EMPTY_F,
        "band_lo": _EMPTY_I, "band_hi": _EMPTY_I, "band_p": _EMPTY_F, "band_glo": _EMPTY_F,
        "band_mean": _EMPTY_F, "band_var": _EMPTY_F,
        "fin_v": _EMPTY_I, "fin_cum": _EMPTY_F, "fin_p": _EMPTY_F, "fin_tail": _EMPTY_F,
        "c_d": 0.0, "c_inv_alpha": 1.0, "c_min": 0,
        "disp_type": 0, "dp1": 0.0, "dp2": 0.0,
        "a": 0.0, "lattice_len": 0, "one_minus_q": 1.0,
        "point_wt": 1.0, "point_wa": 1.0,
    }
    if isinstance(law, GaltonWatson):
        count, disp = law.count_law, PointMass(0.0)
    elif isinstance(law, ParetoCount):
        count, disp = law.count_law, law.displacement
    else:
        count, disp = law.k_law, law.y_law
    if isinstance(count, ParetoCountLaw):
        spec.update(count.tables)
        spec.update(count_type=COUNT_PARETO, c_d=float(count.d),
                    c_inv_alpha=1.0 / count.alpha, c_min=int(count.min_count))
    else:
        spec.update(count.tables)
        spec.update(count_type=COUNT_FINITE)
    _, p1, p2 = _disp_params(disp)
    spec.update(disp_type=DISP_CODES[type(disp)], dp1=float(p1), dp2=float(p2))
    if isinstance(law, InfinitePoints):
        spec.update(kind=KIND_INFINITE, a=float(law.a),
                    lattice_len=lattice_length(theta, law.a, truncation_eps),
                    one_minus_q=-math.expm1(-theta * law.a))
    elif isinstance(disp, PointMass):
        x0 = float(disp.location)
        spec.update(kind=KIND_AGGREGATE, point_wt=math.exp(-theta * x0) / m1,
                    point_wa=math.exp(-alpha * theta * x0) / ma)
    else:
        spec.update(kind=KIND_IID)
    return spec
