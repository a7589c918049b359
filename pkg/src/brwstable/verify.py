"""Estimators and decision rules that confront samples with limit predictions.

All estimators are invariant under permutations of their input: order
statistics are sorted first and every long floating-point sum goes through
``math.fsum`` over fixed-size partial sums of sorted data.  The empirical
characteristic function accumulator merges exactly, so partial results from
any number of workers combine to the same value in any order.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import stablelim

__all__ = [
    "InsufficientSampleError",
    "WindowEmptyError",
    "TailVerdict",
    "CfVerdict",
    "HillResult",
    "default_grid",
    "hill_estimator",
    "tail_ratio_check",
    "hill_check",
    "predicted_series_tail_constant",
    "rank_tail_constant",
    "series_tail_check",
    "EcfAccumulator",
    "ecf",
    "cf_distance",
    "mixture_check",
    "fdd_check",
    "mean_check",
]


class InsufficientSampleError(ValueError):
    pass


class WindowEmptyError(ValueError):
    pass


def default_grid(lo: float = -5.0, hi: float = 5.0, points: int = 81) -> np.ndarray:
    return np.linspace(lo, hi, points)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class TailVerdict:
    estimated_index: Optional[float]
    estimated_constant: Optional[float]
    predicted_index: Optional[float]
    predicted_constant: Optional[float]
    window_lo: float
    window_hi: float
    passed: bool
    details: str = ""
    unstable: bool = False

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


@dataclass
class CfVerdict:
    sup_distance: float
    l2_distance: float
    grid: list
    passed: bool
    tolerance: float = 0.05
    details: str = ""

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


# ---------------------------------------------------------------------------
# tails


@dataclass(frozen=True)
class HillResult:
    index: float
    stderr: float
    k: int
    threshold: float


def _sorted_desc_positive(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    x = x[x > 0]
    return np.sort(x)[::-1]


def hill_estimator(samples, top_fraction: float, min_k: int = 30) -> HillResult:
    """Hill estimate from the ``ceil(top_fraction * n)`` largest positive samples."""
    if not 0 < top_fraction <= 0.2:
        raise ValueError(f"top_fraction must lie in (0, 0.2], got {top_fraction}")
    x = _sorted_desc_positive(samples)
    if x.size == 0:
        raise InsufficientSampleError("no positive samples")
    k = math.ceil(top_fraction * x.size)
    if k < min_k or k >= x.size:
        raise InsufficientSampleError(f"only k={k} order statistics (need >= {min_k})")
    # log spacings via mantissa and exponent: rescaling by a power of two
    # leaves every term bit-for-bit unchanged
    mant, expo = np.frexp(x[: k + 1])
    spacings = (np.log(mant[:k]) - math.log(mant[k])) + (expo[:k] - expo[k]) * math.log(2.0)
    mean_excess = math.fsum(spacings.tolist()) / k
    if mean_excess <= 0:
        raise InsufficientSampleError("degenerate order statistics (top samples all equal)")
    index = 1.0 / mean_excess
    return HillResult(index, index / math.sqrt(k), k, float(x[k]))


def _survival(sorted_asc: np.ndarray, x: np.ndarray) -> np.ndarray:
    return 1.0 - np.searchsorted(sorted_asc, x, side="right") / sorted_asc.size


def tail_ratio_check(samples_W, samples_W1, kappa: float,
                     x_quantiles: tuple = (0.99, 0.999), tolerance: float = 0.15,
                     grid_points: int = 64, min_samples: int = 100_000) -> TailVerdict:
    """Median of ``P(W > x) / P(W_1 > x)`` over a quantile window of ``W_1``."""
    w = np.sort(np.asarray(samples_W, dtype=float).ravel())
    w1 = np.sort(np.asarray(samples_W1, dtype=float).ravel())
    if min(w.size, w1.size) < min_samples:
        raise InsufficientSampleError(
            f"need >= {min_samples} samples per set, got {w.size} and {w1.size}")
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    q_lo, q_hi = x_quantiles
    x_lo, x_hi = np.quantile(w1, [q_lo, q_hi])
    if not (x_lo > 0 and x_hi > x_lo):
        raise WindowEmptyError(f"quantile window [{x_lo}, {x_hi}] is empty")
    xs = np.exp(np.linspace(math.log(x_lo), math.log(x_hi), grid_points))
    s1 = _survival(w1, xs)
    if np.any(s1 <= 0):
        raise WindowEmptyError("W_1 has no exceedances inside the window")
    ratio = float(np.median(_survival(w, xs) / s1))
    predicted = 1.0 / (1.0 - kappa)
    unstable = predicted >= 1.0 / (1.0 - q_hi)
    rel = abs(ratio / predicted - 1.0)
    return TailVerdict(None, ratio, None, predicted, float(x_lo), float(x_hi),
                       bool(rel <= tolerance and not unstable),
                       f"median survival ratio {ratio:.4f} vs {predicted:.4f} "
                       f"(relative error {rel:.3f}, tolerance {tolerance})", bool(unstable))


def hill_check(samples, alpha: float, top_fraction: float = 0.01,
               tolerance: float = 0.1) -> TailVerdict:
    h = hill_estimator(samples, top_fraction)
    err = abs(h.index - alpha)
    return TailVerdict(h.index, None, alpha, None, h.threshold, math.inf,
                       bool(err <= tolerance),
                       f"Hill index {h.index:.4f} +/- {h.stderr:.4f} on k={h.k} "
                       f"(|error| {err:.3f}, tolerance {tolerance})")


def predicted_series_tail_constant(a: Sequence[float], kappa: float, alpha: float, c: float,
                                   side: str = "+", tail: str = "none") -> float:
    """``c * sum_j kappa**j (a_j^{+/-})**alpha``.

    ``tail='constant'`` continues the last coefficient forever and
    ``tail='periodic'`` repeats ``a`` forever; both sums are closed geometric series.
    """
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    coeffs = np.asarray(a, dtype=float)
    if side == "+":
        part = np.maximum(coeffs, 0.0) ** alpha
    elif side == "-":
        part = np.maximum(-coeffs, 0.0) ** alpha
    else:
        raise ValueError("side must be '+' or '-'")
    L = coeffs.size
    weights = kappa ** np.arange(L)
    head = math.fsum((weights * part).tolist())
    if tail == "none":
        total = head
    elif tail == "constant":
        total = head + part[-1] * kappa**L / (1.0 - kappa) if L else 0.0
    elif tail == "periodic":
        total = head / (1.0 - kappa**L)
    else:
        raise ValueError(f"unknown tail mode {tail!r}")
    return c * total


def rank_tail_constant(samples, top_fraction: float, alpha: float) -> float:
    """Constant ``C`` in ``P(X > x) ~ C x**(-alpha)`` read off a log-log rank plot.

    With descending order statistics ``X_(1) >= ... >= X_(k)``, each point
    gives ``C_i = (i/n) X_(i)**alpha``; the estimate is the geometric mean of
    the ``C_i`` over the top ``k = ceil(top_fraction * n)``, i.e. the
    intercept of a slope ``-alpha`` line through the rank plot.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    k = math.ceil(top_fraction * n)
    top = np.sort(x)[::-1][:k]
    if k < 30 or top[-1] <= 0:
        raise InsufficientSampleError(f"need >= 30 positive top order statistics, got k={k}")
    i = np.arange(1, k + 1)
    logs = np.log(i / n) + alpha * np.log(top)
    return math.exp(math.fsum(logs.tolist()) / k)


def series_tail_check(series_samples, a: Sequence[float], kappa: float, alpha: float, c: float,
                      tail: str = "periodic", top_fraction: float = 0.005,
                      tolerance: float = 0.2) -> dict:
    """Upper and lower tail constants of a weighted increment series."""
    out = {}
    s = np.asarray(series_samples, dtype=float)
    for side, data in (("+", s), ("-", -s)):
        pred = predicted_series_tail_constant(a, kappa, alpha, c, side, tail)
        est = rank_tail_constant(data, top_fraction, alpha)
        rel = abs(est / pred - 1.0) if pred > 0 else math.inf
        name = "upper" if side == "+" else "lower"
        out[name] = TailVerdict(alpha, est, alpha, pred, float(np.quantile(data, 1 - top_fraction)),
                                float(data.max()), bool(rel <= tolerance),
                                f"{name} rank-plot constant {est:.4f} vs {pred:.4f} "
                                f"(relative error {rel:.3f}, tolerance {tolerance})")
    return out


# ---------------------------------------------------------------------------
# characteristic functions


class EcfAccumulator:
    """Mergeable partial sums of ``cos(t x)`` and ``sin(t x)``.

    Partial sums are kept per ``add`` call and reduced with ``math.fsum`` only
    when the value is requested, so merging is exactly associative and
    commutative.
    """

    def __init__(self, grid):
        self.grid = np.asarray(grid, dtype=float)
        self._re: list = []
        self._im: list = []
        self.count = 0

    def add(self, samples, chunk: int = 1 << 15) -> "EcfAccumulator":
        x = np.asarray(samples, dtype=float).ravel()
        for i in range(0, x.size, chunk):
            tx = np.multiply.outer(x[i:i + chunk], self.grid)
            self._re.append(np.cos(tx).sum(axis=0))
            self._im.append(np.sin(tx).sum(axis=0))
        self.count += x.size
        return self

    def merge(self, other: "EcfAccumulator") -> "EcfAccumulator":
        if not np.array_equal(self.grid, other.grid):
            raise ValueError("cannot merge accumulators on different grids")
        out = EcfAccumulator(self.grid)
        out._re = self._re + other._re
        out._im = self._im + other._im
        out.count = self.count + other.count
        return out

    def value(self) -> np.ndarray:
        if self.count == 0:
            raise InsufficientSampleError("no samples accumulated")
        re = np.array([math.fsum(col) for col in zip(*self._re)]) if self._re else 0.0
        im = np.array([math.fsum(col) for col in zip(*self._im)]) if self._im else 0.0
        return (re + 1j * im) / self.count


def ecf(samples, grid) -> np.ndarray:
    """Empirical characteristic function ``mean(exp(i t x))`` on ``grid``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise InsufficientSampleError("ecf needs at least one sample")
    return EcfAccumulator(grid).add(x).value()


def cf_distance(empirical, theoretical, tolerance: float = 0.05, grid=None) -> CfVerdict:
    e = np.asarray(empirical, dtype=complex)
    t = np.asarray(theoretical, dtype=complex)
    if e.shape != t.shape:
        raise ValueError(f"length mismatch: {e.shape} vs {t.shape}")
    d = np.abs(e - t)
    sup = float(d.max()) if d.size else 0.0
    l2 = float(math.sqrt(math.fsum((d * d).tolist()) / d.size)) if d.size else 0.0
    g = [] if grid is None else [float(v) for v in grid]
    return CfVerdict(sup, l2, g, bool(sup <= tolerance), tolerance,
                     f"sup distance {sup:.4f} (tolerance {tolerance}), rms {l2:.4f}")


def mixture_check(deviations, mix_weights, spec: stablelim.StableSpec, kappa: float,
                  grid=None, tolerance: float = 0.05) -> CfVerdict:
    """ECF of scaled deviations against the random-scale stable mixture."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    emp = ecf(deviations, grid)
    theo = stablelim.mixture_cf(spec, kappa, np.sort(np.asarray(mix_weights, dtype=float)), grid)
    return cf_distance(emp, theo, tolerance, grid)


def fdd_check(samples, mix_weights, betas, spec: stablelim.StableSpec, kappa: float,
              grid=None, tolerance: float = 0.05) -> CfVerdict:
    """Cramer-Wold projection of lag vectors compared with the mixed AR(1) limit."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    b = np.asarray(betas, dtype=float)
    if X.shape[1] != b.size:
        raise ValueError(f"vectors have {X.shape[1]} lags but {b.size} betas were given")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    emp = ecf(X @ b, grid)
    theo = stablelim.fdd_limit_cf(spec, kappa, b, np.sort(np.asarray(mix_weights, dtype=float)),
                                  grid)
    return cf_distance(emp, theo, tolerance, grid)


@dataclass
class MeanVerdict:
    label: str
    mean: float
    stderr: float
    target: float
    z: float
    passed: bool
    details: str = ""

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def mean_check(samples, target: float, label: str = "", z_max: float = 5.0) -> MeanVerdict:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientSampleError("need at least two samples for a standard error")
    xs = np.sort(x)
    mean = math.fsum(xs.tolist()) / x.size
    var = math.fsum(((xs - mean) ** 2).tolist()) / (x.size - 1)
    se = math.sqrt(var / x.size)
    z = (mean - target) / se if se > 0 else (0.0 if mean == target else math.inf)
    return MeanVerdict(label, mean, se, target, z, bool(abs(z) <= z_max),
                       f"{label} mean {mean:.5f} +/- {se:.5f} vs {target} (z={z:+.2f})")
