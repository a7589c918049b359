import json
import math

import numpy as np
import pytest

from brwstable import stablelim as sl
from brwstable import verify as vf

GRID = vf.default_grid()


def pareto(rng, alpha, size, C=1.0):
    """Exact power tail: P(X > x) = C x**(-alpha) for x >= C**(1/alpha)."""
    return (C / (1.0 - rng.random(size))) ** (1.0 / alpha)


# ---------------------------------------------------------------- Hill

def test_hill_recovers_exact_pareto_index():
    x = pareto(np.random.default_rng(0), 1.5, 200_000)
    h = vf.hill_estimator(x, 0.01)
    assert h.k == 2000
    assert abs(h.index - 1.5) < 4 * h.stderr


def test_hill_scale_invariance_is_exact_for_powers_of_two():
    x = pareto(np.random.default_rng(1), 1.3, 10_000)
    assert vf.hill_estimator(4.0 * x, 0.05).index == vf.hill_estimator(x, 0.05).index
    assert vf.hill_estimator(10.0 * x, 0.05).index == pytest.approx(
        vf.hill_estimator(x, 0.05).index, rel=1e-12)


def test_hill_ignores_nonpositive_samples():
    x = pareto(np.random.default_rng(2), 1.5, 10_000)
    y = np.concatenate([x, -x, np.zeros(100)])
    assert vf.hill_estimator(y, 0.05 * x.size / np.count_nonzero(y > 0)).index == \
        vf.hill_estimator(x, 0.05).index


def test_hill_errors():
    with pytest.raises(ValueError):
        vf.hill_estimator(np.ones(100), 0.5)
    with pytest.raises(vf.InsufficientSampleError):
        vf.hill_estimator(np.arange(1.0, 100.0), 0.01)
    with pytest.raises(vf.InsufficientSampleError):
        vf.hill_estimator(np.ones(10_000), 0.01)
    with pytest.raises(vf.InsufficientSampleError):
        vf.hill_estimator(-np.ones(10_000), 0.01)


def test_hill_check_verdict():
    x = pareto(np.random.default_rng(3), 1.5, 200_000)
    v = vf.hill_check(x, 1.5, 0.01, 0.1)
    assert v.passed and v.estimated_index == pytest.approx(1.5, abs=0.1)
    assert not vf.hill_check(x, 1.9, 0.01, 0.1).passed


# ---------------------------------------------------------------- tail ratio

def test_tail_ratio_on_scaled_pareto():
    rng = np.random.default_rng(4)
    alpha, kappa = 1.5, 0.5
    w1 = pareto(rng, alpha, 400_000)
    # P(r**(1/alpha) X > x) = r P(X > x): the exact ratio is r = 1/(1 - kappa) = 2
    w = 2.0 ** (1 / alpha) * pareto(rng, alpha, 400_000)
    v = vf.tail_ratio_check(w, w1, kappa)
    assert v.predicted_constant == 2.0
    assert v.estimated_constant == pytest.approx(2.0, rel=0.05)
    assert v.passed and not v.unstable


def test_tail_ratio_flags_wrong_ratio():
    rng = np.random.default_rng(5)
    w1 = pareto(rng, 1.5, 200_000)
    v = vf.tail_ratio_check(w1.copy(), w1, 0.5)
    assert v.estimated_constant == 1.0 and not v.passed


def test_tail_ratio_unstable_near_one():
    rng = np.random.default_rng(6)
    w1 = pareto(rng, 1.5, 200_000)
    v = vf.tail_ratio_check(w1, w1, 0.9995)
    assert v.unstable and not v.passed


def test_tail_ratio_errors():
    rng = np.random.default_rng(7)
    with pytest.raises(vf.InsufficientSampleError):
        vf.tail_ratio_check(np.ones(10), np.ones(10), 0.5)
    with pytest.raises(vf.WindowEmptyError):
        vf.tail_ratio_check(np.ones(200_000), np.ones(200_000), 0.5)
    with pytest.raises(ValueError):
        x = pareto(rng, 1.5, 200_000)
        vf.tail_ratio_check(x, x, 1.2)


# ---------------------------------------------------------------- series tails

def test_predicted_series_constant_closed_forms():
    k, a, c = 0.5, 1.5, 2.0
    assert vf.predicted_series_tail_constant([1.0], k, a, c) == c
    assert vf.predicted_series_tail_constant([1.0], k, a, c, tail="constant") == \
        pytest.approx(c / (1 - k))
    assert vf.predicted_series_tail_constant([1, -1], k, a, c, "+", "periodic") == \
        pytest.approx(c / (1 - k**2))
    assert vf.predicted_series_tail_constant([1, -1], k, a, c, "-", "periodic") == \
        pytest.approx(c * k / (1 - k**2))
    assert vf.predicted_series_tail_constant([2.0, 0.0], k, a, c, "+") == pytest.approx(c * 2**a)
    with pytest.raises(ValueError):
        vf.predicted_series_tail_constant([1.0], k, a, c, side="x")
    with pytest.raises(ValueError):
        vf.predicted_series_tail_constant([1.0], k, a, c, tail="x")


def test_predicted_series_constant_truncated_sum():
    """The periodic and constant closed forms equal long explicit sums."""
    k, a, c = 0.7, 1.5, 0.3
    long = [1, -1] * 200
    assert vf.predicted_series_tail_constant([1, -1], k, a, c, "+", "periodic") == \
        pytest.approx(vf.predicted_series_tail_constant(long, k, a, c, "+"), rel=1e-12)
    assert vf.predicted_series_tail_constant([0.5, 2.0], k, a, c, "+", "constant") == \
        pytest.approx(vf.predicted_series_tail_constant([0.5] + [2.0] * 400, k, a, c, "+"),
                      rel=1e-12)


def test_rank_tail_constant_recovers_C():
    x = pareto(np.random.default_rng(8), 1.5, 1_000_000, C=0.37)
    assert vf.rank_tail_constant(x, 0.005, 1.5) == pytest.approx(0.37, rel=0.05)
    with pytest.raises(vf.InsufficientSampleError):
        vf.rank_tail_constant(x[:100], 0.005, 1.5)


def test_series_tail_check_two_sided():
    rng = np.random.default_rng(9)
    k, a, c = 0.5, 1.5, 1.0
    up = vf.predicted_series_tail_constant([1, -1], k, a, c, "+", "periodic")
    lo = vf.predicted_series_tail_constant([1, -1], k, a, c, "-", "periodic")
    n = 1_000_000
    # a mixture whose two tails carry exactly the predicted constants
    s = np.where(rng.random(n) < 0.5, pareto(rng, a, n, 2 * up), -pareto(rng, a, n, 2 * lo))
    out = vf.series_tail_check(s, [1, -1], k, a, c)
    assert set(out) == {"upper", "lower"}
    assert out["upper"].passed and out["lower"].passed


# ---------------------------------------------------------------- characteristic functions

def test_ecf_normal():
    x = np.random.default_rng(10).standard_normal(200_000)
    assert np.max(np.abs(vf.ecf(x, GRID) - np.exp(-GRID**2 / 2))) < 0.01
    with pytest.raises(vf.InsufficientSampleError):
        vf.ecf([], GRID)


def test_ecf_accumulator_merge_is_order_free():
    x = np.random.default_rng(11).standard_cauchy(10_000)
    a = vf.EcfAccumulator(GRID).add(x[:3000])
    b = vf.EcfAccumulator(GRID).add(x[3000:])
    assert a.merge(b).value().tobytes() == b.merge(a).value().tobytes()
    assert np.allclose(a.merge(b).value(), vf.EcfAccumulator(GRID).add(x).value(), atol=1e-14)
    with pytest.raises(ValueError):
        a.merge(vf.EcfAccumulator(GRID[:-1]))
    with pytest.raises(vf.InsufficientSampleError):
        vf.EcfAccumulator(GRID).value()


def test_ecf_permutation_invariant():
    x = np.random.default_rng(12).standard_normal(5000)
    assert vf.ecf(x, GRID).tobytes() == vf.ecf(x[::-1], GRID).tobytes()


def test_cf_distance():
    e = np.array([1.0, 0.5j, 0.0])
    t = np.array([1.0, 0.0, 0.3])
    v = vf.cf_distance(e, t, 0.4)
    assert v.sup_distance == 0.5 and not v.passed
    assert v.l2_distance == pytest.approx(math.sqrt((0.25 + 0.09) / 3))
    with pytest.raises(ValueError):
        vf.cf_distance(e, t[:2])


def test_mixture_check_on_exact_mixture():
    rng = np.random.default_rng(13)
    spec, kappa = sl.StableSpec(1.5, 0.2), 0.6
    ar = sl.ARSpec.from_kappa(kappa, spec)
    w = rng.exponential(size=200_000)
    u = sl.sample_U_path(ar, 1, rng, w.size, method="direct")[:, 0]
    v = vf.mixture_check(w ** (1 / 1.5) * u, w, spec, kappa)
    assert v.passed and v.sup_distance < 0.015
    assert not vf.mixture_check(u, w, spec, kappa, tolerance=0.01).passed


def test_fdd_check_on_exact_ar_path():
    rng = np.random.default_rng(14)
    spec, kappa = sl.StableSpec(1.5, 0.2), 0.6
    ar = sl.ARSpec.from_kappa(kappa, spec)
    u = sl.sample_U_path(ar, 3, rng, 200_000)
    w = np.ones(200_000)
    assert vf.fdd_check(u, w, [1, 1, 1], spec, kappa).sup_distance < 0.015
    with pytest.raises(ValueError):
        vf.fdd_check(u, w, [1, 1], spec, kappa)


def test_mean_check():
    x = np.random.default_rng(15).normal(1.0, 1.0, 10_000)
    v = vf.mean_check(x, 1.0, "x")
    assert v.passed and abs(v.z) < 5
    assert not vf.mean_check(x + 1.0, 1.0).passed
    with pytest.raises(vf.InsufficientSampleError):
        vf.mean_check([1.0], 1.0)


def test_verdicts_serialize():
    v = vf.hill_check(pareto(np.random.default_rng(16), 1.5, 10_000), 1.5)
    json.dumps(v.to_dict())
    assert v.to_dict()["window_hi"] == "inf"
    json.dumps(vf.cf_distance(np.ones(3), np.ones(3)).to_dict())
