"""RNG layout and agreement between the compiled kernel and the Python mirror."""

import math

import numpy as np
import pytest

from brwstable import _fallback, engine, models, rng
from brwstable.engine import SimulationPolicy

kernels = pytest.importorskip("brwstable._kernels")


@pytest.mark.parametrize("seed, rep, gen, label", [
    (0, 0, 0, 0), (20240601, 17, 5, 123456789), ((1 << 64) - 1, (1 << 64) - 1, 29, (1 << 64) - 1),
])
def test_raw_stream_matches_numpy_philox(seed, rep, gen, label):
    g = rng.particle_stream(seed, rep, gen, label)
    expected = g.bit_generator.random_raw(64)
    assert np.array_equal(kernels.raw_stream(seed, rep, gen, label, 64), expected)


def test_child_label_agrees_and_spreads():
    labels = {rng.child_label(0, j) for j in range(10_000)}
    assert len(labels) == 10_000
    for parent in (0, 1, 2**63, (1 << 64) - 1):
        for j in (0, 1, 1000):
            assert kernels.child_label(parent, j) == rng.child_label(parent, j)


def test_streams_are_distinct():
    a = rng.particle_stream(1, 0, 0, 0).random(4)
    assert not np.array_equal(a, rng.particle_stream(1, 1, 0, 0).random(4))
    assert not np.array_equal(a, rng.particle_stream(1, 0, 1, 0).random(4))
    assert not np.array_equal(a, rng.particle_stream(1, 0, 0, 1).random(4))
    assert not np.array_equal(a, rng.replicate_stream(1, 0, 1).random(4))


@pytest.mark.parametrize("k", [1, 5, 16, 17, 100, 10_000, 10**7])
def test_count_sum_bit_identical(pareto2, k):
    spec = models.kernel_spec(models.GaltonWatson(pareto2), 0.0, 1.5)
    kl, fl = kernels.KernelLaw(spec), _fallback.FallbackLaw(spec)
    for label in range(20):
        g = rng.particle_stream(9, 3, 2, label)
        assert kernels.count_sum_draw(kl, k, 9, 3, 2, label) == _fallback.count_sum(fl, g, k)


def test_count_sum_distribution_small_k(pareto2):
    spec = models.kernel_spec(models.GaltonWatson(pareto2), 0.0, 1.5)
    kl = kernels.KernelLaw(spec)
    draws = np.array([kernels.count_sum_draw(kl, 3, 1, 0, 0, i) for i in range(200_000)])
    # P(S_3 = 3) = P(N = 1)^3
    p = float(pareto2.pmf(1)) ** 3
    assert abs((draws == 3).mean() - p) < 5 * math.sqrt(p * (1 - p) / draws.size)


def test_count_sum_mean_large_k(pareto2):
    """Banded sums keep the right centre: the median of S_k / k is near the mean 2."""
    spec = models.kernel_spec(models.GaltonWatson(pareto2), 0.0, 1.5)
    kl = kernels.KernelLaw(spec)
    k = 10**6
    draws = np.array([kernels.count_sum_draw(kl, k, 5, 0, 0, i) for i in range(4000)]) / k
    # fluctuations are of order k^(1/alpha - 1) = 0.01, one-sided heavy right tail
    assert 1.9 < np.median(draws) < 2.02
    assert draws.min() > 1.9


def test_finite_count_sum_identical():
    law = models.GaltonWatson(models.FiniteCountLaw((0, 1, 2, 5), (0.1, 0.3, 0.4, 0.2)))
    spec = models.kernel_spec(law, 0.0, 1.5)
    kl, fl = kernels.KernelLaw(spec), _fallback.FallbackLaw(spec)
    for k in (3, 40, 5000):
        for label in range(10):
            g = rng.particle_stream(2, 0, 0, label)
            assert kernels.count_sum_draw(kl, k, 2, 0, 0, label) == _fallback.count_sum(fl, g, k)


def _laws(pareto2):
    theta_inf, _ = models.calibrate_infinite_example(pareto2, models.Exponential(1.0), 1.0, 2.0)
    return [
        ("gw", models.GaltonWatson(pareto2), 0.0, SimulationPolicy(10, 4)),
        ("normal", models.ParetoCount(1.5, pareto2.d, 1, models.Normal()), 0.5,
         SimulationPolicy(6, 3, 1e-9, 4096)),
        ("uniform", models.ParetoCount(1.5, pareto2.d, 1, models.Uniform(-1, 1)), 0.3,
         SimulationPolicy(5, 2, 1e-9, 2048)),
        ("point", models.ParetoCount(1.5, pareto2.d, 1, models.PointMass(0.7)), 0.4,
         SimulationPolicy(10, 4)),
        ("infinite", models.InfinitePoints(pareto2, models.Exponential(1.0), 2.0), theta_inf,
         SimulationPolicy(5, 2, 1e-6, 4096, 1e-6)),
    ]


@pytest.mark.parametrize("idx", range(5))
def test_backends_bit_identical(pareto2, idx):
    name, law, theta, pol = _laws(pareto2)[idx]
    a = engine.simulate_batch(law, theta, 1.5, pol, seed=77, replicates=40, backend="compiled")
    b = engine.simulate_batch(law, theta, 1.5, pol, seed=77, replicates=40, backend="python")
    for field in ("W_theta", "W_alpha_theta", "extinct_at", "capped", "pruned_mass_bound"):
        x, y = getattr(a, field), getattr(b, field)
        assert x.tobytes() == y.tobytes(), (name, field)


@pytest.mark.parametrize("idx", [0, 1, 4])
def test_step_bit_identical(pareto2, idx):
    _, law, theta, pol = _laws(pareto2)[idx]
    pops = []
    for backend in ("compiled", "python"):
        p = engine.prepare(law, theta, 1.5, pol.offspring_truncation_epsilon, backend)
        pop = engine.Population.ancestor()
        for _ in range(3):
            pop = engine.step_generation(pop, p, theta, 1.5, pol, 11, 2)
        pops.append(pop)
    a, b = pops
    assert a.weights_theta.tobytes() == b.weights_theta.tobytes()
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.counts, b.counts)
    assert a.pruned_mass_bound == b.pruned_mass_bound


def test_step_matches_batch(pareto2):
    """Stepping by hand reproduces the batch kernel path."""
    _, law, theta, pol = _laws(pareto2)[1]
    path = engine.simulate_path(law, theta, 1.5, pol, 5, replicate=3)
    p = engine.prepare(law, theta, 1.5, pol.offspring_truncation_epsilon)
    pop = engine.Population.ancestor()
    for n in range(1, pol.max_generation + 1):
        pop = engine.step_generation(pop, p, theta, 1.5, pol, 5, 3)
        assert pop.total_theta == path.W_theta[n]


def test_backend_env_override(monkeypatch):
    monkeypatch.setenv("BRWSTABLE_BACKEND", "python")
    assert engine._default_backend() == "python"
    monkeypatch.setenv("BRWSTABLE_BACKEND", "bogus")
    with pytest.raises(ValueError):
        engine._default_backend()
    assert "python" in engine.available_backends()
