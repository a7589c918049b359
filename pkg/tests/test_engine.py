import math

import numpy as np
import pytest

from brwstable import engine, models
from brwstable.engine import Population, SimulationPolicy


def binary_split(theta=1.0, gap=3.0):
    """Deterministic two-child law with children at 0 and ``gap``: every W_n is exactly 1."""
    m = lambda t: 1.0 + math.exp(-t * gap)  # noqa: E731
    return models.Custom(lambda g: np.array([0.0, gap]), m=m, name="split")


@pytest.fixture(scope="module")
def normal_law(pareto2):
    return models.ParetoCount(1.5, pareto2.d, 1, models.Normal())


def test_policy_validation():
    with pytest.raises(ValueError):
        SimulationPolicy(4, 4)
    with pytest.raises(ValueError):
        SimulationPolicy(5, 2, population_cap=0)
    with pytest.raises(ValueError):
        SimulationPolicy(5, 2, prune_epsilon=-1.0)


def test_ancestor():
    pop = Population.ancestor()
    assert pop.size == 1 and pop.total_theta == 1.0 and pop.total_alpha_theta == 1.0


def test_paths_start_at_one(gw_law):
    b = engine.simulate_batch(gw_law, 0.0, 1.5, SimulationPolicy(6, 2), 1, 50)
    assert np.all(b.W_theta[:, 0] == 1.0) and np.all(b.W_alpha_theta[:, 0] == 1.0)


def test_gw_theta_zero_weights_coincide(gw_law):
    b = engine.simulate_batch(gw_law, 0.0, 1.5, SimulationPolicy(8, 2), 1, 200)
    assert np.array_equal(b.W_theta, b.W_alpha_theta)


def test_gw_path_is_scaled_generation_size(gw_law):
    b = engine.simulate_batch(gw_law, 0.0, 1.5, SimulationPolicy(8, 2), 3, 200)
    sizes = b.W_theta * 2.0 ** np.arange(9)
    assert np.allclose(sizes, np.round(sizes), rtol=0, atol=1e-6)
    # min_count 1: nondecreasing generation sizes, never extinct
    assert np.all(np.diff(np.round(sizes), axis=1) >= 0)
    assert np.all(b.extinct_at == -1)


def test_determinism_and_seed_sensitivity(normal_law):
    pol = SimulationPolicy(5, 2, 1e-9, 4096)
    a = engine.simulate_batch(normal_law, 0.5, 1.5, pol, 42, 30)
    b = engine.simulate_batch(normal_law, 0.5, 1.5, pol, 42, 30)
    c = engine.simulate_batch(normal_law, 0.5, 1.5, pol, 43, 30)
    assert a.W_theta.tobytes() == b.W_theta.tobytes()
    assert not np.array_equal(a.W_theta, c.W_theta)


def test_replicate_ranges_are_addressable(normal_law):
    pol = SimulationPolicy(5, 2, 1e-9, 4096)
    full = engine.simulate_batch(normal_law, 0.5, 1.5, pol, 8, 20)
    part = engine.simulate_batch(normal_law, 0.5, 1.5, pol, 8, 6, start=7)
    assert part.W_theta.tobytes() == full.W_theta[7:13].tobytes()
    one = engine.simulate_path(normal_law, 0.5, 1.5, pol, 8, replicate=11)
    assert one.W_theta.tobytes() == full.W_theta[11].tobytes()


def test_thread_count_does_not_change_results(gw_law):
    pol = SimulationPolicy(10, 4)
    n = 2 * engine.CHUNK + 17
    a = engine.simulate_batch(gw_law, 0.0, 1.5, pol, 5, n, threads=1)
    b = engine.simulate_batch(gw_law, 0.0, 1.5, pol, 5, n, threads=4)
    assert a.W_theta.tobytes() == b.W_theta.tobytes()
    assert a.W_alpha_theta.tobytes() == b.W_alpha_theta.tobytes()


def test_chunk_partition():
    assert engine.replicate_chunks(0, 10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert engine.map_chunks(lambda lo, hi: hi - lo, 0, 10, threads=3, chunk=4) == [4, 4, 2]


def test_martingale_mean_gw(gw_law):
    b = engine.simulate_batch(gw_law, 0.0, 1.5, SimulationPolicy(8, 4), 99, 1_000_000)
    # Infinite variance: the sample mean fluctuates on the scale R**(1/alpha - 1),
    # about 0.015 here for R = 1e6, with a heavy right tail.  0.06 is four scales.
    for n in (1, 4, 8):
        assert abs(b.W_theta[:, n].mean() - 1.0) < 0.06


def test_martingale_mean_generation_one_exact(normal_law):
    b = engine.simulate_batch(normal_law, 0.5, 1.5, SimulationPolicy(2, 1, 0.0, 1 << 16), 4, 50_000)
    # W_1 = sum of N normalized weights; N has the heavy tail, so the same
    # stable-scale allowance applies (about 0.05 at R = 5e4)
    assert abs(b.W_theta[:, 1].mean() - 1.0) < 0.2


def test_alpha_theta_weights_are_consistent(normal_law):
    """Each W_n(alpha theta) equals the sum of the children weights computed from positions."""
    pol = SimulationPolicy(3, 1, 0.0, 1 << 16)
    p = engine.prepare(normal_law, 0.5, 1.5, backend="python")
    pop = engine.step_generation(Population.ancestor(), p, 0.5, 1.5, pol, 3, 0)
    # recover the positions from the theta weights and rebuild the alpha theta weights
    m1, ma = models.laplace_m(normal_law, 0.5), models.laplace_m(normal_law, 0.75)
    x = -np.log(pop.weights_theta * m1) / 0.5
    assert np.allclose(pop.weights_alpha_theta, np.exp(-0.75 * x) / ma, rtol=1e-12)


# ---------------------------------------------------------------- pruning and capping

@pytest.mark.parametrize("eps", [0.0, 1e-3, 1e-2])
def test_pruning_bound_is_sound_on_deterministic_tree(eps):
    law = binary_split()
    pol = SimulationPolicy(14, 2, eps, 1 << 20)
    path = engine.simulate_path(law, 1.0, 1.5, pol, 1)
    # the exact martingale is identically one
    assert np.all(path.W_theta <= 1.0 + 1e-12)
    assert path.W_theta[-1] + path.pruned_mass_bound == pytest.approx(1.0, abs=1e-12)
    if eps == 0.0:
        assert path.pruned_mass_bound == 0.0
    else:
        assert path.pruned_mass_bound > 0.0


def test_cap_bound_is_sound_on_deterministic_tree():
    law = binary_split()
    pol = SimulationPolicy(12, 2, 0.0, 64)
    path = engine.simulate_path(law, 1.0, 1.5, pol, 1)
    assert path.capped
    assert path.W_theta[-1] + path.pruned_mass_bound == pytest.approx(1.0, abs=1e-12)


def test_cap_keeps_heaviest_atoms():
    law = binary_split()
    pol = SimulationPolicy(8, 2, 0.0, 5)
    pop = Population.ancestor()
    p = engine.prepare(law, 1.0, 1.5)
    for _ in range(6):
        pop = engine.step_generation(pop, p, 1.0, 1.5, pol, 0, 0)
        assert len(pop) <= 5
    # the leftmost particle (all displacements zero) always survives
    m = 1.0 + math.exp(-3.0)
    assert pop.weights_theta.max() == pytest.approx(m ** -6)


def test_pruning_bound_random_tree(normal_law):
    """Pruned mass bounds the discrepancy to an unpruned run in expectation."""
    exact = engine.simulate_batch(normal_law, 0.5, 1.5, SimulationPolicy(5, 2, 0.0, 1 << 20), 6, 200)
    rough = engine.simulate_batch(normal_law, 0.5, 1.5, SimulationPolicy(5, 2, 1e-4, 1 << 20), 6, 200)
    gap = exact.W_theta[:, -1] - rough.W_theta[:, -1]
    assert np.all(gap >= -1e-12)
    # descendants of pruned atoms have mean equal to the pruned mass
    assert abs(gap.mean() - rough.pruned_mass_bound.mean()) < 5 * gap.std() / math.sqrt(200) + 1e-12


def test_extinction_recorded():
    law = models.GaltonWatson(models.FiniteCountLaw((0, 2), (0.4, 0.6)))
    b = engine.simulate_batch(law, 0.0, 1.5, SimulationPolicy(10, 2), 2, 500)
    dead = b.extinct_at >= 0
    assert dead.any() and (~dead).any()
    for i in np.nonzero(dead)[0][:20]:
        e = b.extinct_at[i]
        assert np.all(b.W_theta[i, e:] == 0.0) and b.W_theta[i, e - 1] > 0


def test_custom_law_requires_python_backend():
    with pytest.raises(models.UnsupportedLawError):
        engine.prepare(binary_split(), 1.0, 1.5, backend="compiled")
    assert engine.prepare(binary_split(), 1.0, 1.5).backend == "python"


def test_infinite_points_truncation_mass(pareto2):
    theta, a = models.calibrate_infinite_example(pareto2, models.Exponential(1.0), 1.0, 2.0)
    law = models.InfinitePoints(pareto2, models.Exponential(1.0), a)
    pol = SimulationPolicy(3, 1, 0.0, 1 << 20, 1e-9)
    b = engine.simulate_batch(law, theta, 1.5, pol, 1, 50)
    assert np.all(b.pruned_mass_bound > 0)
    assert np.all(b.pruned_mass_bound < 1e-8 * np.maximum(b.W_theta.max(axis=1), 1))


# ---------------------------------------------------------------- derived samples

def test_fluctuation_samples_formula():
    W = np.array([[1.0, 1.2, 0.9, 1.1, 1.05]])
    paths = [engine.MartingalePath(W[0], W[0] * 2)]
    X, w = engine.fluctuation_samples(paths, 2, [0, 1], 0.5, 1.5)
    assert X[0, 0] == pytest.approx(0.5 ** (-2 / 1.5) * (1.05 - 0.9))
    assert X[0, 1] == pytest.approx(0.5 ** (-1 / 1.5) * (1.05 - 1.2))
    assert w[0] == 1.8
    with pytest.raises(IndexError):
        engine.fluctuation_samples(paths, 2, [3], 0.5, 1.5)
    with pytest.raises(IndexError):
        engine.fluctuation_samples(paths, 4, [0], 0.5, 1.5)


def test_weighted_increment_series():
    path = engine.MartingalePath(np.array([1.0, 2.0, 4.0, 7.0]), np.ones(4))
    assert engine.weighted_increment_series(path, [1, -1, 1]) == pytest.approx(1 - 2 + 3)
    with pytest.raises(ValueError):
        engine.weighted_increment_series(path, [1, 1, 1, 1])


def test_choose_max_generation():
    k, a = 2**-0.5, 1.5
    M = engine.choose_max_generation(k, a, 12)
    assert engine.truncation_scale(k, a, 12, M) <= 1e-2
    assert engine.truncation_scale(k, a, 12, M - 1) > 1e-2
