"""Property-based checks of invariants that hold for every input."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from brwstable import engine, models, rng, stablelim
from brwstable.harness import get_scenario

u64 = st.integers(min_value=0, max_value=(1 << 64) - 1)


@given(u64, st.integers(min_value=0, max_value=10**6))
def test_child_labels_match_compiled(parent, j):
    kernels = __import__("brwstable._kernels", fromlist=["child_label"])
    assert kernels.child_label(parent, j) == rng.child_label(parent, j)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.floats(0.05, 0.95),
       st.floats(1.05, 1.95))
def test_gammas_satisfy_recursion(betas, kappa, alpha):
    g = stablelim.gammas(betas, kappa, alpha)
    phi = kappa ** (1 / alpha)
    assert math.isclose(g[-1], betas[-1], abs_tol=1e-12)
    for i in range(len(betas) - 1):
        assert math.isclose(g[i], betas[i] + phi * g[i + 1], rel_tol=1e-12, abs_tol=1e-12)


@given(st.floats(0.05, 0.95), st.floats(1.05, 1.95), st.floats(0.01, 5.0))
def test_series_constants_nonnegative_and_one_sided(kappa, alpha, c):
    c1, c2 = stablelim.series_constants(c, kappa, alpha, [1.0, 0.5])
    assert c1 > 0 and c2 == 0.0


@given(st.floats(0.5, 6.0), st.floats(0.0, 0.3), st.integers(2, 10))
@settings(max_examples=25, deadline=None)
def test_pruning_never_loses_mass_on_deterministic_tree(gap, eps, M):
    law = models.Custom(lambda g: np.array([0.0, gap]), m=lambda t: 1.0 + math.exp(-t * gap))
    path = engine.simulate_path(law, 1.0, 1.5, engine.SimulationPolicy(M, 1, eps, 1 << 12), 0)
    assert abs(path.W_theta[-1] + path.pruned_mass_bound - 1.0) < 1e-12


@given(st.integers(1, 8), st.sampled_from(["description", "threads"]))
@settings(max_examples=10, deadline=None)
def test_digest_ignores_non_semantic_keys(k, key):
    cfg = get_scenario("gw-heyde")
    value = "x" * k if key == "description" else k
    assert cfg.replace(**{key: value}).digest == cfg.digest
