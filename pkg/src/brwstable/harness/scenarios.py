"""Builtin scenarios."""

from __future__ import annotations

from functools import lru_cache

from .. import models
from .config import ExperimentConfig

PARETO_COUNT = {"kind": "pareto", "tail_index": 1.5, "mean": 2.0, "min_count": 1}
DEFAULT_SEED = 20240601


def _gw_heyde() -> dict:
    return {
        "schema_version": 1,
        "scenario": "gw-heyde",
        "description": "Galton-Watson tree at theta=0, Pareto(1.5) brood with mean 2 "
                       "(the classical Heyde setting)",
        "law": {"kind": "galton-watson", "count": dict(PARETO_COUNT)},
        "theta": 0.0,
        "alpha": 1.5,
        "policy": {"max_generation": 30, "horizon": 12, "lags": [0, 1, 2],
                   "prune_epsilon": 1e-12, "population_cap": 1 << 20,
                   "offspring_truncation_epsilon": 1e-12},
        "replicates": 1_000_000,
        "seed": DEFAULT_SEED,
        "checks": {
            "tail_ratio": {"quantiles": [0.99, 0.999]},
            "hill": {"top_fraction": 0.01},
            "mixture_cf": {},
            "fdd": {"betas": [[1, 1, 1], [1, -1, 0]]},
            "martingale": {"max_n": 10},
        },
    }


def _pareto_normal() -> dict:
    return {
        "schema_version": 1,
        "scenario": "pareto-normal",
        "description": "Pareto(1.5) brood with mean 2 and standard normal displacements, "
                       "theta=0.5",
        "law": {"kind": "pareto-count", "count": dict(PARETO_COUNT),
                "displacement": {"kind": "normal", "mean": 0.0, "variance": 1.0}},
        "theta": 0.5,
        "alpha": 1.5,
        "policy": {"max_generation": 10, "horizon": 4, "lags": [0, 1, 2],
                   "prune_epsilon": 1e-9, "population_cap": 1 << 20,
                   "offspring_truncation_epsilon": 1e-12},
        "replicates": 100_000,
        "seed": DEFAULT_SEED,
        "checks": {"hill": {"top_fraction": 0.01, "samples": "W1"}, "martingale": {"max_n": 9}},
    }


def _infinite_points() -> dict:
    k_law = models.ParetoCountLaw.with_mean(2.0, 1.5, 1)
    a = 2.0
    theta, _ = models.calibrate_infinite_example(k_law, models.Exponential(1.0), 1.0, a)
    return {
        "schema_version": 1,
        "scenario": "infinite-points",
        "description": "K Pareto(1.5) points with Exp(1) positions followed by the lattice "
                       "a(K+1), a(K+2), ...; theta calibrated so that m(theta)=1",
        "law": {"kind": "infinite-points", "k": dict(PARETO_COUNT),
                "y": {"kind": "exponential", "rate": 1.0}, "a": a},
        "theta": theta,
        "alpha": 1.5,
        "policy": {"max_generation": 8, "horizon": 4, "lags": [0, 1, 2],
                   "prune_epsilon": 1e-6, "population_cap": 1 << 20,
                   "offspring_truncation_epsilon": 1e-6},
        "replicates": 100_000,
        "seed": DEFAULT_SEED,
        "checks": {"martingale": {"max_n": 7}},
    }


def _series_alternating() -> dict:
    doc = _gw_heyde()
    doc.update(
        scenario="series-alternating",
        description="alternating-sign increment series sum_j (-1)^j (W_{j+1} - W_j) "
                    "on the gw-heyde tree",
        checks={
            "series_tail": {"coefficients": [1, -1], "tail": "periodic",
                            "top_fraction": 0.005},
            "martingale": {"max_n": 10},
        },
    )
    return doc


_BUILDERS = {
    "gw-heyde": _gw_heyde,
    "pareto-normal": _pareto_normal,
    "infinite-points": _infinite_points,
    "series-alternating": _series_alternating,
}


def list_scenarios() -> dict:
    """Scenario name to one-line description."""
    return {name: get_scenario(name).description for name in _BUILDERS}


@lru_cache(maxsize=None)
def _cached(name: str) -> str:
    return ExperimentConfig.from_dict(_BUILDERS[name]()).dumps()


def get_scenario(name: str) -> ExperimentConfig:
    if name not in _BUILDERS:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(_BUILDERS)}")
    import yaml
    return ExperimentConfig.from_dict(yaml.safe_load(_cached(name)))
