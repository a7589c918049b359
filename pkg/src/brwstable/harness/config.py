"""Experiment configuration: YAML documents, validation, law construction, digests.

A configuration is a YAML mapping.  The accepted keys, with types and defaults,
are documented in the repository README.  ``schema_version`` must be 1.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .. import models
from ..engine import SimulationPolicy

SCHEMA_VERSION = 1

# keys that never change simulated numbers or verdicts
NON_SEMANTIC = ("description", "output", "threads")

DEFAULT_TOLERANCES = {
    "cf_sup": 0.05,
    "tail_ratio": 0.15,
    "hill": 0.1,
    "series_tail": 0.2,
    "mean_z": 5.0,
}

DEFAULT_POLICY = {
    "prune_epsilon": 1e-12,
    "population_cap": 1 << 20,
    "offspring_truncation_epsilon": 1e-12,
    "lags": [0],
}


CHECKS = ("tail_ratio", "hill", "mixture_cf", "fdd", "martingale", "series_tail")


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration documents."""


@dataclass
class ExperimentConfig:
    scenario: str
    law: dict
    theta: float
    alpha: float
    policy: dict
    replicates: int
    seed: int
    checks: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    grid: dict = field(default_factory=lambda: {"lo": -5.0, "hi": 5.0, "points": 81})
    output: dict = field(default_factory=lambda: {"dir": "runs"})
    description: str = ""
    threads: int = 1
    schema_version: int = SCHEMA_VERSION

    # ------------------------------------------------------------ (de)serialization
    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a mapping")
        doc = copy.deepcopy(doc)
        version = doc.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
        required = ("scenario", "law", "theta", "alpha", "policy", "replicates", "seed")
        missing = [k for k in required if k not in doc]
        if missing:
            raise ConfigError(f"missing keys: {', '.join(missing)}")
        known = set(required) | {"checks", "tolerances", "grid", "output", "description",
                                 "threads"}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(unknown)}")
        policy = dict(DEFAULT_POLICY)
        policy.update(doc.pop("policy") or {})
        tolerances = dict(DEFAULT_TOLERANCES)
        tolerances.update(doc.pop("tolerances", None) or {})
        cfg = cls(policy=policy, tolerances=tolerances, **doc)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "description": self.description,
            "law": copy.deepcopy(self.law),
            "theta": self.theta,
            "alpha": self.alpha,
            "policy": copy.deepcopy(self.policy),
            "replicates": self.replicates,
            "seed": self.seed,
            "checks": copy.deepcopy(self.checks),
            "tolerances": dict(self.tolerances),
            "grid": dict(self.grid),
            "output": dict(self.output),
            "threads": self.threads,
        }

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.from_dict(doc)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    def replace(self, **changes) -> "ExperimentConfig":
        doc = self.to_dict()
        doc.update(changes)
        return ExperimentConfig.from_dict(doc)

    # ------------------------------------------------------------ derived objects
    def validate(self) -> None:
        try:
            self.theta = float(self.theta)
            self.alpha = float(self.alpha)
            self.replicates = int(self.replicates)
            self.seed = int(self.seed)
            self.threads = int(self.threads)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not 1 < self.alpha < 2:
            raise ConfigError(f"alpha must lie in (1, 2), got {self.alpha}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        lags = self.policy.get("lags", [0])
        if not isinstance(lags, list) or not all(isinstance(r, int) and r >= 0 for r in lags):
            raise ConfigError("policy.lags must be a list of nonnegative integers")
        try:
            pol = self.simulation_policy()
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid policy: {exc}") from exc
        if any(r > pol.horizon for r in lags):
            raise ConfigError(f"lags {lags} exceed the horizon n={pol.horizon}")
        try:
            self.build_law()
        except (models.LawError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid law: {exc}") from exc
        if int(self.grid.get("points", 0)) < 1:
            raise ConfigError("grid.points must be >= 1")
        unknown_checks = sorted(set(self.checks) - set(CHECKS))
        if unknown_checks:
            raise ConfigError(f"unknown checks: {', '.join(unknown_checks)}")
        for betas in (self.checks.get("fdd") or {}).get("betas", []):
            if len(betas) != len(lags):
                raise ConfigError(f"fdd betas {betas} do not match lags {lags}")
        series = self.checks.get("series_tail")
        if series is not None:
            coeffs = series.get("coefficients", [])
            if not coeffs or len(coeffs) > pol.max_generation:
                raise ConfigError("series_tail.coefficients must have 1..M entries")

    def simulation_policy(self) -> SimulationPolicy:
        p = self.policy
        return SimulationPolicy(
            max_generation=int(p["max_generation"]),
            horizon=int(p["horizon"]),
            prune_epsilon=float(p["prune_epsilon"]),
            population_cap=int(p["population_cap"]),
            offspring_truncation_epsilon=float(p["offspring_truncation_epsilon"]),
        )

    @property
    def lags(self) -> list:
        return list(self.policy.get("lags", [0]))

    def build_law(self) -> models.OffspringLaw:
        return build_law(self.law)

    def grid_points(self):
        from ..verify import default_grid
        return default_grid(float(self.grid["lo"]), float(self.grid["hi"]),
                            int(self.grid["points"]))

    # ------------------------------------------------------------ digest
    def semantic_dict(self) -> dict:
        doc = self.to_dict()
        for key in NON_SEMANTIC:
            doc.pop(key, None)
        return doc

    @property
    def digest(self) -> str:
        canon = json.dumps(_canonical(self.semantic_dict()), sort_keys=True,
                           separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _canonical(obj: Any):
    """Normalize numbers so that ``2`` and ``2.0`` hash alike."""
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, float)):
        x = float(obj)
        if math.isfinite(x) and x == int(x) and abs(x) < 2**53:
            return int(x)
        return repr(x)
    raise ConfigError(f"unsupported value {obj!r} in configuration")


# ---------------------------------------------------------------------------
# law vocabulary


def build_displacement(doc: dict) -> models.DisplacementLaw:
    kind = doc.get("kind")
    if kind == "normal":
        return models.Normal(float(doc.get("mean", 0.0)), float(doc.get("variance", 1.0)))
    if kind == "exponential":
        return models.Exponential(float(doc.get("rate", 1.0)))
    if kind == "point":
        return models.PointMass(float(doc.get("location", 0.0)))
    if kind == "uniform":
        return models.Uniform(float(doc["lo"]), float(doc["hi"]))
    raise models.LawError(f"unknown displacement kind {kind!r}")


def build_count(doc: dict):
    kind = doc.get("kind")
    if kind == "pareto":
        alpha = float(doc["tail_index"])
        n0 = int(doc.get("min_count", 1))
        if "d" in doc and "mean" in doc:
            raise models.LawError("give either d or mean for a Pareto count, not both")
        if "mean" in doc:
            return models.ParetoCountLaw.with_mean(float(doc["mean"]), alpha, n0)
        return models.ParetoCountLaw(alpha, float(doc["d"]), n0)
    if kind == "finite":
        return models.FiniteCountLaw(tuple(doc["values"]), tuple(doc["probs"]))
    raise models.LawError(f"unknown count kind {kind!r}")


def build_law(doc: dict) -> models.OffspringLaw:
    kind = doc.get("kind")
    if kind == "galton-watson":
        return models.GaltonWatson(build_count(doc["count"]))
    if kind == "pareto-count":
        count = build_count(doc["count"])
        if not isinstance(count, models.ParetoCountLaw):
            raise models.LawError("pareto-count needs a Pareto count law")
        return models.ParetoCount(count.alpha, count.d, count.min_count,
                                  build_displacement(doc["displacement"]))
    if kind == "infinite-points":
        k_law = build_count(doc["k"])
        if not isinstance(k_law, models.ParetoCountLaw):
            raise models.LawError("infinite-points needs a Pareto law for K")
        return models.InfinitePoints(k_law, build_displacement(doc["y"]), float(doc["a"]))
    raise models.LawError(f"unknown law kind {kind!r}")
