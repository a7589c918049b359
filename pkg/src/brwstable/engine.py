"""Generation-by-generation simulation of normalized weight populations.

Particles are never positioned explicitly.  Each atom of a population
carries its weight at ``theta``, its weight at ``alpha * theta``, a
multiplicity and a hashed genealogical label.  Multiplicity exceeds one only
for laws whose children all share the parent position (point-mass
displacements); then a whole generation collapses into one atom and the
brood total is a single draw of a sum of i.i.d. counts.

Two interchangeable backends execute the recursion: the compiled kernel and
a pure-Python mirror.  They agree bit for bit.  ``BRWSTABLE_BACKEND`` (``compiled``
or ``python``) overrides the choice made at import time.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _fallback
from .models import Custom, KIND_IID, OffspringLaw, UnsupportedLawError, kernel_spec, laplace_m
from .rng import ROOT_LABEL

try:
    from . import _kernels
except ImportError:  # pragma: no cover - exercised only without a compiler
    _kernels = None

log = logging.getLogger(__name__)

__all__ = [
    "BACKEND",
    "available_backends",
    "SimulationPolicy",
    "Population",
    "MartingalePath",
    "PathBatch",
    "PreparedLaw",
    "prepare",
    "step_generation",
    "simulate_path",
    "simulate_batch",
    "fluctuation_samples",
    "weighted_increment_series",
]


def available_backends() -> list:
    return (["compiled"] if _kernels is not None else []) + ["python"]


def _default_backend() -> str:
    forced = os.environ.get("BRWSTABLE_BACKEND", "").strip().lower()
    if forced:
        if forced not in ("compiled", "python"):
            raise ValueError(f"BRWSTABLE_BACKEND must be 'compiled' or 'python', got {forced!r}")
        if forced == "compiled" and _kernels is None:
            raise ImportError("BRWSTABLE_BACKEND=compiled but the extension is not built")
        return forced
    return "compiled" if _kernels is not None else "python"


BACKEND = _default_backend()


@dataclass(frozen=True)
class SimulationPolicy:
    max_generation: int
    horizon: int
    prune_epsilon: float = 1e-12
    population_cap: int = 1 << 20
    offspring_truncation_epsilon: float = 1e-12

    def __post_init__(self):
        if not 0 <= self.horizon < self.max_generation:
            raise ValueError(f"need 0 <= n < M, got n={self.horizon}, M={self.max_generation}")
        if self.population_cap < 1:
            raise ValueError("population_cap must be >= 1")
        if self.prune_epsilon < 0 or self.offspring_truncation_epsilon < 0:
            raise ValueError("epsilons must be nonnegative")


@dataclass
class Population:
    """One generation.  Arrays are indexed by atom; ``counts`` are multiplicities."""

    weights_theta: np.ndarray
    weights_alpha_theta: np.ndarray
    counts: np.ndarray
    labels: np.ndarray
    generation: int = 0
    pruned_mass_bound: float = 0.0
    capped: bool = False

    @classmethod
    def ancestor(cls, label: int = ROOT_LABEL) -> "Population":
        return cls(np.ones(1), np.ones(1), np.ones(1, dtype=np.int64),
                   np.array([label], dtype=np.uint64))

    def __len__(self) -> int:
        return len(self.weights_theta)

    @property
    def size(self) -> int:
        """Number of particles (not atoms)."""
        return int(self.counts.sum())

    @property
    def total_theta(self) -> float:
        return float(np.cumsum(self.counts * self.weights_theta)[-1]) if len(self) else 0.0

    @property
    def total_alpha_theta(self) -> float:
        return float(np.cumsum(self.counts * self.weights_alpha_theta)[-1]) if len(self) else 0.0


@dataclass
class MartingalePath:
    W_theta: np.ndarray
    W_alpha_theta: np.ndarray
    extinct_at: Optional[int] = None
    pruned_mass_bound: float = 0.0
    capped: bool = False

    @property
    def max_generation(self) -> int:
        return len(self.W_theta) - 1


@dataclass
class PathBatch:
    """Replicates ``start .. start + len - 1`` stacked row-wise."""

    W_theta: np.ndarray
    W_alpha_theta: np.ndarray
    extinct_at: np.ndarray
    capped: np.ndarray
    pruned_mass_bound: np.ndarray
    start: int = 0

    def __len__(self) -> int:
        return self.W_theta.shape[0]

    def path(self, i: int) -> MartingalePath:
        e = int(self.extinct_at[i])
        return MartingalePath(self.W_theta[i].copy(), self.W_alpha_theta[i].copy(),
                              None if e < 0 else e, float(self.pruned_mass_bound[i]),
                              bool(self.capped[i]))

    @classmethod
    def concatenate(cls, parts: Sequence["PathBatch"]) -> "PathBatch":
        parts = sorted(parts, key=lambda p: p.start)
        return cls(np.concatenate([p.W_theta for p in parts]),
                   np.concatenate([p.W_alpha_theta for p in parts]),
                   np.concatenate([p.extinct_at for p in parts]),
                   np.concatenate([p.capped for p in parts]),
                   np.concatenate([p.pruned_mass_bound for p in parts]),
                   parts[0].start if parts else 0)


@dataclass
class PreparedLaw:
    """A law bound to ``(theta, alpha)`` and to a backend, ready to simulate."""

    law: OffspringLaw
    theta: float
    alpha: float
    backend: str
    spec: dict = field(repr=False)
    handle: object = field(repr=False)

    @property
    def custom(self):
        return self.law.sampler if isinstance(self.law, Custom) else None


def prepare(law: OffspringLaw, theta: float, alpha: float,
            truncation_eps: float = 1e-12, backend: Optional[str] = None) -> PreparedLaw:
    if isinstance(law, Custom):
        if backend == "compiled":
            raise UnsupportedLawError("custom samplers only run on the Python backend")
        backend = "python"
        m1, ma = laplace_m(law, theta), laplace_m(law, alpha * theta)
        spec = {"kind": KIND_IID, "theta": theta, "atheta": alpha * theta,
                "m_theta": m1, "m_atheta": ma}
        handle = _CustomLaw(spec)
    else:
        backend = backend or BACKEND
        spec = kernel_spec(law, theta, alpha, truncation_eps)
        if backend == "compiled":
            if _kernels is None:
                raise ImportError("compiled backend requested but not built")
            handle = _kernels.KernelLaw(spec)
        elif backend == "python":
            handle = _fallback.FallbackLaw(spec)
        else:
            raise ValueError(f"unknown backend {backend!r}")
    return PreparedLaw(law, theta, alpha, backend, spec, handle)


class _CustomLaw:
    def __init__(self, spec):
        self.__dict__.update(spec)


def _as_prepared(law, theta, alpha, policy, backend) -> PreparedLaw:
    if isinstance(law, PreparedLaw):
        return law
    return prepare(law, theta, alpha, policy.offspring_truncation_epsilon, backend)


def step_generation(pop: Population, law, theta: float, alpha: float, policy: SimulationPolicy,
                    seed: int, replicate: int, backend: Optional[str] = None) -> Population:
    """Advance one generation; children draw from their parent's ``(seed, replicate)`` stream."""
    p = _as_prepared(law, theta, alpha, policy, backend)
    if len(pop) == 0:
        return Population(pop.weights_theta[:0], pop.weights_alpha_theta[:0], pop.counts[:0],
                          pop.labels[:0], pop.generation + 1, pop.pruned_mass_bound, pop.capped)
    if p.backend == "compiled":
        wt, wa, cnt, lab, pruned, capped = _kernels.step(
            p.handle, pop.weights_theta, pop.weights_alpha_theta, pop.counts, pop.labels,
            pop.generation, seed, replicate, policy.prune_epsilon, policy.population_cap)
    else:
        wt, wa, cnt, lab, pruned, capped = _fallback.step(
            p.handle, pop.weights_theta.tolist(), pop.weights_alpha_theta.tolist(),
            [int(c) for c in pop.counts], [int(x) for x in pop.labels], pop.generation, seed,
            replicate, policy.prune_epsilon, policy.population_cap, p.custom)
    return Population(np.asarray(wt, dtype=float), np.asarray(wa, dtype=float),
                      np.asarray(cnt, dtype=np.int64), np.asarray(lab, dtype=np.uint64),
                      pop.generation + 1, pop.pruned_mass_bound + float(pruned),
                      bool(capped) or pop.capped)


def _run_chunk(p: PreparedLaw, policy: SimulationPolicy, seed: int, lo: int, hi: int,
               root_label: int) -> PathBatch:
    args = (p.handle, policy.max_generation, seed, lo, hi, policy.prune_epsilon,
            policy.population_cap, root_label)
    if p.backend == "compiled":
        out = _kernels.simulate_batch(*args)
    else:
        out = _fallback.simulate_batch(*args, custom=p.custom)
    return PathBatch(*out, start=lo)


def simulate_path(law, theta: float, alpha: float, policy: SimulationPolicy, seed: int,
                  replicate: int = 0, backend: Optional[str] = None) -> MartingalePath:
    p = _as_prepared(law, theta, alpha, policy, backend)
    return _run_chunk(p, policy, seed, replicate, replicate + 1, ROOT_LABEL).path(0)


CHUNK = 4096


def replicate_chunks(start: int, stop: int, chunk: int = CHUNK) -> list:
    """Fixed partition of a replicate range; independent of the thread count."""
    return [(lo, min(lo + chunk, stop)) for lo in range(start, stop, chunk)]


def map_chunks(fn, start: int, stop: int, threads: int = 1, chunk: int = CHUNK) -> list:
    """Apply ``fn(lo, hi)`` to each chunk; results come back in chunk order."""
    ranges = replicate_chunks(start, stop, chunk)
    if threads <= 1 or len(ranges) <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


def simulate_batch(law, theta: float, alpha: float, policy: SimulationPolicy, seed: int,
                   replicates: int, start: int = 0, threads: int = 1,
                   backend: Optional[str] = None) -> PathBatch:
    """Replicates ``start .. start + replicates - 1``; bit-identical for any ``threads``."""
    p = _as_prepared(law, theta, alpha, policy, backend)
    parts = map_chunks(lambda lo, hi: _run_chunk(p, policy, seed, lo, hi, ROOT_LABEL),
                       start, start + replicates, threads)
    return PathBatch.concatenate(parts)


def _w_matrix(paths) -> tuple:
    if isinstance(paths, PathBatch):
        return paths.W_theta, paths.W_alpha_theta
    Wt = np.stack([np.asarray(p.W_theta, dtype=float) for p in paths])
    Wa = np.stack([np.asarray(p.W_alpha_theta, dtype=float) for p in paths])
    return Wt, Wa


def fluctuation_samples(paths, n: int, lags: Sequence[int], kappa: float, alpha: float) -> tuple:
    """Scaled deviations and their paired mixing weights.

    Row ``i`` of the first array holds ``kappa**(-(n-r)/alpha) * (W_M - W_{n-r})`` for
    each lag ``r``; the second array holds ``W_n(alpha theta)``.
    """
    Wt, Wa = _w_matrix(paths)
    M = Wt.shape[1] - 1
    if not n < M:
        raise IndexError(f"horizon n={n} must be below M={M}")
    lags = list(lags)
    bad = [r for r in lags if r > n or r < 0]
    if bad:
        raise IndexError(f"lags {bad} exceed the horizon n={n}")
    X = np.empty((Wt.shape[0], len(lags)))
    for k, r in enumerate(lags):
        X[:, k] = kappa ** (-(n - r) / alpha) * (Wt[:, M] - Wt[:, n - r])
    return X, Wa[:, n].copy()


def weighted_increment_series(path, coefficients: Sequence[float]):
    """``sum_j a_j (W_{j+1} - W_j)`` for one path or row-wise for a batch."""
    a = np.asarray(coefficients, dtype=float)
    if isinstance(path, PathBatch):
        W = path.W_theta
    elif isinstance(path, MartingalePath):
        W = np.asarray(path.W_theta, dtype=float)[None, :]
    else:
        W = np.atleast_2d(np.asarray(path, dtype=float))
    if a.size > W.shape[1] - 1:
        raise ValueError(f"{a.size} coefficients but only {W.shape[1] - 1} increments")
    out = np.diff(W[:, : a.size + 1], axis=1) @ a
    return float(out[0]) if isinstance(path, MartingalePath) else out


def truncation_scale(kappa: float, alpha: float, n: int, M: int) -> float:
    """Relative distributional size of the neglected ``W - W_M`` at horizon ``n``."""
    return kappa ** ((M - n) / alpha)


def choose_max_generation(kappa: float, alpha: float, n: int, target: float = 1e-2) -> int:
    """Smallest ``M`` with ``truncation_scale <= target``."""
    return n + int(math.ceil(alpha * math.log(target) / math.log(kappa)))
