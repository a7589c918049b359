"""Limit objects: spectrally positive stable innovations, the stationary AR(1)
tail process, and the characteristic functions of their random-scale mixtures.

Throughout, ``K(alpha) = Gamma(2 - alpha) / (alpha - 1)`` and the basic
exponent is

    psi(t) = K c |t|**alpha (cos(pi alpha / 2) - i sin(pi alpha / 2) sign t),

so ``E exp(i t Q) = exp(psi(t))``.  Every mixture below has exponent
``w * G(t)`` for a deterministic ``G`` because the scale enters as
``w**(1/alpha)`` inside a function homogeneous of degree ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma

__all__ = [
    "StableSpec",
    "ARSpec",
    "cf_Q",
    "cf_U0",
    "cf_U0_product",
    "sample_Q",
    "sample_U_path",
    "series_length",
    "gammas",
    "mixture_cf",
    "fdd_limit_cf",
    "two_sided_limit_cf",
    "series_constants",
    "EmptyWeightsError",
]


class EmptyWeightsError(ValueError):
    pass


def _k(alpha: float) -> float:
    return float(_gamma(2.0 - alpha) / (alpha - 1.0))


@dataclass(frozen=True)
class StableSpec:
    """Spectrally positive stable law with tail pair ``(alpha, c)``."""

    alpha: float
    c: float

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha}")
        if not self.c > 0:
            raise ValueError(f"c must be > 0, got {self.c}")

    @property
    def sigma_alpha(self) -> float:
        """``sigma**alpha`` in the classical one-parameterization."""
        return self.c * _k(self.alpha) * abs(math.cos(math.pi * self.alpha / 2))

    @property
    def sigma(self) -> float:
        return self.sigma_alpha ** (1.0 / self.alpha)

    beta = 1.0
    mu = 0.0

    def exponent(self, t) -> np.ndarray:
        return _unit_exponent(self.alpha, t) * self.c

    def classical_cf(self, t) -> np.ndarray:
        """``exp(-sigma^alpha |t|^alpha (1 - i beta tan(pi alpha/2) sign t))``."""
        t = np.asarray(t, dtype=float)
        a = self.alpha
        tan = math.tan(math.pi * a / 2)
        return np.exp(-self.sigma_alpha * np.abs(t) ** a * (1 - 1j * self.beta * tan * np.sign(t)))


@dataclass(frozen=True)
class ARSpec:
    phi: float
    base: StableSpec

    def __post_init__(self):
        if not 0.0 < self.phi < 1.0:
            raise ValueError(f"phi must lie in (0, 1), got {self.phi}")

    @classmethod
    def from_kappa(cls, kappa: float, base: StableSpec) -> "ARSpec":
        return cls(kappa ** (1.0 / base.alpha), base)

    @property
    def kappa(self) -> float:
        return self.phi**self.base.alpha


def _unit_exponent(alpha: float, t) -> np.ndarray:
    """``psi(t)`` at ``c = 1``; Hermitian by construction."""
    t = np.asarray(t, dtype=float)
    ang = math.pi * alpha / 2
    mag = _k(alpha) * np.abs(t) ** alpha
    return mag * math.cos(ang) - 1j * (mag * math.sin(ang)) * np.sign(t)


def _maybe_scalar(z):
    return complex(z) if np.ndim(z) == 0 else z


def cf_Q(spec: StableSpec, t):
    return _maybe_scalar(np.exp(spec.exponent(t)))


def cf_U0(ar: ARSpec, t):
    return _maybe_scalar(np.exp(ar.base.exponent(t) / (1.0 - ar.kappa)))


def cf_U0_product(ar: ARSpec, t, J: int):
    """``prod_{j<=J} cf_Q(phi**j t)``, the truncated series for U_0."""
    t = np.asarray(t, dtype=float)
    out = np.ones(t.shape, dtype=complex)
    for j in range(J + 1):
        out = out * np.exp(ar.base.exponent(ar.phi**j * t))
    return _maybe_scalar(out)


# ---------------------------------------------------------------------------
# samplers


def sample_Q(spec: StableSpec, rng: np.random.Generator, size=None):
    """Chambers-Mallows-Stuck draw of ``S_alpha(sigma, 1, 0)``."""
    a = spec.alpha
    zeta = -spec.beta * math.tan(math.pi * a / 2)
    xi = math.atan(-zeta) / a
    scale = (1 + zeta * zeta) ** (1 / (2 * a))
    v = rng.uniform(-math.pi / 2, math.pi / 2, size)
    w = rng.standard_exponential(size)
    x = (scale * np.sin(a * (v + xi)) / np.cos(v) ** (1 / a)
         * (np.cos(v - a * (v + xi)) / w) ** ((1 - a) / a))
    out = spec.sigma * x
    return float(out) if size is None else out


def series_length(ar: ARSpec, t_max: float = 5.0, tol: float = 1e-8) -> int:
    """Smallest J with CF-exponent truncation error below ``tol`` for ``|t| <= t_max``."""
    s = ar.base.sigma_alpha * t_max**ar.base.alpha / (1.0 - ar.kappa)
    if s <= tol:
        return 0
    # s * kappa**(J+1) <= tol
    return max(0, int(math.ceil(math.log(tol / s) / math.log(ar.kappa))) - 1)


def sample_U_path(ar: ARSpec, length: int, rng: np.random.Generator, size: int = 1,
                  method: str = "series", t_max: float = 5.0) -> np.ndarray:
    """Stationary AR(1) path ``(U_0, ..., U_{length-1})``, shape ``(size, length)``."""
    if length < 1:
        raise ValueError("path length must be >= 1")
    if method == "series":
        J = series_length(ar, t_max)
        u0 = np.zeros(size)
        for j in range(J + 1):
            u0 += ar.phi**j * sample_Q(ar.base, rng, size)
    elif method == "direct":
        u0 = (1.0 - ar.kappa) ** (-1.0 / ar.base.alpha) * sample_Q(ar.base, rng, size)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = np.empty((size, length))
    out[:, 0] = u0
    for k in range(1, length):
        out[:, k] = ar.phi * out[:, k - 1] + sample_Q(ar.base, rng, size)
    return out


# ---------------------------------------------------------------------------
# mixtures


def _weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.size == 0:
        raise EmptyWeightsError("need at least one mixing weight")
    if np.any(w < 0):
        raise ValueError("mixing weights must be nonnegative")
    return w


def _mix(w: np.ndarray, g, chunk: int = 1 << 16):
    """``mean_w exp(w g(t))`` for every t, evaluated in bounded memory."""
    g = np.asarray(g, dtype=complex)
    flat = g.ravel()
    acc = np.zeros(flat.shape, dtype=complex)
    for i in range(0, w.size, chunk):
        acc += np.exp(np.multiply.outer(w[i:i + chunk], flat)).sum(axis=0)
    return _maybe_scalar((acc / w.size).reshape(g.shape))


def mixture_cf(spec: StableSpec, kappa: float, mix_weights, t):
    """CF of ``W(alpha theta)**(1/alpha) U_0`` averaged over the given weights."""
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    return _mix(_weights(mix_weights), spec.exponent(t) / (1.0 - kappa))


def gammas(betas, kappa: float, alpha: float) -> np.ndarray:
    """Cramer-Wold coefficients ``gamma_i = sum_{j>=i} beta_j kappa**((j-i)/alpha)``."""
    b = np.asarray(betas, dtype=float)
    if b.size == 0:
        raise ValueError("betas must be nonempty")
    phi = kappa ** (1.0 / alpha)
    out = np.empty_like(b)
    acc = 0.0
    for i in range(b.size - 1, -1, -1):
        acc = b[i] + phi * acc
        out[i] = acc
    return out


def _fdd_exponent(spec: StableSpec, kappa: float, betas, t) -> np.ndarray:
    g = gammas(betas, kappa, spec.alpha)
    t = np.asarray(t, dtype=float)
    total = spec.exponent(g[0] * t) / (1.0 - kappa)
    for gi in g[1:]:
        total = total + spec.exponent(gi * t)
    return total


def fdd_limit_cf(spec: StableSpec, kappa: float, betas, mix_weights, t):
    """``E[Phi(gamma_0 w^(1/alpha) t) prod_i Psi(gamma_i w^(1/alpha) t)]`` over the weights."""
    return _mix(_weights(mix_weights), _fdd_exponent(spec, kappa, betas, t))


def two_sided_limit_cf(alpha: float, c1: float, c2: float, mix_weights, t):
    if c1 < 0 or c2 < 0:
        raise ValueError("c1 and c2 must be nonnegative")
    t = np.asarray(t, dtype=float)
    ang = math.pi * alpha / 2
    mag = _k(alpha) * np.abs(t) ** alpha
    g = mag * ((c1 + c2) * math.cos(ang) - 1j * (c1 - c2) * math.sin(ang) * np.sign(t))
    return _mix(_weights(mix_weights), g)


def series_constants(c: float, kappa: float, alpha: float, betas) -> tuple:
    """Two-sided constants ``(c1, c2)`` of the Cramer-Wold projection.

    The lags before the first coefficient contribute a geometric tail
    ``gamma_{-i} = kappa**(i/alpha) gamma_0``, summing to ``1/(1-kappa)``.
    """
    g = gammas(betas, kappa, alpha)
    pos = np.maximum(g, 0.0) ** alpha
    neg = np.maximum(-g, 0.0) ** alpha
    c1 = c * (pos[0] / (1.0 - kappa) + pos[1:].sum())
    c2 = c * (neg[0] / (1.0 - kappa) + neg[1:].sum())
    return float(c1), float(c2)
