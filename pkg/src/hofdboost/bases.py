"""Univariate orthonormal function systems.

Each input variable gets its own :class:`BasisSystem`, orthonormal with
respect to that variable's marginal law:

* ``legendre`` -- uniform law on ``[a, b]``, normalized Legendre polynomials;
* ``fourier``  -- uniform law on ``[a, b]`` (mapped onto ``[-pi, pi]``),
  ``sqrt(2) sin(k t)`` / ``sqrt(2) cos(k t)`` pairs;
* ``hermite``  -- Gaussian law ``N(mu, sigma^2)``, normalized probabilists'
  Hermite polynomials.

Index 0 is always the constant function 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, IndexOutOfRange, OutOfSupport

__all__ = [
    "BasisKind",
    "BasisSystem",
    "eval_basis",
    "gram_quadrature",
]

GAUSS_LEGENDRE_POINTS = 256
GAUSS_HERMITE_POINTS = 128


class BasisKind(str, Enum):
    LEGENDRE = "legendre"
    FOURIER = "fourier"
    HERMITE = "hermite"


@dataclass(frozen=True)
class BasisSystem:
    """Truncated orthonormal system ``phi_0 = 1, phi_1, ..., phi_L``.

    Parameters
    ----------
    kind : BasisKind
        Family of functions.
    L : int
        Number of non-constant functions.
    a, b : float
        Support of the uniform marginal (Legendre, Fourier).
    mu, sigma : float
        Mean and standard deviation of the Gaussian marginal (Hermite).
    clamp : bool
        For bounded kinds, clip points outside ``[a, b]`` instead of raising
        :class:`OutOfSupport`.
    """

    kind: BasisKind
    L: int
    a: float = -1.0
    b: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    clamp: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError(f"L must be a positive integer, got {self.L!r}")
        if self.bounded and not self.a < self.b:
            raise ConfigError(f"empty support [{self.a}, {self.b}]")
        if self.kind is BasisKind.HERMITE and not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def legendre(cls, L: int, a: float = -1.0, b: float = 1.0, clamp=False):
        return cls(BasisKind.LEGENDRE, L, a=a, b=b, clamp=clamp)

    @classmethod
    def fourier(cls, L: int, a: float = -math.pi, b: float = math.pi, clamp=False):
        return cls(BasisKind.FOURIER, L, a=a, b=b, clamp=clamp)

    @classmethod
    def hermite(cls, L: int, mu: float = 0.0, sigma: float = 1.0):
        return cls(BasisKind.HERMITE, L, mu=mu, sigma=sigma)

    @property
    def bounded(self) -> bool:
        return self.kind is not BasisKind.HERMITE

    def _standardize(self, x: np.ndarray) -> np.ndarray:
        if self.kind is BasisKind.HERMITE:
            return (x - self.mu) / self.sigma
        outside = (x < self.a) | (x > self.b)
        if np.any(outside):
            if not self.clamp:
                bad = x[outside].flat[0]
                raise OutOfSupport(f"{bad!r} outside [{self.a}, {self.b}]")
            x = np.clip(x, self.a, self.b)
        t = (2.0 * x - (self.a + self.b)) / (self.b - self.a)
        if self.kind is BasisKind.FOURIER:
            return math.pi * t
        return t

    def values(self, x) -> np.ndarray:
        """Evaluate all ``L + 1`` functions; returns shape ``x.shape + (L+1,)``."""
        x = np.asarray(x, dtype=float)
        t = self._standardize(x)
        out = np.empty(t.shape + (self.L + 1,))
        out[..., 0] = 1.0
        if self.kind is BasisKind.FOURIER:
            for l in range(1, self.L + 1):
                k = (l + 1) // 2
                out[..., l] = math.sqrt(2.0) * (np.sin(k * t) if l % 2 else np.cos(k * t))
            return out

        # three-term recurrences on the raw polynomials, normalized afterwards
        out[..., 1] = t
        if self.kind is BasisKind.LEGENDRE:
            for l in range(1, self.L):
                out[..., l + 1] = ((2 * l + 1) * t * out[..., l] - l * out[..., l - 1]) / (l + 1)
            scale = np.sqrt(2.0 * np.arange(self.L + 1) + 1.0)
        else:
            for l in range(1, self.L):
                out[..., l + 1] = t * out[..., l] - l * out[..., l - 1]
            scale = 1.0 / np.sqrt([float(math.factorial(l)) for l in range(self.L + 1)])
        out *= scale
        return out

    def nonconstant(self, x) -> np.ndarray:
        """Columns ``phi_1 .. phi_L`` evaluated at the points ``x`` (shape ``(n, L)``)."""
        return self.values(x)[..., 1:]

    def __call__(self, l: int, x):
        return eval_basis(self, l, x)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "L": self.L}
        if self.bounded:
            d.update(a=self.a, b=self.b, clamp=self.clamp)
        else:
            d.update(mu=self.mu, sigma=self.sigma)
        return d


def eval_basis(system: BasisSystem, l: int, x):
    """Value of ``phi_l`` at ``x`` (scalar in, scalar out; arrays broadcast)."""
    if not 0 <= l <= system.L:
        raise IndexOutOfRange(f"basis index {l} not in [0, {system.L}]")
    v = system.values(x)[..., l]
    return float(v) if np.ndim(v) == 0 else v


def gram_quadrature(system: BasisSystem) -> np.ndarray:
    """Matrix of inner products ``<phi_k, phi_m>`` under the declared marginal."""
    if system.bounded:
        nodes, weights = np.polynomial.legendre.leggauss(GAUSS_LEGENDRE_POINTS)
        x = 0.5 * (system.b - system.a) * nodes + 0.5 * (system.a + system.b)
        weights = weights / 2.0  # uniform density on the mapped interval
    else:
        nodes, weights = np.polynomial.hermite_e.hermegauss(GAUSS_HERMITE_POINTS)
        x = system.mu + system.sigma * nodes
        weights = weights / math.sqrt(2.0 * math.pi)
    phi = system.values(x)
    return (phi * weights[:, None]).T @ phi
