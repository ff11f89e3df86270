"""Benchmark models, input samplers and brute-force sensitivity oracles."""

from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import BadCorrelation, ConfigError, DependentInputsUnsupported

__all__ = [
    "Ishigami",
    "GSobol",
    "FunctionModel",
    "CustomDataset",
    "ModelSpec",
    "equicorrelation",
    "sample",
    "ishigami_analytical_indices",
    "mc_sensitivity_oracle",
    "load_csv",
]

log = logging.getLogger(__name__)

GSOBOL_PAPER_A = (0.0, 1.0, 4.5, 9.0, 99.0, 99.0, 99.0, 99.0, 99.0, 99.0)


@dataclass(frozen=True)
class Ishigami:
    a: float = 7.0
    b: float = 0.1

    p = 3
    name = "ishigami"

    @property
    def ranges(self):
        return ((-math.pi, math.pi),) * 3

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        s1 = np.sin(X[..., 0])
        return s1 + self.a * np.sin(X[..., 1]) ** 2 + self.b * X[..., 2] ** 4 * s1

    def to_dict(self):
        return {"name": self.name, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class GSobol:
    a: tuple[float, ...] = GSOBOL_PAPER_A

    name = "gsobol"

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if any(v < 0 for v in self.a):
            raise ConfigError("g-Sobol coefficients must be non-negative")

    @property
    def p(self):
        return len(self.a)

    @property
    def ranges(self):
        return ((0.0, 1.0),) * self.p

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        a = np.asarray(self.a)
        return np.prod((np.abs(4.0 * X - 2.0) + a) / (1.0 + a), axis=-1)

    def to_dict(self):
        return {"name": self.name, "a": list(self.a)}


@dataclass(frozen=True)
class FunctionModel:
    """Any vectorized function of uniform inputs on the given ranges."""

    func: Callable[[np.ndarray], np.ndarray]
    ranges: tuple[tuple[float, float], ...]
    name: str = "function"

    @property
    def p(self):
        return len(self.ranges)

    def __call__(self, X):
        return np.asarray(self.func(np.asarray(X, dtype=float)), dtype=float)

    def to_dict(self):
        return {"name": self.name, "ranges": [list(r) for r in self.ranges]}


@dataclass(frozen=True, eq=False)
class CustomDataset:
    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    source: str = ""

    name = "csv"

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def ranges(self):
        return tuple((float(lo), float(hi)) for lo, hi in zip(self.X.min(axis=0), self.X.max(axis=0)))

    def to_dict(self):
        return {"name": self.name, "source": self.source, "rows": int(self.X.shape[0])}


def load_csv(path) -> CustomDataset:
    """Read a dataset with header ``x1,...,xp,y``; rows with non-finite values are dropped."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [r for r in reader if r]
    p = len(header) - 1
    if p < 1 or header[-1] != "y" or header[:-1] != [f"x{i}" for i in range(1, p + 1)]:
        raise ConfigError(f"{path}: header must be x1,...,xp,y, got {header}")
    try:
        data = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != p + 1:
        raise ConfigError(f"{path}: ragged rows")
    keep = np.all(np.isfinite(data), axis=1)
    if not np.all(keep):
        log.warning("%s: dropped %d rows with non-finite entries", path, int((~keep).sum()))
    data = data[keep]
    return CustomDataset(X=data[:, :p], y=data[:, p], source=str(path))


def equicorrelation(p: int, rho: float) -> np.ndarray:
    R = np.full((p, p), float(rho))
    np.fill_diagonal(R, 1.0)
    return R


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A model together with its input law and observation noise.

    ``correlation`` switches the inputs from independent uniforms to a
    Gaussian copula with uniform marginals on ``ranges``.
    """

    model: Ishigami | GSobol | FunctionModel | CustomDataset
    ranges: tuple[tuple[float, float], ...] | None = None
    correlation: np.ndarray | None = field(default=None, repr=False)
    noise: float = 0.0

    def __post_init__(self):
        if self.ranges is None:
            object.__setattr__(self, "ranges", tuple(self.model.ranges))
        if len(self.ranges) != self.p:
            raise ConfigError(f"{len(self.ranges)} ranges for {self.p} inputs")
        if any(not lo < hi for lo, hi in self.ranges):
            raise ConfigError(f"degenerate input range in {self.ranges}")
        if self.noise < 0:
            raise ConfigError("noise standard deviation must be non-negative")
        if self.correlation is not None:
            if isinstance(self.model, CustomDataset):
                raise ConfigError("a dataset's input law cannot be overridden")
            R = np.asarray(self.correlation, dtype=float)
            if R.shape != (self.p, self.p) or not np.allclose(R, R.T) or not np.allclose(np.diag(R), 1):
                raise BadCorrelation("correlation must be a symmetric unit-diagonal p x p matrix")
            try:
                chol = np.linalg.cholesky(R)
            except np.linalg.LinAlgError as exc:
                raise BadCorrelation(f"correlation matrix is not positive definite: {exc}") from exc
            object.__setattr__(self, "correlation", R)
            object.__setattr__(self, "_chol", chol)

    @property
    def p(self) -> int:
        return self.model.p

    @property
    def independent(self) -> bool:
        return self.correlation is None

    def sample_inputs(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lo = np.array([r[0] for r in self.ranges])
        hi = np.array([r[1] for r in self.ranges])
        if self.correlation is None:
            return rng.uniform(lo, hi, size=(n, self.p))
        g = rng.standard_normal((n, self.p)) @ self._chol.T
        return lo + (hi - lo) * ndtr(g)

    def evaluate(self, X) -> np.ndarray:
        """Noiseless model response."""
        if isinstance(self.model, CustomDataset):
            raise ConfigError("a dataset cannot be evaluated at new points")
        return self.model(X)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "ranges": [list(r) for r in self.ranges],
            "correlation": None if self.correlation is None else self.correlation.tolist(),
            "noise": self.noise,
        }


def sample(spec: ModelSpec, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` input/output pairs; bit-reproducible for a given seed."""
    if n < 1:
        raise ConfigError("n must be positive")
    rng = np.random.default_rng(seed)
    if isinstance(spec.model, CustomDataset):
        data = spec.model
        if n > data.X.shape[0]:
            raise ConfigError(f"requested {n} rows from a dataset of {data.X.shape[0]}")
        rows = rng.permutation(data.X.shape[0])[:n]
        return data.X[rows].copy(), data.y[rows].copy()
    X = spec.sample_inputs(n, rng)
    y = spec.model(X)
    if spec.noise > 0:
        y = y + spec.noise * rng.standard_normal(n)
    return X, y


def ishigami_analytical_indices(a: float = 7.0, b: float = 0.1) -> dict[tuple[int, ...], float]:
    """Closed-form Sobol indices of the Ishigami function (variables numbered from 0)."""
    v1 = (1.0 + b * math.pi**4 / 5.0) ** 2 / 2.0
    v2 = a**2 / 8.0
    v13 = 8.0 * b**2 * math.pi**8 / 225.0
    v = v1 + v2 + v13
    return {(0,): v1 / v, (1,): v2 / v, (2,): 0.0, (0, 2): v13 / v}


def _closed_index_pick_freeze(spec, u, n_mc, rng, chunk):
    """Janon-style pick-freeze estimate of Var(E[Y|X_u]) / Var(Y)."""
    s_yy2 = s_sum = s_sq = 0.0
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        X = spec.sample_inputs(m, rng)
        Xp = spec.sample_inputs(m, rng)
        Xp[:, list(u)] = X[:, list(u)]
        y, yp = spec.model(X), spec.model(Xp)
        s_yy2 += float(y @ yp)
        s_sum += float(np.sum(y + yp)) / 2.0
        s_sq += float(y @ y + yp @ yp) / 2.0
        done += m
    mean = s_sum / n_mc
    return (s_yy2 / n_mc - mean**2) / (s_sq / n_mc - mean**2)


def _closed_index_double_loop(spec, u, n_mc, rng):
    n_outer = max(2, math.isqrt(n_mc))
    n_inner = max(2, n_mc // n_outer)
    cond_mean = np.empty(n_outer)
    cond_var = np.empty(n_outer)
    cols = list(u)
    for k in range(n_outer):
        X = spec.sample_inputs(n_inner, rng)
        X[:, cols] = spec.sample_inputs(1, rng)[0, cols]
        y = spec.model(X)
        cond_mean[k] = y.mean()
        cond_var[k] = y.var(ddof=1)
    total = cond_mean.var(ddof=1) + cond_var.mean()
    # remove the inner-sampling noise from the variance of conditional means
    return (cond_mean.var(ddof=1) - cond_var.mean() / n_inner) / total


def mc_sensitivity_oracle(
    spec: ModelSpec,
    u: Sequence[int],
    n_mc: int = 1_000_000,
    seed=0,
    method: str = "pick-freeze",
    chunk: int = 250_000,
) -> float:
    """Brute-force classical Sobol index of the subset ``u`` (independent inputs only).

    Closed indices ``Var(E[Y|X_w]) / Var(Y)`` are estimated for every
    ``w`` included in ``u`` and combined by inclusion-exclusion, so for a
    pair the result is the interaction index alone.
    """
    if not spec.independent:
        raise DependentInputsUnsupported("classical Sobol indices need independent inputs")
    if isinstance(spec.model, CustomDataset):
        raise ConfigError("the oracle needs an evaluable model")
    u = tuple(sorted(u))
    if not u:
        raise ConfigError("u must be non-empty")
    rng = np.random.default_rng(seed)
    total = 0.0
    for size in range(1, len(u) + 1):
        for w in itertools.combinations(u, size):
            if method == "pick-freeze":
                closed = _closed_index_pick_freeze(spec, w, n_mc, rng, chunk)
            elif method == "double-loop":
                closed = _closed_index_double_loop(spec, w, n_mc, rng)
            else:
                raise ConfigError(f"unknown oracle method {method!r}")
            total += (-1) ** (len(u) - size) * closed
    return total
