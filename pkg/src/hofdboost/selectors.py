"""Sparse coefficient estimation over a dictionary design matrix.

Three selectors share one output type, :class:`FitResult`:

* :func:`boost_fit` -- L2-boosting with shrinkage and Mallows-Cp stopping;
* :func:`foba_fit`  -- forward-backward greedy least squares;
* :func:`lasso_fit` -- coordinate-descent Lasso along a decreasing penalty
  grid, the grid point chosen by the same Cp-type criterion.

All selectors centre ``y`` on its empirical mean (stored as the intercept)
and work on columns rescaled to unit empirical norm; coefficients are
mapped back to the raw column scale before being returned.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg.blas import dsyrk

from .errors import ConfigError, NoConvergence, NonFiniteInput, SingularRefit

__all__ = [
    "CpMode",
    "StopRule",
    "BoostConfig",
    "TraceStep",
    "FitResult",
    "boost_fit",
    "cp_boost",
    "cp_scores",
    "foba_fit",
    "lasso_fit",
    "lasso_grid",
]


class CpMode(str, Enum):
    STANDARDIZED = "standardized"
    PAPER_LITERAL = "paper-literal"


class StopRule(str, Enum):
    CP = "cp"
    FIXED = "fixed"
    LOG = "log"


@dataclass(frozen=True)
class BoostConfig:
    gamma: float = 0.7
    k_max: int = 500
    stopping: StopRule = StopRule.CP
    cp_mode: CpMode = CpMode.STANDARDIZED
    log_c: float = 10.0  # k = ceil(log_c * log n2) under StopRule.LOG

    def __post_init__(self):
        object.__setattr__(self, "stopping", StopRule(self.stopping))
        object.__setattr__(self, "cp_mode", CpMode(self.cp_mode))
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ConfigError(f"k_max must be a positive integer, got {self.k_max}")
        if not self.log_c > 0:
            raise ConfigError("log_c must be positive")


@dataclass(frozen=True)
class TraceStep:
    step: int
    atom: int
    corr: float
    rss: float
    cp: float


@dataclass(frozen=True)
class FitResult:
    """Output of a selector.

    ``rss`` in the trace is the residual sum of squares (not divided by n2).
    For the Lasso, one trace row is written per grid point, with ``atom``
    holding the number of active columns and ``corr`` the penalty value;
    FoBa backward (removal) steps carry ``corr = nan``.
    ``cp_choices`` holds the step each Cp mode would pick, so both
    readings of the criterion are available from a single run.
    """

    selector: str
    coef: dict[int, float]
    intercept: float
    trace: tuple[TraceStep, ...] = field(repr=False)
    chosen_k: int
    wall_time: float
    n_atoms: int
    cp_choices: dict[str, int] = field(default_factory=dict)
    events: tuple[str, ...] = ()

    @property
    def n_nonzero(self) -> int:
        return sum(1 for v in self.coef.values() if v != 0.0)

    def coef_vector(self) -> np.ndarray:
        beta = np.zeros(self.n_atoms)
        for k, v in self.coef.items():
            beta[k] = v
        return beta

    def predict(self, design) -> np.ndarray:
        values = getattr(design, "values", design)
        return self.intercept + np.asarray(values) @ self.coef_vector()

    def trace_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "atom", "corr", "rss", "cp"])
            for t in self.trace:
                w.writerow([t.step, t.atom, repr(t.corr), repr(t.rss), repr(t.cp)])


def _prepare(design, y):
    X = np.asarray(getattr(design, "values", design), dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[1] == 0:
        raise ConfigError("design must be a non-empty 2-D matrix")
    if X.shape[0] != y.shape[0]:
        raise ConfigError(f"design has {X.shape[0]} rows but y has {y.shape[0]}")
    if X.shape[0] < 2:
        raise ConfigError("need at least two observations")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("design or response contains non-finite values")
    scale = np.sqrt(np.mean(X**2, axis=0))
    usable = scale > 0
    Z = np.zeros_like(X, order="F")
    Z[:, usable] = X[:, usable] / scale[usable]
    intercept = float(y.mean())
    return Z, y - intercept, scale, usable, intercept


def _unscale(beta: np.ndarray, scale: np.ndarray) -> dict[int, float]:
    return {int(k): float(beta[k] / scale[k]) for k in np.flatnonzero(beta)}


def cp_scores(rss, n2: int, mode=CpMode.STANDARDIZED, sigma2: float | None = None) -> np.ndarray:
    """Criterion value for each step ``k = 1..K`` of a path of residual sums of squares.

    ``standardized``:  RSS_k / sigma2 - n2 + 2k
    ``paper-literal``: RSS_k / n2 - n2 + 2k
    """
    rss = np.asarray(rss, dtype=float)
    k = np.arange(1, rss.size + 1)
    if CpMode(mode) is CpMode.PAPER_LITERAL:
        return rss / n2 - n2 + 2 * k
    if sigma2 is None:
        raise ValueError("standardized Cp needs a noise variance estimate")
    return rss / sigma2 - n2 + 2 * k


def _noise_variance(rss_last: float, df_last: int, n2: int, y_energy: float) -> float:
    # df of the largest model stands in for k_max, which may exceed n2
    sigma2 = rss_last / max(n2 - df_last, 1)
    return max(sigma2, 1e-12 * y_energy / n2, np.finfo(float).tiny)


def cp_boost(rss, n2: int, mode=CpMode.STANDARDIZED, sigma2: float | None = None) -> int:
    """Step minimizing the Cp criterion (1-based; ties go to the smallest step)."""
    if len(rss) == 0:
        raise ValueError("empty trace")
    return int(np.argmin(cp_scores(rss, n2, mode, sigma2))) + 1


def boost_fit(design, y, cfg: BoostConfig = BoostConfig()) -> FitResult:
    """L2-boosting on unit-norm columns.

    At each step the column with the largest absolute empirical inner
    product with the residual is selected (first maximum wins, with
    products within ``1e-10 * rms(y)`` of the maximum counted as tied, so
    rounding noise cannot break scale invariance) and its
    coefficient moves by ``gamma`` times that inner product.  The full
    ``k_max`` path is always computed; the returned coefficients are those
    of the chosen step.
    """
    t0 = time.perf_counter()
    Z, r, scale, _, intercept = _prepare(design, y)
    n, m = Z.shape
    y_energy = float(r @ r)
    tie = 1e-10 * math.sqrt(y_energy / n)

    corr = Z.T @ r / n
    # the path usually touches hundreds of distinct atoms, so one symmetric
    # rank-n update (upper triangle only) beats per-atom matrix-vector products
    gram = dsyrk(1.0, Z, trans=1)
    atoms = np.empty(cfg.k_max, dtype=np.int64)
    incs = np.empty(cfg.k_max)
    corrs = np.empty(cfg.k_max)
    rss = np.empty(cfg.k_max)
    df = np.empty(cfg.k_max, dtype=np.int64)
    seen: set[int] = set()
    for k in range(cfg.k_max):
        a = np.abs(corr)
        j = int(np.argmax(a >= a.max() - tie))
        c = corr[j]
        inc = cfg.gamma * c
        r -= inc * Z[:, j]
        corr[:j] -= (inc / n) * gram[:j, j]
        corr[j:] -= (inc / n) * gram[j, j:]
        seen.add(j)
        atoms[k], incs[k], corrs[k], rss[k], df[k] = j, inc, c, r @ r, len(seen)

    # each step lowers RSS by n * gamma * (2 - gamma) * corr^2, up to rounding
    if np.any(np.diff(rss, prepend=y_energy) > 1e-10 * max(y_energy, 1.0)):
        raise RuntimeError("boosting residual sum of squares increased")

    sigma2 = _noise_variance(rss[-1], int(df[-1]), n, y_energy)
    choices = {
        CpMode.STANDARDIZED.value: cp_boost(rss, n, CpMode.STANDARDIZED, sigma2),
        CpMode.PAPER_LITERAL.value: cp_boost(rss, n, CpMode.PAPER_LITERAL),
    }
    cp = cp_scores(rss, n, cfg.cp_mode, sigma2)
    if cfg.stopping is StopRule.CP:
        chosen = choices[cfg.cp_mode.value]
    elif cfg.stopping is StopRule.LOG:
        chosen = min(cfg.k_max, max(1, math.ceil(cfg.log_c * math.log(n))))
    else:
        chosen = cfg.k_max

    beta = np.zeros(m)
    np.add.at(beta, atoms[:chosen], incs[:chosen])
    trace = tuple(
        TraceStep(k + 1, int(atoms[k]), float(corrs[k]), float(rss[k]), float(cp[k]))
        for k in range(cfg.k_max)
    )
    return FitResult(
        selector="boost",
        coef=_unscale(beta, scale),
        intercept=intercept,
        trace=trace,
        chosen_k=chosen,
        wall_time=time.perf_counter() - t0,
        n_atoms=m,
        cp_choices=choices,
    )


def _lstsq_rss(Z, r, active):
    if not active:
        return np.zeros(0), float(r @ r)
    A = Z[:, active]
    coef, *_ = np.linalg.lstsq(A, r, rcond=None)
    res = r - A @ coef
    return coef, float(res @ res)


def foba_fit(design, y, eps: float = 1e-2, delta: float = 0.5, max_steps: int | None = None) -> FitResult:
    """Forward-backward greedy least squares.

    ``eps`` and the RSS improvements are on the mean-squared scale
    (RSS / n2).  Forward: add the column whose inclusion gives the lowest
    refitted RSS; stop once the improvement drops below ``eps``.  Backward,
    after every forward step: remove the active column whose removal costs
    least, as long as that cost is below ``delta`` times the last forward
    improvement.
    """
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if not 0 < delta <= 1:
        raise ConfigError("delta must lie in (0, 1]")
    t0 = time.perf_counter()
    Z, r0, scale, usable, intercept = _prepare(design, y)
    n, m = Z.shape
    energy = float(r0 @ r0) / n
    if max_steps is None:
        max_steps = int(2 * energy / eps) + 2 * min(n, m) + 10

    active: list[int] = []
    excluded: set[int] = set()
    trace: list[TraceStep] = []
    events: list[str] = []
    coef = np.zeros(0)
    mse = energy
    steps = 0
    tol = 1e-10 * n

    while True:
        # candidate gains from the residual of the current active fit
        resid = r0 - (Z[:, active] @ coef if active else 0.0)
        if active:
            Q, _ = np.linalg.qr(Z[:, active])
            P = Z - Q @ (Q.T @ Z)
        else:
            P = Z
        pn2 = np.einsum("ij,ij->j", P, P)
        ok = usable & (pn2 > tol)
        ok[active] = False
        ok[list(excluded)] = False
        if not np.any(ok):
            break
        gains = np.zeros(m)
        gains[ok] = (P[:, ok].T @ resid) ** 2 / pn2[ok] / n
        j = int(np.argmax(gains))
        gain = gains[j]
        if gain < eps:
            break
        active.append(j)
        try:
            coef, rss = _lstsq_rss(Z, r0, active)
        except np.linalg.LinAlgError as exc:
            active.pop()
            excluded.add(j)
            events.append(f"{SingularRefit.__name__}: dropped atom {j} ({exc})")
            coef, _ = _lstsq_rss(Z, r0, active)
            continue
        steps += 1
        last_gain = mse - rss / n
        mse = rss / n
        trace.append(TraceStep(steps, j, float(np.sqrt(gain)), rss, math.nan))

        while len(active) > 1:
            costs = []
            for pos in range(len(active)):
                rest = active[:pos] + active[pos + 1 :]
                costs.append(_lstsq_rss(Z, r0, rest)[1] / n - mse)
            pos = int(np.argmin(costs))
            if costs[pos] >= delta * last_gain:
                break
            removed = active.pop(pos)
            coef, rss = _lstsq_rss(Z, r0, active)
            mse = rss / n
            steps += 1
            trace.append(TraceStep(steps, removed, math.nan, rss, math.nan))
        if steps > max_steps:
            raise NoConvergence(f"FoBa exceeded {max_steps} steps")

    beta = np.zeros(m)
    if active:
        beta[active] = coef
    return FitResult(
        selector="foba",
        coef=_unscale(beta, scale),
        intercept=intercept,
        trace=tuple(trace),
        chosen_k=steps,
        wall_time=time.perf_counter() - t0,
        n_atoms=m,
        events=tuple(events),
    )


def lasso_grid(design, y, n_lambdas: int = 100, ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced decreasing grid from the smallest all-zero penalty down by ``ratio``."""
    Z, r, *_ = _prepare(design, y)
    lam_max = float(np.max(np.abs(Z.T @ r)) / Z.shape[0])
    if lam_max == 0:
        lam_max = 1.0
    return lam_max * np.logspace(0, np.log10(ratio), n_lambdas)


def _soft(v: float, lam: float) -> float:
    if v > lam:
        return v - lam
    if v < -lam:
        return v + lam
    return 0.0


def _cd_sweep(Z, r, beta, lam, cols, n):
    max_change = 0.0
    for j in cols:
        zj = Z[:, j]
        old = beta[j]
        new = _soft(old + float(zj @ r) / n, lam)
        if new != old:
            r -= (new - old) * zj
            beta[j] = new
            max_change = max(max_change, abs(new - old))
    return max_change


def lasso_fit(
    design,
    y,
    lambdas=None,
    cp_mode=CpMode.STANDARDIZED,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
) -> FitResult:
    """Coordinate-descent Lasso with warm starts along a decreasing grid.

    Minimizes ``(1/2n) ||y - Z b||^2 + lam ||b||_1`` on unit-norm columns.
    Each grid point iterates over the active set until the largest
    coefficient change is below ``tol``, then confirms with a full sweep.
    The reported model is the grid index minimizing the Cp-type criterion.
    """
    t0 = time.perf_counter()
    if lambdas is None:
        lambdas = lasso_grid(design, y)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0 or np.any(lambdas <= 0):
        raise ConfigError("lambda grid must be a non-empty vector of positive values")
    if np.any(np.diff(lambdas) >= 0):
        raise ConfigError("lambda grid must be strictly decreasing")
    Z, r0, scale, usable, intercept = _prepare(design, y)
    n, m = Z.shape
    all_cols = np.flatnonzero(usable)

    beta = np.zeros(m)
    r = r0.copy()
    path, rss, df = [], [], []
    for lam in lambdas:
        sweeps = 0
        while True:
            change = _cd_sweep(Z, r, beta, lam, all_cols, n)
            sweeps += 1
            if change < tol:
                break
            active = np.flatnonzero(beta)
            while True:
                change = _cd_sweep(Z, r, beta, lam, active, n)
                sweeps += 1
                if change < tol:
                    break
                if sweeps > max_sweeps:
                    raise NoConvergence(f"lambda={lam:.3e}: more than {max_sweeps} sweeps")
            if sweeps > max_sweeps:
                raise NoConvergence(f"lambda={lam:.3e}: more than {max_sweeps} sweeps")
        path.append(beta.copy())
        rss.append(float(r @ r))
        df.append(int(np.count_nonzero(beta)))

    sigma2 = _noise_variance(rss[-1], df[-1], n, float(r0 @ r0))
    choices = {
        CpMode.STANDARDIZED.value: cp_boost(rss, n, CpMode.STANDARDIZED, sigma2),
        CpMode.PAPER_LITERAL.value: cp_boost(rss, n, CpMode.PAPER_LITERAL),
    }
    cp = cp_scores(rss, n, cp_mode, sigma2)
    chosen = choices[CpMode(cp_mode).value]
    trace = tuple(
        TraceStep(k + 1, df[k], float(lambdas[k]), rss[k], float(cp[k])) for k in range(len(rss))
    )
    return FitResult(
        selector="lasso",
        coef=_unscale(path[chosen - 1], scale),
        intercept=intercept,
        trace=trace,
        chosen_k=chosen,
        wall_time=time.perf_counter() - t0,
        n_atoms=m,
        cp_choices=choices,
    )
