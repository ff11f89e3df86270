"""Generalized sensitivity indices from a fitted sparse decomposition.

For each fitted subset ``u``

    S_u = [ V(f_u) + sum_v Cov(f_u, f_v) ] / V(Y),

where ``v`` runs over the fitted subsets that neither contain nor are
contained in ``u``.  Variances and covariances are empirical with the
``n - 1`` divisor.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ZeroVariance

__all__ = [
    "IndexEntry",
    "SensitivityReport",
    "component_values",
    "indices",
    "gsobol_analytical",
    "replication_summary",
    "summary_to_csv",
    "subset_label",
]


def subset_label(u: Sequence[int]) -> str:
    """External label of a subset, variables numbered from 1: ``"1"``, ``"1-3"``."""
    return "-".join(str(i + 1) for i in u)


@dataclass(frozen=True)
class IndexEntry:
    u: tuple[int, ...]
    var: float
    cov_sum: float
    s: float


@dataclass(frozen=True)
class SensitivityReport:
    """Per-subset indices plus the terms needed to close the variance budget.

    ``residual_share`` equals ``(V(Y) - V(f) + 2 * nested_cov) / V(Y)``,
    where ``nested_cov`` sums the covariances of nested pairs ``u < v``
    (those are excluded from every index), so that the indices and the
    residual share add up to one.
    """

    entries: tuple[IndexEntry, ...]
    vy: float
    fitted_var: float
    nested_cov: float
    residual_share: float
    n: int

    def __getitem__(self, u) -> float:
        return self.as_dict()[tuple(u)]

    def get(self, u, default: float = 0.0) -> float:
        return self.as_dict().get(tuple(u), default)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {e.u: e.s for e in self.entries}

    @property
    def total(self) -> float:
        return float(sum(e.s for e in self.entries))

    def to_dict(self) -> dict:
        return {
            "indices": [
                {"u": [i + 1 for i in e.u], "var": e.var, "cov_sum": e.cov_sum, "s": e.s}
                for e in self.entries
            ],
            "vy": self.vy,
            "residual_share": self.residual_share,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def csv_rows(self) -> list[list]:
        return [[subset_label(e.u), repr(e.var), repr(e.cov_sum), repr(e.s)] for e in self.entries]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "var", "cov_sum", "s"])
            w.writerows(self.csv_rows())


def component_values(fit, dictionary, samples=None, design=None) -> dict[tuple[int, ...], np.ndarray]:
    """Evaluate each fitted component ``f_u`` (sum of its weighted atoms).

    Pass either raw ``samples`` or an already evaluated ``design`` matrix.
    Subsets without a non-zero coefficient are left out.
    """
    if design is None:
        design = dictionary.evaluate(samples)
    values = np.asarray(getattr(design, "values", design))
    comps: dict[tuple[int, ...], np.ndarray] = {}
    for k in sorted(fit.coef):
        beta = fit.coef[k]
        if beta == 0.0:
            continue
        u = dictionary[k].subset
        term = beta * values[:, k]
        comps[u] = comps[u] + term if u in comps else term
    return dict(sorted(comps.items(), key=lambda kv: (len(kv[0]), kv[0])))


def _nested(u, v) -> bool:
    su, sv = set(u), set(v)
    return su < sv or sv < su


def indices(components: Mapping[tuple[int, ...], np.ndarray], y) -> SensitivityReport:
    """Empirical indices on the sample the components were evaluated on."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    vy = float(np.var(y, ddof=1))
    if vy < 1e-14:
        raise ZeroVariance(f"output variance {vy:.3e} is numerically zero")
    subsets = sorted(components, key=lambda u: (len(u), u))
    if not subsets:
        return SensitivityReport((), vy, 0.0, 0.0, 1.0, n)

    F = np.column_stack([components[u] for u in subsets])
    F = F - F.mean(axis=0)
    C = F.T @ F / (n - 1)
    C = 0.5 * (C + C.T)

    entries = []
    nested_cov = 0.0
    for a, u in enumerate(subsets):
        cov_sum = 0.0
        for b, v in enumerate(subsets):
            if b == a:
                continue
            if _nested(u, v):
                if b > a:
                    nested_cov += C[a, b]
            else:
                cov_sum += C[a, b]
        var = float(C[a, a])
        entries.append(IndexEntry(u, var, float(cov_sum), (var + cov_sum) / vy))
    fitted_var = float(C.sum())
    residual = (vy - fitted_var + 2.0 * nested_cov) / vy
    return SensitivityReport(tuple(entries), vy, fitted_var, float(nested_cov), float(residual), n)


def gsobol_analytical(a: Sequence[float], u: Iterable[int]) -> float:
    """Exact Sobol index of subset ``u`` (0-based) for the g-Sobol function."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("g-Sobol coefficients must be non-negative")
    d = 1.0 / (3.0 * (1.0 + a) ** 2)
    total = float(np.prod(1.0 + d) - 1.0)
    return math.prod(float(d[i]) for i in u) / total


def replication_summary(reports: Sequence[SensitivityReport], subsets=None) -> list[tuple]:
    """Median and quartiles of each index across replicates.

    A subset missing from a replicate's fit counts as zero there.  Rows are
    ordered by subset size, then lexicographically.
    """
    if subsets is None:
        subsets = sorted({e.u for r in reports for e in r.entries}, key=lambda u: (len(u), u))
    rows = []
    for u in subsets:
        vals = np.array([r.get(u, 0.0) for r in reports])
        q25, med, q75 = np.percentile(vals, [25, 50, 75])
        rows.append((u, float(med), float(q25), float(q75)))
    return rows


def summary_to_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "median", "q25", "q75"])
        for u, med, q25, q75 in rows:
            w.writerow([subset_label(u), repr(med), repr(q25), repr(q75)])
