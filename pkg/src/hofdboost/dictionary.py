"""Ordered dictionary of first- and second-order atoms and its design matrix."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from .bases import BasisSystem
from .errors import ConfigError, EmptyDictionary
from .hogs import HogsResult, SecondOrderAtom

__all__ = ["Atom", "Dictionary", "DesignMatrix", "build_dictionary", "expected_size"]


def expected_size(p: int, L: int) -> int:
    """``p L + C(p, 2) L^2``: dictionary size with no skipped pair."""
    return p * L + comb(p, 2) * L * L


@dataclass(frozen=True)
class Atom:
    subset: tuple[int, ...]
    index: tuple[int, ...]
    canonical_index: int
    payload: SecondOrderAtom | None = field(default=None, repr=False)

    @property
    def order(self) -> int:
        return len(self.subset)

    @property
    def name(self) -> str:
        u = ",".join(str(i + 1) for i in self.subset)
        l = ",".join(str(k) for k in self.index)
        return f"u=({u});l=({l})"


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray = field(repr=False)
    names: tuple[str, ...]
    norms: np.ndarray = field(repr=False)
    means: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            for row in self.values:
                w.writerow([format(v, ".17g") for v in row])


class Dictionary:
    """Atoms in canonical order: first order by ``(i, l)``, then pairs by ``(i, j, l_i, l_j)``."""

    def __init__(self, bases: Sequence[BasisSystem], hogs: HogsResult | None):
        self.bases = tuple(bases)
        self.p = len(self.bases)
        if self.p == 0:
            raise EmptyDictionary("no input variables")
        self.L = self.bases[0].L
        if any(b.L != self.L for b in self.bases):
            raise ConfigError("all variables must share the truncation level L")
        self.hogs = hogs
        self.skipped_pairs = tuple(hogs.skipped) if hogs is not None else ()

        atoms = []
        for i in range(self.p):
            for l in range(1, self.L + 1):
                atoms.append(Atom((i,), (l,), len(atoms)))
        self._pairs: list[tuple[int, int]] = []
        if hogs is not None:
            for pair in sorted(hogs.atoms):
                self._pairs.append(pair)
                for a in sorted(hogs.atoms[pair], key=lambda a: (a.li, a.lj)):
                    atoms.append(Atom(pair, (a.li, a.lj), len(atoms), a))
        elif self.p > 1:
            raise ConfigError("second-order atoms are required when p > 1")
        self.atoms: tuple[Atom, ...] = tuple(atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __getitem__(self, k: int) -> Atom:
        return self.atoms[k]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.atoms)

    @property
    def subsets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(a.subset for a in self.atoms)

    def evaluate(self, samples) -> DesignMatrix:
        """Atom values on ``samples`` as an ``n x m`` Fortran-ordered matrix."""
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != self.p:
            raise ConfigError(f"expected samples of shape (n, {self.p}), got {samples.shape}")
        n = samples.shape[0]
        phi = [b.nonconstant(samples[:, i]) for i, b in enumerate(self.bases)]
        out = np.empty((n, len(self.atoms)), order="F")
        out[:, : self.p * self.L] = np.hstack(phi)
        col = self.p * self.L
        L2 = self.L * self.L
        for pair in self._pairs:
            i, j = pair
            pair_atoms = [a.payload for a in self.atoms[col : col + L2]]
            lam_i = np.column_stack([a.lambda_i for a in pair_atoms])
            lam_j = np.column_stack([a.lambda_j for a in pair_atoms])
            c = np.array([a.c for a in pair_atoms])
            tensor = (phi[i][:, :, None] * phi[j][:, None, :]).reshape(n, L2)
            out[:, col : col + L2] = tensor + phi[i] @ lam_i + phi[j] @ lam_j + c
            col += L2
        return DesignMatrix(
            values=out,
            names=self.names,
            norms=np.sqrt(np.mean(out**2, axis=0)),
            means=out.mean(axis=0),
        )


def build_dictionary(hogs: HogsResult | None, bases: Sequence[BasisSystem]) -> Dictionary:
    if not bases or bases[0].L == 0:
        raise EmptyDictionary("p = 0 or L = 0")
    return Dictionary(bases, hogs)
