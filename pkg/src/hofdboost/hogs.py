"""Empirical hierarchically orthogonal Gram-Schmidt construction.

For every pair of inputs ``(i, j)`` and multi-index ``(l_i, l_j)`` the
second-order atom is the tensor product ``phi_{l_i}^i * phi_{l_j}^j``
corrected by first-order terms and a constant,

    phi^{ij}(x_i, x_j) = phi_{l_i}^i(x_i) phi_{l_j}^j(x_j)
                         + sum_k lambda^i_k phi_k^i(x_i)
                         + sum_k lambda^j_k phi_k^j(x_j) + C,

with the coefficients chosen so that the atom is empirically orthogonal
(on the construction sample) to the constant and to every ``phi_k^i`` and
``phi_k^j``.

The lambdas and C are solved jointly from the bordered system

    [ A    m ] [lambda]   [ D          ]
    [ m^T  1 ] [  C   ] = [ -mean(prod) ]

where ``A`` is the empirical Gram matrix and ``m`` the empirical means of
the first-order functions.  When ``m = 0`` this is exactly "solve
A lambda = D, then C = -mean(atom without C)"; otherwise the joint solve is
what keeps all ``2L + 1`` empirical constraints exact.  The system does not
depend on ``(l_i, l_j)``, so it is LU-factored once per pair and reused for
all ``L**2`` right-hand sides.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .bases import BasisSystem
from .errors import ConfigError, DegenerateGram, InsufficientSample, SolveFailure

__all__ = [
    "DEFAULT_DEGENERACY_THRESHOLD",
    "GramSystem",
    "SecondOrderAtom",
    "HogsResult",
    "empirical_gram",
    "solve_second_order_atom",
    "solve_pair",
    "constraint_residuals",
    "degeneracy",
    "build_hogs",
    "atoms_to_json",
    "atoms_from_json",
]

log = logging.getLogger(__name__)

DEFAULT_DEGENERACY_THRESHOLD = 1e-12


@dataclass(frozen=True)
class GramSystem:
    """Empirical Gram matrix of ``(phi_1^i..phi_L^i, phi_1^j..phi_L^j)``."""

    i: int
    j: int
    matrix: np.ndarray = field(repr=False)
    det_value: float
    n1: int
    means: np.ndarray | None = field(default=None, repr=False)

    @property
    def L(self) -> int:
        return self.matrix.shape[0] // 2


@dataclass(frozen=True)
class SecondOrderAtom:
    i: int
    j: int
    li: int
    lj: int
    lambda_i: np.ndarray = field(repr=False)
    lambda_j: np.ndarray = field(repr=False)
    c: float

    def evaluate(self, phi_i: np.ndarray, phi_j: np.ndarray) -> np.ndarray:
        """Atom values given the non-constant basis columns of ``x_i`` and ``x_j``."""
        return (
            phi_i[:, self.li - 1] * phi_j[:, self.lj - 1]
            + phi_i @ self.lambda_i
            + phi_j @ self.lambda_j
            + self.c
        )

    def to_dict(self) -> dict:
        # variables are numbered from 1 in every external format
        return {
            "i": self.i + 1,
            "j": self.j + 1,
            "l_i": self.li,
            "l_j": self.lj,
            "lambda_i": [float(v) for v in self.lambda_i],
            "lambda_j": [float(v) for v in self.lambda_j],
            "c": float(self.c),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SecondOrderAtom":
        return cls(
            i=int(d["i"]) - 1,
            j=int(d["j"]) - 1,
            li=int(d["l_i"]),
            lj=int(d["l_j"]),
            lambda_i=np.asarray(d["lambda_i"], dtype=float),
            lambda_j=np.asarray(d["lambda_j"], dtype=float),
            c=float(d["c"]),
        )


@dataclass
class HogsResult:
    """All second-order atoms built on one construction sample."""

    atoms: dict[tuple[int, int], list[SecondOrderAtom]]
    grams: dict[tuple[int, int], GramSystem]
    skipped: list[tuple[int, int]]
    n1: int
    threshold: float

    @property
    def degeneracy(self) -> float | None:
        return degeneracy(self.grams.values()) if self.grams else None

    def all_atoms(self) -> list[SecondOrderAtom]:
        return [a for pair in sorted(self.atoms) for a in self.atoms[pair]]


def _basis_columns(samples: np.ndarray, bases: Sequence[BasisSystem], var: int) -> np.ndarray:
    return bases[var].nonconstant(samples[:, var])


def empirical_gram(samples, bases: Sequence[BasisSystem], i: int, j: int) -> GramSystem:
    """Assemble the ``2L x 2L`` empirical Gram matrix for the pair ``(i, j)``."""
    samples = np.asarray(samples, dtype=float)
    if i == j:
        raise ConfigError("a pair needs two distinct variables")
    L = bases[i].L
    if bases[j].L != L:
        raise ConfigError("both variables of a pair must share the truncation level L")
    n1 = samples.shape[0]
    if n1 < 2 * L + 1:
        raise InsufficientSample(f"n1={n1} < 2L+1={2 * L + 1}")
    phi = np.hstack([_basis_columns(samples, bases, i), _basis_columns(samples, bases, j)])
    A = phi.T @ phi / n1
    A = 0.5 * (A + A.T)
    return GramSystem(
        i=i, j=j, matrix=A, det_value=float(np.linalg.det(A)), n1=n1, means=phi.mean(axis=0)
    )


def _check_gram(gram: GramSystem, threshold: float):
    if not gram.det_value >= threshold:
        raise DegenerateGram((gram.i, gram.j), gram.det_value, threshold)


def _pair_solutions(gram, phi_i, phi_j, lij_list):
    """Solve for (lambda, C) for each multi-index in ``lij_list`` with one LU."""
    n1 = phi_i.shape[0]
    L = phi_i.shape[1]
    phi = np.hstack([phi_i, phi_j])
    means = phi.mean(axis=0) if gram.means is None else gram.means
    products = np.stack([phi_i[:, li - 1] * phi_j[:, lj - 1] for li, lj in lij_list], axis=1)

    bordered = np.empty((2 * L + 1, 2 * L + 1))
    bordered[: 2 * L, : 2 * L] = gram.matrix
    bordered[: 2 * L, -1] = bordered[-1, : 2 * L] = means
    bordered[-1, -1] = 1.0
    rhs = np.vstack([-phi.T @ products / n1, -products.mean(axis=0)])
    with np.errstate(all="ignore"):
        sol = lu_solve(lu_factor(bordered, check_finite=False), rhs)
    if not np.all(np.isfinite(sol)):
        raise SolveFailure(f"non-finite solution for pair {(gram.i + 1, gram.j + 1)}")
    lam, c = sol[:-1], sol[-1]
    return [
        SecondOrderAtom(
            gram.i, gram.j, li, lj,
            lambda_i=lam[:L, k].copy(), lambda_j=lam[L:, k].copy(), c=float(c[k]),
        )
        for k, (li, lj) in enumerate(lij_list)
    ]


def solve_second_order_atom(
    gram: GramSystem,
    lij: tuple[int, int],
    samples,
    bases: Sequence[BasisSystem],
    threshold: float = DEFAULT_DEGENERACY_THRESHOLD,
) -> SecondOrderAtom:
    """Build the single atom ``phi^{ij}_{(l_i, l_j)}`` on the construction sample.

    ``samples`` must be the same sample the Gram system was assembled from.
    """
    samples = np.asarray(samples, dtype=float)
    _check_gram(gram, threshold)
    li, lj = lij
    L = gram.L
    if not (1 <= li <= L and 1 <= lj <= L):
        raise ConfigError(f"multi-index {lij} outside [1, {L}]^2")
    phi_i = _basis_columns(samples, bases, gram.i)
    phi_j = _basis_columns(samples, bases, gram.j)
    return _pair_solutions(gram, phi_i, phi_j, [(li, lj)])[0]


def solve_pair(
    gram: GramSystem,
    samples,
    bases: Sequence[BasisSystem],
    threshold: float = DEFAULT_DEGENERACY_THRESHOLD,
) -> list[SecondOrderAtom]:
    """All ``L**2`` atoms of a pair, sorted by ``(l_i, l_j)``."""
    samples = np.asarray(samples, dtype=float)
    _check_gram(gram, threshold)
    L = gram.L
    phi_i = _basis_columns(samples, bases, gram.i)
    phi_j = _basis_columns(samples, bases, gram.j)
    lij_list = list(itertools.product(range(1, L + 1), repeat=2))
    return _pair_solutions(gram, phi_i, phi_j, lij_list)


def constraint_residuals(atom: SecondOrderAtom, samples, bases: Sequence[BasisSystem]) -> np.ndarray:
    """Empirical inner products of the atom with ``phi_k^i``, ``phi_k^j`` and 1.

    Returns a vector of length ``2L + 1``; all entries vanish for a valid atom.
    """
    samples = np.asarray(samples, dtype=float)
    phi_i = _basis_columns(samples, bases, atom.i)
    phi_j = _basis_columns(samples, bases, atom.j)
    values = atom.evaluate(phi_i, phi_j)
    n = samples.shape[0]
    return np.concatenate([phi_i.T @ values / n, phi_j.T @ values / n, [values.mean()]])


def degeneracy(grams) -> float:
    """Smallest Gram determinant over all pairs."""
    dets = [g.det_value for g in grams]
    if not dets:
        raise ValueError("degeneracy needs at least one pair")
    return float(min(dets))


def build_hogs(
    samples,
    bases: Sequence[BasisSystem],
    threshold: float = DEFAULT_DEGENERACY_THRESHOLD,
) -> HogsResult:
    """Run the construction for every pair ``i < j``.

    Degenerate pairs are logged and skipped; their Gram systems are still
    kept so the degeneracy report covers them.
    """
    samples = np.asarray(samples, dtype=float)
    p = samples.shape[1]
    if len(bases) != p:
        raise ConfigError(f"{len(bases)} basis systems for {p} variables")
    atoms, grams, skipped = {}, {}, []
    for i, j in itertools.combinations(range(p), 2):
        gram = empirical_gram(samples, bases, i, j)
        grams[(i, j)] = gram
        try:
            atoms[(i, j)] = solve_pair(gram, samples, bases, threshold)
        except (DegenerateGram, SolveFailure) as exc:
            log.warning("skipping pair (%d, %d): %s", i + 1, j + 1, exc)
            skipped.append((i, j))
    return HogsResult(atoms=atoms, grams=grams, skipped=skipped, n1=samples.shape[0], threshold=threshold)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def atoms_to_json(atoms: Sequence[SecondOrderAtom]) -> str:
    """Serialize atoms; floats are written with 17 significant digits."""
    lines = []
    for a in atoms:
        d = a.to_dict()
        lines.append(
            "  {"
            f'"i": {d["i"]}, "j": {d["j"]}, "l_i": {d["l_i"]}, "l_j": {d["l_j"]}, '
            f'"lambda_i": [{", ".join(map(_fmt, d["lambda_i"]))}], '
            f'"lambda_j": [{", ".join(map(_fmt, d["lambda_j"]))}], '
            f'"c": {_fmt(d["c"])}'
            "}"
        )
    return "[\n" + ",\n".join(lines) + "\n]\n"


def atoms_from_json(text: str) -> list[SecondOrderAtom]:
    return [SecondOrderAtom.from_dict(d) for d in json.loads(text)]
