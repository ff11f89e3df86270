import json
import math

import numpy as np
import pytest

from hofdboost.bases import BasisSystem
from hofdboost.benchmarks import Ishigami, ModelSpec, equicorrelation, sample
from hofdboost.errors import ConfigError, DegenerateGram, InsufficientSample
from hofdboost.hogs import (
    atoms_from_json,
    atoms_to_json,
    build_hogs,
    constraint_residuals,
    degeneracy,
    empirical_gram,
    solve_pair,
    solve_second_order_atom,
)

SQ3 = math.sqrt(3.0)


def identity_bases(p=2, scale=1.0):
    # L = 1 Legendre on [-s*sqrt3, s*sqrt3] gives phi_1(x) = x / s
    return [BasisSystem.legendre(1, -scale * SQ3, scale * SQ3)] * p


def lstsq_oracle(X, bases, i, j, li, lj):
    """Coefficients of the product's residual after projecting onto 1, phi^i, phi^j."""
    phi_i = bases[i].nonconstant(X[:, i])
    phi_j = bases[j].nonconstant(X[:, j])
    G = np.column_stack([phi_i, phi_j, np.ones(X.shape[0])])
    coef, *_ = np.linalg.lstsq(G, -phi_i[:, li - 1] * phi_j[:, lj - 1], rcond=None)
    L = phi_i.shape[1]
    return coef[:L], coef[L : 2 * L], coef[-1]


def ishigami_inputs(n, seed):
    return sample(ModelSpec(Ishigami()), n, seed)[0]


def fourier_bases(L, p=3):
    return [BasisSystem.fourier(L)] * p


def test_gram_hand_example_singular():
    X = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, 1.0]])
    g = empirical_gram(X, identity_bases(), 0, 1)
    np.testing.assert_allclose(g.matrix, [[1.0, 1.0], [1.0, 1.0]], atol=1e-15)
    assert g.det_value == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DegenerateGram):
        solve_second_order_atom(g, (1, 1), X, identity_bases())


def test_gram_needs_2l_plus_1_points():
    X = np.array([[1.0, 1.0], [-1.0, -1.0]])
    with pytest.raises(InsufficientSample):
        empirical_gram(X, identity_bases(), 0, 1)


def test_gram_rejects_same_variable():
    X = np.zeros((5, 2))
    with pytest.raises(ConfigError):
        empirical_gram(X, identity_bases(), 0, 0)


def test_symmetric_design_gives_zero_lambda():
    # sums of x_i^2 x_j and x_i x_j^2 vanish, so D = 0 and C = -mean(x_i x_j)
    X = np.array([[1.0, 2.0], [-1.0, -2.0], [2.0, 1.0], [-2.0, -1.0]])
    bases = identity_bases(scale=2.0)  # phi_1(x) = x / 2
    g = empirical_gram(X, bases, 0, 1)
    np.testing.assert_allclose(g.matrix, [[0.625, 0.5], [0.5, 0.625]], atol=1e-15)
    atom = solve_second_order_atom(g, (1, 1), X, bases)
    np.testing.assert_allclose(atom.lambda_i, [0.0], atol=1e-15)
    np.testing.assert_allclose(atom.lambda_j, [0.0], atol=1e-15)
    assert atom.c == pytest.approx(-0.5, abs=1e-15)


def test_hand_solved_two_by_two():
    # zero-mean three-point sample: A = [[2,1],[1,2]]/3, D = -[1,1]/3,
    # so lambda = (-1/3, -1/3) and C = -mean(xy - (x + y)/3) = -1/3
    X = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    g = empirical_gram(X, identity_bases(), 0, 1)
    atom = solve_second_order_atom(g, (1, 1), X, identity_bases())
    assert atom.lambda_i[0] == pytest.approx(-1 / 3, abs=1e-12)
    assert atom.lambda_j[0] == pytest.approx(-1 / 3, abs=1e-12)
    assert atom.c == pytest.approx(-1 / 3, abs=1e-12)


def test_hand_solved_nonzero_means():
    # with 2L+1 points the atom must vanish on the sample: xy + a x + b y + C = 0
    # at (1,0), (0,1), (1,1) gives a = b = -1, C = 1
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    g = empirical_gram(X, identity_bases(), 0, 1)
    atom = solve_second_order_atom(g, (1, 1), X, identity_bases())
    assert atom.lambda_i[0] == pytest.approx(-1.0, abs=1e-12)
    assert atom.lambda_j[0] == pytest.approx(-1.0, abs=1e-12)
    assert atom.c == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(constraint_residuals(atom, X, identity_bases()))) <= 1e-14


@pytest.mark.parametrize("seed", range(5))
def test_constraints_exact_and_match_lstsq(seed):
    X = ishigami_inputs(150, seed)
    bases = [BasisSystem.legendre(8, -math.pi, math.pi)] * 3
    hogs = build_hogs(X, bases)
    for (i, j), atoms in hogs.atoms.items():
        assert len(atoms) == 64
        for atom in atoms:
            assert np.max(np.abs(constraint_residuals(atom, X, bases))) <= 1e-8
        for atom in atoms[::9]:
            lam_i, lam_j, c = lstsq_oracle(X, bases, i, j, atom.li, atom.lj)
            np.testing.assert_allclose(atom.lambda_i, lam_i, atol=1e-8)
            np.testing.assert_allclose(atom.lambda_j, lam_j, atol=1e-8)
            assert atom.c == pytest.approx(c, abs=1e-8)


def test_solve_pair_order_and_single_solve_agree():
    X = ishigami_inputs(120, 3)
    bases = fourier_bases(3)
    g = empirical_gram(X, bases, 0, 2)
    atoms = solve_pair(g, X, bases)
    assert [(a.li, a.lj) for a in atoms] == [(li, lj) for li in range(1, 4) for lj in range(1, 4)]
    single = solve_second_order_atom(g, (2, 3), X, bases)
    np.testing.assert_allclose(single.lambda_i, atoms[5].lambda_i, atol=1e-13)
    assert single.c == pytest.approx(atoms[5].c, abs=1e-13)


def test_independence_limit():
    n1 = 100_000
    X = np.random.default_rng(11).uniform(-1, 1, size=(n1, 2))
    bases = [BasisSystem.legendre(5)] * 2
    g = empirical_gram(X, bases, 0, 1)
    assert np.max(np.abs(g.matrix - np.eye(10))) < 3 * 5 / math.sqrt(n1)
    atoms = solve_pair(g, X, bases)
    worst = max(np.linalg.norm(np.r_[a.lambda_i, a.lambda_j]) + abs(a.c) for a in atoms)
    assert worst < 0.05
    small = solve_pair(empirical_gram(X[:1000], bases, 0, 1), X[:1000], bases)
    worst_small = max(np.linalg.norm(np.r_[a.lambda_i, a.lambda_j]) + abs(a.c) for a in small)
    assert worst < worst_small


def test_copula_inputs_give_cross_terms():
    spec = ModelSpec(Ishigami(), correlation=equicorrelation(3, 0.85))
    X = sample(spec, 500, 2)[0]
    g = empirical_gram(X, [BasisSystem.legendre(5, -math.pi, math.pi)] * 3, 0, 1)
    assert np.max(np.abs(g.matrix[:5, 5:])) > 0.1


def test_permutation_symmetry():
    X = ishigami_inputs(200, 4)
    bases = fourier_bases(4, 2)
    atoms = {(a.li, a.lj): a for a in solve_pair(empirical_gram(X[:, :2], bases, 0, 1), X[:, :2], bases)}
    Xs = X[:, [1, 0]]
    swapped = solve_pair(empirical_gram(Xs, bases, 0, 1), Xs, bases)
    for b in swapped:
        a = atoms[(b.lj, b.li)]
        np.testing.assert_allclose(b.lambda_i, a.lambda_j, atol=1e-12)
        np.testing.assert_allclose(b.lambda_j, a.lambda_i, atol=1e-12)
        assert b.c == pytest.approx(a.c, abs=1e-12)


def test_build_hogs_skips_degenerate_pair(caplog):
    X = ishigami_inputs(100, 5)
    X[:, 2] = X[:, 0]
    hogs = build_hogs(X, fourier_bases(3))
    assert hogs.skipped == [(0, 2)]
    assert sorted(hogs.atoms) == [(0, 1), (1, 2)]
    assert hogs.degeneracy == pytest.approx(hogs.grams[(0, 2)].det_value)
    assert hogs.degeneracy < 1e-12
    assert "skipping pair (1, 3)" in caplog.text


def test_degeneracy_is_min_det():
    X = ishigami_inputs(300, 6)
    hogs = build_hogs(X, fourier_bases(8))
    assert hogs.degeneracy == min(g.det_value for g in hogs.grams.values())
    with pytest.raises(ValueError):
        degeneracy([])


def test_json_round_trip():
    X = ishigami_inputs(80, 7)
    atoms = build_hogs(X, fourier_bases(2)).all_atoms()
    text = atoms_to_json(atoms)
    back = atoms_from_json(text)
    assert json.loads(text)[0]["i"] == 1
    for a, b in zip(atoms, back):
        assert (a.i, a.j, a.li, a.lj, a.c) == (b.i, b.j, b.li, b.lj, b.c)
        np.testing.assert_array_equal(a.lambda_i, b.lambda_i)
        np.testing.assert_array_equal(a.lambda_j, b.lambda_j)


def _independence_gap(n1, seed):
    X = np.random.default_rng(seed).uniform(-1, 1, size=(n1, 2))
    bases = [BasisSystem.legendre(4)] * 2
    phi_i, phi_j = bases[0].nonconstant(X[:, 0]), bases[1].nonconstant(X[:, 1])
    worst = 0.0
    for a in solve_pair(empirical_gram(X, bases, 0, 1), X, bases):
        product_mean = np.mean(phi_i[:, a.li - 1] * phi_j[:, a.lj - 1])
        worst = max(worst, np.linalg.norm(np.r_[a.lambda_i, a.lambda_j]) + abs(a.c + product_mean))
    return worst


def test_independence_limit_median_over_seeds():
    small = np.median([_independence_gap(250, s) for s in range(20)])
    large = np.median([_independence_gap(4000, s) for s in range(20)])
    assert large < small


def test_permutation_symmetry_of_evaluations():
    X = ishigami_inputs(200, 12)[:, :2]
    bases = fourier_bases(3, 2)
    Xs = X[:, [1, 0]]
    a = solve_second_order_atom(empirical_gram(X, bases, 0, 1), (1, 3), X, bases)
    b = solve_second_order_atom(empirical_gram(Xs, bases, 0, 1), (3, 1), Xs, bases)
    va = a.evaluate(bases[0].nonconstant(X[:, 0]), bases[1].nonconstant(X[:, 1]))
    vb = b.evaluate(bases[0].nonconstant(Xs[:, 0]), bases[1].nonconstant(Xs[:, 1]))
    np.testing.assert_allclose(va, vb, atol=1e-10)
