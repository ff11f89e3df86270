import csv
import math

import numpy as np
import pytest

from hofdboost.bases import BasisSystem
from hofdboost.benchmarks import GSobol, Ishigami, ModelSpec, sample
from hofdboost.dictionary import build_dictionary, expected_size
from hofdboost.errors import ConfigError, EmptyDictionary
from hofdboost.hogs import build_hogs


def ishigami_dictionary(n1=200, L=4, seed=0):
    X = sample(ModelSpec(Ishigami()), n1, seed)[0]
    bases = [BasisSystem.fourier(L)] * 3
    return build_dictionary(build_hogs(X, bases), bases), bases


@pytest.mark.parametrize("p, L, m", [(3, 8, 216), (10, 5, 1175), (1, 3, 3), (2, 1, 3)])
def test_expected_size(p, L, m):
    assert expected_size(p, L) == m


def test_gsobol_dictionary_size():
    X = sample(ModelSpec(GSobol()), 350, 0)[0]
    bases = [BasisSystem.legendre(5, 0.0, 1.0)] * 10
    d = build_dictionary(build_hogs(X, bases), bases)
    assert len(d) == 1175


def test_single_variable_has_only_first_order():
    bases = [BasisSystem.legendre(3)]
    d = build_dictionary(None, bases)
    assert len(d) == 3
    assert d.names == ("u=(1);l=(1)", "u=(1);l=(2)", "u=(1);l=(3)")


def test_canonical_order():
    d, _ = ishigami_dictionary(L=2)
    assert len(d) == expected_size(3, 2)
    keys = [(a.order, a.subset, a.index) for a in d.atoms]
    assert keys == sorted(keys)
    assert d[0].name == "u=(1);l=(1)"
    assert d[6].name == "u=(1,2);l=(1,1)"
    assert d[7].name == "u=(1,2);l=(1,2)"
    assert d[len(d) - 1].name == "u=(2,3);l=(2,2)"
    assert [a.canonical_index for a in d.atoms] == list(range(len(d)))


def test_columns_equal_atoms():
    d, bases = ishigami_dictionary()
    X = sample(ModelSpec(Ishigami()), 50, 9)[0]
    D = d.evaluate(X)
    assert D.values.flags["F_CONTIGUOUS"]
    for k, atom in enumerate(d.atoms):
        if atom.order == 1:
            (i,), (l,) = atom.subset, atom.index
            expected = bases[i](l, X[:, i])
        else:
            i, j = atom.subset
            expected = atom.payload.evaluate(bases[i].nonconstant(X[:, i]), bases[j].nonconstant(X[:, j]))
        np.testing.assert_allclose(D.values[:, k], expected, atol=1e-13)
    np.testing.assert_allclose(D.norms, np.sqrt(np.mean(D.values**2, axis=0)))


def test_columns_centered_on_fresh_sample():
    n = 100_000
    d, _ = ishigami_dictionary(n1=n, L=3, seed=1)
    D = d.evaluate(sample(ModelSpec(Ishigami()), n, 2)[0])
    assert np.max(np.abs(D.means) / D.norms) <= 5 / math.sqrt(n)


def test_csv_export(tmp_path):
    d, _ = ishigami_dictionary(L=2)
    X = sample(ModelSpec(Ishigami()), 4, 3)[0]
    D = d.evaluate(X)
    D.to_csv(tmp_path / "design.csv")
    with open(tmp_path / "design.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == d.names
    np.testing.assert_array_equal(np.array(rows[1:], dtype=float), D.values)


def test_skipped_pair_shrinks_dictionary():
    X = sample(ModelSpec(Ishigami()), 100, 4)[0]
    X[:, 1] = X[:, 0]
    bases = [BasisSystem.fourier(2)] * 3
    d = build_dictionary(build_hogs(X, bases), bases)
    assert d.skipped_pairs == ((0, 1),)
    assert len(d) == expected_size(3, 2) - 4


def test_errors():
    with pytest.raises(EmptyDictionary):
        build_dictionary(None, [])
    d, _ = ishigami_dictionary(L=2)
    with pytest.raises(ConfigError):
        d.evaluate(np.zeros((3, 2)))
