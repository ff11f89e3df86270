import logging
import math

import numpy as np
import pytest
from scipy import stats

from hofdboost.benchmarks import (
    GSOBOL_PAPER_A,
    CustomDataset,
    FunctionModel,
    GSobol,
    Ishigami,
    ModelSpec,
    equicorrelation,
    ishigami_analytical_indices,
    load_csv,
    mc_sensitivity_oracle,
    sample,
)
from hofdboost.errors import BadCorrelation, ConfigError, DependentInputsUnsupported
from hofdboost.sensitivity import gsobol_analytical


def ishigami_quadrature_variances(a=7.0, b=0.1, k=64):
    """Var(E[Y | X_w]) for every w, by tensor Gauss-Legendre quadrature."""
    t, w = np.polynomial.legendre.leggauss(k)
    x, w = math.pi * t, w / 2.0
    X1, X2, X3 = np.meshgrid(x, x, x, indexing="ij")
    F = Ishigami(a, b)(np.stack([X1, X2, X3], axis=-1))
    W = w[:, None, None] * w[None, :, None] * w[None, None, :]
    mean = np.sum(W * F)
    closed = {}
    for keep in [(0,), (1,), (2,), (0, 2), (0, 1, 2)]:
        drop = tuple(i for i in range(3) if i not in keep)
        cond = np.sum(W * F, axis=drop) / np.sum(W, axis=drop)
        wk = np.sum(W, axis=drop)
        closed[keep] = float(np.sum(wk * cond**2) - mean**2)
    return closed


def test_ishigami_values():
    f = Ishigami()
    assert f(np.zeros(3)) == 0.0
    assert f(np.array([math.pi / 2, math.pi / 2, 0.0])) == pytest.approx(8.0, abs=1e-14)


def test_gsobol_zero_factor():
    x = np.random.default_rng(0).uniform(size=(5, 10))
    x[:, 0] = 0.5
    np.testing.assert_array_equal(GSobol()(x), 0.0)


def test_ishigami_indices_match_quadrature():
    V = ishigami_quadrature_variances()
    S = ishigami_analytical_indices()
    total = V[(0, 1, 2)]
    assert S[(0,)] == pytest.approx(V[(0,)] / total, abs=1e-10)
    assert S[(1,)] == pytest.approx(V[(1,)] / total, abs=1e-10)
    assert S[(2,)] == pytest.approx(V[(2,)] / total, abs=1e-12)
    assert S[(0, 2)] == pytest.approx((V[(0, 2)] - V[(0,)] - V[(2,)]) / total, abs=1e-10)


def test_ishigami_indices_match_monte_carlo():
    # total variance from 10^7 plain Monte-Carlo points
    X, y = sample(ModelSpec(Ishigami()), 10_000_000, 123)
    v1 = (1 + 0.1 * math.pi**4 / 5) ** 2 / 2
    S = ishigami_analytical_indices()
    assert v1 / np.var(y) == pytest.approx(S[(0,)], abs=1e-3)


def test_ishigami_index_values():
    S = ishigami_analytical_indices()
    assert S[(0,)] == pytest.approx(0.3139, abs=1e-4)
    assert S[(1,)] == pytest.approx(0.4424, abs=1e-4)
    assert S[(0, 2)] == pytest.approx(0.2437, abs=1e-4)
    assert S[(2,)] == 0.0
    assert sum(S.values()) == pytest.approx(1.0, abs=1e-14)


def test_ishigami_indices_special_cases():
    S = ishigami_analytical_indices(7.0, 0.0)
    assert S[(1,)] == pytest.approx((49 / 8) / (0.5 + 49 / 8))
    assert S[(0, 2)] == 0.0
    assert ishigami_analytical_indices(0.0, 0.0)[(0,)] == 1.0


@pytest.mark.slow
def test_oracle_gsobol_first_order():
    spec = ModelSpec(GSobol())
    s1 = mc_sensitivity_oracle(spec, (0,), n_mc=1_000_000, seed=1)
    assert s1 == pytest.approx(0.716, abs=0.005)
    assert s1 == pytest.approx(gsobol_analytical(GSOBOL_PAPER_A, (0,)), abs=0.005)


@pytest.mark.slow
def test_oracle_ishigami():
    spec = ModelSpec(Ishigami())
    assert mc_sensitivity_oracle(spec, (2,), n_mc=1_000_000, seed=2) == pytest.approx(0.0, abs=0.005)
    s13 = mc_sensitivity_oracle(spec, (0, 2), n_mc=1_000_000, seed=3)
    assert s13 == pytest.approx(ishigami_analytical_indices()[(0, 2)], abs=0.01)


def test_oracle_additive_model():
    spec = ModelSpec(FunctionModel(lambda X: X[:, 0] + X[:, 1], ((0.0, 1.0), (0.0, 1.0))))
    assert mc_sensitivity_oracle(spec, (0,), n_mc=200_000, seed=4) == pytest.approx(0.5, abs=0.01)
    assert mc_sensitivity_oracle(spec, (0, 1), n_mc=200_000, seed=4) == pytest.approx(0.0, abs=0.01)
    dl = mc_sensitivity_oracle(spec, (0,), n_mc=1_000_000, seed=5, method="double-loop")
    assert dl == pytest.approx(0.5, abs=0.1)


def test_oracle_rejects_dependent_inputs():
    spec = ModelSpec(Ishigami(), correlation=equicorrelation(3, 0.5))
    with pytest.raises(DependentInputsUnsupported):
        mc_sensitivity_oracle(spec, (0,), n_mc=10)
    with pytest.raises(ConfigError):
        mc_sensitivity_oracle(ModelSpec(Ishigami()), (0,), n_mc=10, method="nope")


@pytest.mark.parametrize("rho", [0.3, 0.85])
def test_copula_marginals_and_correlation(rho):
    spec = ModelSpec(Ishigami(), correlation=equicorrelation(3, rho))
    X, _ = sample(spec, 10_000, 7)
    U = (X + math.pi) / (2 * math.pi)
    for i in range(3):
        assert stats.kstest(U[:, i], "uniform").statistic <= 0.02
    target = 6 / math.pi * math.asin(rho / 2)
    R = np.corrcoef(U, rowvar=False)
    assert np.max(np.abs(R[np.triu_indices(3, 1)] - target)) <= 0.05


def test_independent_marginals():
    X, _ = sample(ModelSpec(GSobol()), 10_000, 8)
    assert X.min() >= 0 and X.max() <= 1
    assert stats.kstest(X[:, 3], "uniform").statistic <= 0.02


def test_reproducible():
    spec = ModelSpec(Ishigami(), correlation=equicorrelation(3, 0.5), noise=0.1)
    X1, y1 = sample(spec, 100, 42)
    X2, y2 = sample(spec, 100, 42)
    np.testing.assert_array_equal(X1, X2)
    np.testing.assert_array_equal(y1, y2)
    assert not np.array_equal(sample(spec, 100, 43)[0], X1)


def test_noise():
    spec = ModelSpec(Ishigami(), noise=0.5)
    X, y = sample(spec, 20_000, 9)
    assert np.std(y - Ishigami()(X)) == pytest.approx(0.5, rel=0.03)


def test_bad_correlation():
    with pytest.raises(BadCorrelation):
        ModelSpec(Ishigami(), correlation=equicorrelation(3, -0.9))
    with pytest.raises(BadCorrelation):
        ModelSpec(Ishigami(), correlation=np.eye(2))


def test_spec_validation():
    with pytest.raises(ConfigError):
        ModelSpec(Ishigami(), ranges=((0.0, 0.0),) * 3)
    with pytest.raises(ConfigError):
        ModelSpec(Ishigami(), noise=-1.0)
    with pytest.raises(ConfigError):
        sample(ModelSpec(Ishigami()), 0, 1)
    with pytest.raises(ConfigError):
        GSobol((1.0, -2.0))


def test_load_csv(tmp_path, caplog):
    path = tmp_path / "data.csv"
    path.write_text("x1,x2,y\n0.1,0.2,1.0\n0.3,nan,2.0\n0.5,0.6,3.0\n0.7,0.8,4.0\n")
    with caplog.at_level(logging.WARNING):
        data = load_csv(path)
    assert "dropped 1 rows" in caplog.text
    np.testing.assert_array_equal(data.y, [1.0, 3.0, 4.0])
    assert data.ranges == ((0.1, 0.7), (0.2, 0.8))
    X, y = sample(ModelSpec(data), 3, 0)
    assert sorted(y) == [1.0, 3.0, 4.0]
    with pytest.raises(ConfigError):
        sample(ModelSpec(data), 4, 0)


def test_load_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,y\n1,2,3\n")
    with pytest.raises(ConfigError):
        load_csv(path)


def test_dataset_cannot_be_evaluated():
    data = CustomDataset(np.zeros((3, 2)), np.zeros(3))
    with pytest.raises(ConfigError):
        ModelSpec(data).evaluate(np.zeros((1, 2)))
