"""Sparse hierarchically orthogonal functional decomposition for dependent inputs.

Pipeline: orthonormal univariate bases -> empirical hierarchically
orthogonal second-order atoms -> greedy sparse regression -> generalized
sensitivity indices.
"""

__version__ = "0.1.0"

from .bases import BasisKind, BasisSystem, eval_basis, gram_quadrature
from .benchmarks import (
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
from .dictionary import Atom, DesignMatrix, Dictionary, build_dictionary, expected_size
from .hogs import (
    GramSystem,
    HogsResult,
    SecondOrderAtom,
    build_hogs,
    constraint_residuals,
    degeneracy,
    empirical_gram,
    solve_pair,
    solve_second_order_atom,
)
from .selectors import BoostConfig, CpMode, FitResult, StopRule, boost_fit, cp_boost, foba_fit, lasso_fit
from .sensitivity import SensitivityReport, component_values, gsobol_analytical, indices
