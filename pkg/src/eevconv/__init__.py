"""Finite-size convergence of eigenstate expectation values in translation-invariant spin chains."""

from .convergence import (
    ConvergenceReport,
    TargetFunction,
    eth_linear_predictor,
    fit_target,
    r_f,
    r_f_l1,
    scaling_exponent,
    weak_eth_statistic,
)
from .pauli_algebra import (
    ChainContext,
    LocalOperator,
    ModelError,
    PauliString,
    canonicalize,
    obstruction_residual,
    ham2_op_trace,
    ham_moment,
    ham_op_trace,
    load_model,
    multiply_strings,
    parameter_space_dim,
    translate,
    witness_operator,
)
from .spectra import HamiltonianSpec, SpectrumTable, diagonalize, eev_table

__version__ = "0.1.0"
