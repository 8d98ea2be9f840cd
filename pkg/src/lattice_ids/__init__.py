"""Finite-volume random Schroedinger operators with decaying heavy-tailed disorder."""

from .model import HeavyTailDist, LatticeBox, ModelParams, beta_L, cdf, envelope, quantile, rho, sample_q
from .operator import (
    BracketDiagonal,
    Disorder,
    SparseSymOperator,
    assemble_hamiltonian,
    bracket_diagonal,
    sample_disorder,
)
from .spectral import (
    CountStatistic,
    DimensionTooLarge,
    NearSingularShift,
    bracket_count,
    count_geq,
    count_leq,
    eigenvalues_dense,
)
from .estimators import (
    GammaMeasure,
    Interval,
    MCReport,
    VerificationReport,
    divergence_diagnostic,
    expected_bracket,
    expected_diag_tail,
    gamma_measure,
    interior_fraction,
    mc_expected_count,
    pointwise_trajectory,
)

__version__ = "0.1.0"
