"""Multiserver retrial queues with orbit: exact solver and diagnostics.

The package solves the stationary distribution of a level-dependent
quasi-birth-death chain (busy servers x orbit size), cross-checks it
against generating-function identities, closed forms for one and two
servers, and a discrete-event simulation, and classifies ergodicity.
"""

__version__ = "0.1.0"

from .closed_form import (S1Solution, S2Solution, s1_asymptotic,
                          s1_classic_pmf, s1_closed_form, s1_solution,
                          s2_closed_form, s2_hypergeometric)
from .errors import (CapExceeded, DivergenceRisk, NoNullVector,
                     NoOrbitInflow, NotApplicable, NotErgodic, NotOkubo,
                     NotPersistent, PureOrbit, RetrialQError,
                     SeriesDivergence, SingularBlock, SingularShift,
                     TailUnderflow, TruncationLimit, UndefinedRho,
                     UnsupportedK, UnsupportedVariant, WindowTooSmall,
                     WrongDimension)
from .genfun import (GfValue, PolyMatrixSystem, SingularityReport,
                     bivariate_residual, build_system, det_v, det_v_formula,
                     eval_gf, mmoo_moments, ode_residual, singularities)
from .model import (DerivedRates, ErgodicityVerdict, ModelParams, QbdBlocks,
                    ValidationReport, build_blocks, derive, ergodicity,
                    require_valid, validate)
from .qbd import (BalanceResidual, RLadder, SolverOptions,
                  StationaryDistribution, balance_residual, left_null_vector,
                  r_ladder, solve)
from .reduction import (OkuboSystem, ReducedSystem, ResolventDecomposition,
                        okubo_form, reduce_persistent,
                        resolvent_decomposition, standardize)
from .simulator import (ComparisonReport, SimConfig, SimResult, compare,
                        merge_results, simulate)
from .tail import (AnalyticSingularity, TailEstimate, analytic_singularity,
                   fit_tail)

__all__ = [
    "__version__",
    # model
    "ModelParams", "ValidationReport", "DerivedRates", "ErgodicityVerdict",
    "QbdBlocks", "validate", "require_valid", "derive", "ergodicity",
    "build_blocks",
    # solver
    "SolverOptions", "RLadder", "StationaryDistribution", "BalanceResidual",
    "solve", "r_ladder", "balance_residual", "left_null_vector",
    # generating functions
    "PolyMatrixSystem", "GfValue", "SingularityReport", "build_system",
    "eval_gf", "ode_residual", "bivariate_residual", "det_v",
    "det_v_formula", "singularities", "mmoo_moments",
    # reductions
    "ReducedSystem", "OkuboSystem", "ResolventDecomposition",
    "reduce_persistent", "okubo_form", "standardize",
    "resolvent_decomposition",
    # closed forms
    "S1Solution", "S2Solution", "s1_closed_form", "s1_solution",
    "s1_classic_pmf", "s1_asymptotic", "s2_closed_form", "s2_hypergeometric",
    # tail
    "AnalyticSingularity", "TailEstimate", "analytic_singularity", "fit_tail",
    # simulation
    "SimConfig", "SimResult", "ComparisonReport", "simulate", "compare",
    "merge_results",
    # errors
    "RetrialQError", "UndefinedRho", "UnsupportedK", "SingularBlock",
    "NotErgodic", "NoNullVector", "TruncationLimit", "DivergenceRisk",
    "UnsupportedVariant", "SingularShift", "NotPersistent", "NoOrbitInflow",
    "NotOkubo", "PureOrbit", "WrongDimension", "NotApplicable",
    "SeriesDivergence", "WindowTooSmall", "TailUnderflow", "CapExceeded",
]
