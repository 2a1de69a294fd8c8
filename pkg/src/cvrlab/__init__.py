"""cvrlab: a numerical laboratory for stochastic calculus via regularization.

Real and window (function-space-valued) processes, eps-regularized forward
integrals and covariations, chi-quadratic variations of window processes,
a numerical Ito-formula verifier, and payoff replication on
non-semimartingales with Brownian-like quadratic variation.
"""

__version__ = "0.1.0"

from .chi_qv import (
    Atomic00,
    Chi0,
    ChiElement,
    ChiQVResult,
    DiagKernel,
    L2Kernel,
    chi0_reference,
    chi_qv_eps,
    chi_qv_suite,
    diag_reference,
    global_norm_integral,
    pair_chi,
    phi_preset,
    total_variation_stat,
)
from .clark_ocone import (
    HedgeResult,
    Payoff,
    QuadratureError,
    QVCertificationError,
    ValueFunction,
    gh_doubling_gap,
    hedge_vanilla,
    hedge_wiener_functional,
    make_payoff,
    pde_residual,
    solve_vanilla,
)
from .functionals import (
    FDReport,
    Functional,
    endpoint_functional,
    energy_functional,
    fd_check,
    integral_squared_functional,
    make_functional,
)
from .gaussian import (
    CovarianceNotPSDError,
    GaussianSpec,
    bifractional,
    brownian,
    component_seed,
    covariance_matrix,
    fbm,
    mixed,
    reference_qv,
    sample,
    scaled,
)
from .grids import Path, TimeGrid, eval_extended, make_grid, read_path_csv, write_path_csv
from .ito_check import ItoResidualReport, UnsupportedCombinationError, ito_residual
from .regularize import (
    ConvergenceReport,
    EpsilonLadder,
    GridMismatchError,
    converge,
    covariation_eps,
    default_ladder,
    forward_integral_eps,
    improper_value,
    mutual_covariations,
)
from .window import (
    LagMismatchError,
    SignedMeasure,
    WindowSegment,
    banach_forward_integral_eps,
    dirac,
    lebesgue,
    measure_process,
    pair_measure,
    random_segment,
    sup_norm,
    window_at,
    zero_measure,
)
