"""Position-dependent-mass systems with equidistant spectra and SUSY partners.

The package builds Ben Daniel-Duke Hamiltonians that admit first-order ladder
operators for a chosen mass profile, checks their spectra against an
independent Sturm-Liouville eigensolver, and constructs first-order,
second-order non-confluent, and confluent SUSY partner systems together with
their eigenfunctions.  All quantities are in atomic units (hbar = 1 by
default).
"""

from .bdd_solver import (
    BoundaryCondition,
    DiscretizedOperator,
    SpectrumReport,
    check_boundary_condition,
    converged_spectrum,
    discretize,
    overlap_matrix,
    rayleigh_quotient,
    solve_spectrum,
)
from .errors import (
    ConfigError,
    DegenerateFunctionError,
    DegenerateWronskianError,
    DomainError,
    GridMismatchError,
    InstabilityError,
    InvalidArgumentError,
    InvalidSeedError,
    NoRegularSubdomainError,
    NumericalError,
    PdmsusyError,
    SolverError,
    WrongAlgorithmError,
    WrongModeError,
)
from .ladder import (
    FormalState,
    LadderSystem,
    apply_lowering,
    apply_raising,
    auto_grid,
    bdd_apply,
    bdd_apply_potential,
    build_ladder_system,
    closed_form_state,
    commutator_residual,
    gaussian_test_functions,
    hamiltonian_operator,
    nth_state,
)
from .mass_profiles import (
    BDD_ORDERING,
    MassProfile,
    OrderingParameters,
    constant_profile,
    cosine_profile,
    linear_profile,
    load_profile_csv,
    quadratic_profile,
    tabulated_profile,
    v_from_veff,
    veff_from_ordering,
)
from .numerics import (
    Grid,
    SampledFunction,
    build_grid,
    default_anchor,
    derivative,
    incomplete_elliptic_e,
    inner_product,
    integrate_cumulative,
    l2_norm,
    l2_normalize,
    subgrid,
    wronskian,
)
from .susy import (
    FirstOrderTransform,
    SecondOrderTransform,
    SingularityReport,
    confluent_missing_state,
    confluent_transform,
    critical_d,
    eigen_residual,
    factorization_residual,
    first_order_operators,
    first_order_transform,
    intertwining_residual,
    looks_normalizable,
    map_state_first,
    map_state_second,
    missing_state_first,
    missing_state_second,
    partner_hamiltonian,
    partner_ladder_apply,
    second_order_nonconfluent,
    second_order_operators,
    superpotential_from_seed,
)

__version__ = "0.1.0"
