"""Space-time spline discretization of the clamped biharmonic wave equation.

The package assembles the stabilized space-time Galerkin system for
``d_tt u + lap^2 u = f`` with homogeneous initial data and clamped boundary
conditions, solves it through a Kronecker-structured direct algorithm, and
drives the manufactured-solution experiments (convergence, stability
classification, solver scaling) behind the ``bihwave`` command-line tool.
"""

from .analysis import (
    ConvergenceTable,
    ManufacturedCase,
    StabilityReport,
    cfl_boundary_study,
    classify_stability,
    convergence_study,
    error_norms_final_time,
    error_norms_spacetime,
    fixed_dof_meshes,
    manufactured_case,
    stability_study,
    timing_study,
)
from .assembly import (
    ForcingTerm,
    Gram1D,
    QuadratureRule,
    SeparableForcing,
    SpatialOperators,
    TemporalMatrices,
    assemble_gram_1d,
    assemble_load,
    assemble_spatial,
    assemble_temporal,
    gauss_rule,
    projected_mass,
    write_coo,
)
from .errors import FactorizationError, NumericalError, SolverError
from .solver import (
    SolveReport,
    TemporalFactorization,
    factorize_temporal,
    flops_model,
    solve,
    solve_dense_oracle,
    solve_system,
)
from .splines import (
    KnotVector,
    SplineSpace1D,
    build_space,
    eval_basis,
    make_knot_vector,
)
from .system import (
    CflReport,
    DiscretizationConfig,
    SpaceTimeSystem,
    apply_operator,
    assemble_dense,
    build_system,
    cfl_check,
    delta_lookup,
    max_generalized_eigenvalue,
    rho_lookup,
)

__version__ = "0.1.0"
