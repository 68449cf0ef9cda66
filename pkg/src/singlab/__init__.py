"""singlab: a numerical laboratory for point-singular semilinear elliptic gluing.

Builds the singular radial profile of -Delta u = u^p via the Fowler
transform, glues it into a bounded domain with anisotropic coefficients,
inverts the linearized operator on weighted spaces, runs the contraction
iteration to a genuine singular solution, and lifts the result to a
warped-product metric where the singular set is a fiber.
"""

from .exponents import (
    EquivariantSpec, IndicialTable, ParameterWindowError, ProblemParams,
    WeightWindow, check_window, core_potential, delta_exponent,
    equivariant_params, fowler_constant, indicial_roots_infinity,
    indicial_roots_origin, indicial_table, k_constant, sphere_eigenvalue,
    weight_window,
)
from .mesh import GradedMesh, GridFunction, MeshResolutionError, graded_mesh
from .norms import (
    NormReport, ShellDecomposition, norm_algebra_check, shell_decomposition,
    weighted_holder_norm, weighted_l2_norm,
)
from .radial import (
    RadialProfile, ScaledFamily, fowler_exponents, fowler_rhs, pde_residual,
    scale_evaluate, select_normalization, solve_connection,
)
from .coefficients import (
    AnalyticCoefficient, CoefficientField, constant, gaussian_bump, poly_r2,
    poly_r2_power, unit_field,
)
from .glue import (
    Cutoff, GlueData, UnitCutoff, approximate_solution, build_cutoff,
    build_glue, error_term, nonlinearity_Q,
)
from .modes import (
    GreenSolver, ModeOperator, apply_green, appendix_stability_probe,
    assemble_mode, coercivity_constant, green_norm_probe, hardy_check,
    max_principle_check, model_oscillation_frequency, nullspace_scan,
    solver_mesh,
)
from .picard import (
    BallEscapeError, IterationState, NonContractionError,
    contraction_factor_sweep, iterate, solution_report,
)
from .warped import (
    AffineWarp, PolyGaussian, RadialWarp, WarpedSpec, fiber_minimality_check,
    lift_evaluate, product_laplacian_check, reduced_operator_residual,
)

__version__ = "0.1.0"
