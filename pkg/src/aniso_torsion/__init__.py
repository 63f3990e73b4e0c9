"""Anisotropic p-torsion on convex polygons: solver, geometry and estimate checks."""

from .anisotropy import (
    EuclideanNorm,
    Norm,
    PolarNorm,
    QuadraticNorm,
    RotatedNorm,
    WeightedLrNorm,
    parse_norm,
    polar_eval,
    rotate_norm,
    rotation_matrix,
    verify_duality,
    wulff_shape,
)
from .convex_geometry import (
    ConvexBody,
    anisotropic_distance,
    anisotropic_inradius,
    from_vertices,
    gauge,
    henrot_parameters,
    load_body,
    make_henrot_triangle,
    make_rectangle,
    make_square,
    make_thinning_rectangle,
    random_convex_body,
    save_body,
    support_function,
)
from .errors import (
    BadBody,
    BadParameter,
    DegenerateInput,
    NoConvergence,
    OutsideBody,
    TorsionError,
    UnsupportedDimension,
)
from .estimates import (
    EstimateReport,
    PFunctionField,
    check_max_principle,
    curvature_identity_check,
    evaluate,
    gauge_lower_bound,
    max_torsion_bounds,
    p_function_field,
    phi_psi,
    saint_venant_check,
)
from .experiments import (
    ExperimentConfig,
    run_bound_matrix,
    run_convergence,
    run_rectangle_limit,
    run_triangle_limit,
)
from .mesh import Mesh, column_mesh, load_mesh, refine, save_mesh, triangulate
from .torsion import (
    SolverOptions,
    TorsionSolution,
    exact_wulff_rigidity,
    exact_wulff_solution,
    rayleigh_lower_bound,
    residual_check,
    save_solution,
    solve_torsion,
)

__version__ = "0.1.0"
