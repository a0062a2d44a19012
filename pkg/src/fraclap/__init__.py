"""Boundary-element solver for the fractional Dirichlet problem.

Solves the exterior-data problem for the fractional Laplacian on the
complement of a closed Lipschitz curve in the plane by a single layer
ansatz: the density ``phi`` solves the first-kind integral equation
``S_s phi = f`` on the curve, and the field ``u = S_s phi`` is then
s-harmonic off the curve with trace ``f``.

Typical use::

    import fraclap

    mesh = fraclap.mesh_circle(128)
    params = fraclap.FracParams(s=0.75)
    matrix = fraclap.assemble(mesh, params)
    rhs = fraclap.galerkin_rhs(mesh, fraclap.constant_trace(1.0))
    density = fraclap.solve_dirichlet(matrix, rhs)
    u = fraclap.potential_evaluator(density.coeffs, mesh, params)
"""

from .assembly import (
    GalerkinMatrix,
    assemble,
    assemble_cross,
    eval_potential,
    interaction_matrix,
    panel_pair_integral,
    potential_evaluator,
    read_matrix,
    write_matrix,
)
from .errors import (
    ConfigError,
    FraclapError,
    MeshError,
    QuadratureError,
    SingularOperatorError,
)
from .geometry import (
    BoundaryMesh,
    Panel,
    distance_to_boundary,
    mesh_circle,
    mesh_polygon,
    panel_distances,
    read_mesh,
    refine,
    write_mesh,
)
from .kernel import FracParams, gamma_2s, riesz_constant, semigroup_residual
from .quadrature import QuadratureConfig
from .solve import (
    BoundaryData,
    DensityVector,
    FieldSample,
    constant_trace,
    cosine_mode_trace,
    discrete_l2,
    evaluate_field,
    galerkin_rhs,
    polynomial_trace,
    read_solution,
    slobodeckij_seminorm,
    solve_dirichlet,
    trace_residual,
    write_solution,
)
from .validation import (
    BallMeanValueRule,
    CircleSymbol,
    ball_mean_value,
    circle_symbol,
    convergence_study,
    decay_profile,
    energy_form,
    galerkin_circle_eigenvalues,
    gaussian_identity_gap,
    refined_trace_error,
    run_validation_suite,
)

__version__ = "0.1.0"

__all__ = [
    "BallMeanValueRule",
    "BoundaryData",
    "BoundaryMesh",
    "CircleSymbol",
    "ConfigError",
    "DensityVector",
    "FieldSample",
    "FracParams",
    "FraclapError",
    "GalerkinMatrix",
    "MeshError",
    "Panel",
    "QuadratureConfig",
    "QuadratureError",
    "SingularOperatorError",
    "assemble",
    "assemble_cross",
    "ball_mean_value",
    "circle_symbol",
    "constant_trace",
    "convergence_study",
    "cosine_mode_trace",
    "decay_profile",
    "discrete_l2",
    "distance_to_boundary",
    "energy_form",
    "eval_potential",
    "evaluate_field",
    "galerkin_circle_eigenvalues",
    "galerkin_rhs",
    "gamma_2s",
    "gaussian_identity_gap",
    "interaction_matrix",
    "mesh_circle",
    "mesh_polygon",
    "panel_distances",
    "panel_pair_integral",
    "polynomial_trace",
    "potential_evaluator",
    "read_matrix",
    "read_mesh",
    "read_solution",
    "refine",
    "refined_trace_error",
    "riesz_constant",
    "run_validation_suite",
    "semigroup_residual",
    "slobodeckij_seminorm",
    "solve_dirichlet",
    "trace_residual",
    "write_matrix",
    "write_mesh",
    "write_solution",
]
