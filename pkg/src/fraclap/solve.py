"""Dirichlet solves: right-hand sides, densities, traces, field evaluation.

The discrete problem is ``A phi = rhs`` with ``A`` from
:func:`fraclap.assembly.assemble` and ``rhs_i = int_{panel_i} f ds``.  The
matrix is symmetric positive definite on valid meshes, so the primary path
is a Cholesky factorization with one round of iterative refinement; a
symmetric-pivoting solve is the diagnostic fallback.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve as _lin_solve
from threadpoolctl import threadpool_limits

from .assembly import GalerkinMatrix, eval_potential, interaction_matrix
from .errors import SingularOperatorError
from .geometry import panel_distances
from .kernel import FracParams
from .quadrature import QuadratureConfig, gauss_rule

_RESIDUAL_TOL = 1e-10


class BoundaryData:
    """Dirichlet trace data, either per-panel averages or a callable."""

    def __init__(self, fn=None, panel_averages=None):
        if (fn is None) == (panel_averages is None):
            raise ValueError("provide exactly one of fn / panel_averages")
        self.fn = fn
        self.panel_averages = None if panel_averages is None else np.asarray(panel_averages, float)

    @classmethod
    def from_callable(cls, fn):
        """``fn(points)`` maps an (m, 2) array to m trace values."""
        return cls(fn=fn)

    @classmethod
    def from_panel_averages(cls, values):
        return cls(panel_averages=values)

    def averages(self, mesh, gauss_order=8):
        """Per-panel mean values of the trace."""
        if self.panel_averages is not None:
            if self.panel_averages.shape != (mesh.n_panels,):
                raise ValueError(
                    f"panel averages have shape {self.panel_averages.shape}, mesh has {mesh.n_panels} panels"
                )
            return self.panel_averages
        gx, gw = gauss_rule(gauss_order)
        X = mesh.a[:, None, :] + gx[None, :, None] * (mesh.b - mesh.a)[:, None, :]
        vals = np.asarray(self.fn(X.reshape(-1, 2)), dtype=float).reshape(mesh.n_panels, len(gx))
        return vals @ gw


def constant_trace(value):
    return BoundaryData.from_callable(lambda x: np.full(len(np.atleast_2d(x)), float(value)))


def cosine_mode_trace(k):
    """``f(x) = cos(k * atan2(x2, x1))``, the angular cosine mode."""
    k = int(k)
    return BoundaryData.from_callable(
        lambda x: np.cos(k * np.arctan2(np.atleast_2d(x)[:, 1], np.atleast_2d(x)[:, 0]))
    )


def polynomial_trace(coeffs):
    """Quadratic polynomial trace ``c00 + c10 x1 + c01 x2 + c20 x1^2 + c11 x1 x2 + c02 x2^2``."""
    c00, c10, c01, c20, c11, c02 = (float(c) for c in coeffs)

    def fn(x):
        x = np.atleast_2d(x)
        x1, x2 = x[:, 0], x[:, 1]
        return c00 + c10 * x1 + c01 * x2 + c20 * x1 ** 2 + c11 * x1 * x2 + c02 * x2 ** 2

    return BoundaryData.from_callable(fn)


def galerkin_rhs(mesh, data, gauss_order=8):
    """Moments ``rhs_i = int_{panel_i} f ds`` (panel Gauss rule, order 8)."""
    return mesh.lengths * data.averages(mesh, gauss_order)


@dataclass(frozen=True, eq=False)
class DensityVector:
    """Piecewise-constant boundary density with provenance tags."""

    coeffs: np.ndarray
    mesh_hash: str
    params: FracParams

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1:
            raise ValueError(f"coefficients must be a vector, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("density coefficients contain non-finite values")
        object.__setattr__(self, "coeffs", c)
        self.coeffs.flags.writeable = False

    def __len__(self):
        return len(self.coeffs)


def solve_dirichlet(matrix, rhs):
    """Solve ``A phi = rhs`` to a relative residual of at most 1e-10.

    Cholesky first (the operator is positive definite); one step of
    iterative refinement absorbs rounding on ill-conditioned meshes.  If the
    factorization fails, a symmetric indefinite solve is attempted and a
    diagnostic warning is emitted, since that indicates a mesh or parameter
    combination outside the operator's guaranteed regime.
    """
    if not isinstance(matrix, GalerkinMatrix):
        raise TypeError("solve_dirichlet expects a GalerkinMatrix")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (matrix.n_panels,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({matrix.n_panels},)")
    A = matrix.entries
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        coeffs = np.zeros(matrix.n_panels)
        return DensityVector(coeffs=coeffs, mesh_hash=matrix.mesh_hash, params=matrix.params)
    with threadpool_limits(limits=1):
        try:
            factor = cho_factor(A)
            phi = cho_solve(factor, rhs)
            for _ in range(2):
                resid = rhs - A @ phi
                if np.linalg.norm(resid) <= 1e-14 * rhs_norm:
                    break
                phi = phi + cho_solve(factor, resid)
        except np.linalg.LinAlgError:
            warnings.warn(
                "Cholesky factorization failed; the Galerkin matrix is not "
                "numerically positive definite. Falling back to a pivoted "
                "symmetric solve.",
                RuntimeWarning,
                stacklevel=2,
            )
            try:
                phi = _lin_solve(A, rhs, assume_a="sym")
            except np.linalg.LinAlgError as exc:
                raise SingularOperatorError("Galerkin matrix is singular") from exc
        resid_rel = float(np.linalg.norm(rhs - A @ phi)) / rhs_norm
    if not np.isfinite(resid_rel) or resid_rel > _RESIDUAL_TOL:
        raise SingularOperatorError(
            f"solver residual {resid_rel:.3e} exceeds {_RESIDUAL_TOL:.0e}; "
            "matrix is numerically singular"
        )
    return DensityVector(coeffs=phi, mesh_hash=matrix.mesh_hash, params=matrix.params)


def trace_residual(matrix, density, rhs, mesh):
    """Relative discrete L2(boundary) residual of the trace equation.

    The Galerkin residual ``r = A phi - rhs`` holds panel integrals; the
    corresponding piecewise-constant function has values ``r_i / h_i``, so
    its squared L2 norm is ``sum r_i^2 / h_i``.  The result is normalized by
    the same norm of ``rhs`` (absolute if ``rhs`` vanishes).
    """
    coeffs = density.coeffs if isinstance(density, DensityVector) else np.asarray(density, float)
    if isinstance(density, DensityVector) and density.mesh_hash != matrix.mesh_hash:
        raise ValueError("density and matrix come from different meshes")
    if matrix.mesh_hash != mesh.mesh_hash:
        raise ValueError("matrix and mesh hashes disagree")
    r = matrix.entries @ coeffs - np.asarray(rhs, float)
    h = mesh.lengths
    num = float(np.sqrt(np.sum(r * r / h)))
    den = float(np.sqrt(np.sum(np.asarray(rhs, float) ** 2 / h)))
    return num / den if den > 0.0 else num


def discrete_l2(values, mesh):
    """L2(boundary) norm of a piecewise-constant function given by panel values."""
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(np.sum(mesh.lengths * values ** 2)))


def slobodeckij_seminorm(values, mesh, alpha, quad=QuadratureConfig()):
    """Discrete Slobodeckij seminorm of panel values on the boundary curve.

    Computes ``( sum_{i != j} |v_i - v_j|^2 J_ij )^(1/2)`` with
    ``J_ij = int_{panel_i} int_{panel_j} |P - Q|^(-(1 + 2 alpha))``.
    Identical-panel pairs contribute nothing for piecewise constants.  For
    ``alpha >= 1/2`` a jump across a shared vertex makes the true seminorm
    infinite, and ``inf`` is returned in that case.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_panels,):
        raise ValueError(f"expected {mesh.n_panels} panel values, got shape {values.shape}")
    if alpha >= 0.5:
        # the curve is closed, so a non-constant piecewise-constant function
        # jumps across at least one shared vertex and the seminorm diverges
        return 0.0 if np.all(values == values[0]) else float("inf")
    power = -(1.0 + 2.0 * alpha)
    with threadpool_limits(limits=1):
        with np.errstate(divide="ignore"):
            J = interaction_matrix(mesh, mesh, power, quad, diagonal=False)
    diff2 = (values[:, None] - values[None, :]) ** 2
    terms = np.where(diff2 == 0.0, 0.0, diff2 * J)
    total = float(np.sum(terms))
    return float(np.sqrt(total)) if np.isfinite(total) else float("inf")


@dataclass(frozen=True)
class FieldSample:
    """One off-boundary evaluation of the potential."""

    point: tuple
    dist: float
    value: float

    def __post_init__(self):
        if not self.dist > 0.0:
            raise ValueError("field samples must lie strictly off the boundary")


def evaluate_field(density, mesh, points, quad=QuadratureConfig()):
    """Evaluate the potential of ``density`` at ``points``.

    Returns a list aligned with the input: a :class:`FieldSample` per valid
    point, or ``None`` for points on the boundary curve (those are rejected
    individually; the rest are still computed).
    """
    if density.mesh_hash != mesh.mesh_hash:
        raise ValueError("density was solved on a different mesh")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dists = panel_distances(mesh, pts).min(axis=1)
    ok = dists > 1e-12 * mesh.diameter
    samples = [None] * len(pts)
    if np.any(ok):
        vals = eval_potential(density.coeffs, mesh, density.params, pts[ok], quad)
        for idx, dist, val in zip(np.nonzero(ok)[0], dists[ok], np.atleast_1d(vals)):
            samples[idx] = FieldSample(point=(float(pts[idx, 0]), float(pts[idx, 1])),
                                       dist=float(dist), value=float(val))
    return samples


def write_solution(path, density, mesh, residual=None):
    """JSON solution artifact; floats round-trip exactly via repr."""
    doc = {
        "format": "fraclap-solution",
        "s": density.params.s,
        "mesh_hash": density.mesh_hash,
        "n_panels": len(density),
        "trace_residual": residual,
        "coefficients": [float(c) for c in density.coeffs],
    }
    if mesh is not None and mesh.mesh_hash != density.mesh_hash:
        raise ValueError("mesh does not match the density")
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def read_solution(path):
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != "fraclap-solution":
        raise ValueError(f"{path}: not a solution artifact")
    return DensityVector(
        coeffs=np.array(doc["coefficients"], dtype=float),
        mesh_hash=doc["mesh_hash"],
        params=FracParams(doc["s"]),
    )
