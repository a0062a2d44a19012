"""Independent checks of the solver against analytically known behavior.

Everything here has a reference value that does not come from the Galerkin
pipeline: the circle symbol (an explicit 1D integral), the exit law of the
isotropic 2s-stable process from a disk (an explicit density), far-field
decay rates, the Fourier-side Gaussian identity for the kernel constant,
and positivity of the energy form.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh
from scipy.special import beta as _beta, roots_jacobi

from . import geometry, solve
from .assembly import assemble, assemble_cross, eval_potential, potential_evaluator
from .kernel import FracParams, riesz_constant
from .quadrature import QuadratureConfig, gauss_rule, geometric_panels

# ---------------------------------------------------------------------------
# circle symbol
# ---------------------------------------------------------------------------


class CircleSymbol:
    """Eigenvalues of the single layer trace operator on a circle.

    On the circle of radius R the operator diagonalizes over angular modes;
    the eigenvalue of ``cos(k theta)`` is

        lambda_k = c(2, 2s) R^(2s-1) int_0^{2pi} (2 sin(t/2))^(2s-2) cos(kt) dt.

    The endpoint singularity ``t^(2s-2)`` is absorbed into a Gauss-Jacobi
    weight, making the rule spectrally accurate; ``order`` points give
    ~1e-12 relative accuracy already at the default.
    """

    def __init__(self, s, radius=1.0, order=48):
        self.params = FracParams(s)
        if radius <= 0.0:
            raise ValueError(f"radius must be positive, got {radius}")
        self.radius = float(radius)
        self.order = int(order)
        x, w = roots_jacobi(self.order, 0.0, 2.0 * s - 2.0)
        self._t = 0.5 * np.pi * (x + 1.0)
        self._w = w * (np.pi / 2.0) ** (2.0 * s - 1.0)
        self._smooth = (2.0 * np.sin(self._t / 2.0) / self._t) ** (2.0 * s - 2.0)

    def value(self, k):
        """``lambda_k``; depends on ``|k|`` only and is positive."""
        k = abs(int(k))
        s = self.params.s
        integral = float(self._w @ (self._smooth * np.cos(k * self._t)))
        return self.params.constant * self.radius ** (2.0 * s - 1.0) * 2.0 * integral

    def __call__(self, k):
        return self.value(k)


def circle_symbol(k, s, radius=1.0, order=48):
    """Convenience wrapper building a :class:`CircleSymbol` for one mode."""
    return CircleSymbol(s, radius=radius, order=order).value(k)


def circle_symbol_closed_form_s34(radius=1.0):
    """``lambda_0`` at ``s = 3/4`` in closed form: ``c(2, 3/2) sqrt(2) B(1/4, 1/2)``."""
    return riesz_constant(2, 1.5) * radius ** 0.5 * np.sqrt(2.0) * _beta(0.25, 0.5)


def galerkin_circle_eigenvalues(matrix, mesh):
    """Eigenvalues of a circulant circle matrix per angular mode, over h.

    For the uniform circle mesh the Galerkin matrix is circulant; its
    eigenvalue for mode ``k`` equals ``h * lambda_k + O(h^3)`` where ``h``
    is the chord length, so dividing by ``h`` recovers the symbol.
    Returns the array ``mu_k / h`` for ``k = 0 .. N-1``.
    """
    h = float(mesh.lengths[0])
    return np.real(np.fft.fft(matrix.entries[0])) / h


# ---------------------------------------------------------------------------
# mean value rule for the exit law of the 2s-stable process from a disk
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BallMeanValueRule:
    """Quadrature for ``E[u(X_tau)]``, the process started at a disk center.

    The exit distribution of the isotropic 2s-stable process from the disk
    ``B_r(z)`` started at ``z`` has density

        K(y) = (sin(pi s) / pi^2) * r^(2s) * (|y-z|^2 - r^2)^(-s) |y-z|^(-2)

    on ``|y - z| > r``.  Nodes are polar about ``z``: an even uniform
    angular grid and a radial grid whose near band ``(r, 2r]`` uses a
    Gauss-Jacobi rule absorbing the ``(rho - r)^(-s)`` endpoint weight and
    whose far band uses geometrically growing Gauss panels, truncated where
    the kernel tail holds less than ``tail_fraction`` of the total mass.
    Weights are renormalized to sum to one exactly, so constants are
    reproduced exactly.

    Applied to a function that is s-harmonic in the (closed) disk and
    globally defined, the rule reproduces the center value.
    """

    center: np.ndarray
    radius: float
    s: float
    nodes: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)
    n_angular: int = 64
    jacobi_order: int = 24
    gauss_order: int = 8
    tail_fraction: float = 1e-4

    def __post_init__(self):
        z = np.asarray(self.center, dtype=float).reshape(2)
        object.__setattr__(self, "center", z)
        r, s = float(self.radius), float(self.s)
        if not r > 0.0:
            raise ValueError(f"radius must be positive, got {r}")
        FracParams(s)  # validates the range of s
        if self.n_angular < 4 or self.n_angular % 2:
            raise ValueError("n_angular must be an even integer >= 4")
        # truncation: the relative tail mass beyond rho_max is
        # ~ (sin(pi s) / (pi s)) (r / rho_max)^(2s)
        rho_max = r * (np.sin(np.pi * s) / (s * np.pi * self.tail_fraction)) ** (1.0 / (2.0 * s))
        band = 2.0 * r
        xj, wj = roots_jacobi(self.jacobi_order, 0.0, -s)
        xj = 0.5 * (xj + 1.0)
        wj = wj * 0.5 ** (1.0 - s)
        rho_near = r + (band - r) * xj
        w_near = (band - r) ** (1.0 - s) * wj * (rho_near + r) ** (-s) / rho_near
        gx, gw = gauss_rule(self.gauss_order)
        rho_far, w_far = [], []
        for lo, hi in geometric_panels(band, max(rho_max, band * 1.0000001)):
            rv = lo + (hi - lo) * gx
            rho_far.append(rv)
            w_far.append((hi - lo) * gw * (rv * rv - r * r) ** (-s) / rv)
        rho = np.concatenate([rho_near, *rho_far])
        w_r = np.concatenate([w_near, *w_far])
        w_r *= (np.sin(np.pi * s) / np.pi ** 2) * r ** (2.0 * s) * 2.0 * np.pi
        theta = 2.0 * np.pi * np.arange(self.n_angular) / self.n_angular
        ring = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        nodes = (z[None, None, :] + rho[:, None, None] * ring[None, :, :]).reshape(-1, 2)
        weights = np.repeat(w_r / self.n_angular, self.n_angular)
        weights = weights / weights.sum()
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def apply(self, u):
        """Weighted mean of ``u`` over the exit law; ``u`` maps (m,2) -> (m,)."""
        return float(self.weights @ np.asarray(u(self.nodes), dtype=float))


def ball_mean_value(u, center, radius, s, **rule_kwargs):
    """One-shot :class:`BallMeanValueRule` application."""
    return BallMeanValueRule(center=np.asarray(center, float), radius=radius, s=s,
                             **rule_kwargs).apply(u)


# ---------------------------------------------------------------------------
# decay, energy
# ---------------------------------------------------------------------------


def decay_profile(density, mesh, radii, direction=(1.0, 0.0), quad=QuadratureConfig()):
    """Potential values along a ray with the far-field decay compensated.

    Returns an array of rows ``(radius, value, value * radius^(2-2s))``.
    The compensated column converges to a constant (for densities with
    nonzero total mass) since the potential decays like ``|x|^(2s-2)``.
    Radii must exceed twice the mesh diameter so the far-field rule applies.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 2.0 * mesh.diameter):
        raise ValueError("decay radii must exceed twice the mesh diameter")
    e = np.asarray(direction, dtype=float)
    e = e / np.hypot(e[0], e[1])
    pts = radii[:, None] * e[None, :]
    vals = eval_potential(density.coeffs, mesh, density.params, pts, quad)
    s = density.params.s
    return np.column_stack([radii, vals, vals * radii ** (2.0 - 2.0 * s)])


def energy_form(matrix, coeffs):
    """Discrete Riesz energy ``phi^T A phi`` (positive for nonzero densities)."""
    v = coeffs.coeffs if isinstance(coeffs, solve.DensityVector) else np.asarray(coeffs, float)
    return float(v @ matrix.entries @ v)


# ---------------------------------------------------------------------------
# Fourier-side identity for the kernel constant
# ---------------------------------------------------------------------------


def radial_gauss_moment(a, t_lo=-300.0, t_hi=4.0, n=200001):
    """``int_0^inf r^a exp(-pi r^2) dr`` by trapezoid in logarithmic radius.

    The substitution ``r = e^t`` turns the integrand into a smooth, rapidly
    decaying function of ``t``, so the trapezoid rule converges to machine
    precision.  Deliberately avoids Gamma-function evaluations so it can
    serve as an independent reference for :func:`fraclap.kernel.riesz_constant`.
    """
    if not a > -1.0:
        raise ValueError(f"moment requires a > -1, got {a}")
    t = np.linspace(t_lo, t_hi, n)
    return float(np.trapezoid(np.exp((a + 1.0) * t - np.pi * np.exp(2.0 * t)), t))


def gaussian_identity_gap(sigma):
    """Relative gap in the self-dual Gaussian pairing of the Riesz kernel.

    For ``psi(x) = exp(-pi |x|^2)`` (its own Fourier transform), the kernel
    normalization is characterized by

        int c(2,sigma) |x|^(sigma-2) psi(x) dx  =  int |xi|^(-sigma) psi(xi) dxi.

    Both sides reduce to radial moments; they are evaluated here by
    independent quadrature (no Gamma functions) and the relative gap is
    returned.  A correct constant gives ~1e-15.
    """
    lhs = riesz_constant(2, sigma) * 2.0 * np.pi * radial_gauss_moment(sigma - 1.0)
    rhs = 2.0 * np.pi * radial_gauss_moment(1.0 - sigma)
    return abs(lhs - rhs) / abs(rhs)


# ---------------------------------------------------------------------------
# refinement-based trace error and convergence study
# ---------------------------------------------------------------------------


def refined_trace_error(mesh, density, data, quad=QuadratureConfig()):
    """Trace residual of a solved density tested against the refined mesh.

    The coarse Galerkin solve makes the residual orthogonal to its own test
    space; testing ``S phi - f`` against the once-refined mesh exposes the
    genuine discretization error.  Returns ``(l2_relative, slobodeckij)``
    where the seminorm of the pointwise residual is taken at the energy
    index ``alpha = s - 1/2``.
    """
    params = density.params
    fine = geometry.refine(mesh)
    B = assemble_cross(fine, mesh, params, quad)
    rhs_fine = solve.galerkin_rhs(fine, data)
    r = B @ density.coeffs - rhs_fine
    h = fine.lengths
    l2 = float(np.sqrt(np.sum(r * r / h)))
    ref = float(np.sqrt(np.sum(rhs_fine ** 2 / h)))
    l2_rel = l2 / ref if ref > 0.0 else l2
    semi = solve.slobodeckij_seminorm(r / h, fine, params.s - 0.5, quad)
    return l2_rel, semi


def convergence_study(sizes, s, data, geometry_factory=None, quad=QuadratureConfig()):
    """Solve at a sequence of resolutions and report refined-mesh errors.

    Returns one dict per size with keys ``N``, ``L2_trace_error``,
    ``slobodeckij_error`` and ``runtime`` (seconds for assemble + solve).
    ``geometry_factory(N)`` defaults to the unit circle.
    """
    if geometry_factory is None:
        geometry_factory = geometry.mesh_circle
    params = FracParams(s)
    rows = []
    for N in sizes:
        mesh = geometry_factory(int(N))
        t0 = time.perf_counter()
        matrix = assemble(mesh, params, quad)
        rhs = solve.galerkin_rhs(mesh, data)
        density = solve.solve_dirichlet(matrix, rhs)
        runtime = time.perf_counter() - t0
        l2_rel, semi = refined_trace_error(mesh, density, data, quad)
        rows.append(
            {"N": int(N), "L2_trace_error": l2_rel, "slobodeckij_error": semi, "runtime": runtime}
        )
    return rows


# ---------------------------------------------------------------------------
# bundled validation suite (used by the CLI `validate` command)
# ---------------------------------------------------------------------------


def _record(name, inputs, value, reference, tolerance):
    ok = bool(abs(value - reference) <= tolerance)
    return {
        "name": name,
        "inputs": inputs,
        "value": float(value),
        "reference": float(reference),
        "tolerance": float(tolerance),
        "pass": ok,
    }


def run_validation_suite(s_values=(0.6, 0.75, 0.9), circle_sizes=(32, 64), polygon_size=48,
                         quad=QuadratureConfig(), rng_seed=20240801):
    """Run every numerically checkable identity; return a list of records."""
    from .kernel import semigroup_residual

    records = []
    for sigma in (0.2, 0.5, 1.0, 1.5, 1.8):
        records.append(_record(
            "kernel_gaussian_pairing", {"sigma": sigma},
            gaussian_identity_gap(sigma), 0.0, 1e-10,
        ))
    for s1, s2 in ((0.6, 0.6), (0.8, 0.4), (0.5, 1.0)):
        records.append(_record(
            "kernel_semigroup", {"s1": s1, "s2": s2, "x": [1.0, 0.0]},
            semigroup_residual(s1, s2, (1.0, 0.0)), 0.0, 1e-3,
        ))
    records.append(_record(
        "circle_symbol_closed_form", {"s": 0.75, "k": 0},
        circle_symbol(0, 0.75), circle_symbol_closed_form_s34(), 1e-8 * circle_symbol_closed_form_s34(),
    ))

    rng = np.random.default_rng(rng_seed)
    square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    ell = [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0)]
    meshes = [geometry.mesh_circle(N) for N in circle_sizes]
    meshes += [geometry.mesh_polygon(square, polygon_size), geometry.mesh_polygon(ell, polygon_size)]
    for mesh in meshes:
        for s in s_values:
            matrix = assemble(mesh, FracParams(s), quad)
            ev_min = float(eigvalsh(matrix.entries)[0])
            asym = float(np.max(np.abs(matrix.entries - matrix.entries.T)))
            records.append(_record(
                "matrix_symmetry", {"mesh": mesh.mesh_hash[:12], "N": mesh.n_panels, "s": s},
                asym, 0.0, 1e-12 * float(np.max(np.abs(matrix.entries))),
            ))
            records.append(_record(
                "matrix_positive_definite", {"mesh": mesh.mesh_hash[:12], "N": mesh.n_panels, "s": s},
                min(ev_min, 0.0), 0.0, 0.0,
            ))
            phis = rng.standard_normal((10, mesh.n_panels))
            worst = min(energy_form(matrix, phi) for phi in phis)
            records.append(_record(
                "energy_positive", {"mesh": mesh.mesh_hash[:12], "N": mesh.n_panels, "s": s},
                min(worst, 0.0), 0.0, 0.0,
            ))

    # circle pipeline at moderate size: symbol consistency, solve, mean value,
    # decay
    s = 0.75
    N = max(circle_sizes)
    params = FracParams(s)
    mesh = geometry.mesh_circle(N)
    matrix = assemble(mesh, params, quad)
    sym = CircleSymbol(s)
    mu = galerkin_circle_eigenvalues(matrix, mesh)
    for k in (0, 1, 2):
        lam = sym.value(k)
        records.append(_record(
            "circle_eigenvalue_vs_symbol", {"N": N, "s": s, "k": k},
            float(mu[k]), lam, 0.02 * lam,
        ))
    data = solve.BoundaryData.from_callable(
        lambda x: 1.0 + 0.5 * np.cos(2.0 * np.arctan2(x[:, 1], x[:, 0]))
    )
    rhs = solve.galerkin_rhs(mesh, data)
    density = solve.solve_dirichlet(matrix, rhs)
    records.append(_record(
        "solve_trace_residual", {"N": N, "s": s},
        solve.trace_residual(matrix, density, rhs, mesh), 0.0, 1e-10,
    ))
    u = potential_evaluator(density.coeffs, mesh, params, quad)
    rule = BallMeanValueRule(center=np.zeros(2), radius=0.3, s=s)
    records.append(_record(
        "ball_mean_value_constant", {"r": 0.3, "s": s},
        rule.apply(lambda y: np.ones(len(y))), 1.0, 1e-12,
    ))
    x0 = np.array([1.7, 1.1])
    harmonic = lambda y: np.linalg.norm(y - x0, axis=-1) ** (2.0 * s - 2.0)
    records.append(_record(
        "ball_mean_value_point_source", {"r": 0.3, "s": s, "source": x0.tolist()},
        rule.apply(harmonic) / float(harmonic(np.zeros((1, 2)))[0]), 1.0, 1e-2,
    ))
    z = np.array([0.3, -0.2])
    r = 0.5 * geometry.distance_to_boundary(mesh, z)
    uz = float(u(z[None, :])[0])
    records.append(_record(
        "ball_mean_value_solved_field", {"N": N, "s": s, "z": z.tolist()},
        ball_mean_value(u, z, r, s) / uz, 1.0, 1e-2,
    ))
    prof = decay_profile(density, mesh, [100.0, 200.0], quad=quad)
    records.append(_record(
        "far_field_decay", {"N": N, "s": s, "radii": [100.0, 200.0]},
        prof[1, 2] / prof[0, 2], 1.0, 0.02,
    ))
    return records
