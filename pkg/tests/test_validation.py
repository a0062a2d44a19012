"""Tests for the analytic cross-checks: circle symbol, exit-law mean value,
far-field decay, energy positivity, and the bundled validation suite."""

import numpy as np
import pytest

import oracles
from fraclap.assembly import assemble
from fraclap.geometry import mesh_circle
from fraclap.kernel import FracParams
from fraclap.solve import DensityVector, cosine_mode_trace, galerkin_rhs, solve_dirichlet
from fraclap.validation import (
    BallMeanValueRule,
    CircleSymbol,
    ball_mean_value,
    circle_symbol,
    circle_symbol_closed_form_s34,
    convergence_study,
    decay_profile,
    energy_form,
    galerkin_circle_eigenvalues,
    gaussian_identity_gap,
    radial_gauss_moment,
    refined_trace_error,
    run_validation_suite,
)

S_VALUES = (0.6, 0.75, 0.9)


# ---------------------------------------------------------------------------
# circle symbol


@pytest.mark.parametrize("s", S_VALUES)
def test_symbol_positive_and_decreasing(s):
    sym = CircleSymbol(s)
    vals = np.array([sym.value(k) for k in range(33)])
    assert np.all(vals > 0.0)
    assert np.all(np.diff(vals) < 0.0)


def test_symbol_depends_on_mode_magnitude_only():
    sym = CircleSymbol(0.75)
    for k in (1, 2, 7):
        assert sym.value(-k) == sym.value(k)


def test_symbol_closed_form_at_three_quarters():
    ref = circle_symbol_closed_form_s34()
    # frozen from the Beta-function expression sqrt(2) c(2,3/2) B(1/4,1/2)
    assert abs(ref - 38.8919241107183) < 1e-10
    assert abs(circle_symbol(0, 0.75) - ref) < 1e-12 * ref


@pytest.mark.parametrize("s", S_VALUES)
def test_symbol_quadrature_is_converged(s):
    # ~1e-11 relative is the roundoff floor of the Jacobi rule at the most
    # singular exponent; consumers compare at 0.5% or looser
    coarse = CircleSymbol(s, order=48)
    fine = CircleSymbol(s, order=96)
    for k in (0, 1, 5, 16):
        assert abs(coarse.value(k) - fine.value(k)) < 1e-10 * fine.value(k)


def test_symbol_radius_scaling():
    s = 0.6
    base = CircleSymbol(s)
    scaled = CircleSymbol(s, radius=2.5)
    for k in (0, 3):
        assert abs(scaled.value(k) - 2.5 ** (2 * s - 1) * base.value(k)) < 1e-13 * base.value(k)
    with pytest.raises(ValueError, match="radius"):
        CircleSymbol(s, radius=0.0)


def test_circulant_eigenvalues_match_symbol(fleet):
    mesh, matrix = fleet("circle", 128, 0.75)
    mu = galerkin_circle_eigenvalues(matrix, mesh)
    assert mu.shape == (128,)
    assert np.all(mu > 0.0)
    # the circulant spectrum is symmetric: mode k pairs with mode N - k
    assert np.allclose(mu[1:], mu[1:][::-1], rtol=1e-12)
    sym = CircleSymbol(0.75)
    for k in (0, 1, 2, 4):
        assert abs(mu[k] - sym.value(k)) < 0.005 * sym.value(k)


@pytest.mark.parametrize("s", S_VALUES)
def test_circulant_eigenvalue_error_vanishes_under_refinement(s, fleet):
    sym = CircleSymbol(s)
    lam = sym.value(0)
    errs = []
    for n in (32, 64, 128):
        mesh, matrix = fleet("circle", n, s)
        mu = galerkin_circle_eigenvalues(matrix, mesh)
        errs.append(abs(mu[0] - lam))
    # at least a full extra factor of ~3 per mesh halving (observed rates sit
    # between h^2 and h^(1+2s) depending on the mode)
    assert errs[1] < errs[0] / 3.0
    assert errs[2] < errs[1] / 3.0
    assert errs[2] < 1e-3 * lam


# ---------------------------------------------------------------------------
# exit-law mean value


@pytest.mark.parametrize("s", S_VALUES)
def test_ball_rule_basic_invariants(s):
    z = np.array([0.1, -0.2])
    rule = BallMeanValueRule(center=z, radius=0.3, s=s)
    assert np.all(rule.weights > 0.0)
    assert abs(rule.weights.sum() - 1.0) < 1e-14
    # all nodes live strictly outside the open disk
    assert np.all(np.linalg.norm(rule.nodes - z, axis=1) > 0.3)
    assert abs(rule.apply(lambda y: np.ones(len(y))) - 1.0) < 1e-14
    # odd integrands cancel on the even angular grid
    assert abs(rule.apply(lambda y: y[:, 0] - z[0])) < 1e-12


@pytest.mark.parametrize("s", S_VALUES)
def test_ball_rule_reproduces_point_source(s):
    # the kernel power potential of a point charge outside the disk is
    # mean-value exact for the exit law
    z = np.array([0.1, -0.2])
    x0 = np.array([1.7, 1.1])
    rule = BallMeanValueRule(center=z, radius=0.3, s=s)
    got = rule.apply(lambda y: np.linalg.norm(y - x0, axis=-1) ** (2 * s - 2))
    ref = float(np.linalg.norm(z - x0) ** (2 * s - 2))
    assert abs(got - ref) < 1e-3 * ref


def test_ball_rule_detects_non_harmonic_function():
    z = np.array([0.1, -0.2])
    rule = BallMeanValueRule(center=z, radius=0.3, s=0.75)
    got = rule.apply(lambda y: np.exp(-np.sum((y - z) ** 2, axis=-1)))
    assert abs(got - 1.0) > 0.05  # a Gaussian bump is not mean-value exact


def test_ball_rule_argument_validation():
    with pytest.raises(ValueError, match="radius"):
        BallMeanValueRule(center=np.zeros(2), radius=0.0, s=0.75)
    with pytest.raises(ValueError, match="n_angular"):
        BallMeanValueRule(center=np.zeros(2), radius=0.3, s=0.75, n_angular=63)
    with pytest.raises(ValueError, match="n_angular"):
        BallMeanValueRule(center=np.zeros(2), radius=0.3, s=0.75, n_angular=2)
    with pytest.raises(ValueError):
        BallMeanValueRule(center=np.zeros(2), radius=0.3, s=0.5)
    with pytest.raises(ValueError):
        BallMeanValueRule(center=np.zeros(2), radius=0.3, s=1.0)


def test_ball_mean_value_one_shot_matches_rule():
    z = (0.1, -0.2)
    u = lambda y: 1.0 + y[:, 0] ** 2
    direct = ball_mean_value(u, z, 0.3, 0.75)
    rule = BallMeanValueRule(center=np.array(z), radius=0.3, s=0.75)
    assert direct == rule.apply(u)


# ---------------------------------------------------------------------------
# far-field decay


def test_decay_profile_compensated_limit():
    s = 0.75
    mesh = mesh_circle(8)
    params = FracParams(s)
    dens = DensityVector(coeffs=np.ones(8), mesh_hash=mesh.mesh_hash, params=params)
    prof = decay_profile(dens, mesh, [300.0, 600.0, 1200.0])
    assert prof.shape == (3, 3)
    assert np.array_equal(prof[:, 0], [300.0, 600.0, 1200.0])
    # unit density: the compensated value tends to c(2,2s) * perimeter
    limit = params.constant * mesh.lengths.sum()
    rels = np.abs(prof[:, 2] - limit) / limit
    assert rels[0] < 1e-5
    assert rels[2] < rels[1] < rels[0]


def test_decay_profile_is_linear_in_the_density():
    mesh = mesh_circle(8)
    params = FracParams(0.6)
    d1 = DensityVector(coeffs=np.ones(8), mesh_hash=mesh.mesh_hash, params=params)
    d2 = DensityVector(coeffs=2.0 * np.ones(8), mesh_hash=mesh.mesh_hash, params=params)
    p1 = decay_profile(d1, mesh, [50.0, 100.0])
    p2 = decay_profile(d2, mesh, [50.0, 100.0])
    assert np.allclose(p2[:, 1], 2.0 * p1[:, 1], rtol=1e-14)


def test_decay_profile_rejects_near_radii():
    mesh = mesh_circle(8)  # diameter 2
    dens = DensityVector(coeffs=np.ones(8), mesh_hash=mesh.mesh_hash, params=FracParams(0.75))
    with pytest.raises(ValueError, match="twice the mesh diameter"):
        decay_profile(dens, mesh, [3.0, 300.0])


# ---------------------------------------------------------------------------
# energy form


def test_energy_form_positivity_and_scaling(fleet):
    mesh, matrix = fleet("circle", 32, 0.75)
    assert energy_form(matrix, np.zeros(32)) == 0.0
    rng = np.random.default_rng(5)
    for _ in range(20):
        v = rng.standard_normal(32)
        e = energy_form(matrix, v)
        assert e > 0.0
        assert abs(energy_form(matrix, 2.0 * v) - 4.0 * e) < 1e-12 * e
    dens = DensityVector(coeffs=np.ones(32), mesh_hash=mesh.mesh_hash, params=FracParams(0.75))
    assert energy_form(matrix, dens) == energy_form(matrix, np.ones(32))


# ---------------------------------------------------------------------------
# Fourier-side Gaussian identity


@pytest.mark.parametrize("sigma", [0.2, 0.5, 1.0, 1.5, 1.8])
def test_gaussian_identity_gap_is_tiny(sigma):
    assert gaussian_identity_gap(sigma) < 1e-12


@pytest.mark.parametrize("a", [-0.8, -0.5, 0.0, 0.8])
def test_radial_moment_vs_adaptive_oracle(a):
    mine = radial_gauss_moment(a)
    ref = oracles.gauss_moment(a)
    assert abs(mine - ref) < 1e-12 * abs(ref)


def test_radial_moment_rejects_divergent_power():
    with pytest.raises(ValueError, match="a > -1"):
        radial_gauss_moment(-1.0)


# ---------------------------------------------------------------------------
# refined-mesh error and convergence study


def test_refined_trace_error_decreases_under_refinement():
    s = 0.75
    data = cosine_mode_trace(2)
    errs = []
    for n in (16, 32):
        mesh = mesh_circle(n)
        matrix = assemble(mesh, FracParams(s))
        density = solve_dirichlet(matrix, galerkin_rhs(mesh, data))
        l2, semi = refined_trace_error(mesh, density, data)
        assert np.isfinite(semi) and semi >= 0.0
        errs.append(l2)
    assert errs[1] < 0.6 * errs[0]


def test_convergence_study_rows():
    rows = convergence_study((8, 16, 32), 0.75, cosine_mode_trace(2))
    assert [r["N"] for r in rows] == [8, 16, 32]
    for r in rows:
        assert set(r) == {"N", "L2_trace_error", "slobodeckij_error", "runtime"}
        assert r["runtime"] >= 0.0
        assert np.isfinite(r["slobodeckij_error"])
    l2 = [r["L2_trace_error"] for r in rows]
    assert l2[2] < l2[1] < l2[0]


# ---------------------------------------------------------------------------
# bundled suite


def test_validation_suite_small_fleet_passes():
    records = run_validation_suite(s_values=(0.75,), circle_sizes=(16, 32), polygon_size=16)
    assert len(records) >= 25
    for rec in records:
        assert set(rec) == {"name", "inputs", "value", "reference", "tolerance", "pass"}
        assert isinstance(rec["inputs"], dict)
        assert rec["pass"], f"validation record failed: {rec}"
    names = {rec["name"] for rec in records}
    assert {"kernel_gaussian_pairing", "kernel_semigroup", "circle_symbol_closed_form",
            "matrix_symmetry", "matrix_positive_definite", "energy_positive",
            "circle_eigenvalue_vs_symbol", "solve_trace_residual",
            "ball_mean_value_constant", "ball_mean_value_point_source",
            "ball_mean_value_solved_field", "far_field_decay"} <= names
