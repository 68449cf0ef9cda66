import numpy as np
import pytest
from numpy.testing import assert_allclose
from dataclasses import replace

from singlab.coefficients import CoefficientField, constant, poly_r2, unit_field
from singlab.exponents import ProblemParams
from singlab.glue import (
    UnitCutoff, approximate_solution, build_cutoff, build_glue, error_term,
    nonlinearity_Q,
)
from singlab.mesh import GridFunction, MeshResolutionError, graded_mesh
from singlab.modes import solver_mesh
from singlab.norms import weighted_holder_norm
from singlab.radial import ScaledFamily, solve_connection


@pytest.fixture(scope="module")
def prof():
    return solve_connection(2.0, 5, beta_target=1.0)


@pytest.fixture(scope="module")
def params():
    return ProblemParams(N=5, p=2.0, epsilon=0.005, sigma=0.5, R=1.0, nu=-1.75)


@pytest.fixture(scope="module")
def coeffs():
    return CoefficientField(a=poly_r2(1.0, 0.1), h=constant(1.0))


def test_cutoff_endpoint_values():
    chi = build_cutoff(0.5)
    assert_allclose(chi.value(np.array([0.25])), 1.0, atol=1e-12)
    assert_allclose(chi.value(np.array([0.5])), 0.0, atol=1e-12)
    assert_allclose(chi.value(np.array([0.1, 0.7])), [1.0, 0.0], atol=1e-14)


def test_cutoff_flat_ends():
    chi = build_cutoff(0.5)
    for r in (0.25, 0.5):
        assert abs(chi.d1(np.array([r]))[0]) < 1e-12
        assert abs(chi.d2(np.array([r]))[0]) < 1e-12


def test_cutoff_monotone_and_bounded():
    chi = build_cutoff(0.5)
    r = np.linspace(0.2, 0.6, 400)
    v = chi.value(r)
    assert np.all((0.0 <= v) & (v <= 1.0))
    assert np.all(chi.d1(r) <= 1e-15)


def test_cutoff_derivative_integrates_to_minus_one():
    chi = build_cutoff(0.5)
    r = np.linspace(0.25, 0.5, 20001)
    integral = np.trapezoid(chi.d1(r), r)
    assert_allclose(integral, -1.0, atol=1e-8)


def test_cutoff_derivatives_match_finite_differences():
    chi = build_cutoff(0.5)
    r = np.linspace(0.26, 0.49, 40)
    h = 1e-6
    fd1 = (chi.value(r + h) - chi.value(r - h)) / (2.0 * h)
    assert_allclose(chi.d1(r), fd1, rtol=1e-7, atol=1e-8)
    fd2 = (chi.d1(r + h) - chi.d1(r - h)) / (2.0 * h)
    assert_allclose(chi.d2(r), fd2, rtol=1e-6, atol=1e-6)


def test_approximate_solution_regions(params, prof):
    mesh = solver_mesh(params)
    ub = approximate_solution(params, prof, mesh)
    fam = ScaledFamily(prof, params.epsilon)
    r = mesh.r
    inner = r <= params.sigma / 4.0
    assert_allclose(ub.values[inner], fam.u(r[inner]), rtol=1e-13)
    outer = r >= params.sigma
    assert np.all(ub.values[outer] == 0.0)


def test_approximate_solution_outer_decay(prof):
    # sup over the cutoff annulus scales like eps^(N-2-2/(p-1)) = eps
    sups, eps_list = [], [0.02, 0.01, 0.005, 0.0025]
    for eps in eps_list:
        params = ProblemParams(N=5, p=2.0, epsilon=eps, sigma=0.5, R=1.0, nu=-1.75)
        mesh = solver_mesh(params)
        ub = approximate_solution(params, prof, mesh)
        sel = mesh.r >= params.sigma / 2.0
        sups.append(np.max(ub.values[sel]))
    slope = np.polyfit(np.log(eps_list), np.log(sups), 1)[0]
    assert_allclose(slope, 1.0, atol=0.05)


def test_error_term_diagnostic_mode_zero(prof):
    # chi = 1, a = 1, h = 0: u_eps is an exact solution, f vanishes identically
    params = ProblemParams(N=5, p=2.0, epsilon=0.005, sigma=0.5, R=1.0, nu=-1.75)
    mesh = solver_mesh(params)
    f = error_term(params, unit_field(), prof, mesh, cutoff=UnitCutoff())
    assert np.all(f.values == 0.0)


def test_error_term_pure_cutoff_support(params, prof):
    # a = 1, h = 0, real cutoff: only commutator terms survive, supported in
    # sigma/2 <= rho <= sigma, with sup <= C eps^(N - 2p/(p-1))
    sups, eps_list = [], [0.02, 0.01, 0.005, 0.0025]
    for eps in eps_list:
        par = replace(params, epsilon=eps)
        mesh = solver_mesh(par)
        f = error_term(par, unit_field(), prof, mesh)
        r = mesh.r
        inside = r < par.sigma / 2.0
        outside = r > par.sigma
        assert np.max(np.abs(f.values[inside])) == 0.0
        assert np.max(np.abs(f.values[outside])) == 0.0
        sups.append(np.max(np.abs(f.values)))
    slope = np.polyfit(np.log(eps_list), np.log(sups), 1)[0]
    assert_allclose(slope, 1.0, atol=0.05)      # N - 2p/(p-1) = 1 at (2,5)


def test_error_term_three_way_split(params, coeffs, prof):
    mesh = solver_mesh(params)
    f, parts = error_term(params, coeffs, prof, mesh, with_parts=True)
    total = parts.laplace_part + parts.drift_part + parts.h_part
    assert_allclose(f.values, total, rtol=0, atol=1e-300)
    # h-linearity: doubling h doubles the h-part and leaves the rest unchanged
    coeffs2 = CoefficientField(a=coeffs.a, h=constant(2.0))
    f2, parts2 = error_term(params, coeffs2, prof, mesh, with_parts=True)
    assert_allclose(parts2.h_part, 2.0 * parts.h_part, rtol=1e-14)
    assert_allclose(parts2.laplace_part, parts.laplace_part, rtol=0, atol=0)
    assert_allclose(parts2.drift_part, parts.drift_part, rtol=0, atol=0)


def test_error_term_under_resolved_mesh(params, coeffs, prof):
    mesh = graded_mesh(0.01, 0.5, 1.0, nodes_per_shell=16, dim=5)
    with pytest.raises(MeshResolutionError):
        error_term(params, coeffs, prof, mesh)


def test_error_decay_slope_acceptance_config(coeffs, prof):
    # || f_eps ||_{0,0,nu-2} decays at least like eps^(q - 0.1), q = 0.75
    eps_list = [0.02, 0.01, 0.005, 0.0025]
    norms = []
    for eps in eps_list:
        params = ProblemParams(N=5, p=2.0, epsilon=eps, sigma=0.5, R=1.0, nu=-1.75)
        mesh = solver_mesh(params)
        glue = build_glue(params, coeffs, prof, mesh)
        norms.append(glue.f_norm)
        assert glue.q_exponent == pytest.approx(0.75)
    slope = np.polyfit(np.log(eps_list), np.log(norms), 1)[0]
    assert slope >= 0.75 - 0.1


def test_Q_zero(params, coeffs, prof):
    mesh = solver_mesh(params)
    ub = approximate_solution(params, prof, mesh)
    z = GridFunction(mesh, np.zeros(mesh.n))
    q = nonlinearity_Q(z, ub, coeffs, params.p)
    assert np.all(q.values == 0.0)


def test_Q_quadratic_identity_p2(params, coeffs, prof):
    # p = 2 with ubar + v >= 0: Q(v) = a v^2 exactly, node-wise (v comparable
    # to ubar, so the expansion does not lose the identity to cancellation)
    mesh = solver_mesh(params)
    ub = approximate_solution(params, prof, mesh)
    rng = np.random.default_rng(5)
    v = GridFunction(mesh, rng.uniform(0.3, 0.9, mesh.n) * (ub.values + 0.05))
    q = nonlinearity_Q(v, ub, coeffs, 2.0)
    a = coeffs.a.value(mesh.r)
    assert_allclose(q.values, a * v.values ** 2, rtol=1e-12)


def test_Q_quadratic_smallness(params, coeffs, prof):
    # Q(t v)/t^2 stays bounded as t -> 0 (Taylor remainder)
    mesh = solver_mesh(params)
    ub = approximate_solution(params, prof, mesh)
    x = np.log(mesh.r)
    v = GridFunction(mesh, np.minimum(mesh.r, 0.5) ** params.nu * np.sin(x / 3.0))
    vals = []
    for t in (1e-1, 1e-2, 1e-3, 1e-4):
        q = nonlinearity_Q(GridFunction(mesh, t * v.values), ub, coeffs, params.p)
        vals.append(weighted_holder_norm(q, 0, 0.0, params.nu - 2.0).total / t ** 2)
    vals = np.asarray(vals)
    assert np.all(vals < 2.0 * vals[0] + 1e-12)
    assert_allclose(vals[-1], vals[-2], rtol=0.05)


def test_Q_honors_absolute_value(params, coeffs, prof):
    # where ubar + v < 0 the |.|^p is taken literally
    mesh = solver_mesh(params)
    ub = approximate_solution(params, prof, mesh)
    v = GridFunction(mesh, -(ub.values + 1.0))      # ubar + v = -1 everywhere
    q = nonlinearity_Q(v, ub, coeffs, 2.0)
    a = coeffs.a.value(mesh.r)
    expected = a * (1.0 - ub.values ** 2 - 2.0 * ub.values * v.values)
    assert_allclose(q.values, expected, rtol=1e-10)
