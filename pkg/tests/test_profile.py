from __future__ import annotations

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad

from blowuplab import polar, profile
from blowuplab.forms import Form
from blowuplab.polar import PolarField
from blowuplab.profile import EllipticProblem, LinearizedState


def sech_solution(a, h, nb):
    """Psi = sin(2 beta) sech(t) and its source; returns (grid, source, exact)."""
    g = profile.elliptic_grid(a, R_min=np.exp(-12), R_max=np.exp(12), n_beta=nb, h=h)
    f = lambda t: 1 / np.cosh(t)  # noqa: E731
    fp = lambda t: -np.tanh(t) / np.cosh(t)  # noqa: E731
    fpp = lambda t: (np.tanh(t) ** 2 - 1 / np.cosh(t) ** 2) / np.cosh(t)  # noqa: E731
    src = profile.manufactured_source(f, fp, fpp, g)
    return g, src, f(g.t)[:, None] * np.sin(2 * g.beta)[None, :]


# ---------------------------------------------------------------- elliptic solver


def test_zero_source_gives_zero():
    g = profile.elliptic_grid(0.1, n_beta=8)
    sol = profile.solve_elliptic(EllipticProblem(PolarField.zeros(g)))
    assert np.all(sol.psi.values == 0) and sol.residual == 0


def test_resonance_matches_discrete_second_difference():
    for nb in (4, 16, 64):
        hb = np.pi / 2 / nb
        b = (np.arange(nb) + 0.5) * hb
        s = np.sin(2 * np.concatenate([[-b[0]], b, [np.pi - b[-1]]]))
        d2 = (s[2:] - 2 * s[1:-1] + s[:-2]) / hb**2
        assert np.allclose(-d2, profile.resonance(hb) * np.sin(2 * b), atol=1e-10)
    assert abs(profile.resonance(1e-4) - 4) < 1e-7


def test_manufactured_second_order_in_log_radius():
    # sin(2 beta) is resolved exactly in beta, so only the log R spacing matters
    errs = []
    for h in (0.1, 0.05):
        g, src, exact = sech_solution(0.1, h, 8)
        sol = profile.solve_elliptic(EllipticProblem(src))
        errs.append(np.max(np.abs(sol.psi.values - exact)))
        assert sol.residual <= profile.RESIDUAL_TOL
    assert 3.6 < errs[0] / errs[1] < 4.4


def test_solver_is_linear():
    g, src, _ = sech_solution(0.2, 0.1, 8)
    one = profile.solve_elliptic(EllipticProblem(src)).psi.values
    two = profile.solve_elliptic(EllipticProblem(src * -2.5)).psi.values
    assert np.max(np.abs(two + 2.5 * one)) <= 1e-10 * np.max(np.abs(two))


def test_problem_validation():
    g = profile.elliptic_grid(0.1, n_beta=8)
    f = PolarField.zeros(g)
    with pytest.raises(ValueError):
        EllipticProblem(f, variant="sphere")
    with pytest.raises(ValueError):
        EllipticProblem(PolarField.zeros(polar.make_grid(0.1, n_R=64, n_beta=8)))
    with pytest.raises(ValueError):
        EllipticProblem(PolarField.zeros(profile.elliptic_grid(0.1, n_beta=8, h=0.2)))
    with pytest.raises(ValueError):
        EllipticProblem(f, variant="cylinder", C_l=-1.0)
    with pytest.raises(ValueError):
        EllipticProblem(f, variant="cylinder", C_l=1.0)


def test_cylinder_without_curvature_is_half_plane():
    g, src, _ = sech_solution(0.2, 0.1, 8)
    a = profile.solve_elliptic(EllipticProblem(src)).psi.values
    b = profile.solve_elliptic(EllipticProblem(src, variant="cylinder", C_l=0.0)).psi.values
    assert np.array_equal(a, b)


def test_cylinder_converges_to_half_plane():
    a = 0.2
    g = profile.elliptic_grid(a, R_min=np.exp(-8), R_max=np.exp(3), n_beta=8, h=0.1)
    src = PolarField(g, np.exp(-(g.t**2))[:, None] * np.sin(2 * g.beta)[None, :])
    base = profile.solve_elliptic(EllipticProblem(src)).psi.values
    diffs = []
    for C_l in (1e-8, 1e-9):
        cyl = profile.solve_elliptic(EllipticProblem(src, variant="cylinder", C_l=C_l)).psi.values
        diffs.append(np.max(np.abs(cyl - base)))
    assert diffs[1] < diffs[0] < 1e-2 * np.max(np.abs(base))


def test_localized_solution():
    a = 0.2
    g = profile.elliptic_grid(a, R_min=np.exp(-8), R_max=np.exp(3), n_beta=8, h=0.1)
    src = PolarField(g, np.exp(-(g.t**2))[:, None] * np.sin(2 * g.beta)[None, :])
    half = profile.solve_elliptic(EllipticProblem(src))
    assert np.array_equal(half.localized.values, half.psi.values)
    prob = EllipticProblem(src, variant="cylinder", C_l=1e-8)
    loc = profile.solve_elliptic(prob).localized
    assert np.all(loc.values[g.R > 2 * prob.lam] == 0)


def test_cutoff():
    R = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    c = profile.chi1(R)
    assert np.array_equal(c[[0, 1, 2]], [1, 1, 1]) and np.array_equal(c[[4, 5]], [0, 0])
    assert 0 < c[3] < 1
    x = np.linspace(0, 3, 301)
    assert np.all(np.diff(profile.chi1(x)) <= 0)


def test_singular_solve_is_reported(monkeypatch):
    g, src, _ = sech_solution(0.2, 0.1, 8)
    monkeypatch.setattr(profile, "spsolve", lambda A, b: np.full(b.shape, np.nan))
    with pytest.raises(profile.SingularOperatorError, match="sin\\(2 beta\\)"):
        profile.solve_elliptic(EllipticProblem(src))


def test_profile_stream_function_is_sin2beta_dominated():
    a = 0.05
    g = profile.elliptic_grid(a, n_beta=16)
    prof = polar.profile_fields(a, g)
    lead = lambda R, b: np.sin(2 * b)[None, :] * 1.5 / (1 + np.asarray(R)[:, None])  # noqa: E731
    psi = profile.solve_elliptic(EllipticProblem(prof.omega, far_field=lead)).psi
    ratio = np.max(np.abs(profile.psi_star(psi, prof.omega).values)) / np.max(np.abs(psi.values))
    assert ratio < 3 * a


def test_sin2_projection():
    g = profile.elliptic_grid(0.1, n_beta=16)
    amp = np.exp(-(g.t**2))
    f = PolarField(g, amp[:, None] * (np.sin(2 * g.beta) + np.sin(4 * g.beta))[None, :])
    assert np.max(np.abs(profile.sin2_projection(f) - amp)) < 1e-13


# ---------------------------------------------------------------- velocity


@pytest.fixture(scope="module")
def leading_velocity():
    """Psi = sin(2 beta) L12 / (pi alpha) for the profile, so Psi_* = 0."""
    a = 0.1
    g = profile.elliptic_grid(a, R_min=1e-6, R_max=1e6, n_beta=16, h=0.01)
    prof = polar.profile_fields(a, g)
    psi = PolarField(g, np.sin(2 * g.beta)[None, :] * polar.l12_nodes(prof.omega)[:, None] / (np.pi * a))
    return a, g, profile.reconstruct_velocity(psi, prof.omega)


def test_velocity_gradient_closed_form(leading_velocity):
    # psi = r^2 Psi = 3 x y / (1 + rho^alpha) in Cartesian form, u = -psi_y
    a, g, vel = leading_velocity
    x, y = sympy.symbols("x y", positive=True)
    psi = 3 * x * y / (1 + (x**2 + y**2) ** (sympy.Rational(a).limit_denominator(1000) / 2))
    u_x = sympy.lambdify((x, y), -sympy.diff(psi, x, y), "numpy")
    rho = g.R ** (1 / a)
    inner = (slice(10, -10), slice(1, -1))
    X = rho[:, None] * np.cos(vel.beta)[None, :]
    Y = rho[:, None] * np.sin(vel.beta)[None, :]
    exact = u_x(X[inner], Y[inner])
    assert np.max(np.abs(vel.u_x[inner] - exact)) < 1e-4
    assert abs(vel.u_x[0, 0] + 3) < 1e-4


def test_velocity_boundary_conditions(leading_velocity):
    _, _, vel = leading_velocity
    assert np.max(np.abs(vel.V[:, 0])) <= 1e-12 * np.max(np.abs(vel.V))
    assert np.max(np.abs(vel.U[:, -1])) <= 1e-12 * np.max(np.abs(vel.U))


def test_velocity_divergence_free(leading_velocity):
    _, _, vel = leading_velocity
    assert np.max(np.abs(vel.divergence)[5:-5]) < 1e-3 * np.max(np.abs(vel.u_x))


def test_v_x_operator_matches_reconstruction():
    a = 0.1
    g = profile.elliptic_grid(a, R_min=np.exp(-6), R_max=np.exp(6), n_beta=32, h=0.02)
    prof = polar.profile_fields(a, g)
    psi = PolarField(g, np.exp(-(g.t**2))[:, None] * (np.sin(2 * g.beta) + 0.3 * np.sin(4 * g.beta))[None, :])
    vel = profile.reconstruct_velocity(psi, prof.omega)
    V1 = profile.v_x_operator(psi, prof.omega)
    inner = (slice(10, -10), slice(3, -3))
    assert np.max(np.abs(vel.v_x - V1)[inner]) < 1e-2 * np.max(np.abs(V1))


# ---------------------------------------------------------------- normalization and operators


@pytest.fixture(scope="module")
def prof_grid():
    a = 0.1
    g = polar.make_grid(a, 1e-6, 1e6, 256, 48)
    return a, g, polar.profile_fields(a, g)


def test_normalization_of_profile(prof_grid):
    a, g, prof = prof_grid
    cw, cl = profile.normalization(prof.omega)
    assert abs(cw + 3) < 1e-8 and abs(cl - (1 - a) / a * cw) < 1e-12
    assert profile.normalization(PolarField.zeros(g)) == (0.0, 0.0)
    assert abs(profile.normalization(-prof.omega)[0] - 3) < 1e-8


def test_state_requires_consistent_rates(prof_grid):
    _, g, prof = prof_grid
    z = PolarField.zeros(g)
    with pytest.raises(ValueError):
        LinearizedState(prof.omega, z, z, -3.0, 0.0)


def test_linearized_rhs_of_zero_state(prof_grid):
    _, g, prof = prof_grid
    z = PolarField.zeros(g)
    for part in profile.linearized_rhs(LinearizedState.from_perturbation(z, z), prof):
        assert np.all(part.values == 0)


def test_eta_forces_omega(prof_grid):
    _, g, prof = prof_grid
    z = PolarField.zeros(g)
    eta = PolarField.from_form(g, Form.term(1.0, a=1, b=4, m=1, n=1))
    L1, _, L3 = profile.linearized_rhs(LinearizedState.from_perturbation(z, eta), prof)
    assert np.array_equal(L1.values, eta.values)
    assert np.all(L3.values == 0)


@settings(max_examples=10, deadline=None)
@given(lam=st.floats(-3, 3).filter(lambda x: abs(x) > 1e-3))
def test_linearized_rhs_is_linear(lam):
    a = 0.1
    g = polar.make_grid(a, 1e-4, 1e4, 64, 16)
    prof = polar.profile_fields(a, g)
    om = PolarField.from_form(g, Form.term(1.0, a=1, b=3, m=2, n=1))
    eta = PolarField.from_form(g, Form.term(0.5, a=2, b=4, m=1, n=2))
    s = LinearizedState.from_perturbation(om, eta, om * 0.3)
    for x, y in zip(profile.linearized_rhs(s.scaled(lam), prof), profile.linearized_rhs(s, prof)):
        assert np.allclose(x.values, lam * y.values, rtol=1e-12, atol=1e-12 * np.max(np.abs(y.values)))


def test_profile_residual_shrinks_with_alpha():
    ratios = []
    for a in (0.1, 0.05):
        g = polar.make_grid(a, 1e-6, 1e6, 512, 64)
        ratios.append(profile.profile_residual_ratio(polar.profile_fields(a, g)))
    assert 0.4 < ratios[1] / ratios[0] < 0.65


# ---------------------------------------------------------------- energies


@pytest.fixture(scope="module")
def smooth_state():
    a = 0.1
    g = polar.make_grid(a, 1e-6, 1e6, 512, 64)
    om = PolarField.from_form(g, Form.term(1.0, a=2, b=6, m=2, n=2))
    eta = PolarField.from_form(g, Form.term(0.5, a=2, b=7, m=3, n=2))
    xi = PolarField.from_form(g, Form.term(0.2, a=3, b=8, m=3, n=3))
    return LinearizedState.from_perturbation(om, eta, xi)


def test_energy_of_zero_state():
    g = polar.make_grid(0.1, 1e-4, 1e4, 64, 16)
    z = PolarField.zeros(g)
    assert profile.energy_E1(LinearizedState.from_perturbation(z, z), 0.5) == 0.0


def test_energy_piece_against_quadrature(smooth_state):
    # phi0 Omega^2 = 2 R (1+R)^-9 sin^5 cos^5
    val = profile.energy_pieces(smooth_state, 0.5)["Omega phi0"]
    ref = dblquad(lambda b, R: 2 * R * (1 + R) ** -9 * (np.sin(b) * np.cos(b)) ** 5, 0, np.inf, 0, np.pi / 2)[0]
    assert abs(val / ref - 1) < 1e-6


def test_energy_nodal_route_agrees(smooth_state):
    om = smooth_state.omega
    w = polar.weight_form("phi0", om.grid.alpha)
    exact = polar.weighted_l2_sq(om, w)
    nodal = polar.weighted_l2_sq(om.with_values(om.values), w)
    assert abs(nodal / exact - 1) < 1e-6


@pytest.mark.parametrize("lam", [-2.0, 0.5, 3.0])
def test_energy_homogeneous(smooth_state, lam):
    e = profile.energy_E1(smooth_state, 0.5)
    assert abs(profile.energy_E1(smooth_state.scaled(lam), 0.5) - abs(lam) * e) <= 1e-12 * abs(lam) * e


def test_higher_energies_dominate(smooth_state):
    e = [profile.energy_Ek(smooth_state, 0.5, k) for k in (1, 2, 3)]
    assert e[0] < e[1] < e[2]
    with pytest.raises(ValueError):
        profile.energy_Ek(smooth_state, 0.5, 4)


def test_energy_weights_must_be_positive():
    with pytest.raises(ValueError):
        profile.EnergyConfig(mu1=0.0)
    with pytest.raises(ValueError):
        profile.EnergyConfig(mu={(2, 1): -1.0})


def test_energy_weight_scales_its_pieces(smooth_state):
    base = profile.energy_pieces(smooth_state, 0.5)
    heavy = profile.energy_pieces(smooth_state, 0.5, profile.EnergyConfig(mu3=4.0))
    for k, v in base.items():
        assert heavy[k] == pytest.approx(4 * v if k.startswith("mu3") else v, rel=1e-14)


# ---------------------------------------------------------------- rescaling bookkeeping


def test_constant_rates():
    tau = np.linspace(0, 10, 201)
    s = profile.rescaling_bookkeeping(tau, 0.0, -1.0)
    assert np.max(np.abs(s.C_omega - np.exp(-tau))) < 1e-14
    assert np.max(np.abs(s.t - (1 - np.exp(-tau)))) < 1e-14
    assert abs(s.t_limit - 1) < 1e-14
    assert s.identity_defect < 1e-14


def test_rates_with_two_components():
    tau = np.linspace(0, 5, 101)
    s = profile.rescaling_bookkeeping(tau, -9.0, -3.0, C_omega0=0.5, C_l0=2.0)
    assert np.allclose(s.C_l, 2 * np.exp(9 * tau), rtol=1e-13)
    assert np.allclose(s.t, 0.5 * (1 - np.exp(-3 * tau)) / 3, rtol=1e-13, atol=1e-16)
    assert np.allclose(s.C_theta, s.C_omega**2 / s.C_l, rtol=1e-12)


def test_zero_rates():
    tau = np.linspace(0, 3, 31)
    s = profile.rescaling_bookkeeping(tau, 0.0, 0.0)
    assert np.all(s.C_omega == 1) and np.allclose(s.t, tau) and s.t_limit == np.inf


def test_bookkeeping_rejects_bad_time():
    with pytest.raises(ValueError):
        profile.rescaling_bookkeeping(np.array([0.0, 1.0, 1.0]), 0.0, -1.0)
    with pytest.raises(ValueError):
        profile.rescaling_bookkeeping(np.array([0.5, 1.0]), 0.0, -1.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 1), min_size=4, max_size=12))
def test_physical_time_increases(trace):
    tau = np.linspace(0, 2, len(trace))
    s = profile.rescaling_bookkeeping(tau, 0.0, np.array(trace))
    assert np.all(np.diff(s.t) > 0)
