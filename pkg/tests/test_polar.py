from __future__ import annotations

import json

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from blowuplab import polar
from blowuplab.forms import Form
from blowuplab.polar import NormKind, PolarField

Rs, bs = sp.symbols("R beta", positive=True)


def sym_DR(expr):
    return sp.simplify(Rs * sp.diff(expr, Rs))


def sym_Db(expr):
    return sp.simplify(sp.sin(2 * bs) * sp.diff(expr, bs))


def on_grid(expr, grid):
    f = sp.lambdify((Rs, bs), expr, "numpy")
    return np.broadcast_to(f(grid.R[:, None], grid.beta[None, :]), grid.shape)


@pytest.fixture(scope="module")
def grid():
    return polar.make_grid(0.1, 1e-4, 1e4, 256, 48)


# ---------------------------------------------------------------- grid


def test_gauss_grid_integrates_sin2beta():
    g = polar.make_grid(0.1)
    assert abs(g.wb @ np.sin(2 * g.beta) - 1) < 1e-10
    assert np.all((g.beta > 0) & (g.beta < np.pi / 2))


def test_log_quadrature_is_accurate(grid):
    # int R/(1+R)^2 dR/R over [R_min, R_max] = 1/(1+R_min) - 1/(1+R_max)
    val = grid.wt @ (1 / (1 + grid.R) ** 2 * grid.R)
    exact = 1 / (1 + grid.R[0]) - 1 / (1 + grid.R[-1])
    assert abs(val - exact) < 1e-10


@pytest.mark.parametrize("bad", [0.0, -0.1, 0.3])
def test_alpha_range(bad):
    with pytest.raises(ValueError):
        polar.make_grid(bad)


def test_grid_too_coarse():
    with pytest.raises(ValueError):
        polar.make_grid(0.1, n_R=6)


def test_field_shape_and_finiteness(grid):
    with pytest.raises(ValueError):
        PolarField(grid, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        PolarField(grid, np.full(grid.shape, np.nan))


# ---------------------------------------------------------------- derivatives


def test_DR_profile_shape_symbolic(grid):
    expr = Rs / (1 + Rs) ** 2
    target = on_grid(sym_DR(expr), grid)
    assert sp.simplify(sym_DR(expr) - Rs * (1 - Rs) / (1 + Rs) ** 3) == 0
    f = PolarField.from_form(grid, Form.term(1, a=1, b=2))
    assert np.max(np.abs(polar.diff_DR(f).values - target)) < 1e-14


def test_DR_finite_differences_fourth_order():
    errs = []
    for n in (128, 256):
        g = polar.make_grid(0.1, 1e-3, 1e3, n, 8)
        vals = on_grid(Rs / (1 + Rs) ** 2, g)
        d = polar.diff_DR(PolarField(g, vals)).values
        errs.append(np.max(np.abs(d - on_grid(Rs * (1 - Rs) / (1 + Rs) ** 3, g))))
    assert np.log2(errs[0] / errs[1]) > 3.5


def test_DR_trivial_cases(grid):
    const = PolarField(grid, np.full(grid.shape, 2.5))
    assert np.max(np.abs(polar.diff_DR(const).values)) < 1e-9
    R = PolarField.from_form(grid, Form.term(1, a=1))
    assert np.max(np.abs(polar.diff_DR(R).values - R.values)) == 0


def test_Dbeta_symbolic(grid):
    s2 = PolarField.from_form(grid, polar.sin2beta_form())
    target = on_grid(sym_Db(sp.sin(2 * bs)), grid)
    assert np.max(np.abs(polar.diff_Dbeta(s2).values - target)) < 1e-13
    assert np.max(np.abs(target - on_grid(2 * sp.sin(2 * bs) * sp.cos(2 * bs), grid))) < 1e-13


def test_Dbeta_cos_power(grid):
    a = 0.1
    f = PolarField.from_form(grid, Form.term(1, n=a))
    expect = on_grid(sym_Db(sp.cos(bs) ** sp.Rational(1, 10)), grid)
    assert np.max(np.abs(polar.diff_Dbeta(f).values - expect)) < 1e-13
    assert np.max(np.abs(expect - (-2 * a * np.sin(grid.beta) ** 2 * np.cos(grid.beta) ** a)[None, :])) < 1e-13


def test_Dbeta_finite_differences_converge():
    expr = sp.sin(bs) ** 2 * sp.cos(bs) ** 3 / (1 + Rs)
    errs = []
    for nb in (32, 64):
        g = polar.make_grid(0.1, 1e-2, 1e2, 16, nb)
        d = polar.diff_Dbeta(PolarField(g, on_grid(expr, g))).values
        errs.append(np.max(np.abs(d - on_grid(sym_Db(expr), g))))
    assert errs[0] < 1e-3 and np.log2(errs[0] / errs[1]) > 3.5


def test_Dbeta_of_constant(grid):
    assert np.max(np.abs(polar.diff_Dbeta(PolarField(grid, np.ones(grid.shape))).values)) < 1e-10


def test_derivatives_commute(grid):
    f = PolarField(grid, on_grid(Rs**2 / (1 + Rs) ** 4 * sp.sin(bs) ** 2 * sp.cos(bs), grid))
    a = polar.diff_DR(polar.diff_Dbeta(f)).values
    b = polar.diff_Dbeta(polar.diff_DR(f)).values
    assert np.max(np.abs(a - b)) < 1e-5 * np.max(np.abs(a))


def test_derivative_order_limits(grid):
    f = PolarField.zeros(grid)
    with pytest.raises(ValueError):
        polar.diff_DR(f, 6)
    with pytest.raises(ValueError):
        polar.diff_Dbeta(f, -1)


def test_fd_matrix_exact_on_quartics():
    x = np.sort(np.random.default_rng(0).uniform(0, 1, 12))
    D = polar.fd_matrix(x)
    assert np.max(np.abs(D @ x**4 - 4 * x**3)) < 1e-9


# ---------------------------------------------------------------- weights and norms


def test_weight_ordering_and_lower_bounds(grid):
    p1, p2 = polar.weight_values("phi1", grid), polar.weight_values("phi2", grid)
    assert np.all(p1 / p2 <= 1 + 1e-14)
    s2 = np.sin(2 * grid.beta)[None, :]
    assert np.allclose(p1 / p2, np.broadcast_to(s2 ** (1 + 0.1 / 10 - polar.SIGMA), grid.shape), rtol=1e-12)
    assert np.all(polar.weight_values("sup1", grid) >= 1)
    assert np.all(polar.weight_values("sup2", grid) >= 1)
    for k in polar.WEIGHT_KINDS:
        w = polar.weight_values(k, grid, 1, 1)
        assert np.all(np.isfinite(w) & (w > 0))


def test_unknown_weight(grid):
    with pytest.raises(ValueError):
        polar.weight_form("phi9", 0.1)


@pytest.mark.parametrize("fam", ["H_phi", "H_psi", "C", "W"])
def test_norm_of_zero(grid, fam):
    assert polar.weighted_norm(PolarField.zeros(grid), NormKind(fam, 2)) == 0.0


def test_sup_norm_of_one(grid):
    assert polar.weighted_norm(PolarField(grid, np.ones(grid.shape)), NormKind("C", 0)) == 1.0


def test_phi1_norm_against_dblquad():
    # f = R^2/(1+R)^4 sin^2 cos^2: phi1 f^2 = 2^-s R^0 (1+R)^-4 sin^(4-s) cos^(4-s)
    a = 0.1
    g = polar.make_grid(a, 1e-6, 1e6, 512, 128)
    form = Form.term(1, a=2, b=4, m=2, n=2)
    f = PolarField.from_form(g, form)
    s = polar.SIGMA
    R0, R1 = g.R[0], g.R[-1]
    # radial part in closed form, angular part by adaptive quadrature
    radial = ((1 + R0) ** -3 - (1 + R1) ** -3) / 3
    angular = quad(lambda b: (np.sin(b) * np.cos(b)) ** (4 - s), 0, np.pi / 2, epsabs=1e-14, epsrel=1e-13)[0]
    ref = 2**-s * radial * angular
    got = polar.weighted_norm(f, NormKind("H_phi", 0)) ** 2
    assert abs(got / ref - 1) < 1e-6
    nodal = polar.weighted_norm(PolarField(g, f.values), NormKind("H_phi", 0)) ** 2
    assert abs(nodal / ref - 1) < 1e-6


def test_profile_phi1_norm_diverges_at_origin():
    # Omega_bar^2 phi1 ~ R^-2 near R = 0 in dR, so the value is set by R_min
    vals = []
    for Rmin in (1e-3, 1e-4):
        g = polar.make_grid(0.1, Rmin, 1e4, 256, 48)
        vals.append(polar.weighted_norm(polar.profile_fields(0.1, g).omega, NormKind("H_phi", 0)) ** 2)
    assert 8 < vals[1] / vals[0] < 12


def test_nonfinite_weighted_value_reported(grid):
    big = PolarField(grid, np.full(grid.shape, 1e300))
    with pytest.raises(polar.NonFiniteNormError, match="node"):
        polar.weighted_l2_sq(big, polar.weight_form("phi1", 0.1))


def test_overflow_warning_names_nodes(grid):
    f = PolarField(grid, np.full(grid.shape, 1e3))
    with pytest.warns(polar.WeightOverflowWarning, match="nodes"):
        polar.weighted_l2_sq(f, polar.weight_form("phi1", 0.1))


# ---------------------------------------------------------------- L12 and L


@pytest.mark.parametrize("alpha", [0.1, 0.05])
def test_l12_of_profile_closed_form(alpha):
    g = polar.make_grid(alpha)
    prof = polar.profile_fields(alpha, g)
    L = polar.l12_nodes(prof.omega)
    assert np.max(np.abs(L / (1.5 * np.pi * alpha / (1 + g.R)) - 1)) < 1e-6


def test_l12_at_origin_value():
    g = polar.make_grid(0.1)
    val = polar.l12(polar.profile_fields(0.1, g).omega, 0.0)
    assert abs(val - 1.5 * np.pi * 0.1) < 1e-6
    assert abs(val - 0.4712) < 1e-4


def test_l12_between_nodes():
    g = polar.make_grid(0.1)
    om = polar.profile_fields(0.1, g).omega
    R = np.array([0.37, 2.9, 1234.5])
    assert np.max(np.abs(polar.l12(om, R) / (1.5 * np.pi * 0.1 / (1 + R)) - 1)) < 1e-6


def test_l12_zero_and_range(grid):
    assert np.all(polar.l12_nodes(PolarField.zeros(grid)) == 0)
    with pytest.raises(ValueError):
        polar.l12(PolarField.zeros(grid), 2 * grid.R[-1])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_l12_monotone_for_nonnegative_fields(seed):
    g = polar.make_grid(0.1, 1e-3, 1e3, 64, 16)
    rng = np.random.default_rng(seed)
    vals = np.exp(-((g.t[:, None] - rng.uniform(-3, 3)) ** 2)) * rng.uniform(0, 1, g.beta.size)[None, :]
    L = polar.l12_nodes(PolarField(g, vals))
    # up to the quadrature error of the panel rule
    assert np.all(np.diff(L) <= 1e-10 * L.max())


def test_l12_tilde_vanishes_at_origin():
    g = polar.make_grid(0.1)
    om = polar.profile_fields(0.1, g).omega
    lt = polar.l12_tilde(om)
    assert abs(lt[0] - (polar.l12_nodes(om)[0] - polar.l12(om, 0.0))) < 1e-15


def test_L_operator_zero_and_singular():
    g = polar.make_grid(0.25, 0.2**0.25, 2.5**0.25, 64, 16)
    assert polar.l_operator_R3(PolarField.zeros(g)) == 0.0
    with pytest.raises(ValueError):
        polar.l_operator_R3(PolarField(g, np.ones(g.shape)))


def test_L_operator_of_separable_field():
    # f = rho bump -> int f cos^2 sin / rho = (1/3) int bump(rho) drho
    a = 0.25
    g = polar.make_grid(a, 0.5**a, 3.0**a, 4000, 32)
    rho = g.R ** (1 / a)
    bump = np.where(np.abs(rho - 1.75) < 1, np.exp(1 - 1 / np.clip(1 - (rho - 1.75) ** 2, 1e-300, None)), 0.0)
    f = PolarField(g, np.broadcast_to((rho * bump)[:, None], g.shape).copy())
    ref = polar.l_operator_R3(f)
    b1d = quad(lambda r: np.exp(1 - 1 / (1 - (r - 1.75) ** 2)) if abs(r - 1.75) < 1 else 0.0, 0.75, 2.75, epsabs=1e-13)[0]
    assert abs(ref - b1d / 3) < 1e-8


# ---------------------------------------------------------------- profile


def test_profile_constant_limit():
    assert abs(polar.profile_constant(1e-8) - 2 / np.pi) < 1e-8


def test_profile_vanishes_at_origin():
    om, _, _ = polar.profile_forms(0.1)
    with np.errstate(divide="ignore"):
        assert np.all(om(np.array([0.0]), np.linspace(0.1, 1.4, 5)) == 0)


@pytest.mark.parametrize("alpha", [0.25, 0.1, 0.05, 0.025])
def test_profile_steady_identity(alpha):
    g = polar.make_grid(alpha)
    prof = polar.profile_fields(alpha, g)
    ident = -polar.diff_DR(prof.omega).values - prof.omega.values + prof.eta.values
    assert np.max(np.abs(ident)) <= 1e-12
    # symbolic version of the same cancellation
    e = -sym_DR(3 * Rs / (1 + Rs) ** 2) - 3 * Rs / (1 + Rs) ** 2 + 6 * Rs / (1 + Rs) ** 3
    assert sp.simplify(e) == 0


def test_profile_constants():
    g = polar.make_grid(0.1, n_R=64, n_beta=32)
    prof = polar.profile_fields(0.1, g)
    assert prof.c_l == 1 / 0.1 + 3 and prof.c_omega == -1.0


# ---------------------------------------------------------------- io


def test_field_csv_and_json(tmp_path):
    g = polar.make_grid(0.1, 1e-2, 1e2, 8, 8)
    f = polar.profile_fields(0.1, g).omega
    polar.write_field_csv(f, tmp_path / "f.csv")
    polar.write_field_json(f, tmp_path / "f.json", norms={"C0": 1.0})
    rows = np.loadtxt(tmp_path / "f.csv", delimiter=",", skiprows=1)
    assert rows.shape == (64, 3)
    assert np.array_equal(rows[:, 2].reshape(8, 8), f.values)
    meta = json.loads((tmp_path / "f.json").read_text())
    assert meta["grid"]["alpha"] == 0.1 and meta["norms"]["C0"] == 1.0
