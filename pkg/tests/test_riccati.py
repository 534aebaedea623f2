from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowuplab import line, riccati
from blowuplab.line import Profile1D


@pytest.fixture(scope="module")
def grid():
    return riccati.default_grid()


def ubar(g):
    return Profile1D.from_function(g, riccati.steady_profile)


# ---------------------------------------------------------------- quadrature


def test_log_grid_integrates_gaussian(grid):
    val = grid.w @ np.exp(-grid.x**2)
    assert abs(val - np.sqrt(np.pi)) < 1e-9


def test_lp_norm_of_constant_on_uniform_grid():
    g = line.uniform_grid(0.0, 2.0, 101)
    assert abs(line.lp_norm(np.full(101, 3.0), g, 2) - 3 * np.sqrt(2)) < 1e-12
    assert line.lp_norm(np.full(101, -3.0), g, np.inf) == 3.0


def test_fit_slope_of_power_law():
    x = np.geomspace(1e-3, 1, 10)
    assert abs(line.fit_slope(x, 5 * x**-1.25) + 1.25) < 1e-12


# ---------------------------------------------------------------- exact solution


def test_exact_solution_self_similar(grid):
    u = riccati.exact_solution(ubar(grid), 0.5)
    assert np.max(np.abs(u.values - 1 / (0.5 + grid.x**2))) < 1e-12


def test_exact_solution_zero_and_negative(grid):
    z = Profile1D(grid, np.zeros_like(grid.x))
    assert np.all(riccati.exact_solution(z, 5.0).values == 0)
    m = Profile1D(grid, -np.ones_like(grid.x))
    u = riccati.exact_solution(m, 3.0)
    assert np.allclose(u.values, -1 / (1 + 3.0), rtol=1e-14)


def test_exact_solution_rejects_late_time(grid):
    with pytest.raises(ValueError):
        riccati.exact_solution(ubar(grid), 1.0)


@settings(max_examples=30, deadline=None)
@given(s=st.floats(0.0, 0.45), t=st.floats(0.0, 0.45))
def test_exact_solution_semigroup(s, t):
    g = line.uniform_grid(-5, 5, 41)
    u0 = Profile1D.from_function(g, riccati.steady_profile)
    a = riccati.exact_solution(riccati.exact_solution(u0, s), t).values
    b = riccati.exact_solution(u0, s + t).values
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))


# ---------------------------------------------------------------- linearization


def test_linearized_value_at_origin(grid):
    v = riccati.linearized_solution(Profile1D(grid, np.ones_like(grid.x)), 0.5)
    assert abs(v.values[grid.x == 0][0] - 4.0) < 1e-14


def test_linearized_trivial_cases(grid):
    v0 = Profile1D.from_function(grid, lambda x: np.exp(-(x**2)))
    assert np.array_equal(riccati.linearized_solution(v0, 0.0).values, v0.values)
    z = Profile1D(grid, np.zeros_like(grid.x))
    assert np.all(riccati.linearized_solution(z, 0.9).values == 0)


def test_linearized_is_derivative_of_exact_flow():
    g = line.uniform_grid(-5, 5, 101)
    u0 = Profile1D.from_function(g, riccati.steady_profile)
    v0 = np.exp(-(g.x**2))
    t = 0.6
    ref = riccati.linearized_solution(Profile1D(g, v0), t).values
    errs = []
    for e in (1e-3, 1e-4):
        up = riccati.exact_solution(Profile1D(g, u0.values + e * v0), t).values
        quot = (up - riccati.exact_solution(u0, t).values) / e
        errs.append(np.max(np.abs(quot - ref)))
    # first order in e
    assert 8 < errs[0] / errs[1] < 12


def test_growth_factor_unit_at_time_zero(grid):
    v0 = Profile1D.from_function(grid, lambda x: np.exp(-(x**2)))
    gf = riccati.growth_factor_lp(v0, 0.0, 2.0)
    assert abs(gf.value - 1) < 1e-14 and abs(gf.rescaled - 1) < 1e-9


def test_growth_factor_rejects_zero(grid):
    with pytest.raises(ValueError):
        riccati.growth_factor_lp(Profile1D(grid, np.zeros_like(grid.x)), 0.5, 2.0)


@pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
def test_profile_norm_rate(grid, p):
    ts = 1 - np.geomspace(0.1, 1e-3, 15)
    norms = [line.lp_norm(riccati.exact_solution(ubar(grid), t).values, grid, p) for t in ts]
    assert abs(line.fit_slope(1 - ts, norms) - (-1 + 1 / (2 * p))) < 0.05


@pytest.mark.parametrize("p", [1.0, 2.0, np.inf])
def test_growth_factor_increases_over_final_decade(grid, p):
    v0 = Profile1D.from_function(grid, lambda x: np.exp(-(x**2)))
    vals = [riccati.growth_factor_lp(v0, t, p).value for t in 1 - np.geomspace(1e-2, 1e-3, 8)]
    assert np.all(np.diff(vals) > 0)


# ---------------------------------------------------------------- rescaling


def test_damping_bound(grid):
    x = grid.x[grid.x != 0]
    assert np.max(riccati.damping(x)) <= -0.5


def test_perturbation_class_membership(grid):
    V0 = riccati.default_perturbation(0.05)
    assert riccati.PerturbationClass(0.05).contains(V0(grid.x), grid.x)
    assert not riccati.PerturbationClass(0.01).contains(V0(grid.x), grid.x)
    with pytest.raises(ValueError):
        riccati.PerturbationClass(0.2)


def test_zero_perturbation_is_steady(grid):
    U0 = riccati.perturbed_profile(grid, np.zeros_like(grid.x))
    run = riccati.dynamic_rescaling_evolve(U0, 2.0, 0.05)
    assert np.max(run.energy) == 0.0
    assert np.max(np.abs(run.U.values - riccati.steady_profile(grid.x))) < 1e-14


def test_rescaled_time_bookkeeping(grid):
    U0 = riccati.perturbed_profile(grid, riccati.default_perturbation(0.05))
    run = riccati.dynamic_rescaling_evolve(U0, 3.0, 0.01, C_omega0=0.7)
    # c_omega = -1: C_omega = 0.7 e^{-tau}, t = 0.7 (1 - e^{-tau})
    assert np.max(np.abs(run.C_omega - 0.7 * np.exp(-run.tau))) < 1e-8
    assert np.max(np.abs(run.t_phys - 0.7 * (1 - np.exp(-run.tau)))) < 1e-8


def test_basin_exit_is_reported(grid):
    U0 = riccati.perturbed_profile(grid, lambda x: 0.3 * np.minimum(1, np.abs(x) ** 3))
    with pytest.raises(riccati.BasinExit):
        riccati.dynamic_rescaling_evolve(U0, 1.0, 0.01)


# ---------------------------------------------------------------- sensitivity


def test_sensitivity_of_zero_direction(grid):
    z = Profile1D.from_function(grid, lambda x: 0 * x)
    assert riccati.blowup_time_sensitivity(ubar(grid), z) == 0.0


def test_sensitivity_positive_direction(grid):
    v0 = Profile1D.from_function(grid, lambda x: 0.3 * np.exp(-(x**2)))
    assert abs(riccati.blowup_time_sensitivity(ubar(grid), v0) - 0.3) < 1e-6


def test_sensitivity_negative_direction_is_two_sided(grid):
    # the one-sided limit is v0(0) for either sign when the maximizer is nondegenerate
    v0 = Profile1D.from_function(grid, lambda x: -0.3 * np.exp(-(x**2)))
    assert abs(riccati.blowup_time_sensitivity(ubar(grid), v0) + 0.3) < 1e-6


def test_sensitivity_negative_direction_documented_value(grid):
    # documented example: max(v0(0), 0) = 0 for v0(0) = -0.3; the limit computed here is -0.3
    v0 = Profile1D.from_function(grid, lambda x: -0.3 * np.exp(-(x**2)))
    assert abs(riccati.blowup_time_sensitivity(ubar(grid), v0) - 0.0) < 1e-6


def test_sensitivity_rejects_separated_maxima(grid):
    twin = Profile1D.from_function(grid, lambda x: np.exp(-((np.abs(x) - 2) ** 2)))
    bump = Profile1D.from_function(grid, lambda x: np.exp(-(x**2)))
    with pytest.raises(ValueError):
        riccati.blowup_time_sensitivity(twin, bump)
