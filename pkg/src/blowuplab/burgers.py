"""Inviscid Burgers u_t + u u_x = 0 by exact characteristics, and the
L^p growth of its linearization v_t + (u v)_x = 0 up to the shock time."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .line import Grid1D, Profile1D, fit_slope, lp_norm, uniform_grid

BISECT_TOL = 1e-12


@dataclass(frozen=True)
class BurgersData:
    u0: Callable[[np.ndarray], np.ndarray]
    du0: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    check_span: float = 6.0

    def __post_init__(self):
        if abs(float(self.u0(np.array([0.0]))[0])) > 1e-14:
            raise ValueError("u0(0) must vanish")
        s = np.linspace(-self.check_span, self.check_span, 4001)
        d = self.du0(s)
        if self.du0(np.array([0.0]))[0] >= 0:
            raise ValueError("u0'(0) must be negative")
        if np.min(d) < self.du0(np.array([0.0]))[0] - 1e-12:
            raise ValueError("u0' must be minimal at 0")

    @property
    def T_star(self) -> float:
        return -1.0 / float(self.du0(np.array([0.0]))[0])

    @property
    def sup_u0(self) -> float:
        s = np.linspace(-self.check_span, self.check_span, 4001)
        return float(np.max(np.abs(self.u0(s))))

    def X(self, t, a):
        return a + t * self.u0(a)

    def jacobian(self, t, a):
        return 1.0 + t * self.du0(a)


def gaussian_wave() -> BurgersData:
    """u0 = -x exp(-x^2), shock time 1."""
    return BurgersData(
        lambda x: -x * np.exp(-(x**2)),
        lambda x: (2 * x**2 - 1) * np.exp(-(x**2)),
        "gaussian_wave",
    )


def invert_characteristics(data: BurgersData, t: float, x) -> np.ndarray:
    """Foot points a with a + t u0(a) = x: vectorised bisection, then one Newton step."""
    if t >= data.T_star:
        raise ValueError(f"t = {t} is at or past the shock time {data.T_star}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    M = data.sup_u0 * t * 1.01 + 1e-14
    lo, hi = x - M, x + M
    flo = data.X(t, lo) - x
    fhi = data.X(t, hi) - x
    if np.any(flo > 0) or np.any(fhi < 0):
        raise RuntimeError("characteristic root is not bracketed")
    while np.max(hi - lo) > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        f = data.X(t, mid) - x
        left = f > 0
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
    a = 0.5 * (lo + hi)
    return a - (data.X(t, a) - x) / data.jacobian(t, a)


def solve_characteristics(data: BurgersData, t: float, x):
    """(u, u_x) at (t, x) from u = u0(a), u_x = u0'(a) / (1 + t u0'(a))."""
    scalar = np.ndim(x) == 0
    a = invert_characteristics(data, t, x)
    u = data.u0(a)
    ux = data.du0(a) / data.jacobian(t, a)
    if scalar:
        return float(u[0]), float(ux[0])
    return u, ux


def trapping_halfwidth(data: BurgersData, t_end: float, n_times: int = 64, n_x: int = 201, kmax: int = 40) -> float:
    """Largest dyadic delta with -u_x(t, x) >= -u_x(t, 0) / 2 on [-delta, delta]
    for every sampled t in [0, t_end]."""
    times = np.linspace(0.0, t_end, n_times)
    for k in range(0, kmax):
        delta = 2.0**-k
        xs = np.linspace(-delta, delta, n_x)
        ok = True
        for t in times:
            _, ux = solve_characteristics(data, t, xs)
            _, ux0 = solve_characteristics(data, t, 0.0)
            if np.any(-ux < -0.5 * ux0 * (1 - 1e-12)):
                ok = False
                break
        if ok:
            return delta
    raise RuntimeError("no trapping interval found")


def linearized_evolve(data: BurgersData, v0: Profile1D, t: float, delta: float | None = None) -> Profile1D:
    """Transport v0 to time t along characteristics.

    v(t, X(t, a)) = v0(a) exp(-int_0^t u_x(s, X(s, a)) ds), and along a
    characteristic the integral is log(1 + t u0'(a)). The result lives on
    the pushed-forward nodes X(t, a_i) with weights w_i (1 + t u0'(a_i)),
    so its quadrature is exact change of variables.
    """
    if t >= data.T_star:
        raise ValueError(f"t = {t} is at or past the shock time {data.T_star}")
    a = v0.x
    if delta is not None:
        supp = a[v0.values != 0]
        if supp.size and np.max(np.abs(data.X(t, supp))) > delta * (1 + 1e-12):
            raise ValueError("support left the trapping region")
    J = data.jacobian(t, a)
    grid = Grid1D(data.X(t, a), v0.grid.w * J)
    return Profile1D(grid, v0.values / J)


def bump(center: float, halfwidth: float):
    def f(x):
        y = (np.asarray(x, dtype=float) - center) / halfwidth
        out = np.zeros_like(y)
        inside = np.abs(y) < 1
        out[inside] = np.exp(1 - 1 / (1 - y[inside] ** 2))
        return out

    return f


@dataclass
class GrowthEstimate:
    """Lower bound on the L^p growth factor, with the sampling that produced it."""

    t: float
    p: float
    value: float
    bound: float
    samples: list = field(default_factory=list)

    @property
    def margin(self) -> float:
        return self.value / self.bound


def growth_factor_lp(
    data: BurgersData, t: float, p: float, delta: float, fractions=(1.0, 0.5, 0.25), n: int = 2001
) -> GrowthEstimate:
    """max over centred bumps supported in [-f delta, f delta] of ||v(t)||_p / ||v0||_p."""
    best, samples = 0.0, []
    for f in fractions:
        g = uniform_grid(-f * delta, f * delta, n)
        v0 = Profile1D.from_function(g, bump(0.0, f * delta))
        v = linearized_evolve(data, v0, t, delta)
        r = lp_norm(v.values, v.grid, p) / lp_norm(v0.values, v0.grid, p)
        samples.append({"halfwidth": f * delta, "ratio": r})
        best = max(best, r)
    bound = (data.T_star - t) ** (-(1 - 1 / p) / 2) if np.isfinite(p) else (data.T_star - t) ** -0.5
    return GrowthEstimate(t, p, best, bound, samples)


def growth_slope(estimates: list[GrowthEstimate], T_star: float) -> float:
    return fit_slope([T_star - e.t for e in estimates], [e.value for e in estimates])


def energy_identity_residual(data: BurgersData, v0: Profile1D, t: float, p: float, dt: float = 1e-5) -> float:
    """Relative mismatch of d/dt ||v||_p^p against (p-1) int (-u_x) |v|^p."""
    if t - dt < 0:
        raise ValueError("need t >= dt")

    def norm_p(s):
        v = linearized_evolve(data, v0, s)
        return v.grid.w @ np.abs(v.values) ** p

    lhs = (norm_p(t + dt) - norm_p(t - dt)) / (2 * dt)
    v = linearized_evolve(data, v0, t)
    ux = data.du0(v0.x) / data.jacobian(t, v0.x)
    rhs = (p - 1) * (v.grid.w @ (-ux * np.abs(v.values) ** p))
    return float(abs(lhs - rhs) / abs(rhs))
