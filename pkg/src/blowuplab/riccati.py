"""The Riccati-type PDE u_t = u^2: exact, linearized and dynamically
rescaled dynamics around the self-similar profile 1/(1 + x^2)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .line import Grid1D, Profile1D, lp_norm, symmetric_log_grid

C_L = 0.5
C_OMEGA = -1.0
BASIN = 0.25


def steady_profile(x):
    return 1.0 / (1.0 + np.asarray(x, dtype=float) ** 2)


def self_similar(t, x):
    return 1.0 / (1.0 - t + np.asarray(x, dtype=float) ** 2)


def default_grid() -> Grid1D:
    return symmetric_log_grid(40.0, 1e-8, 2000)


def blowup_time(u0: Profile1D) -> float:
    m = float(np.max(u0.values))
    return np.inf if m <= 0 else 1.0 / m


def exact_solution(u0: Profile1D, t: float) -> Profile1D:
    """u(t, x) = u0 / (1 - t u0), valid before the pointwise blowup time."""
    if t >= blowup_time(u0):
        raise ValueError(f"t = {t} is at or past the blowup time {blowup_time(u0)}")
    vals = u0.values / (1.0 - t * u0.values)
    ex = None
    if u0.exact is not None:
        f = u0.exact
        ex = lambda x: f(x) / (1.0 - t * f(x))  # noqa: E731
    return Profile1D(u0.grid, vals, ex)


def linearized_solution(v0: Profile1D, t: float) -> Profile1D:
    """Solution of v_t = 2 u_bar v: v0 (1+x^2)^2 / (1-t+x^2)^2."""
    if t >= 1.0:
        raise ValueError("the background blows up at t = 1")
    x = v0.x
    amp = ((1 + x**2) / (1 - t + x**2)) ** 2
    ex = None
    if v0.exact is not None:
        f = v0.exact
        ex = lambda y: f(y) * ((1 + y**2) / (1 - t + y**2)) ** 2  # noqa: E731
    return Profile1D(v0.grid, v0.values * amp, ex)


@dataclass(frozen=True)
class GrowthFactor:
    t: float
    p: float
    value: float  # ||v(t)||_p / ||v0||_p
    rescaled: float  # ||V(t)||_p / ||V0||_p under v = V(x/(1-t)^{1/2}, t)/(1-t)


def growth_factor_lp(v0: Profile1D, t: float, p: float) -> GrowthFactor:
    n0 = lp_norm(v0.values, v0.grid, p)
    if n0 == 0:
        raise ValueError("v0 has zero norm")
    v = linearized_solution(v0, t)
    lam = lp_norm(v.values, v.grid, p) / n0
    # V(y, t) = (1-t) v(y sqrt(1-t), t), evaluated on the same nodes
    y = v0.x
    xs = y * np.sqrt(1 - t)
    V = (1 - t) * v0(xs) * ((1 + xs**2) / (1 - t + xs**2)) ** 2
    Lam = lp_norm(V, v0.grid, p) / n0
    return GrowthFactor(t, p, lam, Lam)


# ---------------------------------------------------------------- dynamic rescaling


@dataclass(frozen=True)
class PerturbationClass:
    epsilon: float
    C: float = 1.0

    def __post_init__(self):
        if not 0 < self.epsilon <= 0.125:
            raise ValueError("epsilon must lie in (0, 1/8]")

    def contains(self, V0: np.ndarray, x: np.ndarray) -> bool:
        return bool(np.all(np.abs(V0) <= self.epsilon * np.minimum(1.0, np.abs(x) ** 3) * (1 + 1e-12)))


@dataclass
class RescalingState:
    tau: float
    C_omega: float
    C_l: float
    t: float
    c_l: float = C_L
    c_omega: float = C_OMEGA

    @property
    def blowup_time(self) -> float:
        # remaining int_tau^inf C_omega(s) ds with constant c_omega
        return self.t + self.C_omega / (-self.c_omega)


class BasinExit(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


def stability_weight(x):
    ax = np.abs(x)
    with np.errstate(divide="ignore"):
        return np.where(ax > 0, ax ** -3.0 + 1.0, np.inf)


def damping(x):
    """c_omega + 2 U_bar + c_l x rho_x / rho for rho = |x|^-3 + 1."""
    ax = np.abs(x)
    return C_OMEGA + 2 * steady_profile(x) + C_L * (-3 * ax**-3) / (ax**-3 + 1)


def perturbed_profile(grid: Grid1D, V0) -> Profile1D:
    """U0 = U_bar + V0, remembering V0 exactly."""
    V = np.asarray(V0(grid.x) if callable(V0) else V0, dtype=float)
    return Profile1D(grid, steady_profile(grid.x) + V, deviation=V)


def default_perturbation(eps: float):
    """eps min(1, |x|^3) with a smooth cosine taper to zero at |x| = 20."""

    def V0(x):
        ax = np.abs(x)
        taper = np.where(ax < 20, 0.5 * (1 + np.cos(np.pi * ax / 20)), 0.0)
        return eps * np.minimum(1.0, ax**3) * taper

    return V0


def _riccati_step(a, v, dt):
    """Exact flow of y' = -y + y^2 over dt, returned as F(a+v) - F(a)."""
    E = np.exp(dt)
    return E * v / ((a + v + (1 - a - v) * E) * (a + (1 - a) * E))


@dataclass
class RescaledRun:
    U: Profile1D
    state: RescalingState
    tau: np.ndarray
    energy: np.ndarray
    C_omega: np.ndarray = field(repr=False)
    t_phys: np.ndarray = field(repr=False)


def dynamic_rescaling_evolve(
    U0: Profile1D, tau_end: float, dt: float, C_omega0: float = 1.0, max_energy: float = BASIN
) -> RescaledRun:
    """Integrate U_tau + x U_x / 2 = -U + U^2.

    Each step follows the characteristic x -> x e^{dt/2} backwards
    (cubic interpolation of V rho in log|x| on each side) and applies the
    exact Riccati flow to V = U - U_bar, so V(0) = 0 is kept exactly.
    E(tau) = ||V (|x|^-3 + 1)||_inf is recorded after every step.
    """
    if dt <= 0 or C_L * dt > 1.0:
        raise ValueError("time step outside the stable range 0 < dt <= 2")
    x = U0.x
    if not (np.allclose(x, -x[::-1]) and np.any(x == 0)):
        raise ValueError("dynamic rescaling needs a symmetric grid containing 0")
    V = U0.deviation if U0.deviation is not None else U0.values - steady_profile(x)
    V = np.array(V, dtype=float)
    i0 = int(np.flatnonzero(x == 0)[0])
    V[i0] = 0.0
    pos, neg = slice(i0 + 1, None), slice(None, i0)
    xp = x[pos]
    sp = np.log(xp)
    rho_p = xp**-3.0 + 1.0
    # departure points and profile values there are fixed for a fixed dt
    s_dep = sp - C_L * dt
    x_dep = np.exp(s_dep)
    rho_dep = x_dep**-3.0 + 1.0
    a_dep = steady_profile(x_dep)

    nsteps = int(round(tau_end / dt))
    taus = np.arange(nsteps + 1) * dt
    energy = np.empty(nsteps + 1)
    Cw = np.empty(nsteps + 1)
    tp = np.empty(nsteps + 1)
    C_omega, t = C_omega0, 0.0
    Wp, Wn = V[pos] * rho_p, V[neg][::-1] * rho_p
    energy[0], Cw[0], tp[0] = max(np.max(np.abs(Wp)), np.max(np.abs(Wn))), C_omega, t
    decay = np.exp(C_OMEGA * dt)
    for k in range(1, nsteps + 1):
        for side in (0, 1):
            W = Wp if side == 0 else Wn
            v_dep = CubicSpline(sp, W)(s_dep) / rho_dep
            W_new = _riccati_step(a_dep, v_dep, dt) * rho_p
            if side == 0:
                Wp = W_new
            else:
                Wn = W_new
        t += C_omega * (1 - decay) / (-C_OMEGA)
        C_omega *= decay
        energy[k], Cw[k], tp[k] = max(np.max(np.abs(Wp)), np.max(np.abs(Wn))), C_omega, t
        if energy[k] > max_energy:
            raise BasinExit(
                f"E = {energy[k]:.3g} left the stability basin at tau = {taus[k]:.3g}",
                (taus[: k + 1], energy[: k + 1]),
            )
    V = np.zeros_like(x)
    V[pos] = Wp / rho_p
    V[neg] = (Wn / rho_p)[::-1]
    U = Profile1D(U0.grid, steady_profile(x) + V, deviation=V)
    state = RescalingState(taus[-1], C_omega, float(np.exp(-C_L * taus[-1])), t)
    return RescaledRun(U, state, taus, energy, Cw, tp)


def rescale_initial(u0: Profile1D) -> tuple[Profile1D, float]:
    """U0 = C_omega(0) u0 with C_omega(0) = 1/u0(0), so that U0(0) = 1."""
    x = u0.x
    i0 = int(np.flatnonzero(x == 0)[0])
    C0 = 1.0 / u0.values[i0]
    dev = None if u0.deviation is None else C0 * u0.deviation
    return Profile1D(u0.grid, C0 * u0.values, deviation=dev), C0


# ---------------------------------------------------------------- blowup time


def _refined_max(fn, x, vals):
    i = int(np.argmax(vals))
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, x.size - 1)]
    if hi <= lo:
        return float(vals[i])
    r = minimize_scalar(lambda y: -fn(np.array([y]))[0], bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
    return max(float(-r.fun), float(vals[i]))


def blowup_time_sensitivity(u0: Profile1D, v0: Profile1D, eps=(1e-2, 1e-3, 1e-4)) -> float:
    """Richardson-extrapolated limit of (T(u0) - T(u0 + e v0)) / e."""
    x = u0.x
    top = np.max(u0.values)
    near = np.flatnonzero(u0.values >= top - 1e-12 * abs(top))
    if near[-1] - near[0] + 1 != near.size:
        raise ValueError("u0 attains its maximum at separated points")
    T0 = 1.0 / _refined_max(u0, x, u0.values)
    quotients = []
    for e in eps:
        fn = lambda y, e=e: u0(y) + e * v0(y)  # noqa: E731
        m = _refined_max(fn, x, u0.values + e * v0.values)
        quotients.append((T0 - (np.inf if m <= 0 else 1.0 / m)) / e)
    q = np.array(quotients)
    # first-order error in e: eliminate it with the two smallest steps
    e1, e2 = eps[-2], eps[-1]
    return float((e1 * q[-1] - e2 * q[-2]) / (e1 - e2))
