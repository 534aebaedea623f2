"""Bicharacteristics-amplitude ODEs over analytic velocity fields.

Along a particle path gamma of a divergence-free field u the co-vector xi
and the amplitude b obey

    xi' = -(grad u)^T xi,
    b'  = -(grad u) b + c xi,   c = 2 xi^T (grad u) b / |xi|^2,

with (grad u)_ij = d_j u_i. This module integrates the system (and its
Boussinesq counterpart) with fixed-step RK4, checks the quantities it
conserves, and estimates the amplitude growth factor by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.stats import qmc

XI_FLOOR = 1e-12
BAND = 1e-9  # distance from the symmetry set below which a sample is rejected


class IntegrationError(RuntimeError):
    pass


# ---------------------------------------------------------------- fields


def _vorticity_from_grad(G: np.ndarray) -> np.ndarray:
    return np.stack(
        [G[..., 2, 1] - G[..., 1, 2], G[..., 0, 2] - G[..., 2, 0], G[..., 1, 0] - G[..., 0, 1]], axis=-1
    )


@dataclass(frozen=True, eq=False)
class AnalyticVelocityField:
    """u(t, X) -> (N, 3) and grad(t, X) -> (N, 3, 3) for points X of shape (N, 3).

    `euler` marks fields that are exact (steady or not) Euler solutions, for
    which the vorticity is carried by the flow and omega . xi is conserved.
    """

    name: str
    u: Callable[[float, np.ndarray], np.ndarray]
    grad: Callable[[float, np.ndarray], np.ndarray]
    pressure: Callable[[float, np.ndarray], np.ndarray] | None = None
    axisymmetric: bool = False
    steady: bool = True
    euler: bool = False
    params: dict = field(default_factory=dict)

    def omega(self, t: float, X) -> np.ndarray:
        return _vorticity_from_grad(self.grad(t, np.atleast_2d(X)))

    def check(self, points: np.ndarray, t: float = 0.0, tol: float = 1e-10) -> dict:
        """Divergence and (if flagged) axisymmetry at the given points."""
        X = np.atleast_2d(points)
        div = np.abs(np.trace(self.grad(t, X), axis1=1, axis2=2))
        out = {"max_divergence": float(div.max()), "axisymmetric_defect": 0.0}
        if div.max() > tol:
            raise ValueError(f"{self.name}: divergence {div.max():.2e} at sampled points")
        if self.axisymmetric:
            r = np.hypot(X[:, 0], X[:, 1])
            th = np.arctan2(X[:, 1], X[:, 0])
            comps = []
            for shift in (0.0, 0.7, 2.1):
                Y = np.stack([r * np.cos(th + shift), r * np.sin(th + shift), X[:, 2]], axis=1)
                comps.append(cylindrical(self.u(t, Y), Y))
            defect = max(float(np.max(np.abs(c - comps[0]))) for c in comps[1:])
            out["axisymmetric_defect"] = defect
            if defect > tol:
                raise ValueError(f"{self.name}: cylindrical components depend on the angle ({defect:.2e})")
        return out


def cylinder_basis(X: np.ndarray):
    """Unit vectors e_r, e_theta, e_z at points X (N, 3); e_r = e_x on the axis."""
    X = np.atleast_2d(X)
    r = np.hypot(X[:, 0], X[:, 1])
    safe = np.where(r > 0, r, 1.0)
    c = np.where(r > 0, X[:, 0] / safe, 1.0)
    s = np.where(r > 0, X[:, 1] / safe, 0.0)
    z = np.zeros_like(r)
    return np.stack([c, s, z], 1), np.stack([-s, c, z], 1), np.stack([z, z, z + 1], 1)


def cylindrical(V: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Components (V^r, V^theta, V^z) of vectors V attached at points X."""
    er, et, ez = cylinder_basis(X)
    return np.stack([np.sum(V * er, 1), np.sum(V * et, 1), V[:, 2]], 1)


def _const_grad(M):
    M = np.asarray(M, dtype=float)
    return lambda t, X: np.broadcast_to(M, (np.atleast_2d(X).shape[0], 3, 3)).copy()


def zero_field() -> AnalyticVelocityField:
    return AnalyticVelocityField(
        "zero", lambda t, X: np.zeros_like(np.atleast_2d(X), dtype=float), _const_grad(np.zeros((3, 3))),
        pressure=lambda t, X: np.zeros(np.atleast_2d(X).shape[0]), axisymmetric=True, euler=True,
    )


def strain_field(lam=(1.0, -1.0, 0.0)) -> AnalyticVelocityField:
    """u = (l1 x, l2 y, l3 z) with l1 + l2 + l3 = 0."""
    lam = np.asarray(lam, dtype=float)
    if abs(lam.sum()) > 1e-14:
        raise ValueError("strain rates must sum to zero")
    return AnalyticVelocityField(
        "strain", lambda t, X: np.atleast_2d(X) * lam, _const_grad(np.diag(lam)),
        pressure=lambda t, X: -0.5 * np.sum((np.atleast_2d(X) * lam) ** 2, 1),
        axisymmetric=bool(lam[0] == lam[1]), euler=True, params={"lam": lam.tolist()},
    )


def rotation_field(Omega: float = 1.0) -> AnalyticVelocityField:
    """Rigid rotation about the z axis."""
    M = np.array([[0.0, -Omega, 0.0], [Omega, 0.0, 0.0], [0.0, 0.0, 0.0]])
    return AnalyticVelocityField(
        "rotation", lambda t, X: np.atleast_2d(X) @ M.T, _const_grad(M),
        pressure=lambda t, X: 0.5 * Omega**2 * np.sum(np.atleast_2d(X)[:, :2] ** 2, 1),
        axisymmetric=True, euler=True, params={"Omega": Omega},
    )


def shear_field(A: float = 1.0) -> AnalyticVelocityField:
    """Planar shear u = (A y, 0, 0)."""
    M = np.zeros((3, 3))
    M[0, 1] = A
    return AnalyticVelocityField(
        "shear", lambda t, X: np.atleast_2d(X) @ M.T, _const_grad(M),
        pressure=lambda t, X: np.zeros(np.atleast_2d(X).shape[0]), euler=True, params={"A": A},
    )


def abc_field(A: float = 1.0, B: float = np.sqrt(2 / 3), C: float = np.sqrt(1 / 3)) -> AnalyticVelocityField:
    """Arnold-Beltrami-Childress flow; curl u = u, a steady Euler solution."""

    def u(t, X):
        x, y, z = np.atleast_2d(X).T
        return np.stack([A * np.sin(z) + C * np.cos(y), B * np.sin(x) + A * np.cos(z), C * np.sin(y) + B * np.cos(x)], 1)

    def grad(t, X):
        x, y, z = np.atleast_2d(X).T
        G = np.zeros((x.size, 3, 3))
        G[:, 0, 1] = -C * np.sin(y)
        G[:, 0, 2] = A * np.cos(z)
        G[:, 1, 0] = B * np.cos(x)
        G[:, 1, 2] = -A * np.sin(z)
        G[:, 2, 0] = -B * np.sin(x)
        G[:, 2, 1] = C * np.cos(y)
        return G

    return AnalyticVelocityField(
        "abc", u, grad, pressure=lambda t, X: -0.5 * np.sum(u(t, X) ** 2, 1), euler=True,
        params={"A": A, "B": B, "C": C},
    )


def _axisymmetric(name, f, f_r_r, f_z, g, g_r_r, g_z, swirl=None, steady=True, euler=False, params=None):
    """Axisymmetric field u^r = r f(t, r, z), u^z = g(t, r, z) and, when
    swirl = (s, s_r_r, s_z) is given, u^theta = r s(t, r, z).

    The *_r_r callables are radial derivatives divided by r, which stay
    smooth on the axis for fields even in r.
    """

    def u(t, X):
        X = np.atleast_2d(X)
        r, z = np.hypot(X[:, 0], X[:, 1]), X[:, 2]
        fv = f(t, r, z)
        out = np.stack([X[:, 0] * fv, X[:, 1] * fv, g(t, r, z)], 1)
        if swirl is not None:
            sv = swirl[0](t, r, z)
            out[:, 0] -= X[:, 1] * sv
            out[:, 1] += X[:, 0] * sv
        return out

    def grad(t, X):
        X = np.atleast_2d(X)
        x, y, z = X.T
        r = np.hypot(x, y)
        fv, a, fz = f(t, r, z), f_r_r(t, r, z), f_z(t, r, z)
        b, gz = g_r_r(t, r, z), g_z(t, r, z)
        G = np.empty((x.size, 3, 3))
        G[:, 0, 0] = fv + x * x * a
        G[:, 0, 1] = x * y * a
        G[:, 0, 2] = x * fz
        G[:, 1, 0] = x * y * a
        G[:, 1, 1] = fv + y * y * a
        G[:, 1, 2] = y * fz
        G[:, 2, 0] = x * b
        G[:, 2, 1] = y * b
        G[:, 2, 2] = gz
        if swirl is not None:
            sv, sr, sz = (h(t, r, z) for h in swirl)
            G[:, 0, 0] -= x * y * sr
            G[:, 0, 1] -= sv + y * y * sr
            G[:, 0, 2] -= y * sz
            G[:, 1, 0] += sv + x * x * sr
            G[:, 1, 1] += x * y * sr
            G[:, 1, 2] += x * sz
        return G

    return AnalyticVelocityField(name, u, grad, axisymmetric=True, steady=steady, euler=euler, params=params or {})


def hill_vortex(c: float = 1.0, a: float = 1.5) -> AnalyticVelocityField:
    """Interior of Hill's spherical vortex: u^r = 2c r z, u^z = c(2a^2 - 4r^2 - 2z^2).

    omega^theta = 10 c r, so omega^theta / r is constant and the field is a
    steady swirl-free Euler solution. The sphere r^2 + z^2 = a^2 is a
    stream surface; the default a = 1.5 contains the unit cylinder |z| <= 1.
    """
    zero = lambda t, r, z: 0.0 * r  # noqa: E731
    return _axisymmetric(
        "hill",
        lambda t, r, z: 2 * c * z,
        zero,
        lambda t, r, z: 2 * c + 0.0 * r,
        lambda t, r, z: c * (2 * a * a - 4 * r * r - 2 * z * z),
        lambda t, r, z: -8 * c + 0.0 * r,
        lambda t, r, z: -4 * c * z,
        euler=True,
        params={"c": c, "a": a},
    )


def bounded_axisymmetric(amp: float = -1.0, growth: float = 0.0, swirl: float = 0.0) -> AnalyticVelocityField:
    """Stream function psi = s(t) r^2 (1 - r^2)^2 z exp(-z^2), s = amp (1 + growth t),
    plus an optional swirl u^theta = swirl r (1 - r^2)^2 exp(-z^2).

    u . n = 0 on r = 1 and on z = 0. With amp < 0 the flow comes down the
    axis and leaves along z = 0, and u^r / r is decreasing in r there.
    """
    s = lambda t: amp * (1.0 + growth * t)  # noqa: E731
    h = lambda z: (1 - 2 * z * z) * np.exp(-z * z)  # noqa: E731
    sw = None
    if swirl:
        sw = (
            lambda t, r, z: swirl * (1 - r * r) ** 2 * np.exp(-z * z),
            lambda t, r, z: -4 * swirl * (1 - r * r) * np.exp(-z * z),
            lambda t, r, z: -2 * z * swirl * (1 - r * r) ** 2 * np.exp(-z * z),
        )
    return _axisymmetric(
        "bounded_axisymmetric",
        lambda t, r, z: -s(t) * (1 - r * r) ** 2 * h(z),
        lambda t, r, z: 4 * s(t) * (1 - r * r) * h(z),
        lambda t, r, z: -s(t) * (1 - r * r) ** 2 * (4 * z**3 - 6 * z) * np.exp(-z * z),
        lambda t, r, z: 2 * s(t) * (1 - 4 * r * r + 3 * r**4) * z * np.exp(-z * z),
        lambda t, r, z: 2 * s(t) * (-8 + 12 * r * r) * z * np.exp(-z * z),
        lambda t, r, z: 2 * s(t) * (1 - 4 * r * r + 3 * r**4) * h(z),
        swirl=sw,
        steady=(growth == 0.0),
        params={"amp": amp, "growth": growth, "swirl": swirl},
    )


def axial_strain(g: Callable[[float], float], name: str = "axial_strain") -> AnalyticVelocityField:
    """u = g(t) (x, y, -2z): radial outflow with u^r = r g(t) exactly."""
    one = lambda t, r, z: 1.0 + 0.0 * r  # noqa: E731
    zero = lambda t, r, z: 0.0 * r  # noqa: E731
    return _axisymmetric(
        name,
        lambda t, r, z: g(t) * one(t, r, z),
        zero,
        zero,
        lambda t, r, z: -2 * g(t) * z,
        zero,
        lambda t, r, z: -2 * g(t) * one(t, r, z),
        steady=False,
    )


FIELD_LIBRARY: dict[str, Callable[[], AnalyticVelocityField]] = {
    "zero": zero_field,
    "strain": strain_field,
    "rotation": rotation_field,
    "shear": shear_field,
    "abc": abc_field,
    "hill": hill_vortex,
    "bounded_axisymmetric": bounded_axisymmetric,
    "swirling_axisymmetric": lambda: bounded_axisymmetric(-1.0, 0.5, 2.0),
}


def get_field(name: str) -> AnalyticVelocityField:
    try:
        return FIELD_LIBRARY[name]()
    except KeyError:
        raise ValueError(f"unknown field {name!r}; choose from {sorted(FIELD_LIBRARY)}") from None


# ---------------------------------------------------------------- Euler system


@dataclass
class TrajectoryBundle:
    """Stored states of a batch of N trajectories at the saved times.

    gamma, xi, b, b_tilde have shape (n_saved, N, dim); F is the deformation
    gradient d gamma_t / d x0, c the coefficient multiplying xi in the b
    equation. b_tilde is present when a second amplitude was requested.
    """

    times: np.ndarray
    gamma: np.ndarray
    xi: np.ndarray
    b: np.ndarray
    c: np.ndarray
    F: np.ndarray | None = None
    b_tilde: np.ndarray | None = None
    x0: np.ndarray | None = None
    xi0: np.ndarray | None = None
    b0: np.ndarray | None = None

    @property
    def final(self) -> dict:
        out = {"gamma": self.gamma[-1], "xi": self.xi[-1], "b": self.b[-1]}
        if self.b_tilde is not None:
            out["b_tilde"] = self.b_tilde[-1]
        return out


def _batch(v, N=None):
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if N is not None and v.shape[0] == 1 and N > 1:
        v = np.repeat(v, N, axis=0)
    return v


def _euler_rhs(fld, t, g, xi, B, F):
    A = fld.grad(t, g)
    xi2 = np.sum(xi * xi, 1)
    dxi = -np.einsum("nji,nj->ni", A, xi)
    AB = np.einsum("nij,nkj->nki", A, B)
    c = 2 * np.einsum("ni,nki->nk", xi, AB) / xi2[:, None]
    dB = -AB + c[:, :, None] * xi[:, None, :]
    return fld.u(t, g), dxi, dB, A @ F, c


def _check_state(xi, *arrays):
    if np.any(np.sqrt(np.sum(xi * xi, 1)) < XI_FLOOR):
        raise IntegrationError("|xi| fell below 1e-12")
    for a in (xi,) + arrays:
        if not np.all(np.isfinite(a)):
            raise IntegrationError("non-finite state; step rejected")


def _rk4(rhs, t0, state, dt, nsteps, save_every, check):
    """Classical RK4 over a tuple of arrays; rhs returns derivatives plus an aux array."""
    saved_t, saved, saved_aux = [t0], [tuple(s.copy() for s in state)], [rhs(t0, *state)[-1]]
    t = t0
    for k in range(1, nsteps + 1):
        k1 = rhs(t, *state)
        k2 = rhs(t + dt / 2, *(s + dt / 2 * d for s, d in zip(state, k1)))
        k3 = rhs(t + dt / 2, *(s + dt / 2 * d for s, d in zip(state, k2)))
        k4 = rhs(t + dt, *(s + dt * d for s, d in zip(state, k3)))
        state = tuple(s + dt / 6 * (a + 2 * b + 2 * c + d) for s, a, b, c, d in zip(state, k1, k2, k3, k4))
        t = t0 + k * dt
        check(*state)
        if k % save_every == 0 or k == nsteps:
            saved_t.append(t)
            saved.append(tuple(s.copy() for s in state))
            saved_aux.append(rhs(t, *state)[-1])
    return np.array(saved_t), saved, saved_aux


def _steps(t_end, dt):
    if dt == 0 or t_end / dt < 0:
        raise ValueError("dt must be nonzero with the sign of t_end")
    n = int(round(t_end / dt))
    return max(n, 0), (t_end / n if n else dt)


def integrate_euler(
    fld: AnalyticVelocityField, x0, xi0, b0, t_end: float, dt: float, b_tilde0=None, save_every: int = 1,
    t0: float = 0.0, method: str = "rk4", rtol: float = 1e-10,
) -> TrajectoryBundle:
    """Integrate gamma, xi, b (and optionally a second amplitude) from t0 to t_end
    for a batch of starts.

    A negative dt integrates backward in time. method="rk45" hands the
    same right-hand side to an adaptive embedded pair instead.
    """
    x0 = _batch(x0)
    N = x0.shape[0]
    xi0, b0 = _batch(xi0, N), _batch(b0, N)
    if np.any(np.linalg.norm(xi0, axis=1) <= 0):
        raise ValueError("xi0 must be nonzero")
    amps = [b0] if b_tilde0 is None else [b0, _batch(b_tilde0, N)]
    B0 = np.stack(amps, 1)
    F0 = np.repeat(np.eye(3)[None], N, 0)
    state = (x0.copy(), xi0.copy(), B0, F0)

    def rhs(t, g, xi, B, F):
        return _euler_rhs(fld, t, g, xi, B, F)

    if method == "rk4":
        nsteps, h = _steps(t_end - t0, dt)
        times, saved, aux = _rk4(rhs, t0, state, h, nsteps, save_every, lambda g, xi, B, F: _check_state(xi, g, B))
    elif method == "rk45":
        times, saved, aux = _adaptive(rhs, t0, t_end, state, rtol)
    else:
        raise ValueError(f"unknown method {method!r}")
    G = np.array([s[0] for s in saved])
    XI = np.array([s[1] for s in saved])
    BB = np.array([s[2] for s in saved])
    FF = np.array([s[3] for s in saved])
    C = np.array(aux)
    return TrajectoryBundle(
        times, G, XI, BB[:, :, 0], C[:, :, 0], FF, BB[:, :, 1] if len(amps) > 1 else None, x0, xi0, b0
    )


def _adaptive(rhs, t0, t_end, state, rtol):
    shapes = [s.shape for s in state]
    sizes = [s.size for s in state]

    def unpack(y):
        out, i = [], 0
        for shp, n in zip(shapes, sizes):
            out.append(y[i : i + n].reshape(shp))
            i += n
        return out

    def f(t, y):
        d = rhs(t, *unpack(y))[:-1]
        return np.concatenate([a.ravel() for a in d])

    y0 = np.concatenate([s.ravel() for s in state])
    sol = solve_ivp(f, (t0, t_end), y0, method="RK45", rtol=rtol, atol=rtol * 1e-2)
    if not sol.success:
        raise IntegrationError(sol.message)
    saved = [tuple(unpack(y)) for y in sol.y.T]
    for s in saved:
        _check_state(s[1], s[0], s[2])
    aux = [rhs(t, *s)[-1] for t, s in zip(sol.t, saved)]
    return sol.t, saved, aux


# ---------------------------------------------------------------- Boussinesq system


@dataclass(frozen=True, eq=False)
class BoussinesqField:
    """Planar velocity u(t, X) -> (N, 2), its gradient (N, 2, 2) and grad theta (N, 2)."""

    name: str
    u: Callable
    grad_u: Callable
    grad_theta: Callable

    def z_matrix(self, t, X):
        """The 3x3 matrix d_x z for z = (theta, u1, u2); the first column is zero."""
        Gu, Gt = self.grad_u(t, X), self.grad_theta(t, X)
        Z = np.zeros((Gu.shape[0], 3, 3))
        Z[:, 0, 1:] = Gt
        Z[:, 1:, 1:] = Gu
        return Z


def planar_boussinesq(fld: AnalyticVelocityField, grad_theta=None, name=None) -> BoussinesqField:
    """Restrict a 3D field with no z dependence to the (x, y) plane."""

    def lift(X):
        X = np.atleast_2d(X)
        return np.column_stack([X, np.zeros(X.shape[0])])

    gt = grad_theta or (lambda t, X: np.zeros((np.atleast_2d(X).shape[0], 2)))
    return BoussinesqField(
        name or fld.name,
        lambda t, X: fld.u(t, lift(X))[:, :2],
        lambda t, X: fld.grad(t, lift(X))[:, :2, :2],
        gt,
    )


def cellular_flow(U: float = 1.0, theta_amp: float = 0.5) -> BoussinesqField:
    """u = U (sin x cos y, -cos x sin y) with theta = theta_amp cos x sin y.

    u2 vanishes on y = 0 and u1 on x = 0, so both lines are invariant.
    """

    def u(t, X):
        x, y = np.atleast_2d(X).T
        return U * np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)], 1)

    def grad_u(t, X):
        x, y = np.atleast_2d(X).T
        G = np.empty((x.size, 2, 2))
        G[:, 0, 0] = U * np.cos(x) * np.cos(y)
        G[:, 0, 1] = -U * np.sin(x) * np.sin(y)
        G[:, 1, 0] = U * np.sin(x) * np.sin(y)
        G[:, 1, 1] = -U * np.cos(x) * np.cos(y)
        return G

    def grad_theta(t, X):
        x, y = np.atleast_2d(X).T
        return theta_amp * np.stack([-np.sin(x) * np.sin(y), np.cos(x) * np.cos(y)], 1)

    return BoussinesqField("cellular", u, grad_u, grad_theta)


def _lift_xi(xi):
    return np.column_stack([np.zeros(xi.shape[0]), xi])


def _bous_rhs(fld, t, g, xi, B, F):
    Z = fld.z_matrix(t, g)
    Gu = Z[:, 1:, 1:]
    xv = _lift_xi(xi)
    xi2 = np.sum(xi * xi, 1)
    dxi = -np.einsum("nji,nj->ni", Gu, xi)
    ZB = np.einsum("nij,nkj->nki", Z, B)
    LB = np.zeros_like(B)
    LB[:, :, 2] = B[:, :, 0]
    c = (2 * np.einsum("ni,nki->nk", xv, ZB) - np.einsum("ni,nki->nk", xv, LB)) / xi2[:, None]
    dB = -ZB + LB + c[:, :, None] * xv[:, None, :]
    return fld.u(t, g), dxi, dB, Gu @ F, c


def integrate_boussinesq(
    fld: BoussinesqField, x0, xi0, b0, t_end: float, dt: float, b_tilde0=None, save_every: int = 1
) -> TrajectoryBundle:
    """RK4 for gamma in R^2, xi in R^2 and b = (b_theta, b1, b2) in R^3."""
    x0 = _batch(x0)
    N = x0.shape[0]
    xi0, b0 = _batch(xi0, N), _batch(b0, N)
    if x0.shape[1] != 2 or xi0.shape[1] != 2 or b0.shape[1] != 3:
        raise ValueError("expected x0, xi0 in R^2 and b0 in R^3")
    if np.any(np.linalg.norm(xi0, axis=1) <= 0):
        raise ValueError("xi0 must be nonzero")
    amps = [b0] if b_tilde0 is None else [b0, _batch(b_tilde0, N)]
    state = (x0.copy(), xi0.copy(), np.stack(amps, 1), np.repeat(np.eye(2)[None], N, 0))
    nsteps, h = _steps(t_end, dt)
    times, saved, aux = _rk4(
        lambda t, *s: _bous_rhs(fld, t, *s), 0.0, state, h, nsteps, save_every,
        lambda g, xi, B, F: _check_state(xi, g, B),
    )
    BB = np.array([s[2] for s in saved])
    C = np.array(aux)
    return TrajectoryBundle(
        times, np.array([s[0] for s in saved]), np.array([s[1] for s in saved]), BB[:, :, 0], C[:, :, 0],
        np.array([s[3] for s in saved]), BB[:, :, 1] if len(amps) > 1 else None, x0, xi0, b0,
    )


def lifted_dot(b, xi):
    """b . (0, xi1, xi2) for Boussinesq amplitudes."""
    return np.sum(b[..., 1:] * xi, -1)


# ---------------------------------------------------------------- conservation laws


@dataclass
class ConservationReport:
    times: np.ndarray
    omega_xi: np.ndarray | None
    b_xi: np.ndarray
    triple: np.ndarray | None
    drift: dict
    relative_drift: dict
    omega_source: str = "field"

    def worst(self) -> float:
        return max(self.relative_drift.values())


def _drift(q: np.ndarray, scale: np.ndarray):
    d = np.max(np.abs(q - q[0]))
    s = np.max(scale)
    return float(d), float(d / s) if s > 0 else float(d)


def conservation_report(bundle: TrajectoryBundle, fld: AnalyticVelocityField) -> ConservationReport:
    """Time series of omega . xi, b . xi and (b x b~) . xi along the trajectories.

    For Euler fields omega is the field's own vorticity at gamma_t; for
    other fields it is the vorticity carried by the flow, F omega_0, which
    is what an Euler solution with the same flow map would have.
    """
    xi, b = bundle.xi, bundle.b
    nx = np.linalg.norm(xi, axis=-1)
    if fld.euler:
        om = np.array([fld.omega(t, g) for t, g in zip(bundle.times, bundle.gamma)])
        source = "field"
    else:
        om0 = fld.omega(bundle.times[0], bundle.gamma[0])
        om = np.einsum("tnij,nj->tni", bundle.F, om0)
        source = "transported"
    oxi = np.sum(om * xi, -1)
    bxi = np.sum(b * xi, -1)
    drift, rel = {}, {}
    drift["omega_xi"], rel["omega_xi"] = _drift(oxi, np.linalg.norm(om, axis=-1) * nx)
    drift["b_xi"], rel["b_xi"] = _drift(bxi, np.linalg.norm(b, axis=-1) * nx)
    triple = None
    if bundle.b_tilde is not None:
        bt = bundle.b_tilde
        triple = np.sum(np.cross(b, bt) * xi, -1)
        scale = np.linalg.norm(b, axis=-1) * np.linalg.norm(bt, axis=-1) * nx
        drift["triple"], rel["triple"] = _drift(triple, scale)
    return ConservationReport(bundle.times, oxi, bxi, triple, drift, rel, source)


# ---------------------------------------------------------------- growth estimators


@dataclass(frozen=True)
class BetaSampler:
    """Latin-hypercube sampler over (r, theta, z, phi) with phi the angle of
    xi0 = cos(phi) e_r + sin(phi) e_z. Points within BAND of the symmetry
    set (r = r_max, r = 0, z = 0) are discarded."""

    n: int = 4096
    seed: int = 0
    r: tuple = (0.0, 1.0)
    z: tuple = (-1.0, 1.0)
    theta: tuple = (0.0, 2 * np.pi)
    sigma: float = 0.0
    ascent_iters: int = 24
    extra: np.ndarray | None = None  # additional (r, theta, z, phi) rows always evaluated

    def draw(self) -> np.ndarray:
        lo = np.array([self.r[0], self.theta[0], self.z[0], 0.0])
        hi = np.array([self.r[1], self.theta[1], self.z[1], np.pi])
        P = qmc.scale(qmc.LatinHypercube(d=4, seed=self.seed).random(self.n), lo, hi) if self.n else np.empty((0, 4))
        if self.extra is not None:
            P = np.vstack([P, np.atleast_2d(self.extra)])
        return P[self.admissible(P)]

    def admissible(self, P) -> np.ndarray:
        P = np.atleast_2d(P)
        return (P[:, 0] > BAND) & (P[:, 0] < self.r[1] - BAND) & (np.abs(P[:, 2]) > BAND)

    def spec(self) -> dict:
        return {"n": self.n, "seed": self.seed, "r": list(self.r), "z": list(self.z), "sigma": self.sigma}


@dataclass
class BetaEstimate:
    """Certified lower bound on a growth factor: a max over evaluated samples."""

    t: float
    value: float
    flavor: str
    sampler: dict
    best: np.ndarray
    n_evaluated: int
    sample_values: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


def _starts(P):
    r, th, z, phi = P.T
    x0 = np.stack([r * np.cos(th), r * np.sin(th), z], 1)
    er, et, ez = cylinder_basis(x0)
    xi0 = np.cos(phi)[:, None] * er + np.sin(phi)[:, None] * ez
    n = -np.sin(phi)[:, None] * er + np.cos(phi)[:, None] * ez
    return x0, xi0, et, n


def amplitude_gain(fld: AnalyticVelocityField, P: np.ndarray, t: float, dt: float, sigma: float = 0.0) -> np.ndarray:
    """sup over unit b0 perpendicular to xi0 of (r0 / r_t)^sigma |b_t|, per sample row.

    b_t is linear in b0, so the sup over the circle of b0 is the largest
    singular value of [b_t(e_theta), b_t(n)], n the second unit normal.
    """
    x0, xi0, et, n = _starts(np.atleast_2d(P))
    bun = integrate_euler(fld, x0, xi0, et, t, dt, b_tilde0=n, save_every=10**9)
    M = np.stack([bun.b[-1], bun.b_tilde[-1]], 2)
    gain = np.linalg.svd(M, compute_uv=False)[:, 0]
    if sigma != 0.0:
        r0 = np.hypot(x0[:, 0], x0[:, 1])
        rt = np.hypot(bun.gamma[-1][:, 0], bun.gamma[-1][:, 1])
        gain = gain * (r0 / rt) ** sigma
    return gain


def beta_estimator(fld: AnalyticVelocityField, t: float, sampler: BetaSampler = BetaSampler(), dt: float = 1e-2) -> BetaEstimate:
    """Lower bound for beta(t) (sigma = 0) or its r-weighted variant.

    Sample the starts, then refine the best one by coordinate ascent with
    halving steps, staying inside the admissible set.
    """
    P = sampler.draw()
    if P.shape[0] == 0:
        raise ValueError("sampler produced no admissible starts")
    vals = amplitude_gain(fld, P, t, dt, sampler.sigma) if t > 0 else np.ones(P.shape[0])
    i = int(np.argmax(vals))
    best, best_val = P[i].copy(), float(vals[i])
    n_eval = P.shape[0]
    if t > 0 and sampler.ascent_iters:
        lo = np.array([sampler.r[0], sampler.theta[0], sampler.z[0], 0.0])
        hi = np.array([sampler.r[1], sampler.theta[1], sampler.z[1], np.pi])
        step = (hi - lo) / 16
        for _ in range(sampler.ascent_iters):
            trial = []
            for d in range(4):
                for s in (-1, 1):
                    q = best.copy()
                    q[d] = np.clip(q[d] + s * step[d], lo[d], hi[d])
                    trial.append(q)
            trial = np.array(trial)
            trial = trial[sampler.admissible(trial)]
            if trial.size:
                tv = amplitude_gain(fld, trial, t, dt, sampler.sigma)
                n_eval += trial.shape[0]
                j = int(np.argmax(tv))
                if tv[j] > best_val:
                    best, best_val = trial[j].copy(), float(tv[j])
                    continue
            step = step / 2
    flavor = "beta" if sampler.sigma == 0 else "beta_sigma"
    return BetaEstimate(t, max(best_val, float(vals.max())), flavor, sampler.spec(), best, n_eval, vals)


def alpha_bous(fld: BoussinesqField, t: float, n: int = 1024, seed: int = 0, box=((0.0, np.pi), (0.0, np.pi)), dt: float = 1e-2) -> BetaEstimate:
    """Sampled lower bound of sup |b(t)| over unit xi0, unit b0 with b0 . (0, xi0) = 0,
    starting off the lines x = 0 and y = 0."""
    lo = np.array([box[0][0], box[1][0], 0.0])
    hi = np.array([box[0][1], box[1][1], 2 * np.pi])
    P = qmc.scale(qmc.LatinHypercube(d=3, seed=seed).random(n), lo, hi)
    P = P[(np.abs(P[:, 0]) > BAND) & (np.abs(P[:, 1]) > BAND)]
    if P.shape[0] == 0:
        raise ValueError("sampler produced no admissible starts")
    x0, phi = P[:, :2], P[:, 2]
    xi0 = np.stack([np.cos(phi), np.sin(phi)], 1)
    # orthonormal basis of the plane perpendicular to (0, xi0) in R^3
    e0 = np.tile([1.0, 0.0, 0.0], (x0.shape[0], 1))
    e1 = np.column_stack([np.zeros(x0.shape[0]), -xi0[:, 1], xi0[:, 0]])
    bun = integrate_boussinesq(fld, x0, xi0, e0, t, dt, b_tilde0=e1, save_every=10**9)
    M = np.stack([bun.b[-1], bun.b_tilde[-1]], 2)
    vals = np.linalg.svd(M, compute_uv=False)[:, 0]
    i = int(np.argmax(vals))
    spec = {"n": n, "seed": seed, "box": [list(b) for b in box]}
    return BetaEstimate(t, float(vals[i]), "alpha_bous", spec, P[i], P.shape[0], vals)


@dataclass
class VorticityBound:
    t: float
    omega_p_t: float
    omega_p_0: float
    beta: float

    @property
    def holds(self) -> bool:
        # the absolute floor absorbs roundoff where omega_p vanishes identically
        rhs = self.omega_p_0 * self.beta**2
        return self.omega_p_t <= rhs + 1e-9 * max(rhs, 1.0)


def poloidal_vorticity_bound(fld: AnalyticVelocityField, t: float, sampler: BetaSampler = BetaSampler(), dt: float = 1e-2) -> VorticityBound:
    """Compare sup |omega_p(t)| with sup |omega_p(0)| beta(t)^2 on the sampled starts.

    omega(t, gamma_t) = F omega_0 is the vorticity carried by the flow; for
    Euler fields it coincides with the field's own vorticity. The start with
    the largest |omega_p(t)| is added to the beta samples so that both sides
    see it.
    """
    P = sampler.draw()
    x0, xi0, et, n = _starts(P)
    bun = integrate_euler(fld, x0, xi0, et, t, dt, save_every=10**9)
    om0 = fld.omega(0.0, x0)
    omt = np.einsum("nij,nj->ni", bun.F[-1], om0)

    def poloidal(V, X):
        cyl = cylindrical(V, X)
        return np.hypot(cyl[:, 0], cyl[:, 2])

    wt = poloidal(omt, bun.gamma[-1])
    w0 = poloidal(om0, x0)
    k = int(np.argmax(wt))
    extra = P[k : k + 1] if sampler.extra is None else np.vstack([sampler.extra, P[k : k + 1]])
    s2 = BetaSampler(sampler.n, sampler.seed, sampler.r, sampler.z, sampler.theta, 0.0, sampler.ascent_iters, extra)
    beta = beta_estimator(fld, t, s2, dt).value
    return VorticityBound(t, float(wt.max()), float(w0.max()), beta)


# ---------------------------------------------------------------- flow map


@dataclass
class ExpansionReport:
    T: float
    ratio: float  # sup of r_T / r_0 over the computed z = 0 trajectories
    lower_bound: float  # exp(1/2 int u^r_r(t, 0, 0))
    upper_bound: float  # exp(2 int u^r_r(t, 0, 0))
    delta: float
    r0: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)

    @property
    def holds(self) -> bool:
        return self.ratio >= self.lower_bound * (1 - 1e-9)


def radial_rate(fld: AnalyticVelocityField, t: float, r) -> np.ndarray:
    r = np.atleast_1d(np.asarray(r, dtype=float))
    X = np.column_stack([r, np.zeros_like(r), np.zeros_like(r)])
    return fld.u(t, X)[:, 0] / r


def expansion_rate(fld: AnalyticVelocityField, T: float, n_r: int = 64, dt: float = 1e-3, n_t: int = 65) -> ExpansionReport:
    """r_T / r_0 along z = 0 against the bounds built from u^r_r(t, 0, 0).

    delta is the largest dyadic radius on which
    u^r_r(t,0,0)/2 <= u^r(t,r,0)/r <= 2 u^r_r(t,0,0) holds for sampled t.
    Trajectories are run backward from r_T in (0, delta/2].
    """
    if not fld.axisymmetric:
        raise ValueError("expansion rate needs an axisymmetric swirl-free field")
    ts = np.linspace(0.0, T, n_t)
    g0 = np.array([fld.grad(t, np.array([[0.0, 0.0, 0.0]]))[0, 0, 0] for t in ts])
    if np.any(g0 < 0):
        raise ValueError("u^r_r(t, 0, 0) must be nonnegative on [0, T]")
    delta = None
    for k in range(0, 40):
        d = 2.0**-k
        rs = np.linspace(d / 64, d, 64)
        ok = all(
            np.all(0.5 * g - 1e-14 <= radial_rate(fld, t, rs)) and np.all(radial_rate(fld, t, rs) <= 2 * g + 1e-14)
            for t, g in zip(ts, g0)
        )
        if ok:
            delta = d
            break
    if delta is None:
        raise RuntimeError("no radius found on which the radial rate is comparable to its axis value")
    rT = np.geomspace(delta * 1e-4, delta / 2, n_r)
    XT = np.column_stack([rT, np.zeros(n_r), np.zeros(n_r)])
    bun = integrate_euler(fld, XT, np.tile([1.0, 0, 0], (n_r, 1)), np.tile([0, 1.0, 0], (n_r, 1)), 0.0, -dt, t0=T)
    r_path = np.hypot(bun.gamma[..., 0], bun.gamma[..., 1])
    if np.any(r_path > delta * (1 + 1e-12)) or np.any(np.abs(bun.gamma[..., 2]) > 1e-12):
        raise RuntimeError(f"trajectory left the strip r <= {delta}")
    r0 = r_path[-1]
    ratios = rT / r0
    # trapezoid on the fine sample of the axis rate
    tf = np.linspace(0.0, T, 4 * n_t - 3)
    gf = np.array([fld.grad(t, np.zeros((1, 3)))[0, 0, 0] for t in tf])
    I = float(np.sum((gf[1:] + gf[:-1]) / 2 * np.diff(tf)))
    return ExpansionReport(T, float(ratios.max()), float(np.exp(0.5 * I)), float(np.exp(2 * I)), delta, r0, ratios)


@dataclass
class FlowMapReport:
    t: float
    roundtrip_error: float
    lipschitz_forward: float
    lipschitz_backward: float
    confined: bool
    n: int


def flow_map_invertibility(fld: AnalyticVelocityField, points, t: float, dt: float = 1e-3, region: str | None = "cylinder") -> FlowMapReport:
    """Forward then backward integration, Lipschitz constants from F, and
    (region="cylinder") a check that starts in a quadrant of the unit
    cylinder off r = 1 and z = 0 stay in the same quadrant."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    N = X.shape[0]
    e1, e2 = np.tile([1.0, 0, 0], (N, 1)), np.tile([0, 1.0, 0], (N, 1))
    fwd = integrate_euler(fld, X, e1, e2, t, dt)
    back = integrate_euler(fld, fwd.gamma[-1], e1, e2, 0.0, -dt, t0=t)
    err = float(np.max(np.linalg.norm(back.gamma[-1] - X, axis=1)))
    Lf = float(np.max(np.linalg.norm(fwd.F, ord=2, axis=(-2, -1))))
    Lb = float(np.max(np.linalg.norm(back.F, ord=2, axis=(-2, -1))))
    confined = True
    if region == "cylinder":
        r = np.hypot(fwd.gamma[..., 0], fwd.gamma[..., 1])
        sgn = np.sign(X[:, 2])
        confined = bool(np.all(r < 1) & np.all(r > 0) & np.all(np.sign(fwd.gamma[..., 2]) == sgn))
    return FlowMapReport(t, err, Lf, Lb, confined, N)


def write_bundle_csv(bundle: TrajectoryBundle, path, index: int = 0) -> None:
    """One trajectory of a bundle as CSV rows t, gamma, xi, b, b.xi."""
    g, xi, b = bundle.gamma[:, index], bundle.xi[:, index], bundle.b[:, index]
    d = g.shape[1]
    cols = (
        [f"gamma{i}" for i in range(d)] + [f"xi{i}" for i in range(xi.shape[1])] + [f"b{i}" for i in range(b.shape[1])]
    )
    bxi = np.sum(b * xi, 1) if b.shape[1] == xi.shape[1] else lifted_dot(b, xi)
    data = np.column_stack([bundle.times, g, xi, b, bxi])
    np.savetxt(path, data, delimiter=",", header=",".join(["t"] + cols + ["b_dot_xi"]), comments="")
