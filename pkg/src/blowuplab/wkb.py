"""WKB wave packets for the Euler equations linearized around an analytic field.

The packet is v = eps curl((b x xi / |xi|^2) phi exp(iS/eps)), where S and
phi are transported by the flow, xi = grad S, and b solves the amplitude
equation along particle paths. Expanding the curl with b . xi = 0 gives

    v = exp(iS/eps) (i phi b + eps curl w),   w = phi b x xi / |xi|^2,

and for the leading term phi b exp(iS/eps), with pressure
Q = -i eps c phi exp(iS/eps), the residual of the linearized equation is
i eps grad(c phi) exp(iS/eps).

Fields are evaluated two ways. A LagrangianMarkerCloud carries a lattice of
markers forward; since the flow is incompressible, lattice weights are
valid quadrature weights at every time. Eulerian values at arbitrary points
are obtained by tracing back to the foot point and running the amplitude
equation forward again.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import RectBivariateSpline

from .bichar import AnalyticVelocityField, cylinder_basis, cylindrical, integrate_euler

XI_MIN = 1e-6


def _unit_bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = s < 1
    out[inside] = np.exp(1 - 1 / (1 - s[inside] ** 2))
    return out


@dataclass(frozen=True)
class WKBSeed:
    """Packet data at t = 0.

    Cartesian seeds have constant xi0, b0, S(0, x) = x . xi0 and a radial
    bump of the given radius around x0. Axisymmetric seeds take the
    cylindrical components of xi0 and b0 at x0 and extend them around the
    axis; S(0, x) = r xi0^r + z xi0^z and the bump depends on the (r, z)
    distance to (r0, z0). phi is normalized to unit L^p norm.
    """

    x0: tuple
    xi0: tuple
    b0: tuple
    radius: float = 0.1
    p: float = 2.0
    axisymmetric: bool = False

    def __post_init__(self):
        xi0, b0 = np.asarray(self.xi0, float), np.asarray(self.b0, float)
        if np.linalg.norm(xi0) <= XI_MIN:
            raise ValueError("xi0 must be nonzero")
        if abs(xi0 @ b0) > 1e-12 * np.linalg.norm(xi0) * max(np.linalg.norm(b0), 1.0):
            raise ValueError("b0 must be orthogonal to xi0")
        if self.axisymmetric:
            X0 = np.atleast_2d(np.asarray(self.x0, float))
            if abs(cylindrical(xi0[None], X0)[0, 1]) > 1e-12:
                raise ValueError("axisymmetric seeds need a poloidal xi0 (no e_theta component)")
            if np.hypot(X0[0, 0], X0[0, 1]) <= self.radius:
                raise ValueError("the bump must stay away from the axis")

    @property
    def norm_constant(self) -> float:
        p, rho = self.p, self.radius
        if self.axisymmetric:
            r0 = float(np.hypot(self.x0[0], self.x0[1]))
            # 2 pi int int bump(|(r - r0, z - z0)| / rho)^p r dr dz in polar coordinates about (r0, z0)
            inner = lambda s: _unit_bump(np.array([s]))[0] ** p * s  # noqa: E731
            val = 2 * np.pi * r0 * 2 * np.pi * rho**2 * quad(inner, 0, 1, limit=200)[0]
        else:
            inner = lambda s: _unit_bump(np.array([s]))[0] ** p * s * s  # noqa: E731
            val = 4 * np.pi * rho**3 * quad(inner, 0, 1, limit=200)[0]
        return val ** (-1 / p)

    def initial(self, X: np.ndarray) -> dict:
        """xi(0, X), b(0, X), S(0, X), phi(0, X)."""
        X = np.atleast_2d(X)
        x0 = np.asarray(self.x0, float)
        xi0, b0 = np.asarray(self.xi0, float), np.asarray(self.b0, float)
        N = X.shape[0]
        if self.axisymmetric:
            X0 = x0[None]
            xr, _, xz = cylindrical(xi0[None], X0)[0]
            br, bt, bz = cylindrical(b0[None], X0)[0]
            er, et, ez = cylinder_basis(X)
            xi = xr * er + xz * ez
            b = br * er + bt * et + bz * ez
            r = np.hypot(X[:, 0], X[:, 1])
            S = r * xr + X[:, 2] * xz
            d = np.hypot(r - np.hypot(x0[0], x0[1]), X[:, 2] - x0[2])
        else:
            xi = np.tile(xi0, (N, 1))
            b = np.tile(b0, (N, 1))
            S = X @ xi0
            d = np.linalg.norm(X - x0, axis=1)
        phi = self.norm_constant * _unit_bump(d / self.radius)
        return {"xi": xi, "b": b, "S": S, "phi": phi}


def eulerian_state(fld: AnalyticVelocityField, seed: WKBSeed, t: float, X, dt: float = 1e-2) -> dict:
    """S, phi, xi, b, c at time t and points X.

    Trace each point back to its foot a = gamma_t^{-1}(X), then solve the
    amplitude system forward from a with the seed's initial fields there.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    if t == 0:
        a = X
    else:
        e = np.tile([1.0, 0, 0], (N, 1))
        back = integrate_euler(fld, X, e, e[:, [1, 2, 0]], 0.0, -dt, t0=t, save_every=10**9)
        a = back.gamma[-1]
    init = seed.initial(a)
    if t == 0:
        xi, b = init["xi"], init["b"]
        A = fld.grad(0.0, X)
        c = 2 * np.einsum("ni,nij,nj->n", xi, A, b) / np.sum(xi * xi, 1)
    else:
        fwd = integrate_euler(fld, a, init["xi"], init["b"], t, dt, save_every=10**9)
        xi, b, c = fwd.xi[-1], fwd.b[-1], fwd.c[-1]
    return {"a": a, "S": init["S"], "phi": init["phi"], "xi": xi, "b": b, "c": c}


# ---------------------------------------------------------------- marker cloud


@dataclass
class LagrangianMarkerCloud:
    """Markers on a cubic lattice of spacing h around the seed, carried forward.

    S and phi are constant along markers, so they are stored once.
    """

    seed: WKBSeed
    h: float
    shape: tuple
    times: np.ndarray
    gamma: np.ndarray  # (nt, N, 3)
    xi: np.ndarray
    b: np.ndarray
    c: np.ndarray  # (nt, N)
    F: np.ndarray  # (nt, N, 3, 3)
    S: np.ndarray  # (N,)
    phi: np.ndarray  # (N,)
    dt: float = 0.0

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.S.shape, self.h**3)

    def lattice(self, values: np.ndarray) -> np.ndarray:
        return values.reshape(self.shape + values.shape[1:])

    def lagrangian_grad(self, values: np.ndarray, k: int) -> np.ndarray:
        """Eulerian gradient (N, ..., 3) of marker values via lattice differences and F^{-1}."""
        V = self.lattice(values)
        parts = np.gradient(V, self.h, axis=(0, 1, 2), edge_order=2)
        Ga = np.stack([p.reshape(values.shape) for p in parts], -1)  # d/da_j
        Finv = np.linalg.inv(self.F[k])
        return np.einsum("n...j,nji->n...i", Ga, Finv)

    @property
    def lipschitz(self) -> float:
        """max over markers and times of ||F|| and ||F^{-1}||."""
        Fn = np.linalg.norm(self.F, ord=2, axis=(-2, -1))
        Fi = np.linalg.norm(np.linalg.inv(self.F), ord=2, axis=(-2, -1))
        return float(max(Fn.max(), Fi.max()))


def build_fields(
    fld: AnalyticVelocityField, seed: WKBSeed, t_end: float, resolution: int = 21, dt: float = 1e-2,
    save_every: int = 1, region=None,
) -> LagrangianMarkerCloud:
    """Carry a lattice of markers covering the seed ball from 0 to t_end.

    region, if given, maps points (N, 3) to a boolean mask of where the field
    is trusted; the run fails if a marker in the support of phi leaves it.
    """
    if seed.axisymmetric:
        raise ValueError("use axisymmetric_extension for axisymmetric seeds")
    x0 = np.asarray(seed.x0, float)
    s = np.linspace(-seed.radius, seed.radius, resolution)
    h = s[1] - s[0]
    A = np.stack(np.meshgrid(s, s, s, indexing="ij"), -1).reshape(-1, 3) + x0
    init = seed.initial(A)
    bun = integrate_euler(fld, A, init["xi"], init["b"], t_end, dt, save_every=save_every)
    if region is not None:
        inside = init["phi"] > 0
        for g in bun.gamma:
            if not np.all(region(g[inside])):
                raise RuntimeError("marker tube left the region where the field is smooth")
    return LagrangianMarkerCloud(
        seed, h, (resolution,) * 3, bun.times, bun.gamma, bun.xi, bun.b, bun.c, bun.F, init["S"], init["phi"],
        dt * save_every,
    )


def grad_S_defect(cloud: LagrangianMarkerCloud, k: int = -1) -> float:
    """max |grad S - xi| over markers in the interior of the lattice.

    grad S is formed from lattice differences of S and of the marker
    positions (the finite-difference deformation gradient), so the defect is
    O(h^2) and independent of the integrator's own F.
    """
    G = cloud.lattice(cloud.gamma[k])
    parts = np.gradient(G, cloud.h, axis=(0, 1, 2), edge_order=2)
    Ffd = np.stack([p.reshape(-1, 3) for p in parts], -1)
    S = cloud.lattice(cloud.S)
    dS = np.stack([p.ravel() for p in np.gradient(S, cloud.h, edge_order=2)], -1)
    gradS = np.linalg.solve(np.transpose(Ffd, (0, 2, 1)), dS[..., None])[..., 0]
    err = np.linalg.norm(gradS - cloud.xi[k], axis=1).reshape(cloud.shape)[1:-1, 1:-1, 1:-1]
    return float(err.max())


# ---------------------------------------------------------------- assembly


@dataclass
class WKBSolution:
    epsilon: float
    t: float
    points: np.ndarray
    weights: np.ndarray
    v: np.ndarray  # complex (N, 3)
    leading: np.ndarray  # i phi b exp(iS/eps)
    Q: np.ndarray  # complex (N,)
    c: np.ndarray

    def lp_norm(self, p: float = 2.0, part: str = "full") -> float:
        V = self.v if part == "full" else self.leading
        mag = np.linalg.norm(V, axis=1)
        if np.isinf(p):
            return float(mag.max())
        return float((self.weights @ mag**p) ** (1 / p))


def _curl_from_grad(G):
    return np.stack([G[:, 2, 1] - G[:, 1, 2], G[:, 0, 2] - G[:, 2, 0], G[:, 1, 0] - G[:, 0, 1]], -1)


def assemble(cloud: LagrangianMarkerCloud, epsilon: float, k: int = -1) -> WKBSolution:
    """v = exp(iS/eps)(i phi b + eps curl w) on the markers at saved time index k."""
    xi, b, phi = cloud.xi[k], cloud.b[k], cloud.phi
    xi2 = np.sum(xi * xi, 1)
    if np.any(np.sqrt(xi2[phi > 0]) < XI_MIN):
        raise ValueError("|xi| below 1e-6 on the support of phi")
    w = np.cross(b, xi) / xi2[:, None] * phi[:, None]
    curl_w = _curl_from_grad(cloud.lagrangian_grad(w, k))
    ph = np.exp(1j * cloud.S / epsilon)
    lead = 1j * phi[:, None] * b * ph[:, None]
    v = lead + epsilon * curl_w * ph[:, None]
    Q = -1j * epsilon * cloud.c[k] * phi * ph
    return WKBSolution(epsilon, float(cloud.times[k]), cloud.gamma[k], cloud.weights, v, lead, Q, cloud.c[k])


def divergence_defect(cloud: LagrangianMarkerCloud, k: int = -1) -> float:
    """||div v||_2 / ||v||_2 for eps = 1.

    div v = i exp(iS/eps)(xi . curl w + div(phi b)) once b . xi = 0 is
    used, and the bracket vanishes identically, so what is measured is the
    lattice discretization error of the curl identity.
    """
    xi, b, phi = cloud.xi[k], cloud.b[k], cloud.phi
    w = np.cross(b, xi) / np.sum(xi * xi, 1)[:, None] * phi[:, None]
    curl_w = _curl_from_grad(cloud.lagrangian_grad(w, k))
    div_pb = np.trace(cloud.lagrangian_grad(phi[:, None] * b, k), axis1=1, axis2=2)
    d = np.sum(xi * curl_w, 1) + div_pb
    inner = np.zeros(cloud.shape, bool)
    inner[2:-2, 2:-2, 2:-2] = True
    inner = inner.ravel()
    wts = cloud.weights[inner]
    vmag = np.linalg.norm(phi[:, None] * b, axis=1)[inner]
    return float(np.sqrt(wts @ d[inner] ** 2) / np.sqrt(wts @ vmag**2))


# ---------------------------------------------------------------- residual


@dataclass
class ResidualReport:
    eps: np.ndarray
    norms: np.ndarray  # ||R||_p for each eps
    predicted: np.ndarray  # eps ||grad(c phi)||_p
    slope: float
    identity_mismatch: float  # ||R - i eps grad(c phi) e^{iS/eps}||_p / ||R||_p at the smallest eps
    h: float
    delta: float
    p: float = 2.0


_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0  # fourth-order first derivative
_OFF = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])


def residual_identity_check(
    fld: AnalyticVelocityField, cloud: LagrangianMarkerCloud, eps_ladder=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3),
    k: int = -1, h: float = 5e-4, delta: float = 5e-4, p: float = 2.0, dt: float | None = None,
) -> ResidualReport:
    """Residual of the leading packet v = phi b exp(iS/eps) with pressure Q.

    Evaluated pointwise at the markers (time index k) from Eulerian states
    at x +- m h e_j and t +- m delta, with fourth-order differences of the
    smooth factors; the phase factor is differentiated exactly. The
    smooth pieces do not depend on eps, so the ladder is cheap.
    """
    dt = dt or cloud.dt or 1e-2
    t = float(cloud.times[k])
    if t - 2 * delta < 0:
        raise ValueError("time index too close to 0 for centred differences")
    X = cloud.gamma[k]
    keep = cloud.phi > 0
    X = X[keep]
    N = X.shape[0]
    seed = cloud.seed

    def state(tt, pts):
        return eulerian_state(fld, seed, tt, pts, dt)

    st0 = state(t, X)
    # time derivatives at fixed x
    tstates = [state(t + m * delta, X) for m in _OFF if m != 0]
    tstates.insert(2, st0)
    dS_dt = sum(wt * s["S"] for wt, s in zip(_D1, tstates)) / delta
    dpb_dt = sum(wt * (s["phi"][:, None] * s["b"]) for wt, s in zip(_D1, tstates)) / delta
    # space derivatives at fixed t
    gradS = np.zeros((N, 3))
    grad_pb = np.zeros((N, 3, 3))
    grad_cphi = np.zeros((N, 3))
    for j in range(3):
        for m, wt in zip(_OFF, _D1):
            if m == 0:
                continue
            s = state(t, X + m * h * np.eye(3)[j])
            gradS[:, j] += wt * s["S"] / h
            grad_pb[:, :, j] += wt * (s["phi"][:, None] * s["b"]) / h
            grad_cphi[:, j] += wt * (s["c"] * s["phi"]) / h
    U = fld.u(t, X)
    A = fld.grad(t, X)
    phi, b, c, S = st0["phi"], st0["b"], st0["c"], st0["S"]
    pb = phi[:, None] * b
    transport_S = dS_dt + np.sum(U * gradS, 1)
    smooth = dpb_dt + np.einsum("nij,nj->ni", grad_pb, U) + np.einsum("nij,nj->ni", A, pb) - (c * phi)[:, None] * gradS
    wts = cloud.weights[keep]

    def norm(V):
        mag = np.linalg.norm(V, axis=1)
        return float(np.max(mag)) if np.isinf(p) else float((wts @ mag**p) ** (1 / p))

    eps = np.asarray(eps_ladder, dtype=float)
    norms, pred = [], []
    mismatch = 0.0
    for e in eps:
        R = (1j / e) * pb * transport_S[:, None] + smooth + 1j * e * grad_cphi
        E = 1j * e * grad_cphi
        norms.append(norm(R))
        pred.append(norm(E))
        mismatch = norm(R - E) / max(norm(R), 1e-300)
    norms, pred = np.array(norms), np.array(pred)
    good = norms > 0
    slope = float(np.polyfit(np.log(eps[good]), np.log(norms[good]), 1)[0]) if good.sum() >= 2 else float("nan")
    return ResidualReport(eps, norms, pred, slope, mismatch, h, delta, p)


def derivative_solution_residual(fld: AnalyticVelocityField, i: int, points, h: float = 1e-3, t: float = 0.0) -> float:
    """max |v . grad u + u . grad v + grad q| for v = d_i u, q = d_i p.

    For a steady Euler field with pressure p, differentiating the equations
    in x_i shows this pair solves the linearized equations; all derivatives
    of u and p beyond grad u are second-order central differences.
    """
    if fld.pressure is None or not fld.steady:
        raise ValueError("needs a steady field with a pressure")
    X = np.atleast_2d(np.asarray(points, dtype=float))
    E = np.eye(3)
    v = fld.grad(t, X)[:, :, i]
    grad_v = np.stack([(fld.grad(t, X + h * E[j])[:, :, i] - fld.grad(t, X - h * E[j])[:, :, i]) / (2 * h) for j in range(3)], -1)

    def dp_i(Y):
        return (fld.pressure(t, Y + h * E[i]) - fld.pressure(t, Y - h * E[i])) / (2 * h)

    grad_q = np.stack([(dp_i(X + h * E[j]) - dp_i(X - h * E[j])) / (2 * h) for j in range(3)], -1)
    U, A = fld.u(t, X), fld.grad(t, X)
    R = np.einsum("nij,nj->ni", grad_v, U) + np.einsum("nij,nj->ni", A, v) + grad_q
    return float(np.max(np.abs(R)))


# ---------------------------------------------------------------- growth bookkeeping


def mirror_extension(sol: WKBSolution) -> WKBSolution:
    """Add the reflected copy under z -> -z (v^z odd, v^x, v^y even)."""
    P = sol.points * np.array([1, 1, -1])
    if np.any(sol.points[:, 2] * P[:, 2] <= 0) and np.any(np.abs(sol.v).sum(1)[sol.points[:, 2] <= 0] > 0):
        raise ValueError("the packet touches z = 0; the copies would overlap")
    flip = np.array([1, 1, -1])
    return WKBSolution(
        sol.epsilon, sol.t, np.vstack([sol.points, P]), np.concatenate([sol.weights, sol.weights]),
        np.vstack([sol.v, sol.v * flip]), np.vstack([sol.leading, sol.leading * flip]),
        np.concatenate([sol.Q, sol.Q]), np.concatenate([sol.c, sol.c]),
    )


def amplitude_lower_bound(cloud: LagrangianMarkerCloud, sol: WKBSolution, p: float = 2.0, k: int = -1) -> dict:
    """Measured ||v||_p against (1 - eta) min |b| over supp phi, where eta is
    the relative oscillation of |b| there and ||phi||_p = 1."""
    inside = cloud.phi > 0
    bm = np.linalg.norm(cloud.b[k][inside], axis=1)
    eta = float((bm.max() - bm.min()) / bm.max())
    phi_p = float((cloud.weights @ cloud.phi**p) ** (1 / p))
    return {"norm": sol.lp_norm(p), "leading": sol.lp_norm(p, "leading"), "bound": (1 - eta) * float(bm.min()) * phi_p,
            "eta": eta, "phi_norm": phi_p, "min_b": float(bm.min()), "max_b": float(bm.max())}


# ---------------------------------------------------------------- axisymmetric construction


@dataclass
class AxisymmetricReport:
    t: float
    init_defect: float  # max | |xi|-1 |, | |b|-1 |, |xi . b| at t = 0
    xi_ode_error: float  # |xi(t, gamma_t(x0)) - xi_t| from the (r, z) grid
    b_ode_error: float
    theta_defect: float  # max difference of |b|, |xi|, b . xi between two angles
    xi_b: float  # max |xi . b| at time t
    dS_dtheta: float
    pde_residual: float  # max residual of the transport equations for xi and b
    h: float
    fields: dict = field(repr=False, default_factory=dict)


def axisymmetric_extension(
    fld: AnalyticVelocityField, seed: WKBSeed, t: float, n: int = 17, half_width: float | None = None,
    dt: float = 1e-2, dtheta: float = 1.3, h_fd: float = 1e-3,
) -> AxisymmetricReport:
    """Axisymmetric xi(t, x), b(t, x), S(t, x) on a poloidal (r, z) grid.

    Each grid value is the solution of the transport equations obtained by
    characteristics. The report checks the initial normalization, the
    match with the ODE solution along gamma_t(x0) (bicubic interpolation on
    the grid), independence of the angle, xi . b = 0, d_theta S = 0, and the
    Eulerian transport equations by central differences.
    """
    if not fld.axisymmetric:
        raise ValueError("axisymmetric extension needs an axisymmetric field")
    if not seed.axisymmetric:
        raise ValueError("seed must be axisymmetric")
    x0 = np.asarray(seed.x0, float)
    r0, th0, z0 = np.hypot(x0[0], x0[1]), np.arctan2(x0[1], x0[0]), x0[2]
    bun = integrate_euler(fld, x0, seed.xi0, seed.b0, t, dt, save_every=10**9)
    gT = bun.gamma[-1][0]
    rT, thT, zT = np.hypot(gT[0], gT[1]), np.arctan2(gT[1], gT[0]), gT[2]
    hw = half_width or 2 * seed.radius
    rs = np.linspace(rT - hw, rT + hw, n)
    zs = np.linspace(zT - hw, zT + hw, n)
    if rs[0] <= 0:
        raise ValueError("grid reaches the axis; shrink half_width")
    Rg, Zg = np.meshgrid(rs, zs, indexing="ij")

    def pts(theta):
        return np.column_stack([Rg.ravel() * np.cos(theta), Rg.ravel() * np.sin(theta), Zg.ravel()])

    X1, X2 = pts(thT), pts(thT + dtheta)
    s1 = eulerian_state(fld, seed, t, X1, dt)
    s2 = eulerian_state(fld, seed, t, X2, dt)
    init = seed.initial(X2)
    init_def = max(
        float(np.max(np.abs(np.linalg.norm(init["xi"], axis=1) - 1))),
        float(np.max(np.abs(np.linalg.norm(init["b"], axis=1) - 1))),
        float(np.max(np.abs(np.sum(init["xi"] * init["b"], 1)))),
    )
    # interpolate cylindrical components at gamma_t(x0)
    cx, cb = cylindrical(s1["xi"], X1), cylindrical(s1["b"], X1)
    exact_x = cylindrical(bun.xi[-1], gT[None])[0]
    exact_b = cylindrical(bun.b[-1], gT[None])[0]
    ix = np.array([RectBivariateSpline(rs, zs, cx[:, m].reshape(n, n))(rT, zT)[0, 0] for m in range(3)])
    ib = np.array([RectBivariateSpline(rs, zs, cb[:, m].reshape(n, n))(rT, zT)[0, 0] for m in range(3)])

    def scalars(s):
        return np.stack([np.linalg.norm(s["xi"], axis=1), np.linalg.norm(s["b"], axis=1), np.sum(s["xi"] * s["b"], 1), s["S"]], 1)

    theta_def = float(np.max(np.abs(scalars(s1) - scalars(s2))))
    xi_b = float(np.max(np.abs(np.sum(s1["xi"] * s1["b"], 1))))
    # d_theta S by a central difference in the angle
    sp = eulerian_state(fld, seed, t, pts(thT + 1e-4), dt)["S"]
    sm = eulerian_state(fld, seed, t, pts(thT - 1e-4), dt)["S"]
    dS_dth = float(np.max(np.abs(sp - sm) / 2e-4))
    # Eulerian transport residual at interior nodes
    Xi = X1.reshape(n, n, 3)[n // 4 : -n // 4 : 2, n // 4 : -n // 4 : 2].reshape(-1, 3)
    pde = _transport_residual(fld, seed, t, Xi, h_fd, dt)
    return AxisymmetricReport(
        t, init_def, float(np.linalg.norm(ix - exact_x)), float(np.linalg.norm(ib - exact_b)), theta_def, xi_b,
        dS_dth, pde, float(rs[1] - rs[0]), {"r": rs, "z": zs, "state": s1},
    )


def _transport_residual(fld, seed, t, X, h, dt):
    """max over points of the residuals of
    xi_t + u . grad xi + (grad u)^T xi and b_t + u . grad b + (grad u) b - c xi."""
    st = eulerian_state(fld, seed, t, X, dt)
    dxi_t = (eulerian_state(fld, seed, t + h, X, dt)["xi"] - eulerian_state(fld, seed, t - h, X, dt)["xi"]) / (2 * h)
    sp, sm = eulerian_state(fld, seed, t + h, X, dt), eulerian_state(fld, seed, t - h, X, dt)
    db_t = (sp["b"] - sm["b"]) / (2 * h)
    gxi = np.zeros((X.shape[0], 3, 3))
    gb = np.zeros((X.shape[0], 3, 3))
    for j in range(3):
        e = h * np.eye(3)[j]
        p_, m_ = eulerian_state(fld, seed, t, X + e, dt), eulerian_state(fld, seed, t, X - e, dt)
        gxi[:, :, j] = (p_["xi"] - m_["xi"]) / (2 * h)
        gb[:, :, j] = (p_["b"] - m_["b"]) / (2 * h)
    U, A = fld.u(t, X), fld.grad(t, X)
    r_xi = dxi_t + np.einsum("nij,nj->ni", gxi, U) + np.einsum("nji,nj->ni", A, st["xi"])
    r_b = db_t + np.einsum("nij,nj->ni", gb, U) + np.einsum("nij,nj->ni", A, st["b"]) - st["c"][:, None] * st["xi"]
    return float(max(np.abs(r_xi).max(), np.abs(r_b).max()))
