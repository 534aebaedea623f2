"""Self-similar Boussinesq profile machinery in (R, beta) coordinates.

Elliptic solves for the modified stream function Psi = psi / r^2 (half-plane
and cylinder variants), the split Psi = Psi_* + sin(2 beta) L12 / (pi alpha),
velocity reconstruction, the normalization of the rescaling rates, the
leading-order linearized operators, the weighted energies and the
bookkeeping of the rescaling factors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .polar import (
    PolarField,
    PolarGrid,
    Profile,
    check_alpha,
    derivative,
    diff_DR,
    diff_Dbeta,
    fd_matrix,
    l12,
    l12_nodes,
    make_grid,
    weight_form,
    weighted_l2_sq,
)

RESIDUAL_TOL = 1e-8
CHI_DELTA = 1 / 16


class SingularOperatorError(np.linalg.LinAlgError):
    pass


# ---------------------------------------------------------------- grid and cutoff


def elliptic_grid(alpha, R_min=1e-5, R_max=1e5, n_beta=48, h=None) -> PolarGrid:
    """Midpoint-in-beta grid with log R spacing h (default alpha / 2)."""
    alpha = check_alpha(alpha)
    h = alpha / 2 if h is None else h
    n_R = int(np.ceil(np.log(R_max / R_min) / h)) + 1
    return make_grid(alpha, R_min, R_max, n_R, n_beta, beta_rule="midpoint")


def _smooth_step(x):
    """0 for x <= 0, 1 for x >= 1, C-infinity in between."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1 / np.where(x > 0, x, 1)), 0.0)
        b = np.where(x < 1, np.exp(-1 / np.where(x < 1, 1 - x, 1)), 0.0)
    return a / (a + b)


def chi1(R):
    """chi0^2 with chi0 = 1 on [0, 1] and 0 beyond 2."""
    chi0 = 1 - _smooth_step(np.asarray(R, dtype=float) - 1)
    return chi0**2


def chi_lambda(R, lam):
    return chi1(np.asarray(R, dtype=float) / lam)


# ---------------------------------------------------------------- elliptic problem


@dataclass(frozen=True)
class EllipticProblem:
    """-a^2 R^2 Psi_RR - a(4+a) R Psi_R - Psi_bb - 4 Psi (+ cylinder terms) = source.

    variant "cylinder" adds (C_l rho / r)(sin b (2 + a D_R) Psi + cos b Psi_b)
    + (C_l rho / r)^2 Psi with r = 1 - C_l rho sin b, rho = R^(1/a), and
    multiplies the source by r. far_field gives the Dirichlet values at
    R_max (zero by default); the condition at R_min is homogeneous Neumann
    in log R.
    """

    omega: PolarField
    variant: str = "half-plane"
    C_l: float = 0.0
    far_field: object = None
    delta: float = CHI_DELTA

    def __post_init__(self):
        if self.variant not in ("half-plane", "cylinder"):
            raise ValueError(f"unknown variant {self.variant!r}")
        g = self.omega.grid
        if g.rule != "midpoint":
            raise ValueError("the elliptic solver needs a midpoint beta grid")
        if not np.all(np.isfinite(self.omega.values)):
            raise ValueError("source has non-finite values")
        if g.h > g.alpha:
            raise ValueError(f"log R spacing {g.h:.3g} exceeds alpha = {g.alpha}; refine n_R")
        if self.variant == "cylinder":
            if self.C_l < 0:
                raise ValueError("C_l must be nonnegative")
            if self.C_l * self.rho.max() > 1 + 1e-12:
                raise ValueError("C_l rho exceeds 1 on the grid; restrict R_max to C_l^-alpha")

    @property
    def alpha(self):
        return self.omega.grid.alpha

    @property
    def rho(self):
        return self.omega.grid.R ** (1 / self.alpha)

    @property
    def r(self):
        g = self.omega.grid
        if self.variant == "half-plane":
            return np.ones(g.shape)
        return 1 - self.C_l * self.rho[:, None] * np.sin(g.beta)[None, :]

    @property
    def lam(self) -> float:
        """Cutoff radius delta C_l^-alpha of the localized cylinder solution."""
        return np.inf if self.C_l == 0 else self.delta * self.C_l ** (-self.alpha)


def resonance(hb: float) -> float:
    """Eigenvalue 4 sin(hb)^2 / hb^2 of the odd-reflected second difference on sin(2 beta)."""
    return 4 * np.sin(hb) ** 2 / hb**2


def _assemble(problem: EllipticProblem):
    g = problem.omega.grid
    a, h = g.alpha, g.h
    nR, nb = g.shape
    hb = np.pi / 2 / nb
    beta = g.beta
    idx = np.arange(nR * nb).reshape(nR, nb)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.broadcast_to(v, r.shape).ravel())

    cyl = problem.variant == "cylinder"
    if cyl:
        q = problem.C_l * problem.rho[:, None] / problem.r
    else:
        q = np.zeros((nR, nb))
    sb, cb = np.sin(beta)[None, :], np.cos(beta)[None, :]

    inner = idx[:-1]
    Q = q[:-1]
    # log R part with the cylinder's alpha D_R sin(b) term
    c_up = -(a**2) / h**2 - 4 * a / (2 * h) + Q * sb * a / (2 * h)
    c_dn = -(a**2) / h**2 + 4 * a / (2 * h) - Q * sb * a / (2 * h)
    # -4 is replaced by the discrete eigenvalue of sin(2 beta), so the
    # resonance of d_bb + 4 on that mode is kept exactly as in the continuum
    c_mid = 2 * a**2 / h**2 + 2 / hb**2 - resonance(hb) + Q * 2 * sb + Q**2
    add(inner, inner, c_mid)
    add(inner, idx[1:], c_up)
    # Neumann at R_min: ghost row i = -1 equals row 1
    add(inner[1:], idx[:-2], c_dn[1:])
    add(inner[:1], idx[1:2], c_dn[:1])
    # beta part with odd reflection across 0 and pi/2
    b_up = -1 / hb**2 + Q * cb / (2 * hb)
    b_dn = -1 / hb**2 - Q * cb / (2 * hb)
    add(inner[:, :-1], inner[:, 1:], b_up[:, :-1])
    add(inner[:, 1:], inner[:, :-1], b_dn[:, 1:])
    add(inner[:, :1], inner[:, :1], -b_dn[:, :1])
    add(inner[:, -1:], inner[:, -1:], -b_up[:, -1:])
    # Dirichlet row at R_max
    add(idx[-1], idx[-1], 1.0)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nR * nb, nR * nb))
    rhs = (problem.r * problem.omega.values).copy()
    if problem.far_field is None:
        rhs[-1] = 0.0
    else:
        rhs[-1] = np.asarray(problem.far_field(g.R[-1:], beta), dtype=float).reshape(nb)
    return A, rhs.ravel()


@dataclass(frozen=True, eq=False)
class EllipticSolution:
    psi: PolarField
    residual: float  # ||A psi - rhs|| / ||rhs||
    problem: EllipticProblem

    @property
    def localized(self) -> PolarField:
        """Psi chi_lambda; equals Psi for the half-plane variant."""
        g = self.psi.grid
        return PolarField(g, self.psi.values * chi_lambda(g.R, self.problem.lam)[:, None])


def solve_elliptic(problem: EllipticProblem) -> EllipticSolution:
    """Second-order differences in (log R, beta) and a sparse direct solve.

    The zeroth-order coefficient is the discrete sin(2 beta) eigenvalue
    (4 + O(hb^2)), so the discrete angular operator annihilates sin(2 beta)
    exactly.

    Raises SingularOperatorError if the factorization breaks down or the
    relative residual exceeds 1e-8; the usual culprit is the sin(2 beta)
    mode, which -d_bb - 4 annihilates and only the alpha terms lift.
    """
    g = problem.omega.grid
    if not np.any(problem.omega.values) and problem.far_field is None:
        return EllipticSolution(PolarField.zeros(g), 0.0, problem)
    A, rhs = _assemble(problem)
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            x = spsolve(A.tocsc(), rhs)
        except MatrixRankWarning as exc:
            raise SingularOperatorError(_singular_message(g)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularOperatorError(_singular_message(g))
    res = float(np.linalg.norm(A @ x - rhs) / max(np.linalg.norm(rhs), 1e-300))
    if res > RESIDUAL_TOL:
        raise SingularOperatorError(_singular_message(g) + f" (relative residual {res:.2e})")
    return EllipticSolution(PolarField(g, x.reshape(g.shape)), res, problem)


def _singular_message(g):
    return (
        "discrete elliptic operator is singular; near-null mode sin(2 beta), "
        f"annihilated by the angular part and lifted only by the alpha terms (alpha = {g.alpha})"
    )


def manufactured_source(f, fp, fpp, grid: PolarGrid) -> PolarField:
    """Source for Psi = sin(2 beta) f(log R) given f, f', f'' in t = log R.

    -a^2 R^2 Psi_RR - a(4+a) R Psi_R = -a^2 f'' - 4 a f' in t, and
    -d_bb - 4 kills sin(2 beta).
    """
    a = grid.alpha
    t = grid.t
    radial = -(a**2) * fpp(t) - 4 * a * fp(t)
    return PolarField(grid, radial[:, None] * np.sin(2 * grid.beta)[None, :])


# ---------------------------------------------------------------- Psi_* and velocity


def sin2_projection(f: PolarField) -> np.ndarray:
    """a(R) with f = a(R) sin(2 beta) + (orthogonal in L2(0, pi/2))."""
    g = f.grid
    return (4 / np.pi) * (f.values @ (g.wb * np.sin(2 * g.beta)))


def psi_star(psi: PolarField, omega: PolarField) -> PolarField:
    g = psi.grid
    lead = np.sin(2 * g.beta)[None, :] * l12_nodes(omega)[:, None] / (np.pi * g.alpha)
    return PolarField(g, psi.values - lead)


@dataclass(frozen=True, eq=False)
class Velocity:
    """Velocity on the R nodes and the padded angles [0, beta_1..beta_n, pi/2].

    U, V carry the factor r (= rho); Ut, Vt = U / r, V / r. Gradients are
    dimensionless and finite at R = 0.
    """

    R: np.ndarray
    beta: np.ndarray
    rho: np.ndarray
    U: np.ndarray
    V: np.ndarray
    Ut: np.ndarray
    Vt: np.ndarray
    u_x: np.ndarray
    u_y: np.ndarray
    v_x: np.ndarray
    v_y: np.ndarray

    @property
    def divergence(self):
        return self.u_x + self.v_y


def _pad(values):
    z = np.zeros((values.shape[0], 1))
    return np.hstack([z, values, z])


def reconstruct_velocity(psi: PolarField, omega: PolarField) -> Velocity:
    """u = -psi_y, v = psi_x with psi = r^2 Psi, written through L12 and Psi_*.

    The angular grid is padded with 0 and pi/2 where Psi vanishes.
    """
    g = psi.grid
    a = g.alpha
    beta = np.concatenate([[0.0], g.beta, [np.pi / 2]])
    Db = fd_matrix(beta)
    Dt = g.d_t
    L = l12_nodes(omega)[:, None]
    P = _pad(psi.values)
    Ps = P - np.sin(2 * beta)[None, :] * L / (np.pi * a)
    DRP = Dt @ P
    dbPs = Ps @ Db.T
    sb, cb = np.sin(beta)[None, :], np.cos(beta)[None, :]
    Ut = -2 * cb * L / (np.pi * a) - 2 * sb * Ps - a * sb * DRP - cb * dbPs
    Vt = 2 * sb * L / (np.pi * a) + 2 * cb * Ps + a * cb * DRP - sb * dbPs
    rho = g.R ** (1 / a)

    def grads(W):
        radial = W + a * (Dt @ W)
        ang = W @ Db.T
        return cb * radial - sb * ang, sb * radial + cb * ang

    u_x, u_y = grads(Ut)
    v_x, v_y = grads(Vt)
    return Velocity(g.R, beta, rho, rho[:, None] * Ut, rho[:, None] * Vt, Ut, Vt, u_x, u_y, v_x, v_y)


def v_x_operator(psi: PolarField, omega: PolarField) -> np.ndarray:
    """V_1(Psi) = a(1 + 2cos^2 b) D_R Psi - a D_R D_b Psi - D_b Psi_* + 2 Psi_*
    + sin^2 b d_bb Psi_* + a^2 cos^2 b D_R^2 Psi, on the padded angles."""
    g = psi.grid
    a = g.alpha
    beta = np.concatenate([[0.0], g.beta, [np.pi / 2]])
    Db = fd_matrix(beta)
    Dt = g.d_t
    L = l12_nodes(omega)[:, None]
    P = _pad(psi.values)
    Ps = P - np.sin(2 * beta)[None, :] * L / (np.pi * a)
    s2 = np.sin(2 * beta)[None, :]
    c2, sn2 = np.cos(beta)[None, :] ** 2, np.sin(beta)[None, :] ** 2
    DRP = Dt @ P
    return (
        a * (1 + 2 * c2) * DRP
        - a * s2 * (DRP @ Db.T)
        - s2 * (Ps @ Db.T)
        + 2 * Ps
        + sn2 * (Ps @ Db.T @ Db.T)
        + a**2 * c2 * (Dt @ DRP)
    )


# ---------------------------------------------------------------- normalization and operators


def normalization(omega: PolarField, alpha: float | None = None) -> tuple[float, float]:
    """(c_omega, c_l) = (-(2 / pi a) L12(Omega)(0), ((1 - a) / a) c_omega)."""
    a = omega.grid.alpha if alpha is None else check_alpha(alpha)
    c_omega = -2 / (np.pi * a) * float(l12(omega, 0.0))
    return c_omega, (1 - a) / a * c_omega


@dataclass(frozen=True, eq=False)
class LinearizedState:
    omega: PolarField
    eta: PolarField
    xi: PolarField
    c_omega: float
    c_l: float

    def __post_init__(self):
        a = self.omega.grid.alpha
        if abs(self.c_l - (1 - a) / a * self.c_omega) > 1e-12 * max(1.0, abs(self.c_l)):
            raise ValueError("c_l must equal ((1 - alpha) / alpha) c_omega")

    @classmethod
    def from_perturbation(cls, omega, eta, xi=None):
        xi = PolarField.zeros(omega.grid) if xi is None else xi
        c_omega, c_l = normalization(omega)
        return cls(omega, eta, xi, c_omega, c_l)

    def scaled(self, lam: float) -> "LinearizedState":
        return LinearizedState(self.omega * lam, self.eta * lam, self.xi * lam, self.c_omega * lam, self.c_l * lam)


def linearized_rhs(state: LinearizedState, profile: Profile, xi_bar: PolarField | None = None):
    """(L1, L2, L3) of the leading-order linearization around the profile."""
    g = state.omega.grid
    a = g.alpha
    xi_bar = PolarField.zeros(g) if xi_bar is None else xi_bar
    R = g.R[:, None]
    k = 3 / (1 + R)
    Lt = (l12_nodes(state.omega) - l12(state.omega, 0.0))[:, None]
    cw = state.c_omega
    ob, eb = profile.omega, profile.eta

    def transport(f):
        return -diff_DR(f).values - k * diff_Dbeta(f).values

    L1 = transport(state.omega) - state.omega.values + state.eta.values + cw * (ob.values - diff_DR(ob).values)
    L2 = (
        transport(state.eta)
        + (-2 + k) * state.eta.values
        + 2 / (np.pi * a) * Lt * eb.values
        + cw * (eb.values - diff_DR(eb).values)
    )
    L3 = (
        transport(state.xi)
        + (-2 - k) * state.xi.values
        - 2 / (np.pi * a) * Lt * xi_bar.values
        + cw * (3 * xi_bar.values - diff_DR(xi_bar).values)
    )
    return PolarField(g, L1), PolarField(g, L2), PolarField(g, L3)


def profile_residual(profile: Profile) -> tuple[PolarField, PolarField]:
    """Leading-order steady residuals: L1(Omega_bar, eta_bar) and L2(0, eta_bar)
    with c_omega = 0. The log R transport parts cancel exactly, leaving the
    angular transport terms."""
    g = profile.omega.grid
    zero = PolarField.zeros(g)
    s1 = LinearizedState(profile.omega, profile.eta, zero, 0.0, 0.0)
    s2 = LinearizedState(zero, profile.eta, zero, 0.0, 0.0)
    return linearized_rhs(s1, profile)[0], linearized_rhs(s2, profile)[1]


def profile_residual_ratio(profile: Profile) -> float:
    """max((1+R)/R |F|) / max((1+R)/R |Omega_bar|) over both residuals."""
    g = profile.omega.grid
    w = ((1 + g.R) / g.R)[:, None]
    F1, F2 = profile_residual(profile)
    num = max(np.max(np.abs(w * F1.values)), np.max(np.abs(w * F2.values)))
    den = max(np.max(np.abs(w * profile.omega.values)), np.max(np.abs(w * profile.eta.values)))
    return float(num / den)


# ---------------------------------------------------------------- energies


@dataclass(frozen=True)
class EnergyConfig:
    mu1: float = 1.0
    mu2: float = 1.0
    mu3: float = 1.0
    mu: dict = field(default_factory=dict)  # (i, j) -> mu_ij for E_k, default 1

    def __post_init__(self):
        vals = [self.mu1, self.mu2, self.mu3, *self.mu.values()]
        if any(not v > 0 for v in vals):
            raise ValueError("all energy weights must be positive")

    def mu_ij(self, i, j) -> float:
        return float(self.mu.get((i, j), 1.0))


def _pieces_E1(state: LinearizedState, c: float, cfg: EnergyConfig) -> dict:
    a = state.omega.grid.alpha
    W = {k: weight_form(k, a) for k in ("phi0", "psi0", "phi1", "phi2", "psi1", "psi2")}
    Om, et, xi = state.omega, state.eta, state.xi
    L0 = float(l12(Om, 0.0))
    return {
        "Omega phi0": weighted_l2_sq(Om, W["phi0"], "Omega phi0"),
        "eta psi0": weighted_l2_sq(et, W["psi0"], "eta psi0"),
        "L12(0)": 81 / (4 * np.pi * c) * L0**2,
        "mu1 D_b Omega phi2": cfg.mu1 * weighted_l2_sq(diff_Dbeta(Om), W["phi2"], "D_b Omega phi2"),
        "mu1 D_b eta phi2": cfg.mu1 * weighted_l2_sq(diff_Dbeta(et), W["phi2"], "D_b eta phi2"),
        "xi psi1": weighted_l2_sq(xi, W["psi1"], "xi psi1"),
        "mu2 Omega phi1": cfg.mu2 * weighted_l2_sq(Om, W["phi1"], "Omega phi1"),
        "mu2 eta phi1": cfg.mu2 * weighted_l2_sq(et, W["phi1"], "eta phi1"),
        "D_b xi psi2": weighted_l2_sq(diff_Dbeta(xi), W["psi2"], "D_b xi psi2"),
        "mu3 D_R Omega phi1": cfg.mu3 * weighted_l2_sq(diff_DR(Om), W["phi1"], "D_R Omega phi1"),
        "mu3 D_R eta phi1": cfg.mu3 * weighted_l2_sq(diff_DR(et), W["phi1"], "D_R eta phi1"),
        "mu3 D_R xi psi1": cfg.mu3 * weighted_l2_sq(diff_DR(xi), W["psi1"], "D_R xi psi1"),
    }


def energy_pieces(state: LinearizedState, c: float, cfg: EnergyConfig = EnergyConfig(), k: int = 1) -> dict:
    """Squared pieces of E_k. Pure D_R derivatives take (phi1, psi1), every
    string containing D_beta takes (phi2, psi2)."""
    if not 1 <= k <= 3:
        raise ValueError("E_k is implemented for k = 1, 2, 3")
    pieces = _pieces_E1(state, c, cfg)
    a = state.omega.grid.alpha
    for i in range(2, k + 1):
        for j in range(i + 1):
            wp, wq = ("phi1", "psi1") if j == i else ("phi2", "psi2")
            p, q = weight_form(wp, a), weight_form(wq, a)
            m = cfg.mu_ij(i, j)
            for name, f, w in (("Omega", state.omega, p), ("eta", state.eta, p), ("xi", state.xi, q)):
                label = f"mu{i}{j} D_R^{j} D_b^{i - j} {name}"
                pieces[label] = m * weighted_l2_sq(derivative(f, j, i - j), w, label)
    for name, v in pieces.items():
        if not np.isfinite(v):
            raise FloatingPointError(f"energy piece {name!r} is not finite")
    return pieces


def energy_E1(state: LinearizedState, c: float, cfg: EnergyConfig = EnergyConfig()) -> float:
    return float(np.sqrt(sum(energy_pieces(state, c, cfg, 1).values())))


def energy_Ek(state: LinearizedState, c: float, k: int, cfg: EnergyConfig = EnergyConfig()) -> float:
    return float(np.sqrt(sum(energy_pieces(state, c, cfg, k).values())))


# ---------------------------------------------------------------- rescaling factors


@dataclass(frozen=True)
class RescalingSeries:
    tau: np.ndarray
    c_l: np.ndarray
    c_omega: np.ndarray
    c_theta: np.ndarray
    C_omega: np.ndarray
    C_l: np.ndarray
    C_theta: np.ndarray
    t: np.ndarray
    t_limit: float  # t(tau_end) plus the tail if c_omega stays at its last value

    @property
    def identity_defect(self) -> float:
        """max |log C_theta - (2 log C_omega - log C_l)| relative to the traces."""
        lhs = np.log(self.C_theta)
        rhs = 2 * np.log(self.C_omega) - np.log(self.C_l)
        return float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(lhs))))


def _cumulative_linear(tau, c):
    """int_0^tau c for piecewise-linear c."""
    return np.concatenate([[0.0], np.cumsum(0.5 * (c[1:] + c[:-1]) * np.diff(tau))])


def _exp_integral(tau, e):
    """int_0^tau exp(e) for piecewise-linear e, exactly on each panel."""
    d = np.diff(tau)
    de = np.diff(e)
    small = np.abs(de) < 1e-8
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        panel = np.where(small, d * np.exp(e[:-1] + de / 2), d * (np.exp(e[1:]) - np.exp(e[:-1])) / np.where(small, 1, de))
    return np.concatenate([[0.0], np.cumsum(panel)])


def rescaling_bookkeeping(tau, c_l_trace, c_omega_trace, C_omega0: float = 1.0, C_l0: float = 1.0) -> RescalingSeries:
    """C_omega = C_omega0 exp(int c_omega), C_l = C_l0 exp(-int c_l),
    C_theta = exp(int c_theta) with c_theta = c_l + 2 c_omega, t = int C_omega.

    With the constants C_omega0, C_l0 absorbed, C_theta = C_omega^2 / C_l.
    """
    tau = np.asarray(tau, dtype=float)
    cl = np.broadcast_to(np.asarray(c_l_trace, dtype=float), tau.shape).copy()
    cw = np.broadcast_to(np.asarray(c_omega_trace, dtype=float), tau.shape).copy()
    if tau[0] != 0 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau must start at 0 and increase")
    ct = cl + 2 * cw
    Iw, Il, It = _cumulative_linear(tau, cw), _cumulative_linear(tau, cl), _cumulative_linear(tau, ct)
    ew = np.log(C_omega0) + Iw
    with np.errstate(over="ignore"):
        Cw, Cl = np.exp(ew), C_l0 * np.exp(-Il)
        Ct = C_omega0**2 / C_l0 * np.exp(It)
    t = _exp_integral(tau, ew)
    for name, arr in (("C_omega", Cw), ("C_l", Cl), ("C_theta", Ct), ("t", t)):
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"{name} overflowed; shorten the trace")
    tail = Cw[-1] / -cw[-1] if cw[-1] < 0 else np.inf
    return RescalingSeries(tau, cl, cw, ct, Cw, Cl, Ct, t, float(t[-1] + tail))
