"""Polar (R, beta) grids, fields, singular weights, weighted norms and the
integral operators shared by the profile machinery.

R = r**alpha is sampled log-uniformly, so D_R = R d/dR is a plain
derivative in t = log R. Angles live strictly inside (0, pi/2).
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import roots_legendre

from .forms import Form

SIGMA = 0.99
MAX_ORDER = 5
MIN_NODES = 8
OVERFLOW_LEVEL = 1e12


class NonFiniteNormError(FloatingPointError):
    pass


class WeightOverflowWarning(RuntimeWarning):
    pass


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 0.25:
        raise ValueError(f"alpha must lie in (0, 1/4], got {alpha}")
    return alpha


# ---------------------------------------------------------------- quadrature


def _panel_weights(npts: int = 6) -> np.ndarray:
    """Row o integrates the Lagrange interpolant through nodes 0..npts-1
    (unit spacing) over [o, o+1]."""
    x = np.arange(npts, dtype=float)
    V = np.vander(x, npts, increasing=True).T
    rows = []
    for o in range(npts - 1):
        p = np.arange(npts)
        rhs = ((o + 1.0) ** (p + 1) - o ** (p + 1.0)) / (p + 1)
        rows.append(np.linalg.solve(V, rhs))
    return np.array(rows)


_PANEL = _panel_weights()


def interval_matrix(n: int, h: float) -> np.ndarray:
    """(n-1, n) matrix whose row j integrates samples over [t_j, t_{j+1}]
    with a 6-point local interpolant (one-sided near the ends)."""
    if n < 6:
        raise ValueError("need at least 6 nodes for the panel rule")
    P = np.zeros((n - 1, n))
    for j in range(n - 1):
        s = min(max(j - 2, 0), n - 6)
        P[j, s : s + 6] = h * _PANEL[j - s]
    return P


def fd_matrix(x: np.ndarray) -> np.ndarray:
    """Dense 5-point first-derivative matrix on arbitrary nodes (4th order)."""
    n = len(x)
    D = np.zeros((n, n))
    for i in range(n):
        s = min(max(i - 2, 0), n - 5)
        st = x[s : s + 5]
        scale = np.max(np.abs(st - x[i]))
        dx = (st - x[i]) / scale
        V = np.vander(dx, 5, increasing=True).T
        rhs = np.zeros(5)
        rhs[1] = 1.0
        D[i, s : s + 5] = np.linalg.solve(V, rhs) / scale
    return D


def gauss_beta(n: int = 128):
    z, w = roots_legendre(n)
    return (z + 1) * np.pi / 4, w * np.pi / 4


# ---------------------------------------------------------------- grid / field


@dataclass(frozen=True, eq=False)
class PolarGrid:
    alpha: float
    R: np.ndarray
    beta: np.ndarray
    wt: np.ndarray  # quadrature in t = log R
    wb: np.ndarray  # quadrature in beta
    rule: str = "gauss"

    @property
    def shape(self):
        return (self.R.size, self.beta.size)

    @property
    def t(self):
        return np.log(self.R)

    @property
    def h(self):
        return float(self.t[1] - self.t[0])

    @property
    def wR(self):
        return self.wt * self.R

    @cached_property
    def intervals(self):
        return interval_matrix(self.R.size, self.h)

    @cached_property
    def d_t(self):
        return fd_matrix(self.t)

    @cached_property
    def d_beta(self):
        return fd_matrix(self.beta)

    def spec(self) -> dict:
        return {
            "alpha": self.alpha,
            "R_min": float(self.R[0]),
            "R_max": float(self.R[-1]),
            "n_R": int(self.R.size),
            "n_beta": int(self.beta.size),
            "beta_rule": self.rule,
        }


def make_grid(alpha, R_min=1e-6, R_max=1e6, n_R=512, n_beta=128, beta_rule="gauss") -> PolarGrid:
    alpha = check_alpha(alpha)
    if n_R < MIN_NODES or n_beta < MIN_NODES:
        raise ValueError(f"grid too coarse: need at least {MIN_NODES} nodes per direction")
    if not 0 < R_min < R_max:
        raise ValueError("need 0 < R_min < R_max")
    t = np.linspace(np.log(R_min), np.log(R_max), n_R)
    P = interval_matrix(n_R, t[1] - t[0])
    wt = P.sum(axis=0)
    if beta_rule == "gauss":
        beta, wb = gauss_beta(n_beta)
    elif beta_rule == "midpoint":
        hb = np.pi / 2 / n_beta
        beta = (np.arange(n_beta) + 0.5) * hb
        wb = np.full(n_beta, hb)
    else:
        raise ValueError(f"unknown beta rule {beta_rule!r}")
    return PolarGrid(alpha, np.exp(t), beta, wt, wb, beta_rule)


@dataclass(frozen=True, eq=False)
class PolarField:
    """Samples on a PolarGrid, optionally backed by an exact separable form.

    `tail` selects how the L12 tail beyond R_max is closed: "zero" or
    "profile" (radial moment decaying like s/(1+s)^2).
    """

    grid: PolarGrid
    values: np.ndarray
    form: Form | None = None
    tail: str = "zero"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite entries")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_form(cls, grid, form, tail="zero"):
        return cls(grid, form(grid.R, grid.beta), form, tail)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape), Form(), "zero")

    def _combine(self, other, op):
        if isinstance(other, PolarField):
            form = op(self.form, other.form) if self.form is not None and other.form is not None else None
            tail = self.tail if self.tail == other.tail else "zero"
            return PolarField(self.grid, op(self.values, other.values), form, tail)
        form = op(self.form, other) if self.form is not None else None
        return PolarField(self.grid, op(self.values, other), form, self.tail)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __mul__(self, other):
        if isinstance(other, np.ndarray):
            return PolarField(self.grid, self.values * other)
        return self._combine(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def with_values(self, values):
        return PolarField(self.grid, values)


def sin2beta_form() -> Form:
    return Form.term(2.0, m=1, n=1)


# ---------------------------------------------------------------- derivatives


def _check_order(f: PolarField, order: int):
    if order < 0 or order > MAX_ORDER:
        raise ValueError(f"derivative order {order} outside 0..{MAX_ORDER}")
    if min(f.grid.shape) < MIN_NODES:
        raise ValueError("grid too coarse for finite differences")


def diff_DR(f: PolarField, order: int = 1) -> PolarField:
    """(R d/dR)^order f; exact when f carries a form, else 4th-order FD in log R."""
    _check_order(f, order)
    if order == 0:
        return f
    if f.form is not None:
        return PolarField.from_form(f.grid, f.form.dR(order))
    v = f.values
    for _ in range(order):
        v = f.grid.d_t @ v
    return PolarField(f.grid, v)


def diff_Dbeta(f: PolarField, order: int = 1) -> PolarField:
    """(sin(2 beta) d/dbeta)^order f."""
    _check_order(f, order)
    if order == 0:
        return f
    if f.form is not None:
        return PolarField.from_form(f.grid, f.form.dbeta(order))
    s2 = np.sin(2 * f.grid.beta)
    v = f.values
    for _ in range(order):
        v = s2 * (v @ f.grid.d_beta.T)
    return PolarField(f.grid, v)


def derivative(f: PolarField, nR: int, nb: int) -> PolarField:
    return diff_DR(diff_Dbeta(f, nb), nR)


# ---------------------------------------------------------------- weights

WEIGHT_KINDS = ("psi0", "phi0", "phi1", "phi2", "psi1", "psi2", "sup1", "sup2", "sup_ij")


def weight_form(kind: str, alpha: float, i: int = 0, j: int = 0) -> Form:
    """Singular weights as exact forms.

    phi*/psi* weight the L2 energies, sup1/sup2 the sup norm. sup_ij is
    1{i>=1} sup1 + 1{j>=1} sup2, taken as 1 when i = j = 0.
    """
    alpha = check_alpha(alpha)
    s, g = SIGMA, 1 + alpha / 10
    if kind == "psi0":
        return (3 / 16) * (Form.term(1, -4, -3, 0, -alpha) + Form.term(1.5, -3, -4, 0, -alpha))
    if kind == "phi0":
        return Form.term(2.0, -3, -3, 1, 1)
    if kind == "phi1":
        return Form.term(2.0**-s, -4, -4, -s, -s)
    if kind == "phi2":
        return Form.term(2.0**-g, -4, -4, -g, -g)
    if kind == "psi1":
        return Form.term(1.0, -4, -4, -s, -s)
    if kind == "psi2":
        return Form.term(1.0, -4, -4, -s, -g)
    if kind == "sup1":
        return Form.term(1.0, -1, -1)
    if kind == "sup2":
        e = alpha / 40
        return Form.constant(1.0) + Form.term(2.0**-e, -1 / 40, 0, -e, -e)
    if kind == "sup_ij":
        if i <= 0 and j <= 0:
            return Form.constant(1.0)
        out = Form()
        if i >= 1:
            out = out + weight_form("sup1", alpha)
        if j >= 1:
            out = out + weight_form("sup2", alpha)
        return out
    raise ValueError(f"unknown weight {kind!r}")


def weight_values(kind: str, grid: PolarGrid, i: int = 0, j: int = 0) -> np.ndarray:
    return weight_form(kind, grid.alpha, i, j)(grid.R, grid.beta)


# ---------------------------------------------------------------- norms


@dataclass(frozen=True)
class NormKind:
    family: str  # H_phi, H_psi, C, W
    order: int = 0

    def __post_init__(self):
        if self.family not in ("H_phi", "H_psi", "C", "W"):
            raise ValueError(f"unknown norm family {self.family!r}")
        if not 0 <= self.order <= MAX_ORDER:
            raise ValueError(f"norm order {self.order} outside 0..{MAX_ORDER}")


def _report(dens: np.ndarray, grid: PolarGrid, label: str):
    bad = ~np.isfinite(dens)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NonFiniteNormError(
            f"{label}: non-finite weighted value at node R={grid.R[i]:.3e}, beta={grid.beta[j]:.3e}"
        )
    big = dens > OVERFLOW_LEVEL
    if big.any():
        nodes = [(float(grid.R[i]), float(grid.beta[j])) for i, j in np.argwhere(big)[:5]]
        warnings.warn(
            f"{label}: weight*value^2 exceeds {OVERFLOW_LEVEL:g} at {int(big.sum())} nodes, e.g. {nodes}",
            WeightOverflowWarning,
            stacklevel=3,
        )


def weighted_l2_sq(g: PolarField, weight: Form, label: str = "L2") -> float:
    """int int weight * g^2 dR dbeta.

    With a closed form the angular integral is done exactly term by term,
    which keeps endpoint-singular weights accurate; otherwise nodal quadrature.
    """
    grid = g.grid
    w = weight(grid.R, grid.beta)
    _report(w * g.values**2, grid, label)
    if g.form is not None:
        prod = weight * g.form * g.form
        if not prod.terms:
            return 0.0
        Ib = prod.beta_integrals()
        IR = prod.radial_factors(grid.R) @ grid.wR
        nz = IR != 0
        total = float(np.sum(IR[nz] * Ib[nz]))
        if not np.isfinite(total):
            raise NonFiniteNormError(f"{label}: angular integral diverges for the supplied weight")
        return total
    return float(grid.wR @ (w * g.values**2) @ grid.wb)


def _sup(arr):
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def weighted_norm(f: PolarField, norm: NormKind) -> float:
    grid, m = f.grid, norm.order
    if norm.family in ("H_phi", "H_psi"):
        w1, w2 = ("phi1", "phi2") if norm.family == "H_phi" else ("psi1", "psi2")
        f1, f2 = weight_form(w1, grid.alpha), weight_form(w2, grid.alpha)
        total = 0.0
        for k in range(m + 1):
            total += np.sqrt(weighted_l2_sq(diff_DR(f, k), f1, f"{w1} D_R^{k}"))
        for i in range(m):
            for j in range(m - i):
                g = derivative(f, i, j + 1)
                total += np.sqrt(weighted_l2_sq(g, f2, f"{w2} D_R^{i} D_b^{j + 1}"))
        return float(total)
    if norm.family == "C":
        s1, s2 = weight_values("sup1", grid), weight_values("sup2", grid)
        total = _sup(f.values)
        for i in range(1, m + 1):
            total += _sup(s1 * diff_DR(f, i).values) + _sup(s2 * diff_Dbeta(f, i).values)
        for i in range(1, m + 1):
            for j in range(1, m + 1 - i):
                total += _sup((s1 + s2) * derivative(f, i, j).values)
        return float(total)
    # W^{l,inf}
    a = grid.alpha
    s2b = np.sin(2 * grid.beta)[None, :]
    wW = s2b ** (-a / 5) / (a / 10 + s2b)
    total = 0.0
    for k in range(m + 1):
        for j in range(0, m + 1 - k):
            g = derivative(f, k, j).values
            total += _sup(wW * g) if j else _sup(g)
    return float(total)


# ---------------------------------------------------------------- L12 and friends


def radial_moment(omega: PolarField, angular: Form | None = None) -> np.ndarray:
    """m(R) = int_0^{pi/2} angular(beta) * Omega(R, beta) dbeta, default angular = sin(2 beta)."""
    angular = sin2beta_form() if angular is None else angular
    grid = omega.grid
    if omega.form is not None:
        prod = angular * omega.form
        if not prod.terms:
            return np.zeros(grid.R.size)
        return prod.beta_integrals() @ prod.radial_factors(grid.R)
    a = angular(grid.R[:1], grid.beta)[0]
    return omega.values @ (grid.wb * a)


def _tail_beyond(m: np.ndarray, grid: PolarGrid, tail: str) -> float:
    if tail == "profile":
        Rmax = grid.R[-1]
        return float(m[-1] * (1 + Rmax) / Rmax)
    return 0.0


def l12_nodes(omega: PolarField) -> np.ndarray:
    """L12(Omega) at every R node: int_R^inf int sin(2b) Omega / s ds db."""
    m = radial_moment(omega)
    # ds/s = dt, so the tail integral is a plain integral of m in t
    pieces = omega.grid.intervals @ m
    tails = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
    return tails + _tail_beyond(m, omega.grid, omega.tail)


def _partial_interval(m, t, j, a, b):
    n = t.size
    s = min(max(j - 2, 0), n - 6)
    p = Polynomial.fit(t[s : s + 6], m[s : s + 6], 5)
    P = p.integ()
    return float(P(b) - P(a))


def l12(omega: PolarField, at_R) -> float | np.ndarray:
    """L12(Omega)(at_R) for scalar or array at_R in [0, R_max]."""
    grid = omega.grid
    scalar = np.ndim(at_R) == 0
    Rq = np.atleast_1d(np.asarray(at_R, dtype=float))
    if np.any(Rq > grid.R[-1] * (1 + 1e-12)):
        raise ValueError(f"at_R beyond R_max = {grid.R[-1]:g}")
    if np.any(Rq < 0):
        raise ValueError("at_R must be nonnegative")
    m = radial_moment(omega)
    nodes = l12_nodes(omega)
    t = grid.t
    out = np.empty(Rq.size)
    for k, r in enumerate(Rq):
        if r < grid.R[0]:
            # m(s) ~ m(R_min) s / R_min below the grid
            out[k] = nodes[0] + m[0] * (grid.R[0] - r) / grid.R[0]
            continue
        tr = min(np.log(r), t[-1])
        j = min(int(np.searchsorted(t, tr, side="right")) - 1, t.size - 2)
        out[k] = nodes[j + 1] + _partial_interval(m, t, j, tr, t[j + 1])
    return float(out[0]) if scalar else out


def l12_tilde(omega: PolarField) -> np.ndarray:
    """L12(Omega)(R) - L12(Omega)(0) on the R nodes."""
    return l12_nodes(omega) - l12(omega, 0.0)


def l_operator_R3(omega_theta: PolarField) -> float:
    """L(f)(0) = int_0^inf int_0^{pi/2} f cos^2(b) sin(b) / rho drho db.

    The field lives on R = rho**alpha, so drho/rho = dt / alpha.
    """
    grid = omega_theta.grid
    v = omega_theta.values
    scale = np.max(np.abs(v))
    if scale > 0 and np.max(np.abs(v[0])) > 1e-12 * scale:
        raise ValueError("omega_theta does not vanish at the innermost radius; integrand is singular at rho = 0")
    ang = Form.term(1.0, m=1, n=2)
    m = radial_moment(omega_theta, ang)
    return float(grid.wt @ m) / grid.alpha


def axis_strain(omega_theta: PolarField, coefficient: float = -1.5) -> float:
    """u_r^r at the origin as coefficient * L(omega_theta)(0).

    For odd-in-z swirl-free vorticity, u_z^z(0) = 3 L and u_r^r = -u_z^z / 2,
    hence the default -3/2. Other coefficients are accepted so that
    alternative closed forms can be compared against quadrature.
    """
    return coefficient * l_operator_R3(omega_theta)


# ---------------------------------------------------------------- profile


@dataclass(frozen=True, eq=False)
class Profile:
    omega: PolarField
    eta: PolarField
    c: float
    c_l: float
    c_omega: float

    def __iter__(self):
        return iter((self.omega, self.eta, self.c))


def profile_constant(alpha: float, n: int = 128) -> float:
    """c = (2/pi) int_0^{pi/2} cos(b)^alpha sin(2b) db by Gauss-Legendre."""
    b, w = gauss_beta(n)
    return float(2 / np.pi * np.sum(w * np.cos(b) ** alpha * np.sin(2 * b)))


def profile_forms(alpha: float):
    c = profile_constant(alpha)
    omega = Form.term(3 * alpha / c, a=1, b=2, n=alpha)
    eta = Form.term(6 * alpha / c, a=1, b=3, n=alpha)
    return omega, eta, c


def profile_fields(alpha: float, grid: PolarGrid) -> Profile:
    """Approximate steady state (Omega_bar, eta_bar) and its constants."""
    alpha = check_alpha(alpha)
    om, et, c = profile_forms(alpha)
    return Profile(
        PolarField.from_form(grid, om, tail="profile"),
        PolarField.from_form(grid, et, tail="profile"),
        c,
        1 / alpha + 3,
        -1.0,
    )


# ---------------------------------------------------------------- io


def write_field_csv(f: PolarField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["R", "beta", "value"])
        for i, R in enumerate(f.grid.R):
            for j, b in enumerate(f.grid.beta):
                w.writerow([repr(float(R)), repr(float(b)), repr(float(f.values[i, j]))])


def write_field_json(f: PolarField, path, norms: dict | None = None) -> None:
    meta = {"grid": f.grid.spec(), "tail": f.tail, "closed_form": f.form is not None, "norms": norms or {}}
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
