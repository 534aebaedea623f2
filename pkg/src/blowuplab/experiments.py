"""Catalog of reproducible experiments, one per checked property.

Each experiment takes a validated parameter dict and a seed and returns
check records plus CSV tables. The runner in cli.py writes them out.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import bichar, biotsavart, burgers, line, polar, profile, riccati, wkb


@dataclass
class Check:
    name: str
    measured: float
    expected: float
    tolerance: float
    kind: str  # "abs", "rel", "le", "ge"
    anchor: str
    passed: bool = field(init=False)

    def __post_init__(self):
        m, e, tol = float(self.measured), float(self.expected), float(self.tolerance)
        if not np.isfinite(m):
            self.passed = False
        elif self.kind == "abs":
            self.passed = abs(m - e) <= tol
        elif self.kind == "rel":
            self.passed = abs(m - e) <= tol * abs(e)
        elif self.kind == "le":
            self.passed = m <= e + tol
        elif self.kind == "ge":
            self.passed = m >= e - tol
        else:
            raise ValueError(f"unknown check kind {self.kind!r}")

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured {self.measured:.10g}, expected {self.kind} {self.expected:.10g} (tol {self.tolerance:g})"

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Outcome:
    checks: list
    tables: dict  # file stem -> list of row dicts

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass(frozen=True)
class Param:
    default: object
    kind: type
    check: Callable | None = None
    rule: str = ""

    def parse(self, name, value):
        if isinstance(value, str) and self.kind is not str:
            value = _parse_scalar_or_list(value)
        if self.kind is list:
            value = list(value) if isinstance(value, (list, tuple)) else [value]
            value = [float(v) for v in value]
        elif self.kind is float:
            value = float(value)
        elif self.kind is int:
            if float(value) != int(float(value)):
                raise ValueError(f"{name} must be an integer")
            value = int(float(value))
        elif self.kind is str:
            value = str(value)
        if self.check is not None and not self.check(value):
            raise ValueError(f"{name} = {value!r} violates: {self.rule}")
        return value


def _parse_scalar_or_list(s: str):
    s = s.strip()
    if "," in s:
        return [_parse_scalar_or_list(p) for p in s.split(",") if p.strip()]
    if s.lower() in ("inf", "+inf"):
        return np.inf
    try:
        return float(s)
    except ValueError:
        return s


@dataclass(frozen=True)
class Experiment:
    name: str
    module: str
    description: str
    anchor: str
    params: dict
    run: Callable

    def validate(self, params: dict) -> dict:
        unknown = sorted(set(params) - set(self.params))
        if unknown:
            raise ValueError(f"unknown parameters for {self.name}: {', '.join(unknown)}")
        out = {}
        for k, spec in self.params.items():
            out[k] = spec.parse(k, params.get(k, spec.default))
        return out


def _positive(x):
    return x > 0


def _alpha_ok(x):
    return 0 < x <= 0.25


def _alphas_ok(xs):
    return len(xs) >= 2 and all(0 < x <= 0.25 for x in xs)


def _pos_list(xs):
    return len(xs) >= 1 and all(x > 0 for x in xs)


# ---------------------------------------------------------------- riccati


def run_riccati_instability(p, seed):
    g = riccati.default_grid()
    v0 = line.Profile1D.from_function(g, lambda x: np.exp(-(x**2)))
    ts = 1 - np.geomspace(1 - p["t_start"], 1 - p["t_end"], int(p["n_times"]))
    rows, checks = [], []
    anchor = "Riccati model: instability rate of the linearization"
    for q in p["p_values"]:
        norms = [line.lp_norm(riccati.linearized_solution(v0, t).values, g, q) for t in ts]
        slope = line.fit_slope(1 - ts, norms)
        expected = -2.0 if np.isinf(q) else -2 + 1 / (2 * q)
        checks.append(Check(f"riccati slope p={q:g}", slope, expected, 0.05, "abs", anchor))
        rows += [{"p": q, "t": float(t), "norm": float(n)} for t, n in zip(ts, norms)]
    return Outcome(checks, {"riccati_norms": rows})


def run_riccati_stability(p, seed):
    g = riccati.default_grid()
    eps = p["epsilon"]
    V0 = riccati.default_perturbation(eps)
    if not riccati.PerturbationClass(eps).contains(V0(g.x), g.x):
        raise ValueError("perturbation is outside the admissible class")
    U = riccati.perturbed_profile(g, V0)
    k = p["amplitude"]
    u0 = line.Profile1D(g, k * U.values, deviation=k * U.deviation)
    U0, C0 = riccati.rescale_initial(u0)
    run = riccati.dynamic_rescaling_evolve(U0, p["tau_end"], p["dt"], C_omega0=C0)
    E = run.energy
    ratio = float(np.max(E / (E[0] * np.exp(-run.tau / 4))))
    T_true = 1.0 / float(u0.values[g.x == 0][0])
    anchor = "Riccati model: stability of the self-similar profile"
    checks = [
        Check("energy decay E(tau) / (E(0) exp(-tau/4))", ratio, 1.05, 0.0, "le", anchor),
        Check("recovered blowup time", run.state.blowup_time, T_true, 1e-3, "abs", anchor),
    ]
    rows = [{"tau": float(a), "energy": float(b), "C_omega": float(c), "t": float(d)} for a, b, c, d in zip(run.tau, E, run.C_omega, run.t_phys)]
    return Outcome(checks, {"riccati_energy": rows})


def run_riccati_sensitivity(p, seed):
    g = riccati.default_grid()
    u0 = line.Profile1D.from_function(g, riccati.steady_profile)
    rows, checks = [], []
    anchor = "Riccati model: first variation of the blowup time"
    for a in p["v0_at_zero"]:
        v0 = line.Profile1D.from_function(g, lambda x, a=a: a * np.exp(-(x**2)))
        s = riccati.blowup_time_sensitivity(u0, v0)
        checks.append(Check(f"dT for v0(0) = {a:g}", s, a, 1e-6, "abs", anchor))
        rows.append({"v0_at_zero": a, "sensitivity": s})
    return Outcome(checks, {"riccati_sensitivity": rows})


# ---------------------------------------------------------------- burgers


def run_burgers_gradient(p, seed):
    data = burgers.gaussian_wave()
    T = data.T_star
    rows, checks = [], []
    anchor = "Burgers: gradient at the shock point"
    for f in p["fractions"]:
        _, ux = burgers.solve_characteristics(data, f * T, 0.0)
        exact = -1 / (T - f * T)
        checks.append(Check(f"u_x(t, 0) at t = {f:g} T*", ux, exact, 1e-8, "rel", anchor))
        rows.append({"t": f * T, "u_x": ux, "exact": exact})
    return Outcome(checks, {"burgers_gradient": rows})


def run_burgers_growth(p, seed):
    data = burgers.gaussian_wave()
    T = data.T_star
    times = [f * T for f in p["fractions"]]
    delta = burgers.trapping_halfwidth(data, max(times))
    rows, checks = [], []
    anchor = "Burgers: L^p growth of the linearization"
    for q in p["p_values"]:
        ests = [burgers.growth_factor_lp(data, t, q, delta) for t in times]
        for e in ests:
            rows.append({"p": q, "t": e.t, "ratio": e.value, "bound": e.bound})
            if q == 1:
                checks.append(Check(f"p=1 ratio at t = {e.t:g}", e.value, 1.0, 1e-8, "abs", anchor))
            else:
                checks.append(Check(f"p={q:g} ratio / bound at t = {e.t:g}", e.value / e.bound, 1.0, 0.0, "ge", anchor))
        if q != 1:
            slope = burgers.growth_slope(ests, T)
            checks.append(Check(f"p={q:g} slope vs bound exponent", slope, -(1 - 1 / q) / 2, 0.05, "abs", anchor))
            checks.append(Check(f"p={q:g} slope vs exact exponent", slope, -(1 - 1 / q), 0.05, "abs", anchor))
    return Outcome(checks, {"burgers_growth": rows})


def run_burgers_energy(p, seed):
    data = burgers.gaussian_wave()
    delta = burgers.trapping_halfwidth(data, p["t"])
    g = line.uniform_grid(-delta, delta, 4001)
    v0 = line.Profile1D.from_function(g, burgers.bump(0.0, delta))
    checks = []
    for q in p["p_values"]:
        r = burgers.energy_identity_residual(data, v0, p["t"], q)
        checks.append(Check(f"energy identity p={q:g}", r, 0.0, 1e-6, "abs", "Burgers: L^p energy identity"))
    return Outcome(checks, {})


# ---------------------------------------------------------------- bicharacteristics


def _unit_pairs(rng, n):
    xi = rng.normal(size=(n, 3))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    b = np.cross(xi, rng.normal(size=(n, 3)))
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    bt = np.cross(xi, b)
    return xi, b, bt


def conservation_points(rng, n):
    r = 0.9 * np.sqrt(rng.uniform(0.01, 1, n))
    th = rng.uniform(0, 2 * np.pi, n)
    z = rng.uniform(-0.9, 0.9, n)
    return np.column_stack([r * np.cos(th), r * np.sin(th), z])


def run_bichar_conservation(p, seed):
    rng = np.random.default_rng(seed)
    n = int(p["n_points"])
    x0 = conservation_points(rng, n)
    xi0, b0, bt0 = _unit_pairs(rng, n)
    anchor = "Bicharacteristics: conservation laws along trajectories"
    checks, rows = [], []
    for name in p["fields"]:
        fld = bichar.get_field(name)
        bun = bichar.integrate_euler(fld, x0, xi0, b0, p["t_end"], p["dt"], b_tilde0=bt0, save_every=10)
        rep = bichar.conservation_report(bun, fld)
        for q, v in rep.relative_drift.items():
            checks.append(Check(f"{name} {q} relative drift", v, 0.0, 1e-6, "le", anchor))
            rows.append({"field": name, "quantity": q, "relative_drift": v, "omega_source": rep.omega_source})
    # order of the drift on the nonlinear field
    fld = bichar.get_field(p["order_field"])
    drifts = []
    for dt in p["order_dts"]:
        bun = bichar.integrate_euler(fld, x0, xi0, b0, p["t_end"], dt, b_tilde0=bt0, save_every=10**9)
        drifts.append(bichar.conservation_report(bun, fld).worst())
    order = line.fit_slope(p["order_dts"], drifts)
    checks.append(Check(f"{p['order_field']} drift order in dt", order, 4.0, 0.5, "abs", anchor))
    rows += [{"field": p["order_field"], "quantity": "worst", "dt": dt, "relative_drift": d} for dt, d in zip(p["order_dts"], drifts)]
    return Outcome(checks, {"conservation": rows})


def run_beta_bound(p, seed):
    anchor = "Bicharacteristics: poloidal vorticity bounded by beta^2"
    sampler = bichar.BetaSampler(n=int(p["samples"]), seed=seed, ascent_iters=int(p["ascent_iters"]))
    checks, rows = [], []
    for name in p["fields"]:
        fld = bichar.get_field(name)
        for t in p["times"]:
            vb = bichar.poloidal_vorticity_bound(fld, t, sampler, p["dt"])
            rhs = vb.omega_p_0 * vb.beta**2
            checks.append(Check(f"{name} t={t:g} |omega_p(t)| vs |omega_p(0)| beta^2", vb.omega_p_t, rhs, 1e-9 * max(rhs, 1.0), "le", anchor))
            rows.append({"field": name, "t": t, "omega_p_t": vb.omega_p_t, "omega_p_0": vb.omega_p_0, "beta": vb.beta})
    return Outcome(checks, {"beta_bound": rows})


def run_expansion(p, seed):
    anchor = "Axisymmetric flow: radial expansion near the axis"
    checks, rows = [], []
    for name in p["fields"]:
        fld = bichar.get_field(name)
        rep = bichar.expansion_rate(fld, p["T"])
        checks.append(Check(f"{name} sup r_T / r_0 vs lower bound", rep.ratio, rep.lower_bound, 1e-9, "ge", anchor))
        rows += [{"field": name, "r0": float(a), "ratio": float(b)} for a, b in zip(rep.r0, rep.ratios)]
    return Outcome(checks, {"expansion": rows})


# ---------------------------------------------------------------- wkb


def run_wkb_residual(p, seed):
    anchor = "WKB: residual of order epsilon"
    fld = bichar.get_field(p["field"])
    seed_ = wkb.WKBSeed(tuple(p["x0"]), tuple(p["xi0"]), tuple(p["b0"]), radius=p["radius"])
    cloud = wkb.build_fields(fld, seed_, p["t"], resolution=int(p["resolution"]), dt=p["dt"])
    reps = [wkb.residual_identity_check(fld, cloud, p["eps"], h=h, delta=h) for h in p["h_ladder"]]
    main = reps[-1]
    checks = [Check("slope of ||R||_2 against eps", main.slope, 1.0, 0.1, "abs", anchor)]
    mism = [r.identity_mismatch for r in reps]
    order = line.fit_slope(p["h_ladder"], mism)
    checks.append(Check("residual identity mismatch order in h", order, 2.0, 0.0, "ge", anchor))
    rows = [{"eps": float(e), "residual_l2": float(n), "predicted": float(q)} for e, n, q in zip(main.eps, main.norms, main.predicted)]
    rows_h = [{"h": h, "mismatch": m} for h, m in zip(p["h_ladder"], mism)]
    return Outcome(checks, {"wkb_residual": rows, "wkb_identity": rows_h})


def run_wkb_axisymmetric(p, seed):
    anchor = "WKB: axisymmetric extension of the packet"
    fld = bichar.get_field(p["field"])
    th = p["theta0"]
    x0 = np.array([p["r0"] * np.cos(th), p["r0"] * np.sin(th), p["z0"]])
    er = np.array([np.cos(th), np.sin(th), 0.0])
    et = np.array([-np.sin(th), np.cos(th), 0.0])
    ez = np.array([0.0, 0.0, 1.0])
    phi = p["phi"]
    xi0 = np.cos(phi) * er + np.sin(phi) * ez
    s = wkb.WKBSeed(tuple(x0), tuple(xi0), tuple(et), radius=p["radius"], axisymmetric=True)
    rep = wkb.axisymmetric_extension(fld, s, p["t"], n=int(p["n"]))
    checks = [
        Check("initial |xi| = |b| = 1, xi . b = 0", rep.init_defect, 0.0, 1e-12, "le", anchor),
        Check("xi on the grid vs ODE along gamma_t", rep.xi_ode_error, 0.0, 1e-6, "le", anchor),
        Check("b on the grid vs ODE along gamma_t", rep.b_ode_error, 0.0, 1e-6, "le", anchor),
        Check("independence of the angle", rep.theta_defect, 0.0, 1e-10, "le", anchor),
        Check("xi . b at time t", rep.xi_b, 0.0, 1e-7, "le", anchor),
        Check("d_theta S", rep.dS_dtheta, 0.0, 1e-8, "le", anchor),
    ]
    return Outcome(checks, {})


# ---------------------------------------------------------------- profile


def run_l12(p, seed):
    anchor = "Profile: L12 of the approximate steady state"
    checks, rows = [], []
    for a in p["alphas"]:
        g = polar.make_grid(a, 1e-6, 1e6, int(p["n_R"]), int(p["n_beta"]))
        prof = polar.profile_fields(a, g)
        L = polar.l12_nodes(prof.omega)
        exact = 1.5 * np.pi * a / (1 + g.R)
        rel = float(np.max(np.abs(L - exact) / exact))
        checks.append(Check(f"alpha={a:g} max relative error", rel, 0.0, 1e-6, "le", anchor))
        rows += [{"alpha": a, "R": float(R), "L12": float(l), "exact": float(e)} for R, l, e in zip(g.R, L, exact)]
    return Outcome(checks, {"l12": rows})


def run_profile_residual(p, seed):
    anchor = "Profile: approximate steady state"
    checks, rows = [], []
    ratios = []
    for a in p["alphas"]:
        g = polar.make_grid(a, 1e-6, 1e6, int(p["n_R"]), int(p["n_beta"]))
        prof = polar.profile_fields(a, g)
        ident = -polar.diff_DR(prof.omega).values - prof.omega.values + prof.eta.values
        checks.append(Check(f"alpha={a:g} steady identity", float(np.max(np.abs(ident))), 0.0, 1e-12, "le", anchor))
        r = profile.profile_residual_ratio(prof)
        ratios.append(r)
        rows.append({"alpha": a, "residual_ratio": r})
    for k in range(1, len(ratios)):
        q = ratios[k] / ratios[k - 1]
        expect = p["alphas"][k] / p["alphas"][k - 1]
        checks.append(Check(f"residual ratio change alpha {p['alphas'][k - 1]:g} -> {p['alphas'][k]:g}", q, expect, 0.3, "rel", anchor))
    return Outcome(checks, {"profile_residual": rows})


def _manufactured(a, h, nb):
    g = profile.elliptic_grid(a, R_min=np.exp(-6), R_max=np.exp(6), n_beta=nb, h=h)
    f = lambda t: np.exp(-(t**2))  # noqa: E731
    fp = lambda t: -2 * t * np.exp(-(t**2))  # noqa: E731
    fpp = lambda t: (4 * t**2 - 2) * np.exp(-(t**2))  # noqa: E731
    exact = np.exp(-(g.t**2))[:, None] * np.sin(2 * g.beta)[None, :] + np.exp(-(g.t**2))[:, None] * np.sin(4 * g.beta)[None, :]
    # sin(4 beta) f adds 12 f sin(4 beta) through -d_bb - 4
    src = profile.manufactured_source(f, fp, fpp, g).values
    a_ = g.alpha
    radial4 = -(a_**2) * fpp(g.t) - 4 * a_ * fp(g.t) + 12 * f(g.t)
    src = src + radial4[:, None] * np.sin(4 * g.beta)[None, :]
    sol = profile.solve_elliptic(profile.EllipticProblem(polar.PolarField(g, src)))
    err = np.sqrt(g.wt @ ((sol.psi.values - exact) ** 2) @ g.wb)
    return float(err)


def run_elliptic(p, seed):
    anchor = "Profile: elliptic equation for the modified stream function"
    a = p["alpha"]
    hs = [a / 2 / 2**k for k in range(3)]
    errs = [_manufactured(a, h, int(p["n_beta"]) * 2**k) for k, h in enumerate(hs)]
    slope = line.fit_slope(hs, errs)
    checks = [Check("manufactured solution L2 error slope", slope, 2.0, 0.2, "abs", anchor)]
    rows = [{"h": h, "error": e} for h, e in zip(hs, errs)]
    g = profile.elliptic_grid(a, R_min=1e-5, R_max=1e5, n_beta=int(p["n_beta"]))
    prof = polar.profile_fields(a, g)

    def far(R, b):
        return np.sin(2 * b)[None, :] * 1.5 / (1 + np.asarray(R)[:, None])

    sol = profile.solve_elliptic(profile.EllipticProblem(prof.omega, variant=p["variant"], far_field=far))
    lead = far(g.R, g.beta)
    dev = float(np.max(np.abs(sol.psi.values - lead)) / np.max(np.abs(lead)))
    checks.append(Check("profile Psi deviation constant C = dev / alpha", dev / a, 3.0, 0.0, "le", anchor))
    psi_rows = [{"R": float(R), "beta": float(b), "psi": float(v)} for i, R in enumerate(g.R) for b, v in zip(g.beta, sol.psi.values[i])]
    return Outcome(checks, {"elliptic_convergence": rows, "psi": psi_rows})


def _bump(s):
    out = np.zeros_like(s)
    m = np.abs(s) < 1
    out[m] = np.exp(1 - 1 / (1 - s[m] ** 2))
    return out


def _interval_bump(x, lo, hi):
    return _bump((2 * x - lo - hi) / (hi - lo))


def axis_test_vorticities():
    """Swirl-free omega_theta(r, z), odd in z and vanishing near the origin."""

    def sector(r, z):
        rho, beta = np.hypot(r, z), np.arctan2(np.abs(z), r)
        return np.sign(z) * _interval_bump(rho, 1.0, 2.0) * _interval_bump(beta, 0.3, 1.2)

    return {
        "sector": sector,
        "ring": lambda r, z: z * r * _interval_bump(np.hypot(r, z), 0.5, 2.0),
        "cubic": lambda r, z: z**3 * r * _interval_bump(np.hypot(r, z), 0.3, 1.5),
    }


def axis_strain_pair(fn, alpha=0.25, n_R=2000, n_beta=256):
    """(L(omega)(0) on a polar grid, brute-force Biot-Savart u_r^r(0), u_z^z(0))."""
    g = polar.make_grid(alpha, 0.2**alpha, 2.5**alpha, n_R, n_beta)
    rho = g.R ** (1 / alpha)
    F = polar.PolarField(g, fn(rho[:, None] * np.cos(g.beta)[None, :], rho[:, None] * np.sin(g.beta)[None, :]))
    return polar.l_operator_R3(F), biotsavart.axis_strain(fn), biotsavart.axial_strain(fn)


def run_axis_strain(p, seed):
    anchor = "3D Euler: u_r^r at the origin through the L operator"
    checks, rows = [], []
    for name, fn in axis_test_vorticities().items():
        L, ur, uz = axis_strain_pair(fn)
        checks.append(Check(f"{name}: -(1/2) L vs Biot-Savart u_r^r", -0.5 * L, ur, 1e-3, "rel", anchor))
        checks.append(Check(f"{name}: -(3/2) L vs Biot-Savart u_r^r", -1.5 * L, ur, 1e-3, "rel", anchor))
        checks.append(Check(f"{name}: u_r^r vs -(1/2) u_z^z", ur, -0.5 * uz, 1e-5, "rel", anchor))
        rows.append({"vorticity": name, "L": L, "u_r_r": ur, "u_z_z": uz, "ratio": ur / L})
    return Outcome(checks, {"axis_strain": rows})


# ---------------------------------------------------------------- catalog

_FIELDS_ALL = ",".join(bichar.FIELD_LIBRARY)

CATALOG: dict[str, Experiment] = {}


def _register(name, module, description, anchor, params, fn):
    CATALOG[name] = Experiment(name, module, description, anchor, params, fn)


_register(
    "riccati-instability", "riccati", "L^p blowup rates of the linearized Riccati flow near t = 1",
    "Riccati model: instability rate of the linearization",
    {
        "p_values": Param([1.0, 2.0, np.inf], list, lambda v: all(x >= 1 for x in v), "p >= 1"),
        "t_start": Param(0.9, float, lambda v: 0 <= v < 1, "0 <= t_start < 1"),
        "t_end": Param(0.999, float, lambda v: 0 < v < 1, "0 < t_end < 1"),
        "n_times": Param(25, int, lambda v: v >= 3, "n_times >= 3"),
    },
    run_riccati_instability,
)
_register(
    "riccati-stability", "riccati", "energy decay of the dynamically rescaled Riccati flow and the recovered blowup time",
    "Riccati model: stability of the self-similar profile",
    {
        "epsilon": Param(0.05, float, lambda v: 0 < v <= 0.125, "0 < epsilon <= 1/8"),
        "amplitude": Param(2.0, float, _positive, "amplitude > 0"),
        "tau_end": Param(10.0, float, _positive, "tau_end > 0"),
        "dt": Param(0.01, float, lambda v: 0 < v <= 2, "0 < dt <= 2"),
    },
    run_riccati_stability,
)
_register(
    "riccati-sensitivity", "riccati", "first variation of the blowup time in the direction of v0",
    "Riccati model: first variation of the blowup time",
    {"v0_at_zero": Param([0.3, -0.3], list)},
    run_riccati_sensitivity,
)
_register(
    "burgers-gradient", "burgers", "u_x(t, 0) against -1 / (T* - t) from exact characteristics",
    "Burgers: gradient at the shock point",
    {"fractions": Param([0.5, 0.9, 0.99], list, lambda v: all(0 <= x < 1 for x in v), "fractions in [0, 1)")},
    run_burgers_gradient,
)
_register(
    "burgers-growth", "burgers", "L^p growth factor of the linearized Burgers flow against its lower bound",
    "Burgers: L^p growth of the linearization",
    {
        "p_values": Param([1.0, 2.0, 4.0], list, lambda v: all(x >= 1 for x in v), "p >= 1"),
        "fractions": Param([0.9, 0.99, 0.999], list, lambda v: all(0 < x < 1 for x in v), "fractions in (0, 1)"),
    },
    run_burgers_growth,
)
_register(
    "burgers-energy", "burgers", "d/dt ||v||_p^p against (p - 1) int (-u_x) |v|^p",
    "Burgers: L^p energy identity",
    {
        "t": Param(0.9, float, lambda v: 0 < v < 1, "0 < t < 1"),
        "p_values": Param([2.0, 4.0], list, lambda v: all(x >= 1 for x in v), "p >= 1"),
    },
    run_burgers_energy,
)
_register(
    "bichar-conservation", "bichar", "drift of b . xi, omega . xi and (b x b~) . xi along trajectories",
    "Bicharacteristics: conservation laws along trajectories",
    {
        "fields": Param("abc,strain,rotation,hill,swirling_axisymmetric", str),
        "n_points": Param(32, int, _positive, "n_points > 0"),
        "t_end": Param(1.0, float, _positive, "t_end > 0"),
        "dt": Param(1e-3, float, _positive, "dt > 0"),
        "order_field": Param("abc", str),
        "order_dts": Param([0.2, 0.1, 0.05], list, lambda v: len(v) >= 2 and all(x > 0 for x in v), "at least two positive steps"),
    },
    run_bichar_conservation,
)
_register(
    "beta-bound", "bichar", "sup |omega_p(t)| against sup |omega_p(0)| beta(t)^2 over the field library",
    "Bicharacteristics: poloidal vorticity bounded by beta^2",
    {
        "fields": Param(_FIELDS_ALL, str),
        "times": Param([0.5, 1.0, 2.0], list, _pos_list, "positive times"),
        "samples": Param(512, int, _positive, "samples > 0"),
        "ascent_iters": Param(8, int, lambda v: v >= 0, "ascent_iters >= 0"),
        "dt": Param(1e-2, float, _positive, "dt > 0"),
    },
    run_beta_bound,
)
_register(
    "expansion", "bichar", "radial expansion of particle paths near the axis against exp(1/2 int u^r_r)",
    "Axisymmetric flow: radial expansion near the axis",
    {"fields": Param("bounded_axisymmetric,swirling_axisymmetric", str), "T": Param(1.0, float, _positive, "T > 0")},
    run_expansion,
)
_register(
    "wkb-residual", "wkb", "eps-scaling of the WKB residual and the pointwise residual identity",
    "WKB: residual of order epsilon",
    {
        "field": Param("abc", str),
        "x0": Param([0.3, 0.2, 0.1], list),
        "xi0": Param([0.0, 0.0, 1.0], list),
        "b0": Param([1.0, 0.0, 0.0], list),
        "radius": Param(0.2, float, _positive, "radius > 0"),
        "t": Param(0.5, float, _positive, "t > 0"),
        "dt": Param(1e-2, float, _positive, "dt > 0"),
        "resolution": Param(9, int, lambda v: v >= 5, "resolution >= 5"),
        "eps": Param([1e-1, 3e-2, 1e-2, 3e-3, 1e-3], list, _pos_list, "positive eps"),
        "h_ladder": Param([2e-3, 1e-3, 5e-4], list, lambda v: len(v) >= 2 and all(x > 0 for x in v), "at least two positive h"),
    },
    run_wkb_residual,
)
_register(
    "wkb-axisymmetric", "wkb", "axisymmetric extension of xi, b, S and agreement with the ODE",
    "WKB: axisymmetric extension of the packet",
    {
        "field": Param("swirling_axisymmetric", str),
        "r0": Param(0.5, float, lambda v: 0 < v < 1, "0 < r0 < 1"),
        "z0": Param(0.3, float),
        "theta0": Param(0.3, float),
        "phi": Param(0.4, float),
        "radius": Param(0.1, float, _positive, "radius > 0"),
        "t": Param(0.5, float, _positive, "t > 0"),
        "n": Param(17, int, lambda v: v >= 5, "n >= 5"),
    },
    run_wkb_axisymmetric,
)
_register(
    "l12-closed-form", "profile", "L12 of the profile vorticity against (3 pi / 2) alpha / (1 + R)",
    "Profile: L12 of the approximate steady state",
    {
        "alphas": Param([0.1, 0.05], list, lambda v: all(_alpha_ok(x) for x in v), "alpha in (0, 1/4]"),
        "n_R": Param(512, int, lambda v: v >= 8, "n_R >= 8"),
        "n_beta": Param(128, int, lambda v: v >= 8, "n_beta >= 8"),
    },
    run_l12,
)
_register(
    "profile-residual", "profile", "steady identity and the O(alpha) residual of the approximate steady state",
    "Profile: approximate steady state",
    {
        "alphas": Param([0.1, 0.05, 0.025], list, _alphas_ok, "at least two alphas in (0, 1/4]"),
        "n_R": Param(512, int, lambda v: v >= 8, "n_R >= 8"),
        "n_beta": Param(128, int, lambda v: v >= 8, "n_beta >= 8"),
    },
    run_profile_residual,
)
_register(
    "elliptic", "profile", "manufactured-solution convergence and the profile stream function",
    "Profile: elliptic equation for the modified stream function",
    {
        "alpha": Param(0.05, float, _alpha_ok, "alpha in (0, 1/4]"),
        "n_beta": Param(16, int, lambda v: v >= 8, "n_beta >= 8"),
        "variant": Param("half-plane", str, lambda v: v in ("half-plane", "cylinder"), "half-plane or cylinder"),
    },
    run_elliptic,
)
_register(
    "axis-strain", "profile", "u_r^r at the origin from L against brute-force Biot-Savart quadrature",
    "3D Euler: u_r^r at the origin through the L operator",
    {},
    run_axis_strain,
)


# acceptance criterion number -> the one catalog entry that checks it
ACCEPTANCE = {
    1: "riccati-instability",
    2: "riccati-stability",
    3: "burgers-gradient",
    4: "burgers-growth",
    5: "bichar-conservation",
    6: "beta-bound",
    7: "wkb-residual",
    8: "l12-closed-form",
    9: "profile-residual",
    10: "elliptic",
    11: "axis-strain",
}


def list_experiments() -> list[dict]:
    return [{"name": e.name, "module": e.module, "description": e.description, "anchor": e.anchor} for e in CATALOG.values()]


def get_experiment(name: str) -> Experiment:
    try:
        return CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(CATALOG)}") from None


def execute(name: str, params: dict, seed: int) -> tuple[Outcome, float]:
    exp = get_experiment(name)
    p = exp.validate(params)
    if "fields" in p:
        p["fields"] = [f.strip() for f in p["fields"].split(",") if f.strip()]
        for f in p["fields"]:
            bichar.get_field(f)
    t0 = time.perf_counter()
    out = exp.run(p, seed)
    return out, time.perf_counter() - t0
