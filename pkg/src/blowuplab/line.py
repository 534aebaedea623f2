"""One-dimensional grids with quadrature weights, and profiles living on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .polar import interval_matrix


@dataclass(frozen=True, eq=False)
class Grid1D:
    x: np.ndarray
    w: np.ndarray  # quadrature weights for int dx

    def __post_init__(self):
        if self.x.shape != self.w.shape or np.any(np.diff(self.x) <= 0):
            raise ValueError("grid nodes must be strictly increasing with matching weights")


def _panel_weights_in(s: np.ndarray) -> np.ndarray:
    return interval_matrix(s.size, s[1] - s[0]).sum(axis=0)


def symmetric_log_grid(L: float = 40.0, x_min: float = 1e-8, n_side: int = 2000) -> Grid1D:
    """Nodes 0 and +-exp(s) with s uniform on [log x_min, log L].

    Dense near the origin, where self-similar concentration happens.
    """
    s = np.linspace(np.log(x_min), np.log(L), n_side)
    xs = np.exp(s)
    ws = _panel_weights_in(s) * xs
    # [0, x_min] by the trapezoid rule
    ws[0] += 0.5 * x_min
    x = np.concatenate([-xs[::-1], [0.0], xs])
    w = np.concatenate([ws[::-1], [x_min], ws])
    return Grid1D(x, w)


def uniform_grid(a: float, b: float, n: int) -> Grid1D:
    x = np.linspace(a, b, n)
    return Grid1D(x, _panel_weights_in(x))


def stretched_grid(L: float, n: int, core: float) -> Grid1D:
    """Symmetric x = core * sinh(s) grid on [-L, L]; n odd keeps a node at 0."""
    S = np.arcsinh(L / core)
    s = np.linspace(-S, S, n)
    return Grid1D(core * np.sinh(s), _panel_weights_in(s) * core * np.cosh(s))


@dataclass(frozen=True, eq=False)
class Profile1D:
    """Samples on a Grid1D with an optional exact evaluator.

    `deviation`, when given, holds values minus a known reference profile,
    so small perturbations are never recovered by cancellation.
    """

    grid: Grid1D
    values: np.ndarray
    exact: Callable[[np.ndarray], np.ndarray] | None = None
    deviation: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.x.shape:
            raise ValueError("values do not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def x(self):
        return self.grid.x

    @classmethod
    def from_function(cls, grid: Grid1D, fn) -> "Profile1D":
        return cls(grid, fn(grid.x), fn)

    def __call__(self, x):
        if self.exact is not None:
            return self.exact(np.asarray(x, dtype=float))
        return np.interp(x, self.grid.x, self.values, left=0.0, right=0.0)


def lp_norm(values: np.ndarray, grid: Grid1D, p: float) -> float:
    if np.isinf(p):
        return float(np.max(np.abs(values)))
    return float((grid.w @ np.abs(values) ** p) ** (1.0 / p))


def fit_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
