"""Monotone explicit finite-difference solver for the 1-D nonlinear heat
equation u_t = G(u_x, u_xx), u(0, .) = phi.

The terminal-value problem is solved in its time-reversed forward form; the
value at (t, x) = (1, 0) is the limiting expectation of the weighted CLT.
Each node update maximizes over the four corner controls (sigma, mu), with
the first-order term upwinded per candidate mu so every candidate operator is
monotone; the pointwise max of monotone updates is monotone, which is what
drives convergence to the viscosity solution and the discrete comparison
principle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import InvalidSpecError, NumericsError
from .gcore import GParams

PayoffLike = Union[Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [-L, L] with nx cells (nx + 1 nodes, dx = 2L/nx).

    cfl is the fraction of the explicit stability bound used for the time
    step; T is the horizon.  Defaults meet all desk-scale tolerances in
    seconds.
    """

    L: float = 8.0
    nx: int = 800
    cfl: float = 0.9
    T: float = 1.0

    def __post_init__(self):
        if self.L <= 0:
            raise InvalidSpecError(f"L must be > 0, got {self.L}")
        if self.nx < 3:
            raise InvalidSpecError(f"nx must be >= 3, got {self.nx}")
        if not 0.0 < self.cfl <= 1.0:
            raise InvalidSpecError(f"cfl must be in (0, 1], got {self.cfl}")
        if self.T <= 0:
            raise InvalidSpecError(f"T must be > 0, got {self.T}")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.nx

    def nodes(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.nx + 1)


def corner_controls(params: GParams) -> list[tuple[float, float]]:
    """Distinct (sigma, mu) corners of the moment rectangle, lex-descending."""
    corners = {
        (s, m)
        for s in (params.sigma_lo, params.sigma_hi)
        for m in (params.mu_lo, params.mu_hi)
    }
    return sorted(corners, reverse=True)


def scheme_time_step(params: GParams, grid: GridSpec) -> tuple[float, int]:
    """(dt, nt) obeying dt <= cfl * dx^2 / (sigma_hi^2 + max|mu| dx)."""
    dx = grid.dx
    denom = params.sigma_hi**2 + params.max_abs_mu * dx
    if denom == 0.0:
        return grid.T, 1  # G == 0: nothing moves
    dt_max = grid.cfl * dx * dx / denom
    nt = max(1, math.ceil(grid.T / dt_max))
    return grid.T / nt, nt


def stencil_coefficients(params: GParams, grid: GridSpec, dt: float) -> dict:
    """Per-corner stencil weights of the explicit update.

    For corner (sigma, mu) the center node keeps weight
    1 - dt*(sigma^2/dx^2 + |mu|/dx); monotonicity requires it nonnegative.
    """
    dx = grid.dx
    out = {}
    for sig, mu in corner_controls(params):
        center = 1.0 - dt * (sig * sig / (dx * dx) + abs(mu) / dx)
        out[(sig, mu)] = center
    return out


def assert_monotone(params: GParams, grid: GridSpec, dt: float) -> None:
    coeffs = stencil_coefficients(params, grid, dt)
    worst = min(coeffs.values())
    if worst < 0.0:
        raise NumericsError(
            f"CFL violation: center stencil weight {worst:.6g} < 0 for some corner control"
        )


def coverage_halfwidth(params: GParams, T: float) -> float:
    """Heuristic domain half-width needed so x = 0 is boundary-free at time T."""
    return 6.0 * params.sigma_hi * math.sqrt(T) + params.max_abs_mu * T


@dataclass(frozen=True)
class ValueGrid:
    """Stored time slices of the solution, with boundary-influence metadata."""

    times: np.ndarray
    x: np.ndarray
    values: np.ndarray  # shape (len(times), len(x))
    boundary_collar: np.ndarray  # influence-cone width per stored time
    params: GParams
    grid: GridSpec

    @property
    def L(self) -> float:
        return self.grid.L

    def influenced(self, t: float, x: float) -> bool:
        """True if (t, x) lies inside the boundary domain-of-dependence cone."""
        collar = coverage_halfwidth(self.params, max(t, 0.0))
        return abs(x) > self.L - collar

    def final_slice(self) -> np.ndarray:
        return self.values[-1]


def _march(
    params: GParams,
    u0: np.ndarray,
    grid: GridSpec,
    T: float,
    store_stride: int | None = None,
) -> ValueGrid:
    """Explicit time stepping from the initial slice u0 over horizon T."""
    x = grid.nodes()
    if u0.shape != x.shape:
        raise InvalidSpecError("initial slice does not match the grid")
    dx = grid.dx
    horizon_grid = grid if T == grid.T else GridSpec(grid.L, grid.nx, grid.cfl, T)
    dt, nt = scheme_time_step(params, horizon_grid)
    assert_monotone(params, grid, dt)
    controls = corner_controls(params)

    if store_stride is None:
        store_stride = max(1, nt // 512)

    u = np.array(u0, dtype=float)
    times = [0.0]
    slices = [u.copy()]
    inv_dx2 = 1.0 / (dx * dx)
    inv_dx = 1.0 / dx
    for step in range(1, nt + 1):
        # ghost nodes: linear extrapolation (zero second difference)
        left = 2.0 * u[0] - u[1]
        right = 2.0 * u[-1] - u[-2]
        um = np.concatenate(([left], u[:-1]))
        up = np.concatenate((u[1:], [right]))
        d2 = (up - 2.0 * u + um) * inv_dx2
        fwd = (up - u) * inv_dx
        bwd = (u - um) * inv_dx
        rate = None
        for sig, mu in controls:
            r = 0.5 * sig * sig * d2
            if mu > 0.0:
                r = r + mu * fwd
            elif mu < 0.0:
                r = r + mu * bwd
            rate = r if rate is None else np.maximum(rate, r)
        u = u + dt * rate
        if not np.all(np.isfinite(u)):
            raise NumericsError(f"non-finite value at time step {step} (t={step * dt:.6g})")
        if step % store_stride == 0 or step == nt:
            times.append(step * dt)
            slices.append(u.copy())

    times_arr = np.asarray(times)
    collar = np.array([coverage_halfwidth(params, t) for t in times])
    return ValueGrid(times_arr, x, np.asarray(slices), collar, params, grid)


def solve_gheat(
    params: GParams,
    fn: PayoffLike,
    grid: GridSpec,
    *,
    store_stride: int | None = None,
) -> ValueGrid:
    """Solve u_t = G(u_x, u_xx) with u(0, .) = phi up to t = grid.T."""
    required = coverage_halfwidth(params, grid.T)
    if grid.L < required:
        raise InvalidSpecError(
            f"grid half-width L={grid.L} below coverage requirement {required:.4g}"
        )
    x = grid.nodes()
    u0 = np.asarray(fn(x), dtype=float)
    if u0.shape != x.shape:
        u0 = np.full_like(x, float(fn(0.0)))
    return _march(params, u0, grid, grid.T, store_stride)


def eval_at(vg: ValueGrid, t: float, x: float) -> float:
    """Bilinear interpolation in (t, x) over the stored slices."""
    if not vg.times[0] <= t <= vg.times[-1]:
        raise InvalidSpecError(
            f"t={t} outside stored range [{vg.times[0]}, {vg.times[-1]}]"
        )
    if abs(x) > vg.L:
        raise InvalidSpecError(f"|x|={abs(x)} exceeds domain half-width {vg.L}")
    k = int(np.searchsorted(vg.times, t, side="right")) - 1
    k = min(k, len(vg.times) - 2) if len(vg.times) > 1 else 0
    v_lo = float(np.interp(x, vg.x, vg.values[k]))
    if len(vg.times) == 1:
        return v_lo
    t_lo, t_hi = vg.times[k], vg.times[k + 1]
    v_hi = float(np.interp(x, vg.x, vg.values[k + 1]))
    if t_hi == t_lo:
        return v_hi
    theta = (t - t_lo) / (t_hi - t_lo)
    return (1.0 - theta) * v_lo + theta * v_hi


def limit_expectation(params: GParams, fn: PayoffLike, grid: GridSpec) -> float:
    """The limiting expectation of the weighted CLT: u(1, 0)."""
    if grid.T < 1.0:
        raise InvalidSpecError(f"grid horizon T={grid.T} must be >= 1")
    vg = solve_gheat(params, fn, grid)
    return eval_at(vg, 1.0, 0.0)


def semigroup_residual(
    params: GParams,
    fn: PayoffLike,
    t1: float,
    t2: float,
    grid: GridSpec,
) -> float:
    """Flow-property defect: restart the solver from the slice at t1 and
    compare with the direct solution at t1 + t2, sup over interior nodes
    (a collar of width 3*sigma_hi*sqrt(t2) is excluded at each boundary)."""
    if t1 <= 0 or t2 <= 0:
        raise InvalidSpecError("t1 and t2 must be > 0")
    if t1 + t2 > grid.T:
        raise InvalidSpecError(f"t1 + t2 = {t1 + t2} exceeds horizon T={grid.T}")
    required = coverage_halfwidth(params, t1 + t2)
    if grid.L < required:
        raise InvalidSpecError(
            f"grid half-width L={grid.L} below coverage requirement {required:.4g}"
        )
    x = grid.nodes()
    u0 = np.asarray(fn(x), dtype=float)
    if u0.shape != x.shape:
        u0 = np.full_like(x, float(fn(0.0)))

    first = _march(params, u0, grid, t1, store_stride=None)
    restarted = _march(params, first.final_slice(), grid, t2, store_stride=None)
    direct = _march(params, u0, grid, t1 + t2, store_stride=None)

    collar = 3.0 * params.sigma_hi * math.sqrt(t2)
    interior = np.abs(x) <= grid.L - collar
    if not np.any(interior):
        raise InvalidSpecError("interior region empty: enlarge L or shrink t2")
    diff = np.abs(direct.final_slice() - restarted.final_slice())
    return float(np.max(diff[interior]))
