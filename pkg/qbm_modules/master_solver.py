#!/usr/bin/env python3
"""
QBM Lab - Master Equation Solver
================================

Explicit method-of-lines evolution of

    Z_t = -(x/m) Z_y + p y Z_x + q (Z + x Z_x) + r Z_xx + s Z_xy

on a uniform (x, y) grid: second-order centered stencils in space (the
mixed derivative by the four-point cross stencil), classical RK4 in time,
boundary ring held fixed (its right-hand side is zero).

Key Features:
    - Combined explicit stability bound checked before every step
    - Blow-up detection with the offending time
    - Residual oracle (centered time differences against spatial_rhs)
    - Closed moment system as an independent cross-check:

          d<1>/dt  = 0
          d<x>/dt  = -p<y> - q<x>
          d<y>/dt  = <x>/m
          d<xx>/dt = -2p<xy> - 2q<xx> + 2r<1>
          d<xy>/dt = <xx>/m - p<yy> - q<xy> + s<1>
          d<yy>/dt = 2<xy>/m

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np

from .coefficients import CoefficientSet
from .errors import BlowUpError, InvalidGridError, InvalidParameterError, InvalidTrajectoryError, StepSizeError
from .fields import Field2D, Grid2D, integrate2d
from .integrators import integrate_fixed, rk4_step, uniform_steps

logger = logging.getLogger("qbm_lab.master_solver")

MIN_GRID_POINTS = 5
MOMENT_NAMES = ("1", "x", "y", "xx", "xy", "yy")


@dataclass(frozen=True)
class SolverConfig:
    """
    Time-stepping parameters.

    Attributes:
        dt: requested time step (> 0); evolve uses the largest uniform step <= dt
        t_end: final time (>= 0; at or before the initial time nothing is stepped)
        snapshot_stride: steps between stored snapshots (>= 1)
        cfl_safety: factor in (0, 1] applied to the stability bound
    """

    dt: float
    t_end: float
    snapshot_stride: int = 10
    cfl_safety: float = 0.4

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise InvalidParameterError(f"t_end must be non-negative, got {self.t_end}")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise InvalidParameterError(f"snapshot_stride must be an integer >= 1, got {self.snapshot_stride}")
        if not 0 < self.cfl_safety <= 1:
            raise InvalidParameterError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")


@dataclass
class Trajectory2D:
    """Snapshots on one grid with strictly increasing times."""

    snapshots: List[Field2D]
    coefficients: CoefficientSet
    notes: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.snapshots:
            raise InvalidTrajectoryError("a trajectory needs at least one snapshot")
        grid = self.snapshots[0].grid
        for snap in self.snapshots[1:]:
            if snap.grid != grid:
                raise InvalidTrajectoryError("all snapshots of a trajectory must share one grid")
        times = self.times
        if np.any(np.diff(times) <= 0):
            raise InvalidTrajectoryError("snapshot times must be strictly increasing")

    @property
    def grid(self) -> Grid2D:
        return self.snapshots[0].grid

    @property
    def times(self) -> np.ndarray:
        return np.array([snap.t for snap in self.snapshots])

    @property
    def final(self) -> Field2D:
        return self.snapshots[-1]

    def __len__(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, k: int) -> Field2D:
        return self.snapshots[k]


# ---------------------------------------------------------------------------
# Spatial operator
# ---------------------------------------------------------------------------


def _check_grid(grid: Grid2D) -> None:
    if grid.x.n < MIN_GRID_POINTS or grid.y.n < MIN_GRID_POINTS:
        raise InvalidGridError(
            f"the master-equation stencil needs at least {MIN_GRID_POINTS}x{MIN_GRID_POINTS} nodes, "
            f"got {grid.x.n}x{grid.y.n}"
        )


def _rhs_values(
    Z: np.ndarray, grid: Grid2D, m: float, p: float, q: float, r: float, s: float
) -> np.ndarray:
    hx, hy = grid.x.h, grid.y.h
    X, Y = grid.mesh
    Xi, Yi = X[1:-1, 1:-1], Y[1:-1, 1:-1]
    Zc = Z[1:-1, 1:-1]
    Z_x = (Z[2:, 1:-1] - Z[:-2, 1:-1]) / (2.0 * hx)
    Z_y = (Z[1:-1, 2:] - Z[1:-1, :-2]) / (2.0 * hy)
    out = np.zeros_like(Z)
    interior = -(Xi / m) * Z_y + p * Yi * Z_x
    if q != 0.0:
        interior = interior + q * (Zc + Xi * Z_x)
    if r != 0.0:
        interior = interior + r * (Z[2:, 1:-1] - 2.0 * Zc + Z[:-2, 1:-1]) / (hx * hx)
    if s != 0.0:
        interior = interior + s * (Z[2:, 2:] - Z[2:, :-2] - Z[:-2, 2:] + Z[:-2, :-2]) / (4.0 * hx * hy)
    out[1:-1, 1:-1] = interior
    return out


def spatial_rhs(f: Field2D, cs: CoefficientSet, t: float) -> Field2D:
    """
    Right-hand side of the master equation at time t; zero on the boundary ring.

    Raises:
        InvalidGridError: grid smaller than 5x5
        DomainError: t outside the coefficient domain
    """
    _check_grid(f.grid)
    p, q, r, s = cs.eval(t)
    return f.with_values(_rhs_values(f.values, f.grid, cs.m, p, q, r, s))


def stable_time_step(grid: Grid2D, cs: CoefficientSet, t: float, cfl_safety: float = 0.4) -> float:
    """
    cfl_safety times the smallest explicit limit among advection in y
    (h_y / max|x/m|), advection in x (h_x / max|p y + q x|), reaction (1/|q|),
    diffusion in x (h_x^2 / 2|r|) and the mixed term (min(h)^2 / 2|s|).
    Terms with zero coefficient impose no limit.
    """
    p, q, r, s = cs.eval(t)
    hx, hy = grid.x.h, grid.y.h
    X, Y = grid.mesh
    limits = [math.inf]
    vy = float(np.max(np.abs(X))) / cs.m
    if vy > 0:
        limits.append(hy / vy)
    vx = float(np.max(np.abs(p * Y + q * X)))
    if vx > 0:
        limits.append(hx / vx)
    if q != 0.0:
        limits.append(1.0 / abs(q))
    if r != 0.0:
        limits.append(hx * hx / (2.0 * abs(r)))
    if s != 0.0:
        limits.append(min(hx, hy) ** 2 / (2.0 * abs(s)))
    return cfl_safety * min(limits)


def _check_step(grid: Grid2D, cs: CoefficientSet, t: float, dt: float, cfl_safety: float) -> None:
    admissible = stable_time_step(grid, cs, t, cfl_safety)
    if dt > admissible * (1.0 + 1e-12):
        raise StepSizeError(
            f"dt={dt!r} violates the stability bound at t={t!r}; admissible dt <= {admissible!r}",
            admissible_dt=admissible,
        )


def step(f: Field2D, cs: CoefficientSet, t: float, dt: float, cfl_safety: float = 0.4) -> Field2D:
    """
    One RK4 step of size dt from time t; the result is stamped t + dt.

    Raises:
        StepSizeError: dt above the stability bound (reports the admissible dt)
    """
    _check_grid(f.grid)
    if dt == 0:
        return f
    if dt < 0:
        raise InvalidParameterError(f"dt must be non-negative, got {dt}")
    _check_step(f.grid, cs, t, dt, cfl_safety)
    grid, m = f.grid, cs.m

    def rhs(tau: float, Z: np.ndarray) -> np.ndarray:
        return _rhs_values(Z, grid, m, *cs.eval(tau))

    return f.with_values(rk4_step(rhs, t, f.values, dt), t=t + dt)


def evolve(f0: Field2D, cs: CoefficientSet, config: SolverConfig) -> Trajectory2D:
    """
    Evolve from f0.t to config.t_end with uniform steps no larger than config.dt.

    Snapshots are kept every ``snapshot_stride`` steps; the final state is
    always stored. A t_end at or before f0.t returns [f0].

    Raises:
        StepSizeError: propagated from the per-step stability check
        BlowUpError: non-finite values, with the time they appeared
    """
    _check_grid(f0.grid)
    t0 = f0.t
    n_steps, dt = uniform_steps(t0, config.t_end, config.dt)
    if n_steps == 0:
        return Trajectory2D([f0], cs)

    grid, m = f0.grid, cs.m

    def rhs(tau: float, Z: np.ndarray) -> np.ndarray:
        return _rhs_values(Z, grid, m, *cs.eval(tau))

    logger.info(
        f"🔄 Evolving {grid.x.n}x{grid.y.n} grid from t={t0:g} to t={config.t_end:g} "
        f"({n_steps} steps of {dt:.3g})"
    )
    snapshots = [f0]
    Z = np.array(f0.values)
    for k in range(n_steps):
        t = t0 + k * dt
        _check_step(grid, cs, t, dt, config.cfl_safety)
        Z = rk4_step(rhs, t, Z, dt)
        t_next = config.t_end if k == n_steps - 1 else t0 + (k + 1) * dt
        if not np.all(np.isfinite(Z)):
            raise BlowUpError(f"non-finite values at t={t_next!r}", time=t_next)
        if (k + 1) % config.snapshot_stride == 0 or k == n_steps - 1:
            snapshots.append(Field2D(grid, t_next, Z))
            logger.debug(f"snapshot {len(snapshots) - 1} at t={t_next:.6g}")
    return Trajectory2D(snapshots, cs, notes={"dt": dt, "steps": n_steps})


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def _uniform_spacing(times: np.ndarray) -> float:
    gaps = np.diff(times)
    spacing = float(np.mean(gaps))
    if np.max(np.abs(gaps - spacing)) > 1e-9 * max(spacing, 1e-300):
        raise InvalidTrajectoryError(f"snapshot spacing is not uniform (gaps between {gaps.min()!r} and {gaps.max()!r})")
    return spacing


def residual2d(traj: Trajectory2D) -> float:
    """
    max |Z_t - spatial_rhs| over interior nodes and interior snapshot times,
    with Z_t from centered differences of neighbouring snapshots.

    Raises:
        InvalidTrajectoryError: fewer than 3 snapshots or uneven spacing
    """
    if len(traj) < 3:
        raise InvalidTrajectoryError(f"residual needs at least 3 snapshots, got {len(traj)}")
    spacing = _uniform_spacing(traj.times)
    _check_grid(traj.grid)
    worst = 0.0
    cs, grid = traj.coefficients, traj.grid
    for k in range(1, len(traj) - 1):
        snap = traj[k]
        Z_t = (traj[k + 1].values - traj[k - 1].values) / (2.0 * spacing)
        rhs = _rhs_values(snap.values, grid, cs.m, *cs.eval(snap.t))
        worst = max(worst, float(np.max(np.abs(Z_t - rhs)[1:-1, 1:-1])))
    return worst


def boundary_ratio(f: Field2D) -> float:
    """Largest boundary-ring magnitude relative to the peak magnitude."""
    V = np.abs(f.values)
    peak = float(V.max())
    if peak == 0.0:
        return 0.0
    ring = max(V[0, :].max(), V[-1, :].max(), V[:, 0].max(), V[:, -1].max())
    return float(ring) / peak


def grid_moments(f: Field2D) -> Dict[str, float]:
    """Raw moments <1>, <x>, <y>, <xx>, <xy>, <yy> by trapezoidal quadrature."""
    X, Y = f.grid.mesh
    weights = {"1": 1.0, "x": X, "y": Y, "xx": X * X, "xy": X * Y, "yy": Y * Y}
    return {name: integrate2d(f.with_values(f.values * w)) for name, w in weights.items()}


@dataclass(frozen=True)
class MomentTrajectory:
    """Moment histories sampled at ``times``."""

    times: np.ndarray
    values: Dict[str, np.ndarray]

    def final(self) -> Dict[str, float]:
        return {name: float(series[-1]) for name, series in self.values.items()}


def moment_oracle(
    cs: CoefficientSet,
    initial_moments: Mapping[str, float],
    t_span: Sequence[float],
    dt: float,
) -> MomentTrajectory:
    """
    Integrate the closed moment system with RK4.

    Args:
        cs: coefficients (constant or smooth)
        initial_moments: values for "1", "x", "y", "xx", "xy", "yy"
        t_span: (t0, t1)
        dt: maximum RK4 step

    Raises:
        InvalidParameterError: missing moments or dt <= 0
    """
    missing = [name for name in MOMENT_NAMES if name not in initial_moments]
    if missing:
        raise InvalidParameterError(f"initial moments missing: {missing}")
    m = cs.m

    def rhs(t: float, M: np.ndarray) -> np.ndarray:
        p, q, r, s = cs.eval(t)
        one, x, y, xx, xy, yy = M
        return np.array([
            0.0,
            -p * y - q * x,
            x / m,
            -2.0 * p * xy - 2.0 * q * xx + 2.0 * r * one,
            xx / m - p * yy - q * xy + s * one,
            2.0 * xy / m,
        ])

    y0 = np.array([float(initial_moments[name]) for name in MOMENT_NAMES])
    times, states = integrate_fixed(rhs, y0, float(t_span[0]), float(t_span[1]), dt)
    return MomentTrajectory(times, {name: states[:, i] for i, name in enumerate(MOMENT_NAMES)})


def free_streaming_gaussian(
    grid: Grid2D,
    t: float,
    m: float,
    x0: float = 0.0,
    y0: float = 0.0,
    sx: float = 1.0,
    sy: float = 1.0,
    rho: float = 0.0,
    amp: float = 1.0,
) -> Field2D:
    """
    Exact solution of Z_t = -(x/m) Z_y (p = q = r = s = 0) from Gaussian
    data: Z(t, x, y) = Z0(x, y - x t / m), by characteristics.
    """
    X, Y = grid.mesh
    u = (X - x0) / sx
    v = (Y - X * t / m - y0) / sy
    Q = (u * u - 2.0 * rho * u * v + v * v) / (1.0 - rho * rho)
    return Field2D(grid, t, amp * np.exp(-0.5 * Q))


def uniform_part(traj: Trajectory2D) -> Trajectory2D:
    """Drop a trailing snapshot whose spacing differs from the others (t_end not a stride multiple)."""
    times = traj.times
    if len(traj) < 3:
        return traj
    gaps = np.diff(times)
    if abs(gaps[-1] - gaps[0]) <= 1e-9 * gaps[0]:
        return traj
    return Trajectory2D(traj.snapshots[:-1], traj.coefficients, dict(traj.notes))
