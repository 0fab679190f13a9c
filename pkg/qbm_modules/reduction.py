#!/usr/bin/env python3
"""
QBM Lab - Invariant Reduction Module
====================================

Reduction of the master equation to the one-dimensional evolution

    U_t = S(t) U_ww - w R(t) U_w + qt(t) U

through Z(t, x, y) = U(t, w) with an invariant w = y - c x.

Two reductions are provided for constant coefficients:

    - ``reduced_from_constants``: the printed form with
      w = (y m (lam - q) - 2x) / (m (lam - q)),
      S = 2(-2r + s m (lam - q)) / (m^2 (lam - q)^2), R = (lam + q)/2, qt = 2q
    - ``reduced_from_invariance``: the slope c solving p c^2 + q c + 1/m = 0,
      for which the substitution is exact: S = r c^2 - s c, R = p c, qt = q

Both go through the same solver, reconstruction and residual pipeline, so the
refinement test decides which one actually produces solutions.

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from scipy.integrate import quad

from .coefficients import CoefficientSet, lambda_const
from .errors import (
    BlowUpError,
    CoverageError,
    DegenerateReductionError,
    IllPosedError,
    InvalidParameterError,
    InvalidTrajectoryError,
    MonotonicityError,
    StepSizeError,
)
from .fields import Field1D, Field2D, Grid1D, Grid2D, gaussian1d, sample1d
from .integrators import rk4_step, uniform_steps
from .master_solver import Trajectory2D, residual2d
from .profiles import T_SYMBOL, AnalyticProfile, SplineProfile, TimeProfile, as_profile, intersect_domains
from .symmetry import PointGenerator

logger = logging.getLogger("qbm_lab.reduction")

IMAGINARY_TOLERANCE = 1e-8


@dataclass(frozen=True)
class ReducedCoefficients:
    """(S, R, qt) of the reduced equation."""

    S: TimeProfile
    R: TimeProfile
    qt: TimeProfile
    description: str = field(default="", compare=False)

    def __post_init__(self):
        for name in ("S", "R", "qt"):
            object.__setattr__(self, name, as_profile(getattr(self, name)))
        intersect_domains(intersect_domains(self.S.domain, self.R.domain), self.qt.domain)

    @property
    def domain(self) -> Tuple[float, float]:
        return intersect_domains(intersect_domains(self.S.domain, self.R.domain), self.qt.domain)

    def eval(self, t: float) -> Tuple[float, float, float]:
        return (self.S(t), self.R(t), self.qt(t))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "S": self.S.describe(),
            "R": self.R.describe(),
            "qt": self.qt.describe(),
            "description": self.description,
        }


@dataclass(frozen=True)
class InvariantMap:
    """w = y - slope * x."""

    slope: float
    label: str = ""

    def w(self, x: Any, y: Any) -> Any:
        return y - self.slope * x


# ---------------------------------------------------------------------------
# Invariants and reduced coefficients
# ---------------------------------------------------------------------------


def _lambda_minus_q(cs: CoefficientSet) -> Tuple[float, float, float]:
    lam = lambda_const(cs)
    _, q, _, _ = cs.constants()
    d = lam - q
    if abs(d) <= 1e-14 * max(abs(lam), 1.0):
        raise DegenerateReductionError(f"lambda = q = {q!r}: the invariant w is undefined")
    return lam, q, d


def invariant_w(cs: CoefficientSet, t: float, x: Any, y: Any) -> Any:
    """
    w = (y m (lam - q) - 2x) / (m (lam - q)); independent of t.

    Raises:
        DegenerateReductionError: lam = q
    """
    _, _, d = _lambda_minus_q(cs)
    return (y * cs.m * d - 2.0 * x) / (cs.m * d)


def printed_invariant(cs: CoefficientSet) -> InvariantMap:
    _, _, d = _lambda_minus_q(cs)
    return InvariantMap(2.0 / (cs.m * d), label="printed")


def invariance_defect(invariant: InvariantMap, g: PointGenerator, times: Sequence[float]) -> float:
    """
    max over times of |d w| along the spatial part of g, i.e.
    |xi_y(t) - slope * xi_x(t)|; zero for a zeroth-order invariant.
    """
    times = np.asarray(times, dtype=float)
    return float(np.max(np.abs(np.asarray(g.xi_y(times)) - invariant.slope * np.asarray(g.xi_x(times)))))


def reduced_from_constants(cs: CoefficientSet) -> ReducedCoefficients:
    """
    S = 2(-2r + s m (lam - q)) / (m^2 (lam - q)^2), R = (lam + q)/2, qt = 2q.

    Raises:
        DegenerateReductionError: lam = q
    """
    lam, q, d = _lambda_minus_q(cs)
    _, _, r, s = cs.constants()
    m = cs.m
    s_bar = 2.0 * (-2.0 * r + s * m * d) / (m * m * d * d)
    if s_bar == 0.0:
        logger.warning("⚠️  reduced diffusion vanishes (2r = s m (lam - q)); the reduced equation is first order")
    return ReducedCoefficients(
        S=AnalyticProfile.constant(s_bar, cs.domain),
        R=AnalyticProfile.constant(0.5 * (lam + q), cs.domain),
        qt=AnalyticProfile.constant(2.0 * q, cs.domain),
        description=f"printed constant-coefficient reduction (lambda={lam!r})",
    )


def invariance_slopes(cs: CoefficientSet) -> List[float]:
    """
    Real roots of p c^2 + q c + 1/m = 0 in increasing order.

    Raises:
        DegenerateReductionError: no real root
    """
    p, q, _, _ = cs.constants()
    m = cs.m
    if p == 0.0:
        if q == 0.0:
            raise DegenerateReductionError("p = q = 0: no slope makes y - c x an exact reduction")
        return [-1.0 / (m * q)]
    disc = q * q - 4.0 * p / m
    if disc < 0.0:
        raise DegenerateReductionError(
            f"q^2 - 4p/m = {disc!r} < 0: exact invariant reductions need q^2 >= 4p/m"
        )
    root = math.sqrt(disc)
    return sorted([(-q - root) / (2.0 * p), (-q + root) / (2.0 * p)])


def reduced_from_invariance(cs: CoefficientSet, branch: int = -1) -> Tuple[ReducedCoefficients, InvariantMap]:
    """
    Exact reduction along w = y - c x with p c^2 + q c + 1/m = 0:
    S = r c^2 - s c, R = p c, qt = q.

    Args:
        branch: index into ``invariance_slopes`` (default: the largest slope)
    """
    slopes = invariance_slopes(cs)
    c = slopes[branch]
    p, q, r, s = cs.constants()
    rc = ReducedCoefficients(
        S=AnalyticProfile.constant(r * c * c - s * c, cs.domain),
        R=AnalyticProfile.constant(p * c, cs.domain),
        qt=AnalyticProfile.constant(q, cs.domain),
        description=f"exact invariant reduction (slope c={c!r})",
    )
    return rc, InvariantMap(c, label="invariance")


# ---------------------------------------------------------------------------
# Reduced solver
# ---------------------------------------------------------------------------


@dataclass
class Trajectory1D:
    """Reduced snapshots with strictly increasing times on one grid."""

    snapshots: List[Field1D]
    coefficients: ReducedCoefficients
    notes: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.snapshots:
            raise InvalidTrajectoryError("a trajectory needs at least one snapshot")
        grid = self.snapshots[0].grid
        if any(snap.grid != grid for snap in self.snapshots):
            raise InvalidTrajectoryError("all snapshots of a trajectory must share one grid")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidTrajectoryError("snapshot times must be strictly increasing")

    @property
    def grid(self) -> Grid1D:
        return self.snapshots[0].grid

    @property
    def times(self) -> np.ndarray:
        return np.array([snap.t for snap in self.snapshots])

    def __len__(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, k: int) -> Field1D:
        return self.snapshots[k]


def _reduced_rhs(U: np.ndarray, w: np.ndarray, h: float, S: float, R: float, qt: float) -> np.ndarray:
    out = np.zeros_like(U)
    out[1:-1] = (
        S * (U[2:] - 2.0 * U[1:-1] + U[:-2]) / (h * h)
        - w[1:-1] * R * (U[2:] - U[:-2]) / (2.0 * h)
        + qt * U[1:-1]
    )
    return out


def reduced_stable_step(grid: Grid1D, rc: ReducedCoefficients, t: float, cfl_safety: float = 0.4) -> float:
    """Explicit limit: h / max|w R|, h^2 / 2S and 1/|qt|, times cfl_safety."""
    S, R, qt = rc.eval(t)
    h = grid.h
    limits = [math.inf]
    drift = abs(R) * max(abs(grid.w_min), abs(grid.w_max))
    if drift > 0:
        limits.append(h / drift)
    if S > 0:
        limits.append(h * h / (2.0 * S))
    if qt != 0:
        limits.append(1.0 / abs(qt))
    return cfl_safety * min(limits)


def solve_reduced(
    U0: Field1D,
    rc: ReducedCoefficients,
    t_span: Sequence[float],
    dt: float,
    snapshot_stride: int = 1,
    cfl_safety: float = 0.4,
) -> Trajectory1D:
    """
    RK4 evolution of U_t = S U_ww - w R U_w + qt U on U0's grid, complex-valued,
    with the boundary pair held fixed. U0 is stamped with t_span[0].

    Raises:
        IllPosedError: S < 0 at some step
        StepSizeError: dt above the explicit bound
        BlowUpError: non-finite values
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    n_steps, h_t = uniform_steps(t0, t1, dt)
    grid = U0.grid
    w, h = grid.coords, grid.h
    start = U0.with_values(U0.values, t=t0)
    snapshots = [start]
    if n_steps == 0:
        return Trajectory1D(snapshots, rc)

    def rhs(tau: float, U: np.ndarray) -> np.ndarray:
        return _reduced_rhs(U, w, h, *rc.eval(tau))

    U = np.array(start.values, dtype=complex)
    for k in range(n_steps):
        t = t0 + k * h_t
        for probe in (t, t + 0.5 * h_t, t + h_t):
            if rc.S(probe) < 0:
                raise IllPosedError(f"reduced diffusion S({probe:.6g}) = {rc.S(probe)!r} < 0; the problem is ill-posed forward in time")
        admissible = reduced_stable_step(grid, rc, t, cfl_safety)
        if h_t > admissible * (1.0 + 1e-12):
            raise StepSizeError(
                f"dt={h_t!r} violates the reduced stability bound at t={t!r}; admissible dt <= {admissible!r}",
                admissible_dt=admissible,
            )
        U = rk4_step(rhs, t, U, h_t)
        t_next = t1 if k == n_steps - 1 else t0 + (k + 1) * h_t
        if not np.all(np.isfinite(U)):
            raise BlowUpError(f"non-finite reduced values at t={t_next!r}", time=t_next)
        if (k + 1) % snapshot_stride == 0 or k == n_steps - 1:
            snapshots.append(Field1D(grid, t_next, U))
    return Trajectory1D(snapshots, rc, notes={"dt": h_t, "steps": n_steps})


def residual1d(traj: Trajectory1D) -> float:
    """max |U_t - (S U_ww - w R U_w + qt U)| over interior nodes and times."""
    if len(traj) < 3:
        raise InvalidTrajectoryError(f"residual needs at least 3 snapshots, got {len(traj)}")
    gaps = np.diff(traj.times)
    spacing = float(np.mean(gaps))
    if np.max(np.abs(gaps - spacing)) > 1e-9 * spacing:
        raise InvalidTrajectoryError("snapshot spacing is not uniform")
    w, h = traj.grid.coords, traj.grid.h
    worst = 0.0
    for k in range(1, len(traj) - 1):
        U_t = (traj[k + 1].values - traj[k - 1].values) / (2.0 * spacing)
        rhs = _reduced_rhs(traj[k].values, w, h, *traj.coefficients.eval(traj[k].t))
        worst = max(worst, float(np.max(np.abs(U_t - rhs)[1:-1])))
    return worst


# ---------------------------------------------------------------------------
# Reconstruction and time rescaling
# ---------------------------------------------------------------------------


def reconstruct(
    Utraj: Trajectory1D,
    cs: CoefficientSet,
    grid2d: Grid2D,
    invariant: Optional[InvariantMap] = None,
) -> Trajectory2D:
    """
    Z(t, x, y) = Re U(t, w(x, y)) by cubic interpolation in w.

    ``invariant`` defaults to the printed w. The largest |Im|/|Re| ratio is
    stored in the trajectory notes and flagged when >= 1e-8.

    Raises:
        CoverageError: the w-range of grid2d is not inside the 1D grid
    """
    invariant = invariant or printed_invariant(cs)
    X, Y = grid2d.mesh
    W = invariant.w(X, Y)
    w_lo, w_hi = float(W.min()), float(W.max())
    if not Utraj.grid.contains(np.array([w_lo, w_hi])):
        raise CoverageError(
            f"the 2D grid needs w in [{w_lo:.6g}, {w_hi:.6g}] but the reduced grid covers "
            f"[{Utraj.grid.w_min:.6g}, {Utraj.grid.w_max:.6g}]",
            required=(w_lo, w_hi),
        )
    worst = 0.0
    snapshots = []
    for snap in Utraj.snapshots:
        values = sample1d(snap, W.ravel()).reshape(W.shape)
        re_scale = float(np.max(np.abs(values.real)))
        im_scale = float(np.max(np.abs(values.imag)))
        if im_scale > 0.0:
            worst = max(worst, im_scale / re_scale if re_scale > 0 else math.inf)
        snapshots.append(Field2D(grid2d, snap.t, values.real))
    flagged = worst >= IMAGINARY_TOLERANCE
    if flagged:
        logger.warning(f"⚠️  reconstruction discarded an imaginary part of relative size {worst:.3e}")
    notes = {"imaginary_ratio": worst, "imaginary_flag": flagged, "invariant_slope": invariant.slope}
    return Trajectory2D(snapshots, cs, notes=notes)


def _check_positive(S: TimeProfile, t0: float, t1: float) -> None:
    probe = np.linspace(t0, t1, 65) if t1 > t0 else np.array([t0])
    values = np.asarray(S(probe))
    if np.any(values <= 0):
        k = int(np.argmax(values <= 0))
        raise MonotonicityError(f"S({probe[k]:.6g}) = {values[k]!r} <= 0; the rescaled time must increase")


def rescale_time(S: Any, t: float) -> float:
    """
    T(t) = integral of S over [0, t] by adaptive quadrature.

    Raises:
        MonotonicityError: S <= 0 somewhere on [0, t]
    """
    S = as_profile(S)
    lo, hi = (0.0, t) if t >= 0 else (t, 0.0)
    _check_positive(S, lo, hi)
    if t == 0:
        return 0.0
    value, _ = quad(lambda u: S(u), 0.0, t, epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(value)


def to_canonical_time(rc: ReducedCoefficients, t_end: float, samples: int = 401) -> Tuple[ReducedCoefficients, float]:
    """
    Rewrite the reduced equation in T = integral of S so that S = 1:
    R~(T) = R(t)/S(t), q~(T) = qt(t)/S(t).

    Constant S with analytic R, qt is handled exactly by substitution;
    anything else is tabulated on ``samples`` points (cubic).

    Returns:
        (canonical coefficients, T_end)
    """
    S = rc.S
    if S.is_constant() and isinstance(rc.R, AnalyticProfile) and isinstance(rc.qt, AnalyticProfile):
        s0 = S.constant_value()
        if s0 <= 0:
            raise MonotonicityError(f"S = {s0!r} <= 0; the rescaled time must increase")
        back = {T_SYMBOL: T_SYMBOL / sympy.Float(s0)}
        lo, hi = rc.domain
        domain = (s0 * lo, s0 * hi)
        R = AnalyticProfile(rc.R.expr.subs(back) / sympy.Float(s0), domain)
        qt = AnalyticProfile(rc.qt.expr.subs(back) / sympy.Float(s0), domain)
        one = AnalyticProfile.constant(1.0, domain)
        return ReducedCoefficients(one, R, qt, f"canonical time of: {rc.description}"), s0 * t_end

    t = np.linspace(0.0, t_end, samples)
    _check_positive(S, 0.0, t_end)
    T = np.zeros_like(t)
    for k in range(1, t.size):
        piece, _ = quad(lambda u: S(u), t[k - 1], t[k], epsabs=1e-14, epsrel=1e-12)
        T[k] = T[k - 1] + piece
    s_vals = np.asarray(S(t))
    R = SplineProfile.from_samples(T, np.asarray(rc.R(t)) / s_vals, "cubic", label="R/S in canonical time")
    qt = SplineProfile.from_samples(T, np.asarray(rc.qt(t)) / s_vals, "cubic", label="qt/S in canonical time")
    one = AnalyticProfile.constant(1.0, (T[0], T[-1]))
    return ReducedCoefficients(one, R, qt, f"canonical time of: {rc.description}"), float(T[-1])


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


@dataclass
class ReductionLevel:
    """One refinement level of reduce -> reconstruct -> residual."""

    h1d: float
    h2d: float
    dt: float
    snapshot_spacing: float
    residual: Optional[float]
    imaginary_ratio: Optional[float]
    error: Optional[str] = None
    reduced: Optional[Trajectory1D] = None
    reconstructed: Optional[Trajectory2D] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "h1d": self.h1d,
            "h2d": self.h2d,
            "dt": self.dt,
            "snapshot_spacing": self.snapshot_spacing,
            "residual": self.residual,
            "imaginary_ratio": self.imaginary_ratio,
            "error": self.error,
        }


def run_reduction_pipeline(
    cs: CoefficientSet,
    rc: ReducedCoefficients,
    invariant: InvariantMap,
    grid2d: Grid2D,
    grid1d: Grid1D,
    initial: Dict[str, float],
    t_end: float,
    snapshots: int = 10,
    cfl_safety: float = 0.4,
) -> ReductionLevel:
    """
    Solve the reduced equation from a Gaussian in w, reconstruct on grid2d
    and measure the master-equation residual.

    The step is the largest stable one that divides the snapshot spacing
    t_end / snapshots. Ill-posed or unstable reduced problems are recorded in
    ``error`` instead of raising.
    """
    spacing = t_end / snapshots
    admissible = min(
        reduced_stable_step(grid1d, rc, t, cfl_safety) for t in np.linspace(0.0, t_end, 5)
    )
    stride = max(1, int(math.ceil(spacing / admissible - 1e-9)))
    dt = spacing / stride
    U0 = gaussian1d(grid1d, initial.get("w0", 0.0), initial.get("sw", 1.0), initial.get("amp", 1.0))
    level = ReductionLevel(grid1d.h, grid2d.x.h, dt, spacing, None, None)
    try:
        reduced = solve_reduced(U0, rc, (0.0, t_end), dt, snapshot_stride=stride, cfl_safety=cfl_safety)
        rebuilt = reconstruct(reduced, cs, grid2d, invariant)
        level.residual = residual2d(rebuilt)
        level.imaginary_ratio = rebuilt.notes["imaginary_ratio"]
        level.reduced, level.reconstructed = reduced, rebuilt
    except (IllPosedError, StepSizeError, BlowUpError) as e:
        level.error = str(e)
        logger.warning(f"⚠️  reduction level h1d={grid1d.h:.4g} stopped: {e}")
    return level


def convergence_order(coarse: Optional[float], fine: Optional[float]) -> Optional[float]:
    """log2(coarse / fine), or None when either residual is missing or zero."""
    if coarse is None or fine is None or coarse <= 0 or fine <= 0:
        return None
    return float(math.log2(coarse / fine))
