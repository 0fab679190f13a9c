#!/usr/bin/env python3
"""
QBM Lab - Reduced Equation Symmetries
=====================================

Point symmetries of the reduced equation in canonical time (S = 1)

    U_T = U_vv - v R(T) U_v + q(T) U

generated by alpha(T) d_T + xi(T, v) d_v + F(T, v) U d_U with

    xi = alpha'/2 v + beta
    F  = phi + v/2 (beta R - beta') + v^2/4 (alpha' R + alpha R' - alpha''/2)

where beta solves the Riccati companion beta'' = (R' + R^2) beta and alpha
solves alpha''' = 4 alpha' w2 + 2 alpha w2' with w2 = R' + R^2.

Two readings of phi are carried:

    grouped: phi = phi0 + alpha (q + R/2) - alpha'/4
    nested:  phi = phi0 + alpha ((q + R/2) - alpha'/4)

They coincide when alpha' = 0. The verdict measures, at two refinement
levels, how well the characteristic action F U - alpha U_T - xi U_v of each
reading solves the reduced equation along a numerical solution.

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from scipy.integrate import quad

from .errors import InvalidParameterError
from .fields import Field1D, Grid1D
from .integrators import integrate_fixed
from .profiles import T_SYMBOL, AnalyticProfile, TimeProfile, as_profile
from .reduction import (
    ReducedCoefficients,
    Trajectory1D,
    _reduced_rhs,
    convergence_order,
    reduced_stable_step,
    residual1d,
    solve_reduced,
)

logger = logging.getLogger("qbm_lab.reduced_symmetry")

GROUPED = "grouped"
NESTED = "nested"
READINGS = (GROUPED, NESTED)


# ---------------------------------------------------------------------------
# Companion equations
# ---------------------------------------------------------------------------


def omega_squared(R: TimeProfile) -> TimeProfile:
    """w2 = R' + R^2."""
    return R.derivative() + R * R


def beta_equation_residual(beta: TimeProfile, R: TimeProfile, times: Sequence[float]) -> float:
    """max |beta'' - (R' + R^2) beta| on ``times``."""
    times = np.asarray(times, dtype=float)
    defect = np.asarray(beta.derivative(2)(times)) - np.asarray(omega_squared(R)(times)) * np.asarray(beta(times))
    return float(np.max(np.abs(defect)))


def alpha_equation_residual(alpha: TimeProfile, R: TimeProfile, times: Sequence[float]) -> float:
    """max |alpha''' - 4 alpha' w2 - 2 alpha w2'| on ``times``, from exact derivatives."""
    times = np.asarray(times, dtype=float)
    w2 = omega_squared(R)
    defect = (
        np.asarray(alpha.derivative(3)(times))
        - 4.0 * np.asarray(alpha.derivative()(times)) * np.asarray(w2(times))
        - 2.0 * np.asarray(alpha(times)) * np.asarray(w2.derivative()(times))
    )
    return float(np.max(np.abs(defect)))


def riccati_beta_constant(c: float, beta0: float, beta1: float, T: Any) -> np.ndarray:
    """
    beta(T) = beta0 e^{cT} - beta1/(2c) e^{-cT} for R = c; beta0 + beta1 T when c = 0.
    """
    T = np.asarray(T, dtype=float)
    if c == 0.0:
        return beta0 + beta1 * T
    return beta0 * np.exp(c * T) - beta1 / (2.0 * c) * np.exp(-c * T)


def riccati_beta_profile(c: float, beta0: float, beta1: float) -> AnalyticProfile:
    """``riccati_beta_constant`` as an exact profile in T."""
    T = T_SYMBOL
    if c == 0.0:
        return AnalyticProfile(sympy.Float(beta0) + sympy.Float(beta1) * T)
    return AnalyticProfile(
        sympy.Float(beta0) * sympy.exp(sympy.Float(c) * T)
        - sympy.Float(beta1 / (2.0 * c)) * sympy.exp(-sympy.Float(c) * T)
    )


def riccati_constant_initial(c: float, beta0: float, beta1: float) -> Tuple[float, float]:
    """(beta(0), beta'(0)) of ``riccati_beta_constant``."""
    if c == 0.0:
        return beta0, beta1
    return beta0 - beta1 / (2.0 * c), c * beta0 + beta1 / 2.0


def _cumulative(func: Callable[[float], float], T: np.ndarray) -> np.ndarray:
    """Integral of func over [0, T_k] for increasing T starting at or above 0."""
    out = np.zeros_like(T)
    previous, acc = 0.0, 0.0
    for k, t in enumerate(T):
        if t > previous:
            piece, _ = quad(func, previous, t, epsabs=1e-14, epsrel=1e-13, limit=200)
            acc += piece
        out[k] = acc
        previous = t
    return out


def riccati_beta(R: Any, beta0: float, beta1: float, T: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    General companion solution with L = exp(integral of R over [0, T]):

        beta = beta0 L + beta1 L integral of L^-2,  beta' = R beta + beta1 / L

    so beta(0) = beta0 and beta'(0) = R(0) beta0 + beta1.

    Args:
        T: increasing, non-negative times
    """
    R = as_profile(R)
    T = np.asarray(T, dtype=float)
    if T.ndim != 1 or np.any(T < 0) or np.any(np.diff(T) < 0):
        raise InvalidParameterError("riccati_beta needs non-negative, increasing times")
    log_L = _cumulative(lambda u: R(u), T)

    def inv_L2(u: float) -> float:
        return math.exp(-2.0 * quad(lambda s: R(s), 0.0, u, epsabs=1e-14, epsrel=1e-13)[0])

    L = np.exp(log_L)
    I = _cumulative(inv_L2, T)
    beta = beta0 * L + beta1 * L * I
    dbeta = np.asarray(R(T)) * beta + beta1 / L
    return beta, dbeta


def integrate_beta(R: Any, beta_init: float, dbeta_init: float, T_end: float, dt: float = 1e-3) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """RK4 integration of beta'' = (R' + R^2) beta; returns (times, beta, beta')."""
    R = as_profile(R)
    w2 = omega_squared(R)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1], w2(t) * y[0]])

    times, states = integrate_fixed(rhs, np.array([beta_init, dbeta_init]), 0.0, T_end, dt)
    return times, states[:, 0], states[:, 1]


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedSymmetry:
    """alpha d_T + xi d_v + F U d_U for canonical coefficients (R, q)."""

    alpha: TimeProfile
    beta: TimeProfile
    phi0: float
    R: TimeProfile
    q: TimeProfile
    reading: str = GROUPED

    def __post_init__(self):
        if self.reading not in READINGS:
            raise InvalidParameterError(f"unknown phi reading '{self.reading}' (expected one of {READINGS})")
        for name in ("alpha", "beta", "R", "q"):
            object.__setattr__(self, name, as_profile(getattr(self, name)))

    @cached_property
    def _derivatives(self) -> Dict[str, TimeProfile]:
        return {
            "da": self.alpha.derivative(),
            "dda": self.alpha.derivative(2),
            "db": self.beta.derivative(),
            "dR": self.R.derivative(),
        }

    def phi(self, T: Any) -> Any:
        a, da = self.alpha(T), self._derivatives["da"](T)
        base = self.q(T) + 0.5 * self.R(T)
        if self.reading == GROUPED:
            return self.phi0 + a * base - 0.25 * da
        return self.phi0 + a * (base - 0.25 * da)

    def xi(self, T: float, v: np.ndarray) -> np.ndarray:
        return 0.5 * self._derivatives["da"](T) * v + self.beta(T)

    def F(self, T: float, v: np.ndarray) -> np.ndarray:
        d = self._derivatives
        a, da, dda = self.alpha(T), d["da"](T), d["dda"](T)
        b, db = self.beta(T), d["db"](T)
        R, dR = self.R(T), d["dR"](T)
        return self.phi(T) + 0.5 * v * (b * R - db) + 0.25 * v * v * (da * R + a * dR - 0.5 * dda)


def _centered_derivative(values: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    return out


def characteristic_action(U: Field1D, sym: ReducedSymmetry) -> Field1D:
    """
    F U - alpha U_T - xi U_v with U_T replaced by the reduced operator
    (U is a solution). Derivative parts vanish on the two boundary nodes.
    """
    T = U.t
    v, h = U.grid.coords, U.grid.h
    U_T = _reduced_rhs(U.values, v, h, 1.0, sym.R(T), sym.q(T))
    U_v = _centered_derivative(U.values, h)
    values = sym.F(T, v) * U.values - sym.alpha(T) * U_T - sym.xi(T, v) * U_v
    return U.with_values(values)


# ---------------------------------------------------------------------------
# Verdict
# ---------------------------------------------------------------------------


@dataclass
class ReducedSymmetryVerdict:
    """Characteristic defects per reading and level, with the final decision."""

    levels: List[Dict[str, Any]] = field(default_factory=list)
    readings: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    equation_residuals: Dict[str, float] = field(default_factory=dict)
    accepted: List[str] = field(default_factory=list)
    passed: bool = False
    reason: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "levels": self.levels,
            "readings": self.readings,
            "equation_residuals": self.equation_residuals,
            "accepted_readings": self.accepted,
            "verdict": "passed" if self.passed else "failed",
            "reason": self.reason,
        }


def _require_canonical(rc: ReducedCoefficients) -> None:
    if not (rc.S.is_constant() and rc.S.constant_value() == 1.0):
        raise InvalidParameterError(
            f"reduced symmetries need canonical time (S = 1); got S = {rc.S.describe()}; use to_canonical_time first"
        )


def _level_trajectory(
    grid: Grid1D,
    initial: Callable[[np.ndarray], np.ndarray],
    rc: ReducedCoefficients,
    T_end: float,
    spacing: float,
    cfl_safety: float,
) -> Trajectory1D:
    admissible = min(reduced_stable_step(grid, rc, t, cfl_safety) for t in np.linspace(0.0, T_end, 5))
    stride = max(1, int(math.ceil(spacing / admissible - 1e-9)))
    U0 = Field1D(grid, 0.0, initial(grid.coords))
    return solve_reduced(U0, rc, (0.0, T_end), spacing / stride, snapshot_stride=stride, cfl_safety=cfl_safety)


def reduced_symmetry(
    alpha: Any,
    beta: Any,
    phi0: float,
    rc: ReducedCoefficients,
    grid: Grid1D,
    initial: Callable[[np.ndarray], np.ndarray],
    T_end: float,
    snapshots: int = 50,
    eps: float = 1e-3,
    min_order: float = 1.5,
    equation_tol: float = 1e-6,
    cfl_safety: float = 0.4,
) -> ReducedSymmetryVerdict:
    """
    Decide which phi reading yields a symmetry along a numerical solution.

    At the base level (``grid``, snapshot spacing T_end / snapshots) and one
    refined level (spacing in v and T halved), the characteristic action of
    each reading is applied to every snapshot and the reduced-equation
    residual of the resulting trajectory is measured. A reading is accepted
    when that defect decreases at order >= ``min_order``; a wrong reading
    leaves a plateau. The residual ratio of U + eps * action against U is
    reported alongside.

    Raises:
        InvalidParameterError: rc is not in canonical time
    """
    _require_canonical(rc)
    alpha, beta = as_profile(alpha), as_profile(beta)
    probe = np.linspace(0.0, T_end, 201)
    verdict = ReducedSymmetryVerdict()
    verdict.equation_residuals = {
        "alpha": alpha_equation_residual(alpha, rc.R, probe),
        "beta": beta_equation_residual(beta, rc.R, probe),
    }
    logger.info(
        f"🔍 companion residuals: alpha {verdict.equation_residuals['alpha']:.3e}, "
        f"beta {verdict.equation_residuals['beta']:.3e}"
    )

    symmetries = {
        reading: ReducedSymmetry(alpha, beta, phi0, rc.R, rc.qt, reading) for reading in READINGS
    }
    defects: Dict[str, List[float]] = {reading: [] for reading in READINGS}
    level_grid, spacing = grid, T_end / snapshots
    for level in range(2):
        traj = _level_trajectory(level_grid, initial, rc, T_end, spacing, cfl_safety)
        base = residual1d(traj)
        entry: Dict[str, Any] = {"h": level_grid.h, "snapshot_spacing": spacing, "base_residual": base}
        for reading, sym in symmetries.items():
            images = [characteristic_action(snap, sym) for snap in traj.snapshots]
            defect = residual1d(Trajectory1D(images, rc))
            moved = Trajectory1D([snap + eps * image for snap, image in zip(traj.snapshots, images)], rc)
            defects[reading].append(defect)
            entry[f"{reading}_defect"] = defect
            entry[f"{reading}_transformed_ratio"] = residual1d(moved) / base if base > 0 else None
        verdict.levels.append(entry)
        level_grid, spacing = level_grid.refined(), spacing / 2.0

    for reading in READINGS:
        coarse, fine = defects[reading]
        order = convergence_order(coarse, fine)
        ok = fine == 0.0 or (order is not None and order >= min_order)
        verdict.readings[reading] = {"defects": defects[reading], "order": order, "passed": ok}
        if ok:
            verdict.accepted.append(reading)
        logger.info(f"{'✅' if ok else '❌'} phi reading '{reading}': defects {coarse:.3e} -> {fine:.3e}")

    equations_ok = all(value <= equation_tol for value in verdict.equation_residuals.values())
    verdict.passed = bool(verdict.accepted) and equations_ok
    if not equations_ok:
        verdict.reason = "alpha or beta violates its companion equation"
    elif not verdict.accepted:
        verdict.reason = "no phi reading produces a converging characteristic"
    else:
        verdict.reason = "accepted readings: " + ", ".join(verdict.accepted)
    return verdict
