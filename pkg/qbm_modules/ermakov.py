#!/usr/bin/env python3
"""
QBM Lab - Ermakov-Pinney Module
===============================

The Ermakov-Pinney equation

    rho'' = w2(T) rho + K / rho^3,   w2 = R' + R^2

its linear companion sigma'' = w2 sigma, and Pinney's superposition

    rho = sqrt(a s1^2 + 2 b s1 s2 + c s2^2),  K = (a c - b^2) W^2

which feeds the alpha = rho^2 solutions of the third-order alpha equation.

Key Features:
    - RK4 integration with a floor guard in front of the K / rho^3 singularity
    - Linear basis with Wronskian monitoring
    - Closed-form bases for constant w2
    - First-integral (Ermakov invariant) and alpha-equation checks
    - A single report comparing integrated and superposed rho

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from .errors import AccuracyError, DomainError, InvalidParameterError, SingularityError
from .integrators import integrate_fixed
from .profiles import T_SYMBOL, AnalyticProfile, TimeProfile, as_profile

logger = logging.getLogger("qbm_lab.ermakov")

RHO_FLOOR = 1e-8
WRONSKIAN_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ErmakovProblem:
    """w2 profile, constant K and initial data (rho0 > 0, drho0)."""

    omega2: TimeProfile
    K: float
    rho0: float
    drho0: float

    def __post_init__(self):
        object.__setattr__(self, "omega2", as_profile(self.omega2))
        if not (math.isfinite(self.rho0) and self.rho0 > 0):
            raise InvalidParameterError(f"rho0 must be positive, got {self.rho0!r}")
        if not (math.isfinite(self.K) and math.isfinite(self.drho0)):
            raise InvalidParameterError("K and drho0 must be finite")

    @classmethod
    def from_drift(cls, R: Any, K: float, rho0: float, drho0: float) -> "ErmakovProblem":
        """w2 = R' + R^2; exact for analytic R, spline derivative for tabulated R."""
        R = as_profile(R)
        return cls(R.derivative() + R * R, K, rho0, drho0)


@dataclass
class SampledSolution:
    """Uniformly sampled (T, value, derivative)."""

    times: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray

    def to_rows(self):
        return zip(self.times.tolist(), self.values.tolist(), self.derivatives.tolist())


@dataclass
class LinearBasis:
    """sigma1, sigma2 with data (1, 0) and (0, 1) at the first time."""

    sigma1: SampledSolution
    sigma2: SampledSolution
    wronskian: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.sigma1.times

    @property
    def W(self) -> float:
        return float(self.wronskian[0])


def integrate_ep(
    prob: ErmakovProblem,
    t_span: Sequence[float],
    dt: float,
    rho_floor: float = RHO_FLOOR,
) -> SampledSolution:
    """
    RK4 integration of rho'' = w2 rho + K / rho^3.

    Raises:
        SingularityError: rho drops below rho_floor, with the time of failure
    """
    w2, K = prob.omega2, prob.K

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        rho = y[0]
        return np.array([y[1], w2(t) * rho + K / rho ** 3])

    def guard(t: float, y: np.ndarray) -> None:
        if not (np.isfinite(y[0]) and y[0] >= rho_floor):
            raise SingularityError(f"rho fell to {y[0]!r} below the floor {rho_floor!r} at T={t!r}", time=t)

    times, states = integrate_fixed(rhs, np.array([prob.rho0, prob.drho0]), float(t_span[0]), float(t_span[1]), dt, guard)
    return SampledSolution(times, states[:, 0], states[:, 1])


def linear_basis(
    omega2: Any,
    t_span: Sequence[float],
    dt: float,
    tolerance: float = WRONSKIAN_TOLERANCE,
) -> LinearBasis:
    """
    Integrate sigma'' = w2 sigma from (1, 0) and (0, 1) and monitor
    W = s1 s2' - s2 s1' (equal to 1 initially).

    Raises:
        AccuracyError: |W(T) - W(0)| exceeds tolerance
    """
    w2 = as_profile(omega2)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        factor = w2(t)
        return np.array([y[1], factor * y[0], y[3], factor * y[2]])

    times, states = integrate_fixed(rhs, np.array([1.0, 0.0, 0.0, 1.0]), float(t_span[0]), float(t_span[1]), dt)
    wronskian = states[:, 0] * states[:, 3] - states[:, 2] * states[:, 1]
    drift = float(np.max(np.abs(wronskian - wronskian[0])))
    if drift > tolerance:
        raise AccuracyError(f"Wronskian drifted by {drift:.3e} (> {tolerance:.1e}); reduce dt={dt!r}")
    logger.debug(f"Wronskian drift {drift:.3e} over {times.size} samples")
    return LinearBasis(
        SampledSolution(times, states[:, 0], states[:, 1]),
        SampledSolution(times, states[:, 2], states[:, 3]),
        wronskian,
    )


def analytic_linear_basis(omega2: float) -> Tuple[AnalyticProfile, AnalyticProfile]:
    """Closed-form basis with data (1, 0), (0, 1) at T = 0 for constant w2."""
    T = T_SYMBOL
    if omega2 > 0:
        k = sympy.sqrt(sympy.Float(omega2))
        return AnalyticProfile(sympy.cosh(k * T)), AnalyticProfile(sympy.sinh(k * T) / k)
    if omega2 < 0:
        k = sympy.sqrt(sympy.Float(-omega2))
        return AnalyticProfile(sympy.cos(k * T)), AnalyticProfile(sympy.sin(k * T) / k)
    return AnalyticProfile(sympy.Integer(1)), AnalyticProfile(T)


def pinney_coefficients(rho0: float, drho0: float, K: float, W: float = 1.0) -> Tuple[float, float, float]:
    """
    (a, b, c) reproducing rho(0) = rho0, rho'(0) = drho0 with the basis of
    ``linear_basis``: a = rho0^2, b = rho0 drho0, c = (K / W^2 + b^2) / a.
    """
    if not rho0 > 0:
        raise InvalidParameterError(f"rho0 must be positive, got {rho0!r}")
    a = rho0 * rho0
    b = rho0 * drho0
    return a, b, (K / (W * W) + b * b) / a


def pinney_superposition(basis: LinearBasis, a: float, b: float, c: float) -> Tuple[SampledSolution, float]:
    """
    rho = sqrt(a s1^2 + 2 b s1 s2 + c s2^2) and K = (a c - b^2) W^2.

    Raises:
        DomainError: the quadratic form is not positive somewhere, with its location
    """
    s1, ds1 = basis.sigma1.values, basis.sigma1.derivatives
    s2, ds2 = basis.sigma2.values, basis.sigma2.derivatives
    form = a * s1 * s1 + 2.0 * b * s1 * s2 + c * s2 * s2
    if np.any(form <= 0):
        k = int(np.argmax(form <= 0))
        location = float(basis.times[k])
        raise DomainError(f"Pinney quadratic form is {form[k]!r} <= 0 at T={location!r}", location=location)
    rho = np.sqrt(form)
    drho = (a * s1 * ds1 + b * (ds1 * s2 + s1 * ds2) + c * s2 * ds2) / rho
    K = (a * c - b * b) * basis.W ** 2
    return SampledSolution(basis.times, rho, drho), float(K)


def alpha_from_rho(rho: Union[TimeProfile, np.ndarray]) -> Union[TimeProfile, np.ndarray]:
    """alpha = rho^2, for sampled arrays or profiles."""
    if isinstance(rho, TimeProfile):
        return rho * rho
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError(f"alpha_from_rho needs a positive rho (sample {int(np.argmax(rho <= 0))})")
    return rho * rho


def quadratic_alpha(sigma1: TimeProfile, sigma2: TimeProfile, a: float, b: float, c: float) -> TimeProfile:
    """alpha = a s1^2 + 2 b s1 s2 + c s2^2 as an exact profile."""
    return a * (sigma1 * sigma1) + 2.0 * b * (sigma1 * sigma2) + c * (sigma2 * sigma2)


def ermakov_invariant(rho: np.ndarray, drho: np.ndarray, sigma: np.ndarray, dsigma: np.ndarray, K: float) -> np.ndarray:
    """(rho sigma' - sigma rho')^2 + K (sigma / rho)^2; constant along T."""
    return (rho * dsigma - sigma * drho) ** 2 + K * (sigma / rho) ** 2


def alpha_equation_residual(times: np.ndarray, alpha: np.ndarray, omega2: Any) -> Dict[str, float]:
    """
    Finite-difference substitution of sampled alpha into
    alpha''' = 4 alpha' w2 + 2 alpha w2' (five-point third derivative) and
    the first integral alpha alpha'' - alpha'^2/2 - 2 alpha^2 w2 = 2K.

    Args:
        times: uniformly spaced, at least 5 samples
    """
    times = np.asarray(times, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if times.size < 5:
        raise InvalidParameterError("alpha_equation_residual needs at least 5 samples")
    h = float(times[1] - times[0])
    w2 = as_profile(omega2)
    inner = slice(2, -2)
    t = times[inner]
    a = alpha[inner]
    da = (alpha[3:-1] - alpha[1:-3]) / (2.0 * h)
    dda = (alpha[3:-1] - 2.0 * a + alpha[1:-3]) / (h * h)
    ddda = (-alpha[:-4] + 2.0 * alpha[1:-3] - 2.0 * alpha[3:-1] + alpha[4:]) / (2.0 * h ** 3)
    w = np.asarray(w2(t))
    dw = np.asarray(w2.derivative()(t))
    residual = ddda - 4.0 * da * w - 2.0 * a * dw
    first = a * dda - 0.5 * da * da - 2.0 * a * a * w
    return {
        "residual": float(np.max(np.abs(residual))),
        "first_integral": float(np.mean(first)),
        "first_integral_spread": float(np.ptp(first)),
        "K_estimate": float(np.mean(first) / 2.0),
    }


@dataclass
class ErmakovReport:
    """Cross-check of integrate_ep against Pinney's superposition."""

    problem: Dict[str, Any]
    integrated: SampledSolution
    superposed: SampledSolution
    metrics: Dict[str, Any] = field(default_factory=dict)
    passed: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {"problem": self.problem, "metrics": self.metrics, "verdict": "passed" if self.passed else "failed"}


def ermakov_report(
    prob: ErmakovProblem,
    t_span: Sequence[float],
    dt: float,
    tolerance: float = 1e-6,
    fd_spacing: Optional[float] = 0.01,
) -> ErmakovReport:
    """
    Integrate rho, rebuild it by superposition with consistent (a, b, c),
    and compare: max |rho_ep - rho_pinney|, the Ermakov invariant with both
    basis solutions, the Wronskian drift and the alpha-equation residual on
    a subsample of spacing ``fd_spacing``.
    """
    integrated = integrate_ep(prob, t_span, dt)
    basis = linear_basis(prob.omega2, t_span, dt)
    a, b, c = pinney_coefficients(prob.rho0, prob.drho0, prob.K, basis.W)
    superposed, K = pinney_superposition(basis, a, b, c)
    deviation = float(np.max(np.abs(integrated.values - superposed.values)))

    spreads = []
    for sigma in (basis.sigma1, basis.sigma2):
        inv = ermakov_invariant(integrated.values, integrated.derivatives, sigma.values, sigma.derivatives, prob.K)
        spreads.append(float(np.ptp(inv)))

    stride = 1
    if fd_spacing and integrated.times.size > 1:
        stride = max(1, int(round(fd_spacing / (integrated.times[1] - integrated.times[0]))))
    sub_t, sub_rho = integrated.times[::stride], integrated.values[::stride]
    alpha_check: Dict[str, Any] = {}
    if sub_t.size >= 5 and np.allclose(np.diff(sub_t), sub_t[1] - sub_t[0], rtol=1e-9, atol=0.0):
        alpha_check = alpha_equation_residual(sub_t, alpha_from_rho(sub_rho), prob.omega2)

    metrics = {
        "max_deviation": deviation,
        "K_superposition": K,
        "invariant_spread": max(spreads),
        "wronskian_drift": float(np.max(np.abs(basis.wronskian - basis.W))),
        "pinney_coefficients": {"a": a, "b": b, "c": c},
        "alpha_equation": alpha_check,
        "samples": int(integrated.times.size),
    }
    passed = deviation <= tolerance and max(spreads) <= tolerance
    logger.info(
        f"{'✅' if passed else '❌'} Ermakov-Pinney cross-check: deviation {deviation:.3e}, "
        f"invariant spread {max(spreads):.3e}"
    )
    problem = {
        "omega2": prob.omega2.describe(),
        "K": prob.K,
        "rho0": prob.rho0,
        "drho0": prob.drho0,
        "t_span": [float(t_span[0]), float(t_span[1])],
        "dt": dt,
    }
    return ErmakovReport(problem, integrated, superposed, metrics, passed)
