#!/usr/bin/env python3
"""
QBM Lab - Time Integrators
==========================

Classical four-stage Runge-Kutta shared by the 2D solver, the reduced
solver, the moment oracle, the Riccati companion and the Ermakov-Pinney
integrator.
"""

import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import InvalidParameterError

RHS = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(rhs: RHS, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step of size dt from (t, y)."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k1)
    k3 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def uniform_steps(t0: float, t1: float, dt: float) -> Tuple[int, float]:
    """
    Number of uniform steps covering [t0, t1] with step at most dt, and the
    effective step. An empty or reversed span gives (0, 0.0).
    """
    if not dt > 0:
        raise InvalidParameterError(f"time step must be positive, got dt={dt}")
    span = t1 - t0
    if span <= 0:
        return 0, 0.0
    n = max(1, int(math.ceil(span / dt - 1e-9)))
    return n, span / n


def integrate_fixed(
    rhs: RHS,
    y0: np.ndarray,
    t0: float,
    t1: float,
    dt: float,
    monitor: Optional[Callable[[float, np.ndarray], None]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integrate y' = rhs(t, y) on [t0, t1] with uniform RK4 steps.

    Args:
        monitor: called after every step with (t, y); may raise to abort

    Returns:
        (times, states) with states[k] the solution at times[k]
    """
    n, h = uniform_steps(t0, t1, dt)
    y = np.array(y0, dtype=float)
    times: List[float] = [t0]
    states: List[np.ndarray] = [y.copy()]
    for k in range(n):
        t = t0 + k * h
        y = rk4_step(rhs, t, y, h)
        t_next = t1 if k == n - 1 else t0 + (k + 1) * h
        if monitor is not None:
            monitor(t_next, y)
        times.append(t_next)
        states.append(y.copy())
    return np.asarray(times), np.asarray(states)
