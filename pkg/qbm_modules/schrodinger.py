#!/usr/bin/env python3
"""
QBM Lab - Free Schrodinger Map
==============================

Free-particle solutions in complex time and their map onto solutions of the
constant-coefficient reduced equation.

With k = lam + q and a diffusion constant D, the substitution

    tau(t) = tau0 + (i hbar / k)(e^{-k t} - 1)
    chi(t, w) = w sqrt(hbar / (2 M D)) e^{-k t / 2}
    U(t, w) = e^{2 q t} Psi(tau, chi)

turns -hbar/(2M) Psi_chichi = i hbar^2 Psi_tau into

    U_t = (D / hbar) U_ww - (k/2) w U_w + 2 q U.

Two variants pick D:

    - printed: D = s, as the map is usually written
    - matched: D = hbar * s_bar, so that D / hbar equals the reduced diffusion

``roundtrip_check`` measures the residual of the mapped U against the
reduced equation at two refinements and reports whether it converges.

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Sequence, Union

import numpy as np

from .coefficients import CoefficientSet, lambda_const
from .errors import DegenerateMapError, InvalidMapError, InvalidParameterError, SingularEvaluationError
from .reduction import convergence_order, reduced_from_constants

logger = logging.getLogger("qbm_lab.schrodinger")

VARIANTS = ("printed", "matched")


def _check_mass(M: float, hbar: float) -> None:
    if not (math.isfinite(M) and M > 0):
        raise InvalidParameterError(f"mass M must be positive, got {M!r}")
    if not (math.isfinite(hbar) and hbar > 0):
        raise InvalidParameterError(f"hbar must be positive, got {hbar!r}")


@dataclass(frozen=True)
class PlaneWave:
    """amplitude * exp(i k chi + omega tau) with omega = -i k^2 / (2 M hbar)."""

    k: float
    M: float
    hbar: float = 1.0
    amplitude: complex = 1.0

    def __post_init__(self):
        _check_mass(self.M, self.hbar)

    @property
    def omega(self) -> complex:
        return -1j * self.k * self.k / (2.0 * self.M * self.hbar)

    def __call__(self, tau: Any, chi: Any) -> np.ndarray:
        return self.amplitude * np.exp(1j * self.k * np.asarray(chi) + self.omega * np.asarray(tau))


@dataclass(frozen=True)
class GaussianPacket:
    """
    amplitude * sqrt(a / sigma) * exp(-(chi - center)^2 / (2 sigma)),
    sigma(tau) = a + i tau / (M hbar).
    """

    a: float
    M: float
    hbar: float = 1.0
    center: float = 0.0
    amplitude: complex = 1.0

    def __post_init__(self):
        _check_mass(self.M, self.hbar)
        if not self.a > 0:
            raise InvalidParameterError(f"packet width a must be positive, got {self.a!r}")

    def sigma(self, tau: Any) -> np.ndarray:
        return self.a + 1j * np.asarray(tau) / (self.M * self.hbar)

    def __call__(self, tau: Any, chi: Any) -> np.ndarray:
        sigma = self.sigma(tau)
        if np.any(np.abs(sigma) <= 1e-12 * self.a):
            raise SingularEvaluationError(f"Gaussian width sigma(tau) vanishes for tau={tau!r}")
        chi = np.asarray(chi)
        return self.amplitude * np.sqrt(self.a / sigma) * np.exp(-((chi - self.center) ** 2) / (2.0 * sigma))


FreeSolution = Union[PlaneWave, GaussianPacket]


def free_schrodinger(kind: str, params: Dict[str, Any]) -> FreeSolution:
    """Build a free solution from ``plane_wave`` or ``gaussian`` parameters."""
    builders = {"plane_wave": PlaneWave, "gaussian": GaussianPacket}
    if kind not in builders:
        raise InvalidParameterError(f"unknown free solution '{kind}' (expected one of {sorted(builders)})")
    try:
        return builders[kind](**params)
    except TypeError as e:
        raise InvalidParameterError(f"bad parameters for {kind}: {e}") from e


def free_equation_residual(psi: FreeSolution, tau_range: Sequence[float], chi_range: Sequence[float], n: int = 41) -> float:
    """
    max |Psi_tau - i/(2 M hbar) Psi_chichi| on a real (tau, chi) lattice by
    centered differences; decreases as O(h^2) for an exact solution.
    """
    tau = np.linspace(tau_range[0], tau_range[1], n)
    chi = np.linspace(chi_range[0], chi_range[1], n)
    ht, hc = tau[1] - tau[0], chi[1] - chi[0]
    TT, CC = np.meshgrid(tau, chi, indexing="ij")
    P = psi(TT, CC)
    P_tau = (P[2:, 1:-1] - P[:-2, 1:-1]) / (2.0 * ht)
    P_cc = (P[1:-1, 2:] - 2.0 * P[1:-1, 1:-1] + P[1:-1, :-2]) / (hc * hc)
    return float(np.max(np.abs(P_tau - 1j / (2.0 * psi.M * psi.hbar) * P_cc)))


def _k(cs: CoefficientSet) -> float:
    lam = lambda_const(cs)
    _, q, _, _ = cs.constants()
    k = lam + q
    if abs(k) <= 1e-14 * max(abs(lam), 1.0):
        raise DegenerateMapError(f"lam + q = {k!r}: the complex time map degenerates")
    return k


def schrodinger_time(cs: CoefficientSet, tau0: complex, t: Any) -> np.ndarray:
    """tau(t) = tau0 + (i hbar / k)(e^{-k t} - 1), k = lam + q."""
    k = _k(cs)
    return tau0 + (1j * cs.hbar / k) * (np.exp(-k * np.asarray(t, dtype=float)) - 1.0)


def map_diffusion(cs: CoefficientSet, variant: str = "printed") -> float:
    """D of the chosen variant; InvalidMapError when it is not positive."""
    if variant not in VARIANTS:
        raise InvalidParameterError(f"unknown map variant '{variant}' (expected one of {VARIANTS})")
    if variant == "printed":
        _, _, _, D = cs.constants()
    else:
        D = cs.hbar * reduced_from_constants(cs).S.constant_value()
    if not D > 0:
        raise InvalidMapError(f"{variant} map needs a positive diffusion, got D={D!r}")
    return float(D)


def schrodinger_map(
    psi: FreeSolution,
    cs: CoefficientSet,
    M: float,
    tau0: complex,
    t: Any,
    w: Any,
    variant: str = "printed",
) -> np.ndarray:
    """
    U(t, w) = e^{2 q t} Psi(tau(t), chi(t, w)).

    Raises:
        InvalidMapError: D <= 0 for the variant
        DegenerateMapError: lam + q = 0
        InvalidParameterError: psi was built for another mass or hbar
    """
    if psi.M != M or psi.hbar != cs.hbar:
        raise InvalidParameterError(f"free solution carries M={psi.M!r}, hbar={psi.hbar!r}; map uses M={M!r}, hbar={cs.hbar!r}")
    D = map_diffusion(cs, variant)
    k = _k(cs)
    _, q, _, _ = cs.constants()
    t = np.asarray(t, dtype=float)
    w = np.asarray(w, dtype=float)
    tau = schrodinger_time(cs, tau0, t)
    chi = w * math.sqrt(cs.hbar / (2.0 * M * D)) * np.exp(-0.5 * k * t)
    return np.exp(2.0 * q * t) * psi(tau, chi)


def reduced_equation_residual(U: np.ndarray, t: np.ndarray, w: np.ndarray, S: float, R: float, qt: float) -> float:
    """
    max |U_t - (S U_ww - w R U_w + qt U)| over interior lattice nodes,
    U sampled as U[i, j] = U(t[i], w[j]).
    """
    ht, hw = t[1] - t[0], w[1] - w[0]
    U_t = (U[2:, 1:-1] - U[:-2, 1:-1]) / (2.0 * ht)
    U_w = (U[1:-1, 2:] - U[1:-1, :-2]) / (2.0 * hw)
    U_ww = (U[1:-1, 2:] - 2.0 * U[1:-1, 1:-1] + U[1:-1, :-2]) / (hw * hw)
    inner = U[1:-1, 1:-1]
    rhs = S * U_ww - w[None, 1:-1] * R * U_w + qt * inner
    return float(np.max(np.abs(U_t - rhs)))


def roundtrip_check(
    psi: FreeSolution,
    cs: CoefficientSet,
    M: float,
    tau0: complex,
    t_range: Sequence[float],
    w_range: Sequence[float],
    n: int = 41,
    variant: str = "printed",
    min_order: float = 1.8,
) -> Dict[str, Any]:
    """
    Map psi, sample on an n x n lattice and on its refinement (2n - 1), and
    measure the reduced-equation residual with the printed reduced
    coefficients. Passes when the residual decreases at order >= min_order.
    """
    rc = reduced_from_constants(cs)
    S, R, qt = rc.eval(0.0)
    residuals = []
    for points in (n, 2 * n - 1):
        t = np.linspace(t_range[0], t_range[1], points)
        w = np.linspace(w_range[0], w_range[1], points)
        TT, WW = np.meshgrid(t, w, indexing="ij")
        U = schrodinger_map(psi, cs, M, tau0, TT, WW, variant)
        residuals.append(reduced_equation_residual(U, t, w, S, R, qt))
    order = convergence_order(*residuals)
    passed = residuals[1] == 0.0 or (order is not None and order >= min_order)
    logger.info(
        f"{'✅' if passed else '❌'} {variant} map round trip: residuals "
        f"{residuals[0]:.3e} -> {residuals[1]:.3e} (order {order if order is None else round(order, 3)})"
    )
    return {
        "variant": variant,
        "diffusion": map_diffusion(cs, variant),
        "reduced_diffusion": S,
        "residuals": residuals,
        "order": order,
        "passed": bool(passed),
    }
