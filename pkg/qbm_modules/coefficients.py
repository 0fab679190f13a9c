#!/usr/bin/env python3
"""
QBM Lab - Coefficient Module
============================

Physical parameters and the four time-dependent coefficients of the master
equation

    Z_t = -(x/m) Z_y + p(t) y Z_x + q(t) (x Z)_x + r(t) Z_xx + s(t) Z_xy

with x the momentum and y the position. ``from_physical`` builds the set from
the oscillator frequency, damping and the two diffusion profiles:

    p = m Omega^2,  q = 2 Gamma,  r = hbar m Gamma h,  s = hbar Gamma f

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from .errors import DomainError, InvalidParameterError, NotConstantError, OverdampedRegimeError
from .profiles import FULL_DOMAIN, AnalyticProfile, Domain, TimeProfile, as_profile, intersect_domains

logger = logging.getLogger("qbm_lab.coefficients")


@dataclass(frozen=True)
class CoefficientSet:
    """
    Mass, Planck constant and the profiles p, q, r, s.

    Attributes:
        m: mass (> 0)
        p, q, r, s: coefficient profiles
        hbar: Planck constant (> 0, default 1)
        domain: declared evaluation interval, intersected with the profiles'
        description: free text carried into manifests
    """

    m: float
    p: TimeProfile
    q: TimeProfile
    r: TimeProfile
    s: TimeProfile
    hbar: float = 1.0
    domain: Domain = FULL_DOMAIN
    description: str = field(default="", compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.m) and self.m > 0):
            raise InvalidParameterError(f"mass must be positive, got m={self.m}")
        if not (math.isfinite(self.hbar) and self.hbar > 0):
            raise InvalidParameterError(f"hbar must be positive, got hbar={self.hbar}")
        domain = (float(self.domain[0]), float(self.domain[1]))
        for name in ("p", "q", "r", "s"):
            profile = as_profile(getattr(self, name))
            object.__setattr__(self, name, profile)
            domain = intersect_domains(domain, profile.domain)
        object.__setattr__(self, "domain", domain)

    def eval(self, t: float) -> Tuple[float, float, float, float]:
        """Return (p, q, r, s) at time t; DomainError outside the domain."""
        lo, hi = self.domain
        if not (lo - 1e-12 * max(1.0, abs(lo)) <= t <= hi + 1e-12 * max(1.0, abs(hi))):
            raise DomainError(f"t={t!r} is outside the coefficient domain [{lo}, {hi}]", location=t)
        return (self.p(t), self.q(t), self.r(t), self.s(t))

    def is_constant(self) -> bool:
        return all(getattr(self, name).is_constant() for name in ("p", "q", "r", "s"))

    def constants(self) -> Tuple[float, float, float, float]:
        """(p, q, r, s) of a constant set; NotConstantError otherwise."""
        for name in ("p", "q", "r", "s"):
            if not getattr(self, name).is_constant():
                raise NotConstantError(f"coefficient {name} = {getattr(self, name).describe()} is time-dependent")
        return tuple(getattr(self, name).constant_value() for name in ("p", "q", "r", "s"))

    def describe(self) -> Dict[str, Any]:
        """JSON-ready description for manifests and reports."""
        return {
            "m": self.m,
            "hbar": self.hbar,
            "p": self.p.describe(),
            "q": self.q.describe(),
            "r": self.r.describe(),
            "s": self.s.describe(),
            "domain": [_json_bound(self.domain[0]), _json_bound(self.domain[1])],
            "description": self.description,
        }


def _json_bound(value: float):
    return value if math.isfinite(value) else ("inf" if value > 0 else "-inf")


def constant_coefficients(
    m: float,
    p: float,
    q: float,
    r: float,
    s: float,
    hbar: float = 1.0,
    domain: Domain = FULL_DOMAIN,
) -> CoefficientSet:
    """Shorthand for a set of constant profiles."""
    return CoefficientSet(
        m=m,
        p=AnalyticProfile.constant(p),
        q=AnalyticProfile.constant(q),
        r=AnalyticProfile.constant(r),
        s=AnalyticProfile.constant(s),
        hbar=hbar,
        domain=domain,
        description=f"constant p={p!r} q={q!r} r={r!r} s={s!r}",
    )


def from_physical(
    m: float,
    hbar: float,
    Omega2: Any,
    Gamma: Any,
    h: Any,
    f: Any,
    domain: Domain = FULL_DOMAIN,
) -> CoefficientSet:
    """
    Build the coefficient set from physical profiles.

    Args:
        m: mass (> 0)
        hbar: Planck constant (> 0)
        Omega2: squared oscillator frequency profile
        Gamma: damping profile
        h, f: diffusion profiles
        domain: declared common domain

    Returns:
        CoefficientSet with p = m*Omega2, q = 2*Gamma, r = hbar*m*Gamma*h, s = hbar*Gamma*f

    Raises:
        InvalidParameterError: nonpositive m or hbar
    """
    if not (math.isfinite(m) and m > 0):
        raise InvalidParameterError(f"mass must be positive, got m={m}")
    if not (math.isfinite(hbar) and hbar > 0):
        raise InvalidParameterError(f"hbar must be positive, got hbar={hbar}")
    Omega2, Gamma, h, f = (as_profile(value) for value in (Omega2, Gamma, h, f))
    return CoefficientSet(
        m=m,
        p=m * Omega2,
        q=2.0 * Gamma,
        r=(hbar * m) * Gamma * h,
        s=hbar * Gamma * f,
        hbar=hbar,
        domain=domain,
        description=(
            f"physical Omega2={Omega2.describe()} Gamma={Gamma.describe()} "
            f"h={h.describe()} f={f.describe()}"
        ),
    )


def eval(cs: CoefficientSet, t: float) -> Tuple[float, float, float, float]:  # noqa: A001
    """Module-level form of ``CoefficientSet.eval``."""
    return cs.eval(t)


def lambda_const(cs: CoefficientSet) -> float:
    """
    lambda = sqrt(4p - m q^2) for constant coefficients.

    Raises:
        NotConstantError: any profile is time-dependent
        OverdampedRegimeError: 4p - m q^2 <= 0
    """
    p, q, _, _ = cs.constants()
    discriminant = 4.0 * p - cs.m * q * q
    if discriminant <= 0.0:
        raise OverdampedRegimeError(
            f"4p - m q^2 = {discriminant!r} <= 0 (p={p!r}, q={q!r}, m={cs.m!r}); "
            "the oscillatory generators need a positive value"
        )
    return float(np.sqrt(discriminant))
