#!/usr/bin/env python3
"""
QBM Lab - Time Profile Module
=============================

Scalar functions of time used for every coefficient of the master equation,
every symmetry-generator component and every reduced coefficient.

Key Features:
    - Analytic profiles backed by SymPy expressions (exact derivatives, exact
      zero detection, exact products and sums)
    - Tabulated profiles backed by SciPy B-splines (cubic by default, linear
      on request), differentiated through the spline itself
    - Composite profiles for mixed arithmetic with product-rule derivatives
    - Declared evaluation domains; evaluating outside raises DomainError
    - ``parse_profile`` for the ``const:`` / ``exp:`` / ``expr:`` / ``table:``
      notation used in run configurations and on the command line

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import math
from pathlib import Path
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from scipy.interpolate import BSpline, make_interp_spline

from .errors import DomainError, InvalidParameterError, NotConstantError

logger = logging.getLogger("qbm_lab.profiles")

# The single time symbol shared by every analytic profile
T_SYMBOL = sympy.Symbol("t", real=True)

Domain = Tuple[float, float]
FULL_DOMAIN: Domain = (-math.inf, math.inf)

# Relative slack on domain ends so accumulated step times do not trip the check
_DOMAIN_SLACK = 1e-12

ScalarOrArray = Union[float, np.ndarray]


def intersect_domains(first: Domain, second: Domain) -> Domain:
    """Return the common part of two domains."""
    lo, hi = max(first[0], second[0]), min(first[1], second[1])
    if lo > hi:
        raise DomainError(f"domains {first} and {second} do not overlap")
    return (lo, hi)


class TimeProfile:
    """
    A scalar function of time with a declared domain.

    Subclasses implement ``_evaluate``, ``derivative``, ``is_constant``,
    ``is_zero`` and ``describe``. Arithmetic with numbers and other profiles
    is provided here.
    """

    domain: Domain = FULL_DOMAIN

    def __call__(self, t: Any) -> ScalarOrArray:
        arr = np.asarray(t, dtype=float)
        self._check_domain(arr)
        values = np.broadcast_to(np.asarray(self._evaluate(arr), dtype=float), arr.shape)
        if arr.ndim == 0:
            return float(values)
        return np.array(values)

    def _check_domain(self, arr: np.ndarray) -> None:
        lo, hi = self.domain
        slack_lo = _DOMAIN_SLACK * max(1.0, abs(lo)) if math.isfinite(lo) else 0.0
        slack_hi = _DOMAIN_SLACK * max(1.0, abs(hi)) if math.isfinite(hi) else 0.0
        outside = ~np.isfinite(arr) | (arr < lo - slack_lo) | (arr > hi + slack_hi)
        if np.any(outside):
            bad = float(np.atleast_1d(arr)[np.atleast_1d(outside)][0])
            raise DomainError(f"t={bad!r} is outside the profile domain [{lo}, {hi}]", location=bad)

    def _evaluate(self, arr: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, order: int = 1) -> "TimeProfile":
        raise NotImplementedError

    def is_constant(self) -> bool:
        raise NotImplementedError

    def is_zero(self) -> bool:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError

    def constant_value(self) -> float:
        """Value of a constant profile; NotConstantError otherwise."""
        if not self.is_constant():
            raise NotConstantError(f"profile '{self.describe()}' is not constant")
        lo, hi = self.domain
        probe = 0.0 if lo <= 0.0 <= hi else (lo if math.isfinite(lo) else hi)
        return float(self(probe))

    # Arithmetic -----------------------------------------------------------

    def __add__(self, other: Any) -> "TimeProfile":
        other = as_profile(other, strict=False)
        if other is None:
            return NotImplemented
        return _combine("add", self, other)

    __radd__ = __add__

    def __mul__(self, other: Any) -> "TimeProfile":
        other = as_profile(other, strict=False)
        if other is None:
            return NotImplemented
        return _combine("mul", self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "TimeProfile":
        return _combine("mul", AnalyticProfile.constant(-1.0), self)

    def __sub__(self, other: Any) -> "TimeProfile":
        other = as_profile(other, strict=False)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Any) -> "TimeProfile":
        other = as_profile(other, strict=False)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.describe()!r}, domain={self.domain})"


class AnalyticProfile(TimeProfile):
    """Profile given by a closed-form SymPy expression in ``T_SYMBOL``."""

    def __init__(self, expr: Any, domain: Domain = FULL_DOMAIN, label: Optional[str] = None):
        self.expr = sympy.sympify(expr)
        stray = self.expr.free_symbols - {T_SYMBOL}
        if stray:
            raise InvalidParameterError(f"analytic profile has unknown symbols: {sorted(map(str, stray))}")
        self.domain = (float(domain[0]), float(domain[1]))
        self.label = label
        self._func = sympy.lambdify(T_SYMBOL, self.expr, modules="numpy")

    @classmethod
    def constant(cls, value: float, domain: Domain = FULL_DOMAIN) -> "AnalyticProfile":
        value = float(value)
        expr = sympy.Integer(0) if value == 0.0 else sympy.Float(value)
        return cls(expr, domain)

    @classmethod
    def exponential(cls, rate: float, amplitude: float = 1.0, domain: Domain = FULL_DOMAIN) -> "AnalyticProfile":
        if rate == 0.0:
            return cls.constant(amplitude, domain)
        return cls(sympy.Float(amplitude) * sympy.exp(sympy.Float(rate) * T_SYMBOL), domain, label=f"exp:{rate!r}")

    def _evaluate(self, arr: np.ndarray) -> np.ndarray:
        return self._func(arr)

    def derivative(self, order: int = 1) -> "AnalyticProfile":
        return AnalyticProfile(sympy.diff(self.expr, T_SYMBOL, order), self.domain)

    def is_constant(self) -> bool:
        if T_SYMBOL not in self.expr.free_symbols:
            return True
        return sympy.simplify(sympy.diff(self.expr, T_SYMBOL)) == 0

    def is_zero(self) -> bool:
        return self.expr == 0 or self.expr.is_zero is True

    def describe(self) -> str:
        return self.label or str(self.expr)


class SplineProfile(TimeProfile):
    """Profile backed by a SciPy B-spline; domain is the spline's base interval."""

    def __init__(self, spline: BSpline, domain: Domain, label: str = "spline"):
        self._spline = spline
        self.domain = (float(domain[0]), float(domain[1]))
        self.label = label

    @classmethod
    def from_samples(
        cls,
        times: Sequence[float],
        values: Sequence[float],
        kind: str = "cubic",
        label: Optional[str] = None,
    ) -> "SplineProfile":
        """
        Interpolate tabulated samples.

        Args:
            times: strictly increasing sample times (at least two)
            values: sample values
            kind: ``cubic`` or ``linear``
            label: description used in manifests

        Raises:
            InvalidParameterError: on malformed samples or unknown kind
        """
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise InvalidParameterError("tabulated profile needs two equal-length columns with at least two rows")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise InvalidParameterError("tabulated profile contains non-finite entries")
        if np.any(np.diff(t) <= 0):
            raise InvalidParameterError("tabulated profile times must be strictly increasing")
        if kind not in ("cubic", "linear"):
            raise InvalidParameterError(f"unknown interpolation kind '{kind}' (expected cubic or linear)")
        k = min(3 if kind == "cubic" else 1, t.size - 1)
        spline = make_interp_spline(t, v, k=k)
        return cls(spline, (t[0], t[-1]), label or f"table[{kind}, n={t.size}]")

    def _evaluate(self, arr: np.ndarray) -> np.ndarray:
        return self._spline(arr)

    def derivative(self, order: int = 1) -> "SplineProfile":
        if order > self._spline.k:
            return SplineProfile(
                BSpline(self._spline.t, np.zeros_like(self._spline.c), self._spline.k),
                self.domain,
                f"d{order}/dt {self.label}",
            )
        return SplineProfile(self._spline.derivative(order), self.domain, f"d{order}/dt {self.label}")

    def is_constant(self) -> bool:
        # partition of unity: equal coefficients give a constant spline
        return bool(np.ptp(self._spline.c) == 0.0)

    def is_zero(self) -> bool:
        return bool(np.all(self._spline.c == 0.0))

    def describe(self) -> str:
        return self.label


class CompositeProfile(TimeProfile):
    """Sum or product of profiles of different kinds."""

    def __init__(self, op: str, operands: Tuple[TimeProfile, ...]):
        if op not in ("add", "mul"):
            raise InvalidParameterError(f"unknown profile operation '{op}'")
        self.op = op
        self.operands = tuple(operands)
        domain = FULL_DOMAIN
        for operand in self.operands:
            domain = intersect_domains(domain, operand.domain)
        self.domain = domain

    def _evaluate(self, arr: np.ndarray) -> np.ndarray:
        values = [np.asarray(operand._evaluate(arr), dtype=float) for operand in self.operands]
        if self.op == "add":
            return sum(values[1:], values[0])
        result = values[0]
        for value in values[1:]:
            result = result * value
        return result

    def derivative(self, order: int = 1) -> TimeProfile:
        result: TimeProfile = self
        for _ in range(order):
            result = _first_derivative(result)
        return result

    def is_constant(self) -> bool:
        return all(operand.is_constant() for operand in self.operands)

    def is_zero(self) -> bool:
        if self.op == "mul":
            return any(operand.is_zero() for operand in self.operands)
        return all(operand.is_zero() for operand in self.operands)

    def describe(self) -> str:
        joiner = " + " if self.op == "add" else " * "
        return "(" + joiner.join(operand.describe() for operand in self.operands) + ")"


def _first_derivative(profile: TimeProfile) -> TimeProfile:
    if not isinstance(profile, CompositeProfile):
        return profile.derivative()
    if profile.op == "add":
        result = profile.operands[0].derivative()
        for operand in profile.operands[1:]:
            result = result + operand.derivative()
        return result
    first, rest = profile.operands[0], profile.operands[1:]
    tail = rest[0]
    for operand in rest[1:]:
        tail = tail * operand
    return first.derivative() * tail + first * _first_derivative(tail)


def _combine(op: str, left: TimeProfile, right: TimeProfile) -> TimeProfile:
    domain = intersect_domains(left.domain, right.domain)
    if isinstance(left, AnalyticProfile) and isinstance(right, AnalyticProfile):
        expr = left.expr + right.expr if op == "add" else left.expr * right.expr
        return AnalyticProfile(expr, domain)
    if op == "mul" and (left.is_zero() or right.is_zero()):
        return AnalyticProfile.constant(0.0, domain)
    return CompositeProfile(op, (left, right))


def as_profile(value: Any, strict: bool = True) -> Optional[TimeProfile]:
    """Coerce numbers to constant profiles; pass profiles through."""
    if isinstance(value, TimeProfile):
        return value
    if isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool):
        return AnalyticProfile.constant(float(value))
    if strict:
        raise InvalidParameterError(f"cannot interpret {value!r} as a time profile")
    return None


def read_profile_table(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read a two-column decimal table (t, value); '#' starts a comment.

    Raises:
        InvalidParameterError: naming the file and line of the first bad row
    """
    times, values = [], []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise InvalidParameterError(f"cannot read profile table {path}: {e}") from e
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise InvalidParameterError(f"{path}:{lineno}: expected 2 columns, found {len(parts)}")
        try:
            times.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as e:
            raise InvalidParameterError(f"{path}:{lineno}: {e}") from e
    return np.asarray(times), np.asarray(values)


def parse_profile(
    spec: Any,
    base_dir: Optional[Path] = None,
    interpolation: str = "cubic",
    domain: Domain = FULL_DOMAIN,
) -> TimeProfile:
    """
    Build a profile from its textual declaration.

    Accepted forms: a bare number, ``const:<v>``, ``exp:<rate>`` (e^(rate*t)),
    ``expr:<sympy expression in t>`` and ``table:<path>`` (relative paths
    resolve against ``base_dir``).

    Raises:
        InvalidParameterError: on unknown forms or malformed values
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return AnalyticProfile.constant(float(spec), domain)
    if not isinstance(spec, str):
        raise InvalidParameterError(f"profile declaration must be a string or number, got {spec!r}")

    kind, sep, body = spec.strip().partition(":")
    kind = kind.strip().lower()
    body = body.strip()
    try:
        if not sep:
            return AnalyticProfile.constant(float(kind), domain)
        if kind == "const":
            return AnalyticProfile.constant(float(body), domain)
        if kind == "exp":
            return AnalyticProfile.exponential(float(body), domain=domain)
        if kind == "expr":
            expr = sympy.sympify(body, locals={"t": T_SYMBOL})
            return AnalyticProfile(expr, domain, label=f"expr:{body}")
        if kind == "table":
            path = Path(body).expanduser()
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            times, values = read_profile_table(path)
            logger.debug(f"📁 Loaded profile table {path} ({times.size} rows)")
            return SplineProfile.from_samples(times, values, interpolation, label=f"table:{body}")
    except (ValueError, TypeError, sympy.SympifyError) as e:
        raise InvalidParameterError(f"malformed profile '{spec}': {e}") from e
    raise InvalidParameterError(f"unknown profile form '{spec}' (use const:, exp:, expr: or table:)")
