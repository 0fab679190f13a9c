#!/usr/bin/env python3
"""
QBM Lab - Symmetry Generator Module
===================================

Lie point generators of the master equation restricted to the closed class

    X = xi_t d_t + xi_x(t) d_x + xi_y(t) d_y + (alpha(t) x + beta(t) y + gamma(t)) Z d_Z

with xi_t constant. Everything here works on profile objects: brackets are
computed in closed form and never by differencing sampled fields.

Key Features:
    - The six constant-coefficient generators Y1, YZ, X1..X4 as printed,
      with lambda = sqrt(4p - m q^2)
    - The determining conditions of the class, evaluated as a structural
      defect for any generator and any coefficients:

          xi_x' + q xi_x + p xi_y + 2 r alpha + s beta = 0
          xi_y' - xi_x/m + s alpha                     = 0
          alpha' - q alpha + beta/m                    = 0
          beta' - p alpha                              = 0
          gamma'                                       = 0

    - The two translation generators that solve these conditions for
      constant coefficients (m b'' + m q b' + p b = 0, xi_x = m b')
    - Closed-form flows applied to sampled trajectories
    - Bracket tables resolved against the input span

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from .coefficients import CoefficientSet, lambda_const
from .errors import CoverageError, InvalidParameterError, NotConstantError
from .fields import Field2D, sample_points
from .master_solver import Trajectory2D
from .profiles import T_SYMBOL, AnalyticProfile, Domain, TimeProfile, as_profile

logger = logging.getLogger("qbm_lab.symmetry")

COMPONENTS = ("xi_x", "xi_y", "alpha", "beta", "gamma")
DEFAULT_MARGIN_FRACTION = 0.1


@dataclass(frozen=True)
class PointGenerator:
    """A generator of the closed class; numbers are accepted for profiles."""

    xi_t: float
    xi_x: TimeProfile
    xi_y: TimeProfile
    alpha: TimeProfile
    beta: TimeProfile
    gamma: TimeProfile
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "xi_t", float(self.xi_t))
        for name in COMPONENTS:
            object.__setattr__(self, name, as_profile(getattr(self, name)))

    @classmethod
    def build(cls, label: str = "", xi_t: float = 0.0, **components: Any) -> "PointGenerator":
        """Generator with unspecified components set to zero."""
        unknown = set(components) - set(COMPONENTS)
        if unknown:
            raise InvalidParameterError(f"unknown generator components: {sorted(unknown)}")
        values = {name: components.get(name, 0.0) for name in COMPONENTS}
        return cls(xi_t=xi_t, label=label, **values)

    def profiles(self) -> Dict[str, TimeProfile]:
        return {name: getattr(self, name) for name in COMPONENTS}

    def is_pure_z(self) -> bool:
        """Structurally a multiple of Z d_Z (only gamma nonzero)."""
        return self.xi_t == 0.0 and all(getattr(self, n).is_zero() for n in ("xi_x", "xi_y", "alpha", "beta"))

    def sample(self, times: np.ndarray) -> np.ndarray:
        """Stacked coefficient vector [xi_t, xi_x(t), ..., gamma(t)] at the given times."""
        times = np.asarray(times, dtype=float)
        parts = [np.full(times.shape, self.xi_t)]
        parts += [np.asarray(getattr(self, name)(times), dtype=float) for name in COMPONENTS]
        return np.concatenate(parts)

    def describe(self) -> Dict[str, str]:
        info = {"xi_t": repr(self.xi_t)}
        info.update({name: getattr(self, name).describe() for name in COMPONENTS})
        return info


def default_sample_times(domain: Domain, n: int = 20) -> np.ndarray:
    """n times in the overlap of [0, 1] with the domain (or its first unit)."""
    lo, hi = domain
    start = max(lo, 0.0)
    stop = min(hi, start + 1.0)
    if not math.isfinite(start):
        start, stop = hi - 1.0, hi
    if stop <= start:
        return np.array([start])
    return np.linspace(start, stop, n)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _exp(rate: float) -> sympy.Expr:
    return sympy.exp(sympy.Float(rate) * T_SYMBOL) if rate != 0.0 else sympy.Integer(1)


def _profile(coefficient: float, envelope: sympy.Expr, domain: Domain) -> AnalyticProfile:
    if coefficient == 0.0:
        return AnalyticProfile.constant(0.0, domain)
    return AnalyticProfile(sympy.Float(coefficient) * envelope, domain)


def constant_generators(cs: CoefficientSet) -> Dict[str, PointGenerator]:
    """
    Y1 = d_t, YZ = Z d_Z and the four generators

        X1 = e^((lam-q)t/2) [m(lam-q) d_x + 2 d_y]
        X2 = e^(-(lam+q)t/2) [m(lam+q) d_x - 2 d_y]
        X3 = e^(-(lam-q)t/2) [2rm(q-lam) d_x + 4(r+sqm) d_y
                              + (2mq(lam-q) x + m^2 q(lam^2-q^2) y) Z d_Z]
        X4 = e^((lam+q)t/2) [2rm(lam+q) d_x + (r+sqm) d_y
                             + (-2mq(lam+q) x + m^2 q(lam^2-q^2) y) Z d_Z]

    transcribed as printed.

    Raises:
        NotConstantError, OverdampedRegimeError: from lambda_const
    """
    lam = lambda_const(cs)
    p, q, r, s = cs.constants()
    m, dom = cs.m, cs.domain
    zero = AnalyticProfile.constant(0.0, dom)
    e1, e2 = _exp((lam - q) / 2.0), _exp(-(lam + q) / 2.0)
    e3, e4 = _exp(-(lam - q) / 2.0), _exp((lam + q) / 2.0)
    rs = r + s * q * m
    z_beta = m * m * q * (lam * lam - q * q)

    gens = {
        "Y1": PointGenerator(1.0, zero, zero, zero, zero, zero, label="Y1"),
        "YZ": PointGenerator(0.0, zero, zero, zero, zero, AnalyticProfile.constant(1.0, dom), label="YZ"),
        "X1": PointGenerator(0.0, _profile(m * (lam - q), e1, dom), _profile(2.0, e1, dom), zero, zero, zero, label="X1"),
        "X2": PointGenerator(0.0, _profile(m * (lam + q), e2, dom), _profile(-2.0, e2, dom), zero, zero, zero, label="X2"),
        "X3": PointGenerator(
            0.0,
            _profile(2.0 * r * m * (q - lam), e3, dom),
            _profile(4.0 * rs, e3, dom),
            _profile(2.0 * m * q * (lam - q), e3, dom),
            _profile(z_beta, e3, dom),
            zero,
            label="X3",
        ),
        "X4": PointGenerator(
            0.0,
            _profile(2.0 * r * m * (lam + q), e4, dom),
            _profile(rs, e4, dom),
            _profile(-2.0 * m * q * (lam + q), e4, dom),
            _profile(z_beta, e4, dom),
            zero,
            label="X4",
        ),
    }
    logger.debug(f"constant generators built with lambda={lam!r}")
    return gens


def characteristic_translations(cs: CoefficientSet) -> Dict[str, PointGenerator]:
    """
    Pure translations b(t)(m d_x ... ) solving the determining conditions for
    constant coefficients: xi_y = b with m b'' + m q b' + p b = 0 and
    xi_x = m b'. Covers distinct real, complex and repeated roots.

    Returns:
        {"T1": ..., "T2": ...}

    Raises:
        NotConstantError: time-dependent coefficients
    """
    p, q, _, _ = cs.constants()
    m, dom = cs.m, cs.domain
    disc = q * q - 4.0 * p / m
    scale = max(q * q, abs(4.0 * p / m), 1.0)
    t = T_SYMBOL
    if abs(disc) <= 1e-12 * scale:
        decay = _exp(-q / 2.0)
        bases = [decay, t * decay]
    elif disc > 0:
        root = math.sqrt(disc)
        bases = [_exp((-q + root) / 2.0), _exp((-q - root) / 2.0)]
    else:
        nu = sympy.Float(math.sqrt(-disc) / 2.0)
        decay = _exp(-q / 2.0)
        bases = [decay * sympy.cos(nu * t), decay * sympy.sin(nu * t)]

    gens = {}
    zero = AnalyticProfile.constant(0.0, dom)
    for i, b in enumerate(bases, start=1):
        b_profile = AnalyticProfile(b, dom)
        a_profile = AnalyticProfile(sympy.Float(m) * sympy.diff(b, t), dom)
        gens[f"T{i}"] = PointGenerator(0.0, a_profile, b_profile, zero, zero, zero, label=f"T{i}")
    return gens


def determining_defect(
    g: PointGenerator,
    cs: CoefficientSet,
    times: Optional[Sequence[float]] = None,
) -> Dict[str, float]:
    """
    Largest violation of each determining condition over sampled times.

    A nonzero xi_t additionally requires autonomous coefficients; the
    ``autonomy`` entry is |xi_t| times the largest coefficient derivative.

    Returns:
        dict with keys xi_x, xi_y, alpha, beta, gamma, autonomy, max, relative
    """
    times = default_sample_times(cs.domain) if times is None else np.asarray(times, dtype=float)
    p, q, r, s = (np.asarray(getattr(cs, n)(times), dtype=float) for n in ("p", "q", "r", "s"))
    m = cs.m
    a, b, al, be, ga = (np.asarray(getattr(g, n)(times), dtype=float) for n in COMPONENTS)
    da, db, dal, dbe, dga = (np.asarray(getattr(g, n).derivative()(times), dtype=float) for n in COMPONENTS)

    defect = {
        "xi_x": float(np.max(np.abs(da + q * a + p * b + 2.0 * r * al + s * be))),
        "xi_y": float(np.max(np.abs(db - a / m + s * al))),
        "alpha": float(np.max(np.abs(dal - q * al + be / m))),
        "beta": float(np.max(np.abs(dbe - p * al))),
        "gamma": float(np.max(np.abs(dga))),
        "autonomy": 0.0,
    }
    if g.xi_t != 0.0:
        rates = [np.max(np.abs(getattr(cs, n).derivative()(times))) for n in ("p", "q", "r", "s")]
        defect["autonomy"] = abs(g.xi_t) * float(max(rates))
    worst = max(defect.values())
    scale = max(float(np.max(np.abs(np.stack([a, b, al, be, ga])))), abs(g.xi_t), 1e-300)
    defect["max"] = worst
    defect["relative"] = worst / scale
    return defect


# ---------------------------------------------------------------------------
# Flows
# ---------------------------------------------------------------------------


def push_forward(
    g: PointGenerator,
    eps: float,
    traj: Trajectory2D,
    margin_fraction: float = DEFAULT_MARGIN_FRACTION,
) -> Trajectory2D:
    """
    Apply the one-parameter flow exp(eps X) to a sampled solution.

    For xi_t = 0 the new value at (t, x, y) is

        Z(t, x', y') exp(eps (alpha x' + beta y' + gamma) + eps^2 (alpha xi_x + beta xi_y)/2)

    with x' = x - eps xi_x(t), y' = y - eps xi_y(t); off-node values come from
    bicubic sampling and pulled-back points beyond the grid contribute zero.
    A pure time translation re-stamps snapshots (constant coefficients only).

    Raises:
        CoverageError: a shift exceeds margin_fraction of the grid extent
        InvalidParameterError: mixed time and space components, or a time
            shift that moves snapshots outside the coefficient domain
        NotConstantError: time translation with time-dependent coefficients
    """
    if eps == 0.0:
        return Trajectory2D(list(traj.snapshots), traj.coefficients, dict(traj.notes))

    if g.xi_t != 0.0:
        if not all(getattr(g, name).is_zero() for name in COMPONENTS):
            raise InvalidParameterError("flows mixing d_t with other components are outside the supported class")
        if not traj.coefficients.is_constant():
            raise NotConstantError("time translation is a symmetry only for constant coefficients")
        shift = eps * g.xi_t
        lo, hi = traj.coefficients.domain
        first, last = float(traj.times[0]) + shift, float(traj.times[-1]) + shift
        if first < lo or last > hi:
            raise InvalidParameterError(
                f"time shift {shift!r} moves snapshots to [{first!r}, {last!r}], "
                f"outside the coefficient domain [{lo}, {hi}]"
            )
        restamped = [snap.with_values(snap.values, t=snap.t + shift) for snap in traj.snapshots]
        return Trajectory2D(restamped, traj.coefficients, dict(traj.notes))

    grid = traj.grid
    extent_x = grid.x.w_max - grid.x.w_min
    extent_y = grid.y.w_max - grid.y.w_min
    times = traj.times
    shift_x = float(np.max(np.abs(eps * np.asarray(g.xi_x(times)))))
    shift_y = float(np.max(np.abs(eps * np.asarray(g.xi_y(times)))))
    if shift_x > margin_fraction * extent_x or shift_y > margin_fraction * extent_y:
        raise CoverageError(
            f"flow of {g.label or 'generator'} with eps={eps!r} shifts by ({shift_x:.4g}, {shift_y:.4g}); "
            f"allowed margin is {margin_fraction:.0%} of the extent ({margin_fraction * extent_x:.4g}, "
            f"{margin_fraction * extent_y:.4g}); widen the grid by at least that shift on each side",
            required=(shift_x, shift_y),
        )

    X, Y = grid.mesh
    snapshots = []
    for snap in traj.snapshots:
        t = snap.t
        a, b = g.xi_x(t), g.xi_y(t)
        al, be, ga = g.alpha(t), g.beta(t), g.gamma(t)
        Xp, Yp = X - eps * a, Y - eps * b
        if a == 0.0 and b == 0.0:
            base = np.array(snap.values)
        else:
            base = sample_points(snap, Xp, Yp, outside=0.0)
        exponent = eps * (al * Xp + be * Yp + ga) + 0.5 * eps * eps * (al * a + be * b)
        snapshots.append(snap.with_values(base * np.exp(exponent)))
    return Trajectory2D(snapshots, traj.coefficients, dict(traj.notes))


# ---------------------------------------------------------------------------
# Brackets
# ---------------------------------------------------------------------------


def _zero_like(g1: PointGenerator, g2: PointGenerator) -> AnalyticProfile:
    lo = max(g1.xi_x.domain[0], g2.xi_x.domain[0])
    hi = min(g1.xi_x.domain[1], g2.xi_x.domain[1])
    return AnalyticProfile.constant(0.0, (lo, hi))


def _time_part(c1: float, prof2: TimeProfile, c2: float, prof1: TimeProfile, zero: TimeProfile) -> TimeProfile:
    result = zero
    if c1 != 0.0 and not prof2.is_zero():
        result = result + c1 * prof2.derivative()
    if c2 != 0.0 and not prof1.is_zero():
        result = result + (-c2) * prof1.derivative()
    return result


def lie_bracket(g1: PointGenerator, g2: PointGenerator) -> PointGenerator:
    """
    Commutator [g1, g2] within the class:

        component c  ->  xi1_t c2' - xi2_t c1'            (c in xi_x, xi_y, alpha, beta)
        gamma        ->  xi1_t gamma2' - xi2_t gamma1'
                         + xi1_x alpha2 + xi1_y beta2 - xi2_x alpha1 - xi2_y beta1

    The d_t component vanishes because xi_t is constant.
    """
    zero = _zero_like(g1, g2)
    c1, c2 = g1.xi_t, g2.xi_t
    parts = {
        name: _time_part(c1, getattr(g2, name), c2, getattr(g1, name), zero)
        for name in ("xi_x", "xi_y", "alpha", "beta", "gamma")
    }
    gamma = parts["gamma"]
    gamma = gamma + g1.xi_x * g2.alpha + g1.xi_y * g2.beta
    gamma = gamma + (-1.0) * (g2.xi_x * g1.alpha) + (-1.0) * (g2.xi_y * g1.beta)
    label = f"[{g1.label},{g2.label}]" if g1.label and g2.label else ""
    return PointGenerator(0.0, parts["xi_x"], parts["xi_y"], parts["alpha"], parts["beta"], gamma, label=label)


@dataclass
class BracketEntry:
    """One resolved (or unresolved) bracket."""

    left: str
    right: str
    kind: str  # zero | pure_z | proportional | span | unresolved
    coefficients: Dict[str, float]
    central: Optional[bool]
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "left": self.left,
            "right": self.right,
            "kind": self.kind,
            "coefficients": dict(sorted(self.coefficients.items())),
            "central": self.central,
            "residual": self.residual,
        }


@dataclass
class AlgebraTable:
    """Bracket table over a labelled generator list plus structure flags."""

    labels: List[str]
    entries: List[BracketEntry]
    structure: Dict[str, Any]
    sample_times: List[float]

    def entry(self, left: str, right: str) -> BracketEntry:
        for e in self.entries:
            if (e.left, e.right) == (left, right):
                return e
        raise KeyError(f"no bracket [{left},{right}] in table")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "generators": list(self.labels),
            "entries": [e.to_dict() for e in self.entries],
            "structure": self.structure,
            "sample_times": list(self.sample_times),
        }

    def format_text(self) -> str:
        """Aligned plain-text rendering."""
        rows = [("bracket", "kind", "central", "expansion", "residual")]
        for e in self.entries:
            expansion = " + ".join(f"{c:.10g}*{name}" for name, c in sorted(e.coefficients.items())) or "0"
            central = "-" if e.central is None else ("yes" if e.central else "no")
            rows.append((f"[{e.left},{e.right}]", e.kind, central, expansion, f"{e.residual:.3e}"))
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        flags = ", ".join(f"{k}={v}" for k, v in sorted(self.structure.items()))
        return "\n".join(lines + ["", f"structure: {flags}"]) + "\n"


def _as_labelled(gens: Union[Mapping[str, PointGenerator], Sequence[PointGenerator]]) -> List[Tuple[str, PointGenerator]]:
    if isinstance(gens, Mapping):
        return [(str(k), v) for k, v in gens.items()]
    labelled = []
    for i, g in enumerate(gens):
        labelled.append((g.label or f"G{i + 1}", g))
    return labelled


def _fit(target: np.ndarray, columns: List[np.ndarray]) -> Tuple[np.ndarray, float]:
    A = np.stack(columns, axis=1)
    coef, *_ = np.linalg.lstsq(A, target, rcond=None)
    return coef, float(np.max(np.abs(A @ coef - target)))


def algebra_table(
    gens: Union[Mapping[str, PointGenerator], Sequence[PointGenerator]],
    times: Optional[Sequence[float]] = None,
    rtol: float = 1e-9,
) -> AlgebraTable:
    """
    Bracket every pair (i < j) and express it by matching coefficient
    profiles at sampled times: zero, pure Z d_Z (with a central flag),
    proportional to one operand, a combination of the inputs, or unresolved.
    """
    labelled = _as_labelled(gens)
    if not labelled:
        raise InvalidParameterError("algebra_table needs at least one generator")
    if times is None:
        times = default_sample_times(labelled[0][1].xi_x.domain)
    times = np.asarray(times, dtype=float)
    samples = {name: g.sample(times) for name, g in labelled}
    n_t = times.size
    scale = max(max(float(np.max(np.abs(v))) for v in samples.values()), 1.0)
    atol = rtol * scale

    central_refs = {
        name: float(g.gamma(times[0]))
        for name, g in labelled
        if g.is_pure_z() and g.gamma.is_constant() and not g.gamma.is_zero()
    }

    entries: List[BracketEntry] = []
    for i, (name_i, gi) in enumerate(labelled):
        for name_j, gj in labelled[i + 1:]:
            vec = lie_bracket(gi, gj).sample(times)
            bscale = max(float(np.max(np.abs(vec))), scale)
            tol = rtol * bscale
            spatial = vec[: 5 * n_t]
            gamma = vec[5 * n_t:]
            if np.max(np.abs(vec)) <= atol:
                entries.append(BracketEntry(name_i, name_j, "zero", {}, True, float(np.max(np.abs(vec)))))
                continue
            if np.max(np.abs(spatial)) <= tol:
                central = bool(np.ptp(gamma) <= tol)
                coefficients = {}
                if central and central_refs:
                    ref_name, ref_value = sorted(central_refs.items())[0]
                    coefficients = {ref_name: float(gamma[0]) / ref_value}
                residual = float(np.max(np.abs(spatial)))
                entries.append(BracketEntry(name_i, name_j, "pure_z", coefficients, central, residual))
                continue
            resolved = False
            for name, g in ((name_i, gi), (name_j, gj)):
                coef, residual = _fit(vec, [samples[name]])
                if residual <= tol:
                    entries.append(BracketEntry(name_i, name_j, "proportional", {name: float(coef[0])}, None, residual))
                    resolved = True
                    break
            if resolved:
                continue
            names = [name for name, _ in labelled]
            coef, residual = _fit(vec, [samples[name] for name in names])
            if residual <= tol:
                coefficients = {n: float(c) for n, c in zip(names, coef) if abs(c) > rtol}
                entries.append(BracketEntry(name_i, name_j, "span", coefficients, None, residual))
            else:
                entries.append(BracketEntry(name_i, name_j, "unresolved", {}, None, residual))

    table = AlgebraTable([name for name, _ in labelled], entries, {}, [float(t) for t in times])
    table.structure = _structure_flags(table, dict(labelled))
    return table


def _structure_flags(table: AlgebraTable, gens: Dict[str, PointGenerator]) -> Dict[str, Any]:
    translations = [name for name in table.labels if name.startswith("X")]
    time_like = [name for name, g in gens.items() if g.xi_t != 0.0]
    flags: Dict[str, Any] = {"unresolved": sum(1 for e in table.entries if e.kind == "unresolved")}

    pairs = [e for e in table.entries if e.left in translations and e.right in translations]
    if pairs:
        flags["translation_brackets_pure_z"] = all(e.kind in ("zero", "pure_z") for e in pairs)
        flags["translation_brackets_central"] = all(e.kind == "zero" or e.central for e in pairs)
    if "X1" in translations and "X2" in translations:
        flags["translations_commute"] = table.entry("X1", "X2").kind == "zero"
    if time_like and translations:
        rates = []
        for e in table.entries:
            if {e.left, e.right} & set(time_like) and ({e.left, e.right} & set(translations)):
                other = e.right if e.left in time_like else e.left
                rates.append(e.kind == "zero" or (e.kind == "proportional" and other in e.coefficients))
        flags["time_acts_by_scaling"] = bool(rates) and all(rates)
    return flags
