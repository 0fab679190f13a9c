#!/usr/bin/env python3
"""
QBM Lab - Run Configuration Module
==================================

Loads and validates the YAML run configuration used by every subcommand.

Loading happens in three steps:

    1. ``yaml.compose`` walks the node graph to record the line of every key
       path and to catch duplicate keys (both lines are reported)
    2. ``yaml.safe_load`` reads the data, which ``ConfigResolver`` passes
       through tilde expansion and ``${dotted.path}`` substitution
    3. every block is validated; all violations are collected and raised
       together as one ``ConfigError``

Top-level blocks: coefficients, grid, solver, initial, output, verify and a
free-form variables block for substitution.

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .coefficients import CoefficientSet, from_physical
from .config_resolver import ConfigResolver
from .errors import ConfigError, QBMError
from .fields import Grid1D, Grid2D, gaussian_normalization
from .master_solver import SolverConfig
from .profiles import parse_profile

logger = logging.getLogger("qbm_lab.run_config")

_MISSING = object()

TOP_LEVEL_KEYS = {"coefficients", "grid", "solver", "initial", "output", "verify", "variables"}
COEFFICIENT_KEYS = {"m", "hbar", "domain", "interpolation", "p", "q", "r", "s", "physical"}
PHYSICAL_KEYS = ("Omega2", "Gamma", "h", "f")
PROFILE_KEYS = ("p", "q", "r", "s")
GRID_KEYS = {"x", "y", "w"}
AXIS_KEYS = {"min", "max", "n"}
SOLVER_KEYS = {"dt", "t_end", "stride", "cfl_safety"}
INITIAL_KEYS = {"x0", "y0", "sx", "sy", "rho", "amp", "w0", "sw"}
OUTPUT_KEYS = {"directory", "formats"}
OUTPUT_FORMATS = {"csv", "json"}
VERIFY_KEYS = {"conservation", "symmetry", "roundtrip", "reduction"}
CONSERVATION_KEYS = {"checks", "mass_rtol", "moment_rtol", "moment_time", "moment_dt", "order_range"}
CONSERVATION_CHECKS = {"mass", "moments", "characteristics"}
SYMMETRY_KEYS = {"generators", "eps", "ratio_limit", "exact_tol"}
SYMMETRY_GENERATORS = {"Y1", "YZ", "X1", "X2", "X3", "X4", "T1", "T2"}
ROUNDTRIP_KEYS = {"M", "tau0", "t_range", "w_range", "n", "families", "variants", "min_order"}
ROUNDTRIP_FAMILIES = {"plane_wave": {"k", "amplitude"}, "gaussian": {"a", "center", "amplitude"}}
REDUCTION_KEYS = {"t_end", "snapshots", "min_order", "slope_branch", "symmetry"}
REDUCED_SYMMETRY_KEYS = {"T_end", "snapshots", "grid", "sw", "phi0", "beta0", "beta1", "K", "eps", "min_order"}


@dataclass(frozen=True)
class InitialSpec:
    """Gaussian initial data for the 2D solver (x, y) and the 1D solver (w)."""

    x0: float = 0.0
    y0: float = 0.0
    sx: float = 1.0
    sy: float = 1.0
    rho: float = 0.0
    amp: Optional[float] = None
    w0: float = 0.0
    sw: float = 1.0

    @property
    def amplitude(self) -> float:
        """Explicit amp, or the value that normalizes the 2D Gaussian to mass one."""
        if self.amp is not None:
            return self.amp
        return gaussian_normalization(self.sx, self.sy, self.rho)


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "qbm_output"
    formats: Tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class ConservationSpec:
    checks: Tuple[str, ...] = ("mass", "moments")
    mass_rtol: float = 1e-6
    moment_rtol: float = 1e-3
    moment_time: Optional[float] = None
    moment_dt: float = 1e-4
    order_range: Tuple[float, float] = (3.2, 4.8)


@dataclass(frozen=True)
class SymmetrySpec:
    generators: Tuple[str, ...] = ("YZ", "X1", "X2", "X3", "X4", "T1", "T2")
    eps: float = 0.1
    ratio_limit: float = 5.0
    exact_tol: float = 1e-12


@dataclass(frozen=True)
class RoundtripSpec:
    M: float = 1.0
    tau0: complex = 0j
    t_range: Tuple[float, float] = (0.0, 0.5)
    w_range: Tuple[float, float] = (-2.0, 2.0)
    n: int = 41
    families: Dict[str, Dict[str, Any]] = field(
        default_factory=lambda: {"plane_wave": {"k": 1.0}, "gaussian": {"a": 1.0}}
    )
    variants: Tuple[str, ...] = ("printed", "matched")
    min_order: float = 1.8


@dataclass(frozen=True)
class ReducedSymmetrySpec:
    T_end: float = 0.25
    snapshots: int = 25
    grid: Tuple[float, float, int] = (-12.0, 12.0, 241)
    sw: float = 1.0
    phi0: float = 0.0
    beta0: float = 0.0
    beta1: float = 0.0
    K: float = 1.0
    eps: float = 1e-3
    min_order: float = 1.5


@dataclass(frozen=True)
class ReductionSpec:
    t_end: float = 0.5
    snapshots: int = 10
    min_order: float = 1.8
    slope_branch: int = -1
    symmetry: ReducedSymmetrySpec = field(default_factory=ReducedSymmetrySpec)


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run configuration."""

    path: Path
    coefficients: CoefficientSet
    grid: Grid2D
    w_grid: Optional[Grid1D]
    solver: SolverConfig
    initial: InitialSpec
    output: OutputSpec
    conservation: ConservationSpec
    symmetry: SymmetrySpec
    roundtrip: RoundtripSpec
    reduction: ReductionSpec
    echo: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def base_dir(self) -> Path:
        return self.path.parent


# ---------------------------------------------------------------------------
# YAML loading with line numbers
# ---------------------------------------------------------------------------


def _scalar_key(node: yaml.Node) -> str:
    return str(node.value) if isinstance(node, yaml.ScalarNode) else "<complex key>"


def _walk(node: yaml.Node, prefix: str, lines: Dict[str, int], violations: List[str]) -> None:
    if isinstance(node, yaml.MappingNode):
        seen: Dict[str, int] = {}
        for key_node, value_node in node.value:
            key = _scalar_key(key_node)
            path = f"{prefix}.{key}" if prefix else key
            line = key_node.start_mark.line + 1
            if key in seen:
                violations.append(f"{path}: duplicate key at lines {seen[key]} and {line}")
            else:
                seen[key] = line
                lines[path] = line
            _walk(value_node, path, lines, violations)
    elif isinstance(node, yaml.SequenceNode):
        for index, item in enumerate(node.value):
            _walk(item, f"{prefix}[{index}]", lines, violations)


def load_yaml_with_lines(path: Path) -> Tuple[Dict[str, Any], Dict[str, int]]:
    """
    Read a YAML mapping and the line of every key path.

    Raises:
        ConfigError: syntax errors, duplicate keys or a non-mapping document
        OSError: unreadable file
    """
    text = Path(path).read_text()
    violations: List[str] = []
    lines: Dict[str, int] = {}
    try:
        root = yaml.compose(text)
        if root is not None:
            _walk(root, "", lines, violations)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError([f"{where}{getattr(e, 'problem', None) or e}"]) from e
    if violations:
        raise ConfigError(violations)
    if not isinstance(data, dict):
        raise ConfigError(["configuration must be a mapping of blocks"])
    return data, lines


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


class _Checker:
    """Collects violations with key paths and line numbers."""

    def __init__(self, lines: Dict[str, int]):
        self.lines = lines
        self.violations: List[str] = []

    def where(self, path: str) -> str:
        probe = path
        while probe:
            if probe in self.lines:
                return f"{path} (line {self.lines[probe]})"
            probe = probe.rpartition(".")[0]
        return path

    def fail(self, path: str, message: str) -> None:
        self.violations.append(f"{self.where(path)}: {message}")

    def block(self, data: Dict[str, Any], key: str, path: str, allowed: set, required: bool = False) -> Dict[str, Any]:
        value = data.get(key, _MISSING)
        if value is _MISSING or value is None:
            if required:
                self.fail(path, "required block missing")
            return {}
        if not isinstance(value, dict):
            self.fail(path, "must be a mapping")
            return {}
        for unknown in sorted(set(value) - allowed):
            self.fail(f"{path}.{unknown}", "unknown key")
        return value

    def number(
        self,
        data: Dict[str, Any],
        key: str,
        path: str,
        default: Any = _MISSING,
        positive: bool = False,
        integer: bool = False,
        minimum: Optional[float] = None,
    ) -> Any:
        value = data.get(key, _MISSING)
        if value is _MISSING:
            if default is _MISSING:
                self.fail(path, "required value missing")
                return None
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
            return None
        if integer and int(value) != value:
            self.fail(path, f"expected an integer, got {value!r}")
            return None
        if not math.isfinite(value):
            self.fail(path, f"must be finite, got {value!r}")
            return None
        if positive and not value > 0:
            self.fail(path, f"must be positive, got {value!r}")
            return None
        if minimum is not None and value < minimum:
            self.fail(path, f"must be at least {minimum}, got {value!r}")
            return None
        return int(value) if integer else float(value)

    def pair(self, data: Dict[str, Any], key: str, path: str, default: Tuple[float, float]) -> Tuple[float, float]:
        value = data.get(key, _MISSING)
        if value is _MISSING:
            return default
        if (
            not isinstance(value, list)
            or len(value) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
            or not value[0] < value[1]
        ):
            self.fail(path, f"expected [low, high] with low < high, got {value!r}")
            return default
        return (float(value[0]), float(value[1]))

    def choices(self, data: Dict[str, Any], key: str, path: str, allowed: set, default: Tuple[str, ...]) -> Tuple[str, ...]:
        value = data.get(key, _MISSING)
        if value is _MISSING:
            return default
        if not isinstance(value, list) or not value:
            self.fail(path, "expected a non-empty list")
            return default
        bad = [v for v in value if v not in allowed]
        if bad:
            self.fail(path, f"unknown entries {bad} (allowed: {sorted(allowed)})")
            return default
        return tuple(value)


def _complex_value(checker: _Checker, data: Dict[str, Any], key: str, path: str) -> complex:
    """A real number or a [re, im] pair."""
    value = data.get(key, _MISSING)
    if value is _MISSING:
        return 0j
    if isinstance(value, list):
        if len(value) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return complex(float(value[0]), float(value[1]))
        checker.fail(path, f"expected a number or [re, im], got {value!r}")
        return 0j
    number = checker.number(data, key, path, 0.0)
    return complex(number or 0.0, 0.0)


def _axis(checker: _Checker, grid: Dict[str, Any], name: str, required: bool) -> Optional[Grid1D]:
    path = f"grid.{name}"
    axis = checker.block(grid, name, path, AXIS_KEYS, required=required)
    if not axis:
        return None
    lo = checker.number(axis, "min", f"{path}.min")
    hi = checker.number(axis, "max", f"{path}.max")
    n = checker.number(axis, "n", f"{path}.n", integer=True, minimum=5)
    if None in (lo, hi, n):
        return None
    if not lo < hi:
        checker.fail(path, f"min must be below max, got [{lo}, {hi}]")
        return None
    return Grid1D(lo, hi, n)


def _coefficients(
    checker: _Checker, data: Dict[str, Any], base_dir: Path, horizon: float
) -> Optional[CoefficientSet]:
    block = checker.block(data, "coefficients", "coefficients", COEFFICIENT_KEYS, required=True)
    if not block:
        return None
    m = checker.number(block, "m", "coefficients.m", positive=True)
    hbar = checker.number(block, "hbar", "coefficients.hbar", default=1.0, positive=True)
    domain = checker.pair(block, "domain", "coefficients.domain", (0.0, horizon))
    interpolation = block.get("interpolation", "cubic")
    if interpolation not in ("cubic", "linear"):
        checker.fail("coefficients.interpolation", f"expected cubic or linear, got {interpolation!r}")
        interpolation = "cubic"

    def profile(spec: Any, path: str):
        try:
            return parse_profile(spec, base_dir, interpolation, domain)
        except QBMError as e:
            checker.fail(path, str(e))
            return None

    if "physical" in block:
        if any(key in block for key in PROFILE_KEYS):
            checker.fail("coefficients", "give either p, q, r, s or a physical block, not both")
            return None
        physical = checker.block(block, "physical", "coefficients.physical", set(PHYSICAL_KEYS), required=True)
        parsed = {}
        for key in PHYSICAL_KEYS:
            if key not in physical:
                checker.fail(f"coefficients.physical.{key}", "required profile missing")
            else:
                parsed[key] = profile(physical[key], f"coefficients.physical.{key}")
        if m is None or hbar is None or len(parsed) < 4 or None in parsed.values():
            return None
        try:
            return from_physical(m, hbar, domain=domain, **parsed)
        except QBMError as e:
            checker.fail("coefficients", str(e))
            return None

    parsed = {}
    for key in PROFILE_KEYS:
        if key not in block:
            checker.fail(f"coefficients.{key}", "required profile missing")
        else:
            parsed[key] = profile(block[key], f"coefficients.{key}")
    if m is None or hbar is None or len(parsed) < 4 or None in parsed.values():
        return None
    try:
        return CoefficientSet(
            m=m,
            hbar=hbar,
            domain=domain,
            description=", ".join(f"{key}={block[key]}" for key in PROFILE_KEYS),
            **parsed,
        )
    except QBMError as e:
        checker.fail("coefficients", str(e))
        return None


def _verify_specs(checker: _Checker, data: Dict[str, Any]):
    verify = checker.block(data, "verify", "verify", VERIFY_KEYS)

    block = checker.block(verify, "conservation", "verify.conservation", CONSERVATION_KEYS)
    defaults = ConservationSpec()
    conservation = ConservationSpec(
        checks=checker.choices(block, "checks", "verify.conservation.checks", CONSERVATION_CHECKS, defaults.checks),
        mass_rtol=checker.number(block, "mass_rtol", "verify.conservation.mass_rtol", defaults.mass_rtol, positive=True),
        moment_rtol=checker.number(block, "moment_rtol", "verify.conservation.moment_rtol", defaults.moment_rtol, positive=True),
        moment_time=checker.number(block, "moment_time", "verify.conservation.moment_time", None, positive=True),
        moment_dt=checker.number(block, "moment_dt", "verify.conservation.moment_dt", defaults.moment_dt, positive=True),
        order_range=checker.pair(block, "order_range", "verify.conservation.order_range", defaults.order_range),
    )

    block = checker.block(verify, "symmetry", "verify.symmetry", SYMMETRY_KEYS)
    defaults = SymmetrySpec()
    symmetry = SymmetrySpec(
        generators=checker.choices(block, "generators", "verify.symmetry.generators", SYMMETRY_GENERATORS, defaults.generators),
        eps=checker.number(block, "eps", "verify.symmetry.eps", defaults.eps),
        ratio_limit=checker.number(block, "ratio_limit", "verify.symmetry.ratio_limit", defaults.ratio_limit, positive=True),
        exact_tol=checker.number(block, "exact_tol", "verify.symmetry.exact_tol", defaults.exact_tol, positive=True),
    )

    block = checker.block(verify, "roundtrip", "verify.roundtrip", ROUNDTRIP_KEYS)
    defaults = RoundtripSpec()
    families = defaults.families
    if "families" in block:
        raw = checker.block(block, "families", "verify.roundtrip.families", set(ROUNDTRIP_FAMILIES))
        families = {}
        for name, params in raw.items():
            params = checker.block(raw, name, f"verify.roundtrip.families.{name}", ROUNDTRIP_FAMILIES.get(name, set()))
            families[name] = {key: checker.number(params, key, f"verify.roundtrip.families.{name}.{key}") for key in params}
    tau0 = _complex_value(checker, block, "tau0", "verify.roundtrip.tau0")
    roundtrip = RoundtripSpec(
        M=checker.number(block, "M", "verify.roundtrip.M", defaults.M, positive=True),
        tau0=tau0,
        t_range=checker.pair(block, "t_range", "verify.roundtrip.t_range", defaults.t_range),
        w_range=checker.pair(block, "w_range", "verify.roundtrip.w_range", defaults.w_range),
        n=checker.number(block, "n", "verify.roundtrip.n", defaults.n, integer=True, minimum=5),
        families=families,
        variants=checker.choices(block, "variants", "verify.roundtrip.variants", {"printed", "matched"}, defaults.variants),
        min_order=checker.number(block, "min_order", "verify.roundtrip.min_order", defaults.min_order, positive=True),
    )

    block = checker.block(verify, "reduction", "verify.reduction", REDUCTION_KEYS)
    defaults = ReductionSpec()
    sym_block = checker.block(block, "symmetry", "verify.reduction.symmetry", REDUCED_SYMMETRY_KEYS)
    sym_defaults = ReducedSymmetrySpec()
    grid_block = checker.block(sym_block, "grid", "verify.reduction.symmetry.grid", AXIS_KEYS)
    grid = sym_defaults.grid
    if grid_block:
        lo = checker.number(grid_block, "min", "verify.reduction.symmetry.grid.min", grid[0])
        hi = checker.number(grid_block, "max", "verify.reduction.symmetry.grid.max", grid[1])
        n = checker.number(grid_block, "n", "verify.reduction.symmetry.grid.n", grid[2], integer=True, minimum=5)
        if None not in (lo, hi, n) and lo < hi:
            grid = (lo, hi, n)
        else:
            checker.fail("verify.reduction.symmetry.grid", "expected min < max and n >= 5")
    path = "verify.reduction.symmetry"
    reduced_symmetry = ReducedSymmetrySpec(
        T_end=checker.number(sym_block, "T_end", f"{path}.T_end", sym_defaults.T_end, positive=True),
        snapshots=checker.number(sym_block, "snapshots", f"{path}.snapshots", sym_defaults.snapshots, integer=True, minimum=3),
        grid=grid,
        sw=checker.number(sym_block, "sw", f"{path}.sw", sym_defaults.sw, positive=True),
        phi0=checker.number(sym_block, "phi0", f"{path}.phi0", sym_defaults.phi0),
        beta0=checker.number(sym_block, "beta0", f"{path}.beta0", sym_defaults.beta0),
        beta1=checker.number(sym_block, "beta1", f"{path}.beta1", sym_defaults.beta1),
        K=checker.number(sym_block, "K", f"{path}.K", sym_defaults.K, minimum=0.0),
        eps=checker.number(sym_block, "eps", f"{path}.eps", sym_defaults.eps, positive=True),
        min_order=checker.number(sym_block, "min_order", f"{path}.min_order", sym_defaults.min_order, positive=True),
    )
    reduction = ReductionSpec(
        t_end=checker.number(block, "t_end", "verify.reduction.t_end", defaults.t_end, positive=True),
        snapshots=checker.number(block, "snapshots", "verify.reduction.snapshots", defaults.snapshots, integer=True, minimum=3),
        min_order=checker.number(block, "min_order", "verify.reduction.min_order", defaults.min_order, positive=True),
        slope_branch=checker.number(block, "slope_branch", "verify.reduction.slope_branch", defaults.slope_branch, integer=True),
        symmetry=reduced_symmetry,
    )
    return conservation, symmetry, roundtrip, reduction


def parse_config(path: Path) -> RunConfig:
    """
    Load, resolve and validate a run configuration.

    Raises:
        ConfigError: every violation found, with key paths and line numbers
        OSError: the file cannot be read
    """
    path = Path(path)
    raw, lines = load_yaml_with_lines(path)
    resolver = ConfigResolver(raw)
    data = resolver.resolve_variables()
    checker = _Checker(lines)
    for problem in resolver.unresolved:
        key_path, _, message = problem.partition(": ")
        checker.fail(key_path, message)
    for unknown in sorted(set(data) - TOP_LEVEL_KEYS):
        checker.fail(unknown, "unknown key")

    solver_block = checker.block(data, "solver", "solver", SOLVER_KEYS, required=True)
    dt = checker.number(solver_block, "dt", "solver.dt", positive=True)
    t_end = checker.number(solver_block, "t_end", "solver.t_end", positive=True)
    stride = checker.number(solver_block, "stride", "solver.stride", 10, integer=True, minimum=1)
    cfl_safety = checker.number(solver_block, "cfl_safety", "solver.cfl_safety", 0.4, positive=True)
    if cfl_safety is not None and cfl_safety > 1:
        checker.fail("solver.cfl_safety", f"must lie in (0, 1], got {cfl_safety}")
        cfl_safety = None

    conservation, symmetry, roundtrip, reduction = _verify_specs(checker, data)
    horizon = max(
        t_end or 0.0,
        reduction.t_end or 0.0,
        roundtrip.t_range[1],
        conservation.moment_time or 0.0,
    )
    coefficients = _coefficients(checker, data, path.parent, horizon or 1.0)

    grid_block = checker.block(data, "grid", "grid", GRID_KEYS, required=True)
    x_axis = _axis(checker, grid_block, "x", required=True)
    y_axis = _axis(checker, grid_block, "y", required=True)
    w_axis = _axis(checker, grid_block, "w", required=False)

    initial_block = checker.block(data, "initial", "initial", INITIAL_KEYS)
    defaults = InitialSpec()
    initial = InitialSpec(
        x0=checker.number(initial_block, "x0", "initial.x0", defaults.x0),
        y0=checker.number(initial_block, "y0", "initial.y0", defaults.y0),
        sx=checker.number(initial_block, "sx", "initial.sx", defaults.sx, positive=True),
        sy=checker.number(initial_block, "sy", "initial.sy", defaults.sy, positive=True),
        rho=checker.number(initial_block, "rho", "initial.rho", defaults.rho),
        amp=checker.number(initial_block, "amp", "initial.amp", None),
        w0=checker.number(initial_block, "w0", "initial.w0", defaults.w0),
        sw=checker.number(initial_block, "sw", "initial.sw", defaults.sw, positive=True),
    )
    if initial.rho is not None and not abs(initial.rho) < 1:
        checker.fail("initial.rho", f"correlation must lie in (-1, 1), got {initial.rho}")

    output_block = checker.block(data, "output", "output", OUTPUT_KEYS)
    directory = output_block.get("directory", OutputSpec.directory)
    if not isinstance(directory, str) or not directory:
        checker.fail("output.directory", f"expected a path, got {directory!r}")
    formats = checker.choices(output_block, "formats", "output.formats", OUTPUT_FORMATS, OutputSpec.formats)

    if checker.violations:
        raise ConfigError(checker.violations)

    config = RunConfig(
        path=path,
        coefficients=coefficients,
        grid=Grid2D(x_axis, y_axis),
        w_grid=w_axis,
        solver=SolverConfig(dt=dt, t_end=t_end, snapshot_stride=stride, cfl_safety=cfl_safety),
        initial=initial,
        output=OutputSpec(directory=directory, formats=formats),
        conservation=conservation,
        symmetry=symmetry,
        roundtrip=roundtrip,
        reduction=reduction,
        echo=data,
    )
    logger.debug(f"📁 Loaded run configuration {path}")
    return config
