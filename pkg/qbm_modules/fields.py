#!/usr/bin/env python3
"""
QBM Lab - Sampled Field Module
==============================

Uniform grids and immutable field snapshots:

    - Grid1D / Grid2D: uniform axes (x is momentum on axis 0, y is position
      on axis 1 of every value array)
    - Field2D: real Wigner snapshot Z(t, x, y)
    - Field1D: complex reduced profile U(t, w)

plus Gaussian initial data, trapezoidal quadrature, node-exact bicubic and
cubic interpolation, and the CSV long format with JSON sidecars.

CSV layout (values written with 17 significant digits)::

    # t=0.25
    # kind=field2d
    x,y,value
    -1,-1,0.0012...

Author: QBM Lab Developers
Version: 1.0.0
"""

import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import DomainError, FieldParseError, InvalidGridError, InvalidParameterError
from .reports import write_json_document

logger = logging.getLogger("qbm_lab.fields")

# Fractional-index distance under which a query snaps to a grid node
_NODE_SNAP = 1e-9
_FLOAT_FORMAT = ".17g"


def _fmt(value: float) -> str:
    return format(float(value), _FLOAT_FORMAT)


@dataclass(frozen=True)
class Grid1D:
    """Uniform axis with n >= 3 samples on [w_min, w_max]."""

    w_min: float
    w_max: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.w_min) and math.isfinite(self.w_max)) or self.w_min >= self.w_max:
            raise InvalidGridError(f"grid bounds must satisfy min < max, got [{self.w_min}, {self.w_max}]")
        if int(self.n) != self.n or self.n < 3:
            raise InvalidGridError(f"grid needs at least 3 samples, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.w_max - self.w_min) / (self.n - 1)

    @cached_property
    def coords(self) -> np.ndarray:
        return np.linspace(self.w_min, self.w_max, self.n)

    def contains(self, w: Any) -> bool:
        arr = np.asarray(w, dtype=float)
        tol = 1e-12 * max(1.0, abs(self.w_min), abs(self.w_max))
        return bool(np.all((arr >= self.w_min - tol) & (arr <= self.w_max + tol)))

    def fractional_index(self, w: Any) -> np.ndarray:
        return (np.asarray(w, dtype=float) - self.w_min) / self.h

    def refined(self) -> "Grid1D":
        """Same bounds, spacing halved."""
        return Grid1D(self.w_min, self.w_max, 2 * self.n - 1)

    def to_dict(self) -> Dict[str, Any]:
        return {"min": self.w_min, "max": self.w_max, "n": self.n}


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid; axis 0 is x (momentum), axis 1 is y (position)."""

    x: Grid1D
    y: Grid1D

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.x.n, self.y.n)

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x.coords, self.y.coords, indexing="ij")

    def refined(self) -> "Grid2D":
        return Grid2D(self.x.refined(), self.y.refined())

    def to_dict(self) -> Dict[str, Any]:
        return {"x": self.x.to_dict(), "y": self.y.to_dict()}


def _frozen_array(values: Any, dtype: Any) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Field2D:
    """Real snapshot Z(t, x, y); the value array is read-only."""

    grid: Grid2D
    t: float
    values: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values, float)
        if values.shape != self.grid.shape:
            raise InvalidGridError(f"value array shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError(f"Field2D at t={self.t!r} contains non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "t", float(self.t))

    def with_values(self, values: np.ndarray, t: Optional[float] = None) -> "Field2D":
        return Field2D(self.grid, self.t if t is None else t, values)

    def equals(self, other: "Field2D") -> bool:
        return self.grid == other.grid and self.t == other.t and np.array_equal(self.values, other.values)

    def __add__(self, other: "Field2D") -> "Field2D":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Field2D") -> "Field2D":
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> "Field2D":
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    @cached_property
    def _interpolant(self) -> RectBivariateSpline:
        kx = min(3, self.grid.x.n - 1)
        ky = min(3, self.grid.y.n - 1)
        return RectBivariateSpline(self.grid.x.coords, self.grid.y.coords, self.values, kx=kx, ky=ky, s=0)


@dataclass(frozen=True, eq=False)
class Field1D:
    """Complex profile U(t, w); the value array is read-only."""

    grid: Grid1D
    t: float
    values: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values, complex)
        if values.shape != (self.grid.n,):
            raise InvalidGridError(f"value array shape {values.shape} does not match grid ({self.grid.n},)")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError(f"Field1D at t={self.t!r} contains non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "t", float(self.t))

    def with_values(self, values: np.ndarray, t: Optional[float] = None) -> "Field1D":
        return Field1D(self.grid, self.t if t is None else t, values)

    def equals(self, other: "Field1D") -> bool:
        return self.grid == other.grid and self.t == other.t and np.array_equal(self.values, other.values)

    def __add__(self, other: "Field1D") -> "Field1D":
        return self.with_values(self.values + other.values)

    def __mul__(self, scalar: complex) -> "Field1D":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    @cached_property
    def _interpolants(self) -> Tuple[CubicSpline, CubicSpline]:
        w = self.grid.coords
        return CubicSpline(w, self.values.real), CubicSpline(w, self.values.imag)


# ---------------------------------------------------------------------------
# Construction and quadrature
# ---------------------------------------------------------------------------


def gaussian_normalization(sx: float, sy: float, rho: float = 0.0) -> float:
    """Amplitude that makes gaussian2d integrate to one over the plane."""
    return 1.0 / (2.0 * math.pi * sx * sy * math.sqrt(1.0 - rho * rho))


def gaussian2d(
    grid: Grid2D,
    x0: float,
    y0: float,
    sx: float,
    sy: float,
    rho: float = 0.0,
    amp: float = 1.0,
    t: float = 0.0,
) -> Field2D:
    """
    Sample amp * exp(-Q/2) with the correlated quadratic form

        Q = [dx^2/sx^2 - 2 rho dx dy/(sx sy) + dy^2/sy^2] / (1 - rho^2)

    Raises:
        InvalidParameterError: nonpositive width or |rho| >= 1
    """
    if not (sx > 0 and sy > 0):
        raise InvalidParameterError(f"Gaussian widths must be positive, got sx={sx}, sy={sy}")
    if not abs(rho) < 1:
        raise InvalidParameterError(f"Gaussian correlation must lie in (-1, 1), got rho={rho}")
    X, Y = grid.mesh
    u = (X - x0) / sx
    v = (Y - y0) / sy
    Q = (u * u - 2.0 * rho * u * v + v * v) / (1.0 - rho * rho)
    return Field2D(grid, t, amp * np.exp(-0.5 * Q))


def gaussian1d(grid: Grid1D, w0: float, sw: float, amp: complex = 1.0, t: float = 0.0) -> Field1D:
    """Sample amp * exp(-(w - w0)^2 / (2 sw^2))."""
    if not sw > 0:
        raise InvalidParameterError(f"Gaussian width must be positive, got sw={sw}")
    w = grid.coords
    return Field1D(grid, t, amp * np.exp(-0.5 * ((w - w0) / sw) ** 2))


def integrate2d(f: Field2D) -> float:
    """Trapezoidal quadrature over the whole grid."""
    inner = trapezoid(f.values, x=f.grid.y.coords, axis=1)
    return float(trapezoid(inner, x=f.grid.x.coords))


# ---------------------------------------------------------------------------
# Interpolation
# ---------------------------------------------------------------------------


def _snap(axis: Grid1D, coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    frac = axis.fractional_index(coords)
    nearest = np.clip(np.rint(frac), 0, axis.n - 1).astype(int)
    return nearest, np.abs(frac - nearest) < _NODE_SNAP


def sample_points(f: Field2D, xs: Any, ys: Any, outside: Optional[float] = None) -> np.ndarray:
    """
    Vectorized bicubic sampling; exact at grid nodes.

    Args:
        f: field to sample
        xs, ys: coordinate arrays of equal shape
        outside: value for points off the grid; None raises DomainError

    Returns:
        np.ndarray of sampled values with the shape of ``xs``
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    xs, ys = np.broadcast_arrays(xs, ys)
    gx, gy = f.grid.x, f.grid.y
    tol_x = 1e-12 * max(1.0, abs(gx.w_min), abs(gx.w_max))
    tol_y = 1e-12 * max(1.0, abs(gy.w_min), abs(gy.w_max))
    inside = (
        (xs >= gx.w_min - tol_x) & (xs <= gx.w_max + tol_x) & (ys >= gy.w_min - tol_y) & (ys <= gy.w_max + tol_y)
    )
    if outside is None and not np.all(inside):
        k = int(np.argmin(inside.ravel()))
        raise DomainError(
            f"query ({xs.ravel()[k]!r}, {ys.ravel()[k]!r}) lies outside "
            f"[{gx.w_min}, {gx.w_max}] x [{gy.w_min}, {gy.w_max}]"
        )
    result = np.full(xs.shape, 0.0 if outside is None else float(outside))
    if not np.any(inside):
        return result
    qx, qy = xs[inside], ys[inside]
    values = f._interpolant.ev(qx, qy)
    ix, on_x = _snap(gx, qx)
    iy, on_y = _snap(gy, qy)
    on_node = on_x & on_y
    values[on_node] = f.values[ix[on_node], iy[on_node]]
    result[inside] = values
    return result


def sample2d(f: Field2D, x: float, y: float) -> float:
    """Bicubic interpolation at one point; exact at nodes, DomainError outside."""
    return float(sample_points(f, np.array([x]), np.array([y]))[0])


def sample1d(f: Field1D, w: Any) -> np.ndarray:
    """
    Cubic-spline sampling of a complex profile (real and imaginary parts
    separately); exact at nodes.

    Raises:
        DomainError: any query outside the grid
    """
    w = np.asarray(w, dtype=float)
    if not f.grid.contains(w):
        raise DomainError(f"w-range [{w.min()!r}, {w.max()!r}] exceeds grid [{f.grid.w_min}, {f.grid.w_max}]")
    re, im = f._interpolants
    result = re(w) + 1j * im(w)
    idx, on_node = _snap(f.grid, w)
    result[on_node] = f.values[idx[on_node]]
    return result


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


AnyField = Union[Field1D, Field2D]


def sidecar_path(path: Path) -> Path:
    return Path(path).with_suffix(".json")


def field_metadata(f: AnyField, provenance: str = "") -> Dict[str, Any]:
    """JSON sidecar payload: grid bounds, sizes, time stamp, provenance."""
    if isinstance(f, Field2D):
        return {"kind": "field2d", "t": f.t, "grid": f.grid.to_dict(), "provenance": provenance}
    return {"kind": "field1d", "t": f.t, "grid": {"w": f.grid.to_dict()}, "provenance": provenance}


def write_field(path: Path, f: AnyField, provenance: str = "", sidecar: bool = True) -> Path:
    """
    Write a field in CSV long format (and its JSON sidecar).

    Returns:
        Path: the CSV path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: List[str] = [f"# t={f.t!r}"]
    if isinstance(f, Field2D):
        lines += ["# kind=field2d", "x,y,value"]
        xs, ys = f.grid.x.coords, f.grid.y.coords
        for i, x in enumerate(xs):
            xi = _fmt(x)
            row = f.values[i]
            lines.extend(f"{xi},{_fmt(y)},{_fmt(v)}" for y, v in zip(ys, row))
    else:
        lines += ["# kind=field1d", "w,re,im"]
        lines.extend(
            f"{_fmt(w)},{_fmt(v.real)},{_fmt(v.imag)}" for w, v in zip(f.grid.coords, f.values)
        )
    path.write_text("\n".join(lines) + "\n")
    if sidecar:
        write_json_document(sidecar_path(path), field_metadata(f, provenance), "field_metadata")
    logger.debug(f"📁 Wrote {path}")
    return path


def _axis_from_unique(values: np.ndarray, linenos: np.ndarray, name: str) -> Grid1D:
    """Rebuild a uniform axis from a coordinate column; off-grid coordinates are rejected."""
    unique = np.unique(values)
    try:
        axis = Grid1D(float(unique[0]), float(unique[-1]), unique.size)
    except (InvalidGridError, IndexError) as e:
        raise FieldParseError(f"cannot reconstruct {name}-axis: {e}", int(linenos[-1])) from e
    off = np.abs(unique - axis.coords) > 1e-9 * axis.h
    if np.any(off):
        bad = float(unique[np.argmax(off)])
        line = int(linenos[np.argmax(values == bad)])
        raise FieldParseError(f"{name}={bad!r} is not on a uniform {name}-axis with spacing {axis.h!r}", line)
    return axis


def _reject_duplicates(keys: np.ndarray, linenos: np.ndarray, label: str) -> None:
    seen: Dict[Tuple[float, ...], int] = {}
    for row, line in zip(keys, linenos):
        key = tuple(float(v) for v in row)
        if key in seen:
            shown = key if len(key) > 1 else key[0]
            raise FieldParseError(f"node {label}={shown} repeats line {seen[key]}", int(line))
        seen[key] = int(line)


def read_field(path: Path) -> AnyField:
    """
    Read a field written by ``write_field``.

    Raises:
        FieldParseError: malformed header, wrong column count, bad numbers or
            a row set that does not form the full uniform grid
    """
    path = Path(path)
    t: Optional[float] = None
    kind: Optional[str] = None
    header: Optional[List[str]] = None
    rows: List[Tuple[int, List[float]]] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            key = key.strip()
            if key == "t":
                try:
                    t = float(value)
                except ValueError as e:
                    raise FieldParseError(f"bad time stamp '{value}'", lineno) from e
            elif key == "kind":
                kind = value.strip()
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            header = cells
            if header not in (["x", "y", "value"], ["w", "re", "im"]):
                raise FieldParseError(f"unknown column header {header}", lineno)
            continue
        if len(cells) != len(header):
            raise FieldParseError(f"expected {len(header)} columns, found {len(cells)}", lineno)
        try:
            rows.append((lineno, [float(c) for c in cells]))
        except ValueError as e:
            raise FieldParseError(str(e), lineno) from e

    last = rows[-1][0] if rows else 1
    if t is None:
        raise FieldParseError("missing '# t=' header", 1)
    if header is None or not rows:
        raise FieldParseError("no data rows", last)
    if kind is None:
        kind = "field2d" if header[0] == "x" else "field1d"

    data = np.array([r for _, r in rows])
    linenos = np.array([n for n, _ in rows])
    if kind == "field2d":
        if header[0] != "x":
            raise FieldParseError("field2d needs columns x,y,value", last)
        _reject_duplicates(data[:, :2], linenos, "(x, y)")
        gx = _axis_from_unique(data[:, 0], linenos, "x")
        gy = _axis_from_unique(data[:, 1], linenos, "y")
        if data.shape[0] != gx.n * gy.n:
            raise FieldParseError(f"expected {gx.n * gy.n} rows for a {gx.n}x{gy.n} grid, found {data.shape[0]}", last)
        order = np.lexsort((data[:, 1], data[:, 0]))
        values = data[order, 2].reshape(gx.n, gy.n)
        return Field2D(Grid2D(gx, gy), t, values)

    if header[0] != "w":
        raise FieldParseError("field1d needs columns w,re,im", last)
    _reject_duplicates(data[:, :1], linenos, "w")
    gw = _axis_from_unique(data[:, 0], linenos, "w")
    if data.shape[0] != gw.n:
        raise FieldParseError(f"expected {gw.n} rows, found {data.shape[0]}", last)
    order = np.argsort(data[:, 0], kind="stable")
    return Field1D(gw, t, data[order, 1] + 1j * data[order, 2])


def read_field_metadata(path: Path) -> Dict[str, Any]:
    with open(sidecar_path(path)) as f:
        return json.load(f)
