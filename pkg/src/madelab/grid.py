"""Uniform 2D Cartesian grids, masked field containers, and second-order
finite-difference operators (gradient, Laplacian, divergence, dot).

Arrays are stored row-major with shape (ny, nx); element [j, i] sits at
(x0 + i*dx, y0 + j*dy). A mask entry of True marks a valid cell. All
operators erode the mask: an output cell is valid only if every cell its
stencil touches is valid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUNDARY_ONE_SIDED = "one-sided"
BOUNDARY_PERIODIC = "periodic"


class GridMismatchError(ValueError):
    """Raised when an operation combines fields on different grids."""


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    x0: float = 0.0
    y0: float = 0.0
    dx: float = 1.0
    dy: float = 1.0
    boundary: str = BOUNDARY_ONE_SIDED

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 cells per axis")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("grid spacings must be positive")
        if self.boundary not in (BOUNDARY_ONE_SIDED, BOUNDARY_PERIODIC):
            raise ValueError(f"unknown boundary policy {self.boundary!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    def y(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x(), self.y(), indexing="xy")


def _full_mask(spec: GridSpec) -> np.ndarray:
    return np.ones(spec.shape, dtype=bool)


def _check_shape(spec: GridSpec, *arrays: np.ndarray) -> None:
    for a in arrays:
        if a.shape != spec.shape:
            raise ValueError(f"array shape {a.shape} does not match grid {spec.shape}")


@dataclass
class ScalarField:
    spec: GridSpec
    values: np.ndarray
    mask: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.mask is None:
            self.mask = _full_mask(self.spec)
        self.mask = np.asarray(self.mask, dtype=bool)
        _check_shape(self.spec, self.values, self.mask)
        # never count non-finite cells as valid
        self.mask = self.mask & np.isfinite(self.values)

    def valid_values(self) -> np.ndarray:
        return self.values[self.mask]


@dataclass
class VectorField:
    spec: GridSpec
    vx: np.ndarray
    vy: np.ndarray
    mask: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        self.vx = np.asarray(self.vx, dtype=float)
        self.vy = np.asarray(self.vy, dtype=float)
        if self.mask is None:
            self.mask = _full_mask(self.spec)
        self.mask = np.asarray(self.mask, dtype=bool)
        _check_shape(self.spec, self.vx, self.vy, self.mask)
        self.mask = self.mask & np.isfinite(self.vx) & np.isfinite(self.vy)

    def magnitude(self) -> ScalarField:
        return ScalarField(self.spec, np.hypot(self.vx, self.vy), self.mask.copy())


@dataclass
class ComplexField:
    spec: GridSpec
    values: np.ndarray
    mask: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.mask is None:
            self.mask = _full_mask(self.spec)
        self.mask = np.asarray(self.mask, dtype=bool)
        _check_shape(self.spec, self.values, self.mask)
        self.mask = self.mask & np.isfinite(self.values.real) & np.isfinite(self.values.imag)

    @property
    def re(self) -> np.ndarray:
        return self.values.real

    @property
    def im(self) -> np.ndarray:
        return self.values.imag


# ---------------------------------------------------------------------------
# Stencils. Helpers work on raw (possibly complex) arrays so that the
# Madelung module can differentiate psi directly; the public field-level
# operators wrap them.
# ---------------------------------------------------------------------------

_AX = {0: "y", 1: "x"}


def deriv1(values: np.ndarray, d: float, axis: int, boundary: str) -> np.ndarray:
    """Second-order first derivative along `axis` (0 = y, 1 = x)."""
    f = np.moveaxis(values, axis, 0)
    out = np.empty_like(f)
    if boundary == BOUNDARY_PERIODIC:
        out[:] = (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * d)
    else:
        out[1:-1] = (f[2:] - f[:-2]) / (2.0 * d)
        out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * d)
        out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * d)
    return np.moveaxis(out, 0, axis)


def deriv2(values: np.ndarray, d: float, axis: int, boundary: str) -> np.ndarray:
    """Second-order second derivative along `axis`."""
    f = np.moveaxis(values, axis, 0)
    out = np.empty_like(f)
    inv = 1.0 / (d * d)
    if boundary == BOUNDARY_PERIODIC:
        out[:] = (np.roll(f, -1, axis=0) - 2.0 * f + np.roll(f, 1, axis=0)) * inv
    else:
        out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) * inv
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv
        out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) * inv
    return np.moveaxis(out, 0, axis)


def _erode1(mask: np.ndarray, axis: int, boundary: str) -> np.ndarray:
    """Mask for deriv1 output: all stencil inputs (and the cell) valid."""
    m = np.moveaxis(mask, axis, 0)
    out = np.empty_like(m)
    if boundary == BOUNDARY_PERIODIC:
        out[:] = m & np.roll(m, -1, axis=0) & np.roll(m, 1, axis=0)
    else:
        out[1:-1] = m[:-2] & m[1:-1] & m[2:]
        out[0] = m[0] & m[1] & m[2]
        out[-1] = m[-1] & m[-2] & m[-3]
    return np.moveaxis(out, 0, axis)


def _erode2(mask: np.ndarray, axis: int, boundary: str) -> np.ndarray:
    """Mask for deriv2 output (boundary rows reach 4 cells one-sided)."""
    m = np.moveaxis(mask, axis, 0)
    out = np.empty_like(m)
    if boundary == BOUNDARY_PERIODIC:
        out[:] = m & np.roll(m, -1, axis=0) & np.roll(m, 1, axis=0)
    else:
        out[1:-1] = m[:-2] & m[1:-1] & m[2:]
        out[0] = m[0] & m[1] & m[2] & m[3]
        out[-1] = m[-1] & m[-2] & m[-3] & m[-4]
    return np.moveaxis(out, 0, axis)


def raw_gradient(values: np.ndarray, mask: np.ndarray, spec: GridSpec):
    """(d/dx, d/dy, eroded mask) on a raw array; works for complex input."""
    gx = deriv1(values, spec.dx, 1, spec.boundary)
    gy = deriv1(values, spec.dy, 0, spec.boundary)
    m = _erode1(mask, 1, spec.boundary) & _erode1(mask, 0, spec.boundary)
    return gx, gy, m


def raw_laplacian(values: np.ndarray, mask: np.ndarray, spec: GridSpec):
    lap = deriv2(values, spec.dx, 1, spec.boundary) + deriv2(values, spec.dy, 0, spec.boundary)
    m = _erode2(mask, 1, spec.boundary) & _erode2(mask, 0, spec.boundary)
    return lap, m


def gradient(f: ScalarField) -> VectorField:
    gx, gy, m = raw_gradient(f.values, f.mask, f.spec)
    return VectorField(f.spec, gx, gy, m)


def laplacian(f: ScalarField) -> ScalarField:
    lap, m = raw_laplacian(f.values, f.mask, f.spec)
    return ScalarField(f.spec, lap, m)


def divergence(w: VectorField) -> ScalarField:
    spec = w.spec
    div = deriv1(w.vx, spec.dx, 1, spec.boundary) + deriv1(w.vy, spec.dy, 0, spec.boundary)
    m = _erode1(w.mask, 1, spec.boundary) & _erode1(w.mask, 0, spec.boundary)
    return ScalarField(spec, div, m)


def dot(a: VectorField, b: VectorField) -> ScalarField:
    if a.spec != b.spec:
        raise GridMismatchError("dot() needs both fields on one grid")
    return ScalarField(a.spec, a.vx * b.vx + a.vy * b.vy, a.mask & b.mask)


def interior_mask(mask: np.ndarray) -> np.ndarray:
    """Valid cells at least two rings in from the grid boundary.

    Two rings, not one: stacked stencils (e.g. the divergence of a
    computed current) are fully central only there; cells closer to the
    edge mix one-sided and central errors and lose an order.
    """
    m = np.zeros_like(mask)
    m[2:-2, 2:-2] = mask[2:-2, 2:-2]
    return m


def max_norm(values: np.ndarray, mask: np.ndarray) -> float | None:
    """Max |value| over interior valid cells; None if the region is empty."""
    m = interior_mask(mask)
    if not m.any():
        return None
    return float(np.max(np.abs(values[m])))


def rms_norm(values: np.ndarray, mask: np.ndarray) -> float | None:
    m = interior_mask(mask)
    if not m.any():
        return None
    v = values[m]
    return float(np.sqrt(np.mean(v * v)))
