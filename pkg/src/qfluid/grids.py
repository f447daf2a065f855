"""Uniform periodic grids and the discrete field calculus everything else builds on.

Fields live on uniform periodic grids in one or two dimensions. Spatial
derivatives are spectral (FFT-based), hence exact for band-limited data;
point sampling is linear interpolation, which keeps trajectory pushing
local, cheap and deterministic. Field values are immutable after
construction and every operation returns a new field, so fields can be
shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import GridError, GridMismatchError, NonFiniteFieldError

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "WaveField",
    "gradient",
    "laplacian",
    "divergence",
    "integrate",
    "sample_at",
    "complex_gradient",
]

# Fractional-cell tolerance below which a sample point is snapped onto the
# node, so values at grid nodes are reproduced exactly.
_NODE_SNAP = 1e-9


def _as_tuple(x, dims: int, cast) -> tuple:
    if np.isscalar(x):
        return tuple(cast(x) for _ in range(dims))
    t = tuple(cast(v) for v in x)
    if len(t) != dims:
        raise GridError(f"expected {dims} per-axis entries, got {len(t)}")
    return t


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: per-axis extent, point count and lower edge.

    The domain along axis i is [origin_i, origin_i + extent_i) with
    points_i equally spaced nodes and spacing extent_i / points_i.
    """

    extent: tuple[float, ...]
    points: tuple[int, ...]
    origin: tuple[float, ...]
    periodic: bool = True

    def __post_init__(self):
        if len(self.extent) not in (1, 2):
            raise GridError("only 1D and 2D grids are supported")
        if not (len(self.extent) == len(self.points) == len(self.origin)):
            raise GridError("extent, points and origin must have equal length")
        if any(n < 8 for n in self.points):
            raise GridError(f"need at least 8 points per axis, got {self.points}")
        if any(L <= 0 for L in self.extent):
            raise GridError(f"extent must be positive, got {self.extent}")
        if not self.periodic:
            raise GridError("only periodic grids are supported")

    @classmethod
    def regular(cls, extent, points, origin=0.0) -> "GridSpec":
        """Build a grid from scalars or per-axis sequences."""
        pts = (points,) if np.isscalar(points) else tuple(points)
        dims = len(pts)
        return cls(
            extent=_as_tuple(extent, dims, float),
            points=_as_tuple(points, dims, int),
            origin=_as_tuple(origin, dims, float),
        )

    @classmethod
    def centered(cls, extent, points) -> "GridSpec":
        """Grid symmetric about zero: domain [-extent/2, extent/2) per axis."""
        pts = (points,) if np.isscalar(points) else tuple(points)
        ext = _as_tuple(extent, len(pts), float)
        return cls.regular(ext, pts, origin=tuple(-L / 2 for L in ext))

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extent, self.points))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def domain_volume(self) -> float:
        return float(np.prod(self.extent))

    def axis(self, i: int) -> np.ndarray:
        h = self.spacing[i]
        return self.origin[i] + h * np.arange(self.points[i])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(self.dims)]

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def wavenumbers(self, i: int) -> np.ndarray:
        """Angular wavenumbers 2*pi*fftfreq along axis i."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points[i], d=self.spacing[i])

    def axis_line(self, i: int) -> "GridSpec":
        """The 1D grid along axis i of a 2D grid."""
        return GridSpec(
            extent=(self.extent[i],), points=(self.points[i],), origin=(self.origin[i],)
        )

    def wrap(self, x: np.ndarray, i: int = 0) -> np.ndarray:
        """Map coordinates periodically into [origin, origin + extent) on axis i."""
        return self.origin[i] + np.mod(x - self.origin[i], self.extent[i])


def _freeze(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


def _check_finite(values: np.ndarray, name: str):
    bad = ~np.isfinite(values)
    if bad.any():
        idx = int(np.flatnonzero(bad.ravel())[0])
        raise NonFiniteFieldError(name, int(bad.sum()), idx)


@dataclass(frozen=True)
class ScalarField:
    """Real values on a grid (densities, phases, potentials...)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "values", _freeze(v))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarField":
        return cls(grid, fn(*grid.meshgrid()) if grid.dims == 2 else fn(grid.axis(0)))

    @classmethod
    def full(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def normalized(self) -> "ScalarField":
        """Scale so the field integrates to one (density normalization)."""
        total = integrate(self)
        if total <= 0:
            raise GridError("cannot normalize a field with non-positive integral")
        return ScalarField(self.grid, self.values / total)

    def is_density(self, tol: float = 1e-9) -> bool:
        return bool(self.values.min() >= -tol and abs(integrate(self) - 1.0) <= tol)


@dataclass(frozen=True)
class VectorField:
    """One real component per grid axis, all on the same grid."""

    grid: GridSpec
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        comps = []
        for c in self.components:
            c = np.asarray(c, dtype=float)
            if c.shape != self.grid.shape:
                raise GridMismatchError(
                    f"component shape {c.shape} != grid shape {self.grid.shape}"
                )
            comps.append(_freeze(c))
        if len(comps) != self.grid.dims:
            raise GridMismatchError(
                f"expected {self.grid.dims} components, got {len(comps)}"
            )
        object.__setattr__(self, "components", tuple(comps))

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.components[i])

    def magnitude(self) -> ScalarField:
        return ScalarField(self.grid, np.sqrt(sum(c * c for c in self.components)))


@dataclass(frozen=True)
class WaveField:
    """Complex values on a grid (wave functions)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise GridError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "values", _freeze(v))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "WaveField":
        return cls(grid, fn(*grid.meshgrid()) if grid.dims == 2 else fn(grid.axis(0)))

    def density(self) -> ScalarField:
        return ScalarField(self.grid, np.abs(self.values) ** 2)

    def norm(self) -> float:
        """sqrt of the integrated probability density."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def normalized(self) -> "WaveField":
        n = self.norm()
        if n <= 0:
            raise GridError("cannot normalize the zero wave field")
        return WaveField(self.grid, self.values / n)


Field = Union[ScalarField, VectorField, WaveField]


def _require_same_grid(a: GridSpec, b: GridSpec):
    if a != b:
        raise GridMismatchError(f"grids differ: {a} vs {b}")


def _spectral_derivative(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """d/dx along one axis via FFT. Zeroes the Nyquist mode, which makes odd
    derivatives of real data real and avoids the asymmetric lone mode.

    Complex data is differentiated part by part, so a field with an exactly
    zero imaginary part keeps it exactly zero (a complex transform would
    leak rounding noise between the parts, which downstream phase-gradient
    ratios amplify).
    """
    if np.iscomplexobj(values):
        return (_spectral_derivative(values.real, grid, axis)
                + 1j * _spectral_derivative(values.imag, grid, axis))
    n = grid.points[axis]
    k = grid.wavenumbers(axis)
    if n % 2 == 0:
        k = k.copy()
        k[n // 2] = 0.0
    shape = [1] * grid.dims
    shape[axis] = n
    fk = np.fft.fft(values, axis=axis)
    return np.fft.ifft(1j * k.reshape(shape) * fk, axis=axis).real


def _spectral_laplacian(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    k2 = np.zeros(grid.shape)
    for axis in range(grid.dims):
        k = grid.wavenumbers(axis)
        shape = [1] * grid.dims
        shape[axis] = grid.points[axis]
        k2 = k2 + k.reshape(shape) ** 2
    out = np.fft.ifftn(np.fft.fftn(values) * (-k2))
    return out.real if not np.iscomplexobj(values) else out


def gradient(f: ScalarField) -> VectorField:
    """Spectral gradient; exact for band-limited periodic fields."""
    _check_finite(f.values, "gradient input")
    comps = tuple(
        _spectral_derivative(f.values, f.grid, axis) for axis in range(f.grid.dims)
    )
    return VectorField(f.grid, comps)


def laplacian(f: ScalarField) -> ScalarField:
    """Spectral Laplacian (multiplication by -|k|^2)."""
    _check_finite(f.values, "laplacian input")
    return ScalarField(f.grid, _spectral_laplacian(f.values, f.grid))


def divergence(v: VectorField) -> ScalarField:
    """Sum of per-axis spectral derivatives of the components."""
    for c in v.components:
        _check_finite(c, "divergence input")
    out = np.zeros(v.grid.shape)
    for axis in range(v.grid.dims):
        out = out + _spectral_derivative(v.components[axis], v.grid, axis)
    return ScalarField(v.grid, out)


def integrate(f: ScalarField) -> float:
    """Riemann sum times cell volume; spectrally exact on periodic grids."""
    _check_finite(f.values, "integrate input")
    return float(np.sum(f.values) * f.grid.cell_volume)


def complex_gradient(psi: WaveField) -> tuple[np.ndarray, ...]:
    """Per-axis spectral derivative of a complex field (plumbing for
    velocity fields and currents)."""
    _check_finite(psi.values, "complex_gradient input")
    return tuple(
        _spectral_derivative(psi.values, psi.grid, axis)
        for axis in range(psi.grid.dims)
    )


# 8th-order centered stencils, for callers that need *local* differencing:
# rounding stays relative to the local value (a spectral transform imposes an
# absolute noise floor that swamps deep density tails), and artifacts from
# non-periodic data stay within four cells instead of polluting the domain.
_D1_W = (4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0)
_D2_W0 = -205.0 / 72.0
_D2_W = (8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0)


def fd_derivative(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """8th-order centered first derivative with periodic wrap."""
    h = grid.spacing[axis]
    out = np.zeros_like(values)
    for offset, w in enumerate(_D1_W, start=1):
        out += w * (np.roll(values, -offset, axis=axis)
                    - np.roll(values, offset, axis=axis))
    return out / h


def fd_second_derivative(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """8th-order centered second derivative with periodic wrap."""
    h = grid.spacing[axis]
    out = _D2_W0 * values.copy()
    for offset, w in enumerate(_D2_W, start=1):
        out += w * (np.roll(values, -offset, axis=axis)
                    + np.roll(values, offset, axis=axis))
    return out / h**2


def _interp_weights(grid: GridSpec, x: np.ndarray, axis: int):
    """Lower node index and fractional offset along one axis, periodic."""
    n = grid.points[axis]
    h = grid.spacing[axis]
    u = np.mod((x - grid.origin[axis]) / h, n)
    i0 = np.floor(u).astype(np.int64)
    frac = u - i0
    # snap to nodes so stored values are reproduced exactly there
    lo = frac < _NODE_SNAP
    hi = frac > 1.0 - _NODE_SNAP
    frac = np.where(lo, 0.0, frac)
    i0 = np.where(hi, i0 + 1, i0)
    frac = np.where(hi, 0.0, frac)
    i0 = np.mod(i0, n)
    return i0, frac


def _interp_values(values: np.ndarray, grid: GridSpec, x: np.ndarray) -> np.ndarray:
    """Linear (1D) / bilinear (2D) periodic interpolation of a value array."""
    if grid.dims == 1:
        xs = np.asarray(x, dtype=float)
        i0, w = _interp_weights(grid, xs, 0)
        i1 = np.mod(i0 + 1, grid.points[0])
        return (1.0 - w) * values[i0] + w * values[i1]
    pos = np.asarray(x, dtype=float)
    squeeze = pos.ndim == 1
    pts = pos.reshape(-1, 2)
    i0, wx = _interp_weights(grid, pts[:, 0], 0)
    j0, wy = _interp_weights(grid, pts[:, 1], 1)
    i1 = np.mod(i0 + 1, grid.points[0])
    j1 = np.mod(j0 + 1, grid.points[1])
    # interpolate along y first, then x; fixed order keeps results reproducible
    v0 = (1.0 - wy) * values[i0, j0] + wy * values[i0, j1]
    v1 = (1.0 - wy) * values[i1, j0] + wy * values[i1, j1]
    out = (1.0 - wx) * v0 + wx * v1
    return out[0] if squeeze and out.shape == (1,) else out


def sample_at(f: Field, x) -> np.ndarray:
    """Sample a field at one position or an array of positions.

    Positions are wrapped periodically into the domain. 1D positions are
    scalars or shape (m,) arrays; 2D positions are pairs or (m, 2) arrays.
    Vector fields return one interpolated array per component, stacked on
    the last axis.
    """
    xs = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise NonFiniteFieldError("sample position", int(np.sum(~np.isfinite(xs))), 0)
    if isinstance(f, VectorField):
        comps = [_interp_values(c, f.grid, xs) for c in f.components]
        return np.stack(comps, axis=-1)
    return _interp_values(f.values, f.grid, xs)
