"""Discrete periodic fields with values in a finite-dimensional tensor space.

A field lives on a uniform periodic grid and stores one complex vector of
length ``shape.dim`` per grid point.  The tensor space is a concatenation of
complex matrix blocks; component ``c`` of the flat vector is obtained by
walking the blocks in declared order and each block in row-major order.
That ordering is part of the on-disk format and must never change.

Inner products are volume averages, ``(P, Q) = (1/N) sum_x P(x) . conj(Q(x))``,
so norms do not depend on the grid resolution.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError

FIELD_MAGIC = b"SGF1"


@dataclass(frozen=True)
class TensorShape:
    blocks: tuple[tuple[int, int], ...]

    def __post_init__(self):
        blocks = tuple((int(r), int(c)) for r, c in self.blocks)
        if not blocks:
            raise DimensionError("tensor shape needs at least one block")
        if any(r < 1 or c < 1 for r, c in blocks):
            raise DimensionError(f"invalid block sizes {blocks}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def dim(self) -> int:
        return sum(r * c for r, c in self.blocks)

    def offsets(self) -> list[int]:
        out, acc = [], 0
        for r, c in self.blocks:
            out.append(acc)
            acc += r * c
        return out

    def doubled(self) -> "TensorShape":
        return TensorShape(self.blocks + self.blocks)

    def ell_fold(self, ell: int) -> "TensorShape":
        return TensorShape(self.blocks * ell)


@dataclass(frozen=True)
class Grid:
    sizes: tuple[int, ...]
    cell: tuple[float, ...] | None = None

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        if len(sizes) not in (1, 2, 3):
            raise DimensionError(f"grid dimension must be 1, 2 or 3, got {len(sizes)}")
        if any(n < 2 for n in sizes):
            raise DimensionError(f"every axis needs at least 2 points, got {sizes}")
        cell = (1.0,) * len(sizes) if self.cell is None else tuple(float(a) for a in self.cell)
        if len(cell) != len(sizes) or any(not a > 0 for a in cell):
            raise DimensionError(f"cell lengths {cell} do not match sizes {sizes}")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "cell", cell)

    @property
    def d(self) -> int:
        return len(self.sizes)

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes))

    def axis_wavenumbers(self, axis: int) -> np.ndarray:
        n = self.sizes[axis]
        return 2.0 * np.pi * np.fft.fftfreq(n, d=self.cell[axis] / n)

    def wavevectors(self) -> np.ndarray:
        """Lattice wavevectors, shape (N, d), in the flattened order of ``np.fft.fftn``."""
        axes = [self.axis_wavenumbers(a) for a in range(self.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def coordinates(self) -> np.ndarray:
        """Grid point positions, shape (N, d)."""
        axes = [np.arange(n) * (a / n) for n, a in zip(self.sizes, self.cell)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    shape: TensorShape
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        expected = self.grid.sizes + (self.shape.dim,)
        if vals.size != self.grid.npoints * self.shape.dim:
            raise DimensionError(
                f"field array has {vals.size} entries, expected {self.grid.npoints} x {self.shape.dim}"
            )
        vals = vals.reshape(expected)
        if not np.all(np.isfinite(vals)):
            raise DimensionError("field contains non-finite entries")
        if vals is self.values or np.shares_memory(vals, np.asarray(self.values)):
            vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def flat(self) -> np.ndarray:
        """View of the values with shape (N, dim)."""
        return self.values.reshape(self.grid.npoints, self.shape.dim)

    def like(self, values) -> "Field":
        return Field(self.grid, self.shape, values)

    def __add__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return self.like(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return self.like(self.values - other.values)

    def __mul__(self, scalar) -> "Field":
        return self.like(self.values * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Field":
        return self.like(self.values / complex(scalar))

    def __neg__(self) -> "Field":
        return self.like(-self.values)


def _check_compatible(p: Field, q: Field):
    if p.grid != q.grid or p.shape != q.shape:
        raise DimensionError(
            f"incompatible fields: grid {p.grid.sizes}/{q.grid.sizes}, dim {p.shape.dim}/{q.shape.dim}"
        )


def zeros(grid: Grid, shape: TensorShape) -> Field:
    return Field(grid, shape, np.zeros(grid.sizes + (shape.dim,), dtype=complex))


def constant(grid: Grid, shape: TensorShape, vector) -> Field:
    vec = np.broadcast_to(np.asarray(vector, dtype=complex), (shape.dim,))
    return Field(grid, shape, np.broadcast_to(vec, grid.sizes + (shape.dim,)).copy())


def inner_product(p: Field, q: Field) -> complex:
    _check_compatible(p, q)
    return complex(np.vdot(q.flat, p.flat)) / p.grid.npoints


def norm(p: Field) -> float:
    return float(np.sqrt(np.vdot(p.flat, p.flat).real / p.grid.npoints))


def _spatial_axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(grid.d))


def transform(p: Field, direction: str = "forward") -> Field:
    """Unitary discrete Fourier transform applied to every component."""
    axes = _spatial_axes(p.grid)
    if direction == "forward":
        out = np.fft.fftn(p.values, axes=axes, norm="ortho")
    elif direction == "inverse":
        out = np.fft.ifftn(p.values, axes=axes, norm="ortho")
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return p.like(out)


def fft_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.fftn(values, axes=_spatial_axes(grid), norm="ortho")


def ifft_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.ifftn(values, axes=_spatial_axes(grid), norm="ortho")


def random_field(grid: Grid, shape: TensorShape, seed, statistics: str = "complex-gaussian") -> Field:
    """Circular complex Gaussian field with unit variance per component."""
    if statistics != "complex-gaussian":
        raise ValueError(f"unsupported statistics {statistics!r}")
    rng = np.random.default_rng(seed)
    size = grid.sizes + (shape.dim,)
    vals = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)
    return Field(grid, shape, vals)


# --- on-disk formats ---------------------------------------------------------


def _pack_header(grid: Grid, shape: TensorShape) -> bytes:
    out = [struct.pack("<I", grid.d)]
    out.append(struct.pack(f"<{grid.d}I", *grid.sizes))
    out.append(struct.pack(f"<{grid.d}d", *grid.cell))
    out.append(struct.pack("<I", len(shape.blocks)))
    for r, c in shape.blocks:
        out.append(struct.pack("<II", r, c))
    return b"".join(out)


def _unpack_header(buf: bytes, pos: int):
    (d,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    sizes = struct.unpack_from(f"<{d}I", buf, pos)
    pos += 4 * d
    cell = struct.unpack_from(f"<{d}d", buf, pos)
    pos += 8 * d
    (nb,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    blocks = []
    for _ in range(nb):
        blocks.append(struct.unpack_from("<II", buf, pos))
        pos += 8
    return Grid(sizes, cell), TensorShape(tuple(blocks)), pos


def save_field(p: Field, path) -> None:
    """Write the binary container.

    Layout: ``b"SGF1"``, u32 d, u32 sizes[d], f64 cell[d], u32 nblocks,
    (u32 rows, u32 cols) per block, then N*dim little-endian complex64
    values, grid points in C order and components in flattening order.
    """
    data = np.ascontiguousarray(p.flat, dtype="<c8").tobytes()
    Path(path).write_bytes(FIELD_MAGIC + _pack_header(p.grid, p.shape) + data)


def load_field(path) -> Field:
    buf = Path(path).read_bytes()
    if buf[:4] != FIELD_MAGIC:
        raise DimensionError(f"{path}: not a field container (bad magic)")
    grid, shape, pos = _unpack_header(buf, 4)
    vals = np.frombuffer(buf, dtype="<c8", offset=pos)
    return Field(grid, shape, vals.astype(complex))


def export_field_csv(p: Field, path) -> None:
    """Debug export, one row per (grid point, component): x-index, component-index, re, im."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_index", "component", "re", "im"])
        for x, row in enumerate(p.flat):
            for c, v in enumerate(row):
                w.writerow([x, c, f"{v.real:.17g}", f"{v.imag:.17g}"])
