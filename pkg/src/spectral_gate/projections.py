"""Fourier-space projections onto the constrained subspace and its complement.

A :class:`SymbolMap` says what the Fourier coefficient of an admissible
field looks like at wavevector ``k``: it is ``S(k) u`` for some potential
coefficient ``u``.  The projection Γ₁ acts at each lattice wavevector as the
orthogonal projector onto ``range S(k)``; Γ₂ = I − Γ₁.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DimensionError, SymbolError
from .fields import (
    Field,
    Grid,
    TensorShape,
    _pack_header,
    _unpack_header,
    fft_values,
    ifft_values,
    inner_product,
    norm,
    random_field,
)

RANK_RTOL = 1e-10
PROJECTOR_MAGIC = b"SGP1"


@dataclass(frozen=True, eq=False)
class SymbolMap:
    """Per-wavevector generator of the constrained subspace.

    ``evaluate`` maps an array of wavevectors with shape (M, d) to an array of
    matrices with shape (M, dim, p).
    """

    name: str
    shape: TensorShape
    potential_dim: int
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    scale_invariant: bool = False

    def __call__(self, k) -> np.ndarray:
        k = np.atleast_2d(np.asarray(k, dtype=float))
        s = np.asarray(self.evaluate(k), dtype=complex)
        if s.shape != (k.shape[0], self.shape.dim, self.potential_dim):
            raise SymbolError(
                f"symbol {self.name} returned shape {s.shape}, expected "
                f"{(k.shape[0], self.shape.dim, self.potential_dim)}"
            )
        if not np.all(np.isfinite(s)):
            raise SymbolError(f"symbol {self.name} produced non-finite entries")
        return s


def orthonormal_range(s: np.ndarray, rtol: float = RANK_RTOL):
    """Batched rank-revealing orthonormalization of the columns of ``s`` (M, dim, p).

    Returns (U, ranks): U has shape (M, dim, r_max) with the first ``ranks[i]``
    columns spanning range s[i] and zero columns after them.
    """
    u, sv, _ = np.linalg.svd(s, full_matrices=False)
    smax = sv[:, :1]
    keep = (sv > rtol * smax) & (smax > 0)
    ranks = keep.sum(axis=1)
    return u * keep[:, None, :], ranks


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    """Cached per-wavevector projectors.

    ``matrices`` has shape (N, dim, dim) in ``np.fft.fftn`` flattened order.
    ``basis``/``ranks`` hold orthonormal bases of each E_k; they are absent for
    complements built with :meth:`complement` (use ``complement_basis`` there).
    """

    grid: Grid
    shape: TensorShape
    matrices: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)
    ranks: np.ndarray = field(repr=False)
    symbol_name: str = ""

    def complement(self) -> "ProjectionOperator":
        """Projection onto the orthogonal complement (Γ₂), with its own bases."""
        eye = np.eye(self.shape.dim)
        comp = eye[None] - self.matrices
        basis, ranks = orthonormal_range(comp)
        return ProjectionOperator(
            self.grid, self.shape, comp, basis, ranks, symbol_name=f"complement({self.symbol_name})"
        )

    @property
    def space_dim(self) -> int:
        return int(self.ranks.sum())


def direct_sum(first: ProjectionOperator, second: ProjectionOperator) -> ProjectionOperator:
    """Block-diagonal projector on the doubled space: first slot ``first``, second slot ``second``."""
    if first.grid != second.grid:
        raise DimensionError("direct sum needs projectors on the same grid")
    n = first.grid.npoints
    d1, d2 = first.shape.dim, second.shape.dim
    mats = np.zeros((n, d1 + d2, d1 + d2), dtype=complex)
    mats[:, :d1, :d1] = first.matrices
    mats[:, d1:, d1:] = second.matrices
    basis, ranks = orthonormal_range(mats)
    shape = TensorShape(first.shape.blocks + second.shape.blocks)
    return ProjectionOperator(
        first.grid, shape, mats, basis, ranks,
        symbol_name=f"{first.symbol_name}+{second.symbol_name}",
    )


def build_projection(symbol: SymbolMap, grid: Grid) -> ProjectionOperator:
    if grid.d != _symbol_d(symbol, grid):
        raise DimensionError(f"symbol {symbol.name} does not accept {grid.d}-dimensional wavevectors")
    s = symbol(grid.wavevectors())
    basis, ranks = orthonormal_range(s)
    mats = np.einsum("nir,njr->nij", basis, basis.conj())
    # full range: the projector is exactly the identity
    mats[ranks == symbol.shape.dim] = np.eye(symbol.shape.dim)
    return ProjectionOperator(grid, symbol.shape, mats, basis, ranks, symbol_name=symbol.name)


def _symbol_d(symbol: SymbolMap, grid: Grid) -> int:
    try:
        symbol(np.zeros((1, grid.d)))
    except (ValueError, IndexError) as exc:
        raise DimensionError(f"symbol {symbol.name} rejected d={grid.d}: {exc}") from exc
    return grid.d


def _check(pi: ProjectionOperator, p: Field):
    if p.grid != pi.grid or p.shape.dim != pi.shape.dim:
        raise DimensionError(
            f"field (grid {p.grid.sizes}, dim {p.shape.dim}) does not match projector "
            f"(grid {pi.grid.sizes}, dim {pi.shape.dim})"
        )


def project_values(pi: ProjectionOperator, values: np.ndarray) -> np.ndarray:
    """Apply the projector to a raw value array of shape (*sizes, dim)."""
    if not pi.ranks.any():
        return np.zeros_like(values, dtype=complex)
    if np.all(pi.ranks == pi.shape.dim):
        return np.array(values, dtype=complex)
    g = pi.grid
    hat = fft_values(values, g).reshape(g.npoints, -1)
    hat = np.einsum("nij,nj->ni", pi.matrices, hat)
    return ifft_values(hat.reshape(values.shape), g)


def apply_gamma1(pi: ProjectionOperator, p: Field) -> Field:
    _check(pi, p)
    return p.like(project_values(pi, p.values))


def apply_gamma2(pi: ProjectionOperator, p: Field) -> Field:
    _check(pi, p)
    return p.like(p.values - project_values(pi, p.values))


def verify_subspace_orthogonality(pi: ProjectionOperator, trials: int, seed=0) -> float:
    """Largest |(Γ₂P, Γ₁Q)| / (|P||Q|) over random pairs P, Q."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(trials)):
        p = random_field(pi.grid, pi.shape, rng)
        q = random_field(pi.grid, pi.shape, rng)
        val = abs(inner_product(apply_gamma2(pi, p), apply_gamma1(pi, q)))
        worst = max(worst, val / (norm(p) * norm(q)))
    return worst


def save_projection(pi: ProjectionOperator, path) -> None:
    """Projector cache: ``b"SGP1"``, the field header, a length-prefixed UTF-8
    symbol name, u32 ranks[N], then complex128 projector and basis arrays."""
    name = pi.symbol_name.encode()
    n = pi.grid.npoints
    dim = pi.shape.dim
    r = pi.basis.shape[-1]
    parts = [
        PROJECTOR_MAGIC,
        _pack_header(pi.grid, pi.shape),
        struct.pack("<I", len(name)),
        name,
        struct.pack("<I", r),
        np.ascontiguousarray(pi.ranks, dtype="<u4").tobytes(),
        np.ascontiguousarray(pi.matrices, dtype="<c16").tobytes(),
        np.ascontiguousarray(pi.basis, dtype="<c16").tobytes(),
    ]
    assert pi.matrices.shape == (n, dim, dim)
    Path(path).write_bytes(b"".join(parts))


def load_projection(path) -> ProjectionOperator:
    buf = Path(path).read_bytes()
    if buf[:4] != PROJECTOR_MAGIC:
        raise DimensionError(f"{path}: not a projector cache (bad magic)")
    grid, shape, pos = _unpack_header(buf, 4)
    (ln,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    name = buf[pos:pos + ln].decode()
    pos += ln
    (r,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    n, dim = grid.npoints, shape.dim
    ranks = np.frombuffer(buf, dtype="<u4", count=n, offset=pos).astype(int)
    pos += 4 * n
    mats = np.frombuffer(buf, dtype="<c16", count=n * dim * dim, offset=pos).reshape(n, dim, dim)
    pos += 16 * n * dim * dim
    basis = np.frombuffer(buf, dtype="<c16", count=n * dim * r, offset=pos).reshape(n, dim, r)
    return ProjectionOperator(grid, shape, mats.astype(complex), basis.astype(complex), ranks, symbol_name=name)
