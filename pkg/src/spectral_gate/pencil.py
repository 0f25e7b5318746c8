"""Operator pencils L(x) = Σ z_i L⁽ⁱ⁾(x) and their boundedness/coercivity constants."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SingularModuliError, TranslationError
from .fields import Field, Grid, TensorShape


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


@dataclass(frozen=True, eq=False)
class OperatorField:
    """A field of dim×dim matrices stored as a palette plus a per-point index.

    ``matrices`` has shape (m, dim, dim) and ``index`` (N,) picks the matrix at
    each grid point.  Multiphase media use one palette entry per phase, so
    pointwise quantities (norms, eigenvalues, inverses) are computed per phase
    rather than per grid point; a general field uses ``index = arange(N)``.
    """

    grid: Grid
    shape: TensorShape
    matrices: np.ndarray = field(repr=False)
    index: np.ndarray = field(repr=False)

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=complex)
        dim = self.shape.dim
        if mats.ndim != 3 or mats.shape[1:] != (dim, dim):
            raise DimensionError(f"operator palette has shape {mats.shape}, expected (m, {dim}, {dim})")
        idx = np.asarray(self.index, dtype=np.int64).ravel()
        if idx.shape != (self.grid.npoints,):
            raise DimensionError(f"index has {idx.size} entries, grid has {self.grid.npoints} points")
        if idx.size and (idx.min() < 0 or idx.max() >= mats.shape[0]):
            raise DimensionError("operator index out of palette range")
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "index", idx)

    @classmethod
    def from_dense(cls, grid: Grid, shape: TensorShape, values) -> "OperatorField":
        vals = np.asarray(values, dtype=complex).reshape(grid.npoints, shape.dim, shape.dim)
        return cls(grid, shape, vals, np.arange(grid.npoints))

    @classmethod
    def constant(cls, grid: Grid, shape: TensorShape, matrix) -> "OperatorField":
        mat = np.asarray(matrix, dtype=complex).reshape(1, shape.dim, shape.dim)
        return cls(grid, shape, mat, np.zeros(grid.npoints, dtype=np.int64))

    def used(self) -> np.ndarray:
        """Palette entries that actually occur on the grid."""
        return self.matrices[np.unique(self.index)]

    def dense(self) -> np.ndarray:
        return self.matrices[self.index]

    def with_matrices(self, mats) -> "OperatorField":
        return OperatorField(self.grid, self.shape, mats, self.index)

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        flat = values.reshape(self.grid.npoints, self.shape.dim)
        if self.matrices.shape[0] > 16:
            return np.einsum("nij,nj->ni", self.dense(), flat).reshape(values.shape)
        out = np.empty_like(flat, dtype=complex)
        for j in np.unique(self.index):
            sel = self.index == j
            out[sel] = flat[sel] @ self.matrices[j].T
        return out.reshape(values.shape)

    def apply(self, p: Field) -> Field:
        if p.grid != self.grid or p.shape.dim != self.shape.dim:
            raise DimensionError("operator field and field do not match")
        return p.like(self.apply_values(p.values))

    def __mul__(self, scalar) -> "OperatorField":
        return self.with_matrices(self.matrices * complex(scalar))

    __rmul__ = __mul__

    def inverse(self, rtol: float = 1e-12) -> "OperatorField":
        used = np.unique(self.index)
        sv = np.linalg.svd(self.matrices[used], compute_uv=False)
        bad = sv[:, -1] <= rtol * sv[:, 0]
        if np.any(bad):
            raise SingularModuliError(
                f"L(x) is singular at {int(bad.sum())} palette entries "
                f"(smallest singular value {sv[bad, -1].min():.3e})"
            )
        inv = np.zeros_like(self.matrices)
        inv[used] = np.linalg.inv(self.matrices[used])
        return self.with_matrices(inv)


def combine(*ops: OperatorField) -> tuple[np.ndarray, list[np.ndarray]]:
    """Re-index several operator fields onto a shared palette index."""
    stacked = np.stack([op.index for op in ops], axis=1)
    uniq, joint = np.unique(stacked, axis=0, return_inverse=True)
    palettes = [op.matrices[uniq[:, i]] for i, op in enumerate(ops)]
    return joint.ravel(), palettes


@dataclass(frozen=True, eq=False)
class OperatorPencil:
    """L(x; z) = Σ z_i L⁽ⁱ⁾(x) with all coefficient fields on one shared palette index.

    ``coefficients`` has shape (n, m, dim, dim).  When built by
    :func:`multiphase_pencil` the palette entries are the phases.
    """

    grid: Grid
    shape: TensorShape
    coefficients: np.ndarray = field(repr=False)
    index: np.ndarray = field(repr=False)
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=complex)
        if coef.ndim != 4 or coef.shape[0] < 1:
            raise DimensionError("pencil needs at least one coefficient field")
        labels = tuple(self.labels) or tuple(f"z{i + 1}" for i in range(coef.shape[0]))
        if len(labels) != coef.shape[0]:
            raise DimensionError("one label per pencil coefficient")
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "index", np.asarray(self.index, dtype=np.int64).ravel())

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]

    @classmethod
    def from_fields(cls, fields, labels=()) -> "OperatorPencil":
        fields = list(fields)
        if not fields:
            raise DimensionError("pencil needs at least one coefficient field")
        g, s = fields[0].grid, fields[0].shape
        for f in fields[1:]:
            if f.grid != g or f.shape != s:
                raise DimensionError("pencil coefficient fields must share grid and shape")
        index, palettes = combine(*fields)
        return cls(g, s, np.stack(palettes), index, tuple(labels))

    def coefficient(self, i: int) -> OperatorField:
        return OperatorField(self.grid, self.shape, self.coefficients[i], self.index)


def multiphase_pencil(layout, phase_tensors, shape: TensorShape | None = None, labels=()) -> OperatorPencil:
    """Pencil with z_i scaling phase i: L⁽ⁱ⁾(x) = χ_i(x) L_i."""
    tensors = np.asarray(phase_tensors, dtype=complex)
    m = layout.nphases
    if tensors.shape[0] != m:
        raise DimensionError(f"{tensors.shape[0]} phase tensors for {m} phases")
    dim = tensors.shape[1]
    coef = np.zeros((m, m, dim, dim), dtype=complex)
    for i in range(m):
        coef[i, i] = tensors[i]
    shape = TensorShape(((dim, 1),)) if shape is None else shape
    return OperatorPencil(layout.grid, shape, coef, layout.labels.ravel(), tuple(labels))


def evaluate_pencil(pencil: OperatorPencil, z) -> OperatorField:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.shape != (pencil.n,):
        raise DimensionError(f"pencil has {pencil.n} parameters, got {z.size}")
    mats = np.einsum("i,imab->mab", z, pencil.coefficients)
    return OperatorField(pencil.grid, pencil.shape, mats, pencil.index)


# --- boundedness and coercivity ----------------------------------------------


def bound_beta(L: OperatorField) -> float:
    """Exact sup over grid points of the spectral norm of L(x)."""
    return float(np.linalg.svd(L.used(), compute_uv=False)[:, 0].max())


def rotated_hermitian(mats: np.ndarray, thetas) -> np.ndarray:
    """Re(e^{iθ}A) for every θ and every matrix A: shape (nθ, m, dim, dim)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    a = hermitian_part(mats)
    b = hermitian_part(1j * mats)
    return np.cos(thetas)[:, None, None, None] * a + np.sin(thetas)[:, None, None, None] * b


def alpha_profile(mats: np.ndarray, thetas) -> np.ndarray:
    """min over matrices of λ_min(Re(e^{iθ}A)) for each θ."""
    h = rotated_hermitian(mats, thetas)
    return np.linalg.eigvalsh(h)[..., 0].min(axis=1)


def local_alpha(L: OperatorField, theta: float) -> float:
    return float(alpha_profile(L.used(), [theta])[0])


def ell_fold(h: np.ndarray, ell: int) -> np.ndarray:
    """blockdiag(h, ..., h) with ``ell`` copies, batched over leading axes."""
    if ell == 1:
        return h
    return np.kron(np.eye(ell), h)


def translated_profile(mats: np.ndarray, thetas, ts, T: np.ndarray, ell: int) -> np.ndarray:
    """min over matrices of λ_min(blockdiag_ℓ(Re(e^{iθ}A)) − t T), paired θ[i], t[i]."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    ts = np.broadcast_to(np.asarray(ts, dtype=float), thetas.shape)
    h = ell_fold(rotated_hermitian(mats, thetas), ell)
    h = h - ts[:, None, None, None] * T[None, None]
    return np.linalg.eigvalsh(h)[..., 0].min(axis=1)


def translated_alpha(L: OperatorField, theta: float, t: float, T) -> float:
    """Best α in the pointwise translated inequality for this (θ, t, T).

    ``T`` is a :class:`~spectral_gate.translations.Translation` or a Hermitian
    matrix on the ℓ-fold tensor space (ℓ inferred from its size).
    """
    mat = np.asarray(getattr(T, "matrix", T), dtype=complex)
    dim = L.shape.dim
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % dim:
        raise TranslationError(f"translation of shape {mat.shape} does not act on ℓ copies of dim {dim}")
    ell = mat.shape[0] // dim
    return float(translated_profile(L.used(), [theta], [t], mat, ell)[0])


@dataclass(frozen=True)
class CoercivityCertificate:
    theta: float
    alpha: float
    beta: float
    t: float = 0.0
    translation_id: str | None = None
    min_eig_residual: float = 0.0

    @property
    def valid(self) -> bool:
        return self.alpha > 0 and self.min_eig_residual >= 0

    @property
    def shift(self) -> complex:
        """The series shift c = (β²/α) e^{−iθ}."""
        return (self.beta**2 / self.alpha) * np.exp(-1j * self.theta)

    @property
    def predicted_ratio(self) -> float:
        r = self.alpha / self.beta
        return float(np.sqrt(max(0.0, 1.0 - r * r)))

    def to_record(self) -> dict:
        return {
            "theta": float(self.theta),
            "alpha": float(self.alpha),
            "beta": float(self.beta),
            "t": float(self.t),
            "translation_id": self.translation_id,
            "residual": float(self.min_eig_residual),
        }
