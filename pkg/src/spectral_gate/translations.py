"""Constant translations: Q*-convexity checks and coercivity certificate search.

A translation is a constant Hermitian matrix T on the ℓ-fold tensor space.
It may be subtracted from the pointwise coercivity test only if its quadratic
form is nonnegative on every Fourier subspace (E_k)^ℓ.  That property is
checked by sampling wavevectors, which can falsify but never prove it; the
verification record keeps the sample count so outputs can say so.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import TranslationError
from .pencil import (
    CoercivityCertificate,
    OperatorField,
    alpha_profile,
    bound_beta,
    rotated_hermitian,
    translated_profile,
)
from .projections import SymbolMap, orthonormal_range

QSTAR_TOL = -1e-10
HERMITIAN_TOL = 1e-13
SAMPLING_CAVEAT = "sampled wavevectors can falsify but not prove Q*-convexity"


@dataclass(frozen=True)
class Verification:
    status: str  # "pass" or "fail"
    worst: float
    samples: int
    symbol: str

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass(frozen=True, eq=False)
class Translation:
    id: str
    ell: int
    matrix: np.ndarray = field(repr=False)
    verified: Verification | None = None

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise TranslationError(f"translation {self.id}: matrix must be square, got {mat.shape}")
        if int(self.ell) < 1 or mat.shape[0] % int(self.ell):
            raise TranslationError(f"translation {self.id}: size {mat.shape[0]} is not a multiple of ell={self.ell}")
        defect = np.abs(mat - mat.conj().T).max() if mat.size else 0.0
        if defect > HERMITIAN_TOL * max(1.0, np.abs(mat).max()):
            raise TranslationError(f"translation {self.id}: not Hermitian (defect {defect:.3e})")
        mat = 0.5 * (mat + mat.conj().T)
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "ell", int(self.ell))

    @property
    def dim(self) -> int:
        """Dimension of one copy of the tensor space."""
        return self.matrix.shape[0] // self.ell

    def record(self) -> dict:
        v = self.verified
        return {
            "id": self.id,
            "ell": self.ell,
            "status": None if v is None else v.status,
            "worst": None if v is None else v.worst,
            "samples": None if v is None else v.samples,
            "symbol": None if v is None else v.symbol,
            "caveat": SAMPLING_CAVEAT,
        }


# --- wavevector sampling -----------------------------------------------------


def sphere_directions(d: int, n: int) -> np.ndarray:
    """Quasi-uniform unit vectors: equispaced angles in 2D, a Fibonacci lattice in 3D."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        a = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    if d == 3:
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (1.0 + np.sqrt(5.0)) * i
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    raise TranslationError(f"no direction sampler for d={d}")


@dataclass(frozen=True)
class Sampling:
    """How wavevectors are drawn for a Q*-check.

    Scale-invariant symbols use ``directions`` unit vectors.  Other symbols
    use ``radial_directions`` × ``radii`` log-spaced in [r_min, r_max], plus
    k = 0 and the same directions at ``asymptotic_radius``.
    """

    directions: int = 10_000
    radial_directions: int = 400
    radii: int = 31
    r_min: float = 1e-3
    r_max: float = 1e3
    asymptotic_radius: float = 1e6

    def wavevectors(self, d: int, scale_invariant: bool) -> np.ndarray:
        if scale_invariant:
            return sphere_directions(d, self.directions)
        dirs = sphere_directions(d, self.radial_directions)
        rad = np.logspace(np.log10(self.r_min), np.log10(self.r_max), self.radii)
        ks = (rad[:, None, None] * dirs[None]).reshape(-1, d)
        return np.concatenate([np.zeros((1, d)), ks, self.asymptotic_radius * dirs])


def _symbol_dimension(symbol: SymbolMap) -> int:
    for d in (2, 3, 1):
        try:
            symbol(np.zeros((1, d)))
            return d
        except Exception:
            continue
    raise TranslationError(f"cannot determine the spatial dimension of symbol {symbol.name}")


def qstar_min_eig(T: Translation, symbol: SymbolMap, sampling: Sampling | None = None, d: int | None = None) -> float:
    """min over sampled k of λ_min(B(k)† T B(k)), B(k) an orthonormal basis of (E_k)^ℓ.

    Wavevectors with E_k = {0} impose no condition and are skipped; if every
    sample is skipped the result is +inf.
    """
    sampling = sampling or Sampling()
    if T.dim != symbol.shape.dim:
        raise TranslationError(
            f"translation {T.id} acts on ℓ copies of dim {T.dim}, symbol {symbol.name} has dim {symbol.shape.dim}"
        )
    d = _symbol_dimension(symbol) if d is None else d
    ks = sampling.wavevectors(d, symbol.scale_invariant)
    # the range of S(k) is scale-free, so the samples at large |k| probe the S(k)/|k| limit
    basis, ranks = orthonormal_range(symbol(ks))
    worst = np.inf
    eye = np.eye(T.ell)
    for r in np.unique(ranks):
        if r == 0:
            continue
        u = basis[ranks == r][:, :, :r]
        b = np.stack([np.kron(eye, ui) for ui in u]) if T.ell > 1 else u
        q = np.conj(np.swapaxes(b, 1, 2)) @ T.matrix @ b
        lam = np.linalg.eigvalsh(0.5 * (q + np.conj(np.swapaxes(q, 1, 2))))[:, 0]
        worst = min(worst, float(lam.min()))
    return worst


def verify_translation(T: Translation, symbol: SymbolMap, sampling: Sampling | None = None,
                       d: int | None = None) -> Translation:
    """Return a copy of ``T`` carrying a fresh Q*-verification record for ``symbol``."""
    sampling = sampling or Sampling()
    d = _symbol_dimension(symbol) if d is None else d
    worst = qstar_min_eig(T, symbol, sampling, d)
    n = len(sampling.wavevectors(d, symbol.scale_invariant))
    status = "pass" if worst >= QSTAR_TOL else "fail"
    return replace(T, verified=Verification(status, worst, n, symbol.name))


# --- built-in library --------------------------------------------------------


def zero_translation(dim: int, ell: int = 1) -> Translation:
    return Translation("zero", ell, np.zeros((dim * ell, dim * ell)))


ROTATION_2D = np.array([[0.0, -1.0], [1.0, 0.0]])


def rotation_translation_2d() -> Translation:
    """ℓ = 2 form Q(E₁, E₂) = 2 Re(E₁ · R E₂) on pairs of 2-vectors, R the 90° rotation."""
    mat = np.zeros((4, 4))
    mat[:2, 2:] = ROTATION_2D
    mat[2:, :2] = ROTATION_2D.T
    return Translation("rotation2d", 2, mat)


def load_translation_csv(path, ell: int, id: str | None = None) -> Translation:
    """Read rows ``row, col, re, im`` (header optional); absent entries are zero."""
    entries = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                i, j, re, im = int(row[0]), int(row[1]), float(row[2]), float(row[3])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue
                raise TranslationError(f"{path}:{lineno}: expected row, col, re, im")
            entries.append((i, j, complex(re, im)))
    if not entries:
        raise TranslationError(f"{path}: no matrix entries")
    n = 1 + max(max(i, j) for i, j, _ in entries)
    mat = np.zeros((n, n), dtype=complex)
    for i, j, v in entries:
        mat[i, j] = v
    return Translation(id or str(path), ell, mat)


def builtin_library(symbol: SymbolMap, d: int, sampling: Sampling | None = None) -> list[Translation]:
    """Zero translation, plus the rotation translation when the symbol is 2D conductivity-shaped."""
    lib = [zero_translation(symbol.shape.dim)]
    if d == 2 and symbol.shape.dim == 2:
        lib.append(rotation_translation_2d())
    return [verify_translation(T, symbol, sampling, d) for T in lib]


# --- certificate search ------------------------------------------------------


def _golden_max(f, lo: np.ndarray, hi: np.ndarray, iters: int = 60):
    """Vectorized golden-section maximization of concave f on [lo, hi] (elementwise)."""
    g = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo.copy(), hi.copy()
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = np.where(left, b - g * (b - a), d)
        new_d = np.where(left, c, a + g * (b - a))
        fnew = f(np.where(left, new_c, new_d))
        fd, fc = np.where(left, fc, fnew), np.where(left, fnew, fd)
        c, d = new_c, new_d
    x = 0.5 * (a + b)
    ends = np.stack([lo, x])
    vals = np.stack([f(lo), f(x)])
    best = np.argmax(vals, axis=0)
    return np.take_along_axis(ends, best[None], 0)[0], vals.max(axis=0)


@dataclass(frozen=True)
class CertifierConfig:
    theta_samples: int = 720
    refine: bool = True
    t_max: float | None = None
    golden_iters: int = 60


def _check_library(library, dim: int, symbol_name: str | None):
    for T in library:
        if T.verified is None:
            raise TranslationError(f"translation {T.id} has not been verified by qstar_min_eig")
        if not T.verified.passed:
            raise TranslationError(
                f"translation {T.id} failed the Q*-check (worst eigenvalue {T.verified.worst:.3e})"
            )
        if symbol_name is not None and T.verified.symbol != symbol_name:
            raise TranslationError(
                f"translation {T.id} was verified for symbol {T.verified.symbol}, not {symbol_name}"
            )
        if T.dim != dim:
            raise TranslationError(f"translation {T.id} acts on dim {T.dim}, operator has dim {dim}")


def _initial_slope(lam: np.ndarray, vec: np.ndarray, T: "Translation", scale: float,
                   rtol: float = 1e-9) -> np.ndarray:
    """Right derivative at t = 0 of min_x λ_min(blockdiag_ℓ(H_θ(x)) − tT), per θ.

    ``lam``/``vec`` are the eigen-decompositions of H_θ for every (θ, phase).
    For one phase the derivative is −λ_max(W†TW) with W spanning the ℓ-fold
    lowest eigenspace; the profile's derivative is the least such value over
    the phases attaining the minimum.  Eigenvalues within ``rtol``·scale count
    as degenerate.
    """
    tol = rtol * max(scale, 1.0)
    lmin = lam[..., 0]  # (nθ, m)
    prof = lmin.min(axis=1, keepdims=True)
    active = lmin <= prof + tol
    inside = lam <= lmin[..., None] + tol  # eigenvectors in the lowest eigenspace
    w = vec * inside[..., None, :]
    if T.ell > 1:
        w = np.kron(np.eye(T.ell), w)
        inside = np.tile(inside, T.ell)
    q = np.conj(np.swapaxes(w, -1, -2)) @ T.matrix @ w
    big = 10.0 * (np.abs(T.matrix).sum() + 1.0)
    q = q - big * np.eye(q.shape[-1]) * (~inside)[..., None, :]
    slope = -np.linalg.eigvalsh(q)[..., -1]
    return np.where(active, slope, np.inf).min(axis=1)


def certify_coercivity(L: OperatorField, library=(), config: CertifierConfig | None = None,
                       symbol_name: str | None = None) -> CoercivityCertificate | None:
    """Best certificate (largest α/β) over θ, plain coercivity and each library translation.

    Returns None when every candidate has α ≤ 0; that says nothing about the
    spectrum, only that no certificate was found.
    """
    config = config or CertifierConfig()
    library = list(library)
    _check_library(library, L.shape.dim, symbol_name)
    mats = L.used()
    beta = bound_beta(L)
    if beta == 0.0:
        return None
    thetas = 2.0 * np.pi * np.arange(config.theta_samples) / config.theta_samples
    dtheta = 2.0 * np.pi / config.theta_samples

    candidates = []
    active = [T for T in library if np.any(T.matrix)]
    if active:
        lam, vec = np.linalg.eigh(rotated_hermitian(mats, thetas))
        prof = lam[..., 0].min(axis=1)
    else:
        prof = alpha_profile(mats, thetas)
    j = int(np.argmax(prof))
    candidates.append((float(prof[j]), float(thetas[j]), 0.0, None))

    for T in active:
        tnorm = float(np.linalg.norm(T.matrix, 2))
        tmax = config.t_max if config.t_max is not None else 10.0 * beta / tnorm
        # t = 0 is already optimal wherever the profile cannot increase in t (it is concave)
        live = _initial_slope(lam, vec, T, beta) > 0
        if not np.any(live):
            continue
        th = thetas[live]

        def f(ts, th=th, mat=T.matrix, ell=T.ell):
            return translated_profile(mats, th, ts, mat, ell)

        ts, vals = _golden_max(f, np.zeros_like(th), np.full_like(th, tmax), config.golden_iters)
        j = int(np.argmax(vals))
        candidates.append((float(vals[j]), float(th[j]), float(ts[j]), T))

    results = []
    for alpha, theta, t, T in candidates:
        if config.refine:
            alpha, theta = _refine_theta(mats, theta, t, T, dtheta, alpha)
        results.append((alpha, theta, t, T))
    # deterministic tie-break: earlier candidate (plain coercivity first) wins
    best = max(range(len(results)), key=lambda i: (results[i][0], -i))
    alpha, theta, t, T = results[best]
    if not alpha > 0:
        return None
    theta = float(np.mod(theta, 2.0 * np.pi))
    check = _evaluate(mats, theta, t, T)
    return CoercivityCertificate(
        theta=theta, alpha=check, beta=beta, t=t,
        translation_id=None if T is None else T.id,
        min_eig_residual=0.0,
    )


def _evaluate(mats, theta, t, T) -> float:
    if T is None:
        return float(alpha_profile(mats, [theta])[0])
    return float(translated_profile(mats, [theta], [t], T.matrix, T.ell)[0])


def _zoom_max(f, lo: float, hi: float, points: int = 65, rounds: int = 8):
    """Maximize a unimodal f on [lo, hi] by repeated grid sampling, each round
    keeping one grid step either side of the best sample.  Kinks (where the
    minimizing phase changes) do not slow it down."""
    best_x, best_v = lo, -np.inf
    for _ in range(rounds):
        xs = np.linspace(lo, hi, points)
        vals = f(xs)
        j = int(np.argmax(vals))
        if vals[j] > best_v:
            best_x, best_v = float(xs[j]), float(vals[j])
        step = (hi - lo) / (points - 1)
        lo, hi = xs[j] - step, xs[j] + step
    return best_x, best_v


def _refine_theta(mats, theta, t, T, dtheta, alpha):
    if T is None:
        f = lambda th: alpha_profile(mats, th)  # noqa: E731
    else:
        f = lambda th: translated_profile(mats, th, t, T.matrix, T.ell)  # noqa: E731
    th, val = _zoom_max(f, theta - dtheta, theta + dtheta)
    if val > alpha:
        return val, th
    return alpha, theta
