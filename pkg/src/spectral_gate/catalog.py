"""Canonical-form presets: tensor shapes, symbols and phase moduli.

Each preset fixes the E-field column of its constitutive law
``J = L E − h`` through a symbol ``S(k)`` (E-hat = S(k) u-hat for potential
coefficients u-hat, with ∂_j ↦ i k_j) and a builder that turns named
physical moduli into the pointwise matrix ``L``.

Conventions: gradients carry the first index, so the gradient of an
``s``-component potential is the d×s block ``(∇u)_{ij} = ∂_i u_j`` flattened
row-major.  Fourth-order tensors act on those blocks as (d·s)×(d·s) matrices.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import LayoutError, PresetError
from .fields import Grid, TensorShape
from .projections import SymbolMap, build_projection, verify_subspace_orthogonality

PRESET_NAMES = (
    "conductivity",
    "acoustics",
    "maxwell",
    "elastodynamics",
    "schrodinger_freq",
    "thermoacoustics",
    "thermoelasticity",
    "kirchhoff_plate",
    "mindlin_plate",
    "dirichlet_laplacian",
)

ALLOWED_D = {
    "maxwell": (3,),
    "kirchhoff_plate": (2,),
    "mindlin_plate": (2,),
}


@dataclass(frozen=True, eq=False)
class PhysicsPreset:
    name: str
    d: int
    shape: TensorShape
    symbol: SymbolMap
    phase_builder: Callable[..., np.ndarray] = field(repr=False)
    defaults: dict = field(default_factory=dict)

    def phase_tensor(self, **moduli) -> np.ndarray:
        """L for one phase; unspecified moduli fall back to the preset defaults."""
        params = dict(self.defaults)
        unknown = set(moduli) - set(params)
        if unknown:
            raise PresetError(f"{self.name}: unknown moduli {sorted(unknown)}; expected {sorted(params)}")
        params.update(moduli)
        mat = np.asarray(self.phase_builder(**params), dtype=complex)
        if mat.shape != (self.shape.dim, self.shape.dim):
            raise PresetError(f"{self.name}: phase tensor has shape {mat.shape}, expected dim {self.shape.dim}")
        return mat


# --- tensor helpers ----------------------------------------------------------


def _as_matrix(value, n: int) -> np.ndarray:
    """Scalar → multiple of identity; otherwise an n×n matrix."""
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        return arr * np.eye(n)
    if arr.shape != (n, n):
        raise PresetError(f"expected a scalar or {n}x{n} matrix, got shape {arr.shape}")
    return arr


def isotropic_stiffness(d: int, lam, mu) -> np.ndarray:
    """λ δ_iα δ_jβ + μ(δ_ij δ_αβ + δ_iβ δ_αj) as a d²×d² matrix on row-major (i, α) pairs."""
    eye = np.eye(d)
    c = (
        lam * np.einsum("ia,jb->iajb", eye, eye)
        + mu * (np.einsum("ij,ab->iajb", eye, eye) + np.einsum("ib,aj->iajb", eye, eye))
    )
    return c.reshape(d * d, d * d).astype(complex)


def viscosity_tensor(d: int, mu, mu_bulk) -> np.ndarray:
    """Isotropic viscosity: D∇v = μ[∇v + ∇vᵀ] + (μ_B − 2μ/3)(tr ∇v) I."""
    return isotropic_stiffness(d, mu_bulk - 2.0 * mu / 3.0, mu)


def plate_rigidity(D, nu) -> np.ndarray:
    """Isotropic Kirchhoff plate rigidity D[ν δ_ij δ_kl + (1−ν)(δ_ik δ_jl + δ_il δ_jk)/2] on 2×2 blocks."""
    return isotropic_stiffness(2, D * nu, D * (1.0 - nu) / 2.0)


def mindlin_stiffness(E, nu, G, kappa, h) -> np.ndarray:
    flex = E * h**3 / (12.0 * (1.0 - nu**2))
    mat = np.zeros((5, 5), dtype=complex)
    mat[0, 0] = mat[1, 1] = flex
    mat[0, 1] = mat[1, 0] = nu * flex
    mat[2, 2] = (1.0 - nu) / 2.0 * flex
    mat[3, 3] = mat[4, 4] = kappa * G * h
    return mat


def _block_diag(*blocks) -> np.ndarray:
    blocks = [np.atleast_2d(np.asarray(b, dtype=complex)) for b in blocks]
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    i = 0
    for b in blocks:
        out[i:i + b.shape[0], i:i + b.shape[1]] = b
        i += b.shape[0]
    return out


# --- symbol helpers ----------------------------------------------------------


def _check_k(k: np.ndarray, d: int) -> np.ndarray:
    if k.shape[-1] != d:
        raise ValueError(f"expected {d}-dimensional wavevectors, got {k.shape[-1]}")
    return k


def _grad_rows(k: np.ndarray, s: int) -> np.ndarray:
    """(M, d·s, s) matrix mapping u-hat to the Fourier coefficient of ∇u."""
    m, d = k.shape
    eye = np.eye(s)
    return (1j * np.einsum("mi,jb->mijb", k, eye)).reshape(m, d * s, s)


def _grad_and_value(d: int, scale_grad=1.0, scale_val=1.0):
    """Symbol for E = (∇u, u) of a scalar potential: S(k) = (i k, 1)ᵀ."""

    def ev(k):
        k = _check_k(k, d)
        s = np.empty((k.shape[0], d + 1, 1), dtype=complex)
        s[:, :d, 0] = scale_grad * 1j * k
        s[:, d, 0] = scale_val
        return s

    return ev


def _conductivity_symbol(d):
    def ev(k):
        k = _check_k(k, d)
        return (1j * k)[:, :, None]

    return SymbolMap("conductivity", TensorShape(((d, 1),)), 1, ev, scale_invariant=True)


def _curl_matrix(k: np.ndarray) -> np.ndarray:
    m = k.shape[0]
    c = np.zeros((m, 3, 3), dtype=complex)
    c[:, 0, 1], c[:, 0, 2] = -k[:, 2], k[:, 1]
    c[:, 1, 0], c[:, 1, 2] = k[:, 2], -k[:, 0]
    c[:, 2, 0], c[:, 2, 1] = -k[:, 1], k[:, 0]
    return 1j * c


def _vector_potential_symbol(d, name, grad_factor, value_factor):
    """E = (f∇u, g u) for a d-component potential u (elastodynamics family)."""

    def ev(k):
        k = _check_k(k, d)
        m = k.shape[0]
        s = np.zeros((m, d * d + d, d), dtype=complex)
        s[:, : d * d, :] = grad_factor * _grad_rows(k, d)
        s[:, d * d:, :] = value_factor * np.eye(d)
        return s

    return SymbolMap(name, TensorShape(((d, d), (d, 1))), d, ev)


def _thermal_symbol(d, name, grad_factor, value_factor, T0):
    """E = (f∇v, g v, −∇θ/T0, −θ/T0); potentials (v_1..v_d, θ)."""

    def ev(k):
        k = _check_k(k, d)
        m = k.shape[0]
        dim = d * d + d + d + 1
        s = np.zeros((m, dim, d + 1), dtype=complex)
        s[:, : d * d, :d] = grad_factor * _grad_rows(k, d)
        s[:, d * d: d * d + d, :d] = value_factor * np.eye(d)
        off = d * d + d
        s[:, off: off + d, d] = -1j * k / T0
        s[:, off + d, d] = -1.0 / T0
        return s

    shape = TensorShape(((d, d), (d, 1), (d, 1), (1, 1)))
    return SymbolMap(name, shape, d + 1, ev)


# --- presets -----------------------------------------------------------------


def _preset_conductivity(d, params):
    sym = _conductivity_symbol(d)

    def build(sigma):
        return _as_matrix(sigma, d)

    return sym, build, {"sigma": 1.0}


def _preset_acoustics(d, params):
    sym = SymbolMap("acoustics", TensorShape(((d, 1), (1, 1))), 1, _grad_and_value(d))

    def build(rho, kappa, omega):
        rho_m = _as_matrix(rho, d)
        return _block_diag(-np.linalg.inv(omega * rho_m), omega / complex(kappa))

    return sym, build, {"rho": 1.0, "kappa": 1.0, "omega": 1.0}


def _preset_maxwell(d, params):
    def ev(k):
        k = _check_k(k, 3)
        s = np.zeros((k.shape[0], 6, 3), dtype=complex)
        s[:, :3, :] = _curl_matrix(k)
        s[:, 3:, :] = np.eye(3)
        return s

    sym = SymbolMap("maxwell", TensorShape(((3, 1), (3, 1))), 3, ev)

    def build(mu, eps, omega):
        return _block_diag(-np.linalg.inv(omega * _as_matrix(mu, 3)), omega * _as_matrix(eps, 3))

    return sym, build, {"mu": 1.0, "eps": 1.0, "omega": 1.0}


def _preset_elastodynamics(d, params):
    sym = _vector_potential_symbol(d, "elastodynamics", 1.0, 1.0)

    def build(lam, mu, rho, omega, stiffness=None):
        c = isotropic_stiffness(d, lam, mu) if stiffness is None else _as_matrix(stiffness, d * d)
        return _block_diag(-c / omega, omega * _as_matrix(rho, d))

    return sym, build, {"lam": 1.0, "mu": 1.0, "rho": 1.0, "omega": 1.0, "stiffness": None}


def _preset_schrodinger(d, params):
    sym = SymbolMap("schrodinger_freq", TensorShape(((d, 1), (1, 1))), 1, _grad_and_value(d))

    def build(A, energy, V):
        return _block_diag(-_as_matrix(A, d), complex(energy) - complex(V))

    return sym, build, {"A": 0.5, "energy": 1.0, "V": 0.0}


def _preset_thermoacoustics(d, params):
    T0 = float(params.get("T0", 1.0))
    sym = _thermal_symbol(d, "thermoacoustics", 1.0, 1.0, T0)

    def build(mu, mu_bulk, beta_T, alpha0, rho0, Cp, k_th, omega, T0=T0):
        beta0 = beta_T - alpha0**2 * T0 / (rho0 * Cp)
        eye_vec = np.eye(d).reshape(d * d, 1)
        top = 1j * viscosity_tensor(d, mu, mu_bulk) - (eye_vec @ eye_vec.T) / (omega * beta_T)
        L = _block_diag(top, omega * rho0 * np.eye(d), 1j * _as_matrix(k_th, d) * T0,
                        omega * rho0 * Cp * T0 * beta0 / beta_T)
        last = d * d + 2 * d
        L[: d * d, last] = (1j * alpha0 * T0 / beta_T) * eye_vec[:, 0]
        L[last, : d * d] = (-1j * alpha0 * T0 / beta_T) * eye_vec[:, 0]
        return L

    defaults = {"mu": 1.0, "mu_bulk": 1.0, "beta_T": 1.0, "alpha0": 0.5, "rho0": 1.0,
                "Cp": 1.0, "k_th": 1.0, "omega": 1.0, "T0": T0}
    return sym, build, defaults


def _preset_thermoelasticity(d, params):
    T0 = float(params.get("T0", 1.0))
    omega_sym = complex(params.get("omega", 1.0))
    if omega_sym == 0:
        raise PresetError("thermoelasticity symbol needs omega != 0")
    # E = (−iω∇u, −iωu, −∇θ/T0, −θ/T0)
    sym = _thermal_symbol(d, "thermoelasticity", -1j * omega_sym, -1j * omega_sym, T0)

    def build(lam, mu, rho, beta, kappa_th, c, omega, T0=T0, stiffness=None):
        C = isotropic_stiffness(d, lam, mu) if stiffness is None else _as_matrix(stiffness, d * d)
        beta_vec = _as_matrix(beta, d).reshape(d * d)
        L = _block_diag(-C / omega, omega * _as_matrix(rho, d), 1j * T0 * _as_matrix(kappa_th, d),
                        omega * T0 * rho * c)
        last = d * d + 2 * d
        L[: d * d, last] = 1j * T0 * beta_vec
        L[last, : d * d] = -1j * T0 * beta_vec
        return L

    defaults = {"lam": 1.0, "mu": 1.0, "rho": 1.0, "beta": 0.1, "kappa_th": 1.0, "c": 1.0,
                "omega": omega_sym, "T0": T0, "stiffness": None}
    return sym, build, defaults


def _preset_kirchhoff(d, params):
    def ev(k):
        k = _check_k(k, 2)
        s = np.empty((k.shape[0], 5, 1), dtype=complex)
        s[:, :4, 0] = -np.einsum("mi,mj->mij", k, k).reshape(-1, 4)
        s[:, 4, 0] = 1j
        return s

    sym = SymbolMap("kirchhoff_plate", TensorShape(((2, 2), (1, 1))), 1, ev)

    def build(D, nu, h, rho, omega, rigidity=None):
        r = plate_rigidity(D, nu) if rigidity is None else _as_matrix(rigidity, 4)
        return _block_diag(-r / omega, h * omega * rho)

    return sym, build, {"D": 1.0, "nu": 0.3, "h": 1.0, "rho": 1.0, "omega": 1.0, "rigidity": None}


def mindlin_symbol(omega) -> Callable[[np.ndarray], np.ndarray]:
    """Symbol of the 8-component Mindlin E-field for potentials (ψx, ψy, w)."""
    omega = complex(omega)

    def ev(k):
        k = _check_k(k, 2)
        kx, ky = k[:, 0], k[:, 1]
        m = k.shape[0]
        s = np.zeros((m, 8, 3), dtype=complex)
        # −iω ∂_x ψx, −iω ∂_y ψy, −iω(∂_y ψx + ∂_x ψy)
        s[:, 0, 0] = omega * kx
        s[:, 1, 1] = omega * ky
        s[:, 2, 0] = omega * ky
        s[:, 2, 1] = omega * kx
        # −iωψx + iω ∂_x w, −iωψy + iω ∂_y w
        s[:, 3, 0] = -1j * omega
        s[:, 3, 2] = -omega * kx
        s[:, 4, 1] = -1j * omega
        s[:, 4, 2] = -omega * ky
        # −ωψx, −ωψy, −ωw
        s[:, 5, 0] = -omega
        s[:, 6, 1] = -omega
        s[:, 7, 2] = -omega
        return s

    return ev


def _preset_mindlin(d, params):
    omega_sym = complex(params.get("omega", 1.0))
    if omega_sym == 0:
        raise PresetError("mindlin_plate symbol needs omega != 0")
    sym = SymbolMap("mindlin_plate", TensorShape(((5, 1), (2, 1), (1, 1))), 3, mindlin_symbol(omega_sym))

    def build(E, nu, G, kappa, h, rho, omega):
        inertia = omega * rho * h**3 / 12.0
        return _block_diag(-mindlin_stiffness(E, nu, G, kappa, h) / omega, inertia, inertia, omega * rho * h)

    defaults = {"E": 1.0, "nu": 0.3, "G": 1.0 / 2.6, "kappa": 5.0 / 6.0, "h": 0.2, "rho": 1.0,
                "omega": omega_sym}
    return sym, build, defaults


def _preset_dirichlet(d, params):
    sym = SymbolMap("dirichlet_laplacian", TensorShape(((d, 1), (1, 1))), 1, _grad_and_value(d))

    def build(z):
        return _block_diag(np.eye(d), -complex(z))

    return sym, build, {"z": 1.0}


_BUILDERS = {
    "conductivity": _preset_conductivity,
    "acoustics": _preset_acoustics,
    "maxwell": _preset_maxwell,
    "elastodynamics": _preset_elastodynamics,
    "schrodinger_freq": _preset_schrodinger,
    "thermoacoustics": _preset_thermoacoustics,
    "thermoelasticity": _preset_thermoelasticity,
    "kirchhoff_plate": _preset_kirchhoff,
    "mindlin_plate": _preset_mindlin,
    "dirichlet_laplacian": _preset_dirichlet,
}


def default_dimension(name: str) -> int:
    return ALLOWED_D.get(name, (2,))[0]


def build_preset(name: str, d: int | None = None, parameters: dict | None = None) -> PhysicsPreset:
    """Construct a catalog preset.

    ``parameters`` may override the default moduli.  For presets whose
    symbol depends on a modulus (thermoelasticity, Mindlin: ω; thermal
    presets: T0) the value given here fixes the symbol.
    """
    if name not in _BUILDERS:
        raise PresetError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    d = default_dimension(name) if d is None else int(d)
    allowed = ALLOWED_D.get(name, (1, 2, 3))
    if d not in allowed:
        raise PresetError(f"preset {name} does not support d={d} (allowed: {allowed})")
    params = dict(parameters or {})
    sym, build, defaults = _BUILDERS[name](d, params)
    unknown = set(params) - set(defaults)
    if unknown:
        raise PresetError(f"{name}: unknown parameters {sorted(unknown)}")
    defaults = {**defaults, **params}
    return PhysicsPreset(name, d, sym.shape, sym, build, defaults)


# --- phase layouts -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PhaseLayout:
    """Phase labels on a grid; ``labels`` has shape ``grid.sizes`` with values 0..m-1."""

    grid: Grid
    labels: np.ndarray = field(repr=False)
    nphases: int = 2

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.shape != self.grid.sizes:
            raise LayoutError(f"label array shape {labels.shape} does not match grid {self.grid.sizes}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.nphases):
            raise LayoutError(f"phase labels must lie in 0..{self.nphases - 1}")
        labels = labels.astype(np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def indicators(self) -> np.ndarray:
        """χ_i as an (m, *sizes) 0/1 array."""
        return np.stack([(self.labels == i).astype(float) for i in range(self.nphases)])

    def volume_fractions(self) -> np.ndarray:
        return self.indicators.reshape(self.nphases, -1).mean(axis=1)

    @classmethod
    def from_indicators(cls, grid: Grid, chi) -> "PhaseLayout":
        chi = np.asarray(chi, dtype=float)
        if chi.shape[1:] != grid.sizes:
            raise LayoutError(f"indicator shape {chi.shape[1:]} does not match grid {grid.sizes}")
        if not np.all((chi == 0) | (chi == 1)):
            raise LayoutError("indicator functions must be 0/1 valued")
        if not np.all(chi.sum(axis=0) == 1):
            raise LayoutError("indicator functions do not partition the cell (sum of χ_i != 1)")
        return cls(grid, np.argmax(chi, axis=0), nphases=chi.shape[0])


def single_phase(grid: Grid) -> PhaseLayout:
    return PhaseLayout(grid, np.zeros(grid.sizes, dtype=int), nphases=1)


def laminate(grid: Grid, direction: int = 0, fraction: float = 0.5) -> PhaseLayout:
    """Two-phase laminate; phase 0 occupies the first ``fraction`` of the cell along ``direction``."""
    if not 0 <= direction < grid.d:
        raise LayoutError(f"laminate direction {direction} out of range for d={grid.d}")
    if not 0.0 <= fraction <= 1.0:
        raise LayoutError("laminate fraction must lie in [0, 1]")
    n = grid.sizes[direction]
    cut = int(round(fraction * n))
    idx = np.arange(n) >= cut
    shape = [1] * grid.d
    shape[direction] = n
    labels = np.broadcast_to(idx.reshape(shape), grid.sizes).astype(int)
    return PhaseLayout(grid, labels, nphases=2)


def checkerboard(grid: Grid, tiles: int = 2) -> PhaseLayout:
    """Checkerboard with ``tiles`` squares per axis; the tile containing the origin is phase 0."""
    axes = [(np.arange(n) * tiles) // n for n in grid.sizes]
    mesh = np.meshgrid(*axes, indexing="ij")
    return PhaseLayout(grid, (sum(mesh) % 2).astype(int), nphases=2)


def disk_inclusion(grid: Grid, radius: float = 0.25) -> PhaseLayout:
    """Phase 1 is a disk (ball) of ``radius`` (fraction of the smallest cell side) at the cell centre."""
    x = grid.coordinates()
    centre = np.asarray(grid.cell) / 2.0
    r = radius * min(grid.cell)
    inside = np.sum((x - centre) ** 2, axis=1) <= r * r
    return PhaseLayout(grid, inside.reshape(grid.sizes).astype(int), nphases=2)


def load_voxel_csv(grid: Grid, path, nphases: int | None = None) -> PhaseLayout:
    """Voxel import: rows ``i_1, ..., i_d, phase_id``; a non-numeric header row is skipped."""
    labels = np.full(grid.sizes, -1, dtype=int)
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                vals = [int(v) for v in row]
            except ValueError:
                if lineno == 1:
                    continue
                raise LayoutError(f"{path}:{lineno}: non-integer entry in {row}")
            if len(vals) != grid.d + 1:
                raise LayoutError(f"{path}:{lineno}: expected {grid.d} indices and a phase id")
            try:
                labels[tuple(vals[:-1])] = vals[-1]
            except IndexError:
                raise LayoutError(f"{path}:{lineno}: voxel index {vals[:-1]} outside grid {grid.sizes}")
    if np.any(labels < 0):
        raise LayoutError(f"{path}: {int(np.sum(labels < 0))} voxels have no phase assigned")
    m = int(labels.max()) + 1 if nphases is None else int(nphases)
    return PhaseLayout(grid, labels, nphases=m)


def assemble_multiphase_L(preset: PhysicsPreset, layout: PhaseLayout, phase_moduli):
    """Pointwise L(x) = Σ χ_i(x) L_i as an :class:`~spectral_gate.pencil.OperatorField`.

    ``phase_moduli`` is a list of keyword dicts for the preset builder, or of
    ready-made dim×dim matrices.
    """
    from .pencil import OperatorField

    if len(phase_moduli) != layout.nphases:
        raise LayoutError(f"{len(phase_moduli)} phase moduli given for {layout.nphases} phases")
    mats = np.stack([_phase_matrix(preset, m) for m in phase_moduli])
    return OperatorField(layout.grid, preset.shape, mats, layout.labels.ravel())


def _phase_matrix(preset: PhysicsPreset, moduli) -> np.ndarray:
    if isinstance(moduli, dict):
        return preset.phase_tensor(**moduli)
    mat = np.asarray(moduli, dtype=complex)
    if mat.shape != (preset.shape.dim, preset.shape.dim):
        raise PresetError(f"phase matrix shape {mat.shape} does not match dim {preset.shape.dim}")
    return mat


def check_key_identity(preset: PhysicsPreset, grid: Grid, trials: int = 20, seed=0) -> float:
    """Largest normalised |(J, E)| for random E in the E-space and J in its complement."""
    if grid.d != preset.d:
        raise PresetError(f"grid dimension {grid.d} does not match preset dimension {preset.d}")
    pi = build_projection(preset.symbol, grid)
    return verify_subspace_orthogonality(pi, trials, seed)
