"""Scans of parameter space for certified exclusion regions, the small-instance
eigen-oracle, and the quasiperiodic (Bloch) acoustic problem.

Statuses are one-sided: "certified" means a coercivity certificate exists
and the point is outside the generalized spectrum; "uncertified" only means
no certificate was found.  Spectrum membership is asserted by the dense
eigen-oracle alone ("oracle-spectrum").
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .errors import DimensionError, PresetError, SingularModuliError, SoundnessViolation
from .pencil import CoercivityCertificate, OperatorField, OperatorPencil, evaluate_pencil
from .projections import ProjectionOperator
from .solvers import ORACLE_CAP, SubspaceBasis, pencil_matrices
from .translations import CertifierConfig, certify_coercivity

log = logging.getLogger(__name__)

CERTIFIED = "certified"
UNCERTIFIED = "uncertified"
ORACLE = "oracle-spectrum"
UNSCANNED = "unscanned"
STATUSES = (CERTIFIED, UNCERTIFIED, ORACLE, UNSCANNED)
SOUNDNESS_TOL = 1e-6


@dataclass(frozen=True)
class ScanSpec:
    """Rectangular scan of one complex pencil parameter; the others stay fixed.

    By default the last parameter varies and the others are 1 (the first
    parameter can always be normalized to 1 by homogeneity).
    """

    re_range: tuple[float, float] = (-5.0, 5.0)
    im_range: tuple[float, float] = (-5.0, 5.0)
    resolution: tuple[int, int] = (101, 101)
    vary: int = -1
    fixed: tuple[complex, ...] | None = None
    budget: int | None = None

    def axes(self):
        nx, ny = self.resolution
        return np.linspace(*self.re_range, int(nx)), np.linspace(*self.im_range, int(ny))

    def parameters(self, n: int, value: complex) -> np.ndarray:
        z = np.ones(n, dtype=complex) if self.fixed is None else np.asarray(self.fixed, dtype=complex).copy()
        if z.shape != (n,):
            raise DimensionError(f"fixed parameters have length {z.size}, pencil has {n}")
        z[self.vary] = value
        return z


@dataclass
class SpectrumMap:
    re_values: np.ndarray
    im_values: np.ndarray
    status: np.ndarray  # (ny, nx) of status strings; row j is im_values[j]
    certificates: list  # row-major (j, i), CoercivityCertificate or None
    oracle_points: list = field(default_factory=list)  # (z, sigma_min)
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.status.shape

    def points(self):
        """Yield (z, status, certificate) in row-major order (imaginary part slowest)."""
        ny, nx = self.shape
        for j in range(ny):
            for i in range(nx):
                yield complex(self.re_values[i], self.im_values[j]), self.status[j, i], self.certificates[j * nx + i]

    def certified_points(self) -> np.ndarray:
        return np.array([z for z, s, _ in self.points() if s == CERTIFIED], dtype=complex)


def _certify_chunk(args):
    pencil, zs, library, config = args
    out = []
    for z in zs:
        cert = certify_coercivity(evaluate_pencil(pencil, z), library, config)
        out.append(cert)
    return out


def map_spectrum_region(pencil: OperatorPencil, scan: ScanSpec | None = None, library=(),
                        config: CertifierConfig | None = None, workers: int = 1,
                        oracle_points=None, metadata: dict | None = None) -> SpectrumMap:
    """Certify every scan point; points past ``scan.budget`` are left "unscanned".

    ``oracle_points`` (from :func:`eigen_oracle_spectrum`) are attached for
    overlay and checked for soundness by :func:`soundness_check`.
    """
    scan = scan or ScanSpec()
    config = config or CertifierConfig()
    re_vals, im_vals = scan.axes()
    nx, ny = len(re_vals), len(im_vals)
    total = nx * ny
    budget = total if scan.budget is None else min(total, int(scan.budget))
    zs = [scan.parameters(pencil.n, complex(re_vals[k % nx], im_vals[k // nx])) for k in range(budget)]
    library = list(library)
    workers = max(1, int(workers))
    if workers == 1 or budget < 2 * workers:
        certs = _certify_chunk((pencil, zs, library, config))
    else:
        nchunks = min(budget, 8 * workers)
        bounds = np.linspace(0, budget, nchunks + 1).astype(int)
        jobs = [(pencil, zs[a:b], library, config) for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            certs = [c for chunk in pool.map(_certify_chunk, jobs) for c in chunk]
    certs = certs + [None] * (total - budget)
    status = np.empty(total, dtype=object)
    for k in range(total):
        if k >= budget:
            status[k] = UNSCANNED
        else:
            status[k] = CERTIFIED if certs[k] is not None else UNCERTIFIED
    if budget < total:
        log.warning("scan budget %d < %d points; %d points left unscanned", budget, total, total - budget)
    meta = {
        "labels": list(pencil.labels),
        "vary": int(scan.vary),
        "fixed": None if scan.fixed is None else [complex(v) for v in scan.fixed],
        "theta_samples": int(config.theta_samples),
        "library": [T.id for T in library],
    }
    meta.update(metadata or {})
    return SpectrumMap(re_vals, im_vals, status.reshape(ny, nx), certs, list(oracle_points or []), meta)


def soundness_check(smap: SpectrumMap, pencil: OperatorPencil | None = None, scan: ScanSpec | None = None,
                    library=(), config: CertifierConfig | None = None, tol: float = SOUNDNESS_TOL) -> None:
    """Raise :class:`SoundnessViolation` if a certified point lies within ``tol`` of an oracle point.

    With ``pencil`` given, every oracle point inside the scan window is also
    re-certified directly; a certificate there is a violation too.
    """
    cert_pts = smap.certified_points()
    for z, _ in smap.oracle_points:
        if cert_pts.size and np.min(np.abs(cert_pts - z)) <= tol:
            raise SoundnessViolation(f"certified scan point within {tol} of oracle spectrum point {z}")
    if pencil is None:
        return
    scan = scan or ScanSpec()
    for z, _ in smap.oracle_points:
        cert = certify_coercivity(evaluate_pencil(pencil, scan.parameters(pencil.n, z)), library, config)
        if cert is not None:
            raise SoundnessViolation(f"oracle spectrum point {z} received a certificate {cert.to_record()}")


# --- eigen-oracle ------------------------------------------------------------


def eigen_oracle_spectrum(pencil: OperatorPencil, pi: ProjectionOperator, cap: int = ORACLE_CAP,
                          scan: ScanSpec | None = None, dedupe: float = 1e-10) -> list[tuple[complex, float]]:
    """Values of the varied parameter where Γ₁L(z)Γ₁ is singular on the E-space.

    When the two E-space matrices add up to the identity (phase tensors
    equal to I, so M₁ + M₂ = Γ₁) the Hermitian route applies: K = M₂ has eigenvalues
    μ ∈ [0, 1] and the spectrum is z₂/z₁ = 1 − 1/μ for μ > 1e-12.  Other
    two-parameter pencils fall back to the generalized eigenproblem
    M_fixed v = −z M_vary v.  Returns (z, σ_min(M(z))) pairs sorted by value.
    """
    scan = scan or ScanSpec()
    if pencil.n != 2:
        raise DimensionError("the eigen-oracle handles two-parameter pencils")
    basis, mats = pencil_matrices(pencil, pi, cap)
    if basis.size == 0:
        return []
    vary = scan.vary % 2
    fixed_val = complex(scan.parameters(2, 0)[1 - vary])
    m_fix, m_var = mats[1 - vary], mats[vary]
    ident = np.eye(basis.size)
    herm = (np.allclose(m_fix + m_var, ident, atol=1e-12)
            and np.allclose(m_var, m_var.conj().T, atol=1e-12))
    if herm:
        mu = np.linalg.eigvalsh(0.5 * (m_var + m_var.conj().T))
        mu = mu[mu > 1e-12]
        vals = fixed_val * (1.0 - 1.0 / mu)
    else:
        w = scipy.linalg.eigvals(fixed_val * m_fix, -m_var)
        vals = w[np.isfinite(w)]
    vals = np.sort_complex(np.asarray(vals, dtype=complex))
    out = []
    for v in vals:
        if out and abs(v - out[-1]) <= dedupe * max(1.0, abs(v)):
            continue
        out.append(complex(v))
    result = []
    for v in out:
        z = scan.parameters(2, v)
        m = z[0] * mats[0] + z[1] * mats[1]
        sv = np.linalg.svd(m, compute_uv=False)
        result.append((v, float(sv[-1])))
    return result


# --- Bloch problem -----------------------------------------------------------


def _acoustic_moduli(preset, moduli: dict):
    params = dict(preset.defaults)
    params.update(moduli)
    d = preset.d
    rho = np.asarray(params["rho"], dtype=complex)
    rho = rho * np.eye(d) if rho.ndim == 0 else rho.reshape(d, d)
    return rho, complex(params["kappa"]), complex(params["omega"])


def bloch_phase_parts(rho: np.ndarray, kappa: complex, k) -> tuple[np.ndarray, np.ndarray]:
    """(P, Q) with L̃(ω) = P/ω + ωQ for one phase at wavevector k.

    L̃ = Φ†LΦ, Φ = [[I, ik], [0, 1]]: blocks −(ωρ)⁻¹, −i(ωρ)⁻¹k, ikᵀ(ωρ)⁻¹ and
    ω/κ − kᵀ(ωρ)⁻¹k.
    """
    d = rho.shape[0]
    k = np.asarray(k, dtype=float).reshape(d)
    if np.linalg.svd(rho, compute_uv=False)[-1] <= 1e-12 * np.abs(rho).max():
        raise SingularModuliError("density matrix is singular")
    if kappa == 0:
        raise SingularModuliError("bulk modulus must be nonzero")
    rinv = np.linalg.inv(rho)
    p = np.zeros((d + 1, d + 1), dtype=complex)
    p[:d, :d] = -rinv
    p[:d, d] = -1j * rinv @ k
    p[d, :d] = 1j * k @ rinv
    p[d, d] = -k @ rinv @ k
    q = np.zeros((d + 1, d + 1), dtype=complex)
    q[d, d] = 1.0 / kappa
    return p, q


def bloch_assemble(preset, layout, phase_moduli, k) -> OperatorField:
    """Shifted acoustic coefficient L̃(x) on the periodic cell for Bloch wavevector k."""
    if preset.name != "acoustics":
        raise PresetError(f"Bloch assembly needs the acoustics preset, got {preset.name}")
    if len(phase_moduli) != layout.nphases:
        raise DimensionError(f"{len(phase_moduli)} moduli for {layout.nphases} phases")
    mats = []
    for moduli in phase_moduli:
        rho, kappa, omega = _acoustic_moduli(preset, moduli)
        if omega == 0:
            raise SingularModuliError("frequency must be nonzero")
        p, q = bloch_phase_parts(rho, kappa, k)
        mats.append(p / omega + omega * q)
    return OperatorField(layout.grid, preset.shape, np.stack(mats), layout.labels.ravel())


def bloch_pencil(preset, layout, phase_moduli, k) -> OperatorPencil:
    """Two-term pencil in (1/ω, ω) at fixed k; ``phase_moduli`` omit ω."""
    parts = []
    for moduli in phase_moduli:
        rho, kappa, _ = _acoustic_moduli(preset, moduli)
        parts.append(bloch_phase_parts(rho, kappa, k))
    p = np.stack([a for a, _ in parts])
    q = np.stack([b for _, b in parts])
    return OperatorPencil(layout.grid, preset.shape, np.stack([p, q]), layout.labels.ravel(), ("1/omega", "omega"))


def k_path_points(vertices, samples_per_segment: int):
    """Points along a polyline and their cumulative arc-length parameter."""
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    if len(v) == 1:
        return v.copy(), np.zeros(1)
    pts = [v[0]]
    for a, b in zip(v[:-1], v[1:]):
        s = np.arange(1, samples_per_segment + 1) / samples_per_segment
        pts.extend(a + (b - a) * t for t in s)
    pts = np.asarray(pts)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    return pts, arc


@dataclass
class BandRow:
    s: float
    k: tuple
    omega: complex
    certified: bool
    sigma_min: float
    certificate: CoercivityCertificate | None = None


@dataclass
class BandReport:
    rows: list = field(default_factory=list)
    modes: list = field(default_factory=list)  # (s, k, omega, sigma_min) refined near-singular points
    threshold: float = 1e-8


def _sigma_min(mp, mq, omega) -> float:
    return float(np.linalg.svd(mp / omega + omega * mq, compute_uv=False)[-1])


def _refine_minimum(mp, mq, a, b, tol):
    """Minimize σ_min on the segment [a, b]; a second pass re-centres the
    variable on the first minimizer so the relative tolerance does not limit
    the absolute accuracy."""
    def f(t):
        return _sigma_min(mp, mq, a + t * (b - a))

    res = minimize_scalar(f, bounds=(0.0, 1.0), method="bounded", options={"xatol": tol})
    t0, delta = float(res.x), 1e-6
    res2 = minimize_scalar(lambda u: f(t0 + u), bounds=(-delta, delta), method="bounded",
                           options={"xatol": tol})
    t, val = (t0 + float(res2.x), float(res2.fun)) if res2.fun < res.fun else (t0, float(res.fun))
    return complex(a + t * (b - a)), val


def bloch_scan(preset, layout, phase_moduli, k_vertices, omegas, samples_per_segment: int = 8,
               config: CertifierConfig | None = None, threshold: float = 1e-8, cap: int = ORACLE_CAP,
               refine_tol: float = 1e-12) -> BandReport:
    """Certificate and near-singularity channels at every sampled (k, ω).

    Local minima of σ_min along the ω samples are refined with a bounded
    scalar search between their neighbours; refined points with
    σ_min < ``threshold`` are reported as detected modes.
    """
    from .projections import build_projection

    config = config or CertifierConfig()
    omegas = np.asarray(list(omegas), dtype=complex)
    report = BandReport(threshold=threshold)
    if omegas.size == 0:
        return report
    pi = build_projection(preset.symbol, layout.grid)
    basis = SubspaceBasis(pi, cap)
    pts, arc = k_path_points(k_vertices, samples_per_segment)
    for s, k in zip(arc, pts):
        pen = bloch_pencil(preset, layout, phase_moduli, k)
        mp, mq = basis.operator_matrices([pen.coefficient(0), pen.coefficient(1)])
        sig = np.empty(omegas.size)
        for j, w in enumerate(omegas):
            cert = certify_coercivity(evaluate_pencil(pen, [1.0 / w, w]), (), config)
            sig[j] = _sigma_min(mp, mq, w)
            report.rows.append(BandRow(float(s), tuple(float(x) for x in k), complex(w), cert is not None,
                                       float(sig[j]), cert))
        for j in range(1, omegas.size - 1):
            if not (sig[j] <= sig[j - 1] and sig[j] <= sig[j + 1]):
                continue
            w, val = _refine_minimum(mp, mq, omegas[j - 1], omegas[j + 1], refine_tol)
            if val >= threshold:
                continue
            if report.modes and report.modes[-1][0] == s and abs(report.modes[-1][2] - w) <= 1e-9 * abs(w):
                continue
            report.modes.append((float(s), tuple(float(x) for x in k), w, val))
    return report
