"""Green's operator solvers.

Sign convention used throughout: E = G h is the field in the E-space with
Γ₁ L Γ₁ E = Γ₁ h, i.e. J = L E − h lies in the complementary J-space.

* :func:`neumann_solve` sums the shifted series with c = (β²/α) e^{−iθ}.
* :func:`dense_oracle_solve` assembles Γ₁LΓ₁ on an orthonormal E-space basis.
* :func:`inverse_form_solve` swaps the roles of E and J and uses L⁻¹.
* :func:`splitting_solve` works on the doubled space built from L = L_A + L_B.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CertificateError,
    DimensionError,
    GeneralizedSpectrumHit,
    OracleCapExceeded,
    SingularModuliError,
)
from .fields import Field, fft_values, inner_product, norm, random_field
from .pencil import CoercivityCertificate, OperatorField, OperatorPencil, combine, evaluate_pencil
from .projections import ProjectionOperator, direct_sum, project_values

log = logging.getLogger(__name__)

ORACLE_CAP = 4096
SINGULAR_RTOL = 1e-12


@dataclass
class SolveReport:
    solution: Field
    iterations: int
    history: list = field(default_factory=list)
    shift: complex = 0j
    predicted_ratio: float = 0.0
    converged: bool = True

    def observed_ratios(self) -> np.ndarray:
        """Successive increment ratios ‖term_{j+1}‖ / ‖term_j‖."""
        h = np.asarray(self.history, dtype=float)
        if h.size < 2:
            return np.zeros(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return h[1:] / h[:-1]

    def to_record(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "shift": [self.shift.real, self.shift.imag],
            "predicted_ratio": self.predicted_ratio,
            "history": [float(v) for v in self.history],
        }


def _check_operator(L: OperatorField, pi: ProjectionOperator):
    if L.grid != pi.grid or L.shape.dim != pi.shape.dim:
        raise DimensionError(
            f"operator (grid {L.grid.sizes}, dim {L.shape.dim}) does not match projector "
            f"(grid {pi.grid.sizes}, dim {pi.shape.dim})"
        )


def neumann_solve(L: OperatorField, pi: ProjectionOperator, h: Field, cert: CoercivityCertificate,
                  tol: float = 1e-12, max_iter: int = 10_000) -> SolveReport:
    """Partial sums E_m = Σ_{j≤m} [Γ₁(I − L/c)Γ₁]^j Γ₁h / c.

    Each term is at most r = sqrt(1 − (α/β)²) times the previous one, so the
    neglected tail is bounded by ‖term_m‖ r/(1 − r).  Summation stops once that
    bound is at most ``tol``·‖E_m‖; ``iterations`` is then the index of the last
    term added.  Running out of iterations returns a report with
    ``converged=False`` (and logs it).
    """
    _check_operator(L, pi)
    if not cert.alpha > 0:
        raise CertificateError(f"coercivity constant must be positive, got α = {cert.alpha}")
    c = cert.shift
    r = cert.predicted_ratio
    tail = r / (1.0 - r) if r < 1.0 else np.inf
    n = L.grid.npoints

    def size(v):
        return float(np.sqrt(np.vdot(v, v).real / n))

    term = project_values(pi, h.values) / c
    total = term.copy()
    history = [size(term)]
    it = 0
    converged = history[0] * tail <= tol * size(total)
    while not converged and it < max_iter:
        term = term - project_values(pi, L.apply_values(term)) / c
        total = total + term
        it += 1
        history.append(size(term))
        converged = history[-1] * tail <= tol * size(total)
    if not converged:
        log.warning("series did not converge in %d iterations (last increment %.3e)", max_iter, history[-1])
    return SolveReport(h.like(total), it, history, complex(c), r, converged)


# --- dense oracle ------------------------------------------------------------


def _fft_batch(values: np.ndarray, d: int, inverse: bool = False) -> np.ndarray:
    """Unitary FFT over axes 1..d of a batch (B, *sizes, dim)."""
    f = np.fft.ifftn if inverse else np.fft.fftn
    return f(values, axes=tuple(range(1, d + 1)), norm="ortho")


class SubspaceBasis:
    """Orthonormal basis of the discrete E-space.

    Basis vector j is the inverse transform of ``vecs[j]`` placed at lattice
    wavevector ``kidx[j]``; ``vecs`` are the orthonormal columns of the range
    of S(k).
    """

    def __init__(self, pi: ProjectionOperator, cap: int = ORACLE_CAP):
        size = pi.space_dim
        if size > cap:
            raise OracleCapExceeded(f"E-space dimension {size} exceeds the oracle cap {cap}")
        self.pi = pi
        self.size = size
        ks = np.repeat(np.arange(pi.grid.npoints), pi.ranks)
        cols = np.concatenate([np.arange(r) for r in pi.ranks]) if size else np.zeros(0, dtype=int)
        self.kidx = ks.astype(np.int64)
        self.vecs = pi.basis[self.kidx, :, cols.astype(np.int64)] if size else np.zeros((0, pi.shape.dim))

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Real-space values (*sizes, dim) of Σ_j coeffs[j] b_j."""
        g, dim = self.pi.grid, self.pi.shape.dim
        hat = np.zeros((g.npoints, dim), dtype=complex)
        np.add.at(hat, self.kidx, self.vecs * np.asarray(coeffs, dtype=complex)[:, None])
        return np.fft.ifftn(hat.reshape(g.sizes + (dim,)), axes=tuple(range(g.d)), norm="ortho")

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Coordinates of Γ₁P in the basis; ``values`` has shape (*sizes, dim)."""
        g = self.pi.grid
        hat = fft_values(values, g).reshape(g.npoints, -1)
        return np.einsum("jc,jc->j", self.vecs.conj(), hat[self.kidx])

    def _columns(self) -> np.ndarray:
        """All basis vectors in real space, shape (n, N, dim)."""
        g, dim = self.pi.grid, self.pi.shape.dim
        hat = np.zeros((self.size, g.npoints, dim), dtype=complex)
        hat[np.arange(self.size), self.kidx] = self.vecs
        out = _fft_batch(hat.reshape((self.size,) + g.sizes + (dim,)), g.d, inverse=True)
        return out.reshape(self.size, g.npoints, dim)

    def operator_matrices(self, ops) -> list[np.ndarray]:
        """Matrices of Γ₁LΓ₁ on the E-space for each operator field in ``ops``."""
        g, dim = self.pi.grid, self.pi.shape.dim
        phi = self._columns()
        out = []
        for L in ops:
            _check_operator(L, self.pi)
            y = np.einsum("nij,snj->sni", L.dense(), phi)
            fy = _fft_batch(y.reshape((self.size,) + g.sizes + (dim,)), g.d).reshape(self.size, g.npoints, dim)
            # M[r, s] = <b_r, L b_s>
            out.append(np.einsum("rc,src->rs", self.vecs.conj(), fy[:, self.kidx]))
        return out

    def operator_matrix(self, L: OperatorField) -> np.ndarray:
        return self.operator_matrices([L])[0]


def check_singular(m: np.ndarray, rtol: float = SINGULAR_RTOL):
    """Raise :class:`GeneralizedSpectrumHit` when σ_min ≤ rtol·σ_max; return (σ_min, σ_max)."""
    if m.size == 0:
        return np.inf, np.inf
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= rtol * sv[0]:
        raise GeneralizedSpectrumHit(sv[-1], sv[0])
    return float(sv[-1]), float(sv[0])


def dense_oracle_solve(L: OperatorField, pi: ProjectionOperator, h: Field, cap: int = ORACLE_CAP,
                       basis: SubspaceBasis | None = None) -> Field:
    """Solve Γ₁LΓ₁E = Γ₁h exactly on the discrete E-space."""
    _check_operator(L, pi)
    basis = basis or SubspaceBasis(pi, cap)
    if basis.size == 0:
        return h.like(np.zeros_like(h.values))
    m = basis.operator_matrix(L)
    check_singular(m)
    e = np.linalg.solve(m, basis.analyze(h.values))
    return h.like(basis.synthesize(e))


def pencil_matrices(pencil: OperatorPencil, pi: ProjectionOperator, cap: int = ORACLE_CAP):
    """(basis, [M_i]) with M(z) = Σ z_i M_i the E-space matrix of Γ₁L(z)Γ₁."""
    basis = SubspaceBasis(pi, cap)
    return basis, basis.operator_matrices([pencil.coefficient(i) for i in range(pencil.n)])


# --- inverse form and splitting ----------------------------------------------


def _auto_certificate(L: OperatorField, what: str):
    from .translations import certify_coercivity

    cert = certify_coercivity(L)
    if cert is None:
        raise CertificateError(f"no coercivity certificate found for {what}")
    return cert


def inverse_form_solve(L: OperatorField, pi: ProjectionOperator, h: Field, cert=None,
                       tol: float = 1e-12, max_iter: int = 10_000, report: bool = False):
    """Solve Γ₂L⁻¹Γ₂J = −Γ₂L⁻¹h on the J-space, then E = L⁻¹(J + h).

    ``cert`` is a coercivity certificate for L⁻¹ on the J-space; one is
    searched for when omitted.
    """
    _check_operator(L, pi)
    linv = L.inverse()
    cert = cert or _auto_certificate(linv, "L⁻¹ on the J-space")
    h_tilde = h.like(-linv.apply_values(h.values))
    rep = neumann_solve(linv, pi.complement(), h_tilde, cert, tol, max_iter)
    if not rep.converged:
        raise CertificateError(f"inverse-form series did not converge in {max_iter} iterations")
    e = h.like(linv.apply_values(rep.solution.values + h.values))
    return (e, rep) if report else e


def splitting_operator(L_A: OperatorField, L_B: OperatorField, c_E=1.0, c_J=1.0, d_E=1.0, d_J=1.0) -> OperatorField:
    """Doubled-space coefficient acting on ((J+J')/d_J, (E−E')/d_E)."""
    for name, v in (("c_E", c_E), ("c_J", c_J), ("d_E", d_E), ("d_J", d_J)):
        if complex(v) == 0:
            raise ValueError(f"splitting factor {name} must be nonzero")
    if L_A.grid != L_B.grid or L_A.shape != L_B.shape:
        raise DimensionError("L_A and L_B must share grid and shape")
    index, (pa, pb) = combine(L_A, L_B)
    sv = np.linalg.svd(pa, compute_uv=False)
    if np.any(sv[:, -1] <= 1e-12 * sv[:, 0]):
        raise SingularModuliError("L_A is singular at some grid points")
    ainv = np.linalg.inv(pa)
    n = pa.shape[1]
    big = np.zeros((pa.shape[0], 2 * n, 2 * n), dtype=complex)
    big[:, :n, :n] = c_E * d_J * ainv
    big[:, :n, n:] = -c_E * d_E * ainv @ pb
    big[:, n:, :n] = c_J * d_J * pb @ ainv
    big[:, n:, n:] = c_J * d_E * (pa - pb @ ainv @ pb)
    return OperatorField(L_A.grid, L_A.shape.doubled(), big, index)


def splitting_solve(L_A: OperatorField, L_B: OperatorField, pi: ProjectionOperator, h: Field,
                    c_E=1.0, c_J=1.0, d_E=1.0, d_J=1.0, cert=None,
                    tol: float = 1e-12, max_iter: int = 10_000) -> Field:
    """Solve (L_A + L_B)-problem through the doubled-space formulation with h' = −h.

    The doubled unknown lives in J ⊕ E; its source is (0, 2c_J h).  From the
    solution, E + E' = (doubled residual, first slot)/c_E and E − E' = d_E ×
    (second slot), so E is their average.
    """
    _check_operator(L_A, pi)
    big = splitting_operator(L_A, L_B, c_E, c_J, d_E, d_J)
    pi2 = direct_sum(pi.complement(), pi)
    cert = cert or _auto_certificate(big, "the doubled-space operator")
    n = pi.shape.dim
    src = np.concatenate([np.zeros_like(h.values), 2.0 * complex(c_J) * h.values], axis=-1)
    h2 = Field(h.grid, big.shape, src)
    rep = neumann_solve(big, pi2, h2, cert, tol, max_iter)
    if not rep.converged:
        raise CertificateError(f"doubled-space series did not converge in {max_iter} iterations")
    u = rep.solution.values
    resid = big.apply_values(u) - src
    e_plus = resid[..., :n] / complex(c_E)
    e_minus = complex(d_E) * u[..., n:]
    return h.like(0.5 * (e_plus + e_minus))


# --- analytic properties -----------------------------------------------------


PROPERTIES = ("herglotz_im", "herglotz_re", "homogeneity", "normalization")
PROPERTY_TOL = {"herglotz_im": 1e-10, "herglotz_re": 1e-10, "homogeneity": 1e-10, "normalization": 1e-12}
HOMOGENEITY_LAMBDAS = (2.0, 1j, 2.0 + 1j)


@dataclass
class PropertyReport:
    property: str
    samples: int
    worst: float
    tolerance: float
    passed: bool
    values: list = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "property": self.property,
            "samples": self.samples,
            "worst": self.worst,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def green_quadratic_form(L: OperatorField, pi: ProjectionOperator, h: Field, cap: int = ORACLE_CAP) -> complex:
    """h† G h = Σ_x conj(h(x)) · (G h)(x) / N."""
    e = dense_oracle_solve(L, pi, h, cap)
    return inner_product(e, h)


def _sample_z(rng, n: int, prop: str) -> np.ndarray:
    a = rng.uniform(-2.0, 2.0, n)
    b = rng.uniform(0.1, 2.0, n)
    if prop == "herglotz_im":
        return a + 1j * b
    return b + 1j * a


def _hypothesis_margin(L: OperatorField, prop: str) -> float:
    mats = L.used()
    if prop == "herglotz_im":
        part = (mats - np.conj(np.swapaxes(mats, 1, 2))) / 2j
    else:
        part = (mats + np.conj(np.swapaxes(mats, 1, 2))) / 2
    return float(np.linalg.eigvalsh(part)[:, 0].min())


def analytic_property_check(pencil: OperatorPencil, pi: ProjectionOperator, prop: str, samples: int = 10,
                            seed=0, cap: int = ORACLE_CAP) -> PropertyReport:
    """Sample pencil parameters satisfying the property's hypothesis and check it.

    Herglotz samples draw z with Im z_i > 0 (resp. Re z_i > 0); this gives
    Im L > 0 (resp. Re L > 0) when the coefficient fields are positive
    semidefinite, and samples violating the hypothesis are redrawn.
    Solves use the dense oracle, so the grid must fit under ``cap``.
    """
    if prop not in PROPERTIES:
        raise ValueError(f"unknown property {prop!r}; choose from {PROPERTIES}")
    rng = np.random.default_rng(seed)
    tol = PROPERTY_TOL[prop]
    basis = SubspaceBasis(pi, cap)
    mats = basis.operator_matrices([pencil.coefficient(i) for i in range(pencil.n)])
    values = []
    for _ in range(int(samples)):
        h = random_field(pi.grid, pi.shape, rng)
        hn2 = norm(h) ** 2
        hc = basis.analyze(h.values)
        if prop == "normalization":
            ident = OperatorField.constant(pi.grid, pi.shape, np.eye(pi.shape.dim))
            g = dense_oracle_solve(ident, pi, h, basis=basis)
            values.append(norm(g - h.like(project_values(pi, h.values))) / np.sqrt(hn2))
            continue
        for _attempt in range(100):
            z = _sample_z(rng, pencil.n, prop)
            if prop not in ("herglotz_im", "herglotz_re") or _hypothesis_margin(evaluate_pencil(pencil, z), prop) > 0:
                break
        else:
            raise ValueError(f"could not sample parameters satisfying the {prop} hypothesis")
        m = sum(zi * mi for zi, mi in zip(z, mats))
        check_singular(m)
        e = np.linalg.solve(m, hc)
        if prop == "homogeneity":
            worst = 0.0
            for lam in HOMOGENEITY_LAMBDAS:
                el = np.linalg.solve(lam * m, hc)
                diff = basis.synthesize(el - e / lam)
                worst = max(worst, float(np.sqrt(np.vdot(diff, diff).real / pi.grid.npoints)) / np.sqrt(hn2))
            values.append(worst)
            continue
        q = inner_product(h.like(basis.synthesize(e)), h) / hn2
        values.append(q.imag if prop == "herglotz_im" else q.real)
    if not values:
        worst = 0.0
    elif prop == "herglotz_re":
        worst = float(min(values))
    else:
        worst = float(max(values))
    passed = worst >= -tol if prop == "herglotz_re" else worst <= tol
    return PropertyReport(prop, int(samples), worst, tol, bool(passed), values)
