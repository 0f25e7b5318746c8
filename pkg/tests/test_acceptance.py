"""Acceptance criteria, one test each.  Every test prints a PASS/FAIL line
(collected again in the terminal summary) before asserting."""
import itertools
import time

import numpy as np
import pytest

from spectral_gate.catalog import (
    PRESET_NAMES,
    assemble_multiphase_L,
    build_preset,
    check_key_identity,
    checkerboard,
    default_dimension,
    disk_inclusion,
    laminate,
    single_phase,
)
from spectral_gate.fields import Grid, TensorShape, export_field_csv, inner_product, norm, random_field
from spectral_gate.io import band_csv_text, map_csv_text, modes_csv_text
from spectral_gate.pencil import CoercivityCertificate, OperatorField, hermitian_part, multiphase_pencil
from spectral_gate.projections import apply_gamma1, build_projection
from spectral_gate.solvers import (
    dense_oracle_solve,
    green_quadratic_form,
    inverse_form_solve,
    neumann_solve,
    splitting_solve,
)
from spectral_gate.spectrum import (
    CERTIFIED,
    UNCERTIFIED,
    ScanSpec,
    bloch_scan,
    eigen_oracle_spectrum,
    k_path_points,
    map_spectrum_region,
    soundness_check,
)
from spectral_gate.translations import (
    CertifierConfig,
    Sampling,
    Translation,
    builtin_library,
    certify_coercivity,
    rotation_translation_2d,
    verify_translation,
    zero_translation,
)

V2 = TensorShape(((2, 1),))
G8 = Grid((8, 8))
COND = build_preset("conductivity")
ACOUSTIC = build_preset("acoustics")

IDENTITY_TOL = 1e-12
ALGEBRA_TOL = 1e-12
SERIES_TOL = 1e-8
RATE_SLACK = 0.05
NORMALIZATION_TOL = 1e-12
HOMOGENEITY_TOL = 1e-10
HERGLOTZ_TOL = 1e-10
SOUNDNESS_DIST = 1e-6
RAY_MARGIN = 0.1
QSTAR_TOL = 1e-10
DISPERSION_RTOL = 1e-6


def rel(a, b):
    return norm(a - b) / norm(b)


def preset_grid(name):
    return Grid((16,) * default_dimension(name))


# --- criterion runners shared with the determinism check ---------------------


def run_series(tmp_path):
    L = assemble_multiphase_L(COND, laminate(G8, 0, 0.5), [{"sigma": 1.0}, {"sigma": 4.0}])
    pi = build_projection(COND.symbol, G8)
    h = random_field(G8, V2, 0)
    cert = certify_coercivity(L)
    rep = neumann_solve(L, pi, h, cert)
    tmp_path.mkdir(parents=True, exist_ok=True)
    path = tmp_path / "series_solution.csv"
    export_field_csv(rep.solution, path)
    return L, pi, h, cert, rep, path.read_bytes()


def run_map():
    scan = ScanSpec((-5.0, 5.0), (-5.0, 5.0), (101, 101))
    pen_lam = multiphase_pencil(laminate(G8), [np.eye(2), np.eye(2)], V2)
    pen_chk = multiphase_pencil(checkerboard(G8), [np.eye(2), np.eye(2)], V2)
    pi = build_projection(COND.symbol, G8)
    oracle = eigen_oracle_spectrum(pen_lam, pi, scan=scan) + eigen_oracle_spectrum(pen_chk, pi, scan=scan)
    lib = builtin_library(COND.symbol, 2)
    smap = map_spectrum_region(pen_lam, scan, lib, CertifierConfig(), oracle_points=oracle)
    return scan, pen_lam, lib, smap, map_csv_text(smap).encode()


BLOCH_RHO, BLOCH_KAPPA = 2.0, 3.0
BLOCH_PATH = [[0.0, 0.0], [np.pi, 0.0], [np.pi, np.pi], [0.0, 0.0]]
BLOCH_OMEGAS = np.linspace(0.05, 8.0, 160)


def run_bloch(imag=0.0):
    rep = bloch_scan(ACOUSTIC, single_phase(G8), [dict(rho=BLOCH_RHO, kappa=BLOCH_KAPPA)], BLOCH_PATH,
                     BLOCH_OMEGAS + 1j * imag, samples_per_segment=4, config=CertifierConfig(theta_samples=180))
    return rep, (band_csv_text(rep) + modes_csv_text(rep)).encode()


_FIRST_RUN = {}


# --- criteria ----------------------------------------------------------------


def test_criterion_01_orthogonality_identities(acceptance):
    start = time.perf_counter()
    worst = {}
    for name in PRESET_NAMES:
        worst[name] = check_key_identity(build_preset(name), preset_grid(name), trials=20, seed=1)
    elapsed = time.perf_counter() - start
    top = max(worst, key=worst.get)
    ok = worst[top] <= IDENTITY_TOL and elapsed < 30.0
    acceptance(1, "orthogonality of E- and J-spaces", ok,
               f"max {worst[top]:.2e} ({top}) <= {IDENTITY_TOL:.0e}, {elapsed:.1f}s < 30s")
    assert ok


def test_criterion_02_projection_algebra(acceptance):
    worst = 0.0
    for name in PRESET_NAMES:
        preset = build_preset(name)
        grid = preset_grid(name)
        pi = build_projection(preset.symbol, grid)
        m = pi.matrices
        worst = max(worst, float(np.abs(m @ m - m).max()), float(np.abs(m - np.conj(np.swapaxes(m, 1, 2))).max()))
        for seed in range(3):
            p = random_field(grid, preset.shape, 10 + seed)
            q = random_field(grid, preset.shape, 20 + seed)
            g1 = apply_gamma1(pi, p)
            worst = max(worst, norm(apply_gamma1(pi, g1) - g1) / norm(p))
            adj = abs(inner_product(g1, q) - inner_product(p, apply_gamma1(pi, q))) / (norm(p) * norm(q))
            worst = max(worst, adj)
    ok = worst <= ALGEBRA_TOL
    acceptance(2, "idempotence and self-adjointness of the projector", ok, f"max defect {worst:.2e} <= 1e-12")
    assert ok


def test_criterion_03_series_vs_oracle(acceptance, tmp_path):
    start = time.perf_counter()
    L, pi, h, cert, rep, csv = run_series(tmp_path)
    oracle = dense_oracle_solve(L, pi, h)
    elapsed = time.perf_counter() - start
    _FIRST_RUN["series"] = csv
    err = rel(rep.solution, oracle)
    bound = np.sqrt(1 - (1 / 4) ** 2) + RATE_SLACK
    late = float(np.max(rep.observed_ratios()[-20:]))
    ok = (rep.converged and cert.alpha == pytest.approx(1.0) and cert.beta == 4.0
          and err <= SERIES_TOL and late <= bound and elapsed < 5.0)
    acceptance(3, "Neumann series vs dense oracle", ok,
               f"rel err {err:.2e} <= 1e-8, late ratio {late:.4f} <= {bound:.4f}, "
               f"{rep.iterations} terms, {elapsed:.2f}s < 5s")
    assert ok


def test_criterion_04_normalization_and_homogeneity(acceptance):
    norm_err = 0.0
    hom_err = 0.0
    for preset, layout, moduli in [
        (COND, laminate(G8), [{"sigma": 1.0}, {"sigma": 4.0}]),
        (ACOUSTIC, checkerboard(G8), [dict(rho=-1 + 0.2j, kappa=1 + 0.1j), dict(rho=-2 + 0.1j, kappa=0.5 + 0.2j)]),
    ]:
        pi = build_projection(preset.symbol, G8)
        h = random_field(G8, preset.shape, 4)
        ident = OperatorField.constant(G8, preset.shape, np.eye(preset.shape.dim))
        g1 = apply_gamma1(pi, h)
        series = neumann_solve(ident, pi, h, CoercivityCertificate(0.0, 1.0, 1.0)).solution
        norm_err = max(norm_err, norm(series - g1) / norm(h), norm(dense_oracle_solve(ident, pi, h) - g1) / norm(h))
        L = assemble_multiphase_L(preset, layout, moduli)
        base = dense_oracle_solve(L, pi, h)
        for lam in (2.0, 1j, 2.0 + 1j):
            scaled = L * lam
            hom_err = max(hom_err, norm(dense_oracle_solve(scaled, pi, h) - base * (1 / lam)) / norm(h))
            cert = certify_coercivity(scaled)
            if cert is not None:
                s = neumann_solve(scaled, pi, h, cert, tol=1e-13).solution
                hom_err = max(hom_err, norm(s - base * (1 / lam)) / norm(h))
    ok = norm_err <= NORMALIZATION_TOL and hom_err <= HOMOGENEITY_TOL
    acceptance(4, "normalization G(I)h = Γ₁h and homogeneity G(λL) = G(L)/λ", ok,
               f"normalization {norm_err:.2e} <= 1e-12, homogeneity {hom_err:.2e} <= 1e-10")
    assert ok


def _random_layout(rng):
    kind = rng.integers(3)
    if kind == 0:
        return laminate(G8, int(rng.integers(2)), float(rng.choice([0.25, 0.5, 0.75])))
    if kind == 1:
        return checkerboard(G8, int(rng.choice([2, 4])))
    return disk_inclusion(G8, float(rng.uniform(0.15, 0.4)))


def _random_passive(rng, preset, real_part):
    """Phase moduli with Im L_i > 0 (or Re L_i > 0 when ``real_part``)."""
    a, b = rng.uniform(-2, 2), rng.uniform(0.1, 2)
    if preset.name == "conductivity":
        return {"sigma": complex(b, a) if real_part else complex(a, b)}
    if real_part:
        # Re(−1/ρ) > 0 needs Re ρ < 0; Re(1/κ) > 0 needs Re κ > 0; ω = 1
        return dict(rho=complex(-b, a), kappa=complex(rng.uniform(0.1, 2), rng.uniform(-2, 2)), omega=1.0)
    # real positive ρ, κ and Im ω > 0
    return dict(rho=rng.uniform(0.2, 3), kappa=rng.uniform(0.2, 3), omega=complex(a, b))


def _definiteness(L, real_part):
    part = hermitian_part(L.matrices) if real_part else hermitian_part(-1j * L.matrices)
    return float(np.linalg.eigvalsh(part)[:, 0].min())


def test_criterion_05_herglotz_signs(acceptance):
    rng = np.random.default_rng(5)
    worst_im, worst_re = -np.inf, np.inf
    count = 0
    for preset in (COND, ACOUSTIC):
        pi = build_projection(preset.symbol, G8)
        for _ in range(10):
            layout = _random_layout(rng)
            h = random_field(G8, preset.shape, rng)
            h2 = norm(h) ** 2
            L_im = assemble_multiphase_L(preset, layout, [_random_passive(rng, preset, False) for _ in range(2)])
            L_re = assemble_multiphase_L(preset, layout, [_random_passive(rng, preset, True) for _ in range(2)])
            assert _definiteness(L_im, False) > 0 and _definiteness(L_re, True) > 0
            worst_im = max(worst_im, green_quadratic_form(L_im, pi, h).imag / h2)
            worst_re = min(worst_re, green_quadratic_form(L_re, pi, h).real / h2)
            count += 1
    ok = count == 20 and worst_im <= HERGLOTZ_TOL and worst_re >= -HERGLOTZ_TOL
    acceptance(5, "Herglotz signs of h†G h", ok,
               f"{count} instances: max Im {worst_im:.2e} <= 1e-10, min Re {worst_re:.2e} >= -1e-10")
    assert ok


def test_criterion_06_spectrum_map(acceptance):
    start = time.perf_counter()
    scan, pencil, lib, smap, csv = run_map()
    elapsed = time.perf_counter() - start
    _FIRST_RUN["map"] = csv
    # (a) half-plane criterion away from the ray (−∞, 0]
    missing = [z for z, s, _ in smap.points()
               if (abs(z.imag) if z.real <= 0 else abs(z)) >= RAY_MARGIN and s != CERTIFIED]
    # (b) oracle points: no direct certificate, and the nearest scan point is uncertified
    re, im = smap.re_values, smap.im_values
    bad_oracle = []
    for z, _ in smap.oracle_points:
        if certify_coercivity(OperatorField(G8, V2, np.stack([np.eye(2), z * np.eye(2)]), pencil.index), lib) is not None:
            bad_oracle.append(z)
            continue
        if re[0] <= z.real <= re[-1] and im[0] <= z.imag <= im[-1]:
            i, j = int(np.argmin(np.abs(re - z.real))), int(np.argmin(np.abs(im - z.imag)))
            if smap.status[j, i] != UNCERTIFIED:
                bad_oracle.append(z)
    # (c) distance between certified points and oracle points
    cert = smap.certified_points()
    gap = min(float(np.min(np.abs(cert - z))) for z, _ in smap.oracle_points)
    soundness_check(smap, pencil, scan, lib)
    ok = not missing and not bad_oracle and gap > SOUNDNESS_DIST and elapsed < 120.0
    acceptance(6, "spectrum map soundness and tightness", ok,
               f"101x101, {len(missing)} uncertified at dist >= 0.1, {len(smap.oracle_points)} oracle points "
               f"({len(bad_oracle)} certified), min gap {gap:.2e} > 1e-6, {elapsed:.1f}s < 120s")
    assert ok


def test_criterion_07_qstar_oracles(acceptance):
    zero = verify_translation(zero_translation(2, 2), COND.symbol)
    neg = verify_translation(Translation("neg", 1, -np.eye(2)), COND.symbol)
    rot = verify_translation(rotation_translation_2d(), COND.symbol, Sampling(directions=10_000))
    ok = (zero.verified.passed and zero.verified.worst == 0.0
          and not neg.verified.passed and abs(neg.verified.worst + 1.0) <= 1e-12
          and rot.verified.passed and rot.verified.worst >= -QSTAR_TOL and rot.verified.samples == 10_000)
    acceptance(7, "Q*-checker oracles", ok,
               f"zero {zero.verified.worst:.1e} pass, -I {neg.verified.worst:.3f} fail, "
               f"rotation {rot.verified.worst:.1e} >= -1e-10 over {rot.verified.samples} directions")
    assert ok


def test_criterion_08_inverse_and_splitting(acceptance):
    errs = {}
    cond_pi = build_projection(COND.symbol, G8)
    ac_pi = build_projection(ACOUSTIC.symbol, G8)
    cases = [
        ("conductivity laminate", COND, cond_pi, laminate(G8), [{"sigma": 1.0}, {"sigma": 4.0}]),
        ("conductivity checkerboard", COND, cond_pi, checkerboard(G8), [{"sigma": 1.0}, {"sigma": 4.0}]),
        ("lossy acoustic checkerboard", ACOUSTIC, ac_pi, checkerboard(G8),
         [dict(rho=-1 + 0.05j, kappa=1 - 0.05j), dict(rho=-2 + 0.1j, kappa=0.5 - 0.02j)]),
    ]
    for label, preset, pi, layout, moduli in cases:
        L = assemble_multiphase_L(preset, layout, moduli)
        h = random_field(G8, preset.shape, 8)
        oracle = dense_oracle_solve(L, pi, h)
        errs[f"inverse/{label}"] = rel(inverse_form_solve(L, pi, h), oracle)
        la = L.with_matrices(hermitian_part(L.matrices))
        lb = L.with_matrices(L.matrices - la.matrices)
        errs[f"splitting/{label}"] = rel(splitting_solve(la, lb, pi, h), oracle)
    worst = max(errs, key=errs.get)
    ok = errs[worst] <= SERIES_TOL
    acceptance(8, "inverse form and splitting vs dense oracle", ok,
               f"{len(errs)} solves, max rel err {errs[worst]:.2e} ({worst}) <= 1e-8")
    assert ok


def _closed_form_modes(k, lo, hi):
    ms = np.array(list(itertools.product(range(-4, 4), repeat=2)))  # lattice modes on an 8² grid
    w = np.sqrt(BLOCH_KAPPA / BLOCH_RHO) * np.linalg.norm(np.asarray(k) + 2 * np.pi * ms, axis=1)
    w = np.unique(np.round(w, 12))
    return w[(w > lo) & (w < hi)]


def test_criterion_09_bloch_dispersion(acceptance):
    start = time.perf_counter()
    rep, csv = run_bloch()
    lossy, _ = run_bloch(0.3)
    elapsed = time.perf_counter() - start
    _FIRST_RUN["bloch"] = csv
    detected = {}
    for s, k, w, _ in rep.modes:
        detected.setdefault(k, []).append(w)
    worst, missed, spurious = 0.0, 0, 0
    pts, _ = k_path_points(BLOCH_PATH, 4)
    for k in pts:
        key = tuple(float(x) for x in k)
        exact = _closed_form_modes(k, BLOCH_OMEGAS[0], BLOCH_OMEGAS[-1])
        got = np.array([w.real for w in detected.get(key, [])])
        for w in got:
            r = float(np.min(np.abs(exact - w)) / w) if exact.size else np.inf
            worst = max(worst, r)
            spurious += r > DISPERSION_RTOL
        for e in exact:
            missed += got.size == 0 or float(np.min(np.abs(got - e)) / e) > DISPERSION_RTOL
    all_cert = all(r.certified for r in lossy.rows)
    ok = rep.modes and spurious == 0 and missed == 0 and all_cert and elapsed < 60.0
    acceptance(9, "Bloch dispersion of a homogeneous acoustic cell", ok,
               f"{len(rep.modes)} modes, max rel err {worst:.2e} <= 1e-6, {missed} missed, "
               f"Im ω = 0.3: {sum(r.certified for r in lossy.rows)}/{len(lossy.rows)} certified, {elapsed:.1f}s < 60s")
    assert ok


def test_criterion_10_determinism(acceptance, tmp_path):
    if "series" not in _FIRST_RUN:
        _FIRST_RUN["series"] = run_series(tmp_path / "a")[-1]
    if "map" not in _FIRST_RUN:
        _FIRST_RUN["map"] = run_map()[-1]
    if "bloch" not in _FIRST_RUN:
        _FIRST_RUN["bloch"] = run_bloch()[-1]
    (tmp_path / "b").mkdir(exist_ok=True)
    again = {
        "series": run_series(tmp_path / "b")[-1],
        "map": run_map()[-1],
        "bloch": run_bloch()[-1],
    }
    same = {k: again[k] == _FIRST_RUN[k] for k in again}
    ok = all(same.values())
    acceptance(10, "byte-identical CSV on re-run", ok,
               ", ".join(f"{k} {'identical' if v else 'DIFFERENT'} ({len(again[k])} bytes)" for k, v in same.items()))
    assert ok
