"""Command-line front end.

``spectral-gate <subcommand> --config FILE [--out DIR] [--workers N] [--seed S]``

Exit codes: 0 success, 1 contract violation or runtime error, 2 invalid
configuration.  Failures print one JSON error record on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog
from .catalog import build_preset, default_dimension
from .config import ScenarioConfig, load_config
from .errors import CertificateError, ConfigError, SpectralGateError
from .fields import Grid, random_field, save_field, norm
from .io import export_band, export_map, write_json
from .pencil import evaluate_pencil, hermitian_part, multiphase_pencil
from .projections import build_projection, project_values
from .solvers import (
    analytic_property_check,
    dense_oracle_solve,
    inverse_form_solve,
    neumann_solve,
    splitting_operator,
    splitting_solve,
)
from .spectrum import ScanSpec, bloch_scan, eigen_oracle_spectrum, map_spectrum_region, soundness_check
from .translations import (
    CertifierConfig,
    builtin_library,
    certify_coercivity,
    load_translation_csv,
    verify_translation,
)

log = logging.getLogger("spectral_gate")

IDENTITY_TOL = 1e-12
COMMANDS = ("identity-check", "solve", "certify", "spectrum-map", "bloch-scan", "properties")


class ContractViolation(SpectralGateError):
    module = "cli-io"


# --- scenario assembly -------------------------------------------------------


def make_grid(cfg: ScenarioConfig) -> Grid:
    return Grid(tuple(cfg.grid.sizes), None if cfg.grid.cell is None else tuple(cfg.grid.cell))


def make_preset(cfg: ScenarioConfig, grid: Grid):
    if cfg.preset is None:
        raise ConfigError("this command needs a 'preset' section")
    d = cfg.preset.d if cfg.preset.d is not None else grid.d
    if d != grid.d:
        raise ConfigError(f"preset.d = {d} does not match the grid dimension {grid.d}")
    return build_preset(cfg.preset.name, d, cfg.preset.parameters)


def make_layout(cfg: ScenarioConfig, grid: Grid):
    lc = cfg.layout
    if lc.kind == "single":
        return catalog.single_phase(grid)
    if lc.kind == "laminate":
        return catalog.laminate(grid, lc.direction, lc.fraction)
    if lc.kind == "checkerboard":
        return catalog.checkerboard(grid, lc.tiles)
    if lc.kind == "disk":
        return catalog.disk_inclusion(grid, lc.radius)
    if lc.path is None:
        raise ConfigError("layout.kind = voxel needs layout.path")
    return catalog.load_voxel_csv(grid, lc.path, lc.nphases)


def phase_moduli(cfg: ScenarioConfig, nphases: int) -> list[dict]:
    if not cfg.phases:
        return [{} for _ in range(nphases)]
    if len(cfg.phases) != nphases:
        raise ConfigError(f"{len(cfg.phases)} entries in 'phases' for a {nphases}-phase layout")
    return [dict(p) for p in cfg.phases]


def make_pencil(cfg: ScenarioConfig):
    grid = make_grid(cfg)
    preset = make_preset(cfg, grid)
    layout = make_layout(cfg, grid)
    tensors = [preset.phase_tensor(**m) for m in phase_moduli(cfg, layout.nphases)]
    labels = tuple(f"z{i + 1}" for i in range(layout.nphases))
    return grid, preset, layout, multiphase_pencil(layout, tensors, preset.shape, labels)


def parameters(cfg: ScenarioConfig, n: int) -> np.ndarray:
    if cfg.pencil is None:
        return np.ones(n, dtype=complex)
    z = np.asarray(cfg.pencil.z, dtype=complex)
    if z.shape != (n,):
        raise ConfigError(f"pencil.z has {z.size} entries, the layout has {n} phases")
    return z


def make_library(cfg: ScenarioConfig, preset):
    lib = builtin_library(preset.symbol, preset.d) if cfg.certifier.builtin else []
    for tf in cfg.certifier.translations:
        T = verify_translation(load_translation_csv(tf.path, tf.ell, tf.id), preset.symbol, d=preset.d)
        if not T.verified.passed:
            log.warning("translation %s failed the Q*-check (worst %.3e); not used", T.id, T.verified.worst)
            continue
        lib.append(T)
    return lib


def certifier_config(cfg: ScenarioConfig) -> CertifierConfig:
    c = cfg.certifier
    return CertifierConfig(theta_samples=c.theta_samples, refine=c.refine, t_max=c.t_max)


# --- subcommands -------------------------------------------------------------


def cmd_identity(cfg: ScenarioConfig, out: Path, args) -> int:
    names = catalog.PRESET_NAMES if cfg.identity.presets == "all" else cfg.identity.presets
    n = cfg.grid.sizes[0]
    rows = []
    for name in names:
        d = default_dimension(name)
        grid = Grid((n,) * d)
        preset = build_preset(name, d)
        val = catalog.check_key_identity(preset, grid, cfg.identity.trials, args.seed)
        rows.append({"preset": name, "d": d, "grid": list(grid.sizes), "max_abs": val, "pass": val <= IDENTITY_TOL})
        print(f"{name:22s} d={d} max|(J,E)|/(|J||E|) = {val:.3e}  {'ok' if val <= IDENTITY_TOL else 'FAIL'}")
    write_json({"tolerance": IDENTITY_TOL, "rows": rows}, out / "identity.json")
    if not all(r["pass"] for r in rows):
        raise ContractViolation("key identity check exceeded tolerance")
    return 0


def cmd_solve(cfg: ScenarioConfig, out: Path, args) -> int:
    grid, preset, layout, pencil = make_pencil(cfg)
    L = evaluate_pencil(pencil, parameters(cfg, pencil.n))
    pi = build_projection(preset.symbol, grid)
    h = random_field(grid, preset.shape, args.seed)
    sc = cfg.solver
    record = {"method": sc.method}
    if sc.method == "neumann":
        cert = certify_coercivity(L, make_library(cfg, preset), certifier_config(cfg), preset.symbol.name)
        if cert is None:
            raise CertificateError("no coercivity certificate for this operator; the series is not guaranteed")
        rep = neumann_solve(L, pi, h, cert, sc.tol, sc.max_iter)
        record.update(rep.to_record(), certificate=cert.to_record())
        sol = rep.solution
    elif sc.method == "oracle":
        sol = dense_oracle_solve(L, pi, h, sc.oracle_cap)
    elif sc.method == "inverse":
        sol = inverse_form_solve(L, pi, h, tol=sc.tol, max_iter=sc.max_iter)
    else:
        a = L.with_matrices(hermitian_part(L.matrices))
        b = L.with_matrices(L.matrices - a.matrices)
        # both certificates are reported side by side; neither is assumed sharper
        direct = certify_coercivity(L)
        doubled = certify_coercivity(splitting_operator(a, b))
        record["direct_certificate"] = None if direct is None else direct.to_record()
        record["doubled_certificate"] = None if doubled is None else doubled.to_record()
        sol = splitting_solve(a, b, pi, h, cert=doubled, tol=sc.tol, max_iter=sc.max_iter)
    if sc.compare_oracle and sc.method != "oracle":
        ref = dense_oracle_solve(L, pi, h, sc.oracle_cap)
        record["oracle_relative_difference"] = norm(sol - ref) / max(norm(ref), 1e-300)
    record["residual"] = norm(sol.like(project_values(pi, L.apply_values(sol.values) - h.values))) / norm(h)
    save_field(sol, out / "solution.sgf")
    write_json(record, out / "solve.json")
    print(f"solve[{sc.method}] residual {record['residual']:.3e}")
    if record.get("converged") is False:
        raise ContractViolation(f"series did not converge in {sc.max_iter} iterations")
    return 0


def cmd_certify(cfg: ScenarioConfig, out: Path, args) -> int:
    grid, preset, layout, pencil = make_pencil(cfg)
    z = parameters(cfg, pencil.n)
    lib = make_library(cfg, preset)
    cert = certify_coercivity(evaluate_pencil(pencil, z), lib, certifier_config(cfg), preset.symbol.name)
    write_json({
        "z": [complex(v) for v in z],
        "certificate": None if cert is None else cert.to_record(),
        "library": [T.record() for T in lib],
    }, out / "certificate.json")
    print("certified" if cert else "no certificate found", "" if cert is None else cert.to_record())
    return 0


def cmd_spectrum_map(cfg: ScenarioConfig, out: Path, args) -> int:
    grid, preset, layout, pencil = make_pencil(cfg)
    s = cfg.scan
    scan = ScanSpec(tuple(s.re_range), tuple(s.im_range), tuple(s.resolution), s.vary,
                    None if s.fixed is None else tuple(s.fixed), s.budget)
    lib = make_library(cfg, preset)
    cc = certifier_config(cfg)
    oracle = []
    if s.oracle and pencil.n == 2:
        pi = build_projection(preset.symbol, grid)
        oracle = eigen_oracle_spectrum(pencil, pi, cfg.solver.oracle_cap, scan)
    meta = {"preset": preset.name, "layout": cfg.layout.kind, "grid": list(grid.sizes), "seed": args.seed}
    smap = map_spectrum_region(pencil, scan, lib, cc, args.workers, oracle, meta)
    export_map(smap, out, cfg.output.formats)
    counts = {k: int(np.sum(smap.status == k)) for k in ("certified", "uncertified", "unscanned")}
    print(f"spectrum map {smap.shape[1]}x{smap.shape[0]}: {counts}, {len(oracle)} oracle points")
    soundness_check(smap, pencil, scan, lib, cc)
    return 0


def cmd_bloch(cfg: ScenarioConfig, out: Path, args) -> int:
    if cfg.bloch is None:
        raise ConfigError("bloch-scan needs a 'bloch' section")
    grid = make_grid(cfg)
    preset = make_preset(cfg, grid)
    layout = make_layout(cfg, grid)
    moduli = phase_moduli(cfg, layout.nphases)
    b = cfg.bloch
    omegas = np.linspace(*b.omega.re_range, b.omega.samples) + 1j * b.omega.imag
    rep = bloch_scan(preset, layout, moduli, b.k_path, omegas, b.samples_per_segment,
                     certifier_config(cfg), b.threshold, cfg.solver.oracle_cap)
    export_band(rep, out)
    ncert = sum(r.certified for r in rep.rows)
    print(f"bloch scan: {len(rep.rows)} samples, {ncert} certified, {len(rep.modes)} modes detected")
    return 0


def cmd_properties(cfg: ScenarioConfig, out: Path, args) -> int:
    grid, preset, layout, pencil = make_pencil(cfg)
    pi = build_projection(preset.symbol, grid)
    reports = []
    for name in cfg.properties.names:
        rep = analytic_property_check(pencil, pi, name, cfg.properties.samples, args.seed, cfg.solver.oracle_cap)
        reports.append(rep.to_record())
        print(f"{name:14s} worst {rep.worst: .3e}  tol {rep.tolerance:.0e}  {'ok' if rep.passed else 'FAIL'}")
    write_json({"reports": reports}, out / "properties.json")
    if not all(r["passed"] for r in reports):
        raise ContractViolation("analytic property check failed")
    return 0


HANDLERS = {
    "identity-check": cmd_identity,
    "solve": cmd_solve,
    "certify": cmd_certify,
    "spectrum-map": cmd_spectrum_map,
    "bloch-scan": cmd_bloch,
    "properties": cmd_properties,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectral-gate", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="scenario file (YAML or JSON)")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes")
        sp.add_argument("--out", default=None, help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, default=None, help="random seed (overrides config seed)")
    return p


def _emit(exc: Exception, module: str | None = None):
    if isinstance(exc, SpectralGateError):
        rec = exc.record()
    else:
        rec = {"error": type(exc).__name__, "module": module or "cli-io", "message": str(exc)}
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    level = os.environ.get("SPECTRAL_GATE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _emit(exc)
        return 2
    args.seed = cfg.seed if args.seed is None else args.seed
    out = Path(args.out or cfg.output.dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](cfg, out, args)
    except ConfigError as exc:
        _emit(exc)
        return 2
    except SpectralGateError as exc:
        _emit(exc)
        return 1
    except Exception as exc:  # surfaced with provenance instead of a traceback
        log.debug("unhandled error", exc_info=True)
        _emit(exc, type(exc).__module__)
        return 1


if __name__ == "__main__":
    sys.exit(main())
