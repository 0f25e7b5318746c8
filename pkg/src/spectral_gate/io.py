"""Deterministic writers for maps, band reports and solve reports.

Every float is printed with 17 significant digits so values round-trip
exactly; JSON is produced by a small writer (sorted keys, fixed float
format) rather than ``json.dumps`` so the bytes do not depend on float repr
heuristics.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .spectrum import CERTIFIED, ORACLE, UNCERTIFIED, UNSCANNED, BandReport, SpectrumMap

MAP_COLUMNS = ("re_z", "im_z", "status", "theta", "alpha", "beta", "t", "translation_id", "sigma_min")
PGM_LEVELS = {CERTIFIED: 255, UNCERTIFIED: 0, UNSCANNED: 128, ORACLE: 64}


def fmt(x) -> str:
    """A float with 17 significant digits; ``nan``/``inf`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt(x) if math.isfinite(x) else json.dumps(fmt(x))
    if isinstance(obj, (complex, np.complexfloating)):
        return to_json([float(obj.real), float(obj.imag)], indent, _level)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(obj[k], indent, _level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad}{to_json(v, indent, _level + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj, path) -> None:
    Path(path).write_text(to_json(obj) + "\n", encoding="utf-8")


def _cert_cells(cert):
    if cert is None:
        return ["", "", "", "", ""]
    return [fmt(cert.theta), fmt(cert.alpha), fmt(cert.beta), fmt(cert.t), cert.translation_id or ""]


def map_csv_text(smap: SpectrumMap) -> str:
    """Scan points in row-major order (imaginary part slowest), then oracle points."""
    lines = [",".join(MAP_COLUMNS)]
    for z, status, cert in smap.points():
        lines.append(",".join([fmt(z.real), fmt(z.imag), status] + _cert_cells(cert) + [""]))
    for z, sig in smap.oracle_points:
        lines.append(",".join([fmt(z.real), fmt(z.imag), ORACLE] + _cert_cells(None) + [fmt(sig)]))
    return "\n".join(lines) + "\n"


def map_record(smap: SpectrumMap) -> dict:
    ny, nx = smap.shape
    points = []
    for z, status, cert in smap.points():
        points.append({"z": z, "status": status, "certificate": None if cert is None else cert.to_record()})
    counts = {s: int(np.sum(smap.status == s)) for s in (CERTIFIED, UNCERTIFIED, UNSCANNED)}
    return {
        "shape": [ny, nx],
        "re_values": [float(v) for v in smap.re_values],
        "im_values": [float(v) for v in smap.im_values],
        "counts": counts,
        "metadata": smap.metadata,
        "points": points,
        "oracle_points": [{"z": z, "sigma_min": s} for z, s in smap.oracle_points],
    }


def map_pgm_bytes(smap: SpectrumMap) -> bytes:
    """Binary PGM, one pixel per scan point, top row = largest imaginary part.

    Oracle spectrum points inside the window are drawn at the nearest pixel.
    """
    ny, nx = smap.shape
    img = np.zeros((ny, nx), dtype=np.uint8)
    for s, level in PGM_LEVELS.items():
        img[smap.status == s] = level
    re, im = smap.re_values, smap.im_values
    if nx and ny:
        dx = (re[-1] - re[0]) / max(nx - 1, 1)
        dy = (im[-1] - im[0]) / max(ny - 1, 1)
        for z, _ in smap.oracle_points:
            i = int(round((z.real - re[0]) / dx)) if dx else 0
            j = int(round((z.imag - im[0]) / dy)) if dy else 0
            if 0 <= i < nx and 0 <= j < ny:
                img[j, i] = PGM_LEVELS[ORACLE]
    header = f"P5\n{nx} {ny}\n255\n".encode()
    return header + img[::-1].tobytes()


def export_map(smap: SpectrumMap, out_dir, formats=("csv", "json", "pgm"), stem: str = "spectrum_map") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for f in formats:
        path = out / f"{stem}.{f}"
        if f == "csv":
            path.write_text(map_csv_text(smap), encoding="utf-8")
        elif f == "json":
            write_json(map_record(smap), path)
        elif f == "pgm":
            path.write_bytes(map_pgm_bytes(smap))
        else:
            raise ValueError(f"unknown map format {f!r}")
        written.append(path)
    return written


def band_csv_text(report: BandReport) -> str:
    lines = ["s,k,omega_re,omega_im,certified,sigma_min"]
    for r in report.rows:
        k = " ".join(fmt(v) for v in r.k)
        lines.append(",".join([fmt(r.s), k, fmt(r.omega.real), fmt(r.omega.imag),
                               "1" if r.certified else "0", fmt(r.sigma_min)]))
    return "\n".join(lines) + "\n"


def modes_csv_text(report: BandReport) -> str:
    lines = ["s,k,omega_re,omega_im,sigma_min"]
    for s, k, w, sig in report.modes:
        lines.append(",".join([fmt(s), " ".join(fmt(v) for v in k), fmt(w.real), fmt(w.imag), fmt(sig)]))
    return "\n".join(lines) + "\n"


def export_band(report: BandReport, out_dir, stem: str = "bands") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    a, b = out / f"{stem}.csv", out / f"{stem}_modes.csv"
    a.write_text(band_csv_text(report), encoding="utf-8")
    b.write_text(modes_csv_text(report), encoding="utf-8")
    return [a, b]
