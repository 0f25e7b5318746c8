import json
from pathlib import Path

import numpy as np
import pytest

from spectral_gate.catalog import laminate
from spectral_gate.cli import main
from spectral_gate.config import load_config, parse_config
from spectral_gate.errors import ConfigError
from spectral_gate.fields import Grid, TensorShape, load_field
from spectral_gate.io import MAP_COLUMNS, export_map, fmt, map_csv_text, map_pgm_bytes, to_json
from spectral_gate.pencil import CoercivityCertificate, multiphase_pencil
from spectral_gate.spectrum import ScanSpec, SpectrumMap, map_spectrum_region

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small_map():
    pen = multiphase_pencil(laminate(Grid((4, 4))), [np.eye(2), np.eye(2)], TensorShape(((2, 1),)))
    return map_spectrum_region(pen, ScanSpec((-1, 1), (-1, 1), (5, 3)), oracle_points=[(-0.5 + 0j, 1e-16)])


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, -2.5e-300, 1e300):
        assert float(fmt(x)) == x
    assert fmt(float("nan")) == "nan" and fmt(float("-inf")) == "-inf"


def test_to_json_deterministic_and_parseable():
    obj = {"b": [1, 2.5, 1 + 2j], "a": {"y": None, "x": True}, "c": np.float64(0.1)}
    text = to_json(obj)
    assert text == to_json(dict(reversed(list(obj.items()))))
    back = json.loads(text)
    assert list(back) == ["a", "b", "c"] and back["b"][2] == [1.0, 2.0] and back["c"] == 0.1
    with pytest.raises(TypeError):
        to_json(object())


def test_empty_map_gives_header_only_csv():
    empty = SpectrumMap(np.zeros(0), np.zeros(0), np.empty((0, 0), dtype=object), [])
    assert map_csv_text(empty) == ",".join(MAP_COLUMNS) + "\n"


def test_map_csv_rows_and_order():
    smap = small_map()
    lines = map_csv_text(smap).splitlines()
    assert len(lines) == 1 + 15 + 1
    first = lines[1].split(",")
    assert (float(first[0]), float(first[1])) == (-1.0, -1.0)
    assert lines[-1].split(",")[2] == "oracle-spectrum"
    certified = [row for row in lines[1:] if row.split(",")[2] == "certified"]
    assert certified and all(row.split(",")[4] for row in certified)


def test_pgm_dimensions_and_orientation():
    smap = small_map()
    data = map_pgm_bytes(smap)
    header = b"P5\n5 3\n255\n"
    assert data.startswith(header)
    img = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(3, 5)
    # middle row is Im z = 0: z = −0.5 carries the oracle overlay, z = 1 is certified
    assert img[1, 1] == 64 and img[1, 4] == 255
    # top row is Im z = +1, where z = −1 + i is certified
    assert img[0, 0] == 255


def test_pgm_for_101_map():
    st = np.full((101, 101), "certified", dtype=object)
    smap = SpectrumMap(np.linspace(-5, 5, 101), np.linspace(-5, 5, 101), st, [None] * 101 * 101)
    assert map_pgm_bytes(smap).startswith(b"P5\n101 101\n255\n")


def test_export_is_byte_identical(tmp_path):
    smap = small_map()
    a = [p.read_bytes() for p in export_map(smap, tmp_path / "a")]
    b = [p.read_bytes() for p in export_map(smap, tmp_path / "b")]
    assert a == b
    with pytest.raises(ValueError):
        export_map(smap, tmp_path / "c", ["bmp"])


def test_config_validation_messages(tmp_path):
    with pytest.raises(ConfigError, match="grid"):
        parse_config("schema_version: 1\npreset:\n  name: conductivity\n")
    with pytest.raises(ConfigError, match=r"<config>:3: preset.name"):
        parse_config("schema_version: 1\npreset:\n  name: nonsense\ngrid:\n  sizes: [4, 4]\n")
    with pytest.raises(ConfigError, match="Extra inputs"):
        parse_config("schema_version: 1\ngrid:\n  sizes: [4]\n  colour: red\n")
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config("schema_version: 2\ngrid:\n  sizes: [4]\n")
    cfg = parse_config('schema_version: 1\ngrid: {sizes: [4]}\npencil:\n  z: [1, "-1+0.4j", [0, 2]]\n')
    assert cfg.pencil.z == [1, -1 + 0.4j, 2j]
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema_version": 1, "grid": {"sizes": [4, 4]}}))
    assert load_config(path).grid.sizes == [4, 4]
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_cli_missing_grid_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("schema_version: 1\npreset:\n  name: conductivity\n")
    assert main(["solve", "--config", str(path), "--out", str(tmp_path)]) == 2
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["error"] == "ConfigError" and "grid" in rec["message"]


def test_cli_identity_check(tmp_path):
    assert main(["identity-check", "--config", str(CONFIGS / "identity.yaml"), "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "identity.json").read_text())["rows"]
    assert len(rows) == 10 and all(r["max_abs"] <= 1e-12 for r in rows)


def test_cli_solve_and_certify(tmp_path):
    assert main(["solve", "--config", str(CONFIGS / "solve_laminate.yaml"), "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "solve.json").read_text())
    assert rec["oracle_relative_difference"] <= 1e-8 and rec["converged"]
    assert load_field(tmp_path / "solution.sgf").grid.sizes == (8, 8)
    assert main(["certify", "--config", str(CONFIGS / "certify_complex.yaml"), "--out", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())["certificate"]
    assert cert["alpha"] > 0


@pytest.mark.parametrize("method", ["oracle", "inverse", "splitting"])
def test_cli_solve_methods(tmp_path, method):
    cfg = (CONFIGS / "solve_laminate.yaml").read_text().replace("method: neumann", f"method: {method}")
    path = tmp_path / "c.yaml"
    path.write_text(cfg)
    assert main(["solve", "--config", str(path), "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "solve.json").read_text())
    assert rec["residual"] <= 1e-8


def test_cli_splitting_reports_both_certificates(tmp_path):
    cfg = (CONFIGS / "solve_laminate.yaml").read_text()
    cfg = cfg.replace("method: neumann", "method: splitting").replace("z: [1, 4]", 'z: [1, "2+0.5j"]')
    path = tmp_path / "c.yaml"
    path.write_text(cfg)
    assert main(["solve", "--config", str(path), "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "solve.json").read_text())
    assert rec["direct_certificate"]["alpha"] > 0
    assert rec["doubled_certificate"]["alpha"] > 0
    assert rec["oracle_relative_difference"] <= 1e-8


def test_cli_no_certificate_is_a_runtime_error(tmp_path, capsys):
    cfg = (CONFIGS / "solve_laminate.yaml").read_text().replace("z: [1, 4]", "z: [1, -1]")
    path = tmp_path / "c.yaml"
    path.write_text(cfg)
    assert main(["solve", "--config", str(path), "--out", str(tmp_path)]) == 1
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "CertificateError"


def test_cli_spectrum_map_small(tmp_path):
    cfg = (CONFIGS / "spectrum_map.yaml").read_text().replace("[101, 101]", "[11, 11]")
    path = tmp_path / "c.yaml"
    path.write_text(cfg)
    assert main(["spectrum-map", "--config", str(path), "--out", str(tmp_path / "o"), "--workers", "1"]) == 0
    assert (tmp_path / "o" / "spectrum_map.pgm").read_bytes().startswith(b"P5\n11 11\n255\n")
    rows = (tmp_path / "o" / "spectrum_map.csv").read_text().splitlines()
    assert sum(r.split(",")[2] == "oracle-spectrum" for r in rows) > 0


def test_cli_bloch_and_properties(tmp_path):
    cfg = (CONFIGS / "bloch_homogeneous.yaml").read_text().replace("samples: 160", "samples: 20")
    cfg = cfg.replace("samples_per_segment: 4", "samples_per_segment: 1")
    path = tmp_path / "b.yaml"
    path.write_text(cfg)
    assert main(["bloch-scan", "--config", str(path), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "bands.csv").read_text().startswith("s,k,omega_re")
    assert main(["properties", "--config", str(CONFIGS / "properties.yaml"), "--out", str(tmp_path)]) == 0
    reports = json.loads((tmp_path / "properties.json").read_text())["reports"]
    assert all(r["passed"] for r in reports)


def test_certificate_record_in_csv_cells():
    c = CoercivityCertificate(0.5, 1.0, 2.0, 0.25, "rotation2d")
    smap = SpectrumMap(np.array([1.0]), np.array([0.0]), np.array([["certified"]], dtype=object), [c])
    row = map_csv_text(smap).splitlines()[1].split(",")
    assert row[3:8] == ["0.5", "1", "2", "0.25", "rotation2d"]
