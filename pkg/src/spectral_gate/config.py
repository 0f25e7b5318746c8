"""Scenario configuration: a YAML or JSON file validated before any computation.

Unknown keys are rejected everywhere.  Complex numbers may be written as a
number, a ``[re, im]`` pair or a Python-style string such as ``"1+0.4j"``.
Validation errors carry the dotted field path and, for YAML input, the line.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, BeforeValidator, ConfigDict, ValidationError, field_validator

from .catalog import PRESET_NAMES
from .errors import ConfigError

SCHEMA_VERSION = 1


def _to_complex(v):
    if isinstance(v, complex):
        return v
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", "").replace("i", "j"))
        except ValueError:
            pass
    raise ValueError(f"cannot read {v!r} as a complex number")


Complex = Annotated[complex, BeforeValidator(_to_complex)]


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PresetConfig(Strict):
    name: str
    d: Optional[int] = None
    parameters: dict[str, Any] = {}

    @field_validator("name")
    @classmethod
    def _known(cls, v):
        if v not in PRESET_NAMES:
            raise ValueError(f"unknown preset {v!r}; choose from {', '.join(PRESET_NAMES)}")
        return v


class GridConfig(Strict):
    sizes: list[int]
    cell: Optional[list[float]] = None


class LayoutConfig(Strict):
    kind: Literal["single", "laminate", "checkerboard", "disk", "voxel"] = "single"
    direction: int = 0
    fraction: float = 0.5
    tiles: int = 2
    radius: float = 0.25
    path: Optional[str] = None
    nphases: Optional[int] = None


class PencilConfig(Strict):
    z: list[Complex]


class ScanConfig(Strict):
    re_range: tuple[float, float] = (-5.0, 5.0)
    im_range: tuple[float, float] = (-5.0, 5.0)
    resolution: tuple[int, int] = (101, 101)
    vary: int = -1
    fixed: Optional[list[Complex]] = None
    budget: Optional[int] = None
    oracle: bool = True


class TranslationFile(Strict):
    path: str
    ell: int
    id: Optional[str] = None


class CertifierConfigModel(Strict):
    theta_samples: int = 720
    refine: bool = True
    t_max: Optional[float] = None
    builtin: bool = True
    translations: list[TranslationFile] = []


class SolverConfig(Strict):
    method: Literal["neumann", "oracle", "inverse", "splitting"] = "neumann"
    tol: float = 1e-12
    max_iter: int = 10_000
    oracle_cap: int = 4096
    compare_oracle: bool = True


class OmegaConfig(Strict):
    re_range: tuple[float, float]
    samples: int
    imag: float = 0.0


class BlochConfig(Strict):
    k_path: list[list[float]]
    samples_per_segment: int = 8
    omega: OmegaConfig
    threshold: float = 1e-8


class IdentityConfig(Strict):
    presets: Union[Literal["all"], list[str]] = "all"
    trials: int = 20


class PropertiesConfig(Strict):
    names: list[Literal["herglotz_im", "herglotz_re", "homogeneity", "normalization"]] = [
        "herglotz_im", "herglotz_re", "homogeneity", "normalization"
    ]
    samples: int = 10


class OutputConfig(Strict):
    dir: str = "out"
    formats: list[Literal["csv", "json", "pgm"]] = ["csv", "json", "pgm"]


class ScenarioConfig(Strict):
    schema_version: Literal[1]
    grid: GridConfig
    preset: Optional[PresetConfig] = None
    layout: LayoutConfig = LayoutConfig()
    phases: list[dict[str, Any]] = []
    pencil: Optional[PencilConfig] = None
    scan: ScanConfig = ScanConfig()
    certifier: CertifierConfigModel = CertifierConfigModel()
    solver: SolverConfig = SolverConfig()
    bloch: Optional[BlochConfig] = None
    identity: IdentityConfig = IdentityConfig()
    properties: PropertiesConfig = PropertiesConfig()
    output: OutputConfig = OutputConfig()
    seed: int = 0


def _node_line(node, loc) -> Optional[int]:
    """Line (1-based) of the YAML node at ``loc``, or of the deepest ancestor found."""
    line = None if node is None else node.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == str(key)), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    node = None
    try:
        if source.endswith(".json"):
            data = json.loads(text)
        else:
            node = yaml.compose(text)
            data = yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{source}: cannot parse: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        problems = []
        for err in exc.errors():
            loc = [p for p in err["loc"] if not (isinstance(p, str) and p.startswith("function-"))]
            path = ".".join(str(p) for p in loc) or "<root>"
            line = _node_line(node, loc)
            where = f"{source}:{line}" if line else source
            problems.append(f"{where}: {path}: {err['msg']}")
        raise ConfigError("; ".join(problems)) from exc


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(p))
