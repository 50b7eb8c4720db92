from kvnlab.errors import ConfigError
from kvnlab.helpers import logger
from pathlib import Path
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing import Literal, Optional
import math, yaml

MODES = ("kvn", "hybrid", "em", "transform", "wigner")
REPRESENTATIONS = ("QP", "QLp", "LqP", "LqLp")
PHASE_SPACE_GRID = ("n_q", "n_p", "q_min", "q_max")

# ---------------------------------------------------------------------------- #
#                         YAML loading with duplicate checks                   #
# ---------------------------------------------------------------------------- #


class StrictLoader(yaml.SafeLoader):
    """SafeLoader that records duplicate mapping keys instead of silently keeping the last one."""

    def __init__(self, stream):
        super().__init__(stream)
        self.duplicates = []


def _construct_mapping(loader, node, deep=False):
    seen = {}
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        line = key_node.start_mark.line + 1
        if key in seen:
            loader.duplicates.append(f"duplicate key '{key}' on line {line} (first defined on line {seen[key]})")
        else:
            seen[key] = line
    return yaml.SafeLoader.construct_mapping(loader, node, deep=deep)


StrictLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def load_yaml(text):
    """Returns (data, duplicate-key errors)."""
    loader = StrictLoader(text)
    try:
        data = loader.get_single_data()
    except yaml.YAMLError as e:
        raise ConfigError([f"invalid YAML: {e}"]) from e
    finally:
        loader.dispose()
    return data, loader.duplicates


# ---------------------------------------------------------------------------- #
#                                  Config model                                #
# ---------------------------------------------------------------------------- #


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSection(_Section):
    n_q: Optional[int] = Field(None, ge=8, description="grid points in q, even; unused in em mode")
    n_p: Optional[int] = Field(None, ge=8, description="grid points in p, even; unused in em mode")
    q_min: Optional[float] = None
    q_max: Optional[float] = None
    p_min: Optional[float] = Field(None, description="omit in wigner mode, where the p-axis is derived")
    p_max: Optional[float] = None
    n_z: int = Field(64, ge=8, description="spatial points for em mode, even")
    z_length: float = Field(2 * math.pi, gt=0, description="periodic length for em mode")

    @field_validator("n_q", "n_p", "n_z")
    @classmethod
    def _even(cls, value):
        if value is not None and value % 2:
            raise ValueError("must be even")
        return value

    @model_validator(mode="after")
    def _ranges(self):
        problems = []
        if (self.q_min is None) != (self.q_max is None):
            problems.append("q_min and q_max must be given together")
        elif self.q_min is not None and not self.q_max > self.q_min:
            problems.append("q_max must exceed q_min")
        if (self.p_min is None) != (self.p_max is None):
            problems.append("p_min and p_max must be given together")
        elif self.p_min is not None and not self.p_max > self.p_min:
            problems.append("p_max must exceed p_min")
        if problems:
            raise ValueError("; ".join(problems))
        return self


class PotentialSection(_Section):
    kind: Literal["free", "harmonic", "quartic", "tabulated"] = "free"
    omega: float = Field(1.0, gt=0)
    a: float = 1.0
    b: float = Field(0.5, gt=0)
    file: Optional[str] = Field(None, description="tabulated: whitespace columns q V dV/dq, one row per q point")


class InitialSection(_Section):
    kind: Literal["gaussian", "cat", "plane_wave_em", "custom_file"] = "gaussian"
    q0: float = 0.0
    p0: float = 0.0
    width_q: float = Field(1.0, gt=0)
    width_p: float = Field(1.0, gt=0)
    phase: Literal["none", "qp", "linear"] = "none"
    phase_scale: float = 1.0
    separation: float = Field(2.0, gt=0)
    k_index: int = Field(1, ge=1)
    amplitude: float = 1.0
    profile: Literal["travelling", "standing"] = "travelling"
    file: Optional[str] = None


class RunSection(_Section):
    mode: Literal["kvn", "hybrid", "em", "transform", "wigner"]
    dt: float = Field(0.01, gt=0)
    steps: int = Field(100, ge=1)
    record_every: int = Field(10, ge=1)
    kappa: float = Field(0.0, ge=0, le=1)
    hbar: float = Field(1.0, gt=0)
    representation: Literal["QP", "QLp", "LqP", "LqLp"] = "QP"
    superselect: bool = False
    phase_floor: float = Field(1e-6, gt=0)


class OutputSection(_Section):
    directory: str = "kvnlab_output"
    formats: list[Literal["tsv", "bin"]] = Field(default_factory=lambda: ["tsv", "bin"])


class ScenarioConfig(_Section):
    grid: GridSection
    potential: PotentialSection = Field(default_factory=PotentialSection)
    initial: InitialSection = Field(default_factory=InitialSection)
    run: RunSection
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _mode_requirements(self):
        problems = mode_problems(self)
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def with_output_directory(self, directory):
        return self.model_copy(update={"output": self.output.model_copy(update={"directory": str(directory)})})

    def echo(self):
        return self.model_dump(mode="json")


def mode_problems(cfg):
    """Cross-section rules that depend on the selected mode."""
    mode, kind, problems = cfg.run.mode, cfg.initial.kind, []
    phase_space = mode in ("kvn", "hybrid", "transform")
    if mode == "em":
        if kind != "plane_wave_em":
            problems.append("em mode needs initial.kind = plane_wave_em")
        elif cfg.initial.k_index >= cfg.grid.n_z // 2:
            problems.append(f"initial.k_index must be below grid.n_z / 2 = {cfg.grid.n_z // 2}")
    elif kind == "plane_wave_em":
        problems.append(f"initial.kind = plane_wave_em is only valid in em mode, not {mode}")
    if mode != "em":
        missing = [name for name in PHASE_SPACE_GRID if getattr(cfg.grid, name) is None]
        if missing:
            problems.append(f"{mode} mode needs " + ", ".join(f"grid.{name}" for name in missing))
    if phase_space and cfg.grid.p_min is None:
        problems.append(f"{mode} mode needs grid.p_min and grid.p_max")
    if mode == "wigner":
        if cfg.grid.p_min is not None:
            problems.append("wigner mode derives the p-axis from the q-axis; omit grid.p_min and grid.p_max")
        if cfg.grid.n_p != cfg.grid.n_q:
            problems.append("wigner mode needs grid.n_p == grid.n_q")
        if kind not in ("gaussian", "cat"):
            problems.append("wigner mode needs initial.kind = gaussian or cat")
    if cfg.potential.kind == "tabulated":
        if cfg.potential.file is None:
            problems.append("tabulated potential needs potential.file")
        if mode == "hybrid" and cfg.run.kappa > 0:
            problems.append("tabulated potentials are not supported in hybrid mode with kappa > 0")
        if mode == "wigner":
            problems.append("wigner mode needs an analytic potential")
    if kind == "custom_file" and cfg.initial.file is None:
        problems.append("initial.kind = custom_file needs initial.file")
    if cfg.run.superselect and mode not in ("kvn", "transform"):
        problems.append("run.superselect applies to kvn and transform modes only")
    return problems


# ---------------------------------------------------------------------------- #
#                                    Parsing                                   #
# ---------------------------------------------------------------------------- #


def _format_error(error):
    location = ".".join(str(part) for part in error["loc"]) or "config"
    message = error["msg"]
    if error["type"] == "extra_forbidden":
        message = "unknown key"
    return f"{location}: {message}"


def parse_config(text):
    """Parse and validate a scenario; raises ConfigError listing every problem found."""
    data, errors = load_yaml(text)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([*errors, "config must be a mapping of sections"])
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as e:
        errors.extend(_format_error(error) for error in e.errors())
        cfg = None
    if errors:
        raise ConfigError(errors)
    logger.debug(f"Parsed {cfg.run.mode} scenario")
    return cfg


def load_config(path):
    path = Path(path)
    logger.debug(f"Reading scenario config {path}")
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError([f"cannot read {path}: {e}"]) from e
    return parse_config(text)


def dump_config(cfg):
    return yaml.safe_dump(cfg.echo(), sort_keys=False)
