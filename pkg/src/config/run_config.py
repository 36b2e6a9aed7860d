import hashlib
import json
import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.config.settings import settings
from src.discretize.grid import MIN_RESOLUTION, DomainSpec
from src.geometry.frames import BUILTIN_FRAMES
from src.solvers.eigensolve import SolverConfig
from src.utils.errors import ConfigError
from src.verify.suite import SuiteOptions

logger = logging.getLogger(__name__)

COMMANDS = ("solve", "sweep", "distance", "dimension", "verify")

# options each command reads; anything else set explicitly draws a warning
COMMAND_OPTIONS = {
    "solve": {"s_max"},
    "sweep": {"p_values", "s_max"},
    "distance": {"source", "stencil_radius"},
    "dimension": {"s_max"},
    "verify": set(SuiteOptions.model_fields) | {"stencil_radius", "source"},
}


def parse_p_values(spec: Union[str, Sequence[float]]) -> List[float]:
    """A list of exponents, or "start:stop:step" with an inclusive stop"""
    if isinstance(spec, str):
        try:
            start, stop, step = (float(part) for part in spec.split(":"))
        except ValueError:
            raise ValueError(f"p range '{spec}' is not of the form start:stop:step")
        if not step > 0 or stop < start:
            raise ValueError(f"p range '{spec}' is empty")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + k * step, 12) for k in range(count)]
    else:
        values = [float(v) for v in spec]

    if not values:
        raise ValueError("p list is empty")
    bad = [v for v in values if not v > 1]
    if bad:
        raise ValueError(f"every p must be > 1, got {bad}")
    return values


class FrameSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str


class GridSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    resolution: Union[int, List[int]]

    @field_validator("resolution")
    @classmethod
    def _check_resolution(cls, v):
        values = [v] if isinstance(v, int) else v
        if not values or min(values) < MIN_RESOLUTION:
            raise ValueError(f"resolution must be >= {MIN_RESOLUTION} per axis")
        return v


class OptionsSection(SuiteOptions):
    p_values: Optional[Union[List[float], str]] = None
    s_max: Optional[int] = Field(default=None, ge=1)

    @field_validator("p_values")
    @classmethod
    def _check_p_values(cls, v):
        return None if v is None else parse_p_values(v)


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: str = Field(default_factory=lambda: settings.OUTPUT_DIR)


class RunConfig(BaseModel):
    """One document drives every command"""

    model_config = ConfigDict(extra="forbid")

    frame: FrameSection
    domain: DomainSpec
    grid: GridSection
    solver: SolverConfig = Field(default_factory=SolverConfig)
    options: OptionsSection = Field(default_factory=OptionsSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @field_validator("frame", mode="before")
    @classmethod
    def _frame_shorthand(cls, v):
        return {"name": v} if isinstance(v, str) else v

    @model_validator(mode="after")
    def _check_grid_dimension(self):
        res = self.grid.resolution
        if isinstance(res, list) and len(res) != self.domain.dim:
            raise ValueError(f"grid has {len(res)} resolutions, domain has dimension {self.domain.dim}")
        return self

    def effective(self) -> dict:
        return self.model_dump(mode="json")

    def digest(self) -> str:
        """MD5 of the canonical effective configuration"""
        canonical = json.dumps(self.effective(), sort_keys=True, separators=(",", ":"))
        return hashlib.md5(canonical.encode()).hexdigest()


def _line_of(text: str, loc: Tuple) -> Optional[int]:
    """1-based line of the innermost key of loc found in order in the text"""
    position = None
    start = 0
    for part in loc:
        if not isinstance(part, str):
            continue
        found = text.find(f'"{part}"', start)
        if found < 0:
            break
        position = start = found
    if position is None:
        return None
    return text.count("\n", 0, position) + 1


def parse_config(text: str) -> RunConfig:
    """
    Validate a JSON run configuration

    Args:
        text: Config document

    Returns:
        RunConfig with defaults filled

    Raises:
        ConfigError: malformed JSON, unknown key, type mismatch, out-of-range
            value or dimension mismatch, naming the key and line
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed config: {e.msg}", line=e.lineno) from e
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", line=1)

    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        loc = tuple(part for part in err["loc"] if not str(part).startswith("function-"))
        key = ".".join(str(part) for part in loc) or None
        raise ConfigError(err["msg"], key=key, line=_line_of(text, loc)) from e

    expected = BUILTIN_FRAMES.get(cfg.frame.name)
    if expected is not None and expected != cfg.domain.dim:
        raise ConfigError(
            f"frame '{cfg.frame.name}' lives in R^{expected}, domain has dimension {cfg.domain.dim}",
            key="frame",
            line=_line_of(text, ("frame",))
        )
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text)


def irrelevant_options(cfg: RunConfig, command: str) -> List[str]:
    """Options set in the document that the command does not read"""
    used = COMMAND_OPTIONS[command]
    return sorted(name for name in cfg.options.model_fields_set if name not in used)
