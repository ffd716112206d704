"""TOML experiment files."""
import logging
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from fractions import Fraction
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from services.model.presets import from_tables, parse_spec
from shared.exceptions import ConfigError
from shared.models import AssemblySpec, Rational

logger = logging.getLogger(__name__)

_LINE = re.compile(r"line (\d+)")


class ExperimentConfig(BaseModel):
    """Keys accepted in an experiment file; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True, arbitrary_types_allowed=True)

    spec: str
    n: int
    theta: Optional[Rational] = None
    u: Rational = Fraction(1)
    m: Optional[List[int]] = None
    w: Optional[List[Union[int, float, str]]] = None
    seed: int = 0
    backend: Literal["exact", "float"] = "exact"
    r: Optional[int] = None
    r_list: Optional[List[int]] = None
    replicas: Optional[int] = None
    n1: Optional[int] = None
    theta_lo: Optional[Rational] = None
    theta_hi: Optional[Rational] = None
    out: Optional[str] = None
    svg: Optional[str] = None

    @field_validator("n", "r", "replicas", "n1")
    @classmethod
    def _positive(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("u", "theta", "theta_lo", "theta_hi")
    @classmethod
    def _positive_rational(cls, v: Optional[Fraction]) -> Optional[Fraction]:
        if v is not None and v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("seed")
    @classmethod
    def _seed(cls, v: int) -> int:
        if v < 0:
            raise ValueError("must be nonnegative")
        return v


class LoadedConfig(BaseModel):
    """Resolved assembly family plus the validated experiment parameters."""

    model_config = ConfigDict(frozen=True)

    spec: AssemblySpec
    params: ExperimentConfig


def _key_line(text: str, key: str) -> Optional[int]:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return number
    return None


def _resolve_spec(params: ExperimentConfig, text: str) -> AssemblySpec:
    try:
        if params.spec == "explicit":
            if params.m is None or params.w is None:
                raise ConfigError("explicit spec needs m and w tables")
            return from_tables(params.m, params.w, u=params.u)
        return parse_spec(params.spec, theta=params.theta, u=params.u)
    except ConfigError as e:
        if e.line is not None:
            raise
        raise ConfigError(str(e), _key_line(text, "spec")) from e
    except ValueError as e:
        raise ConfigError(f"invalid spec: {e}", _key_line(text, "spec")) from e


def parse_config(text: str) -> LoadedConfig:
    """Validate an experiment document.

    Raises:
        ConfigError: Syntax errors, duplicate or unknown keys, bad values;
            the message carries the offending line when it can be located
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = _LINE.search(str(e))
        raise ConfigError(f"malformed file: {e}", int(match.group(1)) if match else None) from e
    try:
        params = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        key = str(first["loc"][0]) if first["loc"] else ""
        raise ConfigError(f"{key}: {first['msg']}", _key_line(text, key)) from e
    spec = _resolve_spec(params, text)
    logger.info(f"Loaded config for '{spec.name}' with n={params.n}, backend={params.backend}, seed={params.seed}")
    return LoadedConfig(spec=spec, params=params)


def load_config(path: Union[str, Path]) -> LoadedConfig:
    """Read and validate a TOML experiment file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    return parse_config(text)
