import hashlib
import json
import os
import re
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Union

import numpy as np
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from carbm.core.errors import ConfigError

# Load .env from project root
project_root = Path(__file__).parent.parent.parent
env_path = project_root / ".env"
load_dotenv(env_path)

COMMANDS = ("decompose", "thermal-state", "lee-yang", "fisher", "gn-scan", "validate")
_TYPE_TAGS = {"int", "float", "str", "bool"}


def substitute_env_vars(value):
    """
    Recursively substitute ${VAR_NAME} or ${VAR_NAME:-default} patterns
    with environment variable values.
    """
    if isinstance(value, str):
        # Pattern matches ${VAR_NAME} or ${VAR_NAME:-default_value}
        pattern = r'\$\{([^}:]+)(?::-([^}]*))?\}'

        def replace_match(match):
            var_name = match.group(1)
            default_value = match.group(2) if match.group(2) is not None else ""
            return os.environ.get(var_name, default_value)

        return re.sub(pattern, replace_match, value)
    elif isinstance(value, dict):
        return {k: substitute_env_vars(v) for k, v in value.items()}
    elif isinstance(value, list):
        return [substitute_env_vars(item) for item in value]
    return value


def load_yaml_with_env(yaml_path: Path) -> dict:
    """
    Parse a YAML file and substitute ${VAR} references; a missing file gives {}.

    JSON documents load too because the YAML parser accepts JSON syntax.
    """
    if not yaml_path.exists():
        return {}

    raw = yaml.safe_load(yaml_path.read_text()) or {}
    return substitute_env_vars(raw)


# =============================================================================
# Ambient settings
# =============================================================================

class CartanSettings(BaseSettings):
    tolerance: float = 1e-9
    max_iter: int = 20000
    max_closure_dim: int = 4096
    gamma: float = (5 ** 0.5 - 1) / 2


class CacheSettings(BaseSettings):
    dir: str = ".carbm_cache"
    enabled: bool = True


class SimulatorSettings(BaseSettings):
    dense_check_qubits: int = 8
    psd_tolerance: float = 1e-10
    max_qubits: int = 12


class RunnerSettings(BaseSettings):
    """Grid worker threads; 0 lets the pool pick (available cores)."""
    threads: int = 0


class LoggingSettings(BaseSettings):
    level: str = "INFO"


class Settings(BaseSettings):
    cartan: CartanSettings = CartanSettings()
    cache: CacheSettings = CacheSettings()
    simulator: SimulatorSettings = SimulatorSettings()
    runner: RunnerSettings = RunnerSettings()
    logging: LoggingSettings = LoggingSettings()

    model_config = SettingsConfigDict(
        env_file=".env",
        env_nested_delimiter="__",
        extra="ignore",
    )


@lru_cache()
def get_settings() -> Settings:
    """Load settings from YAML config file with environment variable substitution."""
    config_path = project_root / "config" / "settings.yaml"

    # Load YAML with ${VAR_NAME} substitution from .env
    yaml_config = load_yaml_with_env(config_path)

    return Settings(**yaml_config)


# =============================================================================
# Run configuration
# =============================================================================

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelConfig(_Strict):
    """Model block: XXZ chain or Gross-Neveu."""
    kind: Literal["xxz", "gross_neveu"] = "xxz"
    L: int = Field(4, ge=2)
    J: float = 1.0
    Jz: float = 1.0
    g_r: float = 0.0
    N: int = Field(2, ge=1)
    G: float = 1.0
    mu: float = 0.0
    m: float = 0.0


class AxisConfig(_Strict):
    name: Optional[str] = None
    lo: float
    hi: float
    steps: int = Field(41, ge=1)


class GridConfig(_Strict):
    """Scan axes; unset axes fall back to the driver defaults."""
    axis1: Optional[AxisConfig] = None
    axis2: Optional[AxisConfig] = None


class RunConfig(_Strict):
    command: Literal["decompose", "thermal-state", "lee-yang", "fisher", "gn-scan", "validate"] = "validate"
    model: ModelConfig = ModelConfig()
    grid: GridConfig = GridConfig()
    beta: float = Field(1.0, ge=0.0)
    correction: Union[Literal["off"], int] = "off"
    scheme: Literal["standard", "correctable"] = "standard"
    seed: int = Field(0, ge=0)
    # Optimizer defaults come from the cartan settings block
    tolerance: float = Field(default_factory=lambda: get_settings().cartan.tolerance, gt=0.0)
    max_iter: int = Field(default_factory=lambda: get_settings().cartan.max_iter, ge=1)
    max_closure_dim: int = Field(default_factory=lambda: get_settings().cartan.max_closure_dim, ge=1)
    out: str = "out"
    cache_dir: Optional[str] = None
    threads: Optional[int] = Field(None, ge=1)
    mode: Literal["mixed_density", "tfd_purified"] = "mixed_density"
    threshold: float = Field(0.05, gt=0.0)
    absolute_z: bool = False
    full_k: bool = False
    dump_state: bool = False

    @field_validator("correction", mode="before")
    @classmethod
    def _parse_correction(cls, value):
        if isinstance(value, str) and value != "off":
            try:
                value = int(value)
            except ValueError:
                raise ValueError("correction must be 'off' or a non-negative layer count")
        if isinstance(value, int) and not isinstance(value, bool) and value < 0:
            raise ValueError("correction must be 'off' or a non-negative layer count")
        return value

    @property
    def max_corrections(self) -> int:
        return 0 if self.correction == "off" else int(self.correction)


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_grid_flag(text: str) -> Dict[str, Dict[str, Any]]:
    """Parse "a1:lo:hi:steps,a2:lo:hi:steps" into grid axis blocks."""
    axes = [part.strip() for part in text.split(",") if part.strip()]
    if len(axes) != 2:
        raise ConfigError(f"--grid needs two axes, got {text!r}", key="grid")
    grid = {}
    for slot, part in zip(("axis1", "axis2"), axes):
        fields = part.split(":")
        if len(fields) != 4:
            raise ConfigError(f"Axis {part!r} is not name:lo:hi:steps", key=f"grid.{slot}")
        name, lo, hi, steps = fields
        try:
            grid[slot] = {"name": name or None, "lo": float(lo), "hi": float(hi), "steps": int(steps)}
        except ValueError:
            raise ConfigError(f"Axis {part!r} has non-numeric bounds", key=f"grid.{slot}")
    return grid


def _error_key(loc) -> str:
    """Dotted field path of a validation error, without union-member tags."""
    parts = []
    for part in loc:
        if not isinstance(part, str) or not part.isidentifier() or part in _TYPE_TAGS:
            break
        parts.append(part)
    return ".".join(parts) or "config"


def parse_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Merge built-in defaults < config file < flag overrides.

    Raises:
        ConfigError: unreadable file, unknown key, type mismatch or range violation;
            ``key`` names the offending field
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file {path} not found", key="config")
        try:
            data = load_yaml_with_env(path)
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse {path}: {e}", key="config")
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a mapping", key="config")

    merged = _deep_merge(data, {k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        first = e.errors()[0]
        key = _error_key(first["loc"])
        raise ConfigError(
            f"Invalid value for {key}: {first['msg']}",
            key=key,
            details={"errors": [
                {"loc": [str(p) for p in err["loc"]], "msg": err["msg"]} for err in e.errors()
            ]},
        )


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON dump of a run configuration."""
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic per-component seed from a master seed."""
    return int(np.random.SeedSequence(master, spawn_key=tuple(keys)).generate_state(1)[0])
