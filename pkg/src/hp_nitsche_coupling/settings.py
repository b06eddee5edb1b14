"""Environment helpers, config-file parsing and validation of CLI settings."""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import psutil
from pydantic import ValidationError

try:
    from hp_nitsche_coupling.models import ConfigError, StudyConfig
except ImportError:
    from .models import ConfigError, StudyConfig

logger = logging.getLogger(__name__)

ENV_NUM_THREADS = "HPNC_NUM_THREADS"
ENV_LOG_LEVEL = "HPNC_LOG_LEVEL"
ENV_OUTPUT_DIR = "HPNC_OUTPUT_DIR"

ALLOWED_ENV_VARS = frozenset({ENV_NUM_THREADS, ENV_LOG_LEVEL, ENV_OUTPUT_DIR})

# BLAS/OpenMP variables receiving the thread count
THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
)

CONFIG_KEYS = frozenset(StudyConfig.model_fields.keys())

_LOG_LEVELS = frozenset({"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"})
MAX_THREADS = 256


def default_thread_count() -> int:
    """Physical core count, falling back to logical cores."""
    count = psutil.cpu_count(logical=False) or psutil.cpu_count(logical=True) or 1
    return int(count)


def validate_thread_count(value: str) -> int:
    """Parse a positive thread count."""
    try:
        count = int(str(value).strip())
    except ValueError as e:
        raise ValueError(f"Thread count must be an integer, got '{value}'") from e
    if not 1 <= count <= MAX_THREADS:
        raise ValueError(f"Thread count must be between 1 and {MAX_THREADS}")
    return count


def resolve_thread_count(environ: Optional[Mapping[str, str]] = None) -> int:
    env = os.environ if environ is None else environ
    raw = env.get(ENV_NUM_THREADS, "").strip()
    if not raw:
        return default_thread_count()
    try:
        return validate_thread_count(raw)
    except ValueError as e:
        logger.warning("Ignoring %s: %s", ENV_NUM_THREADS, e)
        return default_thread_count()


def apply_thread_environment(environ: Optional[Dict[str, str]] = None) -> int:
    """
    Export the thread count to the BLAS/OpenMP variables.

    Variables already set by the user are left alone. Must run before numpy
    initializes its BLAS backend to have an effect.

    Returns:
        The thread count in effect
    """
    env = os.environ if environ is None else environ
    count = resolve_thread_count(env)
    for name in THREAD_ENV_VARS:
        env.setdefault(name, str(count))
    return count


def validate_log_level(level: str) -> str:
    if not level or not isinstance(level, str):
        raise ValueError("Log level must be a non-empty string")
    clean = level.strip().upper()
    if clean not in _LOG_LEVELS:
        raise ValueError(
            f"Unsupported log level '{level}'. Allowed: {', '.join(sorted(_LOG_LEVELS))}"
        )
    return clean


def log_level_from_env() -> str:
    raw = os.getenv(ENV_LOG_LEVEL, "INFO")
    try:
        return validate_log_level(raw)
    except ValueError:
        return "INFO"


def output_dir_from_env() -> Optional[Path]:
    raw = os.getenv(ENV_OUTPUT_DIR, "").strip()
    return Path(raw) if raw else None


def validate_config_key(key: str) -> str:
    """Allow only StudyConfig field names in config files."""
    clean = key.strip()
    if not clean:
        raise ConfigError("Empty configuration key")
    if clean not in CONFIG_KEYS:
        raise ConfigError(
            f"Unsupported configuration key '{clean}'. Allowed: {', '.join(sorted(CONFIG_KEYS))}"
        )
    return clean


def parse_config_text(text: str, source: str = "<string>") -> Dict[str, str]:
    """
    Parse flat key=value lines.

    Blank lines and lines starting with '#' are ignored; trailing comments are
    not supported so that values may contain '#'.

    Raises:
        ConfigError: On malformed lines, unknown or duplicate keys
    """
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got '{line}'")
        key, value = line.split("=", 1)
        key = validate_config_key(key)
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        value = value.strip()
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for '{key}'")
        values[key] = value
    return values


def load_config_file(path: Path) -> Dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}", cause=e) from e
    logger.debug("Loaded config file %s", path)
    return parse_config_text(text, source=str(path))


def build_study_config(
    file_values: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> StudyConfig:
    """
    Merge defaults, config-file values and command-line overrides.

    Overrides set to None are ignored.

    Raises:
        ConfigError: When the merged values fail validation
    """
    merged: Dict[str, Any] = dict(file_values or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[validate_config_key(key)] = value
    try:
        config = StudyConfig(**merged)
    except ValidationError as e:
        raise ConfigError("Invalid study configuration", cause=e) from e
    out_dir = output_dir_from_env()
    if config.output is None and out_dir is not None:
        name = f"{config.example.value}-{config.mode.value}.csv"
        config = config.model_copy(update={"output": out_dir / name})
    return config
