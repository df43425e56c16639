"""
Configuration loader for hestonam.

Run configurations are flat files of dotted keys (``model.kappa = 2.0``),
read as TOML, or JSON documents with the same nested blocks.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import ValidationError

from .data.models import RunConfig
from .exceptions import ConfigurationError, InvalidConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)


def validation_fields(exc: ValidationError) -> list[tuple[str, str]]:
    """Flatten a pydantic error into (dotted key, reason) pairs."""
    fields = []
    for error in exc.errors():
        key = ".".join(str(part) for part in error["loc"]) or "<root>"
        if error["type"] == "extra_forbidden":
            reason = "unknown key"
        else:
            reason = error["msg"]
        fields.append((key, reason))
    return fields


def build_config(data: dict[str, Any], source: Optional[str] = None) -> RunConfig:
    """
    Validate a nested configuration mapping.

    Every offending key is reported at once.

    Raises:
        InvalidConfigError: If any block fails validation
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise InvalidConfigError(validation_fields(e), source=source) from e


def read_config_file(path: Union[str, Path]) -> dict[str, Any]:
    """Parse a TOML or JSON config file into a nested mapping."""
    path = Path(path).expanduser()
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")

    try:
        if path.suffix.lower() == ".json":
            with open(path, "r") as f:
                data = json.load(f)
        else:
            with open(path, "rb") as f:
                data = tomllib.load(f)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigurationError(f"Cannot parse config file {path}", details=str(e)) from e

    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must hold key/value pairs")
    return data


def load_config(path: Optional[Union[str, Path]] = None, **overrides: dict[str, Any]) -> RunConfig:
    """
    Load and validate a run configuration.

    Args:
        path: Optional config file; defaults are used for absent keys
        **overrides: Per-section values that replace file values (None is ignored)

    Returns:
        Validated RunConfig
    """
    data = read_config_file(path) if path else {}
    for section, updates in overrides.items():
        values = {k: v for k, v in updates.items() if v is not None}
        if values:
            block = data.setdefault(section, {})
            if not isinstance(block, dict):
                raise InvalidConfigError([(section, "must be a table of keys")], str(path))
            block.update(values)

    config = build_config(data, source=str(path) if path else None)
    logger.debug(f"Loaded configuration {config.params_hash()} from {path or 'defaults'}")
    return config
