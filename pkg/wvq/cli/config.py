"""Configuration sources for the CLI: `key=value` files and the environment."""

from __future__ import annotations

import logging
import os
from collections.abc import Mapping
from pathlib import Path

from pydantic import ValidationError as SchemaError

from wvq.cli.schemas import ParameterFile
from wvq.errors import InvalidParameter

logger = logging.getLogger(__name__)

SEED_ENV = "WVQ_SEED"
DEFAULT_SEED = 12345


def parse_config_text(text: str) -> ParameterFile:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidParameter("config", raw, f"line {lineno} is not key=value")
        values[key.strip()] = value.strip()
    try:
        return ParameterFile.model_validate(values)
    except SchemaError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "config"
        raise InvalidParameter(field, values.get(field), first["msg"]) from exc


def load_config(path: str | Path) -> ParameterFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidParameter("config", str(path), str(exc)) from exc
    logger.debug("loaded configuration from %s", path)
    return parse_config_text(text)


def default_seed(environ: Mapping[str, str] | None = None) -> int:
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_SEED
    try:
        seed = int(raw)
    except ValueError as exc:
        raise InvalidParameter(SEED_ENV, raw, "must be an integer") from exc
    if seed < 0:
        raise InvalidParameter(SEED_ENV, raw, "must be >= 0")
    return seed
