"""Run configuration language: grammar, parser and loader."""

from .loader import CellConfig, RunConfig, apply_overrides, load_config, resolve_cell
from .parser import ConfigParser, parse_config

__all__ = [
    "ConfigParser",
    "parse_config",
    "RunConfig",
    "CellConfig",
    "load_config",
    "apply_overrides",
    "resolve_cell",
]
