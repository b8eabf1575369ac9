"""Command-line interface for kinkwelfare."""

from .app import App, build_parser, run

__all__ = ["App", "build_parser", "run"]
