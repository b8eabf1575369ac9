"""kinkwelfare - UI benefit kinks, search-model simulation and RKD estimation."""

__version__ = "0.1.0"


def main() -> None:
    """Main entry point for the kinkwelfare CLI."""
    import sys

    from .cli.app import run

    sys.exit(run(sys.argv[1:]))
