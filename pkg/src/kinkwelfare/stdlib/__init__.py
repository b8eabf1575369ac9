"""Standard library of rules, estimation grids and published inputs."""

from . import grids, published

# Module registry for `use` resolution
STDLIB_MODULES = {
    "stdlib.grids": grids.GRIDS,
    "stdlib.published": published.PANELS,
}


def resolve_import(module_path: str, import_name: str):
    """Resolve ``use <module_path>.<import_name>`` to its value."""
    if module_path in STDLIB_MODULES:
        if import_name in STDLIB_MODULES[module_path]:
            return STDLIB_MODULES[module_path][import_name]

    raise ImportError(f"Cannot import {import_name} from {module_path}")


__all__ = ["STDLIB_MODULES", "resolve_import"]
