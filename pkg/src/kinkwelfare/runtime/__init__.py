"""Runtime components for kinkwelfare."""

from .estimator_registry import EstimatorRegistry, estimator_registry
from .files import atomic_path, write_text_atomic
from .grid_runner import CellResult, CellStatus, GridRunner, fits_frame

__all__ = [
    "EstimatorRegistry",
    "estimator_registry",
    "GridRunner",
    "CellResult",
    "CellStatus",
    "fits_frame",
    "atomic_path",
    "write_text_atomic",
]
