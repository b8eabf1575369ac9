"""Runs grids of RKD specifications against one dataset.

Cells are queued and drained by up to ``jobs`` worker threads. A failing cell is
recorded with its error and does not stop the rest of the grid. Results always
come back in cell order.
"""

import logging
import queue
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import pandas as pd

from ..core.rkd import RkdFit, RkdSpec
from .estimator_registry import EstimatorRegistry, estimator_registry

logger = logging.getLogger(__name__)


class CellStatus(Enum):
    """Lifecycle of a grid cell."""
    PENDING = "pending"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


@dataclass
class CellResult:
    """Outcome of one grid cell."""
    index: int
    spec: RkdSpec
    status: CellStatus = CellStatus.PENDING
    fit: Optional[RkdFit] = None
    error: Optional[str] = None
    error_type: Optional[str] = None

    @property
    def label(self) -> str:
        return self.spec.label or f"cell{self.index}"

    @property
    def ok(self) -> bool:
        return self.status is CellStatus.SUCCEEDED

    def failure_record(self) -> Dict[str, object]:
        return {
            "index": self.index,
            "label": self.label,
            "outcome": self.spec.outcome,
            "error_type": self.error_type,
            "error": self.error,
        }

    def record(self) -> Dict[str, object]:
        """The fit as a dict, or the failure record when the cell failed."""
        return self.fit.to_dict() if self.ok else self.failure_record()


@dataclass
class GridStats:
    """Counters for a grid run."""
    total: int = 0
    succeeded: int = 0
    failed: int = 0
    by_error: Dict[str, int] = field(default_factory=dict)


class GridRunner:
    """Fits every spec in a grid, optionally in parallel."""

    def __init__(self, registry: Optional[EstimatorRegistry] = None, jobs: int = 1):
        if jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {jobs}")
        self.registry = registry or estimator_registry
        self.jobs = jobs
        self._stats = GridStats()
        self._lock = threading.RLock()

    def run(self, data: pd.DataFrame, specs: Sequence[RkdSpec]) -> List[CellResult]:
        """Fit all cells.

        Args:
            data: Analysis frame shared by every cell (read only)
            specs: Grid cells

        Returns:
            One CellResult per spec, in the order given
        """
        results = [CellResult(index=i, spec=s) for i, s in enumerate(specs)]
        tasks: "queue.Queue[CellResult]" = queue.Queue()
        for result in results:
            tasks.put(result)

        n_workers = min(self.jobs, len(results)) or 1
        if n_workers == 1:
            self._drain(data, tasks)
        else:
            workers = [
                threading.Thread(target=self._drain, args=(data, tasks), daemon=True)
                for _ in range(n_workers)
            ]
            for worker in workers:
                worker.start()
            for worker in workers:
                worker.join()
        return results

    def _drain(self, data: pd.DataFrame, tasks: "queue.Queue[CellResult]"):
        while True:
            try:
                result = tasks.get_nowait()
            except queue.Empty:
                return
            self._run_cell(data, result)
            tasks.task_done()

    def _run_cell(self, data: pd.DataFrame, result: CellResult):
        result.status = CellStatus.RUNNING
        logger.debug("fitting cell %s (%s)", result.label, result.spec.method)
        try:
            result.fit = self.registry.fit(data, result.spec)
            if not result.fit.label:
                result.fit.label = result.label
            result.status = CellStatus.SUCCEEDED
        except Exception as exc:
            result.status = CellStatus.FAILED
            result.error = str(exc)
            result.error_type = type(exc).__name__
            logger.error("cell %s failed: %s: %s", result.label, result.error_type, exc)
        self._record(result)

    def _record(self, result: CellResult):
        with self._lock:
            self._stats.total += 1
            if result.ok:
                self._stats.succeeded += 1
            else:
                self._stats.failed += 1
                key = result.error_type or "Exception"
                self._stats.by_error[key] = self._stats.by_error.get(key, 0) + 1

    def get_statistics(self) -> GridStats:
        with self._lock:
            return GridStats(
                total=self._stats.total,
                succeeded=self._stats.succeeded,
                failed=self._stats.failed,
                by_error=dict(self._stats.by_error),
            )


def fits_frame(results: Sequence[CellResult]) -> pd.DataFrame:
    """Flatten successful cells into one row per fit."""
    rows = []
    for result in results:
        if not result.ok:
            continue
        row = result.fit.to_dict()
        row.pop("spec", None)
        row["label"] = result.label
        rows.append(row)
    return pd.DataFrame(rows)
