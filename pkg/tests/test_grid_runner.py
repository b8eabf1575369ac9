"""Tests for the estimation grid runner."""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import threading
import time

import numpy as np
import pandas as pd
import pytest

from kinkwelfare.core.rkd import RkdSpec, fuzzy_rkd
from kinkwelfare.core.schedule import initial_benefit
from kinkwelfare.runtime.estimator_registry import EstimatorRegistry
from kinkwelfare.runtime.grid_runner import (
    CellResult,
    CellStatus,
    GridRunner,
    fits_frame,
)
from kinkwelfare.stdlib.rules import POST_RULE


def grid_frame() -> pd.DataFrame:
    w = np.linspace(600.0, 1000.0, 2001)
    b = initial_benefit(POST_RULE, w)
    return pd.DataFrame({"w": w, "b": b, "y": 2.0 * b + 0.1 * w, "z": 3.0 * b})


def spec(label: str, **changes) -> RkdSpec:
    settings = dict(
        outcome="y",
        kink_point=800.0,
        running="w",
        treatment="b",
        bandwidth=150.0,
        known_slope_change=-0.5,
        label=label,
    )
    settings.update(changes)
    return RkdSpec(**settings)


def mixed_grid():
    return [
        spec("fuzzy"),
        spec("sharp", method="sharp"),
        spec("empty", sample_window=(2000.0, None)),
        spec("z", outcome="z", bandwidth=100.0),
        spec("missing", outcome="nope"),
    ]


def test_runner_rejects_bad_jobs():
    """Test the worker count invariant."""
    with pytest.raises(ValueError):
        GridRunner(jobs=0)


def test_results_in_cell_order_with_failures_in_place():
    """Test that failing cells are recorded and the rest still run."""
    runner = GridRunner(EstimatorRegistry())
    results = runner.run(grid_frame(), mixed_grid())

    assert [r.label for r in results] == ["fuzzy", "sharp", "empty", "z", "missing"]
    assert [r.index for r in results] == [0, 1, 2, 3, 4]
    assert [r.ok for r in results] == [True, True, False, True, False]
    assert results[0].fit.alpha == pytest.approx(2.0, rel=1e-8)
    assert results[3].fit.alpha == pytest.approx(3.0, rel=1e-8)
    assert results[3].fit.h_used == 100.0

    empty = results[2]
    assert empty.status is CellStatus.FAILED
    assert empty.fit is None
    assert empty.error_type == "EmptyWindowError"
    assert empty.failure_record() == {
        "index": 2,
        "label": "empty",
        "outcome": "y",
        "error_type": "EmptyWindowError",
        "error": empty.error,
    }
    assert results[4].error_type == "EstimationError"

    records = [r.record() for r in results]
    assert records[2] == empty.failure_record()
    assert records[0]["alpha"] == results[0].fit.alpha
    assert [r["label"] for r in records] == [r.label for r in results]


def test_statistics():
    """Test run counters."""
    runner = GridRunner(EstimatorRegistry())
    runner.run(grid_frame(), mixed_grid())

    stats = runner.get_statistics()
    assert stats.total == 5
    assert stats.succeeded == 3
    assert stats.failed == 2
    assert stats.by_error == {"EmptyWindowError": 1, "EstimationError": 1}


def test_parallel_run_matches_serial():
    """Test that worker threads give the same results as one worker."""
    data = grid_frame()
    serial = GridRunner(EstimatorRegistry(), jobs=1).run(data, mixed_grid())
    parallel = GridRunner(EstimatorRegistry(), jobs=4).run(data, mixed_grid())

    assert [r.label for r in parallel] == [r.label for r in serial]
    assert [r.status for r in parallel] == [r.status for r in serial]
    for a, b in zip(serial, parallel):
        if a.ok:
            assert a.fit.alpha == b.fit.alpha
            assert a.fit.se_alpha == b.fit.se_alpha


def test_cells_run_concurrently():
    """Test that several cells are in flight at once when jobs > 1."""
    registry = EstimatorRegistry()
    registry.clear()
    active = []
    peak = []
    lock = threading.Lock()

    def slow(data, cell_spec, **kwargs):
        with lock:
            active.append(cell_spec.label)
            peak.append(len(active))
        time.sleep(0.05)
        with lock:
            active.remove(cell_spec.label)
        return fuzzy_rkd(data, cell_spec, **kwargs)

    registry.register("fuzzy", slow)
    specs = [spec(f"cell{i}") for i in range(6)]
    results = GridRunner(registry, jobs=3).run(grid_frame(), specs)

    assert all(r.ok for r in results)
    assert max(peak) > 1


def test_unlabeled_cells_get_index_labels():
    """Test default labels for cells without one."""
    results = GridRunner(EstimatorRegistry()).run(grid_frame(), [spec("")])
    assert results[0].label == "cell0"
    assert results[0].fit.label == "cell0"


def test_empty_grid():
    """Test that an empty grid returns nothing."""
    runner = GridRunner(EstimatorRegistry(), jobs=4)
    assert runner.run(grid_frame(), []) == []
    assert runner.get_statistics().total == 0


def test_fits_frame():
    """Test flattening successful cells to rows."""
    results = GridRunner(EstimatorRegistry()).run(grid_frame(), mixed_grid())
    frame = fits_frame(results)

    assert list(frame["label"]) == ["fuzzy", "sharp", "z"]
    assert "spec" not in frame.columns
    assert {"alpha", "se_alpha", "h_used", "n_used"} <= set(frame.columns)
    assert fits_frame([]).empty
    assert fits_frame([CellResult(index=0, spec=spec("x"))]).empty


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
