"""Tests for the rule-of-thumb and MSE bandwidth selectors."""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import math

import numpy as np
import pandas as pd
import pytest

from kinkwelfare.core.errors import BandwidthError
from kinkwelfare.core.rkd import (
    RkdSpec,
    boundary_constant,
    fg_bandwidth,
    kink_kernel_constants,
    mse_optimal_bandwidth,
    resolve_bandwidth,
    sharp_rkd,
)


def curved_frame(n: int = 20_000, seed: int = 3, sd: float = 50.0) -> pd.DataFrame:
    """Quadratic outcome around a kink at 0 with homoskedastic noise."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-500.0, 500.0, n)
    y = 0.001 * x**2 + 0.5 * np.maximum(x, 0.0) + rng.normal(0.0, sd, n)
    return pd.DataFrame({"x": x, "y": y})


def spec(**changes) -> RkdSpec:
    settings = dict(outcome="y", kink_point=0.0, running="x", method="sharp")
    settings.update(changes)
    return RkdSpec(**settings)


def test_boundary_constant_local_linear_uniform():
    """Test the closed form of the local-linear uniform constant."""
    assert boundary_constant(1, "uniform") == pytest.approx(72.0 ** 0.2, rel=1e-10)
    assert boundary_constant(2, "uniform") > 0
    assert boundary_constant(1, "triangular") != boundary_constant(1, "uniform")


def test_fg_matches_direct_plug_in():
    """Test the FG bandwidth against the formula evaluated by hand."""
    rng = np.random.default_rng(12)
    x = np.linspace(-100.0, 100.0, 2001)
    y = rng.normal(0.0, 2.0, len(x))
    frame = pd.DataFrame({"x": x, "y": y})

    expected = []
    for mask in (x < 0, x >= 0):
        coef = np.polyfit(x[mask], y[mask], 4)
        residuals = y[mask] - np.polyval(coef, x[mask])
        second = np.polyval(np.polyder(coef, 2), x[mask])
        ratio = np.mean(residuals**2) * np.ptp(x[mask]) / np.sum(second**2)
        expected.append(72.0 ** 0.2 * ratio ** 0.2)
    assert fg_bandwidth(frame, spec()) == pytest.approx(min(expected), rel=1e-6)


def test_fg_scale_equivariance():
    """Test that rescaling the running variable rescales h."""
    frame = curved_frame()
    h = fg_bandwidth(frame, spec())
    scaled = fg_bandwidth(frame.assign(x=frame["x"] * 3.0), spec())
    assert scaled == pytest.approx(3.0 * h, rel=1e-6)


def test_fg_shrinks_with_duplicated_sample():
    """Test that doubling every observation shrinks h by 2^(-1/(2p+3))."""
    frame = curved_frame(n=5000)
    doubled = pd.concat([frame, frame], ignore_index=True)
    for p in (1, 2):
        h = fg_bandwidth(frame, spec(poly_order=p))
        h2 = fg_bandwidth(doubled, spec(poly_order=p))
        assert h2 == pytest.approx(h * 2.0 ** (-1.0 / (2 * p + 3)), rel=1e-6)


def test_fg_needs_observations_on_both_sides():
    """Test the minimum side size."""
    x = np.concatenate([np.linspace(-10.0, -1.0, 10), np.linspace(0.0, 10.0, 100)])
    frame = pd.DataFrame({"x": x, "y": x**2})
    with pytest.raises(BandwidthError):
        fg_bandwidth(frame, spec())


def test_slope_change_constants_match_regression_on_square():
    """Test the bias constants against a fit to u^2 on a dense grid."""
    x = np.linspace(-1.0, 1.0, 200_001)
    frame = pd.DataFrame({"x": x, "y": x**2})
    for kernel in ("uniform", "triangular"):
        constants = kink_kernel_constants(1, kernel)
        fit = sharp_rkd(
            frame, spec(kernel=kernel, bandwidth=1.0), known_slope_change=1.0
        )
        assert fit.nu1 == pytest.approx(
            constants.bias_left + constants.bias_right, rel=1e-3
        )
        assert constants.variance_left == pytest.approx(
            constants.variance_right, rel=1e-8
        )


def test_mse_scale_equivariance():
    """Test that rescaling the running variable rescales the MSE bandwidth."""
    frame = curved_frame()
    h = mse_optimal_bandwidth(frame, spec(kernel="triangular"))
    scaled = mse_optimal_bandwidth(
        frame.assign(x=frame["x"] * 2.0), spec(kernel="triangular")
    )
    assert scaled == pytest.approx(2.0 * h, rel=1e-3)


def test_mse_kernels_differ():
    """Test that the kernel choice changes the bandwidth."""
    frame = curved_frame()
    uniform = mse_optimal_bandwidth(frame, spec())
    triangular = mse_optimal_bandwidth(frame, spec(kernel="triangular"))
    assert uniform > 0
    assert triangular > 0
    assert uniform != pytest.approx(triangular, rel=1e-3)


def test_mse_near_minimizer_of_theoretical_mse():
    """Test the plug-in against the MSE curve built from the true DGP."""
    sd = 50.0
    frame = curved_frame(sd=sd)
    n = len(frame)
    p = 1
    constants = kink_kernel_constants(p, "uniform")
    curvature = 0.002
    bias = curvature * (constants.bias_left + constants.bias_right) / math.factorial(2)
    variance = sd**2 * (constants.variance_left + constants.variance_right)
    density = 1.0 / 1000.0

    grid = np.linspace(20.0, 500.0, 4801)
    mse = grid ** (2 * p) * bias**2 + variance / (n * density * grid**3)
    best = grid[np.argmin(mse)]
    assert mse_optimal_bandwidth(frame, spec()) == pytest.approx(best, rel=0.25)


def test_resolve_bandwidth():
    """Test dispatch between fixed and data-driven bandwidths."""
    frame = curved_frame(n=5000)
    assert resolve_bandwidth(frame, spec(bandwidth=120.0)) == 120.0
    assert resolve_bandwidth(frame, spec(bandwidth="fg")) == fg_bandwidth(
        frame, spec()
    )
    assert resolve_bandwidth(frame, spec(bandwidth="mse")) == mse_optimal_bandwidth(
        frame, spec()
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
