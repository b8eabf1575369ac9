"""Tests for the search model: reservation wages, truncated moments, UI duration."""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import math

import numpy as np
import pytest
from scipy import optimize, stats

from kinkwelfare.core.errors import ModelError, SolverError
from kinkwelfare.core.schedule import BenefitRule
from kinkwelfare.core.search_model import (
    ModelParams,
    ModelSolution,
    WorkerType,
    accepted_wage_moments,
    benefit_derivatives,
    expected_benefits_from_level,
    expected_total_benefits,
    expected_ui_duration,
    monthly_exit_probability,
    offer_cdf,
    solve_model,
    surplus_integral,
    survival_weights,
)
from kinkwelfare.stdlib.rules import POST_RULE

NO_OFFERS = ModelParams(
    utility="linear", delta=0.0, gamma=0.0, lambda_offer=0.0, tau=0.0, b=400, y=150
)


@pytest.fixture(scope="module")
def calibrated():
    params = ModelParams()
    return params, solve_model(params)


@pytest.fixture(scope="module")
def calibrated_derivatives():
    return benefit_derivatives(ModelParams(), POST_RULE)


def test_params_validation():
    """Test parameter invariants."""
    with pytest.raises(ModelError):
        ModelParams(sigma=0.0)
    with pytest.raises(ModelError):
        ModelParams(b=100.0, b_a=200.0)
    with pytest.raises(ModelError):
        ModelParams(gamma=-0.1)
    with pytest.raises(ModelError):
        ModelParams(utility="log")
    with pytest.raises(ModelError):
        ModelParams(risk_aversion=0.0)


def test_worker_type_offsets():
    """Test that a worker type shifts the offer rate and log-wage mean."""
    shifted = WorkerType(weight=0.5, lambda_offset=-0.5, mu_offset=0.1).apply(
        ModelParams()
    )
    assert shifted.lambda_offer == 0.0
    assert shifted.mu == pytest.approx(math.log(1200.0) + 0.1)


def test_no_offers_reservation_wage_is_flow_income():
    """Test that without offers the reservation wage equals b + y."""
    sol = solve_model(NO_OFFERS)
    assert isinstance(sol, ModelSolution)
    assert sol.w_star_eligible == pytest.approx(550.0, abs=1e-6)
    assert sol.w_star_exhausted == pytest.approx(150.0, abs=1e-6)


def test_identical_states_share_reservation_wage():
    """Test that b_a == b makes both states identical."""
    sol = solve_model(NO_OFFERS.replace(b_a=400.0))
    assert sol.w_star_exhausted == pytest.approx(sol.w_star_eligible, abs=1e-6)

    cara = ModelParams(b_a=400.0)
    sol = solve_model(cara)
    assert sol.w_star_exhausted == pytest.approx(sol.w_star_eligible, rel=1e-6)


def test_solver_preconditions():
    """Test the undiscounted cases without a stationary solution and bad tolerances."""
    with pytest.raises(ModelError):
        solve_model(ModelParams(r=0.0))
    with pytest.raises(ModelError):
        solve_model(ModelParams(r=0.0, gamma=0.0, delta=0.0))
    with pytest.raises(ModelError):
        solve_model(ModelParams(r=0.0, gamma=0.0, lambda_offer=0.0))
    with pytest.raises(ModelError):
        solve_model(ModelParams(), tol=0.0)


def test_undiscounted_reservation_wage():
    """Test r = 0 against its flow condition and a vanishing discount rate."""
    p = ModelParams(r=0.0, gamma=0.0, utility="linear", tau=0.0)
    sol = solve_model(p)
    w_star = sol.w_star_eligible
    gain = p.lambda_offer * surplus_integral(p, w_star) / p.delta
    assert w_star == pytest.approx(p.b + p.y + gain, rel=1e-8)
    assert math.isinf(sol.U) and math.isinf(sol.S)
    assert sol.w_star_exhausted < w_star

    nearly = solve_model(p.replace(r=1e-7))
    assert nearly.w_star_eligible == pytest.approx(w_star, rel=1e-4)
    assert nearly.w_star_exhausted == pytest.approx(sol.w_star_exhausted, rel=1e-4)


def test_solver_error_carries_residual():
    """Test the solver error message format."""
    err = SolverError("did not converge", residual=0.5, params={"b": 1.0})
    assert "residual=5.000e-01" in str(err)
    assert err.params == {"b": 1.0}


def test_calibrated_reservation_wages(calibrated):
    """Test ordering of the calibrated solution."""
    params, sol = calibrated
    assert sol.residual <= 1e-8
    assert sol.w_star_exhausted < sol.w_star_eligible
    assert sol.w_star_eligible > params.b + params.y


def test_reservation_wage_rises_with_benefit(calibrated):
    """Test that a higher benefit raises w*."""
    params, sol = calibrated
    higher = solve_model(params.replace(b=params.b + 50.0))
    assert higher.w_star_eligible > sol.w_star_eligible


@pytest.mark.parametrize("lambda_offer", [0.2, 0.4])
def test_reservation_wage_monotone_in_income_and_eligibility_loss(lambda_offer):
    """Test that w* rises with informal income and falls with gamma."""
    base = ModelParams(lambda_offer=lambda_offer)
    by_income = [
        solve_model(base.replace(y=y)).w_star_eligible for y in (50.0, 150.0, 300.0)
    ]
    assert np.all(np.diff(by_income) > 0)

    by_gamma = [
        solve_model(base.replace(gamma=g)).w_star_eligible
        for g in (1.0 / 12.0, 1.0 / 9.0, 1.0 / 6.0, 0.5)
    ]
    assert np.all(np.diff(by_gamma) < 0)


def test_surplus_integral_linear_closed_form():
    """Test G(c) at c -> 0 with linear utility equals E[w] - c."""
    p = ModelParams(utility="linear", tau=0.0, mu=0.0, sigma=0.5)
    expected = math.exp(0.5 * 0.25)
    assert surplus_integral(p, 0.0) == pytest.approx(expected, rel=1e-8)


def _vfi_reservation_wage(p: ModelParams, points: int = 100_000) -> float:
    """Reservation wage from expectations over an equal-probability wage grid."""
    a = p.risk_aversion
    z = stats.norm.ppf((np.arange(points) + 0.5) / points)
    wages = np.exp(p.mu + p.sigma * z)

    def u(c):
        return -np.exp(-a * np.asarray(c, dtype=float)) / a

    work = u(wages - p.tau)
    k = p.r + p.delta

    def exhausted_value(U):
        def g(w):
            gain = np.maximum(work - u(w - p.tau), 0.0).mean() / k
            V = (u(w - p.tau) + p.delta * U) / k
            return p.r * V - u(p.b_a + p.y) - p.lambda_offer * gain

        w_e = optimize.brentq(g, 0.0, 20_000.0, xtol=1e-10)
        return (u(w_e - p.tau) + p.delta * U) / k

    def f(w):
        U = u(w - p.tau) / p.r
        gain = np.maximum(work - u(w - p.tau), 0.0).mean() / k
        rhs = u(p.b + p.y) + p.lambda_offer * gain + p.gamma * exhausted_value(U)
        return u(w - p.tau) - p.r / (p.r + p.gamma) * rhs

    return optimize.brentq(f, 1.0, 20_000.0, xtol=1e-10)


@pytest.mark.slow
def test_reservation_wage_matches_grid_oracle(calibrated):
    """Test the quadrature solver against a 10^5-point wage grid."""
    params, sol = calibrated
    assert abs(sol.w_star_eligible - _vfi_reservation_wage(params)) < 0.1


ORACLE_GRID = [
    dict(b=b, lambda_offer=lam, gamma=g)
    for b in (250.0, 325.0, 400.0, 475.0)
    for lam, g in (
        (0.3, 1.0 / 9.0),
        (0.2, 1.0 / 9.0),
        (0.4, 1.0 / 9.0),
        (0.3, 1.0 / 6.0),
        (0.3, 1.0 / 12.0),
    )
]


@pytest.mark.slow
@pytest.mark.parametrize("changes", ORACLE_GRID)
def test_reservation_wage_matches_grid_oracle_across_parameters(changes):
    """Test the solver against the wage-grid oracle over 20 parameter points."""
    params = ModelParams().replace(**changes)
    sol = solve_model(params)
    assert abs(sol.w_star_eligible - _vfi_reservation_wage(params)) < 0.1


def test_accepted_wage_moments_no_truncation():
    """Test that a negligible truncation leaves the offer moments intact."""
    p = ModelParams(mu=0.0, sigma=1.0)
    m = accepted_wage_moments(p, math.exp(-40.0))
    assert m.mean_log == pytest.approx(0.0, abs=1e-12)
    assert m.var_log == pytest.approx(1.0, abs=1e-12)
    assert m.lambda_factor > 1e6


def test_accepted_wage_moments_at_median():
    """Test the hazard formulas at the median and a shifted location."""
    m = accepted_wage_moments(ModelParams(mu=0.0, sigma=1.0), 1.0)
    assert m.mean_log == pytest.approx(0.7979, abs=1e-4)
    assert m.var_log == pytest.approx(0.3634, abs=1e-4)
    assert m.lambda_factor == pytest.approx(1.0 / (1.0 - 0.3634), abs=1e-3)

    m = accepted_wage_moments(ModelParams(mu=2.0, sigma=0.5), math.exp(2.0))
    assert m.mean_log == pytest.approx(2.3989, abs=1e-4)
    assert m.var_log == pytest.approx(0.0908, abs=1e-4)


def test_accepted_wage_moments_match_draws():
    """Test the truncated moments against lognormal draws."""
    p = ModelParams(mu=0.5, sigma=0.7)
    rng = np.random.default_rng(7)
    logs = rng.normal(0.5, 0.7, 2_000_000)
    kept = logs[logs >= 0.8]
    m = accepted_wage_moments(p, math.exp(0.8))
    assert m.mean_log == pytest.approx(kept.mean(), abs=2e-3)
    assert m.var_log == pytest.approx(kept.var(), abs=2e-3)
    assert m.var_log < p.sigma**2
    assert m.lambda_factor >= 1.0


def test_accepted_wage_moments_domain():
    """Test that a vanishing survival mass is a domain error."""
    with pytest.raises(ModelError):
        accepted_wage_moments(ModelParams(mu=0.0, sigma=0.1), math.exp(100.0))
    with pytest.raises(ModelError):
        accepted_wage_moments(ModelParams(), 0.0)


def test_expected_ui_duration_closed_forms():
    """Test duration with only eligibility loss and with only offers."""
    p = ModelParams(gamma=1.0 / 9.0, lambda_offer=0.0)
    assert expected_ui_duration(p, 500.0) == pytest.approx(9.0)

    p = ModelParams(gamma=0.0, lambda_offer=0.5)
    w_star = math.exp(p.mu + p.sigma * stats.norm.ppf(0.6))
    assert offer_cdf(p, w_star) == pytest.approx(0.6)
    assert expected_ui_duration(p, w_star) == pytest.approx(5.0)

    with pytest.raises(ModelError):
        expected_ui_duration(ModelParams(gamma=0.0, lambda_offer=0.0), 500.0)


def test_expected_ui_duration_matches_spell_simulation(calibrated):
    """Test duration against 10^6 simulated competing-risk spells."""
    params, sol = calibrated
    rng = np.random.default_rng(11)
    n = 1_000_000
    offers = rng.lognormal(params.mu, params.sigma, 200_000)
    accept = float(np.mean(offers >= sol.w_star_eligible))
    draws_to_accept = rng.geometric(accept, n)
    accepted_at = rng.gamma(draws_to_accept, 1.0 / params.lambda_offer)
    lost_at = rng.exponential(1.0 / params.gamma, n)
    simulated = np.minimum(accepted_at, lost_at).mean()
    assert expected_ui_duration(params, sol.w_star_eligible) == pytest.approx(
        simulated, rel=0.01
    )


def test_expected_total_benefits_without_exit():
    """Test R when nobody leaves before exhaustion."""
    p = ModelParams(gamma=0.0, lambda_offer=0.0)
    R = expected_total_benefits(POST_RULE, p, 500.0, 700.0, 12)
    assert R == pytest.approx(4 * 350 + 4 * 297.5 + 4 * 250)


def test_flat_benefit_total_is_benefit_times_duration():
    """Test R = b B for a flat benefit with unlimited duration."""
    flat = BenefitRule(b_low=100.0, b_high=1000.0, decay_steps=((1, 1.0),))
    p = ModelParams(utility="linear", gamma=0.2, lambda_offer=0.0)
    R = expected_total_benefits(flat, p, 500.0, 600.0, None)
    assert R == pytest.approx(300.0 * expected_ui_duration(p, 500.0), rel=1e-12)

    q = monthly_exit_probability(p, 500.0)
    assert q == pytest.approx(1.0 - math.exp(-0.2))
    paid_monthly = expected_benefits_from_level(flat, 0.2, 300.0, None, "monthly")
    assert paid_monthly == pytest.approx(300.0 / q)


def test_survival_weights():
    """Test the two month conventions of time spent in UI."""
    continuous = survival_weights(0.25, 400)
    assert continuous.sum() == pytest.approx(4.0)
    assert continuous[0] == pytest.approx((1.0 - math.exp(-0.25)) / 0.25)

    monthly = survival_weights(0.25, 400, timing="monthly")
    assert monthly[0] == 1.0
    assert monthly.sum() == pytest.approx(1.0 / (1.0 - math.exp(-0.25)))

    assert survival_weights(0.0, 3).tolist() == [1.0, 1.0, 1.0]
    with pytest.raises(ModelError):
        survival_weights(0.25, 3, timing="weekly")
    with pytest.raises(ModelError):
        survival_weights(-0.1, 3)


def test_expected_total_benefits_errors():
    """Test that R needs a positive wage and a finite horizon or hazard."""
    p = ModelParams(gamma=0.0, lambda_offer=0.0)
    with pytest.raises(ModelError):
        expected_total_benefits(POST_RULE, p, 500.0, 0.0, 12)
    with pytest.raises(ModelError):
        expected_total_benefits(POST_RULE, p, 500.0, 700.0, None)
    with pytest.raises(ModelError):
        expected_benefits_from_level(POST_RULE, 0.2, 350.0, 0)


def test_expected_total_benefits_matches_simulation(calibrated):
    """Test R against 10^6 simulated spells with benefits accruing by the day."""
    params, sol = calibrated
    potential = 8
    R = expected_total_benefits(
        POST_RULE, params, sol.w_star_eligible, 900.0, potential
    )

    hazard = params.gamma + params.lambda_offer * (
        1.0 - offer_cdf(params, sol.w_star_eligible)
    )
    rng = np.random.default_rng(3)
    exit_time = rng.exponential(1.0 / hazard, 1_000_000)
    path = np.array([400.0] * 4 + [340.0] * 4)
    months_in_ui = np.clip(exit_time[:, None] - np.arange(potential), 0.0, 1.0)
    assert R == pytest.approx((months_in_ui @ path).mean(), rel=0.01)


def test_budget_identity_for_flat_benefits():
    """Test dR/db = B + b dB/db with a flat benefit and no exhaustion."""
    flat = BenefitRule(b_low=100.0, b_high=1000.0, decay_steps=((1, 1.0),))
    p = ModelParams()
    d = benefit_derivatives(p, flat)
    step = 0.01 * p.b

    def duration(b: float) -> float:
        return expected_ui_duration(p, solve_model(p.replace(b=b)).w_star_eligible)

    B = expected_ui_duration(p, d.w_star)
    dB_db = (duration(p.b + step) - duration(p.b - step)) / (2 * step)
    assert d.R == pytest.approx(p.b * B, rel=1e-12)
    assert dB_db < 0
    assert d.dR_db == pytest.approx(B + p.b * dB_db, rel=0.01)


def test_benefit_derivatives_without_offers():
    """Test that w* moves one for one with b when w* = b + y."""
    d = benefit_derivatives(NO_OFFERS, POST_RULE, potential_months=12)
    assert d.dw_star_db == pytest.approx(1.0, abs=1e-6)
    assert d.w_star == pytest.approx(550.0, abs=1e-6)
    assert d.b == 400.0


def test_benefit_derivatives_step_validation():
    """Test step bounds."""
    with pytest.raises(ModelError):
        benefit_derivatives(NO_OFFERS, POST_RULE, step=0.0)
    with pytest.raises(ModelError):
        benefit_derivatives(NO_OFFERS.replace(b_a=390.0), POST_RULE, step=20.0)


def test_cara_tax_shift_identity(calibrated_derivatives):
    """Test that raising tau equals raising both transfers under CARA."""
    d = calibrated_derivatives
    assert d.dw_star_dtau == pytest.approx(d.dw_star_db + d.dw_star_dba, rel=5e-3)


def test_reservation_wage_response_from_mean_log_wage(calibrated_derivatives):
    """Test dw*/db against the response of mean log wages scaled by w* Lambda."""
    d = calibrated_derivatives
    implied = d.d_meanlog_db * d.w_star * d.lambda_factor
    assert d.dw_star_db > 0
    assert implied == pytest.approx(d.dw_star_db, rel=0.02)


def test_mechanical_and_behavioral_split(calibrated_derivatives):
    """Test that the mechanical and behavioral parts add up to dR/db."""
    d = calibrated_derivatives
    assert d.mechanical > 0
    assert d.behavioral > 0
    assert d.mechanical + d.behavioral == pytest.approx(d.dR_db, rel=0.01)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
