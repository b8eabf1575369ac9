"""Tests for the synthetic spell generator."""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import math

import numpy as np
import pytest

from kinkwelfare.core.errors import ModelError
from kinkwelfare.core.schedule import BenefitRule, total_benefits_paid
from kinkwelfare.core.search_model import (
    ModelParams,
    WorkerType,
    exit_hazard,
    expected_benefits_from_level,
)
from kinkwelfare.core.synth import (
    COLUMNS,
    CovariateConfig,
    ReservationWageGrid,
    SimConfig,
    SpellRecord,
    add_analysis_columns,
    eligibility_distribution,
    export_dataset,
    ground_truth_kink_effect,
    read_dataset,
    read_frame,
    severance_pay,
    simulate_population,
    to_frame,
)
from kinkwelfare.stdlib.rules import POST_ELIGIBILITY, POST_RULE, default_schedule

FLAT_POST = BenefitRule(b_low=250.0, b_high=400.0, decay_steps=((1, 1.0),))


def small_config(**changes) -> SimConfig:
    settings = dict(n_workers=25, seed=17, benefit_grid_step=0.0)
    settings.update(changes)
    return SimConfig(**settings)


def test_sim_config_validation():
    """Test population settings invariants."""
    with pytest.raises(ModelError):
        SimConfig(n_workers=0)
    with pytest.raises(ModelError):
        SimConfig(regime="future")
    with pytest.raises(ModelError):
        SimConfig(horizon_months=0)
    with pytest.raises(ModelError):
        SimConfig(heterogeneity=(WorkerType(weight=0.0),))
    with pytest.raises(ModelError):
        CovariateConfig(dependence="kinked")


def test_immediate_acceptance():
    """Test that plentiful offers far above w* end the spell in month one."""
    base = ModelParams(lambda_offer=30.0, mu=math.log(20_000.0), sigma=0.01)
    [record] = simulate_population(small_config(n_workers=1), POST_RULE, base)
    assert record.nonemployment_months == 1
    assert record.ui_months_collected == 1
    assert not record.censored
    assert record.reemployment_wage > 19_000
    assert record.total_ui_paid == pytest.approx(
        min(400.0, max(250.0, 0.5 * record.net_ref_wage))
    )


def test_no_offers_gives_censored_spell():
    """Test that without offers the worker collects the whole entitlement."""
    base = ModelParams(lambda_offer=0.0)
    [record] = simulate_population(
        small_config(n_workers=1, horizon_months=24), POST_RULE, base
    )
    assert record.censored
    assert record.reemployment_wage is None
    assert record.nonemployment_months == 24
    assert record.ui_months_collected == record.eligibility_months
    assert record.total_ui_paid == pytest.approx(
        total_benefits_paid(POST_RULE, record.net_ref_wage, record.eligibility_months)
    )


def test_records_are_consistent():
    """Test per-record invariants of a small population."""
    records = simulate_population(small_config(), POST_RULE, ModelParams())
    assert [r.spell_id for r in records] == list(range(1, 26))
    for r in records:
        assert r.regime == "post"
        assert r.net_ref_wage == pytest.approx(0.831 * r.gross_ref_wage)
        assert 75.0 <= r.gross_ref_wage <= 4800.0
        collected = min(r.nonemployment_months, r.eligibility_months)
        assert r.ui_months_collected == collected
        assert r.censored == (r.reemployment_wage is None)
        assert r.eligibility_months in (2, 4, 8, 10, 12, 14, 18)
        assert 6 <= r.contributions_36m <= 36
        assert r.total_ui_paid == pytest.approx(
            total_benefits_paid(POST_RULE, r.net_ref_wage, r.ui_months_collected)
        )


def test_seed_determinism():
    """Test that a seed fixes the dataset and another seed changes it."""
    base = ModelParams()
    first = simulate_population(small_config(), POST_RULE, base)
    again = simulate_population(small_config(), POST_RULE, base)
    other = simulate_population(small_config(seed=18), POST_RULE, base)
    assert first == again
    assert first != other


def test_parallel_solves_do_not_change_output():
    """Test that solving the grid on several threads gives the same records."""
    base = ModelParams()
    serial = simulate_population(small_config(), POST_RULE, base)
    threaded = simulate_population(small_config(jobs=3), POST_RULE, base)
    assert serial == threaded


def test_both_regimes_use_their_own_rules():
    """Test that pooled populations draw pre and post layoffs."""
    records = simulate_population(
        small_config(n_workers=60, regime="both"), default_schedule(), ModelParams()
    )
    regimes = {r.regime for r in records}
    assert regimes == {"pre", "post"}
    for r in records:
        if r.regime == "pre":
            assert r.contributions_36m >= 12
            assert (r.year, r.month) < (2006, 4)


@pytest.mark.slow
def test_mean_ui_paid_matches_expectation():
    """Test the simulated mean of total UI paid against its expectation."""
    cfg = SimConfig(n_workers=100_000, seed=5, benefit_grid_step=0.0)
    base = ModelParams()
    schedule = default_schedule()
    grid = ReservationWageGrid(cfg, schedule, base)
    records = simulate_population(cfg, schedule, base, grid=grid)

    paid = np.array([r.total_ui_paid for r in records])
    expected = []
    for r in records:
        b1 = min(POST_RULE.b_high, POST_RULE.beta * r.net_ref_wage)
        benefit = max(POST_RULE.b_low, b1)
        w_star, _ = grid.reservation_wages("post", r.eligibility_months, 0, benefit)
        hazard = exit_hazard(base.replace(gamma=0.0), w_star)
        expected.append(
            expected_benefits_from_level(
                POST_RULE, hazard, b1, r.eligibility_months, timing="monthly"
            )
        )
    se = paid.std(ddof=1) / math.sqrt(len(paid))
    assert abs(paid.mean() - np.mean(expected)) < 3 * se


def test_eligibility_distribution_sums_to_one():
    """Test the potential-duration distribution implied by the marginals."""
    probs = eligibility_distribution(SimConfig(), POST_ELIGIBILITY)
    assert sum(probs.values()) == pytest.approx(1.0)
    assert set(probs) <= {2, 4, 8, 10, 12, 14, 18}
    assert all(p > 0 for p in probs.values())


def test_severance_pay():
    """Test one wage per started year, rounding up past three months."""
    assert severance_pay(1000.0, 5.0) == 1000.0
    assert severance_pay(1000.0, 13.0) == 1000.0
    assert severance_pay(1000.0, 40.0) == 4000.0
    assert severance_pay(1000.0, 38.0) == 3000.0


def test_ground_truth_without_offers_counts_months():
    """Test dR/db equals expected covered months when nobody leaves UI early."""
    base = ModelParams(lambda_offer=0.0)
    effect = ground_truth_kink_effect(FLAT_POST, base, "total_ui_paid")
    probs = eligibility_distribution(SimConfig(), POST_ELIGIBILITY)
    months = sum(m * p for m, p in probs.items())
    assert effect.total == pytest.approx(months, rel=1e-6)
    assert effect.mechanical == pytest.approx(months, rel=1e-6)
    assert effect.behavioral == pytest.approx(0.0, abs=1e-6)
    assert effect.b_at_kink == 400.0


def test_ground_truth_calibrated_effects():
    """Test signs and the mechanical/behavioral decomposition."""
    base = ModelParams()
    wage = ground_truth_kink_effect(POST_RULE, base, "mean_log_wage")
    assert wage.total > 0

    ui = ground_truth_kink_effect(POST_RULE, base, "total_ui_paid")
    assert ui.mechanical > 0
    assert ui.behavioral > 0
    assert ui.mechanical + ui.behavioral == pytest.approx(ui.total, rel=0.01)

    with pytest.raises(ModelError):
        ground_truth_kink_effect(POST_RULE, base, "duration")


def test_export_empty_dataset(tmp_path):
    """Test that no records give a header-only file."""
    path = export_dataset([], tmp_path / "spells.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == [",".join(COLUMNS)]
    assert read_dataset(path) == []


def test_export_and_read_back(tmp_path):
    """Test that records survive the CSV file unchanged."""
    records = simulate_population(small_config(), POST_RULE, ModelParams())
    path = export_dataset(records[:1], tmp_path / "one.csv")
    assert len(path.read_text(encoding="utf-8").splitlines()) == 2
    assert read_dataset(path) == records[:1]

    path = export_dataset(records, tmp_path / "all.csv")
    assert read_dataset(path) == records


def test_censored_wage_is_empty_field(tmp_path):
    """Test that a missing re-employment wage is written as an empty field."""
    [record] = simulate_population(
        small_config(n_workers=1, horizon_months=6),
        POST_RULE,
        ModelParams(lambda_offer=0.0),
    )
    path = export_dataset([record], tmp_path / "censored.csv")
    row = path.read_text(encoding="utf-8").splitlines()[1].split(",")
    assert row[COLUMNS.index("reemployment_wage")] == ""


def test_read_frame_rejects_missing_columns(tmp_path):
    """Test that a file without the dataset columns is rejected."""
    path = tmp_path / "bad.csv"
    path.write_text("spell_id,regime\n1,post\n", encoding="utf-8")
    with pytest.raises(ModelError):
        read_frame(path)


def test_analysis_columns():
    """Test derived treatment and control columns."""
    records = simulate_population(
        small_config(n_workers=40, regime="both"), default_schedule(), ModelParams()
    )
    frame = add_analysis_columns(to_frame(records), default_schedule())
    for row in frame.itertuples():
        rule = default_schedule().rule_for(row.regime)
        expected = min(rule.b_high, max(rule.b_low, 0.5 * row.net_ref_wage))
        assert row.initial_benefit == pytest.approx(expected)
        assert row.post == int(row.regime == "post")
        assert row.duration_group == (row.nonemployment_months - 1) // 4
    reemployed = frame["reemployment_wage"].notna()
    assert frame.loc[~reemployed, "log_reemployment_wage"].isna().all()
    assert np.allclose(
        frame.loc[reemployed, "log_reemployment_wage"],
        np.log(frame.loc[reemployed, "reemployment_wage"]),
    )


def test_spell_record_json():
    """Test the dataclass_json codec on a record."""
    record = SpellRecord(
        spell_id=1,
        regime="post",
        year=2006,
        month=5,
        gross_ref_wage=1000.0,
        net_ref_wage=831.0,
        age=40,
        male=1,
        spouse=0,
        children=2,
        tenure_months=30.0,
        contributions_36m=30,
        region_code=2,
        industry_code=3,
        eligibility_months=8,
        ui_months_collected=3,
        total_ui_paid=1200.0,
        nonemployment_months=3,
        censored=False,
        reemployment_wage=1100.0,
        severance_imputed=3000.0,
    )
    assert SpellRecord.from_json(record.to_json()) == record


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
