"""Statutory benefit rules and potential-duration tables."""

from ..core.schedule import (
    BenefitRule,
    EligibilityRow,
    EligibilityTable,
    ScheduleConfig,
    WageConversion,
)

PRE_RULE = BenefitRule(b_low=150.0, b_high=300.0, beta=0.5, regime_label="pre")
POST_RULE = BenefitRule(b_low=250.0, b_high=400.0, beta=0.5, regime_label="post")

# Months of support by contributions in the last 36 months (under 45, 45 and over).
DURATION_ROWS = (
    EligibilityRow(6, 11, 2, 8),
    EligibilityRow(12, 23, 4, 10),
    EligibilityRow(24, 35, 8, 14),
    EligibilityRow(36, 36, 12, 18),
)

# Before the reform at least 12 months of contributions were required.
PRE_ELIGIBILITY = EligibilityTable(rows=DURATION_ROWS, minimum_contributions=12)
POST_ELIGIBILITY = EligibilityTable(rows=DURATION_ROWS, minimum_contributions=6)

DEFAULT_CONVERSION = WageConversion(net_over_gross=0.831)

# Published gross kink pairs (pre low, pre high, post low, post high).
PUBLISHED_GROSS_KINKS = (361.0, 722.0, 602.0, 963.0)
PUBLISHED_NET_KINKS = (300.0, 600.0, 500.0, 800.0)


def default_schedule() -> ScheduleConfig:
    """Schedule with both regimes, the default wage conversion and eligibility."""
    return ScheduleConfig(
        pre=PRE_RULE,
        post=POST_RULE,
        conversion=DEFAULT_CONVERSION,
        eligibility={"pre": PRE_ELIGIBILITY, "post": POST_ELIGIBILITY},
    )
