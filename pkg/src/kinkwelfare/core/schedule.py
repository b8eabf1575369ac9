"""Kinked unemployment benefit schedule.

Initial transfers are a kinked function of the net reference wage, decay within
the spell, and last for a potential duration set by age and recent contributions.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ScheduleError

ArrayLike = Union[float, Sequence[float], np.ndarray]

DEFAULT_DECAY_STEPS: Tuple[Tuple[int, float], ...] = ((1, 1.0), (5, 0.85), (9, 0.70))

# Layoffs from this (year, month) on fall under the post-reform rule.
REFORM_DATE = (2006, 4)


@dataclass(frozen=True)
class BenefitRule:
    """Benefit rule of one regime.

    ``decay_steps`` holds (first month, fraction) pairs; a fraction applies from
    its first month up to the month before the next threshold.
    """

    b_low: float
    b_high: float
    beta: float = 0.5
    decay_steps: Tuple[Tuple[int, float], ...] = DEFAULT_DECAY_STEPS
    regime_label: str = "post"

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ScheduleError(f"beta must lie in (0, 1], got {self.beta}")
        if not 0 < self.b_low < self.b_high:
            raise ScheduleError(
                f"need 0 < b_low < b_high, got b_low={self.b_low}, b_high={self.b_high}"
            )
        steps = tuple((int(m), float(f)) for m, f in self.decay_steps)
        if not steps or steps[0][0] != 1:
            raise ScheduleError("decay steps must start at month 1")
        for (m0, f0), (m1, f1) in zip(steps, steps[1:]):
            if m1 <= m0:
                raise ScheduleError("decay thresholds must be strictly increasing")
            if f1 > f0:
                raise ScheduleError("decay fractions must be non-increasing")
        for _, frac in steps:
            if not 0 < frac <= 1:
                raise ScheduleError(f"decay fraction {frac} outside (0, 1]")
        object.__setattr__(self, "decay_steps", steps)


@dataclass(frozen=True)
class EligibilityRow:
    """One contribution bracket of the potential-duration table."""

    min_contributions: int
    max_contributions: int
    months_under_threshold: int
    months_over_threshold: int


@dataclass(frozen=True)
class EligibilityTable:
    """Potential UI duration by contributions over the last 36 months and age."""

    rows: Tuple[EligibilityRow, ...]
    minimum_contributions: int = 6
    age_threshold: float = 45.0

    def __post_init__(self):
        rows = tuple(sorted(self.rows, key=lambda r: r.min_contributions))
        if not rows:
            raise ScheduleError("eligibility table has no rows")
        for row in rows:
            if row.max_contributions < row.min_contributions:
                raise ScheduleError(f"empty contribution bracket {row}")
            if row.months_under_threshold <= 0 or row.months_over_threshold <= 0:
                raise ScheduleError(f"durations must be positive in {row}")
        for prev, nxt in zip(rows, rows[1:]):
            if nxt.min_contributions != prev.max_contributions + 1:
                raise ScheduleError(
                    "eligibility rows must partition contributions without gaps "
                    f"or overlaps ({prev.max_contributions} -> {nxt.min_contributions})"
                )
            if (
                nxt.months_under_threshold < prev.months_under_threshold
                or nxt.months_over_threshold < prev.months_over_threshold
            ):
                raise ScheduleError("durations must be non-decreasing in contributions")
        object.__setattr__(self, "rows", rows)

    @property
    def max_contributions(self) -> int:
        return self.rows[-1].max_contributions


@dataclass(frozen=True)
class WageConversion:
    """Net-over-gross reference wage ratio."""

    net_over_gross: float = 0.831

    def __post_init__(self):
        if not 0 < self.net_over_gross <= 1:
            raise ScheduleError(
                f"net_over_gross must lie in (0, 1], got {self.net_over_gross}"
            )

    def net_from_gross(self, gross: ArrayLike) -> ArrayLike:
        return _like_input(np.asarray(gross, dtype=float) * self.net_over_gross, gross)

    def gross_from_net(self, net: ArrayLike) -> ArrayLike:
        return _like_input(np.asarray(net, dtype=float) / self.net_over_gross, net)


@dataclass(frozen=True)
class KinkLocations:
    """Bottom and top kinks in net and gross reference-wage units."""

    net_low: float
    net_high: float
    gross_low: float
    gross_high: float

    def gross(self, which: str) -> float:
        return self.gross_high if which == "high" else self.gross_low

    def net(self, which: str) -> float:
        return self.net_high if which == "high" else self.net_low


@dataclass
class ScheduleConfig:
    """Both regimes of the schedule together with the wage conversion."""

    pre: BenefitRule
    post: BenefitRule
    conversion: WageConversion = field(default_factory=WageConversion)
    eligibility: Dict[str, EligibilityTable] = field(default_factory=dict)

    def rule_for(self, regime: str) -> BenefitRule:
        if regime == "pre":
            return self.pre
        if regime == "post":
            return self.post
        raise ScheduleError(f"unknown regime '{regime}'")

    def eligibility_for(self, regime: str) -> EligibilityTable:
        try:
            return self.eligibility[regime]
        except KeyError:
            raise ScheduleError(f"no eligibility table for regime '{regime}'")

    def kinks_for(self, regime: str) -> KinkLocations:
        return kink_locations(self.rule_for(regime), self.conversion)


def _like_input(result: np.ndarray, original: ArrayLike) -> ArrayLike:
    if np.ndim(original) == 0:
        return float(result)
    return result


def regime_for_date(year: int, month: int) -> str:
    """Regime that applies to a layoff in the given month."""
    return "pre" if (year, month) < REFORM_DATE else "post"


def initial_benefit(rule: BenefitRule, net_ref_wage: ArrayLike) -> ArrayLike:
    """Initial monthly benefit ``min(b_high, max(b_low, beta * W))``.

    Accepts a scalar or an array of net reference wages.

    Raises:
        ScheduleError: If any wage is non-positive.
    """
    wage = np.asarray(net_ref_wage, dtype=float)
    if np.any(~(wage > 0)):
        raise ScheduleError("net reference wage must be positive")
    benefit = np.minimum(rule.b_high, np.maximum(rule.b_low, rule.beta * wage))
    return _like_input(benefit, net_ref_wage)


def decay_fraction(rule: BenefitRule, month_in_spell: int) -> float:
    """Fraction of the full benefit paid in a given month of the spell."""
    if month_in_spell < 1:
        raise ScheduleError(f"month_in_spell must be >= 1, got {month_in_spell}")
    fraction = rule.decay_steps[0][1]
    for first_month, frac in rule.decay_steps:
        if month_in_spell >= first_month:
            fraction = frac
        else:
            break
    return fraction


def monthly_benefit(
    rule: BenefitRule, net_ref_wage: float, month_in_spell: int
) -> float:
    """Benefit paid in a month: ``max(b_low, rho_d * min(b_high, beta * W))``."""
    if net_ref_wage <= 0:
        raise ScheduleError("net reference wage must be positive")
    rho = decay_fraction(rule, month_in_spell)
    return max(rule.b_low, rho * min(rule.b_high, rule.beta * net_ref_wage))


def benefit_path_from_level(rule: BenefitRule, b1: float, months: int) -> np.ndarray:
    """Monthly benefits for months 1..months starting from full benefit ``b1``."""
    if months < 0:
        raise ScheduleError(f"months must be non-negative, got {months}")
    fractions = np.array([decay_fraction(rule, d) for d in range(1, months + 1)])
    return np.maximum(rule.b_low, fractions * b1)


def benefit_path(rule: BenefitRule, net_ref_wage: float, months: int) -> np.ndarray:
    """Scheduled monthly benefits for months 1..months of a spell."""
    if net_ref_wage <= 0:
        raise ScheduleError("net reference wage must be positive")
    return benefit_path_from_level(
        rule, min(rule.b_high, rule.beta * net_ref_wage), months
    )


def total_benefits_paid(rule: BenefitRule, net_ref_wage: float, months: int) -> float:
    """Sum of scheduled benefits over the first ``months`` months."""
    return float(np.sum(benefit_path(rule, net_ref_wage, months)))


def potential_duration(
    table: EligibilityTable, age: float, contributions_36m: int
) -> Optional[int]:
    """Months of UI support, or None when the worker is ineligible."""
    if age <= 0:
        raise ScheduleError(f"age must be positive, got {age}")
    if not 0 <= contributions_36m <= 36:
        raise ScheduleError(
            f"contributions_36m must lie in [0, 36], got {contributions_36m}"
        )
    if contributions_36m < table.minimum_contributions:
        return None
    for row in table.rows:
        if row.min_contributions <= contributions_36m <= row.max_contributions:
            if age >= table.age_threshold:
                return row.months_over_threshold
            return row.months_under_threshold
    return None


def kink_locations(rule: BenefitRule, conv: WageConversion) -> KinkLocations:
    """Reference wages at which the floor and the ceiling start to bind."""
    net_low = rule.b_low / rule.beta
    net_high = rule.b_high / rule.beta
    return KinkLocations(
        net_low=net_low,
        net_high=net_high,
        gross_low=net_low / conv.net_over_gross,
        gross_high=net_high / conv.net_over_gross,
    )


def fit_net_over_gross(
    net_kinks: Sequence[float], gross_kinks: Sequence[float]
) -> float:
    """Least-squares slope through the origin of net kinks on gross kinks."""
    net = np.asarray(net_kinks, dtype=float)
    gross = np.asarray(gross_kinks, dtype=float)
    if net.size == 0 or net.shape != gross.shape:
        raise ScheduleError("kink lists must be non-empty and of equal length")
    if np.any(net <= 0) or np.any(gross <= 0):
        raise ScheduleError("kink locations must be positive")
    return float(np.dot(net, gross) / np.dot(gross, gross))
