"""Sufficient-statistics welfare formula.

Raising benefits is welfare improving when

    eta_wb * (w*/b) * Lambda  >  (dR/db) / (1/delta + R/b)

The left side is the reservation-wage response; the right side is the cost of
the benefit increase, including the behavioral response of UI paid.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional

from dataclasses_json import dataclass_json

from .errors import WelfareError
from .rkd import RkdFit, elasticity
from .schedule import BenefitRule
from .search_model import ModelParams, benefit_derivatives

DEFAULT_DELTA = 0.03


@dataclass_json
@dataclass
class WelfareInputs:
    """Inputs of the formula.

    ``w_star_over_b = 1`` and ``lambda_factor = 1`` give a lower bound of the gains.
    """

    eta_wb: float
    dR_db: float
    R_over_b: float
    delta: float = DEFAULT_DELTA
    w_star_over_b: float = 1.0
    lambda_factor: float = 1.0
    label: str = ""

    def __post_init__(self):
        if not self.delta > 0:
            raise WelfareError(f"delta must be positive, got {self.delta}")
        if self.R_over_b < 0:
            raise WelfareError(f"R_over_b must be non-negative, got {self.R_over_b}")
        if not self.lambda_factor >= 1:
            raise WelfareError(f"lambda_factor must be >= 1, got {self.lambda_factor}")
        if not self.w_star_over_b > 0:
            raise WelfareError(f"w_star_over_b must be positive: {self.w_star_over_b}")


@dataclass_json
@dataclass
class WelfareResult:
    """Marginal gain (lhs), marginal cost (rhs) and net gains of a benefit increase."""

    lhs: float
    rhs: float
    gains: float
    label: str = ""

    @property
    def raises_welfare(self) -> bool:
        return self.gains > 0


def calibrate_formula(inputs: WelfareInputs) -> WelfareResult:
    """Evaluate both sides of the formula; ``gains = lhs - rhs``."""
    lhs = inputs.eta_wb * inputs.w_star_over_b * inputs.lambda_factor
    rhs = inputs.dR_db / (1.0 / inputs.delta + inputs.R_over_b)
    return WelfareResult(lhs=lhs, rhs=rhs, gains=lhs - rhs, label=inputs.label)


def calibrate_table(rows: Iterable[WelfareInputs]) -> List[WelfareResult]:
    return [calibrate_formula(row) for row in rows]


def inputs_from_fits(
    wage_fit: RkdFit,
    ui_fit: RkdFit,
    delta: float = DEFAULT_DELTA,
    b_at_kink: Optional[float] = None,
) -> WelfareInputs:
    """Formula inputs from a log re-employment wage fit and a total UI paid fit.

    ``R/b`` is the mean UI paid within the bandwidth over the benefit at the kink.

    Raises:
        WelfareError: If the fits refer to different kinks or no benefit level
            at the kink is known.
    """
    if not math.isclose(wage_fit.kink_point, ui_fit.kink_point, rel_tol=1e-9):
        raise WelfareError(
            f"fits use different kinks ({wage_fit.kink_point} vs {ui_fit.kink_point})"
        )
    b = b_at_kink
    if b is None:
        b = wage_fit.benefit_at_kink or ui_fit.benefit_at_kink
    if b is None or b <= 0:
        raise WelfareError("benefit at the kink is required for calibration")
    return WelfareInputs(
        eta_wb=elasticity(wage_fit.alpha, b, None, log_outcome=True),
        dR_db=ui_fit.alpha,
        R_over_b=ui_fit.mean_outcome / b,
        delta=delta,
        label=ui_fit.label or wage_fit.label,
    )


def calibrate_from_fits(
    wage_fit: RkdFit,
    ui_fit: RkdFit,
    delta: float = DEFAULT_DELTA,
    b_at_kink: Optional[float] = None,
) -> WelfareResult:
    """Evaluate the formula on the inputs from :func:`inputs_from_fits`."""
    return calibrate_formula(inputs_from_fits(wage_fit, ui_fit, delta, b_at_kink))


def model_implied_welfare(
    p: ModelParams,
    rule: BenefitRule,
    potential_months: Optional[int] = None,
    delta: Optional[float] = None,
    use_lambda: bool = False,
) -> WelfareResult:
    """The formula evaluated with the model's own derivatives at ``p.b``.

    With ``use_lambda`` the exact ``w*/b`` and Lambda enter the left side;
    otherwise the lower-bound convention used with estimated inputs applies.
    """
    d = benefit_derivatives(p, rule, potential_months=potential_months)
    kwargs = {}
    if use_lambda:
        kwargs = {"w_star_over_b": d.w_star / d.b, "lambda_factor": d.lambda_factor}
    inputs = WelfareInputs(
        eta_wb=d.d_meanlog_db * d.b,
        dR_db=d.dR_db,
        R_over_b=d.R / d.b,
        delta=p.delta if delta is None else delta,
        label="model",
        **kwargs,
    )
    return calibrate_formula(inputs)
