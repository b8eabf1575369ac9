"""Published calibration inputs and the (LHS, RHS, gains) reported for them.

All rows use the top kink, ``delta = 0.03`` and the lower-bound convention
``w*/b = 1``, ``Lambda = 1``. Outputs are rounded to two decimals as published.
"""

from dataclasses import dataclass
from typing import Dict, List

from ..core.welfare import WelfareInputs


@dataclass(frozen=True)
class PublishedRow:
    """One published calibration column."""

    inputs: WelfareInputs
    lhs: float
    rhs: float
    gains: float


def _row(label, eta, dR_db, R_over_b, rhs, gains) -> PublishedRow:
    inputs = WelfareInputs(eta_wb=eta, dR_db=dR_db, R_over_b=R_over_b, label=label)
    return PublishedRow(inputs=inputs, lhs=eta, rhs=rhs, gains=gains)


POST_REFORM = [
    _row("post/no controls", 0.37, 6.53, 6.46, 0.16, 0.21),
    _row("post/controls", 0.23, 6.20, 6.46, 0.16, 0.07),
]

PRE_REFORM = [
    _row("pre/no controls", 0.36, 5.69, 6.65, 0.14, 0.21),
    _row("pre/controls", 0.27, 5.08, 6.65, 0.13, 0.14),
]

AGE_GROUPS = [
    _row("age<45/all", 0.32, 6.61, 5.67, 0.17, 0.15),
    _row("age<45/contributions 24-35", 0.30, 5.78, 5.58, 0.15, 0.15),
    _row("age>=45/all", 0.92, 10.76, 9.79, 0.25, 0.67),
    _row("age>=45/contributions 24-35", 0.40, 9.36, 8.90, 0.22, 0.18),
]

BANDWIDTHS = [
    _row("sharp/h=100", -0.09, 6.70, 6.46, 0.17, -0.26),
    _row("linear/mse", -0.27, 7.97, 6.46, 0.20, -0.47),
    _row("linear/h=200", 0.17, 6.85, 6.46, 0.17, 0.00),
    _row("linear/h=200/controls", 0.35, 6.71, 6.46, 0.17, 0.19),
    _row("quadratic/fg", 0.99, 8.27, 6.46, 0.21, 0.79),
    _row("quadratic/h=200", 0.55, 8.15, 6.46, 0.20, 0.34),
    _row("quadratic/h=200/controls", 1.33, 8.50, 6.46, 0.21, 1.11),
]

POOLED_REGIMES = [
    _row("pooled/sharp/h=100", 0.57, 5.50, 6.46, 0.14, 0.43),
    _row("pooled/linear/mse", 0.48, 6.07, 6.46, 0.15, 0.33),
    _row("pooled/linear/fg", 0.40, 5.93, 6.46, 0.15, 0.25),
    _row("pooled/linear/h=200", 0.43, 6.94, 6.46, 0.17, 0.25),
    _row("pooled/linear/h=200/controls", 0.39, 5.99, 6.46, 0.15, 0.24),
    _row("pooled/quadratic/fg", 0.97, 6.81, 6.46, 0.17, 0.80),
    _row("pooled/quadratic/h=200", 1.42, 5.71, 6.46, 0.14, 1.27),
    _row("pooled/quadratic/h=200/controls", 1.77, 6.82, 6.46, 0.17, 1.60),
]

PANELS: Dict[str, List[PublishedRow]] = {
    "post_reform": POST_REFORM,
    "pre_reform": PRE_REFORM,
    "age_groups": AGE_GROUPS,
    "bandwidths": BANDWIDTHS,
    "pooled_regimes": POOLED_REGIMES,
}


def published_inputs(panel: str = "") -> List[WelfareInputs]:
    """Inputs of one panel, or of every panel in order when ``panel`` is empty."""
    if panel:
        if panel not in PANELS:
            raise KeyError(f"unknown published panel '{panel}'")
        return [row.inputs for row in PANELS[panel]]
    return [row.inputs for rows in PANELS.values() for row in rows]
