"""Predefined estimation grids.

A grid is a list of cell descriptors with the same keys a ``cell`` block takes in
a configuration file. Kinks are named (``high``/``low``) and resolved against
the schedule when the configuration is loaded.
"""

from typing import Any, Dict, List

Cell = Dict[str, Any]

CONTROLS = [
    "age",
    "age_sq",
    "male",
    "children",
    "spouse",
    "tenure_months",
    "tenure_sq",
    "contributions_36m",
    "severance_imputed",
]
FIXED_EFFECTS = ["eligibility_months", "region_code", "industry_code", "year", "month"]

WAGE = {"outcome": "log_reemployment_wage", "log_outcome": True}
UI_PAID = {"outcome": "total_ui_paid"}


def _cell(label: str, outcome: Cell, **keys: Any) -> Cell:
    cell = {"label": label, **outcome}
    cell.update(keys)
    return cell


def _with_controls(cell: Cell) -> Cell:
    cell = dict(cell, controls=CONTROLS, fixed_effects=FIXED_EFFECTS)
    if cell.get("log_outcome"):
        cell["duration_dummies"] = True
    return cell


BASELINE: List[Cell] = [
    _cell("wage", WAGE),
    _cell("ui", UI_PAID),
]

CONTROLLED: List[Cell] = [
    _with_controls(_cell("wage/controls", WAGE)),
    _with_controls(_cell("ui/controls", UI_PAID)),
]

PRE_REFORM: List[Cell] = [
    _cell("pre/wage", WAGE, regime="pre"),
    _cell("pre/ui", UI_PAID, regime="pre"),
]

BOTTOM_KINK: List[Cell] = [
    _cell("low/wage", WAGE, kink="low"),
    _cell("low/ui", UI_PAID, kink="low"),
]


def _bandwidth_cells(prefix: str, **common: Any) -> List[Cell]:
    cells = []
    for name, outcome in (("wage", WAGE), ("ui", UI_PAID)):
        variants = [
            ("sharp/h=100", {"method": "sharp", "bandwidth": 100.0}),
            ("linear/mse", {"bandwidth": "mse", "kernel": "triangular"}),
            ("linear/fg", {}),
            ("linear/h=200", {"bandwidth": 200.0}),
            ("linear/h=200/controls", {"bandwidth": 200.0, "controls": True}),
            ("quadratic/fg", {"poly": 2}),
            ("quadratic/h=200", {"poly": 2, "bandwidth": 200.0}),
            (
                "quadratic/h=200/controls",
                {"poly": 2, "bandwidth": 200.0, "controls": True},
            ),
        ]
        for suffix, keys in variants:
            if prefix == "" and suffix == "linear/fg":
                continue
            keys = dict(keys)
            controlled = keys.pop("controls", False)
            label = "/".join(part for part in (prefix, name, suffix) if part)
            cell = _cell(label, outcome, **common, **keys)
            cells.append(_with_controls(cell) if controlled else cell)
    return cells


ROBUSTNESS: List[Cell] = _bandwidth_cells("")
POOLED: List[Cell] = _bandwidth_cells("pooled", regime="pooled")


def _subsample_cells() -> List[Cell]:
    groups = [
        ("age<45", "age < 45"),
        ("age<45/contributions 24-35", "age < 45 and 24 <= contributions_36m <= 35"),
        ("age>=45", "age >= 45"),
        ("age>=45/contributions 24-35", "age >= 45 and 24 <= contributions_36m <= 35"),
        ("male", "male == 1"),
        ("female", "male == 0"),
        ("spouse", "spouse == 1"),
        ("no spouse", "spouse == 0"),
    ]
    cells = []
    for group, query in groups:
        cells.append(_cell(f"{group}/wage", WAGE, filter=query))
        cells.append(_cell(f"{group}/ui", UI_PAID, filter=query))
    return cells


SUBSAMPLES: List[Cell] = _subsample_cells()

GRIDS: Dict[str, List[Cell]] = {
    "baseline": BASELINE,
    "controlled": CONTROLLED,
    "pre_reform": PRE_REFORM,
    "bottom_kink": BOTTOM_KINK,
    "robustness": ROBUSTNESS,
    "pooled": POOLED,
    "subsamples": SUBSAMPLES,
}


def grid(name: str) -> List[Cell]:
    """Copy of a predefined grid."""
    if name not in GRIDS:
        raise KeyError(f"unknown grid '{name}'")
    return [dict(cell) for cell in GRIDS[name]]
