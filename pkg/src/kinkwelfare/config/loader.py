"""Evaluates configuration documents into a typed :class:`RunConfig`.

Every section is checked against the fields of the dataclass it configures, so
unknown keys and values of the wrong type fail at load time with the line they
came from.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from ..core.errors import ConfigError, KinkWelfareError
from ..core.rkd import RkdSpec
from ..core.schedule import (
    BenefitRule,
    EligibilityRow,
    EligibilityTable,
    ScheduleConfig,
    WageConversion,
)
from ..core.search_model import ModelParams, WorkerType
from ..core.synth import CovariateConfig, SimConfig
from ..core.welfare import DEFAULT_DELTA
from ..stdlib import resolve_import
from ..stdlib.grids import CONTROLS, FIXED_EFFECTS
from ..stdlib.rules import default_schedule
from . import nodes
from .parser import ConfigParser

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
KINK_NAMES = ("low", "high")
REGIMES = ("pre", "post", "pooled")
# Named kinks are estimated on wages this far from the other kink of the rule.
OTHER_KINK_MARGIN = 0.05

_REQUIRED = object()


@dataclass
class CellConfig:
    """An estimation-grid cell before kinks are resolved against the schedule.

    ``kink`` is ``"high"``, ``"low"`` or a gross wage. Named kinks exclude wages
    within 5% of the rule's other kink unless ``window`` is given explicitly.
    """

    label: str
    outcome: str
    kink: Union[str, float] = "high"
    regime: str = "post"
    method: str = "fuzzy"
    poly: int = 1
    bandwidth: Union[str, float] = "fg"
    kernel: str = "uniform"
    controls: List[str] = field(default_factory=list)
    fixed_effects: List[str] = field(default_factory=list)
    filter: Optional[str] = None
    window: Optional[Tuple[Optional[float], Optional[float]]] = None
    exclude_other_kink: bool = True
    duration_dummies: bool = False
    log_outcome: bool = False
    known_slope_change: Optional[float] = None
    running: str = "gross_ref_wage"
    treatment: str = "initial_benefit"
    weak_instrument_f: float = 10.0

    def __post_init__(self):
        if isinstance(self.kink, str) and self.kink not in KINK_NAMES:
            raise ConfigError(f"cell '{self.label}': unknown kink '{self.kink}'")
        if self.regime not in REGIMES:
            raise ConfigError(f"cell '{self.label}': unknown regime '{self.regime}'")
        if self.regime == "pooled" and not isinstance(self.kink, str):
            raise ConfigError(f"cell '{self.label}': pooled cells need a named kink")


@dataclass
class WelfareSettings:
    delta: float = DEFAULT_DELTA
    wage_cell: str = "wage"
    ui_cell: str = "ui"
    published_panels: List[str] = field(default_factory=list)


@dataclass
class DiagnoseSettings:
    """Bin files and continuity checks written by ``diagnose``.

    ``trim`` is the quantile pair outside which ``trim_outcomes`` are dropped
    before binning; ``null`` keeps every row.
    """

    bin_width: float = 50.0
    kink: str = "high"
    regime: str = "post"
    outcomes: List[str] = field(
        default_factory=lambda: ["log_reemployment_wage", "total_ui_paid"]
    )
    covariates: List[str] = field(
        default_factory=lambda: [
            "age",
            "male",
            "spouse",
            "children",
            "contributions_36m",
            "tenure_months",
            "tenure_sq",
        ]
    )
    trim: Optional[Tuple[float, float]] = (0.01, 0.99)
    trim_outcomes: List[str] = field(
        default_factory=lambda: ["log_reemployment_wage"]
    )

    def __post_init__(self):
        if self.trim is not None:
            if len(self.trim) != 2 or not 0.0 <= self.trim[0] < self.trim[1] <= 1.0:
                raise ConfigError(
                    f"trim needs quantiles 0 <= lo < hi <= 1, got {self.trim}"
                )
            self.trim = (float(self.trim[0]), float(self.trim[1]))


@dataclass
class IOSettings:
    data: Optional[str] = None
    out: str = "out"


@dataclass
class RunConfig:
    """Everything a CLI command needs."""

    schema_version: int = SCHEMA_VERSION
    seed: int = 20060401
    schedule: ScheduleConfig = field(default_factory=default_schedule)
    model: ModelParams = field(default_factory=ModelParams)
    sim: SimConfig = field(default_factory=SimConfig)
    cells: List[CellConfig] = field(default_factory=list)
    welfare: WelfareSettings = field(default_factory=WelfareSettings)
    diagnose: DiagnoseSettings = field(default_factory=DiagnoseSettings)
    io: IOSettings = field(default_factory=IOSettings)

    def specs(self) -> List[RkdSpec]:
        """Grid cells as estimator specifications."""
        return [resolve_cell(cell, self.schedule) for cell in self.cells]


# Cell resolution


def _other_kink_window(kinks, kink: str):
    """Sample window that keeps 5% clear of the schedule's other kink."""
    if kink == "high":
        return (kinks.gross_low * (1 + OTHER_KINK_MARGIN), None)
    return (None, kinks.gross_high * (1 - OTHER_KINK_MARGIN))


def resolve_cell(cell: CellConfig, schedule: ScheduleConfig) -> RkdSpec:
    """Turn a cell into an RkdSpec with kink, window and slope filled in.

    The sharp slope change of a named kink is the schedule's slope change in
    gross wages: ``-beta * net_over_gross`` at the top kink and the opposite at
    the bottom kink.
    """
    regime = "post" if cell.regime == "pooled" else cell.regime
    rule = schedule.rule_for(regime)
    window = cell.window
    regime_kinks = None
    regime_windows = None
    method = cell.method
    known_slope = cell.known_slope_change
    benefit = None

    if isinstance(cell.kink, str):
        kinks = schedule.kinks_for(regime)
        kink_point = kinks.gross(cell.kink)
        benefit = rule.b_high if cell.kink == "high" else rule.b_low
        if known_slope is None:
            slope = rule.beta * schedule.conversion.net_over_gross
            known_slope = -slope if cell.kink == "high" else slope
        exclude = window is None and cell.exclude_other_kink
        if cell.regime == "pooled":
            pre_kinks = schedule.kinks_for("pre")
            regime_kinks = (pre_kinks.gross(cell.kink), kink_point)
            if method == "fuzzy":
                method = "pooled"
            if exclude:
                regime_windows = (
                    _other_kink_window(pre_kinks, cell.kink),
                    _other_kink_window(kinks, cell.kink),
                )
        elif exclude:
            window = _other_kink_window(kinks, cell.kink)
    else:
        kink_point = float(cell.kink)

    try:
        return RkdSpec(
            outcome=cell.outcome,
            kink_point=kink_point,
            running=cell.running,
            treatment=cell.treatment,
            poly_order=cell.poly,
            method=method,
            known_slope_change=known_slope,
            bandwidth=cell.bandwidth,
            kernel=cell.kernel,
            controls=list(cell.controls),
            fixed_effects=list(cell.fixed_effects),
            sample_window=window,
            sample_filter=cell.filter,
            duration_dummies=cell.duration_dummies,
            weak_instrument_f=cell.weak_instrument_f,
            regime_kinks=regime_kinks,
            regime_windows=regime_windows,
            benefit_at_kink=benefit,
            log_outcome=cell.log_outcome,
            label=cell.label,
        )
    except KinkWelfareError as e:
        raise ConfigError(f"cell '{cell.label}': {e}")


# Value checking


def _defaults(cls) -> Dict[str, Any]:
    values = {}
    for f in dataclasses.fields(cls):
        if f.default is not dataclasses.MISSING:
            values[f.name] = f.default
        elif f.default_factory is not dataclasses.MISSING:
            values[f.name] = f.default_factory()
        else:
            values[f.name] = _REQUIRED
    return values


def _as_tuple(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_as_tuple(v) for v in value)
    return value


def _coerce(key: str, value: Any, default: Any, node: nodes.ConfigNode) -> Any:
    """Check ``value`` against the type of ``default``."""

    def fail(expected: str):
        raise ConfigError(
            f"'{key}' expects {expected}, got {value!r}", node.line, node.column
        )

    if default is _REQUIRED or default is None or value is None:
        return _as_tuple(value) if isinstance(value, list) else value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            fail("true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        return float(value)
    if isinstance(default, str):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            # bandwidth and kink take either a name or a number
            if key in ("bandwidth", "kink"):
                return float(value)
            fail("a string")
        if not isinstance(value, str):
            fail("a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            fail("a list")
        return _as_tuple(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            fail("a list")
        return value
    fail(type(default).__name__)


def _assignments(
    body: List[nodes.Assignment], cls, where: str, exclude: Tuple[str, ...] = ()
) -> Dict[str, Any]:
    """Validated keyword arguments for ``cls`` from a list of assignments."""
    defaults = _defaults(cls)
    values: Dict[str, Any] = {}
    for assignment in body:
        key = assignment.key
        if key not in defaults or key in exclude:
            raise ConfigError(
                f"unknown key '{key}' in {where}", assignment.line, assignment.column
            )
        if key in values:
            raise ConfigError(
                f"duplicate key '{key}' in {where}", assignment.line, assignment.column
            )
        values[key] = _coerce(key, assignment.value, defaults[key], assignment)
    return values


def _build(cls, values: Dict[str, Any], where: str, node: nodes.ConfigNode):
    try:
        return cls(**values)
    except ConfigError:
        raise
    except (KinkWelfareError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid {where}: {e}", node.line, node.column)


def _only(section: nodes.Section, allowed: Tuple[type, ...], where: str):
    for statement in section.body:
        if not isinstance(statement, allowed):
            raise ConfigError(
                f"unexpected {type(statement).__name__.lower()} in {where}",
                statement.line,
                statement.column,
            )


# Sections


def _schedule(section: nodes.Section) -> ScheduleConfig:
    _only(section, (nodes.Assignment, nodes.Section), "schedule")
    schedule = default_schedule()
    rules = {"pre": schedule.pre, "post": schedule.post}
    eligibility = dict(schedule.eligibility)
    conversion = schedule.conversion
    for assignment in section.assignments():
        if assignment.key != "net_over_gross":
            raise ConfigError(
                f"unknown key '{assignment.key}' in schedule",
                assignment.line,
                assignment.column,
            )
        ratio = _coerce("net_over_gross", assignment.value, 0.0, assignment)
        conversion = _build(
            WageConversion, {"net_over_gross": ratio}, "conversion", assignment
        )
    for sub in section.sections():
        if sub.name in rules:
            _only(sub, (nodes.Assignment,), f"schedule.{sub.name}")
            values = _assignments(
                sub.body, BenefitRule, f"schedule.{sub.name}", ("regime_label",)
            )
            current = dataclasses.asdict(rules[sub.name])
            current.update(values)
            rules[sub.name] = _build(BenefitRule, current, sub.name, sub)
        elif sub.name == "eligibility":
            for table in sub.sections():
                if table.name not in rules:
                    raise ConfigError(
                        f"unknown regime '{table.name}'", table.line, table.column
                    )
                eligibility[table.name] = _eligibility(
                    table, eligibility[table.name]
                )
        else:
            raise ConfigError(
                f"unknown section '{sub.name}' in schedule", sub.line, sub.column
            )
    return ScheduleConfig(
        pre=rules["pre"],
        post=rules["post"],
        conversion=conversion,
        eligibility=eligibility,
    )


def _eligibility(
    section: nodes.Section, current: EligibilityTable
) -> EligibilityTable:
    _only(section, (nodes.Assignment,), f"eligibility.{section.name}")
    values = _assignments(section.body, EligibilityTable, f"eligibility.{section.name}")
    if "rows" in values:
        try:
            values["rows"] = tuple(EligibilityRow(*map(int, r)) for r in values["rows"])
        except (TypeError, ValueError) as e:
            raise ConfigError(
                f"eligibility rows need four integers: {e}",
                section.line,
                section.column,
            )
    merged = {
        "rows": current.rows,
        "minimum_contributions": current.minimum_contributions,
        "age_threshold": current.age_threshold,
    }
    merged.update(values)
    return _build(EligibilityTable, merged, "eligibility table", section)


def _sim(section: nodes.Section, seed: int) -> SimConfig:
    _only(section, (nodes.Assignment, nodes.Section), "sim")
    values = _assignments(
        section.assignments(), SimConfig, "sim", ("seed", "covariates", "heterogeneity")
    )
    types: List[WorkerType] = []
    for sub in section.sections():
        _only(sub, (nodes.Assignment,), f"sim.{sub.name}")
        if sub.name == "covariates":
            covariates = _assignments(sub.body, CovariateConfig, "sim.covariates")
            values["covariates"] = _build(
                CovariateConfig, covariates, "covariates", sub
            )
        elif sub.name == "type":
            worker_type = _assignments(sub.body, WorkerType, "sim.type")
            types.append(_build(WorkerType, worker_type, "worker type", sub))
        else:
            raise ConfigError(
                f"unknown section '{sub.name}' in sim", sub.line, sub.column
            )
    if types:
        values["heterogeneity"] = tuple(types)
    values["seed"] = seed
    return _build(SimConfig, values, "sim", section)


def _cell(cell: nodes.Cell) -> CellConfig:
    values = _assignments(cell.body, CellConfig, f"cell '{cell.label}'", ("label",))
    if "outcome" not in values:
        raise ConfigError(
            f"cell '{cell.label}' needs an outcome", cell.line, cell.column
        )
    values["label"] = cell.label
    return _build(CellConfig, values, f"cell '{cell.label}'", cell)


def _used_cells(use: nodes.UseStatement) -> List[CellConfig]:
    grid = _resolve(use, "stdlib.grids")
    cells = []
    for raw in grid:
        values = dict(raw)
        values["label"] = values.get("label", "")
        cells.append(_build(CellConfig, values, f"grid {use.dotted}", use))
    return cells


def _resolve(use: nodes.UseStatement, expected_module: str):
    module, name = ".".join(use.path[:-1]), use.path[-1]
    if module != expected_module:
        raise ConfigError(
            f"cannot use '{use.dotted}' here, expected {expected_module}.<name>",
            use.line,
            use.column,
        )
    try:
        return resolve_import(module, name)
    except ImportError as e:
        raise ConfigError(str(e), use.line, use.column)


def _estimation(section: nodes.Section) -> List[CellConfig]:
    _only(section, (nodes.Cell, nodes.UseStatement), "estimation")
    cells: List[CellConfig] = []
    for statement in section.body:
        if isinstance(statement, nodes.UseStatement):
            cells.extend(_used_cells(statement))
        else:
            cells.append(_cell(statement))
    labels = [c.label for c in cells]
    duplicates = sorted({label for label in labels if labels.count(label) > 1})
    if duplicates:
        raise ConfigError(
            f"duplicate cell labels {duplicates}", section.line, section.column
        )
    return cells


def _welfare(section: nodes.Section) -> WelfareSettings:
    _only(section, (nodes.Assignment, nodes.UseStatement), "welfare")
    values = _assignments(
        section.assignments(), WelfareSettings, "welfare", ("published_panels",)
    )
    panels = []
    for statement in section.body:
        if isinstance(statement, nodes.UseStatement):
            _resolve(statement, "stdlib.published")
            panels.append(statement.path[-1])
    values["published_panels"] = panels
    return _build(WelfareSettings, values, "welfare", section)


def _simple(section: nodes.Section, cls, where: str):
    _only(section, (nodes.Assignment,), where)
    return _build(cls, _assignments(section.body, cls, where), where, section)


# Entry points


def evaluate(document: nodes.Document) -> RunConfig:
    """Evaluate a parsed document into a RunConfig."""
    top: Dict[str, Any] = {}
    sections: Dict[str, nodes.Section] = {}
    for statement in document.statements:
        if isinstance(statement, nodes.Assignment):
            if statement.key not in ("schema_version", "seed"):
                raise ConfigError(
                    f"unknown top-level key '{statement.key}'",
                    statement.line,
                    statement.column,
                )
            top[statement.key] = _coerce(statement.key, statement.value, 0, statement)
        elif isinstance(statement, nodes.Section):
            if statement.name in sections:
                raise ConfigError(
                    f"duplicate section '{statement.name}'",
                    statement.line,
                    statement.column,
                )
            sections[statement.name] = statement
        else:
            raise ConfigError(
                "cells and use statements belong in a section",
                statement.line,
                statement.column,
            )

    version = top.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {version}, expected {SCHEMA_VERSION}"
        )
    config = RunConfig(seed=top.get("seed", RunConfig.seed))
    config.sim = SimConfig(seed=config.seed)

    handlers = {
        "schedule": lambda s: setattr(config, "schedule", _schedule(s)),
        "model": lambda s: setattr(config, "model", _simple(s, ModelParams, "model")),
        "sim": lambda s: setattr(config, "sim", _sim(s, config.seed)),
        "estimation": lambda s: setattr(config, "cells", _estimation(s)),
        "welfare": lambda s: setattr(config, "welfare", _welfare(s)),
        "diagnose": lambda s: setattr(
            config, "diagnose", _simple(s, DiagnoseSettings, "diagnose")
        ),
        "io": lambda s: setattr(config, "io", _simple(s, IOSettings, "io")),
    }
    for name, section in sections.items():
        if name not in handlers:
            raise ConfigError(f"unknown section '{name}'", section.line, section.column)
        handlers[name](section)
    if "estimation" not in sections:
        config.cells = _used_cells(
            nodes.UseStatement(path=["stdlib", "grids", "baseline"])
        )
    # Resolving the grid now surfaces bad cells at load time.
    config.specs()
    return config


def load_config(source: Optional[Union[str, Path]] = None, text: Optional[str] = None):
    """Load a RunConfig from a file path or from configuration text.

    With neither argument the built-in defaults are returned.

    Raises:
        ConfigError: On syntax errors, unknown keys, bad values or a
            schema_version mismatch.
    """
    parser = ConfigParser()
    if text is not None:
        document = parser.parse(text)
    elif source is not None:
        document = parser.parse_file(source)
        logger.debug("loaded config %s", source)
    else:
        document = nodes.Document(statements=[])
    return evaluate(document)


def apply_overrides(
    config: RunConfig,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    n_workers: Optional[int] = None,
    data: Optional[str] = None,
    out: Optional[str] = None,
    kink: Optional[str] = None,
    regime: Optional[str] = None,
    bandwidth: Optional[Union[str, float]] = None,
    poly: Optional[int] = None,
    controls: Optional[bool] = None,
    method: Optional[str] = None,
    delta: Optional[float] = None,
) -> RunConfig:
    """Command-line overrides applied on top of a loaded config.

    Cell-level overrides (kink, regime, bandwidth, poly, controls, method) apply
    to every grid cell. ``controls`` switches the standard controls and fixed
    effects on or off, with duration dummies for log-wage cells.
    """
    config = dataclasses.replace(config)
    if seed is not None:
        config.seed = seed
        config.sim = dataclasses.replace(config.sim, seed=seed)
    if jobs is not None:
        config.sim = dataclasses.replace(config.sim, jobs=jobs)
    if n_workers is not None:
        config.sim = dataclasses.replace(config.sim, n_workers=n_workers)
    if data is not None or out is not None:
        config.io = dataclasses.replace(
            config.io,
            data=config.io.data if data is None else data,
            out=config.io.out if out is None else out,
        )
    if delta is not None:
        config.welfare = dataclasses.replace(config.welfare, delta=delta)

    changes: Dict[str, Any] = {}
    if kink is not None:
        changes["kink"] = kink
    if regime is not None:
        changes["regime"] = regime
    if bandwidth is not None:
        changes["bandwidth"] = bandwidth
    if poly is not None:
        changes["poly"] = poly
    if method is not None:
        changes["method"] = method
    cells = []
    for cell in config.cells:
        updated = dataclasses.replace(cell, **changes)
        if controls is not None:
            updated = dataclasses.replace(
                updated,
                controls=list(CONTROLS) if controls else [],
                fixed_effects=list(FIXED_EFFECTS) if controls else [],
                duration_dummies=bool(controls and updated.log_outcome),
            )
        cells.append(updated)
    config.cells = cells
    config.specs()
    return config
