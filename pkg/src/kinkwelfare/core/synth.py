"""Synthetic UI spell datasets generated from the solved search model.

Generation runs in three passes: worker attributes are drawn from per-worker
random streams, reservation wages are solved on a benefit grid for every
(regime, potential duration, worker type) that occurs, and spells are simulated
month by month. Streams are keyed on (seed, spell_id), so output does not depend
on the order or parallelism of generation.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from dataclasses_json import dataclass_json
from scipy import stats

from ..runtime.files import PathLike, atomic_path
from .errors import ModelError
from .schedule import (
    BenefitRule,
    EligibilityTable,
    ScheduleConfig,
    initial_benefit,
    potential_duration,
    regime_for_date,
    total_benefits_paid,
)
from .search_model import (
    ModelParams,
    ModelSolution,
    WorkerType,
    accepted_wage_moments,
    exit_hazard,
    expected_benefits_from_level,
    offer_cdf,
    solve_model,
)

logger = logging.getLogger(__name__)

PRE_MONTHS = [(2005, m) for m in range(1, 13)] + [(2006, m) for m in range(1, 4)]
POST_MONTHS = [(2006, m) for m in range(4, 13)] + [(2007, m) for m in range(1, 13)]

DEPENDENCE_MODES = ("independent", "smooth", "adversarial")


@dataclass_json
@dataclass
class SpellRecord:
    """One covered unemployment spell, in dataset column order."""

    spell_id: int
    regime: str
    year: int
    month: int
    gross_ref_wage: float
    net_ref_wage: float
    age: int
    male: int
    spouse: int
    children: int
    tenure_months: float
    contributions_36m: int
    region_code: int
    industry_code: int
    eligibility_months: int
    ui_months_collected: int
    total_ui_paid: float
    nonemployment_months: int
    censored: bool
    reemployment_wage: Optional[float]
    severance_imputed: float


COLUMNS = [f.name for f in fields(SpellRecord)]


@dataclass
class CovariateConfig:
    """Marginals of the worker covariates.

    ``dependence`` is ``"independent"``, ``"smooth"`` (age and tenure drift with
    the log reference wage) or ``"adversarial"`` (tenure kinks at the top kink).
    """

    age_min: int = 18
    age_max: int = 64
    male_share: float = 0.69
    spouse_share: float = 0.51
    children_mean: float = 0.77
    tenure_mean: float = 39.0
    contribution_share: float = 0.667
    n_regions: int = 6
    n_industries: int = 9
    dependence: str = "independent"
    dependence_strength: float = 1.0

    def __post_init__(self):
        if self.dependence not in DEPENDENCE_MODES:
            raise ModelError(f"unknown covariate dependence '{self.dependence}'")
        if not self.age_min <= self.age_max:
            raise ModelError("age_min must not exceed age_max")


@dataclass
class SimConfig:
    """Population and simulation settings."""

    n_workers: int = 1000
    seed: int = 20060401
    regime: str = "post"
    ref_wage_mu: float = math.log(963.0)
    ref_wage_sigma: float = 0.6
    ref_wage_bounds: Tuple[float, float] = (75.0, 4800.0)
    covariates: CovariateConfig = field(default_factory=CovariateConfig)
    horizon_months: int = 48
    heterogeneity: Tuple[WorkerType, ...] = (WorkerType(),)
    benefit_grid_step: float = 5.0
    jobs: int = 1

    def __post_init__(self):
        if self.n_workers <= 0:
            raise ModelError(f"n_workers must be positive, got {self.n_workers}")
        if self.horizon_months < 1:
            raise ModelError("horizon_months must be at least 1")
        if self.regime not in ("pre", "post", "both"):
            raise ModelError(f"unknown regime '{self.regime}'")
        if not self.heterogeneity or sum(t.weight for t in self.heterogeneity) <= 0:
            raise ModelError("heterogeneity needs a type with positive weight")
        if self.ref_wage_sigma <= 0:
            raise ModelError("ref_wage_sigma must be positive")

    @property
    def type_weights(self) -> np.ndarray:
        weights = np.array([t.weight for t in self.heterogeneity], dtype=float)
        return weights / weights.sum()


@dataclass
class _Worker:
    spell_id: int
    regime: str
    year: int
    month: int
    gross: float
    net: float
    age: int
    male: int
    spouse: int
    children: int
    tenure: float
    contributions: int
    region: int
    industry: int
    potential: int
    type_index: int
    benefit: float


@dataclass_json
@dataclass
class KinkEffect:
    """Derivative of an outcome with respect to the benefit at the top kink."""

    outcome: str
    total: float
    mechanical: float
    behavioral: float
    b_at_kink: float


def _as_schedule(schedule: Union[BenefitRule, ScheduleConfig]) -> ScheduleConfig:
    if isinstance(schedule, ScheduleConfig):
        return schedule
    from ..stdlib.rules import default_schedule

    full = default_schedule()
    if schedule.regime_label == "pre":
        full.pre = schedule
    else:
        full.post = schedule
    return full


def _stream(seed: int, spell_id: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng([seed, spell_id, purpose])


def severance_pay(gross_ref_wage: float, tenure_months: float) -> float:
    """One monthly wage per year of tenure, at least one; over 3 extra months counts."""
    years = int(tenure_months // 12)
    if tenure_months - 12 * years > 3:
        years += 1
    return gross_ref_wage * max(1, years)


def _draw_worker(
    cfg: SimConfig, schedule: ScheduleConfig, spell_id: int
) -> _Worker:
    rng = _stream(cfg.seed, spell_id, 0)
    if cfg.regime == "both":
        calendar = PRE_MONTHS + POST_MONTHS
    else:
        calendar = PRE_MONTHS if cfg.regime == "pre" else POST_MONTHS
    year, month = calendar[rng.integers(len(calendar))]
    regime = regime_for_date(year, month)
    rule = schedule.rule_for(regime)
    table = schedule.eligibility_for(regime)

    lo, hi = cfg.ref_wage_bounds
    gross = rng.lognormal(cfg.ref_wage_mu, cfg.ref_wage_sigma)
    for _ in range(100):
        if lo <= gross <= hi:
            break
        gross = rng.lognormal(cfg.ref_wage_mu, cfg.ref_wage_sigma)
    gross = float(min(max(gross, lo), hi))
    net = gross * schedule.conversion.net_over_gross

    cov = cfg.covariates
    age = int(rng.integers(cov.age_min, cov.age_max + 1))
    male = int(rng.random() < cov.male_share)
    spouse = int(rng.random() < cov.spouse_share)
    children = int(rng.poisson(cov.children_mean))
    tenure = float(rng.exponential(cov.tenure_mean))
    minimum = table.minimum_contributions
    contributions = minimum + int(rng.binomial(36 - minimum, cov.contribution_share))
    region = int(rng.integers(1, cov.n_regions + 1))
    industry = int(rng.integers(1, cov.n_industries + 1))
    type_index = int(rng.choice(len(cfg.heterogeneity), p=cfg.type_weights))

    z = (math.log(gross) - cfg.ref_wage_mu) / cfg.ref_wage_sigma
    if cov.dependence == "smooth":
        shift = int(round(4.0 * cov.dependence_strength * z))
        age = int(min(max(age + shift, cov.age_min), cov.age_max))
        tenure *= math.exp(0.2 * cov.dependence_strength * z)
    elif cov.dependence == "adversarial":
        kink = schedule.kinks_for(regime).gross_high
        tenure += 0.05 * cov.dependence_strength * max(0.0, gross - kink)

    return _Worker(
        spell_id=spell_id,
        regime=regime,
        year=year,
        month=month,
        gross=gross,
        net=net,
        age=age,
        male=male,
        spouse=spouse,
        children=children,
        tenure=tenure,
        contributions=contributions,
        region=region,
        industry=industry,
        potential=potential_duration(table, age, contributions),
        type_index=type_index,
        benefit=initial_benefit(rule, net),
    )


class ReservationWageGrid:
    """Reservation wages on a benefit grid, solved lazily per worker cell.

    Cells are keyed on (regime, potential duration, worker type); values between
    grid points are linearly interpolated.
    """

    def __init__(
        self,
        cfg: SimConfig,
        schedule: ScheduleConfig,
        base: ModelParams,
    ):
        self.cfg = cfg
        self.schedule = schedule
        self.base = base
        self._solutions: Dict[Tuple[str, int, int, int], ModelSolution] = {}

    def grid(self, regime: str) -> np.ndarray:
        rule = self.schedule.rule_for(regime)
        step = self.cfg.benefit_grid_step
        if step <= 0:
            return np.array([rule.b_low, rule.b_high])
        count = max(1, int(math.ceil((rule.b_high - rule.b_low) / step)))
        return np.linspace(rule.b_low, rule.b_high, count + 1)

    def params(self, potential: int, type_index: int, b: float) -> ModelParams:
        worker_type = self.cfg.heterogeneity[type_index]
        return worker_type.apply(self.base).replace(b=b, gamma=1.0 / potential)

    def _neighbors(self, regime: str, b: float) -> Tuple[int, int, float]:
        grid = self.grid(regime)
        upper = int(np.clip(np.searchsorted(grid, b), 1, len(grid) - 1))
        lower = upper - 1
        span = grid[upper] - grid[lower]
        return lower, upper, float((b - grid[lower]) / span)

    def require(self, workers: Sequence[_Worker]) -> None:
        """Solve every grid point the given workers interpolate between."""
        needed = set()
        for worker in workers:
            lower, upper, _ = self._neighbors(worker.regime, worker.benefit)
            for index in (lower, upper):
                key = (worker.regime, worker.potential, worker.type_index, index)
                if key not in self._solutions:
                    needed.add(key)
        keys = sorted(needed)
        if not keys:
            return
        logger.info("solving %d reservation-wage grid points", len(keys))

        def solve(key):
            regime, potential, type_index, index = key
            b = float(self.grid(regime)[index])
            return solve_model(self.params(potential, type_index, b))

        if self.cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.jobs) as pool:
                solutions = list(pool.map(solve, keys))
        else:
            solutions = [solve(key) for key in keys]
        self._solutions.update(zip(keys, solutions))

    def reservation_wages(
        self, regime: str, potential: int, type_index: int, b: float
    ) -> Tuple[float, float]:
        """Interpolated (eligible, exhausted) reservation wages at benefit ``b``."""
        lower, upper, weight = self._neighbors(regime, b)
        lo = self._solutions[(regime, potential, type_index, lower)]
        hi = self._solutions[(regime, potential, type_index, upper)]
        eligible = (1 - weight) * lo.w_star_eligible + weight * hi.w_star_eligible
        exhausted = (1 - weight) * lo.w_star_exhausted + weight * hi.w_star_exhausted
        return eligible, exhausted


def _simulate_spell(
    worker: _Worker,
    cfg: SimConfig,
    rule: BenefitRule,
    params: ModelParams,
    reservation: Tuple[float, float],
) -> SpellRecord:
    rng = _stream(cfg.seed, worker.spell_id, 1)
    w_eligible, w_exhausted = reservation
    exit_month = None
    wage = None
    for d in range(1, cfg.horizon_months + 1):
        threshold = w_eligible if d <= worker.potential else w_exhausted
        count = rng.poisson(params.lambda_offer)
        offers = rng.lognormal(params.mu, params.sigma, size=count)
        acceptable = offers[offers >= threshold]
        if acceptable.size:
            exit_month, wage = d, float(acceptable[0])
            break
    censored = exit_month is None
    duration = cfg.horizon_months if censored else exit_month
    collected = min(duration, worker.potential)
    return SpellRecord(
        spell_id=worker.spell_id,
        regime=worker.regime,
        year=worker.year,
        month=worker.month,
        gross_ref_wage=worker.gross,
        net_ref_wage=worker.net,
        age=worker.age,
        male=worker.male,
        spouse=worker.spouse,
        children=worker.children,
        tenure_months=worker.tenure,
        contributions_36m=worker.contributions,
        region_code=worker.region,
        industry_code=worker.industry,
        eligibility_months=worker.potential,
        ui_months_collected=collected,
        total_ui_paid=total_benefits_paid(rule, worker.net, collected),
        nonemployment_months=duration,
        censored=censored,
        reemployment_wage=wage,
        severance_imputed=severance_pay(worker.gross, worker.tenure),
    )


def simulate_population(
    cfg: SimConfig,
    rule: Union[BenefitRule, ScheduleConfig],
    base: ModelParams,
    grid: Optional[ReservationWageGrid] = None,
) -> List[SpellRecord]:
    """Simulate ``cfg.n_workers`` covered spells.

    Args:
        cfg: Population settings.
        rule: A single-regime rule or a full schedule with both regimes.
        base: Model parameters shared by all workers; ``b`` and ``gamma`` are
            set per worker from the schedule and potential duration.
        grid: Optional reservation-wage cache to reuse across calls.

    Returns:
        Records in spell_id order.

    Raises:
        SolverError: If the model cannot be solved at some worker's benefit.
    """
    schedule = _as_schedule(rule)
    workers = [_draw_worker(cfg, schedule, i) for i in range(1, cfg.n_workers + 1)]
    grid = grid or ReservationWageGrid(cfg, schedule, base)
    grid.require(workers)
    records = []
    for worker in workers:
        params = cfg.heterogeneity[worker.type_index].apply(base)
        reservation = grid.reservation_wages(
            worker.regime, worker.potential, worker.type_index, worker.benefit
        )
        records.append(
            _simulate_spell(
                worker, cfg, schedule.rule_for(worker.regime), params, reservation
            )
        )
    logger.info("simulated %d spells", len(records))
    return records


def eligibility_distribution(
    cfg: SimConfig, table: EligibilityTable
) -> Dict[int, float]:
    """Exact distribution of potential duration implied by the covariate marginals."""
    cov = cfg.covariates
    ages = np.arange(cov.age_min, cov.age_max + 1)
    share_old = float(np.mean(ages >= table.age_threshold))
    minimum = table.minimum_contributions
    extra = np.arange(0, 36 - minimum + 1)
    pmf = stats.binom.pmf(extra, 36 - minimum, cov.contribution_share)
    probs: Dict[int, float] = {}
    for count, mass in zip(extra, pmf):
        for age, share in ((table.age_threshold + 1, share_old), (1, 1 - share_old)):
            if share <= 0:
                continue
            months = potential_duration(table, age, minimum + int(count))
            probs[months] = probs.get(months, 0.0) + float(mass) * share
    return dict(sorted(probs.items()))


def _ui_paid(
    rule: BenefitRule, p: ModelParams, w_star: float, b: float, months: int
) -> float:
    hazard = exit_hazard(p.replace(gamma=0.0), w_star)
    return expected_benefits_from_level(rule, hazard, b, months, timing="monthly")


def _reemployment_log_wage(
    p: ModelParams, sol: ModelSolution, months: int, horizon: int
) -> Tuple[float, float]:
    """Probability of re-employment by the horizon and the mean log wage if so."""
    stay_e = math.exp(-p.lambda_offer * (1.0 - offer_cdf(p, sol.w_star_eligible)))
    stay_x = math.exp(-p.lambda_offer * (1.0 - offer_cdf(p, sol.w_star_exhausted)))
    covered = min(months, horizon)
    share_e = 1.0 - stay_e**covered
    share_x = stay_e**covered * (1.0 - stay_x ** (horizon - covered))
    total = share_e + share_x
    if total <= 0:
        raise ModelError("no re-employment before the horizon")
    mean_e = accepted_wage_moments(p, sol.w_star_eligible).mean_log
    mean_x = accepted_wage_moments(p, sol.w_star_exhausted).mean_log
    return total, (share_e * mean_e + share_x * mean_x) / total


def ground_truth_kink_effect(
    rule: BenefitRule,
    base: ModelParams,
    outcome: str,
    cfg: Optional[SimConfig] = None,
    table: Optional[EligibilityTable] = None,
    step: Optional[float] = None,
) -> KinkEffect:
    """Derivative of the population outcome with respect to b at ``b_high``.

    Averages over the potential-duration distribution and worker types, with
    the simulator's timing: deterministic exhaustion and monthly exits at
    ``1 - exp(-lambda (1 - F(w*)))``. ``total_ui_paid`` is split into a
    mechanical part (reservation wages fixed) and a behavioral part (benefit
    path fixed); ``mean_log_wage`` is the mean log wage among the re-employed.
    """
    if outcome not in ("total_ui_paid", "mean_log_wage"):
        raise ModelError(f"unknown outcome '{outcome}'")
    cfg = cfg or SimConfig(regime=rule.regime_label)
    if table is None:
        table = _as_schedule(rule).eligibility_for(rule.regime_label)
    b0 = rule.b_high
    h = 0.01 * b0 if step is None else step
    durations = eligibility_distribution(cfg, table)
    weights = cfg.type_weights

    def solved(b: float, months: int, worker_type: WorkerType):
        p = worker_type.apply(base).replace(b=b, gamma=1.0 / months)
        return p, solve_model(p)

    if outcome == "total_ui_paid":
        total = mechanical = behavioral = 0.0
        for months, share in durations.items():
            for weight, worker_type in zip(weights, cfg.heterogeneity):
                p, sol0 = solved(b0, months, worker_type)
                _, up = solved(b0 + h, months, worker_type)
                _, down = solved(b0 - h, months, worker_type)
                w0, wu, wd = (s.w_star_eligible for s in (sol0, up, down))
                mass = share * weight / (2 * h)
                total += mass * (
                    _ui_paid(rule, p, wu, b0 + h, months)
                    - _ui_paid(rule, p, wd, b0 - h, months)
                )
                mechanical += mass * (
                    _ui_paid(rule, p, w0, b0 + h, months)
                    - _ui_paid(rule, p, w0, b0 - h, months)
                )
                behavioral += mass * (
                    _ui_paid(rule, p, wu, b0, months)
                    - _ui_paid(rule, p, wd, b0, months)
                )
        return KinkEffect(outcome, total, mechanical, behavioral, b0)

    def mean_log(b: float) -> float:
        numerator = denominator = 0.0
        for months, share in durations.items():
            for weight, worker_type in zip(weights, cfg.heterogeneity):
                p, sol = solved(b, months, worker_type)
                reemployed, mean = _reemployment_log_wage(
                    p, sol, months, cfg.horizon_months
                )
                numerator += share * weight * reemployed * mean
                denominator += share * weight * reemployed
        return numerator / denominator

    effect = (mean_log(b0 + h) - mean_log(b0 - h)) / (2 * h)
    return KinkEffect(outcome, effect, 0.0, effect, b0)


def to_frame(records: Sequence[SpellRecord]) -> pd.DataFrame:
    """Records as a DataFrame with the dataset columns in order."""
    if not records:
        return pd.DataFrame({c: pd.Series(dtype=object) for c in COLUMNS})
    return pd.DataFrame([asdict(r) for r in records], columns=COLUMNS)


def export_dataset(records: Sequence[SpellRecord], path: PathLike) -> Path:
    """Write records as UTF-8 CSV, missing values as empty fields, atomically."""
    frame = to_frame(records)
    with atomic_path(path) as tmp:
        frame.to_csv(tmp, index=False, encoding="utf-8")
    logger.info("wrote %d spells to %s", len(records), path)
    return Path(path)


_INT_COLUMNS = [f.name for f in fields(SpellRecord) if f.type is int]
_FLOAT_COLUMNS = [f.name for f in fields(SpellRecord) if f.type is float]


def read_frame(path: PathLike) -> pd.DataFrame:
    """Load a dataset file with exact float round trip."""
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in COLUMNS if c not in frame.columns]
    if missing:
        raise ModelError(f"dataset {path} lacks columns {missing}")
    return frame


def records_from_frame(frame: pd.DataFrame) -> List[SpellRecord]:
    records = []
    for row in frame[COLUMNS].to_dict(orient="records"):
        for name in _INT_COLUMNS:
            row[name] = int(row[name])
        for name in _FLOAT_COLUMNS:
            row[name] = float(row[name])
        row["regime"] = str(row["regime"])
        row["censored"] = _as_bool(row["censored"])
        wage = row["reemployment_wage"]
        row["reemployment_wage"] = None if pd.isna(wage) else float(wage)
        records.append(SpellRecord(**row))
    return records


def _as_bool(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("true", "1")
    return bool(value)


def read_dataset(path: PathLike) -> List[SpellRecord]:
    """Read a dataset file back into records."""
    return records_from_frame(read_frame(path))


def add_analysis_columns(
    frame: pd.DataFrame, schedule: ScheduleConfig
) -> pd.DataFrame:
    """Derived columns used by the estimators.

    ``initial_benefit`` is the observed treatment from the net wage and regime,
    ``duration_group`` groups non-employment months in blocks of four.
    """
    frame = frame.copy()
    benefit = np.empty(len(frame))
    for regime in ("pre", "post"):
        mask = (frame["regime"] == regime).to_numpy()
        if mask.any():
            benefit[mask] = initial_benefit(
                schedule.rule_for(regime), frame.loc[mask, "net_ref_wage"].to_numpy()
            )
    frame["initial_benefit"] = benefit
    frame["post"] = (frame["regime"] == "post").astype(int)
    wage = frame["reemployment_wage"].astype(float)
    frame["log_reemployment_wage"] = np.log(wage.where(wage > 0))
    frame["age_sq"] = frame["age"].astype(float) ** 2
    frame["tenure_sq"] = frame["tenure_months"].astype(float) ** 2
    frame["duration_group"] = (frame["nonemployment_months"].astype(int) - 1) // 4
    return frame


def load_analysis_frame(path: PathLike, schedule: ScheduleConfig) -> pd.DataFrame:
    return add_analysis_columns(read_frame(path), schedule)
