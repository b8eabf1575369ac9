"""Stationary McCall search model with eligible and exhausted unemployed states.

Flow values (continuous time)::

    V(w) = (u(w - tau) + delta U) / (r + delta)
    (r + gamma) U = u(b + y) + lambda/(r + delta) G(w*) + gamma S
    r S = u(b_a + y) + lambda/(r + delta) G(w_e)   with V(w_e) = S

where ``G(c) = E[max(u(w - tau) - u(c - tau), 0)]`` over lognormal offers and the
eligible reservation wage satisfies ``u(w* - tau) = r U``.
"""

import logging
import math
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from dataclasses_json import dataclass_json
from scipy import optimize, stats

from .errors import ModelError, SolverError
from .schedule import BenefitRule, benefit_path_from_level, decay_fraction

logger = logging.getLogger(__name__)

QUAD_NODES = 256
Z_SPAN = 12.0
DEFAULT_TOL = 1e-8
MAX_ITER = 10_000

UTILITIES = ("linear", "cara")
TIMINGS = ("continuous", "monthly")


@dataclass(frozen=True)
class ModelParams:
    """Primitives of the search model, all rates per month."""

    r: float = 0.004
    delta: float = 0.03
    lambda_offer: float = 0.3
    gamma: float = 1.0 / 9.0
    b: float = 400.0
    b_a: float = 0.0
    y: float = 150.0
    tau: float = 20.0
    utility: str = "cara"
    risk_aversion: float = 0.002
    mu: float = math.log(1200.0)
    sigma: float = 0.5

    def __post_init__(self):
        for name in ("r", "delta", "lambda_offer", "gamma"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be non-negative")
        if self.sigma <= 0:
            raise ModelError(f"sigma must be positive, got {self.sigma}")
        if not self.b >= self.b_a >= 0:
            raise ModelError(f"need b >= b_a >= 0, got b={self.b}, b_a={self.b_a}")
        if self.y < 0:
            raise ModelError("y must be non-negative")
        if self.utility not in UTILITIES:
            raise ModelError(f"unknown utility {self.utility!r}")
        if self.utility == "cara" and self.risk_aversion <= 0:
            raise ModelError("CARA utility needs a positive risk_aversion")

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class WorkerType:
    """A point of the worker-type mixture: offsets to offer rate and log-wage mean."""

    weight: float = 1.0
    lambda_offset: float = 0.0
    mu_offset: float = 0.0

    def apply(self, p: ModelParams) -> ModelParams:
        return p.replace(
            lambda_offer=max(0.0, p.lambda_offer + self.lambda_offset),
            mu=p.mu + self.mu_offset,
        )


@dataclass_json
@dataclass
class ModelSolution:
    """Reservation wages and lifetime utilities of the two unemployed states."""

    w_star_eligible: float
    w_star_exhausted: float
    U: float
    S: float
    residual: float


@dataclass(frozen=True)
class AcceptedWageMoments:
    """Moments of log accepted wages under lognormal offers truncated at w*."""

    mean_log: float
    var_log: float
    lambda_factor: float


@dataclass_json
@dataclass
class BenefitDerivatives:
    """Responses to the benefit level computed by central differences."""

    dw_star_db: float
    d_meanlog_db: float
    dR_db: float
    dw_star_dtau: float
    dw_star_dba: float
    mechanical: float
    behavioral: float
    w_star: float
    mean_log: float
    lambda_factor: float
    R: float
    b: float


def utility(p: ModelParams, c):
    """Flow utility of consumption ``c`` (scalar or array)."""
    if p.utility == "linear":
        return c
    a = p.risk_aversion
    with np.errstate(over="ignore"):
        return -np.exp(-a * np.asarray(c, dtype=float)) / a


def inverse_utility(p: ModelParams, v: float) -> float:
    if p.utility == "linear":
        return v
    a = p.risk_aversion
    return -math.log(-a * v) / a


@lru_cache(maxsize=8)
def _legendre(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(nodes)


def surplus_integral(p: ModelParams, c: float, nodes: int = QUAD_NODES) -> float:
    """``G(c) = E[max(u(w - tau) - u(c - tau), 0)]`` for lognormal offers.

    Integrated with Gauss-Legendre on the standard-normal scale over
    ``[max(z_c, -12), max(z_c, 0) + 12]``.
    """
    if c > 0:
        z_c = (math.log(c) - p.mu) / p.sigma
    else:
        z_c = -math.inf
    z_lo = max(z_c, -Z_SPAN)
    z_hi = max(z_c, 0.0) + Z_SPAN
    x, weights = _legendre(nodes)
    half = 0.5 * (z_hi - z_lo)
    z = half * x + 0.5 * (z_hi + z_lo)
    wages = np.exp(p.mu + p.sigma * z)
    gain = utility(p, wages - p.tau) - utility(p, c - p.tau)
    return float(half * np.dot(weights, gain * stats.norm.pdf(z)))


def offer_cdf(p: ModelParams, w: float) -> float:
    """F(w) of the lognormal offer distribution."""
    if w <= 0:
        return 0.0
    return float(stats.norm.cdf((math.log(w) - p.mu) / p.sigma))


def _increasing_root(
    f: Callable[[float], float], center: float, scale: float, what: str
) -> float:
    """Root of an increasing function, expanding a bracket around ``center``."""
    step = max(scale, 1.0)
    lo, hi = center - step, center + step
    f_lo, f_hi = f(lo), f(hi)
    expansions = 0
    while not (f_lo <= 0.0 <= f_hi):
        if expansions >= 60 or not (np.isfinite(f_lo) or np.isfinite(f_hi)):
            raise SolverError(
                f"could not bracket the {what} reservation wage",
                residual=float(min(abs(f_lo), abs(f_hi))),
            )
        step *= 2.0
        if f_lo > 0.0:
            hi, f_hi = lo, f_lo
            lo = center - step
            f_lo = f(lo)
        else:
            lo, f_lo = hi, f_hi
            hi = center + step
            f_hi = f(hi)
        expansions += 1
    if expansions:
        logger.debug("expanded %s bracket %d times", what, expansions)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    try:
        return optimize.brentq(f, lo, hi, xtol=1e-12, maxiter=MAX_ITER)
    except RuntimeError as e:
        raise SolverError(f"{what} reservation wage did not converge: {e}")


def _exhausted_state(p: ModelParams, x: float, nodes: int) -> Tuple[float, float]:
    """Exhausted reservation wage and flow value ``r S`` given ``x = r U``."""
    k = p.r + p.delta
    flow = utility(p, p.b_a + p.y)

    def flow_value(w: float) -> float:
        return (p.r * utility(p, w - p.tau) + p.delta * x) / k

    def residual(w: float) -> float:
        return flow_value(w) - flow - p.lambda_offer * surplus_integral(p, w, nodes) / k

    w_e = _increasing_root(residual, p.tau + p.b_a + p.y, p.b_a + p.y, "exhausted")
    return w_e, float(flow_value(w_e))


def _level(flow_value: float, r: float) -> float:
    if r > 0:
        return flow_value / r
    return math.copysign(math.inf, flow_value)


def solve_model(
    p: ModelParams, tol: float = DEFAULT_TOL, nodes: int = QUAD_NODES
) -> ModelSolution:
    """Solve for the eligible and exhausted reservation wages.

    The outer root is on w* using the flow identity ``r U = u(w* - tau)``; each
    evaluation solves the exhausted state for the implied ``r U``. With ``r = 0``
    the eligible condition becomes ``u(w* - tau) = u(b + y) + lambda G(w*) / delta``,
    which needs ``gamma = 0`` and positive ``delta`` and ``lambda``; U and S are
    then infinite.

    Args:
        p: Model parameters.
        tol: Tolerance on the normalized flow-value residual.
        nodes: Gauss-Legendre nodes for the offer integrals.

    Returns:
        The solved ModelSolution.

    Raises:
        ModelError: For a non-positive ``tol`` or an undiscounted model that
            has no stationary reservation wage.
        SolverError: If the residual cannot be brought below ``tol``.
    """
    if tol <= 0:
        raise ModelError("tol must be positive")
    if p.r == 0 and p.gamma > 0:
        raise ModelError("with r = 0 the eligible state is transient; set gamma = 0")
    if p.r == 0 and not (p.delta > 0 and p.lambda_offer > 0):
        raise ModelError("with r = 0 both delta and lambda_offer must be positive")
    k = p.r + p.delta
    flow = utility(p, p.b + p.y)

    def residual(w: float) -> float:
        x = utility(p, w - p.tau)
        offers = flow + p.lambda_offer * surplus_integral(p, w, nodes) / k
        if p.gamma == 0:
            return x - offers
        rS = _exhausted_state(p, x, nodes)[1]
        return x - (p.r * offers + p.gamma * rS) / (p.r + p.gamma)

    try:
        w_star = _increasing_root(residual, p.tau + p.b + p.y, p.b + p.y, "eligible")
        rU = float(utility(p, w_star - p.tau))
        w_e, rS = _exhausted_state(p, rU, nodes)
    except SolverError as e:
        e.params = asdict(p)
        raise
    U, S = _level(rU, p.r), _level(rS, p.r)
    scale = max(1.0, abs(float(flow)))
    res = abs(residual(w_star)) / scale
    if not res <= tol:
        raise SolverError(
            "reservation-wage residual above tolerance", residual=res, params=asdict(p)
        )
    logger.debug("solved model b=%g: w*=%.6f w_e=%.6f res=%.2e", p.b, w_star, w_e, res)
    return ModelSolution(
        w_star_eligible=float(w_star),
        w_star_exhausted=float(w_e),
        U=float(U),
        S=float(S),
        residual=float(res),
    )


def accepted_wage_moments(p: ModelParams, w_star: float) -> AcceptedWageMoments:
    """Mean, variance and Lambda of log accepted wages.

    With ``alpha = (log w* - mu) / sigma`` and hazard ``h = phi(alpha) / (1 - Phi)``::

        mean = mu + sigma h
        var = sigma^2 (1 + alpha h - h^2)
        Lambda = sigma^2 / (sigma^2 - var) = 1 / (h (h - alpha))

    Lambda is infinite when the truncation has no effect on the mean.
    """
    if w_star <= 0:
        raise ModelError(f"w_star must be positive, got {w_star}")
    alpha = (math.log(w_star) - p.mu) / p.sigma
    if stats.norm.sf(alpha) == 0.0:
        raise ModelError(
            f"truncation point {w_star:g} leaves no survival mass (alpha={alpha:.2f})"
        )
    h = math.exp(stats.norm.logpdf(alpha) - stats.norm.logsf(alpha))
    mean_log = p.mu + p.sigma * h
    var_log = p.sigma**2 * (1.0 + alpha * h - h * h)
    gap = h * (h - alpha)
    lambda_factor = math.inf if gap <= 0.0 else 1.0 / gap
    return AcceptedWageMoments(
        mean_log=float(mean_log), var_log=float(var_log), lambda_factor=lambda_factor
    )


def exit_hazard(p: ModelParams, w_star: float) -> float:
    """Continuous hazard out of UI: ``gamma + lambda (1 - F(w*))``."""
    return p.gamma + p.lambda_offer * (1.0 - offer_cdf(p, w_star))


def monthly_exit_probability(p: ModelParams, w_star: float) -> float:
    return -math.expm1(-exit_hazard(p, w_star))


def expected_ui_duration(p: ModelParams, w_star: float) -> float:
    """Expected months in UI, ``1 / (gamma + lambda (1 - F(w*)))``."""
    hazard = exit_hazard(p, w_star)
    if hazard <= 0:
        raise ModelError("exit hazard is zero; expected UI duration is infinite")
    return 1.0 / hazard


def survival_weights(hazard: float, months: int, timing: str = "continuous"):
    """Expected time spent in UI during each of months 1..months.

    ``continuous`` integrates ``exp(-hazard t)`` over each month, so the weights
    of an unlimited spell add up to ``1 / hazard``. ``monthly`` pays a month in
    full once it has begun, ``(1 - q)^(d - 1)`` with ``q = 1 - exp(-hazard)``,
    which is the accounting of the spell simulator.
    """
    if timing not in TIMINGS:
        raise ModelError(f"unknown timing {timing!r}")
    if hazard < 0:
        raise ModelError(f"exit hazard must be non-negative, got {hazard}")
    start = np.exp(-hazard * np.arange(months))
    if timing == "monthly" or hazard == 0:
        return start
    return start * (-math.expm1(-hazard) / hazard)


def _tail_weight(hazard: float, first_month: int, timing: str) -> float:
    """Weight of months ``first_month`` onwards for an unlimited spell."""
    stay = math.exp(-hazard * (first_month - 1))
    if timing == "monthly":
        return stay / -math.expm1(-hazard)
    return stay / hazard


def expected_benefits_from_level(
    rule: BenefitRule,
    hazard: float,
    b1: float,
    potential_months: Optional[int],
    timing: str = "continuous",
) -> float:
    """``sum_d b_d S_d`` for full benefit ``b1``, truncated at exhaustion.

    ``S_d`` comes from :func:`survival_weights`; ``potential_months=None``
    means benefits never run out.
    """
    if potential_months is not None:
        if potential_months < 1:
            raise ModelError(f"potential_months must be >= 1, got {potential_months}")
        path = benefit_path_from_level(rule, b1, potential_months)
        return float(np.dot(path, survival_weights(hazard, potential_months, timing)))
    if hazard <= 0:
        raise ModelError("zero exit hazard with unlimited duration gives infinite R")
    last_start = rule.decay_steps[-1][0]
    head = benefit_path_from_level(rule, b1, last_start - 1)
    total = float(np.dot(head, survival_weights(hazard, last_start - 1, timing)))
    b_last = max(rule.b_low, decay_fraction(rule, last_start) * b1)
    return total + b_last * _tail_weight(hazard, last_start, timing)


def expected_total_benefits(
    rule: BenefitRule,
    p: ModelParams,
    w_star: float,
    net_ref_wage: float,
    potential_months: Optional[int],
) -> float:
    """Expected UI paid over a spell, R.

    Benefits accrue at the monthly rate ``b_d`` while the worker is in UI, and
    exits arrive at the constant hazard ``gamma + lambda (1 - F(w*))``. With a
    flat benefit and no exhaustion this is ``b * expected_ui_duration``.
    ``potential_months=None`` means benefits never run out.
    """
    if net_ref_wage <= 0:
        raise ModelError("net reference wage must be positive")
    b1 = min(rule.b_high, rule.beta * net_ref_wage)
    return expected_benefits_from_level(
        rule, exit_hazard(p, w_star), b1, potential_months
    )


def benefit_derivatives(
    p: ModelParams,
    rule: BenefitRule,
    step: Optional[float] = None,
    potential_months: Optional[int] = None,
    tol: float = DEFAULT_TOL,
) -> BenefitDerivatives:
    """Central-difference responses of w*, mean log wage and R to b (and tau).

    ``mechanical`` holds the exit hazard at its baseline value and moves only the
    benefit path; ``behavioral`` holds the path and moves only the hazard.

    Args:
        p: Baseline parameters; ``p.b`` is the full benefit level.
        rule: Schedule supplying the decay and floor of the benefit path.
        step: Difference step, defaults to 1% of b.
        potential_months: Exhaustion month for R, None for unlimited.
        tol: Solver tolerance.

    Returns:
        BenefitDerivatives at the baseline.
    """
    h = 0.01 * p.b if step is None else step
    if h <= 0:
        raise ModelError("finite-difference step must be positive")
    if p.b - h < p.b_a:
        raise ModelError("step too large: b - step falls below b_a")

    base = solve_model(p, tol)
    up = solve_model(p.replace(b=p.b + h), tol)
    down = solve_model(p.replace(b=p.b - h), tol)

    def moments(sol: ModelSolution) -> AcceptedWageMoments:
        return accepted_wage_moments(p, sol.w_star_eligible)

    def ui_paid(b1: float, w_star: float) -> float:
        return expected_benefits_from_level(
            rule, exit_hazard(p, w_star), b1, potential_months
        )

    w0 = base.w_star_eligible
    dw_db = (up.w_star_eligible - down.w_star_eligible) / (2 * h)
    d_mean = (moments(up).mean_log - moments(down).mean_log) / (2 * h)
    dR_db = (
        ui_paid(p.b + h, up.w_star_eligible) - ui_paid(p.b - h, down.w_star_eligible)
    ) / (2 * h)
    mechanical = (ui_paid(p.b + h, w0) - ui_paid(p.b - h, w0)) / (2 * h)
    behavioral = (
        ui_paid(p.b, up.w_star_eligible) - ui_paid(p.b, down.w_star_eligible)
    ) / (2 * h)

    tau_up = solve_model(p.replace(tau=p.tau + h), tol)
    tau_down = solve_model(p.replace(tau=p.tau - h), tol)
    dw_dtau = (tau_up.w_star_eligible - tau_down.w_star_eligible) / (2 * h)

    # b_a is bounded by [0, b]; fall back to one-sided steps at the bounds.
    ba_hi = min(p.b, p.b_a + h)
    ba_lo = max(0.0, p.b_a - h)
    ba_up = solve_model(p.replace(b_a=ba_hi), tol) if ba_hi > p.b_a else base
    ba_down = solve_model(p.replace(b_a=ba_lo), tol) if ba_lo < p.b_a else base
    dw_dba = (ba_up.w_star_eligible - ba_down.w_star_eligible) / (ba_hi - ba_lo)

    base_moments = moments(base)
    return BenefitDerivatives(
        dw_star_db=dw_db,
        d_meanlog_db=d_mean,
        dR_db=dR_db,
        dw_star_dtau=dw_dtau,
        dw_star_dba=dw_dba,
        mechanical=mechanical,
        behavioral=behavioral,
        w_star=w0,
        mean_log=base_moments.mean_log,
        lambda_factor=base_moments.lambda_factor,
        R=ui_paid(p.b, w0),
        b=p.b,
    )
