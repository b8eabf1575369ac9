"""Regression kink design estimators.

Local polynomial fits around a kink ``k`` of the running variable ``w`` with
``D = 1{w >= k}``. The reduced form slope change ``nu1`` is the coefficient on
``(w - k) D``; the first stage slope change ``pi1`` is the same coefficient in a
regression of the treatment. The kink effect is ``alpha = nu1 / pi1``.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from dataclasses_json import dataclass_json
from scipy import stats

from .errors import (
    BandwidthError,
    EmptyWindowError,
    EstimationError,
    SingularDesignError,
)

logger = logging.getLogger(__name__)

METHODS = ("sharp", "fuzzy", "pooled")
KERNELS = ("uniform", "triangular")
BANDWIDTH_RULES = ("fg", "mse")
MIN_SIDE_OBS = 20

# Column of the slope-change regressor in every design.
KINK_COLUMN = 2

Window = Tuple[Optional[float], Optional[float]]


@dataclass
class RkdSpec:
    """Configuration of one RKD fit.

    ``bandwidth`` is a positive number or one of ``"fg"`` / ``"mse"``.
    ``sample_window`` bounds the running variable before the bandwidth is applied
    and ``sample_filter`` is a pandas query string selecting a subsample.
    When ``regime_kinks`` holds the (pre, post) kinks both regimes are pooled,
    each centered at its own kink, with ``regime_column`` the post indicator.
    ``regime_windows`` then holds one (pre, post) pair of sample windows.
    Pooling is required by the ``pooled`` method and allowed for ``sharp``.
    """

    outcome: str
    kink_point: float
    running: str = "gross_ref_wage"
    treatment: str = "initial_benefit"
    poly_order: int = 1
    method: str = "fuzzy"
    known_slope_change: Optional[float] = None
    bandwidth: Union[str, float] = "fg"
    kernel: str = "uniform"
    controls: List[str] = field(default_factory=list)
    fixed_effects: List[str] = field(default_factory=list)
    sample_window: Optional[Window] = None
    sample_filter: Optional[str] = None
    duration_dummies: bool = False
    duration_column: str = "duration_group"
    weak_instrument_f: float = 10.0
    regime_column: str = "post"
    regime_kinks: Optional[Tuple[float, float]] = None
    regime_windows: Optional[Tuple[Window, Window]] = None
    benefit_at_kink: Optional[float] = None
    log_outcome: bool = False
    label: str = ""

    def __post_init__(self):
        if self.poly_order not in (1, 2):
            raise EstimationError(f"poly_order must be 1 or 2, got {self.poly_order}")
        if self.method not in METHODS:
            raise EstimationError(f"unknown method '{self.method}'")
        if self.kernel not in KERNELS:
            raise EstimationError(f"unknown kernel '{self.kernel}'")
        if isinstance(self.bandwidth, str):
            if self.bandwidth not in BANDWIDTH_RULES:
                try:
                    self.bandwidth = float(self.bandwidth)
                except ValueError:
                    raise EstimationError(f"unknown bandwidth '{self.bandwidth}'")
        if not isinstance(self.bandwidth, str) and not self.bandwidth > 0:
            raise EstimationError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.method == "pooled" and self.regime_kinks is None:
            raise EstimationError("pooled estimation needs regime_kinks")
        if self.regime_windows is not None and self.regime_kinks is None:
            raise EstimationError("regime_windows need regime_kinks")

    def with_changes(self, **changes) -> "RkdSpec":
        values = asdict(self)
        values.update(changes)
        return RkdSpec(**values)


@dataclass_json
@dataclass
class RkdFit:
    """Fitted slope changes, kink effect and inference for one cell."""

    outcome: str
    method: str
    kink_point: float
    poly_order: int
    kernel: str
    nu1: float
    pi1: float
    alpha: float
    se_alpha: float
    se_nu1: float
    se_pi1: float
    n_used: int
    h_used: float
    mean_outcome: float
    first_stage_f: Optional[float] = None
    weak_instrument: bool = False
    n_censored_dropped: int = 0
    benefit_at_kink: Optional[float] = None
    elasticity: Optional[float] = None
    label: str = ""
    spec: Dict[str, Any] = field(default_factory=dict)

    def confidence_interval(self, level: float = 0.95) -> Tuple[float, float]:
        z = stats.norm.ppf(0.5 + level / 2)
        return self.alpha - z * self.se_alpha, self.alpha + z * self.se_alpha


@dataclass
class RegressionInternals:
    """Pieces of a (possibly IV) weighted regression needed for inference.

    ``Z`` is None for OLS; for 2SLS it holds the instruments, with ``X`` the
    second-stage regressors including the endogenous column.
    """

    X: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    coef: np.ndarray
    residuals: np.ndarray
    Z: Optional[np.ndarray] = None


@dataclass
class _Sample:
    frame: pd.DataFrame
    v: np.ndarray
    n_censored_dropped: int


@dataclass
class _Design:
    exog: np.ndarray
    y: np.ndarray
    treatment: Optional[np.ndarray]
    weights: np.ndarray
    mean_outcome: float


def robust_vcov(fit: RegressionInternals) -> np.ndarray:
    """HC1 sandwich covariance; the 2SLS sandwich when instruments are present.

    Raises:
        SingularDesignError: If the bread matrix is singular.
        EstimationError: If there are no residual degrees of freedom.
    """
    X = fit.X
    w = fit.weights
    n, k = X.shape
    if n <= k:
        raise EstimationError(f"{n} observations for {k} parameters")
    if fit.Z is not None:
        Zw = fit.Z * w[:, None]
        X = fit.Z @ _solve(fit.Z.T @ Zw, Zw.T @ fit.X)
    gram = X.T @ (X * w[:, None])
    if np.linalg.matrix_rank(gram) < k:
        raise SingularDesignError("bread matrix is singular")
    bread = np.linalg.inv(gram)
    scores = X * (w * fit.residuals)[:, None]
    meat = scores.T @ scores
    return (n / (n - k)) * bread @ meat @ bread


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as e:
        raise SingularDesignError(f"singular instrument cross-product: {e}")


def _weighted_lstsq(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    root = np.sqrt(w)
    Xw = X * root[:, None]
    if np.linalg.matrix_rank(Xw) < X.shape[1]:
        raise SingularDesignError(
            f"design matrix is rank deficient ({X.shape[1]} columns)"
        )
    coef, *_ = np.linalg.lstsq(Xw, y * root, rcond=None)
    return coef


def _ols(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> RegressionInternals:
    coef = _weighted_lstsq(X, y, w)
    return RegressionInternals(X=X, y=y, weights=w, coef=coef, residuals=y - X @ coef)


def _tsls(
    X: np.ndarray, Z: np.ndarray, y: np.ndarray, w: np.ndarray
) -> RegressionInternals:
    """Weighted 2SLS via fitted regressors ``Z (Z'WZ)^-1 Z'WX``."""
    Zw = Z * w[:, None]
    X_hat = Z @ _solve(Z.T @ Zw, Zw.T @ X)
    coef = _weighted_lstsq(X_hat, y, w)
    return RegressionInternals(
        X=X, y=y, weights=w, coef=coef, residuals=y - X @ coef, Z=Z
    )


def pooled_running(
    w: np.ndarray, post: np.ndarray, kinks: Tuple[float, float]
) -> np.ndarray:
    """Running variable normalized to zero at each regime's kink."""
    k_pre, k_post = kinks
    w = np.asarray(w, dtype=float)
    post = np.asarray(post, dtype=float)
    return (w - k_pre) * (1.0 - post) + (w - k_post) * post


def _centered_running(frame: pd.DataFrame, spec: RkdSpec) -> np.ndarray:
    w = frame[spec.running].to_numpy(dtype=float)
    if spec.regime_kinks is None:
        return w - spec.kink_point
    return pooled_running(w, frame[spec.regime_column], spec.regime_kinks)


def _in_window(running: pd.Series, window: Optional[Window]) -> np.ndarray:
    keep = np.ones(len(running), dtype=bool)
    if window is None:
        return keep
    lo, hi = window
    if lo is not None:
        keep &= (running >= lo).to_numpy()
    if hi is not None:
        keep &= (running <= hi).to_numpy()
    return keep


def _prepare(data: pd.DataFrame, spec: RkdSpec) -> _Sample:
    """Filter, window and drop missing rows; returns the centered running variable."""
    frame = data
    if spec.sample_filter:
        try:
            frame = frame.query(spec.sample_filter)
        except Exception as e:
            raise EstimationError(f"invalid sample_filter '{spec.sample_filter}': {e}")
    for column in [spec.running, spec.outcome]:
        if column not in frame.columns:
            raise EstimationError(f"column '{column}' not in data")
    if spec.sample_window is not None:
        frame = frame[_in_window(frame[spec.running], spec.sample_window)]
    if spec.regime_windows is not None:
        if spec.regime_column not in frame.columns:
            raise EstimationError(f"column '{spec.regime_column}' not in data")
        post = frame[spec.regime_column].to_numpy(dtype=float) == 1.0
        pre_window, post_window = spec.regime_windows
        keep = np.where(
            post,
            _in_window(frame[spec.running], post_window),
            _in_window(frame[spec.running], pre_window),
        )
        frame = frame[keep]

    needed = [spec.running, spec.outcome, *spec.controls, *spec.fixed_effects]
    if spec.method != "sharp":
        needed.append(spec.treatment)
    if spec.regime_kinks is not None:
        needed.append(spec.regime_column)
    if spec.duration_dummies:
        needed.append(spec.duration_column)
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise EstimationError(f"columns missing from data: {missing}")

    incomplete = frame[needed].isna().any(axis=1).to_numpy()
    if "censored" in frame.columns:
        censored = frame["censored"].astype(bool).to_numpy()
    else:
        censored = np.zeros(len(frame), dtype=bool)
    drop = incomplete | censored if spec.duration_dummies else incomplete
    n_censored = int(np.sum(drop & censored))
    n_incomplete = int(np.sum(drop & ~censored))
    if n_censored or n_incomplete:
        logger.info(
            "dropped %d censored and %d incomplete rows", n_censored, n_incomplete
        )
    frame = frame[~drop]
    return _Sample(
        frame=frame, v=_centered_running(frame, spec), n_censored_dropped=n_censored
    )


def _dummies(
    values: pd.Series, name: str
) -> Tuple[np.ndarray, np.ndarray]:
    """Drop-first dummies and a mask of rows in singleton categories."""
    counts = values.map(values.value_counts())
    singleton = (counts == 1).to_numpy()
    if singleton.any():
        logger.warning(
            "dropping %d singleton categories of '%s' inside the bandwidth",
            int(singleton.sum()),
            name,
        )
    kept = values[~singleton]
    dummies = pd.get_dummies(kept.astype(str), drop_first=True, dtype=float)
    dummies = dummies.loc[:, dummies.std(ddof=0) > 0]
    full = np.zeros((len(values), dummies.shape[1]))
    full[~singleton] = dummies.to_numpy()
    return full, singleton


def _kernel_weights(u: np.ndarray, kernel: str) -> np.ndarray:
    if kernel == "triangular":
        return np.clip(1.0 - np.abs(u), 0.0, None)
    return np.ones_like(u)


def _design(sample: _Sample, spec: RkdSpec, h: float) -> _Design:
    inside = np.abs(sample.v) <= h
    frame = sample.frame[inside]
    v = sample.v[inside]
    if len(frame) == 0:
        raise EmptyWindowError(
            f"no observations within bandwidth {h:g} of the kink at {spec.kink_point:g}"
        )

    keep = np.ones(len(frame), dtype=bool)
    blocks: List[np.ndarray] = []
    for column in spec.fixed_effects + (
        [spec.duration_column] if spec.duration_dummies else []
    ):
        block, singleton = _dummies(frame[column], column)
        keep &= ~singleton
        blocks.append(block)
    frame, v = frame[keep], v[keep]
    blocks = [block[keep] for block in blocks]

    u = v / h
    d = (u >= 0).astype(float)
    columns = [np.ones_like(u), u, u * d]
    if spec.poly_order == 2:
        columns += [u**2, u**2 * d]
    if spec.regime_kinks is not None:
        post = frame[spec.regime_column].to_numpy(dtype=float)
        if np.ptp(post) > 0:
            columns.append(post)
    for column in spec.controls:
        columns.append(frame[column].to_numpy(dtype=float))
    exog = np.column_stack(columns + [b for b in blocks if b.shape[1]])

    y = frame[spec.outcome].to_numpy(dtype=float)
    treatment = None
    if spec.method != "sharp":
        treatment = frame[spec.treatment].to_numpy(dtype=float)
    if len(y) <= exog.shape[1]:
        raise EmptyWindowError(
            f"{len(y)} observations within bandwidth {h:g} "
            f"for {exog.shape[1]} parameters"
        )
    return _Design(
        exog=exog,
        y=y,
        treatment=treatment,
        weights=_kernel_weights(u, spec.kernel),
        mean_outcome=float(np.mean(y)),
    )


def _slope_change(fit: RegressionInternals, h: float) -> Tuple[float, float]:
    """Slope change per unit of the running variable and its robust SE."""
    variance = robust_vcov(fit)[KINK_COLUMN, KINK_COLUMN]
    return fit.coef[KINK_COLUMN] / h, math.sqrt(max(variance, 0.0)) / h


def resolve_bandwidth(data: pd.DataFrame, spec: RkdSpec) -> float:
    if spec.bandwidth == "fg":
        return fg_bandwidth(data, spec)
    if spec.bandwidth == "mse":
        return mse_optimal_bandwidth(data, spec)
    return float(spec.bandwidth)


def _finish(
    spec: RkdSpec,
    sample: _Sample,
    design: _Design,
    h: float,
    **values,
) -> RkdFit:
    fit = RkdFit(
        outcome=spec.outcome,
        method=spec.method,
        kink_point=spec.kink_point,
        poly_order=spec.poly_order,
        kernel=spec.kernel,
        n_used=len(design.y),
        h_used=h,
        mean_outcome=design.mean_outcome,
        n_censored_dropped=sample.n_censored_dropped,
        benefit_at_kink=spec.benefit_at_kink,
        label=spec.label,
        spec=_spec_echo(spec),
        **values,
    )
    if spec.benefit_at_kink is not None and (
        spec.log_outcome or design.mean_outcome > 0
    ):
        fit.elasticity = elasticity(
            fit.alpha, spec.benefit_at_kink, design.mean_outcome, spec.log_outcome
        )
    return fit


def _spec_echo(spec: RkdSpec) -> Dict[str, Any]:
    echo = asdict(spec)
    for key, value in echo.items():
        if isinstance(value, tuple):
            echo[key] = list(value)
    return echo


def sharp_rkd(
    data: pd.DataFrame,
    spec: RkdSpec,
    known_slope_change: Optional[float] = None,
    h: Optional[float] = None,
) -> RkdFit:
    """Sharp RKD: outcome slope change divided by the known schedule slope change.

    Args:
        data: Spell data.
        spec: Fit configuration; ``spec.known_slope_change`` is used when
            ``known_slope_change`` is not given.
        known_slope_change: Slope change of the schedule at the kink.
        h: Bandwidth override; otherwise resolved from ``spec.bandwidth``.

    Returns:
        RkdFit with ``pi1`` equal to the known slope change.

    Raises:
        EstimationError: If the slope change is missing or zero.
        EmptyWindowError: If the window holds too few observations.
        SingularDesignError: If the design is rank deficient.
    """
    slope = known_slope_change
    if slope is None:
        slope = spec.known_slope_change
    if slope is None or slope == 0:
        raise EstimationError("sharp RKD needs a non-zero known slope change")
    h = resolve_bandwidth(data, spec) if h is None else h
    sample = _prepare(data, spec)
    design = _design(sample, spec, h)
    reduced = _ols(design.exog, design.y, design.weights)
    nu1, se_nu1 = _slope_change(reduced, h)
    return _finish(
        spec,
        sample,
        design,
        h,
        nu1=nu1,
        pi1=slope,
        alpha=nu1 / slope,
        se_alpha=se_nu1 / abs(slope),
        se_nu1=se_nu1,
        se_pi1=0.0,
    )


def fuzzy_rkd(
    data: pd.DataFrame, spec: RkdSpec, h: Optional[float] = None
) -> RkdFit:
    """Fuzzy RKD by 2SLS, instrumenting the treatment with ``(w - k) D``.

    The model is just identified, so ``alpha`` equals ``nu1 / pi1`` from the
    separately fitted reduced form and first stage. A first-stage F below
    ``spec.weak_instrument_f`` sets ``weak_instrument`` and logs a warning.
    """
    h = resolve_bandwidth(data, spec) if h is None else h
    sample = _prepare(data, spec)
    design = _design(sample, spec, h)

    reduced = _ols(design.exog, design.y, design.weights)
    first = _ols(design.exog, design.treatment, design.weights)
    nu1, se_nu1 = _slope_change(reduced, h)
    pi1, se_pi1 = _slope_change(first, h)
    if pi1 == 0:
        raise EstimationError("first stage has no slope change at the kink")

    # Second stage: the treatment replaces the slope-change column.
    X = design.exog.copy()
    X[:, KINK_COLUMN] = design.treatment
    iv = _tsls(X, design.exog, design.y, design.weights)
    vcov = robust_vcov(iv)
    alpha = float(iv.coef[KINK_COLUMN])
    se_alpha = math.sqrt(max(vcov[KINK_COLUMN, KINK_COLUMN], 0.0))

    f_stat = math.inf if se_pi1 == 0 else (pi1 / se_pi1) ** 2
    weak = f_stat < spec.weak_instrument_f
    if weak:
        logger.warning(
            "weak first stage for '%s' (F=%.2f < %.1f)",
            spec.outcome,
            f_stat,
            spec.weak_instrument_f,
        )
    return _finish(
        spec,
        sample,
        design,
        h,
        nu1=nu1,
        pi1=pi1,
        alpha=alpha,
        se_alpha=se_alpha,
        se_nu1=se_nu1,
        se_pi1=se_pi1,
        first_stage_f=f_stat,
        weak_instrument=weak,
    )


def pooled_two_kink_rkd(
    data: pd.DataFrame, spec: RkdSpec, h: Optional[float] = None
) -> RkdFit:
    """Fuzzy RKD pooling both regimes around their own kinks.

    The running variable is ``(w - k_pre)(1 - T) + (w - k_post) T`` and the regime
    dummy ``T`` enters as a regressor unless it is constant in the window.
    """
    if spec.method != "pooled":
        spec = spec.with_changes(method="pooled")
    return fuzzy_rkd(data, spec, h)


def fit_rkd(data: pd.DataFrame, spec: RkdSpec, h: Optional[float] = None) -> RkdFit:
    """Dispatch on ``spec.method``."""
    if spec.method == "sharp":
        return sharp_rkd(data, spec, h=h)
    if spec.method == "pooled":
        return pooled_two_kink_rkd(data, spec, h)
    return fuzzy_rkd(data, spec, h)


def elasticity(
    alpha: float,
    b_at_kink: float,
    mean_outcome: Optional[float],
    log_outcome: bool = False,
) -> float:
    """``alpha * b / mean`` for level outcomes, ``alpha * b`` for log outcomes."""
    if alpha == 0:
        return 0.0
    if log_outcome:
        return alpha * b_at_kink
    if mean_outcome is None or mean_outcome <= 0:
        raise EstimationError("elasticity of a level outcome needs a positive mean")
    return alpha * b_at_kink / mean_outcome


# Bandwidth selection


@dataclass(frozen=True)
class KinkKernelConstants:
    """Variance and bias constants of the slope-change equivalent kernel per side."""

    variance_left: float
    variance_right: float
    bias_left: float
    bias_right: float


def _gauss_legendre(
    a: float, b: float, nodes: int = 64
) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def boundary_constant(poly_order: int, kernel: str) -> float:
    """Rule-of-thumb constant for a one-sided local polynomial slope estimate.

    Uses the boundary equivalent kernel ``K*(t) = e_1' S^-1 (1, t, ..., t^p) K(t)``
    on ``[0, 1]``::

        C = [((p+1)!)^2 * 3 * int K*^2 / (2 p (int t^(p+1) K*)^2)]^(1/(2p+3))
    """
    p = poly_order
    t, wt = _gauss_legendre(0.0, 1.0)
    k = _kernel_weights(t, kernel)
    basis = np.vander(t, p + 1, increasing=True)
    S = basis.T @ (basis * (wt * k)[:, None])
    row = np.linalg.solve(S, np.eye(p + 1)[1])
    k_star = (basis @ row) * k
    second = float(np.dot(wt, k_star**2))
    moment = float(np.dot(wt, t ** (p + 1) * k_star))
    ratio = math.factorial(p + 1) ** 2 * 3 * second / (2 * p * moment**2)
    return ratio ** (1.0 / (2 * p + 3))


def kink_kernel_constants(poly_order: int, kernel: str) -> KinkKernelConstants:
    """Constants of the slope-change estimator with design ``(1, u, uD[, u^2, u^2 D])``.

    The equivalent kernel is ``k*(u) = e' G^-1 r(u) K(u)`` with
    ``G = int_{-1}^{1} r r' K``; variance and bias constants are
    ``int k*^2`` and ``int u^(p+1) k*`` over each side.
    """
    p = poly_order

    def basis(u: np.ndarray) -> np.ndarray:
        d = (u >= 0).astype(float)
        cols = [np.ones_like(u), u, u * d]
        if p == 2:
            cols += [u**2, u**2 * d]
        return np.column_stack(cols)

    sides = []
    gram = np.zeros((3 + 2 * (p - 1),) * 2)
    for a, b in ((-1.0, 0.0), (0.0, 1.0)):
        u, wt = _gauss_legendre(a, b)
        r = basis(u)
        k = _kernel_weights(u, kernel)
        gram += r.T @ (r * (wt * k)[:, None])
        sides.append((u, wt, r, k))
    row = np.linalg.solve(gram, np.eye(gram.shape[0])[KINK_COLUMN])
    values = []
    for u, wt, r, k in sides:
        k_star = (r @ row) * k
        values.append(
            (float(np.dot(wt, k_star**2)), float(np.dot(wt, u ** (p + 1) * k_star)))
        )
    (v_left, b_left), (v_right, b_right) = values
    return KinkKernelConstants(v_left, v_right, b_left, b_right)


@dataclass
class _Pilot:
    n: int
    sigma2: float
    range_: float
    derivative_sq_sum: float
    derivative_at_kink: float


def _pilot(v: np.ndarray, y: np.ndarray, degree: int, order: int, side: str) -> _Pilot:
    if len(v) < MIN_SIDE_OBS:
        raise BandwidthError(
            f"{len(v)} observations {side} of the kink, need at least {MIN_SIDE_OBS}"
        )
    if np.ptp(v) == 0:
        raise BandwidthError(f"running variable is constant {side} of the kink")
    poly, (resid, rank, _, _) = np.polynomial.Polynomial.fit(v, y, degree, full=True)
    if rank < degree + 1:
        raise BandwidthError(f"degenerate pilot fit {side} of the kink")
    derivative = poly.deriv(order)
    residuals = y - poly(v)
    return _Pilot(
        n=len(v),
        sigma2=float(np.mean(residuals**2)),
        range_=float(np.ptp(v)),
        derivative_sq_sum=float(np.sum(derivative(v) ** 2)),
        derivative_at_kink=float(derivative(0.0)),
    )


def _pilot_sample(data: pd.DataFrame, spec: RkdSpec) -> Tuple[np.ndarray, np.ndarray]:
    sample = _prepare(data, spec)
    return sample.v, sample.frame[spec.outcome].to_numpy(dtype=float)


def fg_bandwidth(data: pd.DataFrame, spec: RkdSpec) -> float:
    """Fan-Gijbels rule-of-thumb bandwidth, the smaller of the two sides.

    Each side gets a global pilot polynomial of order ``p + 3``; with residual
    variance ``s2 = RSS / n`` and side range ``R``::

        h = C * [s2 * R / sum m^(p+1)(x_i)^2]^(1/(2p+3))

    where ``C`` is :func:`boundary_constant`.

    Raises:
        BandwidthError: With fewer than 20 observations on a side or a pilot
            with no curvature.
    """
    v, y = _pilot_sample(data, spec)
    p = spec.poly_order
    constant = boundary_constant(p, spec.kernel)
    bandwidths = []
    for side, mask in (("left", v < 0), ("right", v >= 0)):
        pilot = _pilot(v[mask], y[mask], p + 3, p + 1, side)
        if pilot.derivative_sq_sum <= 0:
            raise BandwidthError(f"pilot derivative vanishes {side} of the kink")
        ratio = pilot.sigma2 * pilot.range_ / pilot.derivative_sq_sum
        bandwidths.append(constant * ratio ** (1.0 / (2 * p + 3)))
    h = min(bandwidths)
    logger.debug("FG bandwidth for '%s': %g (sides %s)", spec.outcome, h, bandwidths)
    return h


def mse_optimal_bandwidth(data: pd.DataFrame, spec: RkdSpec) -> float:
    """Plug-in MSE-optimal bandwidth for the slope-change estimate.

    A simplified selector, not a bias-corrected one. With
    ``MSE(h) = h^(2p) B^2 + V / (n f h^3)``::

        B = sum_side m_side^(p+1)(k) / (p+1)! * bias_side
        V = sum_side s2_side * variance_side
        h = [3 V / (2 p B^2 n f)]^(1/(2p+3))

    Pilots are global polynomials of order ``p + 2`` per side and ``f`` is a
    Gaussian kernel density estimate of the centered running variable at zero.
    """
    v, y = _pilot_sample(data, spec)
    p = spec.poly_order
    constants = kink_kernel_constants(p, spec.kernel)
    left = _pilot(v[v < 0], y[v < 0], p + 2, p + 1, "left")
    right = _pilot(v[v >= 0], y[v >= 0], p + 2, p + 1, "right")
    bias = (
        left.derivative_at_kink * constants.bias_left
        + right.derivative_at_kink * constants.bias_right
    ) / math.factorial(p + 1)
    variance = (
        left.sigma2 * constants.variance_left + right.sigma2 * constants.variance_right
    )
    if bias == 0:
        raise BandwidthError("pilot curvature cancels at the kink")
    density = float(stats.gaussian_kde(v)(0.0)[0])
    if density <= 0:
        raise BandwidthError("running-variable density is zero at the kink")
    n = len(v)
    h = (3 * variance / (2 * p * bias**2 * n * density)) ** (1.0 / (2 * p + 3))
    logger.debug("MSE bandwidth for '%s': %g", spec.outcome, h)
    return h


# Diagnostics


def binned_means(
    data: pd.DataFrame,
    var_x: str,
    var_y: str,
    bin_width: float,
    anchor: float = 0.0,
    trim: Optional[Tuple[float, float]] = None,
) -> pd.DataFrame:
    """Means of ``var_y`` in equal-width bins of ``var_x`` anchored at ``anchor``.

    Bins are ``[anchor + j w, anchor + (j + 1) w)``. ``trim`` drops ``var_y``
    outside the given quantiles first. Returns columns ``bin_center``, ``mean``
    and ``count``, sorted by bin.
    """
    if bin_width <= 0:
        raise EstimationError(f"bin_width must be positive, got {bin_width}")
    frame = data[[var_x, var_y]].dropna()
    if trim is not None and len(frame):
        lo, hi = frame[var_y].quantile(list(trim))
        frame = frame[(frame[var_y] >= lo) & (frame[var_y] <= hi)]
    index = np.floor((frame[var_x].to_numpy(dtype=float) - anchor) / bin_width)
    grouped = frame[var_y].groupby(index.astype(np.int64)).agg(["mean", "count"])
    return pd.DataFrame(
        {
            "bin_center": anchor + (grouped.index.to_numpy() + 0.5) * bin_width,
            "mean": grouped["mean"].to_numpy(dtype=float),
            "count": grouped["count"].to_numpy(dtype=np.int64),
        }
    )


def density_test(data: pd.DataFrame, spec: RkdSpec, bin_width: float) -> RkdFit:
    """Slope change of the running-variable density at the kink.

    Counts in bins anchored at the kink are fitted with the sharp design and a
    unit slope change, so ``alpha`` is the change in count slope per currency
    unit. A numeric ``spec.bandwidth`` limits the bins used; otherwise all enter.
    """
    plain = spec.with_changes(
        outcome=spec.running,
        method="sharp",
        controls=[],
        fixed_effects=[],
        duration_dummies=False,
    )
    v = _prepare(data, plain).v
    counts = binned_means(pd.DataFrame({"v": v}).assign(y=v), "v", "y", bin_width)
    bins = pd.DataFrame({"center": counts["bin_center"], "count": counts["count"]})
    if isinstance(spec.bandwidth, str):
        h = float(np.max(np.abs(bins["center"])))
    else:
        h = float(spec.bandwidth)
    count_spec = RkdSpec(
        outcome="count",
        running="center",
        kink_point=0.0,
        poly_order=spec.poly_order,
        method="sharp",
        bandwidth=h,
        kernel=spec.kernel,
        label=spec.label or "density",
    )
    return sharp_rkd(bins, count_spec, known_slope_change=1.0, h=h)


def covariate_smoothness(
    data: pd.DataFrame,
    covariates: Sequence[str],
    outcome: str,
    spec: RkdSpec,
) -> RkdFit:
    """Sharp RKD on the outcome predicted linearly from covariates.

    The bandwidth is resolved on the actual outcome, then the sharp design is
    fitted to the projection. With no covariates the projection is the mean and
    the slope change is exactly zero.
    """
    base = spec.with_changes(
        outcome=outcome,
        method="sharp",
        controls=[],
        fixed_effects=[],
        duration_dummies=False,
    )
    slope = 1.0 if spec.known_slope_change is None else spec.known_slope_change
    h = resolve_bandwidth(data, base)
    frame = data.dropna(subset=[outcome, *covariates])
    X = np.column_stack(
        [np.ones(len(frame))] + [frame[c].to_numpy(dtype=float) for c in covariates]
    )
    y = frame[outcome].to_numpy(dtype=float)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    predicted = frame.assign(predicted_outcome=X @ coef)
    fit = sharp_rkd(
        predicted,
        base.with_changes(
            outcome="predicted_outcome", label=spec.label or "smoothness"
        ),
        known_slope_change=slope,
        h=h,
    )
    if not covariates:
        # a constant projection has no slope on either side
        fit = replace(fit, nu1=0.0, alpha=0.0, se_nu1=0.0, se_alpha=0.0)
    return fit
