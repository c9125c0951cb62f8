# small_dev_mc.py - Monte Carlo spectral gap estimation from small deviations and exit times
"""
Two estimators of lambda1, the lowest Dirichlet eigenvalue of -1/2 Delta_G on the unit
homogeneous ball:

* exit_tail: P(exit time > t) decays like exp(-lambda1 t); fit log S(t) on a tail window.
* smalldev_extrapolation: -eps^2 log P(max_{t<=1} |g_t| < eps) -> lambda1 as eps -> 0;
  fit the rate against eps and read off the intercept.

By dilation, P(max_{[0,1]} |g| < eps) = P(exit time > eps^-2), which ties the two together.
Exits are monitored on the time grid only, so survival is overestimated and the fitted
rate is biased low; dt_ladder reports the size of that bias.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from clifford_structures import HTypeStructure
from gap_bounds import GapBoundResult
from hgap_errors import (AllPathsExited, DomainError, InsufficientDefinedRates, InsufficientSamples,
                         NoStableWindow)
from hypo_sde import run_ensemble

logger = logging.getLogger(__name__)

MIN_PATHS = 1000
MIN_CURVE_POINTS = 10
MIN_COUNT = 25
CONFIDENCE = 0.95
DEFAULT_GRID_POINTS = 200
EXTRAPOLATION_MODELS = ('linear', 'quadratic', 'auto')

# grid monitoring of a unit-diffusion boundary crossing sees the barrier pushed out by
# beta * sqrt(dt), beta = -zeta(1/2) / sqrt(2 pi)
MONITORING_SHIFT = 0.5826

# separate random streams keep exit and small-deviation ensembles independent
EXIT_STREAM = 0
SMALL_DEV_STREAM = 1


def wilson_interval(successes, trials: int, confidence: float = CONFIDENCE) -> Tuple[np.ndarray, np.ndarray]:
    """Pointwise Wilson score interval; always contains the empirical proportion"""
    k = np.asarray(successes, dtype=float)
    p = k / trials
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z / denom * np.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials))
    low = np.clip(np.minimum(center - half, p), 0.0, 1.0)
    high = np.clip(np.maximum(center + half, p), 0.0, 1.0)
    return low, high


@dataclass
class SurvivalCurve:
    """Alive counts on t_grid for an ensemble started at the identity"""
    t_grid: np.ndarray
    alive: np.ndarray
    n_paths: int
    dt: float
    seed: int
    exit_times: np.ndarray
    t_max: float

    @classmethod
    def from_exit_times(cls, exit_times: np.ndarray, t_grid: np.ndarray, dt: float, seed: int,
                        t_max: Optional[float] = None) -> 'SurvivalCurve':
        exit_times = np.asarray(exit_times, dtype=float)
        t_grid = np.asarray(t_grid, dtype=float)
        ordered = np.sort(exit_times)
        alive = exit_times.size - np.searchsorted(ordered, t_grid, side='right')
        return cls(t_grid=t_grid, alive=alive.astype(np.int64), n_paths=int(exit_times.size), dt=dt,
                   seed=seed, exit_times=exit_times, t_max=float(t_max if t_max is not None else t_grid[-1]))

    @property
    def survival(self) -> np.ndarray:
        return self.alive / self.n_paths

    @property
    def ci(self) -> Tuple[np.ndarray, np.ndarray]:
        return wilson_interval(self.alive, self.n_paths)

    @property
    def censored(self) -> int:
        return int(np.sum(self.exit_times > self.t_max))

    @property
    def mean_exit_time(self) -> float:
        """Mean of min(exit time, t_max); unbiased only when nothing is censored"""
        return float(np.mean(np.minimum(self.exit_times, self.t_max)))

    @property
    def mean_exit_se(self) -> float:
        return float(np.std(np.minimum(self.exit_times, self.t_max), ddof=1) / math.sqrt(self.n_paths))

    def survival_at(self, t: float) -> Tuple[float, float, float]:
        """(estimate, ci_low, ci_high) of P(exit time > t), straight from the exit times"""
        k = int(np.sum(self.exit_times > t))
        low, high = wilson_interval(k, self.n_paths)
        return k / self.n_paths, float(low), float(high)

    def to_frame(self) -> pd.DataFrame:
        low, high = self.ci
        return pd.DataFrame({
            'kind': 'survival',
            'abscissa': self.t_grid,
            'estimate': self.survival,
            'ci_low': low,
            'ci_high': high,
        })


@dataclass
class SmallDevCurve:
    """P(max_{[0,1]} |g_t| < eps) over eps_grid, all from one shared ensemble"""
    eps_grid: np.ndarray
    inside: np.ndarray
    prob: np.ndarray
    n_paths: int
    dt: float
    seed: int

    @classmethod
    def from_max_norms(cls, max_norms: np.ndarray, eps_grid: np.ndarray, dt: float, seed: int) -> 'SmallDevCurve':
        max_norms = np.asarray(max_norms, dtype=float)
        inside = np.sum(max_norms[:, None] < eps_grid[None, :], axis=0).astype(np.int64)
        return cls(eps_grid=eps_grid, inside=inside, prob=inside / max_norms.size,
                   n_paths=int(max_norms.size), dt=dt, seed=seed)

    @classmethod
    def from_probabilities(cls, eps_grid, prob, n_paths: int, dt: float = 0.0, seed: int = 0) -> 'SmallDevCurve':
        """Curve built from known probabilities, e.g. to check the fit against a closed form"""
        prob = np.asarray(prob, dtype=float)
        return cls(eps_grid=np.asarray(eps_grid, dtype=float), inside=np.rint(prob * n_paths).astype(np.int64),
                   prob=prob, n_paths=int(n_paths), dt=dt, seed=seed)

    @property
    def ci(self) -> Tuple[np.ndarray, np.ndarray]:
        return wilson_interval(self.prob * self.n_paths, self.n_paths)

    @property
    def rate(self) -> np.ndarray:
        """-eps^2 log prob, NaN where prob == 0"""
        with np.errstate(divide='ignore'):
            rate = -self.eps_grid ** 2 * np.log(self.prob)
        return np.where(self.prob > 0, rate, np.nan)

    def to_frame(self) -> pd.DataFrame:
        low, high = self.ci
        return pd.DataFrame({
            'kind': 'small_deviation',
            'abscissa': self.eps_grid,
            'estimate': self.prob,
            'ci_low': low,
            'ci_high': high,
        })


@dataclass
class GapEstimate:
    lambda_hat: float
    std_error: float
    method: str
    window: Tuple[float, float]
    diagnostics: Dict = field(default_factory=dict)

    def interval(self, k_sigma: float = 3.0) -> Tuple[float, float]:
        return self.lambda_hat - k_sigma * self.std_error, self.lambda_hat + k_sigma * self.std_error

    def to_dict(self) -> Dict:
        return {
            'lambda_hat': self.lambda_hat,
            'std_error': self.std_error,
            'method': self.method,
            'window': list(self.window),
            'diagnostics': dict(self.diagnostics),
        }


@dataclass
class WindowPolicy:
    mode: str = 'auto'
    t_lo: Optional[float] = None
    t_hi: Optional[float] = None
    min_r2: float = 0.995
    min_points: int = 8
    start_below: float = 0.6

    @classmethod
    def fixed(cls, t_lo: float, t_hi: float) -> 'WindowPolicy':
        return cls(mode='fixed', t_lo=t_lo, t_hi=t_hi)


@dataclass
class ExtrapolationPolicy:
    model: str = 'linear'
    min_count: int = MIN_COUNT


@dataclass
class SandwichVerdict:
    verdict: str
    direction: Optional[str]
    margin_lower: float
    margin_upper: float
    k_sigma: float
    hint: str = ''

    @property
    def passed(self) -> bool:
        return self.verdict == 'PASS'

    def to_dict(self) -> Dict:
        return {
            'verdict': self.verdict,
            'direction': self.direction,
            'margin_lower': self.margin_lower,
            'margin_upper': self.margin_upper,
            'k_sigma': self.k_sigma,
            'hint': self.hint,
        }


def _check_paths(n_paths: int):
    if n_paths < MIN_PATHS:
        raise InsufficientSamples(f"need at least {MIN_PATHS} paths, got {n_paths}")


def default_time_grid(t_max: float, dt: float, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    stride = max(1, int(round(t_max / (points * dt))))
    count = int(math.floor(t_max / (stride * dt) + 1e-9))
    return stride * dt * np.arange(count + 1)


def euclidean_mean_exit_time(m: int, dt: float = 0.0) -> float:
    """E exit time of Brownian motion on R^m from the unit ball, r^2/m, with r the grid-monitored radius"""
    if m < 1:
        raise DomainError(f"dimension must be a positive integer, got {m}")
    if dt < 0:
        raise DomainError(f"dt must be non-negative, got {dt}")
    radius = 1.0 + MONITORING_SHIFT * math.sqrt(dt)
    return radius ** 2 / m


def survival_curve(S: HTypeStructure, dt: float, n_paths: int, t_max: float, seed: int,
                   t_grid: Optional[np.ndarray] = None, workers: int = 1,
                   stream: int = EXIT_STREAM) -> SurvivalCurve:
    """Exit-time survival from the unit homogeneous ball, monitored at multiples of dt"""
    _check_paths(n_paths)
    if t_max < 1:
        raise DomainError(f"t_max must be at least 1, got {t_max}")
    batch = run_ensemble(S, t_max, dt, seed, n_paths, workers=workers, exit_radius=1.0, stop_on_exit=True,
                         stream=stream)
    grid = default_time_grid(t_max, dt) if t_grid is None else np.asarray(t_grid, dtype=float)
    curve = SurvivalCurve.from_exit_times(batch.exit_time, grid, dt, seed, t_max=batch.horizon)
    logger.info(f"✅ Survival curve on {S.label()}: {n_paths - curve.censored}/{n_paths} exits by t={t_max}")
    return curve


def small_dev_prob(S: HTypeStructure, eps_grid: Sequence[float], dt: float, n_paths: int, seed: int,
                   workers: int = 1, T: float = 1.0, stream: int = SMALL_DEV_STREAM) -> SmallDevCurve:
    _check_paths(n_paths)
    eps = np.sort(np.asarray(eps_grid, dtype=float))
    if eps.size == 0 or np.any(eps <= 0) or not np.all(np.isfinite(eps)):
        raise DomainError(f"eps values must be positive and finite, got {list(eps_grid)}")

    # paths beyond the largest radius can stop early: they are outside every ball already
    batch = run_ensemble(S, T, dt, seed, n_paths, workers=workers, exit_radius=float(eps[-1]), stop_on_exit=True,
                         stream=stream)
    curve = SmallDevCurve.from_max_norms(batch.max_norm, eps, dt, seed)
    if not np.any(curve.inside):
        raise AllPathsExited(f"no path stayed within eps <= {eps[-1]} on [0, {T}]; enlarge the grid")
    logger.info(f"✅ Small-deviation counts on {S.label()}: {curve.inside.tolist()} of {n_paths}")
    return curve


def _weighted_line(x: np.ndarray, y: np.ndarray, sigma: np.ndarray):
    """Weighted least squares y = a x + b; returns (a, b, covariance, weighted R^2)"""
    coeffs, cov = np.polyfit(x, y, 1, w=1.0 / sigma, cov='unscaled')
    w = 1.0 / sigma ** 2
    fitted = np.polyval(coeffs, x)
    mean = np.sum(w * y) / np.sum(w)
    ss_res = np.sum(w * (y - fitted) ** 2)
    ss_tot = np.sum(w * (y - mean) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coeffs[0], coeffs[1], cov, r2


def _select_window(t: np.ndarray, y: np.ndarray, sigma: np.ndarray, policy: WindowPolicy, survival: np.ndarray):
    if policy.mode == 'fixed':
        if policy.t_lo is None or policy.t_hi is None:
            raise DomainError("fixed window policy needs t_lo and t_hi")
        idx = np.flatnonzero((t >= policy.t_lo) & (t <= policy.t_hi))
        if idx.size < 3:
            raise NoStableWindow(f"fixed window [{policy.t_lo}, {policy.t_hi}] holds {idx.size} usable points")
        return idx[0], idx[-1] + 1
    if policy.mode != 'auto':
        raise DomainError(f"unknown window mode '{policy.mode}'")

    starts = np.flatnonzero(survival < policy.start_below)
    if starts.size == 0:
        raise NoStableWindow(f"survival never drops below {policy.start_below}")
    first = starts[0]
    K = t.size
    for size in range(K - first, policy.min_points - 1, -1):
        for lo in range(first, K - size + 1):
            _, _, _, r2 = _weighted_line(t[lo:lo + size], y[lo:lo + size], sigma[lo:lo + size])
            if r2 >= policy.min_r2:
                return lo, lo + size
    raise NoStableWindow(f"no window of >= {policy.min_points} points reaches R^2 >= {policy.min_r2}")


def estimate_gap_exit(curve: SurvivalCurve, window_policy: Optional[WindowPolicy] = None) -> GapEstimate:
    """Weighted fit of log S(t) = -lambda t + const with binomial weights var = (1-S)/(N S)"""
    policy = window_policy or WindowPolicy()
    S = curve.survival
    usable = (curve.alive > MIN_COUNT) & (S < 1.0)
    if np.sum(usable) < MIN_CURVE_POINTS:
        raise NoStableWindow(f"only {int(np.sum(usable))} curve points with {MIN_COUNT} < alive < {curve.n_paths}")

    t, s_use, alive = curve.t_grid[usable], S[usable], curve.alive[usable]
    y = np.log(s_use)
    sigma = np.sqrt((1.0 - s_use) / (curve.n_paths * s_use))
    lo, hi = _select_window(t, y, sigma, policy, s_use)

    slope, _, cov, r2 = _weighted_line(t[lo:hi], y[lo:hi], sigma[lo:hi])
    lambda_hat = -float(slope)
    if not lambda_hat > 0:
        raise NoStableWindow(f"fitted decay rate {lambda_hat} is not positive")
    regression_se = float(math.sqrt(cov[0, 0]))
    exits = int(alive[lo] - alive[hi - 1])
    poisson_se = lambda_hat / math.sqrt(max(exits, 1))

    estimate = GapEstimate(
        lambda_hat=lambda_hat,
        std_error=max(regression_se, poisson_se),
        method='exit_tail',
        window=(float(t[lo]), float(t[hi - 1])),
        diagnostics={
            'r2': float(r2),
            'points': int(hi - lo),
            'n_paths': curve.n_paths,
            'dt': curve.dt,
            'regression_se': regression_se,
            'poisson_se': poisson_se,
            'exits_in_window': exits,
            'window_mode': policy.mode,
        },
    )
    logger.info(f"✅ Exit-tail estimate {lambda_hat:.4f} +/- {estimate.std_error:.4f} "
                f"on t in [{estimate.window[0]:.3f}, {estimate.window[1]:.3f}]")
    return estimate


def _fit_rate(eps: np.ndarray, rate: np.ndarray, sigma: np.ndarray, model: str):
    x = eps if model == 'linear' else eps ** 2
    slope, intercept, cov, r2 = _weighted_line(x, rate, sigma)
    std_error = float(math.sqrt(cov[1, 1]))
    if not std_error > 0:
        std_error = float(np.finfo(float).eps * max(abs(float(intercept)), 1.0))
    return float(slope), float(intercept), std_error, float(r2)


def estimate_gap_smalldev(curve: SmallDevCurve,
                          extrapolation_policy: Optional[ExtrapolationPolicy] = None) -> GapEstimate:
    """
    Fit rate(eps) = lambda + a eps (linear) or lambda + a eps^2 (quadratic) over grid points
    with a defined rate and at least min_count paths inside; lambda_hat is the intercept.

    A survival tail C exp(-lambda t) gives rate(eps) = lambda - eps^2 log C exactly, so the
    quadratic model carries no model error there; the linear intercept drifts upward as the
    grid reaches into large eps. 'auto' keeps whichever fit has the higher weighted R^2.
    Diagnostics always carry the other model's intercept for comparison.
    """
    policy = extrapolation_policy or ExtrapolationPolicy()
    if policy.model not in EXTRAPOLATION_MODELS:
        raise DomainError(f"unknown extrapolation model '{policy.model}'")

    p = curve.prob
    usable = (curve.inside >= policy.min_count) & (p > 0) & (p < 1)
    if np.sum(usable) < 4:
        raise InsufficientDefinedRates(f"need 4 grid points with a defined rate, got {int(np.sum(usable))}")

    eps, p_use = curve.eps_grid[usable], p[usable]
    rate = curve.rate[usable]
    sigma = eps ** 2 * np.sqrt((1.0 - p_use) / (curve.n_paths * p_use))
    fits = {model: _fit_rate(eps, rate, sigma, model) for model in ('linear', 'quadratic')}
    if policy.model == 'auto':
        model = max(fits, key=lambda name: fits[name][3])
    else:
        model = policy.model
    alternative = 'quadratic' if model == 'linear' else 'linear'
    slope, lambda_hat, std_error, r2 = fits[model]

    if eps[-1] > 1.0 and model == 'linear':
        logger.warning(f"⚠️ Linear extrapolation over eps up to {eps[-1]}: the intercept is biased high "
                       f"outside the small-eps regime")
    estimate = GapEstimate(
        lambda_hat=lambda_hat,
        std_error=std_error,
        method='smalldev_extrapolation',
        window=(float(eps[0]), float(eps[-1])),
        diagnostics={
            'model': model,
            'requested_model': policy.model,
            'slope': slope,
            'r2': r2,
            'alternative_model': alternative,
            'alternative_lambda': fits[alternative][1],
            'alternative_r2': fits[alternative][3],
            'points': int(eps.size),
            'n_paths': curve.n_paths,
            'dt': curve.dt,
        },
    )
    logger.info(f"✅ Small-deviation estimate {lambda_hat:.4f} +/- {std_error:.4f} ({model} correction; "
                f"{alternative} gives {fits[alternative][1]:.4f})")
    return estimate


def sandwich_check(est: GapEstimate, bounds: GapBoundResult, k_sigma: float = 3.0) -> SandwichVerdict:
    """PASS iff [lambda_hat - k se, lambda_hat + k se] meets [lower, upper], ends inclusive"""
    lo, hi = est.interval(k_sigma)
    margin_lower = hi - bounds.lower
    margin_upper = bounds.upper - lo
    if margin_lower < 0:
        verdict = SandwichVerdict('FAIL', 'below-lower', margin_lower, margin_upper, k_sigma,
                                  hint='estimate below the lower bound; check discretization bias (reduce dt)')
    elif margin_upper < 0:
        verdict = SandwichVerdict('FAIL', 'above-upper', margin_lower, margin_upper, k_sigma,
                                  hint='estimate above the upper bound; likely an implementation bug')
    else:
        verdict = SandwichVerdict('PASS', None, margin_lower, margin_upper, k_sigma)

    if verdict.passed:
        logger.info(f"✅ Sandwich PASS: {est.lambda_hat:.4f} within [{bounds.lower:.4f}, {bounds.upper:.4f}]")
    else:
        logger.warning(f"❌ Sandwich FAIL ({verdict.direction}): {est.lambda_hat:.4f} "
                       f"vs [{bounds.lower:.4f}, {bounds.upper:.4f}]")
    return verdict


@dataclass
class DominationReport:
    eps_grid: np.ndarray
    inside_group: np.ndarray
    inside_horizontal: np.ndarray
    violations: int

    @property
    def holds(self) -> bool:
        return self.violations == 0


def horizontal_domination(S: HTypeStructure, eps_grid: Sequence[float], dt: float, n_paths: int, seed: int,
                          workers: int = 1, T: float = 1.0, stream: int = SMALL_DEV_STREAM) -> DominationReport:
    """Pathwise: max |g| < eps forces max |B| < eps, since |g| >= |B| at every time"""
    eps = np.sort(np.asarray(eps_grid, dtype=float))
    batch = run_ensemble(S, T, dt, seed, n_paths, workers=workers, stream=stream)
    in_g = batch.max_norm[:, None] < eps[None, :]
    in_b = batch.max_horizontal[:, None] < eps[None, :]
    report = DominationReport(
        eps_grid=eps,
        inside_group=np.sum(in_g, axis=0),
        inside_horizontal=np.sum(in_b, axis=0),
        violations=int(np.sum(in_g & ~in_b)),
    )
    if not report.holds:
        logger.warning(f"❌ {report.violations} path/eps pairs break horizontal domination")
    return report


def scaling_identity_check(small_dev: SmallDevCurve, survival: SurvivalCurve,
                           eps_values: Sequence[float]) -> pd.DataFrame:
    """P(max_{[0,1]} |g| < eps) against P(exit time > eps^-2); agreement = overlapping Wilson intervals"""
    low, high = small_dev.ci
    rows = []
    for e in eps_values:
        hits = np.flatnonzero(np.isclose(small_dev.eps_grid, e, rtol=0, atol=1e-12))
        if hits.size == 0:
            raise DomainError(f"eps={e} is not on the small-deviation grid")
        k = hits[0]
        s, s_lo, s_hi = survival.survival_at(e ** -2)
        rows.append({
            'eps': float(e),
            't': float(e ** -2),
            'prob_small_dev': float(small_dev.prob[k]),
            'prob_low': float(low[k]),
            'prob_high': float(high[k]),
            'survival': s,
            'survival_low': s_lo,
            'survival_high': s_hi,
            'agree': bool(low[k] <= s_hi and s_lo <= high[k]),
        })
    return pd.DataFrame(rows)


@dataclass
class DtLadder:
    frame: pd.DataFrame
    extrapolated: float

    def to_dict(self) -> Dict:
        return {'rows': self.frame.to_dict(orient='records'), 'extrapolated': self.extrapolated}


def dt_ladder(S: HTypeStructure, dts: Sequence[float], n_paths: int, t_max: float, seed: int,
              window_policy: Optional[WindowPolicy] = None, workers: int = 1) -> DtLadder:
    """Exit estimates over step sizes, extrapolated linearly in sqrt(dt) to dt -> 0"""
    if len(dts) < 2:
        raise DomainError("a dt ladder needs at least two step sizes")
    rows = []
    for dt in sorted(dts, reverse=True):
        est = estimate_gap_exit(survival_curve(S, dt, n_paths, t_max, seed, workers=workers), window_policy)
        rows.append({'dt': dt, 'lambda_hat': est.lambda_hat, 'std_error': est.std_error})
    frame = pd.DataFrame(rows)
    slope, intercept = np.polyfit(np.sqrt(frame['dt']), frame['lambda_hat'], 1)
    logger.info(f"📊 dt ladder on {S.label()}: extrapolated {intercept:.4f} (sqrt(dt) slope {slope:.3f})")
    return DtLadder(frame=frame, extrapolated=float(intercept))
