"""Risk- and factor-sensitive performance criterion and its optimizer.

The objective over linear strategies (h, H) is

    W = growth_rate - (theta/4) * variance_rate + gamma . wealth_factor_cov,

a quartic, generally nonconvex function of the strategy coefficients (the
shock loading contains the bilinear h'SS'H term), so the optimizer runs a
coarse global grid scan followed by Nelder-Mead refinement from the best
grid cells.  The theta coefficient is exactly theta/4.

Everything here is deterministic: the sampling plan for high-dimensional
scans is seeded from the config, restart results are merged by index, and
ties are broken by smallest strategy norm, then lexicographically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .model import CriterionParams, FactorModel, Strategy
from .moments import covariance_limit, growth_rate, stationary_covariance, variance_rate

__all__ = [
    "OptimizerConfig",
    "OptimizationResult",
    "SweepResult",
    "UnboundedCriterionError",
    "evaluate",
    "optimize",
    "sweep_theta",
    "sweep_gamma",
]

# Full-mesh grids above this dimension would explode combinatorially; switch
# to a seeded Latin hypercube of the same total budget.
_FULL_GRID_MAX_DIM = 2
_SCAN_BUDGET = 4096
_STATIONARITY_STEP = 1e-5
_STATIONARITY_NORM = 1e-6


class UnboundedCriterionError(RuntimeError):
    """The criterion increases without bound along some strategy direction."""

    def __init__(self, message: str, direction: np.ndarray):
        super().__init__(message)
        self.direction = direction


@dataclass(frozen=True)
class OptimizerConfig:
    """Grid-scan and refinement settings.

    ``grid_bounds`` applies to every strategy coordinate.  ``local_restarts``
    is how many distinct grid cells seed a Nelder-Mead run.  ``seed`` only
    matters above 4 dimensions, where the scan is a Latin hypercube.
    """

    grid_bounds: tuple = (-3.0, 3.0)
    grid_points: int = 61
    local_restarts: int = 5
    simplex_tolerance: float = 1e-10
    max_iterations: int = 2000
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.grid_bounds
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"grid_bounds must be a finite interval, got {self.grid_bounds}")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        if self.local_restarts < 1:
            raise ValueError("local_restarts must be at least 1")
        if not self.simplex_tolerance > 0:
            raise ValueError("simplex_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of one optimize() call.

    ``stationary`` reports the central finite-difference gradient test; a
    False value flags the point rather than raising.  ``restarts`` holds the
    (point, value) pair of every local refinement, merged by start index.
    """

    strategy: Strategy
    value: float
    stationary: bool
    gradient_norm: float
    restarts: tuple
    evaluations: int
    message: str


@dataclass(frozen=True)
class SweepResult:
    """Optima along a parameter path.

    ``failed`` marks points where the optimizer raised (e.g. unbounded
    direction); their strategy entries are NaN and the sweep continued.
    """

    parameter_values: np.ndarray
    h_star: np.ndarray
    H_star: np.ndarray
    values: np.ndarray
    stationary: np.ndarray
    failed: np.ndarray
    messages: tuple
    results: tuple

    def ratio(self) -> np.ndarray:
        """Signed H*/h* per point, for the one-asset, one-factor case."""
        if self.H_star.shape[1:] != (1, 1):
            raise ValueError("ratio is defined for m = n = 1 only")
        h = self.h_star[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(h != 0.0, self.H_star[:, 0, 0] / h, np.nan)


def evaluate(model: FactorModel, strategy: Strategy, params: CriterionParams,
             factor_cov=None) -> float:
    """Criterion value W for one strategy.

    ``factor_cov`` may carry a precomputed stationary factor covariance to
    amortize the Lyapunov solve across many evaluations.
    """
    dlt = stationary_covariance(model) if factor_cov is None else factor_cov
    rate, _, _ = variance_rate(model, strategy, factor_cov=dlt)
    w = growth_rate(model, strategy, factor_cov=dlt) - 0.25 * params.theta * rate
    if np.any(params.gamma != 0.0):
        w += float(params.gamma @ covariance_limit(model, strategy, factor_cov=dlt))
    return w


def _split(x: np.ndarray, m: int, n: int) -> Strategy:
    return Strategy(h=x[:m].copy(), H=x[m:].reshape(m, n).copy())


def _objective(model, params, dlt, m, n, counter):
    def f(x):
        counter[0] += 1
        return evaluate(model, _split(np.asarray(x, dtype=float), m, n), params, factor_cov=dlt)
    return f


def _scan_points(config: OptimizerConfig, dim: int) -> np.ndarray:
    """Deterministic global scan: full mesh when affordable, LHS otherwise."""
    lo, hi = config.grid_bounds
    if dim <= _FULL_GRID_MAX_DIM:
        per = config.grid_points
    elif dim <= 4:
        per = max(2, int(round(_SCAN_BUDGET ** (1.0 / dim))))
    else:
        rng = np.random.Generator(np.random.Philox(key=np.array([config.seed, 0x5CA1], dtype=np.uint64)))
        u = (rng.permuted(np.tile(np.arange(_SCAN_BUDGET, dtype=float)[:, None], (1, dim)), axis=0)
             + rng.random((_SCAN_BUDGET, dim))) / _SCAN_BUDGET
        return lo + (hi - lo) * u
    axes = [np.linspace(lo, hi, per)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def _probe_unbounded(f, x_best: float | np.ndarray, w_best: float, config: OptimizerConfig):
    """Boundary escape test: march outward doubling the step.

    If the best scanned value sits on the box boundary and the criterion
    keeps improving monotonically for six doublings of the excursion, treat
    the direction as an unbounded ray.
    """
    x_best = np.asarray(x_best, dtype=float)
    lo, hi = config.grid_bounds
    span = hi - lo
    tol = 0.51 * span / max(config.grid_points - 1, 1)
    on_edge = (np.abs(x_best - lo) < tol) | (np.abs(x_best - hi) < tol)
    if not on_edge.any():
        return
    directions = []
    outward = np.where(np.abs(x_best - hi) < tol, 1.0, 0.0) - np.where(np.abs(x_best - lo) < tol, 1.0, 0.0)
    directions.append(outward / np.linalg.norm(outward))
    norm = np.linalg.norm(x_best)
    if norm > tol:
        directions.append(x_best / norm)
    for e in directions:
        w_prev = w_best
        rising = True
        for k in range(6):
            w_k = f(x_best + e * span * (2.0 ** k))
            if not (w_k > w_prev):
                rising = False
                break
            w_prev = w_k
        if rising and w_prev > w_best + 1e-6 * (1.0 + abs(w_best)):
            raise UnboundedCriterionError(
                "criterion improves without bound along direction "
                f"{np.array2string(e, precision=4)}; no finite optimum to report",
                direction=e,
            )


def _fd_gradient(f, x: np.ndarray, fx: float) -> float:
    grad = np.empty_like(x)
    for i in range(x.size):
        step = _STATIONARITY_STEP * (1.0 + abs(x[i]))
        xp = x.copy(); xp[i] += step
        xm = x.copy(); xm[i] -= step
        grad[i] = (f(xp) - f(xm)) / (2.0 * step)
    return float(np.linalg.norm(grad))


def optimize(model: FactorModel, params: CriterionParams,
             config: OptimizerConfig | None = None,
             warm_starts=()) -> OptimizationResult:
    """Maximize the criterion over (h, H).

    Grid scan, then Nelder-Mead from the best ``local_restarts`` distinct
    cells (plus any warm starts), then one more refinement pass from the
    incumbent.  Raises :class:`UnboundedCriterionError` when the best scan
    value sits on the box edge and keeps improving outward.  Ties within the
    simplex tolerance go to the smallest-norm point, then lexicographic.
    """
    if config is None:
        config = OptimizerConfig()
    m, n = model.m, model.n
    dim = m + m * n
    if params.theta == 0.0 and not np.any(params.gamma != 0.0):
        warnings.warn(
            "theta = 0 and gamma = 0: the criterion reduces to the growth "
            "rate alone; the optimum ignores risk entirely",
            stacklevel=2,
        )
    dlt = stationary_covariance(model)
    counter = [0]
    f = _objective(model, params, dlt, m, n, counter)

    points = _scan_points(config, dim)
    values = np.array([f(p) for p in points])
    if not np.all(np.isfinite(values)):
        keep = np.isfinite(values)
        points, values = points[keep], values[keep]
        if values.size == 0:
            raise UnboundedCriterionError(
                "criterion non-finite across the whole scan box", direction=np.zeros(dim)
            )
    order = np.argsort(-values, kind="stable")
    _probe_unbounded(f, points[order[0]], float(values[order[0]]), config)

    lo, hi = config.grid_bounds
    spacing = (hi - lo) / max(config.grid_points - 1, 1)
    starts = [np.asarray(w, dtype=float).ravel() for w in warm_starts]
    for idx in order:
        cand = points[idx]
        if all(np.linalg.norm(cand - s) > 0.5 * spacing for s in starts):
            starts.append(cand)
        if len(starts) >= config.local_restarts + len(warm_starts):
            break

    def refine(x0):
        res = scipy.optimize.minimize(
            lambda x: -f(x), x0, method="Nelder-Mead",
            options={
                "xatol": 1e-8, "fatol": config.simplex_tolerance,
                "maxiter": config.max_iterations, "maxfev": 4 * config.max_iterations,
            },
        )
        return np.asarray(res.x, dtype=float), float(-res.fun)

    trials = [refine(s) for s in starts]
    incumbent = max(range(len(trials)), key=lambda i: trials[i][1])
    trials.append(refine(trials[incumbent][0]))

    best_w = max(w for _, w in trials)
    tol = config.simplex_tolerance * (1.0 + abs(best_w))
    tied = [(x, w) for x, w in trials if w >= best_w - tol]
    tied.sort(key=lambda t: (np.linalg.norm(t[0]), tuple(t[0])))
    x_star, w_star = tied[0]

    grid_gap = float(values.max() - w_star)
    _probe_unbounded(f, x_star, w_star, config)

    g_norm = _fd_gradient(f, x_star, w_star)
    stationary = g_norm <= _STATIONARITY_NORM * (1.0 + abs(w_star))
    message = "converged" if stationary else (
        f"gradient norm {g_norm:.3e} exceeds the stationarity tolerance"
    )
    if grid_gap > tol:
        message += "; a scan point beat the refined optimum"
    return OptimizationResult(
        strategy=_split(x_star, m, n),
        value=w_star,
        stationary=stationary,
        gradient_norm=g_norm,
        restarts=tuple((x, w) for x, w in trials),
        evaluations=counter[0],
        message=message,
    )


def _sweep(model, param_list, make_params, config):
    m, n = model.m, model.n
    h_star = np.full((len(param_list), m), np.nan)
    H_star = np.full((len(param_list), m, n), np.nan)
    values = np.full(len(param_list), np.nan)
    stationary = np.zeros(len(param_list), dtype=bool)
    failed = np.zeros(len(param_list), dtype=bool)
    messages, results = [], []
    warm = []
    for i, p in enumerate(param_list):
        try:
            res = optimize(model, make_params(p), config, warm_starts=warm)
        except UnboundedCriterionError as err:
            failed[i] = True
            messages.append(str(err))
            results.append(None)
            continue
        h_star[i] = res.strategy.h
        H_star[i] = res.strategy.H
        values[i] = res.value
        stationary[i] = res.stationary
        messages.append(res.message)
        results.append(res)
        warm = [np.concatenate([res.strategy.h, res.strategy.H.ravel()])]
    return h_star, H_star, values, stationary, failed, tuple(messages), tuple(results)


def sweep_theta(model: FactorModel, theta_values, gamma=None,
                config: OptimizerConfig | None = None) -> SweepResult:
    """Optimize along an ascending list of risk sensitivities.

    Each point warm-starts from the previous optimum on top of its own grid
    scan.  ``gamma`` is a fixed factor-sensitivity vector (default zero).
    Failed points are flagged and skipped, not fatal.
    """
    thetas = [float(t) for t in theta_values]
    if len(thetas) == 0:
        raise ValueError("theta_values is empty")
    g = np.zeros(model.n) if gamma is None else np.asarray(gamma, dtype=float)
    out = _sweep(model, thetas, lambda t: CriterionParams(theta=t, gamma=g), config)
    return SweepResult(np.array(thetas), *out)


def sweep_gamma(model: FactorModel, theta: float, gamma_values,
                config: OptimizerConfig | None = None, direction=None) -> SweepResult:
    """Optimize along a list of factor-sensitivity magnitudes at fixed theta.

    Each scalar in ``gamma_values`` scales ``direction`` (default: the first
    coordinate axis, which for one factor is just the scalar itself).
    """
    gammas = [float(g) for g in gamma_values]
    if len(gammas) == 0:
        raise ValueError("gamma_values is empty")
    if direction is None:
        e = np.zeros(model.n)
        e[0] = 1.0
    else:
        e = np.asarray(direction, dtype=float)
        if e.shape != (model.n,):
            raise ValueError(f"direction must have shape ({model.n},), got {e.shape}")
    out = _sweep(model, gammas, lambda g: CriterionParams(theta=float(theta), gamma=g * e), config)
    return SweepResult(np.array(gammas), *out)
