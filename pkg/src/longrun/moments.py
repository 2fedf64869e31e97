"""Long-run joint moments of log wealth and the factors.

For a :class:`~longrun.model.FactorModel` and a linear
:class:`~longrun.model.Strategy`, the log wealth u(t) and the factor vector
x(t) satisfy, as t grows:

    E[u(t)]        ~  growth_rate * t
    Var[u(t)]      ~  variance_rate * t + O(1)
    E[u(t) x(t)]   ->  wealth_factor_cov
    E[u(t) x x']   ~  second_moment_slope * t + second_moment_offset

with every coefficient in closed form in terms of the stationary factor
covariance.  Two independent code paths compute them:

* :func:`moments`: the matrix engine, valid for any (m, n).  It uses dense
  linear solves and two Lyapunov equations.
* :func:`scalar_moments`: explicit scalar algebra for the one-asset,
  one-factor case with the diffusion convention Sigma = (sig, eta),
  Lambda = (0, lam).  It shares no linear-algebra code with the matrix
  engine, so agreement between the two is a real consistency check.

The two routes must agree to near machine precision; the test suite enforces
this on a grid and validates both against the Monte Carlo oracle in
:mod:`longrun.mc`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import solve_lyapunov, solve_lyapunov_const
from .model import FactorModel, Strategy

__all__ = [
    "AsymptoticMoments",
    "stationary_covariance",
    "growth_rate",
    "covariance_limit",
    "variance_rate",
    "moments",
    "scalar_moments",
]


@dataclass(frozen=True)
class AsymptoticMoments:
    """Closed-form long-run moments for one (model, strategy) pair.

    Attributes
    ----------
    growth_rate : float
        lim E[u(t)] / t, the expected log growth per unit time.
    variance_rate : float
        lim Var[u(t)] / t.  Nonnegative.
    wealth_factor_cov : ndarray, shape (n,)
        lim E[u(t) x(t)], the long-run covariance of log wealth with each
        factor (the factors are zero-mean).
    factor_cov : ndarray, shape (n, n)
        Stationary covariance of the factors.  Strategy-independent.
    shock_loading : ndarray, shape (m+n,)
        Long-run loading of log wealth on the Brownian shocks; its squared
        norm is the base term of ``variance_rate``.
    second_moment_offset : ndarray, shape (n, n)
        Constant term S in E[u(t) x x'] ~ R t + S.  Symmetric.
    second_moment_slope : ndarray, shape (n, n)
        Slope R = growth_rate * factor_cov, constructed (not solved).
    """

    growth_rate: float
    variance_rate: float
    wealth_factor_cov: np.ndarray
    factor_cov: np.ndarray
    shock_loading: np.ndarray
    second_moment_offset: np.ndarray
    second_moment_slope: np.ndarray


def stationary_covariance(model: FactorModel) -> np.ndarray:
    """Stationary covariance of the factor process (symmetric PSD)."""
    return solve_lyapunov_const(model.B, model.Lambda @ model.Lambda.T)


def growth_rate(model: FactorModel, strategy: Strategy, factor_cov=None) -> float:
    """Expected log growth of wealth per unit time.

    Equals h'a - h'SS'h/2 plus the trace correction from the factor tilt,
    where SS' is the return diffusion covariance.
    """
    dlt = stationary_covariance(model) if factor_cov is None else factor_cov
    h, H = strategy.h, strategy.H
    SS = model.Sigma @ model.Sigma.T
    tilt = H.T @ model.A - 0.5 * (H.T @ SS @ H)
    return float(h @ model.a - 0.5 * (h @ SS @ h) + np.trace(dlt @ tilt))


def covariance_limit(model: FactorModel, strategy: Strategy, factor_cov=None) -> np.ndarray:
    """Long-run covariance of log wealth with the factors, shape (n,).

    Solves the linear system B p = rhs by LU factorization (B is stable,
    hence invertible); no explicit inverse is formed.
    """
    dlt = stationary_covariance(model) if factor_cov is None else factor_cov
    h, H = strategy.h, strategy.H
    Sg, Lm = model.Sigma, model.Lambda
    SS = Sg @ Sg.T
    rhs = dlt @ (H.T @ (SS @ h) - model.A.T @ h - H.T @ model.a) - Lm @ (Sg.T @ h)
    return np.linalg.solve(model.B, rhs)


def variance_rate(model: FactorModel, strategy: Strategy, factor_cov=None):
    """Variance of log wealth per unit time, with its ingredients.

    Returns ``(rate, shock_loading, second_moment_offset)``.  The offset
    solves a Lyapunov equation whose right-hand side is symmetrized before
    the solve; for n = 1 the symmetrization is a no-op, and for n > 1 it is
    what makes the offset the genuine (symmetric) constant term of
    E[u x x']; the Monte Carlo oracle pins this down.
    """
    dlt = stationary_covariance(model) if factor_cov is None else factor_cov
    h, H = strategy.h, strategy.H
    a, A, B, Sg, Lm = model.a, model.A, model.B, model.Sigma, model.Lambda
    SS = Sg @ Sg.T

    # long-run shock loading of u: direct diffusion plus the factor feedback
    row = (SS @ h) @ H - h @ A - a @ H              # (n,)
    Y = np.linalg.solve(B.T, row) @ Lm + h @ Sg     # (m+n,)

    HtA = H.T @ A                                    # (n, n)
    HtSSH = H.T @ SS @ H                             # (n, n)
    Q = -2.0 * (dlt @ HtA @ dlt) + dlt @ HtSSH @ dlt - 2.0 * (Lm @ Sg.T) @ H @ dlt
    S = solve_lyapunov(B, 0.5 * (Q + Q.T))

    rate = float(Y @ Y + np.trace(2.0 * (S @ HtA) + (dlt - S) @ HtSSH))
    return rate, Y, S


def moments(model: FactorModel, strategy: Strategy) -> AsymptoticMoments:
    """All long-run moments via the matrix engine (any m, n)."""
    dlt = stationary_covariance(model)
    rate, Y, S = variance_rate(model, strategy, factor_cov=dlt)
    K = growth_rate(model, strategy, factor_cov=dlt)
    return AsymptoticMoments(
        growth_rate=K,
        variance_rate=rate,
        wealth_factor_cov=covariance_limit(model, strategy, factor_cov=dlt),
        factor_cov=dlt,
        shock_loading=Y,
        second_moment_offset=S,
        second_moment_slope=K * dlt,
    )


def scalar_moments(model: FactorModel, strategy: Strategy) -> AsymptoticMoments:
    """Long-run moments for the one-asset, one-factor case, in closed form.

    Requires m = n = 1 and the diffusion convention Sigma = (sig, eta),
    Lambda = (0, lam) with lam >= 0: the first Brownian coordinate drives the
    asset only, the second drives the factor and leaks into the asset through
    eta.  Everything below is plain float arithmetic, an independent route
    to the same quantities as :func:`moments`.
    """
    if model.m != 1 or model.n != 1:
        raise ValueError(f"scalar route requires m = n = 1, got m={model.m}, n={model.n}")
    if model.Lambda[0, 0] != 0.0 or model.Lambda[0, 1] < 0.0:
        raise ValueError("scalar route requires the convention Lambda = (0, lam), lam >= 0")
    a = float(model.a[0])
    A = float(model.A[0, 0])
    B = float(model.B[0, 0])
    sig, eta = float(model.Sigma[0, 0]), float(model.Sigma[0, 1])
    lam = float(model.Lambda[0, 1])
    h = float(strategy.h[0])
    H = float(strategy.H[0, 0])

    ss = sig * sig + eta * eta          # return diffusion variance
    dlt = lam * lam / (-2.0 * B)        # stationary factor variance (B < 0)
    q = lam * lam / (2.0 * B)           # = -dlt; keeps the lines below short

    K = h * a - q * H * A - 0.5 * ss * (h * h - q * H * H)
    P = -(lam * lam / (2.0 * B * B)) * (h * H * ss - A * h - H * a) - (lam * eta / B) * h
    y1 = h * sig
    y2 = (h * H * ss - h * A - a * H) * (lam / B) + h * eta
    S = (lam * lam / (4.0 * B * B)) * (-2.0 * H * A * q + q * H * H * ss + 2.0 * H * lam * eta)
    rate = y1 * y1 + y2 * y2 + 2.0 * S * H * A + (dlt - S) * H * H * ss

    return AsymptoticMoments(
        growth_rate=K,
        variance_rate=rate,
        wealth_factor_cov=np.array([P]),
        factor_cov=np.array([[dlt]]),
        shock_loading=np.array([y1, y2]),
        second_moment_offset=np.array([[S]]),
        second_moment_slope=np.array([[K * dlt]]),
    )
