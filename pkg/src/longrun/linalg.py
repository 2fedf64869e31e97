"""Stability checks and Lyapunov solvers for small dense systems.

Everything here operates on the factor feedback matrix of a linear factor
model, which must be a stability (Hurwitz) matrix: every eigenvalue has a
strictly negative real part.  The solvers are wrappers around dense LAPACK
routines sized for the n <= 8 systems this package works with; they enforce
the residual contract of the callers rather than chasing large-scale
performance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "DimensionError",
    "NumericError",
    "StabilityError",
    "StabilityReport",
    "check_stability",
    "solve_lyapunov",
    "solve_lyapunov_const",
    "psd_sqrt",
]

# Eigenvalue real parts this close to the imaginary axis are treated as
# unstable: the Lyapunov solves degrade as 1/|margin| and downstream limits
# stop being meaningful.
STABILITY_MARGIN = 1e-12

# Relative residual allowed for a Lyapunov solve, scaled by the problem data.
LYAPUNOV_RTOL = 1e-10


class DimensionError(ValueError):
    """An array argument has the wrong shape."""


class NumericError(ArithmeticError):
    """A dense solve failed or left a residual above contract."""


class StabilityError(ValueError):
    """A matrix required to be Hurwitz-stable is not."""


@dataclass(frozen=True)
class StabilityReport:
    """Result of a stability check.

    Attributes
    ----------
    eigenvalue_real_parts : ndarray
        Real parts of the eigenvalues, sorted descending.
    margin : float
        Largest real part.  Negative for a stable matrix.
    is_stable : bool
        True when ``margin`` clears the stability cutoff
        (``margin < -STABILITY_MARGIN``).
    """

    eigenvalue_real_parts: np.ndarray
    margin: float
    is_stable: bool


def _as_square(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericError(f"{name} contains non-finite entries")
    return M


def check_stability(B) -> StabilityReport:
    """Report whether ``B`` is a stability (Hurwitz) matrix.

    Parameters
    ----------
    B : array_like, shape (n, n)

    Returns
    -------
    StabilityReport

    Raises
    ------
    DimensionError
        If ``B`` is not square.
    NumericError
        If the eigensolver does not converge.
    """
    B = _as_square(B, "B")
    try:
        eigs = np.linalg.eigvals(B)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - QR rarely fails
        raise NumericError(f"eigensolver failed: {exc}") from exc
    real_parts = np.sort(eigs.real)[::-1]
    margin = float(real_parts[0])
    return StabilityReport(
        eigenvalue_real_parts=real_parts,
        margin=margin,
        is_stable=margin < -STABILITY_MARGIN,
    )


def require_stable(B) -> np.ndarray:
    """Return ``B`` as a float array, raising StabilityError if not Hurwitz."""
    B = _as_square(B, "B")
    report = check_stability(B)
    if not report.is_stable:
        raise StabilityError(
            f"matrix is not stable: max eigenvalue real part {report.margin:.3e}"
        )
    return B


def solve_lyapunov(B, Q, rtol: float = LYAPUNOV_RTOL) -> np.ndarray:
    """Solve ``B S + S B' = Q`` for S, with B Hurwitz-stable.

    Uses the dense Bartels-Stewart routine from scipy.  The residual is
    checked against ``rtol * (||B||_F ||S||_F + ||Q||_F)`` and a symmetric
    ``Q`` yields an exactly symmetric ``S`` (the solution is symmetrized,
    which is a no-op in exact arithmetic).

    Raises
    ------
    DimensionError
        B not square or Q shaped differently from B.
    StabilityError
        B not stable (the equation would be singular or meaningless).
    NumericError
        Solve failed or residual above contract.
    """
    B = require_stable(B)
    Q = np.asarray(Q, dtype=float)
    if Q.shape != B.shape:
        raise DimensionError(
            f"Q must have the same shape as B {B.shape}, got {Q.shape}"
        )
    if not np.all(np.isfinite(Q)):
        raise NumericError("Q contains non-finite entries")

    if B.shape == (1, 1):
        # scalar equation 2 B s = q; B is nonzero past the stability gate
        S = Q / (2.0 * B[0, 0])
    else:
        try:
            S = scipy.linalg.solve_continuous_lyapunov(B, Q)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise NumericError(f"Lyapunov solve failed: {exc}") from exc

    scale = np.linalg.norm(B) * np.linalg.norm(S) + np.linalg.norm(Q)
    residual = np.linalg.norm(B @ S + S @ B.T - Q)
    if not np.isfinite(residual) or residual > rtol * max(scale, 1e-300):
        raise NumericError(
            f"Lyapunov residual {residual:.3e} exceeds {rtol:.1e} * {scale:.3e}"
        )

    qnorm = np.linalg.norm(Q)
    if np.linalg.norm(Q - Q.T) <= 1e-12 * max(qnorm, 1.0):
        S = 0.5 * (S + S.T)
    return S


def solve_lyapunov_const(B, C, rtol: float = LYAPUNOV_RTOL) -> np.ndarray:
    """Solve ``B X + X B' + C = 0`` for X, with B Hurwitz-stable.

    For C = L L' this is the stationary covariance of the linear SDE
    dX = B X dt + L dW, which is symmetric positive semidefinite.
    """
    C = np.asarray(C, dtype=float)
    return solve_lyapunov(B, -C, rtol=rtol)


def psd_sqrt(M, rtol: float = 1e-10) -> np.ndarray:
    """Symmetric square root of a positive semidefinite matrix.

    Eigenvalues inside -rtol * max(eig, 1) of zero are clipped to zero;
    anything more negative raises :class:`NumericError`, since it means the
    input was not a covariance to numerical precision.
    """
    M = np.asarray(M, dtype=float)
    if M.shape == (1, 1):
        v = float(M[0, 0])
        if v < -rtol:
            raise NumericError(f"matrix is not positive semidefinite (eigenvalue {v:.3e})")
        return np.array([[math.sqrt(max(v, 0.0))]])
    sym = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(sym)
    floor = -rtol * max(float(w[-1]), 1.0)
    if w[0] < floor:
        raise NumericError(f"matrix is not positive semidefinite (eigenvalue {w[0]:.3e})")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
