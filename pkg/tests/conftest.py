import numpy as np
import pytest

from longrun import FactorModel, Strategy, reference_model


@pytest.fixture
def model() -> FactorModel:
    return reference_model()


@pytest.fixture
def hold_only(model) -> Strategy:
    """All funds in the single asset, no factor tilt."""
    return Strategy(h=np.ones(model.m), H=np.zeros((model.m, model.n)))


def scalar_strategy(h: float, H: float) -> Strategy:
    return Strategy(h=np.array([h]), H=np.array([[H]]))


def random_stable_model(rng: np.random.Generator, m: int, n: int) -> FactorModel:
    """Random model with a comfortably Hurwitz factor matrix.

    The feedback matrix is shifted so its largest eigenvalue real part sits
    between -0.05 and -0.55; diffusion rows are generic, which makes the
    asset noise covariance almost surely positive definite.
    """
    raw = rng.normal(scale=0.6, size=(n, n))
    shift = float(np.max(np.linalg.eigvals(raw).real)) + rng.uniform(0.05, 0.55)
    B = raw - shift * np.eye(n)
    return FactorModel(
        a=rng.normal(scale=0.05, size=m),
        A=rng.normal(scale=0.05, size=(m, n)),
        B=B,
        Sigma=rng.normal(scale=0.2, size=(m, m + n)) + np.hstack([np.eye(m) * 0.3, np.zeros((m, n))]),
        Lambda=rng.normal(scale=0.4, size=(n, m + n)),
    )
