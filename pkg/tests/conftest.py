import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cascade_tuner.cascade import CascadeSpec, ModelProfile
from cascade_tuner.density import BetaMixture, MarkovJointModel, PairCopula

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def spec2():
    return CascadeSpec((ModelProfile("small", 1.0, 1), ModelProfile("large", 10.0, 2)))


@pytest.fixture(scope="session")
def spec3():
    return CascadeSpec(
        (
            ModelProfile("small", 1.0, 1),
            ModelProfile("mid", 10.0, 2),
            ModelProfile("large", 50.0, 3),
        )
    )


@pytest.fixture(scope="session")
def model2():
    """Bimodal small-model marginal, strong copula: the standard test model."""
    return MarkovJointModel(
        (
            BetaMixture((0.6, 0.4), (2.0, 8.0), (5.0, 2.0)),
            BetaMixture((1.0,), (5.0,), (1.6,)),
        ),
        (PairCopula(0.8),),
    )


@pytest.fixture(scope="session")
def model3():
    return MarkovJointModel(
        (
            BetaMixture((0.6, 0.4), (2.0, 8.0), (5.0, 2.0)),
            BetaMixture((1.0,), (5.0,), (1.6,)),
            BetaMixture((0.5, 0.5), (6.0, 3.0), (1.5, 4.0)),
        ),
        (PairCopula(0.8), PairCopula(0.5)),
    )


def random_mixture(rng: np.random.Generator, m: int | None = None) -> BetaMixture:
    m = m or int(rng.integers(1, 3))
    w = rng.dirichlet(np.ones(m) * 4.0)
    alphas = rng.uniform(0.8, 8.0, m)
    betas = rng.uniform(0.8, 8.0, m)
    return BetaMixture(tuple(w / w.sum()), tuple(alphas), tuple(betas))


def random_model(rng: np.random.Generator, k: int) -> MarkovJointModel:
    marginals = tuple(random_mixture(rng) for _ in range(k))
    copulas = tuple(PairCopula(float(rng.uniform(-0.85, 0.85))) for _ in range(k - 1))
    return MarkovJointModel(marginals, copulas)
