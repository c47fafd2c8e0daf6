import pytest

from mlsync.config import bundled_scenario
from mlsync.model import NeuronParams


@pytest.fixture(scope="session")
def ml_params():
    return NeuronParams(C=20, g_L=2, g_Ca=4, g_K=8, V_L=-50, V_Ca=100, V_K=-70, I=50,
                        v1_tilde=-1, v2_tilde=15, v3_tilde=10, v4_tilde=14.5, lam=0.1)


@pytest.fixture(scope="session")
def set10():
    return bundled_scenario("paper-set-10")


@pytest.fixture(scope="session")
def set11():
    return bundled_scenario("paper-set-11")


@pytest.fixture(scope="session")
def set11_run(set11):
    from mlsync.harness import run_coupled
    return run_coupled(set11)
