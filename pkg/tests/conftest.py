import numpy as np
import pytest

from activeirs.channels import Scenario, generate_channels


def random_tiny_scenario(rng, k_choices=(2, 3), n_choices=(2, 4), p_r_choices=(1e-4, 1e-3, 1e-2)):
    """Randomized small deployment with reference-like geometry."""
    K = int(rng.choice(k_choices))
    N = int(rng.choice(n_choices))
    return Scenario(
        K=K,
        N=N,
        T_max=0.1,
        E=float(10 ** rng.uniform(-3.0, -1.5)),
        P_r=float(rng.choice(p_r_choices)),
        device_center=(float(rng.uniform(20.0, 40.0)), 0.0, 4.0),
    )


def assert_monotone(trace, tol=1e-9):
    trace = np.asarray(trace, dtype=float)
    assert np.all(np.diff(trace) >= -tol), f"trace not monotone: {trace}"


@pytest.fixture(scope="session")
def tiny_instance():
    sc = Scenario(K=2, N=2, T_max=0.1, E=0.01, P_r=1e-3)
    return sc, generate_channels(sc, seed=5)
