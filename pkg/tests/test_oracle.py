import numpy as np
import pytest

from activeirs.channels import Scenario, generate_channels
from activeirs.convex import KnapsackLp
from activeirs.hybrid import partition_devices
from activeirs.oracle import (
    GridSpec,
    GridTooLargeError,
    brute_force,
    vertex_enumerate_lp,
)


@pytest.fixture(scope="module")
def tiny():
    sc = Scenario(K=2, N=2, T_max=0.1, E=0.01, P_r=1e-3)
    return sc, generate_channels(sc, seed=5)


def test_grid_guard():
    with pytest.raises(GridTooLargeError):
        GridSpec(phase_levels=64, amplitude_levels=50, time_levels=50).check(8, 2, 2)


def test_tdma_no_surface_closed_form():
    # beam forced to zero by a vanishing budget: the best the grid can do is
    # the direct-link term (alpha = 0 candidate)
    sc = Scenario(K=1, N=1, T_max=0.1, E=0.01, P_r=1e-30, sigma_r2=1e-12)
    ch = generate_channels(sc, seed=1)
    val, _ = brute_force(ch, sc, "tdma", GridSpec(4, 4, 4))
    ref = sc.T_max * np.log2(
        1 + sc.E[0] / sc.T_max * abs(ch.h_d[0]) ** 2 / sc.sigma2
    )
    assert val == pytest.approx(ref, rel=1e-9)


def test_noma_no_surface_closed_form():
    sc = Scenario(K=2, N=1, T_max=0.1, E=0.01, P_r=1e-30, sigma_r2=1e-12)
    ch = generate_channels(sc, seed=1)
    val, _ = brute_force(ch, sc, "noma", GridSpec(4, 4, 4))
    p = np.asarray(sc.E) / sc.T_max
    ref = sc.T_max * np.log2(1 + float(np.sum(p * np.abs(ch.h_d) ** 2)) / sc.sigma2)
    assert val == pytest.approx(ref, rel=1e-9)


def test_grid_refinement_self_consistency(tiny):
    sc, ch = tiny
    base = GridSpec(phase_levels=16, amplitude_levels=12, time_levels=24)
    fine = GridSpec(phase_levels=32, amplitude_levels=24, time_levels=48)
    for scheme in ("tdma", "noma"):
        v0, _ = brute_force(ch, sc, scheme, base)
        v1, _ = brute_force(ch, sc, scheme, fine)
        assert abs(v1 - v0) / v0 < 0.005


def test_hybrid_needs_grouping(tiny):
    sc, ch = tiny
    with pytest.raises(ValueError):
        brute_force(ch, sc, "hybrid")
    val, info = brute_force(ch, sc, "hybrid", GridSpec(8, 8, 10),
                            grouping=partition_devices(2, 2))
    assert val > 0
    assert sum(info["tau"]) == pytest.approx(sc.T_max)


def test_vertex_enumeration_examples():
    val, p = vertex_enumerate_lp(
        KnapsackLp(c=np.array([3.0, 1.0]), a=np.array([1.0, 1.0]),
                   u=np.array([1.0, 1.0]), b=1.5)
    )
    assert val == pytest.approx(3.5)
    val, p = vertex_enumerate_lp(
        KnapsackLp(c=np.array([1.0, 1.0]), a=np.array([0.0, 1.0]),
                   u=np.array([4.0, 4.0]), b=1.0)
    )
    assert val == pytest.approx(5.0)


def test_vertex_enumeration_size_guard():
    with pytest.raises(ValueError):
        vertex_enumerate_lp(
            KnapsackLp(c=np.ones(11), a=np.ones(11), u=np.ones(11), b=1.0)
        )
