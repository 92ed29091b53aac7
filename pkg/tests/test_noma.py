import numpy as np
import pytest

from activeirs.channels import Scenario, amplification_power, generate_channels
from activeirs.convex import SolverOptions, solve_sdp
from activeirs.noma import (
    beamforming_step,
    build_cc_sdp,
    noma_rate_at,
    noma_throughput,
    power_step,
    solve_noma,
)
from activeirs.oracle import GridSpec, brute_force, dinkelbach_beam_ratio
from activeirs.tdma import solve_tdma, solve_tdma_single_beam
from conftest import assert_monotone

FAST = SolverOptions(sca_restarts=2)


@pytest.fixture(scope="module")
def small():
    sc = Scenario(K=2, N=2, T_max=0.1, E=0.01, P_r=1e-3)
    return sc, generate_channels(sc, seed=1)


@pytest.fixture(scope="module")
def solved(small):
    sc, ch = small
    return solve_noma(ch, sc)


# ---------------------------------------------------------------------------
# lifted SDP construction


def test_cc_sdp_zero_powers(small):
    sc, ch = small
    prob = build_cc_sdp(np.zeros(sc.K), ch, sc)
    assert np.all(prob.C == 0)
    r = solve_sdp(prob)
    assert r.objective == pytest.approx(0.0, abs=1e-9)


def test_cc_sdp_matrices_hermitian_psd(small):
    sc, ch = small
    p = np.asarray(sc.E) / sc.T_max
    prob = build_cc_sdp(p, ch, sc)
    for M, _ in prob.equalities + prob.inequalities:
        assert np.allclose(M, M.conj().T)
    # the amplification load without its budget corner is PSD
    (B, _), = prob.inequalities
    assert np.all(np.real(np.diag(B))[:-1] >= 0)


def test_beamforming_matches_golden_section():
    sc = Scenario(K=1, N=1, T_max=0.1, E=0.01, P_r=1e-3)
    ch = generate_channels(sc, seed=7)
    p = np.asarray(sc.E) / sc.T_max
    v, exact = beamforming_step(p, ch, sc)
    assert exact
    got = p[0] * abs(ch.h_d[0] + np.vdot(v, ch.q[0])) ** 2 / (
        sc.sigma2 + sc.sigma_r2 * np.sum(np.abs(v) ** 2 * ch.G_diag)
    )

    hd, q, g, hr2 = ch.h_d[0], ch.q[0, 0], ch.g[0], ch.Hr_diag[0, 0]
    a_max = np.sqrt(sc.P_r / (p[0] * hr2 + sc.sigma_r2))

    def f(a):
        return p[0] * (abs(hd) + a * abs(q)) ** 2 / (sc.sigma2 + sc.sigma_r2 * a * a * abs(g) ** 2)

    lo, hi = 0.0, a_max
    gr = (np.sqrt(5) - 1) / 2
    for _ in range(300):
        c, d = hi - gr * (hi - lo), lo + gr * (hi - lo)
        if f(c) < f(d):
            lo = c
        else:
            hi = d
    assert got == pytest.approx(f(0.5 * (lo + hi)), rel=1e-4)


def test_beamforming_vanishing_budget(small):
    sc, ch = small
    tiny = sc.with_(P_r=sc.sigma_r2 * 1e-6)
    p = np.asarray(tiny.E) / tiny.T_max
    v, _ = beamforming_step(p, ch, tiny)
    assert np.linalg.norm(v) ** 2 <= 2e-6
    # objective collapses to the direct links
    direct = float(np.sum(p * np.abs(ch.h_d) ** 2)) / tiny.sigma2
    got = noma_rate_at(tiny.T_max, p, v, ch, tiny)
    ref = tiny.T_max * np.log2(1 + direct)
    assert got == pytest.approx(ref, rel=1e-3)


def test_beamforming_respects_budget(small):
    sc, ch = small
    p = np.asarray(sc.E) / sc.T_max
    v, _ = beamforming_step(p, ch, sc)
    used = sc.sigma_r2 * np.sum(np.abs(v) ** 2) + sum(
        p[k] * np.sum(np.abs(v) ** 2 * ch.Hr_diag[k]) for k in range(sc.K)
    )
    assert used <= sc.P_r * (1 + 1e-9)


def test_beamforming_beats_fine_phase_grid(small):
    # fixed powers, N=2, K=2: the lifted-SDP beam must reach at least the
    # best of 32^2 phase patterns x 20 amplitude scales (minus grid slack)
    sc, ch = small
    from activeirs.noma import _snr_sum
    from activeirs.oracle import _phase_patterns

    p = np.asarray(sc.E) / sc.T_max
    v_sdp, _ = beamforming_step(p, ch, sc)
    got = _snr_sum(p, v_sdp, ch, sc)

    W = _phase_patterns(2, 32)
    load = np.array([float(np.sum(ch.Hr_diag[k])) for k in range(2)])
    best = 0.0
    for pat in W:
        a_bind = np.sqrt(sc.P_r / (float(p @ load) + sc.sigma_r2 * 2))
        for a in np.linspace(a_bind / 20, a_bind, 20):
            best = max(best, _snr_sum(p, a * pat, ch, sc))
    assert got >= best * 0.98


def test_export_csv_with_trace(solved):
    import io

    buf, tbuf = io.StringIO(), io.StringIO()
    solved.export_csv(buf, tbuf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "k,tau,p"
    tlines = tbuf.getvalue().strip().splitlines()
    assert tlines[0] == "iteration,objective"
    assert len(tlines) == 1 + len(solved.ao_trace)


def test_lemma3_equivalence_dinkelbach(small):
    sc, ch = small
    p = np.asarray(sc.E) / sc.T_max
    cc_val = solve_sdp(build_cc_sdp(p, ch, sc)).objective
    ref = dinkelbach_beam_ratio(p, ch, sc, tol=1e-7)
    assert cc_val == pytest.approx(ref, rel=1e-5)


# ---------------------------------------------------------------------------
# power step


def test_power_step_zero_beam_gives_full_power(small):
    sc, ch = small
    p = power_step(np.zeros(sc.N, dtype=complex), ch, sc)
    assert p == pytest.approx(np.asarray(sc.E) / sc.T_max)


def test_power_step_single_device_cap():
    sc = Scenario(K=1, N=2, T_max=0.1, E=0.01, P_r=1e-3)
    ch = generate_channels(sc, seed=0)
    v = 20.0 * np.exp(1j * np.array([0.3, -1.0]))
    a = float(np.sum(np.abs(v) ** 2 * ch.Hr_diag[0]))
    b = sc.P_r - sc.sigma_r2 * float(np.sum(np.abs(v) ** 2))
    p = power_step(v, ch, sc)
    assert p[0] == pytest.approx(min(sc.E[0] / sc.T_max, b / a), rel=1e-12)


def test_power_step_matches_vertex_enumeration():
    from activeirs.convex import KnapsackLp
    from activeirs.oracle import vertex_enumerate_lp

    sc = Scenario(K=3, N=2, T_max=0.1, E=(0.01, 0.02, 0.005), P_r=1e-3)
    ch = generate_channels(sc, seed=3)
    rng = np.random.default_rng(0)
    for _ in range(10):
        v = 10 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
        if sc.sigma_r2 * np.sum(np.abs(v) ** 2) >= sc.P_r:
            continue
        p = power_step(v, ch, sc)
        c = np.array([abs(ch.h_d[k] + np.vdot(v, ch.q[k])) ** 2 for k in range(3)])
        a = np.array([float(np.sum(np.abs(v) ** 2 * ch.Hr_diag[k])) for k in range(3)])
        u = np.asarray(sc.E) / sc.T_max
        b = sc.P_r - sc.sigma_r2 * float(np.sum(np.abs(v) ** 2))
        ref, _ = vertex_enumerate_lp(KnapsackLp(c=c, a=a, u=u, b=b))
        assert float(p @ c) == pytest.approx(ref, rel=1e-10)


def test_power_step_infeasible_beam(small):
    sc, ch = small
    v = np.full(sc.N, 1e6, dtype=complex)
    with pytest.raises(ValueError):
        power_step(v, ch, sc)


# ---------------------------------------------------------------------------
# full solver


def test_full_duration_and_traces(solved, small):
    sc, ch = small
    assert solved.tau == sc.T_max
    assert_monotone(solved.ao_trace)
    assert noma_throughput(solved, ch, sc) == pytest.approx(solved.objective, abs=1e-9)
    assert np.all(solved.p <= np.asarray(sc.E) / sc.T_max + 1e-12)
    assert solved.meta["amp_residual"] <= 1e-8 * sc.P_r


def test_duration_scaling_never_decreases_objective(small):
    # fixing spent energies, a longer transmission never hurts
    sc, ch = small
    rng = np.random.default_rng(5)
    for _ in range(200):
        v = rng.standard_normal(sc.N) + 1j * rng.standard_normal(sc.N)
        e = rng.random(sc.K) * np.asarray(sc.E)
        t1 = float(rng.uniform(0.01, 0.9)) * sc.T_max
        t2 = float(rng.uniform(t1 / sc.T_max, 1.0)) * sc.T_max
        r1 = noma_rate_at(t1, e / t1, v, ch, sc)
        r2 = noma_rate_at(t2, e / t2, v, ch, sc)
        assert r2 >= r1 - 1e-12


def test_throughput_trivial_points(small):
    sc, ch = small
    v = 5.0 * np.exp(1j * np.array([0.2, -0.4]))
    assert noma_rate_at(sc.T_max, np.zeros(sc.K), v, ch, sc) == 0.0
    p = np.asarray(sc.E) / sc.T_max
    got = noma_rate_at(sc.T_max, p, np.zeros(sc.N, dtype=complex), ch, sc)
    ref = sc.T_max * np.log2(1 + float(np.sum(p * np.abs(ch.h_d) ** 2)) / sc.sigma2)
    assert got == pytest.approx(ref, rel=1e-12)


def test_k1_matches_tdma():
    sc = Scenario(K=1, N=2, T_max=0.1, E=0.01, P_r=1e-3)
    ch = generate_channels(sc, seed=4)
    a = solve_tdma(ch, sc, FAST)
    b = solve_noma(ch, sc)
    assert b.objective == pytest.approx(a.objective, rel=1e-4)


def test_dominates_single_beam_bound(small):
    for seed in range(6):
        sc = Scenario(K=2, N=2, T_max=0.1, E=0.01, P_r=1e-3)
        ch = generate_channels(sc, seed=seed)
        sb = solve_tdma_single_beam(ch, sc, FAST)
        e_map = sb.tau * sb.p
        nm = solve_noma(
            ch, sc,
            extra_inits=({"v": sb.v[0], "p": e_map / sc.T_max},),
        )
        assert nm.objective >= sb.objective - 1e-6


def test_strict_gain_when_slot_snrs_differ(small):
    # unequal per-slot SNRs at the shared-beam optimum leave simultaneous
    # access strictly ahead
    sc, ch = small
    sb = solve_tdma_single_beam(ch, sc, FAST)
    snrs = np.array([
        sb.p[k] * abs(ch.h_d[k] + np.vdot(sb.v[k], ch.q[k])) ** 2
        / (sc.sigma2 + sc.sigma_r2 * np.sum(np.abs(sb.v[k]) ** 2 * ch.G_diag))
        for k in range(sc.K)
    ])
    spread = float(np.ptp(snrs) / snrs.mean())
    nm = solve_noma(ch, sc)
    if spread > 1e-3:
        assert nm.objective >= sb.objective + 1e-7


def test_beats_brute_force_grid(small):
    sc, ch = small
    sol = solve_noma(ch, sc)
    ref, _ = brute_force(ch, sc, "noma", GridSpec(16, 12, 20))
    assert sol.objective >= ref * 0.98


def test_rank_one_rate_small_sample():
    exact = 0
    for seed in range(20):
        sc = Scenario(K=2, N=3, T_max=0.1, E=0.01, P_r=1e-3)
        ch = generate_channels(sc, seed=seed)
        sol = solve_noma(ch, sc)
        exact += sol.sdp_rank_exact
    assert exact >= 19


def test_randomization_fallback_no_crash(small):
    # force the fallback by making the rank-one threshold unreachable
    sc, ch = small
    opts = SolverOptions(rank_one_ratio=2.0, randomization_samples=50)
    p = np.asarray(sc.E) / sc.T_max
    v, exact = beamforming_step(p, ch, sc, opts)
    assert not exact
    used = sc.sigma_r2 * np.sum(np.abs(v) ** 2) + sum(
        p[k] * np.sum(np.abs(v) ** 2 * ch.Hr_diag[k]) for k in range(sc.K)
    )
    assert used <= sc.P_r * (1 + 1e-9)
    assert np.linalg.norm(v) > 0
