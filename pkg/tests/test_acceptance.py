"""Acceptance gate: every top-level criterion at its stated tolerance.

Each test prints one PASS line with the measured figures; a failed assert
is the corresponding FAIL.  Instance streams are deterministic, so the
suite is reproducible run to run.
"""

import time

import numpy as np
import pytest

from activeirs.channels import Scenario, amplification_power, generate_channels
from activeirs.convex import (
    BarrierProblem,
    PerspectiveTerm,
    SolverOptions,
    solve_barrier,
)
from activeirs.harness import SweepConfig, paper_v_scenario, records_csv, run_sweep, verify
from activeirs.hybrid import partition_devices, solve_hybrid
from activeirs.noma import beamforming_step, noma_rate_at, solve_noma
from activeirs.oracle import GridSpec, brute_force
from activeirs.tdma import (
    equal_snr_time_allocation,
    shared_beam_relaxed,
    solve_tdma,
    solve_tdma_single_beam,
    tdma_dominance_condition,
)
from conftest import assert_monotone, random_tiny_scenario

TRACES = []  # (label, trace) pairs collected across criteria for criterion 7


def _rng(tag):
    return np.random.default_rng(np.random.SeedSequence((2024, tag)))


def _report(idx, name, detail):
    print(f"\nACCEPTANCE {idx} ({name}): PASS — {detail}")


# ---------------------------------------------------------------------------


def test_acceptance_1_energy_depletion():
    rng = _rng(1)
    opts = SolverOptions(sca_restarts=1)
    t0 = time.time()
    worst = 0.0
    for i in range(200):
        K = int(rng.integers(1, 5))
        N = int(rng.integers(1, 9))
        sc = Scenario(
            K=K, N=N, T_max=0.1,
            E=float(10 ** rng.uniform(-3.0, -1.5)),
            P_r=float(rng.choice([1e-4, 1e-3, 1e-2])),
            device_center=(float(rng.uniform(20, 40)), 0.0, 4.0),
        )
        ch = generate_channels(sc, seed=i)
        sol = solve_tdma(ch, sc, opts)
        res = float(np.max(np.abs(sol.tau * sol.p - np.asarray(sc.E)) / np.asarray(sc.E)))
        worst = max(worst, res)
        assert res <= 1e-6, f"instance {i}: energy residual {res:.2e}"
        TRACES.append((f"tdma-{i}", sol.trace))
    elapsed = time.time() - t0
    assert elapsed <= 300.0, f"suite took {elapsed:.0f}s > 5 min"
    _report(1, "energy depletion", f"200 instances, worst residual {worst:.2e}, {elapsed:.0f}s")


def test_acceptance_2_full_duration():
    rng = _rng(2)
    # exact full-duration transmission on a batch of solved instances
    for i in range(20):
        sc = random_tiny_scenario(rng)
        ch = generate_channels(sc, seed=1000 + i)
        sol = solve_noma(ch, sc)
        assert sol.tau == sc.T_max
        TRACES.append((f"noma-dur-{i}", sol.ao_trace))
    # numeric mirror of the duration-scaling argument on random feasible points
    sc = Scenario(K=3, N=4, T_max=0.1, E=0.01, P_r=1e-3)
    ch = generate_channels(sc, seed=77)
    checked = 0
    for _ in range(200):
        v = rng.standard_normal(sc.N) + 1j * rng.standard_normal(sc.N)
        e = rng.random(sc.K) * np.asarray(sc.E)
        t1 = float(rng.uniform(0.05, 0.95)) * sc.T_max
        t2 = float(rng.uniform(t1 / sc.T_max, 1.0)) * sc.T_max
        assert noma_rate_at(t2, e / t2, v, ch, sc) >= noma_rate_at(t1, e / t1, v, ch, sc) - 1e-12
        checked += 1
    _report(2, "full duration", f"tau == T_max on 20 solves; monotone in tau on {checked} points")


@pytest.fixture(scope="module")
def ordering_instances():
    """Shared stream for the ordering criteria: (sc, ch, single_beam, noma).

    The last quarter uses noisy amplifying elements (surface noise well
    above the receiver's), the regime where the amplification budget stops
    binding at the relaxed shared-beam optimum.
    """
    rng = _rng(3)
    opts = SolverOptions(sca_restarts=2)
    out = []
    for i in range(200):
        sc = random_tiny_scenario(rng)
        if i >= 150:
            sc = sc.with_(
                sigma_r2=sc.sigma2 * float(rng.choice([1e2, 1e3])),
                P_r=float(rng.choice([1e-3, 1e-2])),
            )
        ch = generate_channels(sc, seed=2000 + i)
        sb = solve_tdma_single_beam(ch, sc, opts)
        e_spent = sb.tau * sb.p
        nm = solve_noma(
            ch, sc, extra_inits=({"v": sb.v[0], "p": e_spent / sc.T_max},)
        )
        out.append((sc, ch, sb, nm))
    return out


def test_acceptance_3_ordering_single_beam(ordering_instances):
    worst = np.inf
    for i, (sc, ch, sb, nm) in enumerate(ordering_instances):
        margin = nm.objective - sb.objective
        worst = min(worst, margin)
        assert margin >= -1e-6, f"instance {i}: simultaneous {nm.objective} < shared-beam {sb.objective}"
        TRACES.append((f"sb-{i}", sb.trace))
        TRACES.append((f"noma-ord-{i}", nm.ao_trace))
    _report(3, "single-beam ordering", f"200 instances, worst margin {worst:+.2e}")


def test_acceptance_4_conditional_tdma_dominance(ordering_instances):
    opts = SolverOptions(sca_restarts=2)
    holders = 0
    worst = np.inf
    for i, (sc, ch, sb, nm) in enumerate(ordering_instances):
        relaxed = shared_beam_relaxed(ch, sc, opts)
        holds, _ = tdma_dominance_condition(ch, sc, opts, relaxed=relaxed)
        if not holds:
            continue
        holders += 1
        v = relaxed.v[0]
        gains = np.array([
            abs(ch.h_d[k] + np.vdot(v, ch.q[k])) ** 2 for k in range(sc.K)
        ])
        tau_eq = equal_snr_time_allocation(gains, sc.E, sc.T_max)
        warm = {"v": np.tile(v, (sc.K, 1)), "tau": tau_eq}
        td = solve_tdma(ch, sc, opts, extra_inits=(warm,))
        margin = td.objective - nm.objective
        worst = min(worst, margin)
        assert margin >= -1e-6, f"instance {i}: tdma {td.objective} < noma {nm.objective}"
        TRACES.append((f"tdma-dom-{i}", td.trace))
    assert holders > 0, "condition never held; the check is vacuous"
    _report(4, "conditional dominance", f"{holders} holding instances, worst margin {worst:+.2e}")


def test_acceptance_5_oracle_equivalence():
    rng = _rng(5)
    grid = GridSpec(phase_levels=16, amplitude_levels=12, time_levels=24)
    opts = SolverOptions(sca_restarts=2)
    t0 = time.time()
    worst = {"tdma": np.inf, "noma": np.inf, "hybrid": np.inf}
    for i in range(50):
        sc = Scenario(
            K=2, N=2, T_max=0.1,
            E=float(10 ** rng.uniform(-2.5, -1.5)),
            P_r=float(rng.choice([1e-4, 1e-3])),
            device_center=(float(rng.uniform(25, 35)), 0.0, 4.0),
        )
        ch = generate_channels(sc, seed=3000 + i)
        pairs = {
            "tdma": (solve_tdma(ch, sc, opts).objective,
                     brute_force(ch, sc, "tdma", grid)[0]),
            "noma": (solve_noma(ch, sc).objective,
                     brute_force(ch, sc, "noma", grid)[0]),
            "hybrid": (solve_hybrid(ch, sc, partition_devices(2, 2), opts).objective,
                       brute_force(ch, sc, "hybrid", grid,
                                   grouping=partition_devices(2, 2))[0]),
        }
        for name, (got, ref) in pairs.items():
            ratio = got / ref - 1.0
            worst[name] = min(worst[name], ratio)
            assert got >= ref * 0.98, f"instance {i} {name}: {got:.6f} < 0.98 * {ref:.6f}"
    elapsed = time.time() - t0
    assert elapsed <= 1200.0, f"suite took {elapsed:.0f}s > 20 min"
    deficits = {k: f"{v:+.4f}" for k, v in worst.items()}
    _report(5, "oracle equivalence", f"50 instances, worst vs grid {deficits}, {elapsed:.0f}s")


def test_acceptance_6_rank_one_rate():
    rng = _rng(6)
    exact = 0
    for i in range(500):
        K = int(rng.integers(1, 4))
        N = int(rng.integers(2, 9))
        sc = Scenario(
            K=K, N=N, T_max=0.1,
            E=float(10 ** rng.uniform(-3.0, -1.5)),
            P_r=float(rng.choice([1e-4, 1e-3, 1e-2])),
            device_center=(float(rng.uniform(20, 40)), 0.0, 4.0),
        )
        ch = generate_channels(sc, seed=4000 + i)
        p = np.asarray(sc.E) / sc.T_max * rng.uniform(0.2, 1.0, K)
        _, is_exact = beamforming_step(p, ch, sc)
        exact += is_exact
    assert exact >= 495, f"rank-one rate {exact}/500 below 99%"
    # the randomization fallback path must run cleanly when forced
    sc = Scenario(K=2, N=3, T_max=0.1, E=0.01, P_r=1e-3)
    ch = generate_channels(sc, seed=4999)
    forced = SolverOptions(rank_one_ratio=2.0, randomization_samples=100)
    v, is_exact = beamforming_step(np.asarray(sc.E) / sc.T_max, ch, sc, forced)
    assert not is_exact and np.linalg.norm(v) > 0
    _report(6, "rank-one rate", f"{exact}/500 exact; forced fallback feasible")


def test_acceptance_7_monotone_traces():
    assert len(TRACES) >= 400, "earlier criteria must populate the trace registry"
    for label, trace in TRACES:
        assert_monotone(trace, tol=1e-9)
    _report(7, "monotone convergence", f"{len(TRACES)} traces non-decreasing within 1e-9")


def test_acceptance_8_equal_snr_oracle():
    rng = _rng(8)
    opts = SolverOptions(tol_gap=1e-9)
    worst = 0.0
    for i in range(100):
        sc = random_tiny_scenario(rng)
        ch = generate_channels(sc, seed=5000 + i)
        v = 0.5 * (rng.standard_normal(sc.N) + 1j * rng.standard_normal(sc.N))
        den = sc.sigma2 + sc.sigma_r2 * float(np.sum(np.abs(v) ** 2 * ch.G_diag))
        gains = np.array([
            abs(ch.h_d[k] + np.vdot(v, ch.q[k])) ** 2 for k in range(sc.K)
        ])
        a = np.asarray(sc.E) * gains / den

        tau_ref = equal_snr_time_allocation(gains, sc.E, sc.T_max)
        obj_ref = float(np.sum(tau_ref * np.log2(1 + a / tau_ref)))

        K = sc.K
        terms = tuple(
            PerspectiveTerm(tau=k, s_lin=np.zeros(K), s_const=float(a[k]))
            for k in range(K)
        )
        rows = [np.ones(K)]
        rhs = [sc.T_max]
        for k in range(K):
            r = np.zeros(K)
            r[k] = -1.0
            rows.append(r)
            rhs.append(-1e-9 * sc.T_max)
        prob = BarrierProblem(n=K, terms=terms, G=np.array(rows), h=np.array(rhs))
        res = solve_barrier(prob, np.full(K, sc.T_max / (K + 1)), opts)
        rel = abs(res.objective - obj_ref) / obj_ref
        worst = max(worst, rel)
        assert rel <= 1e-6, f"instance {i}: closed form vs barrier rel diff {rel:.2e}"
    _report(8, "equal-SNR oracle", f"100 instances, worst rel diff {worst:.2e}")


@pytest.fixture(scope="module")
def trend_opts():
    return SolverOptions(sca_restarts=2)


def _medians(records, scheme):
    vals = {}
    for r in records:
        if r.scheme == scheme:
            vals.setdefault(r.value, []).append(r.objective_bits_per_hz)
    return {v: float(np.median(x)) for v, x in sorted(vals.items())}


def test_acceptance_9a_device_count_trend(trend_opts):
    cfg = SweepConfig(
        base=paper_v_scenario(K=2, N=4),
        axis="K",
        values=(1, 2, 4, 8),
        seeds=20,
        schemes=("tdma", "noma"),
    )
    recs = run_sweep(cfg, trend_opts)
    td = _medians(recs, "tdma")
    nm = _medians(recs, "noma")
    tvals = list(td.values())
    assert all(b >= a - 1e-9 for a, b in zip(tvals, tvals[1:])), f"tdma medians {td}"
    tdma_gain = td[8.0] / td[4.0] - 1.0
    noma_gain = nm[8.0] / nm[4.0] - 1.0
    assert noma_gain < tdma_gain, (
        f"simultaneous access should saturate: noma {noma_gain:.3f} vs tdma {tdma_gain:.3f}"
    )
    _report("9a", "device-count trend",
            f"tdma medians {np.round(tvals, 3).tolist()}, gains 4->8: "
            f"tdma {tdma_gain:.3f}, noma {noma_gain:.3f}")


@pytest.fixture(scope="module")
def element_sweep(trend_opts):
    cfg = SweepConfig(
        base=paper_v_scenario(K=3, N=4),
        axis="N",
        values=(2, 4, 8),
        seeds=20,
        schemes=("tdma", "noma", "passive"),
    )
    return run_sweep(cfg, trend_opts)


def test_acceptance_9b_element_count_trend(element_sweep):
    for scheme in ("tdma", "noma", "passive-simplified"):
        med = _medians(element_sweep, scheme)
        vals = list(med.values())
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:])), f"{scheme}: {med}"
    _report("9b", "element-count trend", "tdma/noma/passive medians non-decreasing in N")


def test_acceptance_9c_active_beats_passive(element_sweep):
    act = _medians(element_sweep, "tdma")
    pas = _medians(element_sweep, "passive-simplified")
    for n in act:
        assert act[n] > pas[n], f"N={n}: active {act[n]:.4f} <= passive {pas[n]:.4f}"
    gains = {n: act[n] / pas[n] for n in act}
    _report("9c", "active vs passive", f"median gain {gains}")


def test_acceptance_9d_group_count_trend(trend_opts):
    base = paper_v_scenario(K=6, N=4)
    meds = {}
    for L in (1, 2, 3, 6):
        objs = []
        for seed in range(20):
            ch = generate_channels(base, seed=seed)
            sol = solve_hybrid(ch, base, partition_devices(6, L), trend_opts)
            objs.append(sol.objective)
            TRACES.append((f"hyb-{L}-{seed}", sol.ao_trace))
        meds[L] = float(np.median(objs))
    vals = [meds[L] for L in (1, 2, 3, 6)]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:])), f"medians {meds}"
    # sandwich upper side: grouped medians stay within 1% of per-device beams
    td = float(np.median([
        solve_tdma(generate_channels(base, seed=s), base, trend_opts).objective
        for s in range(20)
    ]))
    for L in (2, 3, 6):
        assert meds[L] <= td * 1.01, f"L={L}: {meds[L]} vs tdma {td}"
    _report("9d", "group-count trend",
            f"medians by L {np.round(vals, 4).tolist()}, tdma median {td:.4f}")


def test_acceptance_9e_overhead_column(trend_opts):
    cfg = SweepConfig(
        base=paper_v_scenario(K=6, N=4),
        axis="L",
        values=(1, 2, 3, 6),
        seeds=1,
        schemes=("hybrid",),
    )
    recs = run_sweep(cfg, trend_opts)
    for r in recs:
        assert r.overhead_coeffs == int(r.value) * 4
    _report("9e", "overhead column", f"overhead == L*N on {len(recs)} records")


def test_acceptance_10_determinism():
    assert verify(verbose=False) == verify(verbose=False)

    def cfg(workers):
        return SweepConfig(
            base=paper_v_scenario(K=2, N=2),
            axis="N",
            values=(2, 3),
            seeds=2,
            schemes=("noma", "hybrid-2"),
            workers=workers,
        )

    def strip(text):
        return [",".join(l.split(",")[:-1]) for l in text.strip().splitlines()]

    one = strip(records_csv(run_sweep(cfg(1))))
    again = strip(records_csv(run_sweep(cfg(1))))
    four = strip(records_csv(run_sweep(cfg(4))))
    assert one == again
    assert one == four
    _report(10, "determinism", "verify and sweeps byte-identical across runs and worker counts")
