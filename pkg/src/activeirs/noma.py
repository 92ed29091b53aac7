"""Simultaneous-access scheme: one shared beam, alternating optimization.

The beam block is solved exactly through a fractional-to-linear SDP lift
(the scalar in the transformed program rides in the matrix corner), the
power block exactly as a continuous knapsack; the outer loop alternates
the two until the objective gain falls below tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet, Scenario, amplification_power
from .convex import (
    DEFAULT_OPTIONS,
    KnapsackLp,
    SdpProblem,
    SolverOptions,
    extract_rank_one,
    solve_knapsack,
    solve_sdp,
)

__all__ = [
    "NomaSolution",
    "build_cc_sdp",
    "beamforming_step",
    "beam_start_candidates",
    "power_step",
    "solve_noma",
    "noma_throughput",
    "noma_rate_at",
]

_LN2 = np.log(2.0)


@dataclass
class NomaSolution:
    tau: float                 # always the full period
    p: np.ndarray              # (K,) watts
    v: np.ndarray              # (N,) complex shared beam
    objective: float           # bit/Hz over the period
    ao_trace: list
    sdp_rank_exact: bool
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    def export_csv(self, buf, trace_buf=None) -> None:
        """Write allocation rows (k, tau, p) plus the shared beam, and
        optionally the alternating-loop trace."""
        import csv

        w = csv.writer(buf)
        w.writerow(["k", "tau", "p"])
        for k in range(len(self.p)):
            w.writerow([k, repr(float(self.tau)), repr(float(self.p[k]))])
        w.writerow([])
        w.writerow(["n", "re", "im"])
        for n in range(len(self.v)):
            w.writerow([n, repr(float(self.v[n].real)), repr(float(self.v[n].imag))])
        if trace_buf is not None:
            wt = csv.writer(trace_buf)
            wt.writerow(["iteration", "objective"])
            for i, val in enumerate(self.ao_trace):
                wt.writerow([i, repr(float(val))])


def _snr_sum(p, v, ch, sc, devices=None):
    """sum_k p_k |h_d+v^H q_k|^2 / (sigma2 + sigma_r2 ||g^H diag(conj v)||^2)."""
    devices = range(ch.K) if devices is None else devices
    den = sc.sigma2 + sc.sigma_r2 * float(np.sum(np.abs(v) ** 2 * ch.G_diag))
    num = 0.0
    for k in devices:
        num += p[k] * abs(ch.h_d[k] + np.vdot(v, ch.q[k])) ** 2
    return num / den


def noma_rate_at(tau, p, v, ch, sc) -> float:
    """tau * log2(1 + sum-SNR): the objective at an arbitrary feasible point."""
    return float(tau * np.log1p(_snr_sum(p, v, ch, sc)) / _LN2)


def noma_throughput(sol: NomaSolution, ch: ChannelSet, sc: Scenario) -> float:
    """Recompute the solution objective from the physical formula."""
    return noma_rate_at(sol.tau, sol.p, sol.v, ch, sc)


def build_cc_sdp(p, ch: ChannelSet, sc: Scenario, devices=None, per_device_budget=False):
    """Lift the shared-beam SNR-ratio maximization to a linear SDP.

    The fractional objective over the augmented rank-one matrix is
    normalized so its denominator equals one; the normalization scalar is
    carried in the (N+1, N+1) corner of the PSD variable.  Channels enter
    in noise units, so the optimal objective value equals the achieved
    sum SNR.  With per_device_budget, the amplification constraint is
    enforced for each device's transmit power separately.
    """
    devices = list(range(ch.K)) if devices is None else list(devices)
    N = ch.N
    s = np.sqrt(sc.sigma2)
    gpp = sc.sigma_r2 * ch.G_diag / sc.sigma2

    C = np.zeros((N + 1, N + 1), dtype=complex)
    for k in devices:
        qbar = np.concatenate([ch.q[k], [ch.h_d[k]]]) / s
        C += p[k] * np.outer(qbar, qbar.conj())

    A1 = np.diag(np.concatenate([gpp, [1.0]])).astype(complex)
    eqs = ((A1, 1.0),)

    def budget_matrix(weights):
        d = np.empty(N + 1)
        d[:N] = weights + sc.sigma_r2
        d[N] = -sc.P_r
        return np.diag(d).astype(complex)

    if per_device_budget:
        ineqs = tuple(
            (budget_matrix(p[k] * ch.Hr_diag[k]), 0.0) for k in devices
        )
    else:
        total = np.zeros(N)
        for k in devices:
            total += p[k] * ch.Hr_diag[k]
        ineqs = ((budget_matrix(total), 0.0),)
    return SdpProblem(C=C, equalities=eqs, inequalities=ineqs, maximize=True)


def _beam_budget(v, p, ch, sc, devices, per_device_budget):
    if per_device_budget:
        return max(amplification_power(v, p[k], k, ch, sc.sigma_r2) for k in devices)
    a2 = np.abs(v) ** 2
    tot = sc.sigma_r2 * float(np.sum(a2))
    for k in devices:
        tot += p[k] * float(np.sum(a2 * ch.Hr_diag[k]))
    return tot


def beamforming_step(
    p,
    ch: ChannelSet,
    sc: Scenario,
    opts: SolverOptions | None = None,
    devices=None,
    per_device_budget=False,
):
    """Optimal shared beam for fixed powers; returns (v, rank_exact).

    Solves the lifted SDP, rescales by the corner to undo the
    normalization, and extracts the dominant eigenpair.  When the solution
    is not numerically rank one, falls back to Gaussian randomization
    (samples rescaled to use the full amplification budget, best of
    randomization_samples kept) and flags rank_exact False.
    """
    opts = opts or DEFAULT_OPTIONS
    devices = list(range(ch.K)) if devices is None else list(devices)
    N = ch.N
    p = np.asarray(p, dtype=float)
    if float(np.max(p[devices], initial=0.0)) == 0.0 and sc.sigma_r2 == 0.0:
        return np.zeros(N, dtype=complex), True

    prob = build_cc_sdp(p, ch, sc, devices, per_device_budget)
    res = solve_sdp(prob, opts)
    corner = float(np.real(res.X[N, N]))
    if corner <= 0.0:
        return np.zeros(N, dtype=complex), False
    V = res.X / corner
    vbar, exact = extract_rank_one(V, opts)

    def recover(x):
        last = x[N]
        if abs(last) < 1e-12:
            return None
        return x[:N] * (np.conj(last) / abs(last))

    def rescale(v, full=False):
        used = _beam_budget(v, p, ch, sc, devices, per_device_budget)
        if used <= 0.0:
            return v
        if full:
            return v * np.sqrt(sc.P_r / used) * (1.0 - 1e-12)
        if used > sc.P_r:
            return v * np.sqrt(sc.P_r / used) * (1.0 - 1e-12)
        return v

    candidates = []
    v0 = recover(vbar)
    if v0 is not None:
        candidates.append(rescale(v0))
    if not exact or v0 is None:
        w, U = np.linalg.eigh(0.5 * (V + V.conj().T))
        B = U @ np.diag(np.sqrt(np.maximum(w, 0.0)))
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence((opts.rng_seed, 0xBE, len(devices))))
        )
        for _ in range(opts.randomization_samples):
            z = (rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1)) / np.sqrt(2)
            cand = recover(B @ z)
            if cand is not None:
                candidates.append(rescale(cand, full=True))
    if not candidates:
        return np.zeros(N, dtype=complex), False
    best = max(candidates, key=lambda v: _snr_sum(p, v, ch, sc, devices))
    return best, bool(exact and v0 is not None)


def power_step(v, ch: ChannelSet, sc: Scenario, devices=None):
    """Optimal transmit powers for a fixed beam via the continuous knapsack.

    Gains are the per-device received signal powers, weights the per-device
    amplification loads, boxes E_k / T_max, and the budget is what the
    beam's own noise amplification leaves of P_r.
    """
    devices = list(range(ch.K)) if devices is None else list(devices)
    v = np.asarray(v, dtype=complex)
    a2 = np.abs(v) ** 2
    own = sc.sigma_r2 * float(np.sum(a2))
    budget = sc.P_r - own
    if budget < -1e-12 * sc.P_r:
        raise ValueError("beam alone exceeds the amplification budget")
    budget = max(budget, 0.0)
    c = np.array([abs(ch.h_d[k] + np.vdot(v, ch.q[k])) ** 2 for k in devices])
    a = np.array([float(np.sum(a2 * ch.Hr_diag[k])) for k in devices])
    u = np.array([sc.E[k] / sc.T_max for k in devices])
    p_sub = solve_knapsack(KnapsackLp(c=c, a=a, u=u, b=budget))
    p = np.zeros(ch.K)
    p[devices] = p_sub
    return p


def beam_start_candidates(ch, sc, devices=None, p_full=None, opts=None, keep=4):
    """Ordered beam warm starts for a device subset: the best phase-aligned
    patterns (scaled to spend the whole budget at full powers) followed by
    beams optimal when a single strong device carries all the power.

    The single-device beams reach allocation basins where weaker devices
    are silenced, which shared-power starts never enter.
    """
    opts = opts or DEFAULT_OPTIONS
    devices = list(range(ch.K)) if devices is None else list(devices)
    if p_full is None:
        p_full = np.asarray(sc.E) / sc.T_max
    scored = []
    for k in devices:
        pat = np.exp(1j * (np.angle(ch.q[k]) - np.angle(ch.h_d[k])))
        a2 = np.abs(pat) ** 2
        used = sc.sigma_r2 * float(np.sum(a2))
        for j in devices:
            used += p_full[j] * float(np.sum(a2 * ch.Hr_diag[j]))
        v = pat * np.sqrt(sc.P_r / used) * (1.0 - 1e-9) if used > 0 else pat
        scored.append((_snr_sum(p_full, v, ch, sc, devices), k, v))
    scored.sort(key=lambda t: (-t[0], t[1]))
    n_aligned = max(keep - 2, 1) if len(devices) > 1 else keep
    cands = [v for _, _, v in scored[:n_aligned]]
    if len(devices) > 1:
        for _, k, _ in scored[: keep - len(cands)]:
            p_solo = np.zeros(ch.K)
            p_solo[k] = p_full[k]
            v_solo, _ = beamforming_step(p_solo, ch, sc, opts, devices=devices)
            cands.append(v_solo)
    return cands[:keep]


def solve_noma(
    ch: ChannelSet,
    sc: Scenario,
    opts: SolverOptions | None = None,
    v_init: np.ndarray | None = None,
    extra_inits=(),
) -> NomaSolution:
    """Maximize the simultaneous-access sum throughput.

    The transmission always spans the whole period (shrinking it never
    helps once per-device energies are fixed), so tau is set to T_max and
    the loop alternates exact beam and power steps.  `extra_inits` carries
    optional additional (v, p) warm starts; the best run is returned.
    """
    opts = opts or DEFAULT_OPTIONS
    starts = []
    if v_init is not None:
        starts.append((np.asarray(v_init, dtype=complex), None))
    else:
        starts.extend((v, None) for v in beam_start_candidates(ch, sc, opts=opts))
    for ini in extra_inits:
        starts.append((np.asarray(ini["v"], dtype=complex), ini.get("p")))

    best_sol = None
    for v0, p0 in starts:
        sol = _ao_run(ch, sc, opts, v0, p0)
        if best_sol is None or sol.objective > best_sol.objective:
            best_sol = sol
    best_sol.meta["n_runs"] = len(starts)
    return best_sol


def _ao_run(ch, sc, opts, v0, p0):
    T = sc.T_max
    v = v0.copy()
    used = _beam_budget(v, np.zeros(ch.K) if p0 is None else np.asarray(p0), ch, sc,
                        list(range(ch.K)), False)
    if used > sc.P_r:
        v *= np.sqrt(sc.P_r / used) * (1.0 - 1e-12)
    p = power_step(v, ch, sc) if p0 is None else np.asarray(p0, dtype=float)
    obj = noma_rate_at(T, p, v, ch, sc)
    trace = [obj]
    rank_exact_all = True
    n_fallback = 0

    for _ in range(opts.ao_max_iter):
        v_new, exact = beamforming_step(p, ch, sc, opts)
        rank_exact_all &= exact
        n_fallback += 0 if exact else 1
        if _snr_sum(p, v_new, ch, sc) <= _snr_sum(p, v, ch, sc):
            break
        v = v_new
        p = power_step(v, ch, sc)
        obj_n = noma_rate_at(T, p, v, ch, sc)
        if obj_n <= obj + 1e-12 * max(1.0, abs(obj)):
            break
        gain = (obj_n - obj) / max(abs(obj), 1e-12)
        obj = obj_n
        trace.append(obj)
        if gain < opts.ao_tol:
            break

    amp = _beam_budget(v, p, ch, sc, list(range(ch.K)), False)
    return NomaSolution(
        tau=T,
        p=p,
        v=v,
        objective=float(obj),
        ao_trace=trace,
        sdp_rank_exact=rank_exact_all,
        status="ok",
        meta={
            "amp_residual": float(amp - sc.P_r),
            "rank_fallbacks": n_fallback,
        },
    )
