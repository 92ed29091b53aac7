"""Time-division scheme: per-device beams, slot durations, and powers.

The solver exploits the energy-depletion structure (each device spends its
whole budget, p_k = E_k / tau_k) and iterates a convex inner program built
from a first-order lower bound on the received-signal term.  Every inner
program is solved in noise units (amplitudes divided by sqrt(sigma2)) so
the barrier solver sees O(1) data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet, Scenario, amplification_power, effective_gain
from .convex import (
    BarrierProblem,
    DEFAULT_OPTIONS,
    PerspectiveTerm,
    QolConstraint,
    QuadConstraint,
    SolverOptions,
    solve_barrier,
)

__all__ = [
    "TdmaSolution",
    "sca_bound",
    "solve_tdma",
    "solve_tdma_single_beam",
    "tdma_throughput",
    "equal_snr_time_allocation",
    "shared_beam_relaxed",
    "tdma_dominance_condition",
]

_LN2 = np.log(2.0)


@dataclass
class TdmaSolution:
    """Per-device slot durations, powers, beams, and the achieved objective."""

    tau: np.ndarray            # (K,) seconds
    p: np.ndarray              # (K,) watts
    v: np.ndarray              # (K, N) complex beam per device
    S: np.ndarray              # (K,) slack SNR-numerator values
    objective: float           # bit/Hz over the period
    trace: list                # accepted outer-iteration objectives
    residuals: dict
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    def export_csv(self, buf, beams_buf=None) -> None:
        """Write allocation rows (k, tau, p, S) and, optionally, the
        per-device beam coefficients (k, n, re, im)."""
        import csv

        w = csv.writer(buf)
        w.writerow(["k", "tau", "p", "S"])
        for k in range(len(self.tau)):
            w.writerow([k, repr(float(self.tau[k])), repr(float(self.p[k])), repr(float(self.S[k]))])
        if beams_buf is not None:
            wb = csv.writer(beams_buf)
            wb.writerow(["k", "n", "re", "im"])
            for k in range(self.v.shape[0]):
                for n in range(self.v.shape[1]):
                    wb.writerow([k, n, repr(float(self.v[k, n].real)), repr(float(self.v[k, n].imag))])


@dataclass(frozen=True)
class ScaBound:
    """Affine lower bound on E |h_d + v^H q|^2 / S around (v_ref, S_ref).

    value(v, S) = const + coef_re . Re(v) + coef_im . Im(v) + coef_s * S,
    tight at the expansion point and a global lower bound elsewhere.
    """

    coef_re: np.ndarray
    coef_im: np.ndarray
    coef_s: float
    const: float

    def value(self, v: np.ndarray, s: float) -> float:
        return float(
            self.const
            + self.coef_re @ v.real
            + self.coef_im @ v.imag
            + self.coef_s * s
        )


def _sca_bound_raw(v_ref, s_ref, h_d, q, energy) -> ScaBound:
    u_ref = h_d + np.vdot(v_ref, q)
    w = np.conj(q) * u_ref
    lead = 2.0 * energy / s_ref
    return ScaBound(
        coef_re=lead * w.real,
        coef_im=-lead * w.imag,
        coef_s=-energy * abs(u_ref) ** 2 / s_ref**2,
        const=lead * float(np.real(np.conj(h_d) * u_ref)),
    )


def sca_bound(v_ref: np.ndarray, s_ref: float, k: int, ch: ChannelSet, energy: float) -> ScaBound:
    """First-order minorant of the signal-power-over-slack ratio at device k."""
    if s_ref <= 0:
        raise ValueError("expansion slack must be positive")
    return _sca_bound_raw(np.asarray(v_ref), float(s_ref), ch.h_d[k], ch.q[k], energy)


class _Scaled:
    """Channel views in noise units: amplitudes / sqrt(sigma2), so the SNR
    denominator becomes 1 + v^H Gpp v."""

    def __init__(self, ch: ChannelSet, sc: Scenario, sigma_r2=None):
        s = np.sqrt(sc.sigma2)
        self.h_d = ch.h_d / s
        self.q = ch.q / s
        sr2 = sc.sigma_r2 if sigma_r2 is None else sigma_r2
        self.sigma_r2 = sr2
        self.Gpp = sr2 * ch.G_diag / sc.sigma2
        self.Hr = ch.Hr_diag

    def snr_parts(self, v, k):
        sig = abs(self.h_d[k] + np.vdot(v, self.q[k])) ** 2
        den = 1.0 + float(np.sum(np.abs(v) ** 2 * self.Gpp))
        return sig, den


def throughput_value(tau, p, v_rows, ch, sc, sigma_r2=None) -> float:
    """Sum of tau_k * log2(1 + SNR_k) evaluated from the physical formula."""
    sr2 = sc.sigma_r2 if sigma_r2 is None else sigma_r2
    total = 0.0
    for k in range(len(tau)):
        if tau[k] <= 0.0 or p[k] <= 0.0:
            continue
        sg, ng = effective_gain(v_rows[k], k, ch)
        snr = p[k] * sg / (sc.sigma2 + sr2 * ng)
        total += tau[k] * np.log1p(snr) / _LN2
    return float(total)


def tdma_throughput(sol: TdmaSolution, ch: ChannelSet, sc: Scenario) -> float:
    """Recompute the objective of a solution from first principles."""
    return throughput_value(sol.tau, sol.p, sol.v, ch, sc, sol.meta.get("sigma_r2"))


def equal_snr_time_allocation(gains, energies, t_total) -> np.ndarray:
    """Slot split making every device's received SNR identical.

    For a fixed beam and no amplification budget the stationarity condition
    of the time allocation equalizes SNRs, giving tau_k proportional to
    E_k * |h_d + v^H q_k|^2.
    """
    w = np.asarray(gains, dtype=float) * np.asarray(energies, dtype=float)
    tot = w.sum()
    if tot <= 0:
        return np.full(len(w), t_total / len(w))
    return t_total * w / tot


# ---------------------------------------------------------------------------
# joint SCA solver


def _pack(tau, S, v):
    K, N = v.shape
    x = np.empty(K * (2 * N + 2))
    for k in range(K):
        b = k * (2 * N + 2)
        x[b] = tau[k]
        x[b + 1] = S[k]
        x[b + 2 : b + 2 + N] = v[k].real
        x[b + 2 + N : b + 2 + 2 * N] = v[k].imag
    return x


def _unpack(x, K, N):
    tau = np.empty(K)
    S = np.empty(K)
    v = np.empty((K, N), dtype=complex)
    for k in range(K):
        b = k * (2 * N + 2)
        tau[k] = x[b]
        S[k] = x[b + 1]
        v[k] = x[b + 2 : b + 2 + N] + 1j * x[b + 2 + N : b + 2 + 2 * N]
    return tau, S, v


def _build_subproblem(sd: _Scaled, sc: Scenario, v_ref, s_ref, passive: bool, tau_floor: float):
    """Convex inner program for the current expansion point."""
    K, N = v_ref.shape
    dim = K * (2 * N + 2)
    blk = 2 * N + 2

    terms = []
    rows, rhs = [], []
    quads, qols = [], []

    row_sum = np.zeros(dim)
    for k in range(K):
        b = k * blk
        vi = np.arange(b + 2, b + 2 + 2 * N)
        row_sum[b] = 1.0

        s_lin = np.zeros(dim)
        s_lin[b + 1] = 1.0
        terms.append(PerspectiveTerm(tau=b, s_lin=s_lin))

        r = np.zeros(dim)
        r[b] = -1.0
        rows.append(r)
        rhs.append(-tau_floor)
        r = np.zeros(dim)
        r[b + 1] = -1.0
        rows.append(r)
        rhs.append(0.0)

        bound = _sca_bound_raw(v_ref[k], s_ref[k], sd.h_d[k], sd.q[k], sc.E[k])
        a = np.zeros(dim)
        a[b + 2 : b + 2 + N] = -bound.coef_re
        a[b + 2 + N : b + 2 + 2 * N] = -bound.coef_im
        a[b + 1] = -bound.coef_s
        bnd = bound.const - 1.0
        scale = max(1.0, abs(bnd), float(np.max(np.abs(a))))
        if passive:
            # no surface noise: the received-power condition is affine
            rows.append(a / scale)
            rhs.append(bnd / scale)
            for nn in range(N):
                quads.append(
                    QuadConstraint(
                        idx=np.array([b + 2 + nn, b + 2 + N + nn]),
                        M=np.eye(2),
                        a=np.zeros(dim),
                        b=1.0,
                    )
                )
        else:
            M = np.diag(np.concatenate([sd.Gpp, sd.Gpp])) / scale
            quads.append(QuadConstraint(idx=vi, M=M, a=a / scale, b=bnd / scale))
            Mq = np.diag(np.concatenate([sd.Hr[k], sd.Hr[k]])) * (sc.E[k] / sc.P_r)
            Rq = np.eye(2 * N) * (sd.sigma_r2 / sc.P_r)
            qols.append(QolConstraint(den=b, idx=vi, M=Mq, R=Rq, a=np.zeros(dim), b=1.0))

    rows.append(row_sum)
    rhs.append(sc.T_max)
    return BarrierProblem(
        n=dim, terms=tuple(terms), G=np.array(rows), h=np.array(rhs),
        quads=tuple(quads), qols=tuple(qols),
    )


def _tight_slack(sd: _Scaled, sc: Scenario, v_rows):
    S = np.empty(len(v_rows))
    for k in range(len(v_rows)):
        sig, den = sd.snr_parts(v_rows[k], k)
        S[k] = sc.E[k] * sig / den
    return S


def _phase_aligned(k, ch):
    # element coefficients co-phase the cascaded path with the direct one
    return np.exp(1j * (np.angle(ch.q[k]) - np.angle(ch.h_d[k])))


def _beam_scale(pattern, p, k, ch, sc, margin, sigma_r2=None):
    """Scale a unit-amplitude pattern to use `margin` of the power budget."""
    sr2 = sc.sigma_r2 if sigma_r2 is None else sigma_r2
    a2 = np.abs(pattern) ** 2
    used = p * float(np.sum(a2 * ch.Hr_diag[k])) + sr2 * float(np.sum(a2))
    if used <= 0:
        return pattern
    return np.sqrt(margin * sc.P_r / used) * pattern


def _default_inits(ch, sc, opts, passive):
    K = sc.K
    inits = []
    v0 = np.empty((K, sc.N), dtype=complex)
    for k in range(K):
        pat = _phase_aligned(k, ch)
        if passive:
            v0[k] = 0.7 * pat
        else:
            v0[k] = _beam_scale(pat, sc.E[k] * K / sc.T_max, k, ch, sc, 0.5)
    inits.append({"v": v0})
    for rix in range(1, max(1, opts.sca_restarts)):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence((opts.rng_seed, 0x7D, rix)))
        )
        vr = np.empty((K, sc.N), dtype=complex)
        for k in range(K):
            pat = np.exp(2j * np.pi * rng.random(sc.N))
            if passive:
                vr[k] = 0.7 * pat
            else:
                vr[k] = _beam_scale(pat, sc.E[k] * K / sc.T_max, k, ch, sc, 0.5)
        inits.append({"v": vr})
    return inits


def _sca_run(ch, sc, opts, init, passive=False):
    sigma_r2 = 0.0 if passive else None
    sd = _Scaled(ch, sc, sigma_r2)
    K, N = sc.K, sc.N
    tau_floor = opts.tau_floor_frac * sc.T_max
    sc = sc  # readability

    v = np.array(init["v"], dtype=complex).copy()
    tau = np.array(init.get("tau", np.full(K, sc.T_max / K)), dtype=float) * (1.0 - 1e-9)
    tau = np.maximum(tau, 2.0 * tau_floor)
    if tau.sum() >= sc.T_max:
        tau *= (1.0 - 1e-9) * sc.T_max / tau.sum()

    if not passive:
        for k in range(K):  # keep the start strictly inside the power budget
            mu = amplification_power(v[k], sc.E[k] / tau[k], k, ch, sc.sigma_r2)
            if mu >= (1.0 - 1e-6) * sc.P_r:
                v[k] *= np.sqrt((1.0 - 1e-6) * sc.P_r / mu)

    S = _tight_slack(sd, sc, v) * (1.0 - 1e-3)
    obj = throughput_value(tau, np.asarray(sc.E) / tau, v, ch, sc, sigma_r2)
    trace = [obj]
    statuses = []

    for _ in range(opts.sca_max_iter):
        prob = _build_subproblem(sd, sc, v, S, passive, tau_floor)
        res = solve_barrier(prob, _pack(tau, S, v), opts)
        statuses.append(res.status)
        tau_n, S_n, v_n = _unpack(res.x, K, N)
        obj_n = throughput_value(tau_n, np.asarray(sc.E) / tau_n, v_n, ch, sc, sigma_r2)
        if obj_n <= obj + 1e-12 * max(1.0, abs(obj)):
            break
        gain = (obj_n - obj) / max(abs(obj), 1e-12)
        tau, v = tau_n, v_n
        S = _tight_slack(sd, sc, v) * (1.0 - 1e-3)
        obj = obj_n
        trace.append(obj)
        if gain < opts.sca_tol:
            break

    # spend the whole period: scaling all slots up (energies fixed) only helps
    scale = sc.T_max / tau.sum()
    if scale > 1.0:
        tau = tau * scale
    p = np.asarray(sc.E) / tau
    S = _tight_slack(sd, sc, v)
    obj_final = throughput_value(tau, p, v, ch, sc, sigma_r2)
    if obj_final > trace[-1]:
        trace.append(obj_final)

    amp_res = max(
        amplification_power(v[k], p[k], k, ch, sc.sigma_r2 if not passive else 0.0) - sc.P_r
        for k in range(K)
    )
    return TdmaSolution(
        tau=tau,
        p=p,
        v=v,
        S=S,
        objective=float(obj_final),
        trace=trace,
        residuals={
            "time": float(tau.sum() - sc.T_max),
            "amplification": float(amp_res),
            "energy": float(np.max(np.abs(tau * p - np.asarray(sc.E)) / np.asarray(sc.E))),
        },
        status="ok",
        meta={
            "barrier_statuses": statuses,
            "sigma_r2": sigma_r2,
            "passive": passive,
        },
    )


def solve_tdma(
    ch: ChannelSet,
    sc: Scenario,
    opts: SolverOptions | None = None,
    extra_inits=(),
) -> TdmaSolution:
    """Maximize the time-division sum throughput (per-device beams).

    Runs the inner-convexification loop from a phase-aligned start plus
    sca_restarts-1 random restarts (and any caller-supplied warm starts in
    `extra_inits`, each a dict with key "v" (K, N) and optional "tau"),
    keeping the best run.  The returned solution depletes every energy
    budget exactly (p_k = E_k / tau_k).
    """
    opts = opts or DEFAULT_OPTIONS
    runs = [_sca_run(ch, sc, opts, init) for init in _default_inits(ch, sc, opts, False)]
    for init in extra_inits:
        runs.append(_sca_run(ch, sc, opts, init))
    best = max(runs, key=lambda s: s.objective)
    best.meta["n_runs"] = len(runs)
    return best


def solve_passive_tdma(ch, sc, opts=None, extra_inits=()) -> TdmaSolution:
    """Unit-modulus baseline: |v_n| <= 1 during the convex loop, projected to
    |v_n| = 1 afterwards, with no surface noise anywhere.

    The final time split is the equal-SNR closed form (no amplification
    budget couples the slots once beams are fixed).
    """
    opts = opts or DEFAULT_OPTIONS
    runs = [_sca_run(ch, sc, opts, init, passive=True)
            for init in _default_inits(ch, sc, opts, True)]
    for init in extra_inits:
        runs.append(_sca_run(ch, sc, opts, init, passive=True))
    sol = max(runs, key=lambda s: s.objective)

    K, N = sc.K, sc.N
    v = sol.v.copy()
    for k in range(K):
        mags = np.abs(v[k])
        fallback = _phase_aligned(k, ch)
        unit = np.where(mags > 1e-12, v[k] / np.where(mags > 0, mags, 1.0), fallback)
        v[k] = unit
    gains = np.array([effective_gain(v[k], k, ch)[0] for k in range(K)])
    tau = equal_snr_time_allocation(gains, sc.E, sc.T_max)
    p = np.asarray(sc.E) / tau
    obj = throughput_value(tau, p, v, ch, sc, 0.0)
    if obj > sol.trace[-1]:
        sol.trace.append(obj)
    return TdmaSolution(
        tau=tau, p=p, v=v, S=gains * np.asarray(sc.E),
        objective=float(obj), trace=sol.trace,
        residuals={
            "time": float(tau.sum() - sc.T_max),
            "unit_modulus": float(np.max(np.abs(np.abs(v) - 1.0))),
            "energy": 0.0,
        },
        status="ok",
        meta={"sigma_r2": 0.0, "passive": True, "n_runs": len(runs)},
    )


# ---------------------------------------------------------------------------
# shared-beam variant (one beam, per-device slots and budgets)


def _time_energy_shared(v, ch, sc, opts):
    """Exact convex step over (tau, e) for a fixed shared beam."""
    sd = _Scaled(ch, sc)
    K = sc.K
    tau_floor = opts.tau_floor_frac * sc.T_max
    gamma = np.empty(K)
    vhv = np.empty(K)
    for k in range(K):
        sig, den = sd.snr_parts(v, k)
        gamma[k] = sig / den
        vhv[k] = float(np.sum(np.abs(v) ** 2 * ch.Hr_diag[k]))
    v2 = float(np.sum(np.abs(v) ** 2))

    dim = 2 * K  # tau then e
    terms = []
    rows, rhs = [], []
    for k in range(K):
        s_lin = np.zeros(dim)
        s_lin[K + k] = gamma[k]
        terms.append(PerspectiveTerm(tau=k, s_lin=s_lin))
        r = np.zeros(dim)
        r[k] = -1.0
        rows.append(r)
        rhs.append(-tau_floor)
        r = np.zeros(dim)
        r[K + k] = -1.0
        rows.append(r)
        rhs.append(0.0)
        r = np.zeros(dim)
        r[K + k] = 1.0
        rows.append(r)
        rhs.append(sc.E[k])
        # amplification budget per device, affine after e = tau * p
        r = np.zeros(dim)
        r[K + k] = vhv[k] / sc.P_r
        r[k] = (sc.sigma_r2 * v2 - sc.P_r) / sc.P_r
        rows.append(r)
        rhs.append(0.0)
    r = np.zeros(dim)
    r[:K] = 1.0
    rows.append(r)
    rhs.append(sc.T_max)
    prob = BarrierProblem(n=dim, terms=tuple(terms), G=np.array(rows), h=np.array(rhs))

    x0 = np.empty(dim)
    x0[:K] = sc.T_max / (K + 1)
    for k in range(K):
        cap = x0[k] * (sc.P_r - sc.sigma_r2 * v2) / max(vhv[k], 1e-300)
        x0[K + k] = max(min(0.5 * sc.E[k], 0.5 * cap), 1e-300)
    res = solve_barrier(prob, x0, opts)
    return res.x[:K].copy(), res.x[K:].copy()


def solve_tdma_single_beam(
    ch: ChannelSet,
    sc: Scenario,
    opts: SolverOptions | None = None,
    v_init: np.ndarray | None = None,
) -> TdmaSolution:
    """Shared-beam time-division bound: one beam for all devices, per-device
    slots, and a per-device amplification budget.

    Alternates an exact convex (tau, e) step with the shared-beam SDP step;
    the beam update maximizes the sum-of-SNRs surrogate, so it is accepted
    only when the true objective improves (the loop stays monotone).
    """
    from .noma import beamforming_step  # deferred: avoids import cycle

    opts = opts or DEFAULT_OPTIONS
    K = sc.K
    if v_init is not None:
        v = np.asarray(v_init, dtype=complex).copy()
        mu = max(
            amplification_power(v, sc.E[k] * K / sc.T_max, k, ch, sc.sigma_r2)
            for k in range(K)
        )
        if mu >= sc.P_r:
            v *= np.sqrt(0.9 * sc.P_r / mu)
    else:
        p_nom = np.asarray(sc.E) * K / sc.T_max
        cands = []
        for k in range(K):
            pat = _phase_aligned(k, ch)
            worst = max(
                float(p_nom[j] * np.sum(np.abs(pat) ** 2 * ch.Hr_diag[j]))
                + sc.sigma_r2 * float(np.sum(np.abs(pat) ** 2))
                for j in range(K)
            )
            vk = np.sqrt(0.5 * sc.P_r / worst) * pat if worst > 0 else pat
            tau_eq = np.full(K, sc.T_max / K)
            cands.append(
                (throughput_value(tau_eq, p_nom, np.tile(vk, (K, 1)), ch, sc), vk)
            )
        v = max(cands, key=lambda c: c[0])[1]

    tau, e = _time_energy_shared(v, ch, sc, opts)
    obj = throughput_value(tau, e / tau, np.tile(v, (K, 1)), ch, sc)
    trace = [obj]
    rank_exact_all = True

    for _ in range(opts.ao_max_iter):
        p = e / tau
        v_new, exact = beamforming_step(p, ch, sc, opts, per_device_budget=True)
        rank_exact_all &= exact
        tau_n, e_n = _time_energy_shared(v_new, ch, sc, opts)
        obj_n = throughput_value(tau_n, e_n / tau_n, np.tile(v_new, (K, 1)), ch, sc)
        if obj_n <= obj + 1e-12 * max(1.0, abs(obj)):
            break
        gain = (obj_n - obj) / max(abs(obj), 1e-12)
        v, tau, e, obj = v_new, tau_n, e_n, obj_n
        trace.append(obj)
        if gain < opts.ao_tol:
            break

    scale = sc.T_max / tau.sum()
    if scale > 1.0:
        tau = tau * scale
    p = e / tau
    obj_final = throughput_value(tau, p, np.tile(v, (K, 1)), ch, sc)
    if obj_final > trace[-1]:
        trace.append(obj_final)
    amp_res = max(
        amplification_power(v, p[k], k, ch, sc.sigma_r2) - sc.P_r for k in range(K)
    )
    sd = _Scaled(ch, sc)
    return TdmaSolution(
        tau=tau,
        p=p,
        v=np.tile(v, (K, 1)),
        S=_tight_slack(sd, sc, np.tile(v, (K, 1))),
        objective=float(obj_final),
        trace=trace,
        residuals={
            "time": float(tau.sum() - sc.T_max),
            "amplification": float(amp_res),
            "energy": float(np.max((tau * p - np.asarray(sc.E)) / np.asarray(sc.E))),
        },
        status="ok",
        meta={"shared_beam": True, "sdp_rank_exact": rank_exact_all},
    )


def shared_beam_relaxed(ch, sc, opts=None, relax_factor=1e6):
    """Shared-beam optimum with the amplification budget effectively removed
    (budget inflated by relax_factor)."""
    return solve_tdma_single_beam(ch, sc.with_(P_r=sc.P_r * relax_factor), opts)


def tdma_dominance_condition(ch, sc, opts=None, relaxed=None):
    """Check whether the relaxed shared-beam optimum already satisfies every
    device's amplification budget at the true P_r.

    When it holds, the time-division optimum provably reaches at least the
    simultaneous-access optimum.  Returns (holds, relaxed_solution).
    """
    opts = opts or DEFAULT_OPTIONS
    if relaxed is None:
        relaxed = shared_beam_relaxed(ch, sc, opts)
    v = relaxed.v[0]
    worst = max(
        amplification_power(v, relaxed.p[k], k, ch, sc.sigma_r2) for k in range(sc.K)
    )
    return bool(worst <= sc.P_r * (1.0 + 1e-8)), relaxed
