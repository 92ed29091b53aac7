"""Brute-force ground truth for tiny instances.

These graders never share code with the production solvers beyond the
channel data structures (the simultaneous-access grids reuse the exact
knapsack, which is itself validated here against vertex enumeration).
Grids scale whole unit-modulus phase patterns, so they bound the optimum
from below; acceptance checks are one-sided (production >= grid - slack).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .channels import ChannelSet, Scenario
from .convex import DEFAULT_OPTIONS, KnapsackLp, SdpProblem, solve_knapsack, solve_sdp

__all__ = [
    "GridSpec",
    "GridTooLargeError",
    "brute_force",
    "vertex_enumerate_lp",
    "dinkelbach_beam_ratio",
]

_LN2 = np.log(2.0)


class GridTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    phase_levels: int = 16
    amplitude_levels: int = 10
    time_levels: int = 20
    max_grid: float = 1e8

    def check(self, N: int, K: int, slots: int):
        total = self.phase_levels**N * self.amplitude_levels * self.time_levels ** max(
            slots - 1, 1
        )
        if total > self.max_grid:
            raise GridTooLargeError(f"grid of {total:.2e} points refused")


def _phase_patterns(N: int, levels: int) -> np.ndarray:
    """All beam-convention unit patterns with phases on a uniform grid."""
    ph = 2.0 * np.pi * np.arange(levels) / levels
    cols = np.meshgrid(*([ph] * N), indexing="ij")
    ang = np.stack([c.ravel() for c in cols], axis=1)
    return np.exp(1j * ang)


def _compositions(total_levels: int, slots: int):
    """Positive integer splits of the time grid among slots."""
    if slots == 1:
        yield (total_levels,)
        return
    for first in range(1, total_levels - slots + 2):
        for rest in _compositions(total_levels - first, slots - 1):
            yield (first,) + rest


def _best_tdma_rate(k, tau, ch, sc, W, amp_levels):
    """Best tau*log2(1+SNR) for device k at slot length tau, over the grid."""
    p = sc.E[k] / tau
    hr_load = float(np.sum(ch.Hr_diag[k]))  # unit patterns: pattern-independent
    g_load = float(np.sum(ch.G_diag))
    a_max = np.sqrt(sc.P_r / (p * hr_load + sc.sigma_r2 * ch.N))
    alphas = a_max * np.arange(amp_levels + 1) / amp_levels
    cw = W.conj() @ ch.q[k]  # (P,)
    sig = np.abs(ch.h_d[k] + np.outer(alphas, cw)) ** 2  # (A+1, P)
    den = sc.sigma2 + sc.sigma_r2 * (alphas**2) * g_load  # (A+1,)
    snr = p * sig / den[:, None]
    return float(tau * np.log1p(snr.max()) / _LN2)


def _group_rate_over_alphas(group, tau, ch, sc, W, alphas):
    u = np.array([sc.E[k] / tau for k in group])
    g_load = float(np.sum(ch.G_diag))
    cw = np.stack([W.conj() @ ch.q[k] for k in group])  # (Kg, P)
    hr_loads = np.array([float(np.sum(ch.Hr_diag[k])) for k in group])
    hd = np.asarray([ch.h_d[k] for k in group])[:, None]
    best, best_alpha = 0.0, 0.0
    for alpha in alphas:
        budget = sc.P_r - sc.sigma_r2 * alpha**2 * ch.N
        if budget < 0:
            continue
        den = sc.sigma2 + sc.sigma_r2 * alpha**2 * g_load
        a_vec = alpha**2 * hr_loads
        sig = np.abs(hd + alpha * cw) ** 2  # (Kg, P)
        for pi in range(W.shape[0]):
            pw = solve_knapsack(KnapsackLp(c=sig[:, pi], a=a_vec, u=u, b=budget))
            snr = float(pw @ sig[:, pi]) / den
            val = tau * np.log1p(snr) / _LN2
            if val > best:
                best, best_alpha = val, alpha
    return float(best), float(best_alpha)


def _best_group_rate(group, tau, ch, sc, W, amp_levels):
    """Best simultaneous rate of `group` in a slot of length tau; powers come
    from the exact knapsack at each grid beam.

    The beam amplitude trades against the power budget, so the scan is
    geometric between the full-power binding amplitude and the no-power cap,
    then linearly refined around the coarse winner.
    """
    if sc.sigma_r2 <= 0.0:
        raise ValueError("simultaneous grids need a positive surface noise power")
    a_cap = np.sqrt(sc.P_r / (sc.sigma_r2 * ch.N))
    full_load = sc.sigma_r2 * ch.N + sum(
        sc.E[k] / tau * float(np.sum(ch.Hr_diag[k])) for k in group
    )
    a_lo = np.sqrt(sc.P_r / full_load) / 4.0
    coarse = np.concatenate(
        [[0.0], np.geomspace(min(a_lo, a_cap / 2), a_cap, amp_levels)]
    )
    best, alpha0 = _group_rate_over_alphas(group, tau, ch, sc, W, coarse)
    if alpha0 > 0.0:
        step = np.sqrt(max(coarse[2] / coarse[1], 1.0 + 1e-9))
        fine = np.linspace(alpha0 / step, min(alpha0 * step, a_cap), amp_levels)
        val, _ = _group_rate_over_alphas(group, tau, ch, sc, W, fine)
        best = max(best, val)
    return best


def brute_force(ch: ChannelSet, sc: Scenario, scheme: str, grid: GridSpec | None = None,
                grouping=None):
    """Exhaustive lower-bound optimum for one scheme on a tiny instance.

    scheme is "tdma", "noma", or "hybrid" (the latter needs a grouping).
    Time-division powers deplete the budget (p = E / tau); simultaneous
    powers come from the knapsack at each candidate beam.  Returns
    (objective, info dict).
    """
    grid = grid or GridSpec()
    K, N = sc.K, sc.N
    if scheme == "tdma":
        slots = [(k,) for k in range(K)]
    elif scheme == "noma":
        slots = [tuple(range(K))]
    elif scheme == "hybrid":
        if grouping is None:
            raise ValueError("hybrid grading needs a grouping")
        slots = [tuple(g) for g in grouping.groups]
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    grid.check(N, K, len(slots))
    W = _phase_patterns(N, grid.phase_levels)

    L = len(slots)
    if L == 1:
        group = slots[0]
        if len(group) == 1:
            val = _best_tdma_rate(group[0], sc.T_max, ch, sc, W, grid.amplitude_levels)
        else:
            val = _best_group_rate(group, sc.T_max, ch, sc, W, grid.amplitude_levels)
        return val, {"tau": (sc.T_max,)}

    # tabulate each slot's best rate on the slot-duration grid, then search
    # the simplex of time compositions
    tl = grid.time_levels
    tau_values = sc.T_max * np.arange(1, tl + 1) / tl
    tables = []
    for group in slots:
        row = np.empty(tl)
        for i, tau in enumerate(tau_values):
            if len(group) == 1:
                row[i] = _best_tdma_rate(group[0], tau, ch, sc, W, grid.amplitude_levels)
            else:
                row[i] = _best_group_rate(group, tau, ch, sc, W, grid.amplitude_levels)
        tables.append(row)

    best = -np.inf
    best_comp = None
    for comp in _compositions(tl, L):
        val = sum(tables[l][comp[l] - 1] for l in range(L))
        if val > best:
            best = val
            best_comp = comp
    return float(best), {"tau": tuple(sc.T_max * c / tl for c in best_comp)}


def vertex_enumerate_lp(prob: KnapsackLp):
    """Exact knapsack optimum by enumerating basic feasible points (each
    variable at 0, its box bound, or absorbing the leftover budget)."""
    K = len(prob.c)
    if K > 10:
        raise ValueError("vertex enumeration limited to 10 variables")
    best_val, best_p = 0.0, np.zeros(K)
    for pattern in product((0, 1), repeat=K):
        base = np.where(np.array(pattern) == 1, prob.u, 0.0)
        for frac in (-1, *range(K)):
            p = base.copy()
            if frac >= 0:
                if pattern[frac] == 1:
                    continue
                others = float(np.sum(np.delete(p * prob.a, frac)))
                if prob.a[frac] == 0:
                    continue
                room = (prob.b - others) / prob.a[frac]
                p[frac] = min(max(room, 0.0), prob.u[frac])
            if float(p @ prob.a) <= prob.b * (1 + 1e-12) + 1e-300:
                val = float(p @ prob.c)
                if val > best_val:
                    best_val, best_p = val, p
    return best_val, best_p


def dinkelbach_beam_ratio(p, ch: ChannelSet, sc: Scenario, tol: float = 1e-7,
                          opts=None) -> float:
    """Fractional-programming cross-check of the lifted beam SDP.

    Bisects the ratio value lam, solving at each lam a linear SDP over the
    rank-relaxed beam matrix with the corner pinned to one; independent of
    the corner-normalized production path.
    """
    opts = opts or DEFAULT_OPTIONS
    N = ch.N
    s = np.sqrt(sc.sigma2)
    gpp = sc.sigma_r2 * ch.G_diag / sc.sigma2
    Q = np.zeros((N + 1, N + 1), dtype=complex)
    for k in range(ch.K):
        qbar = np.concatenate([ch.q[k], [ch.h_d[k]]]) / s
        Q += p[k] * np.outer(qbar, qbar.conj())
    Gbar = np.diag(np.concatenate([gpp, [0.0]])).astype(complex)
    corner = np.zeros((N + 1, N + 1), dtype=complex)
    corner[N, N] = 1.0
    load = np.zeros(N + 1)
    for k in range(ch.K):
        load[:N] += p[k] * ch.Hr_diag[k]
    load[:N] += sc.sigma_r2
    budget = (np.diag(load).astype(complex), sc.P_r)

    def excess(lam):
        prob = SdpProblem(
            C=Q - lam * Gbar,
            equalities=((corner, 1.0),),
            inequalities=(budget,),
            maximize=True,
        )
        return solve_sdp(prob, opts).objective - lam

    lo, hi = 0.0, 1.0
    while excess(hi) > 0:
        hi *= 4.0
        if hi > 1e18:
            raise RuntimeError("ratio bisection failed to bracket")
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
