"""Small dense Hermitian SDPs solved by a dual log-barrier Newton method.

Problems are stated over one Hermitian PSD matrix variable X:

    max/min  <C, X>
    s.t.     <A_i, X> =  b_i            (equalities)
             <B_j, X> <= c_j            (inequalities)
             X PSD,

with <A, X> = Tr(A X).  The number of constraints is assumed small (a few
dozen at most), so Newton runs on the dual variables: the dual barrier

    t * (b.y + c.z) - logdet(S) - sum_j log z_j,
    S = sum_i y_i A_i + sum_j z_j B_j - C,

has an (m+p)-dimensional Hessian, and the primal iterate on the central
path is recovered as X = inv(S) / t with duality gap (n + p) / t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .options import DEFAULT_OPTIONS, SolverOptions

__all__ = [
    "SdpProblem",
    "SdpResult",
    "SdpInfeasibleError",
    "SdpUnboundedError",
    "solve_sdp",
    "extract_rank_one",
]


class SdpInfeasibleError(RuntimeError):
    """No strictly feasible dual point exists (primal unbounded or ill-posed)."""


class SdpUnboundedError(RuntimeError):
    """The objective is unbounded over the feasible set."""


@dataclass(frozen=True)
class SdpProblem:
    C: np.ndarray
    equalities: tuple = ()      # ((A_i, b_i), ...)
    inequalities: tuple = ()    # ((B_j, c_j), ...)
    maximize: bool = True


@dataclass
class SdpResult:
    X: np.ndarray
    objective: float
    status: str                 # "optimal" | "max_iter"
    gap: float                  # certified relative duality gap
    iterations: int
    info: dict = field(default_factory=dict)


def _herm(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def _logdet_psd(S: np.ndarray) -> float:
    L = np.linalg.cholesky(S)  # LinAlgError if not PD
    return 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))


def _newton(mat_stack, C, cost, pos_idx, u, t, opts, budget, stop_when=None, limit_alpha=None):
    """Damped Newton for f(u) = t*cost.u - logdet(S(u)) - sum log u[pos].

    Converged means the gradient is small enough that the recovered primal
    iterate inv(S)/t carries constraint residuals below ~1e-9 in the
    equilibrated units.  Returns (u, n_iters, status) with status in
    {"converged", "budget", "stall", "stopped"}.
    """
    grad_tol = 1e-9 * max(t, 1.0) * max(1.0, float(np.max(np.abs(cost))) if len(cost) else 1.0)

    def S_of(v):
        return _herm(np.tensordot(v, mat_stack, axes=1) - C)

    def f_of(v):
        if pos_idx.size and np.any(v[pos_idx] <= 0):
            return None
        try:
            ld = _logdet_psd(S_of(v))
        except np.linalg.LinAlgError:
            return None
        out = t * float(cost @ v) - ld
        if pos_idx.size:
            out -= float(np.sum(np.log(v[pos_idx])))
        return out

    fval = f_of(u)
    if fval is None:
        raise SdpInfeasibleError("Newton started at an infeasible dual point")

    it = 0
    best_u, best_g = u, np.inf
    no_improve = 0
    while it < min(budget, 120):
        S = S_of(u)
        Sinv = _herm(np.linalg.inv(S))
        W = np.einsum("ij,ajk->aik", Sinv, mat_stack)
        g = t * cost - np.real(np.einsum("aii->a", W))
        if pos_idx.size:
            g[pos_idx] -= 1.0 / u[pos_idx]
        g_eff = np.abs(g)
        if pos_idx.size:
            # a nonnegative dual whose barrier force dwarfs its gradient sits
            # safely inside its constraint; its residual is harmless
            harmless = g_eff[pos_idx] <= 0.1 / u[pos_idx]
            g_eff[pos_idx] = np.where(harmless, 0.0, g_eff[pos_idx])
        gnorm = float(np.max(g_eff))
        if gnorm <= grad_tol:
            return u, it, "converged", gnorm

        H = np.real(np.einsum("aij,bji->ab", W, W, optimize=True))
        if pos_idx.size:
            H[pos_idx, pos_idx] += 1.0 / u[pos_idx] ** 2

        ridge = 0.0
        base = max(np.max(np.diag(H)), 1e-30)
        while True:
            try:
                d = np.linalg.solve(H + ridge * np.eye(len(H)), -g)
                lam2 = float(-g @ d)
                if lam2 >= -1e-12 * max(1.0, abs(fval)):
                    break
            except np.linalg.LinAlgError:
                pass
            ridge = max(ridge * 100.0, 1e-14 * base)
            if ridge > 1e6 * base:
                return best_u, it, "stall", best_g
        lam2 = max(lam2, 0.0)

        # the decrement is scale-free for this barrier family; a small value
        # marks the quadratic endgame where a gradient plateau means the
        # float-evaluation floor has been reached
        quadratic_phase = lam2 <= 0.15
        if gnorm < best_g:
            if gnorm < 0.5 * best_g:
                no_improve = 0
            best_u, best_g = u, gnorm
        elif quadratic_phase:
            no_improve += 1
        if quadratic_phase and no_improve >= 4:
            return best_u, it, "converged", best_g

        slope = float(g @ d)
        alpha = 1.0
        if pos_idx.size:
            # fraction-to-the-boundary damping for the nonnegative duals
            dz = d[pos_idx]
            neg = dz < 0
            if np.any(neg):
                alpha = min(alpha, 0.99 * float(np.min(-u[pos_idx][neg] / dz[neg])))
        if limit_alpha is not None:
            alpha = min(alpha, limit_alpha(u, d))
        if alpha <= 0.0:
            return best_u, it, "stall", best_g
        alpha_floor = opts.min_step * alpha
        while alpha >= alpha_floor:
            fn = f_of(u + alpha * d)
            if fn is not None and fn <= fval + 0.25 * alpha * slope:
                break
            alpha *= 0.5
        else:
            return best_u, it, "stall", best_g

        u = u + alpha * d
        fval = fn
        it += 1
        if stop_when is not None and stop_when(u):
            return u, it, "stopped", gnorm
    return best_u, it, "budget", best_g


def _barrier_path(mat_stack, C, cost, pos_idx, u0, n_bar, opts, budget,
                  stop_when=None, limit_alpha=None, diverge_guard=False):
    """Outer barrier loop; returns (u, t, iters_used, status).

    The duality-gap certificate n_bar / t is only honored after Newton has
    converged at the current t; a stalled inner solve ends the path with
    the best iterate and status "stall".
    """
    t = 1.0
    u = u0
    used = 0
    best = None  # (quality, u, t) with quality = gap + miscentering, both in dual units
    for _ in range(60):
        u, it, status, gnorm = _newton(
            mat_stack, C, cost, pos_idx, u, t, opts, budget - used, stop_when, limit_alpha
        )
        used += it
        if status == "stopped":
            return u, t, used, "stopped"
        quality = (n_bar + gnorm) / t
        if best is None or quality < best[0]:
            best = (quality, u, t)
        if status == "budget" or used >= budget:
            return best[1], best[2], used, "max_iter"
        if status == "stall":
            return best[1], best[2], used, "stall"
        if diverge_guard and np.max(np.abs(u)) > 1e13:
            raise SdpInfeasibleError(
                "dual iterate diverging; the primal problem is likely infeasible"
            )
        gap = n_bar / t
        if gap <= opts.tol_gap * (1.0 + abs(float(cost @ u))) and quality <= 4.0 * best[0]:
            return u, t, used, "optimal"
        if quality > 100.0 * best[0] or t > 1e10:
            # past the accuracy double precision can deliver; keep the best point
            return best[1], best[2], used, "stall"
        t *= opts.barrier_growth
    return best[1], best[2], used, "stall"


def _project_feasible(X, mat_stack, cost, m, p):
    """Least-norm correction restoring equalities (and any violated
    inequalities) to machine precision; the correction is O(residual) so the
    interior iterate stays PSD."""
    for _ in range(2):
        active = list(range(m))
        targets = [cost[i] for i in range(m)]
        for j in range(p):
            val = float(np.real(np.trace(mat_stack[m + j] @ X)))
            if val > cost[m + j]:
                active.append(m + j)
                targets.append(cost[m + j])
        if not active:
            return X
        resid = np.array(
            [targets[a] - float(np.real(np.trace(mat_stack[i] @ X)))
             for a, i in enumerate(active)]
        )
        if np.max(np.abs(resid)) < 1e-300:
            return X
        gram = np.real(
            np.einsum("aij,bji->ab", mat_stack[active], mat_stack[active])
        )
        try:
            mu = np.linalg.solve(gram + 1e-14 * np.eye(len(active)), resid)
        except np.linalg.LinAlgError:
            return X
        X = _herm(X + np.tensordot(mu, mat_stack[active], axes=1))
    return X


def solve_sdp(problem: SdpProblem, opts: SolverOptions | None = None) -> SdpResult:
    """Solve a small dense Hermitian SDP to relative gap tol_gap.

    Raises SdpInfeasibleError when no strictly feasible dual point can be
    found (phase 1 fails) and SdpUnboundedError for a detectably unbounded
    objective.  When the Newton budget runs out the best iterate is
    returned with status "max_iter".
    """
    opts = opts or DEFAULT_OPTIONS
    C0 = _herm(np.asarray(problem.C, dtype=complex))
    n = C0.shape[0]
    if C0.shape != (n, n):
        raise ValueError("C must be square")
    sign = 1.0 if problem.maximize else -1.0

    A_list, b_list, B_list, c_list = [], [], [], []
    for A, b in problem.equalities:
        A = _herm(np.asarray(A, dtype=complex))
        if A.shape != (n, n):
            raise ValueError("equality constraint matrix has wrong shape")
        s = max(np.linalg.norm(A), 1e-300)
        A_list.append(A / s)
        b_list.append(float(b) / s)
    for B, c in problem.inequalities:
        B = _herm(np.asarray(B, dtype=complex))
        if B.shape != (n, n):
            raise ValueError("inequality constraint matrix has wrong shape")
        s = max(np.linalg.norm(B), 1e-300)
        B_list.append(B / s)
        c_list.append(float(c) / s)

    m, p = len(A_list), len(B_list)
    gamma0 = max(np.linalg.norm(C0), 1.0)
    C = sign * C0 / gamma0

    if m + p == 0:
        lam_max = float(np.linalg.eigvalsh(C)[-1])
        if lam_max > 1e-14:
            raise SdpUnboundedError("unconstrained SDP with indefinite objective")
        return SdpResult(np.zeros((n, n), complex), 0.0, "optimal", 0.0, 0)

    mat_stack = np.stack(A_list + B_list)
    cost = np.array(b_list + c_list, dtype=float)
    pos_idx = np.arange(m, m + p)
    n_bar = n + p

    # strictly feasible dual start: try y = 0, z = 1, else run phase 1
    u = np.zeros(m + p)
    u[m:] = 1.0
    S0 = _herm(np.tensordot(u, mat_stack, axes=1) - C)
    used = 0
    try:
        np.linalg.cholesky(S0 - 1e-8 * np.eye(n))
    except np.linalg.LinAlgError:
        s0 = -float(np.linalg.eigvalsh(S0)[0]) + 1.0
        stack1 = np.concatenate([mat_stack, np.eye(n, dtype=complex)[None]], axis=0)
        cost1 = np.zeros(m + p + 1)
        cost1[-1] = 1.0

        def _cap_s(v, d):
            # never drive the infeasibility slack far past -1: a mildly
            # negative slack is a usable phase-2 start, a huge step is not
            if d[-1] >= 0.0 or v[-1] <= -1.0:
                return 1.0
            return min(1.0, (-1.0 - v[-1]) / d[-1])

        u1 = np.concatenate([u, [s0]])
        u1, _, used, status = _barrier_path(
            stack1, C, cost1, pos_idx, u1, n_bar, opts, opts.max_iter,
            stop_when=lambda v: v[-1] < -1e-6, limit_alpha=_cap_s,
        )
        if u1[-1] >= -1e-12:
            raise SdpInfeasibleError(
                "phase 1 found no strictly feasible dual point; primal is "
                "unbounded or the constraint set has empty interior"
            )
        u = u1[:-1]

    u, t, it2, status = _barrier_path(
        mat_stack, C, cost, pos_idx, u, n_bar, opts, opts.max_iter - used,
        diverge_guard=True,
    )
    used += it2

    S = _herm(np.tensordot(u, mat_stack, axes=1) - C)
    X = _herm(np.linalg.inv(S) / t)
    X = _project_feasible(X, mat_stack, cost, m, p)
    dual_scaled = float(cost @ u)
    gap = n_bar / t / (1.0 + abs(dual_scaled))
    objective = float(np.real(np.trace(C0 @ X)))

    eq_res = max(
        (abs(float(np.real(np.trace(mat_stack[i] @ X))) - cost[i]) for i in range(m)),
        default=0.0,
    )
    ineq_res = max(
        (float(np.real(np.trace(mat_stack[m + j] @ X))) - cost[m + j] for j in range(p)),
        default=0.0,
    )
    out_status = "optimal" if status == "optimal" or gap <= opts.tol_gap else "max_iter"
    return SdpResult(
        X=X,
        objective=objective,
        status=out_status,
        gap=gap,
        iterations=used,
        info={
            "dual": u,
            "t": t,
            "eq_residual": eq_res,
            "ineq_residual": max(ineq_res, 0.0),
            "compl_slack": n_bar / t,
            "objective_scale": gamma0,
        },
    )


def extract_rank_one(X: np.ndarray, opts: SolverOptions | None = None):
    """Dominant eigenpair factor of a PSD matrix.

    Returns (v, exact) with v = sqrt(lam_max) * u_max; exact is True when
    lam_max / Tr(X) reaches the rank-one ratio threshold (the zero matrix
    counts as exactly rank one).
    """
    opts = opts or DEFAULT_OPTIONS
    X = _herm(np.asarray(X, dtype=complex))
    n = X.shape[0]
    tr = float(np.real(np.trace(X)))
    if np.linalg.norm(X) == 0.0:
        return np.zeros(n, dtype=complex), True
    if tr <= 0.0:
        return np.zeros(n, dtype=complex), False
    w, U = np.linalg.eigh(X)
    lam = max(float(w[-1]), 0.0)
    v = np.sqrt(lam) * U[:, -1]
    return v, bool(lam / tr >= opts.rank_one_ratio)
