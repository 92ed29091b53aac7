"""Log-barrier Newton solver for concave perspective-function programs.

The problem family covers every time/power subproblem in this package:

    max  sum_l  x[tau_l] * log2(1 + S_l(x) / x[tau_l]),   S_l(x) = w_l.x + w0_l
    s.t. G x <= h                                   (affine rows)
         x[idx]' M x[idx] + a.x <= b                (convex quadratic, M PSD)
         (x[idx]' M x[idx]) / x[den]
             + x[idx]' R x[idx] + a.x <= b          (quadratic-over-linear)

Quadratic-over-linear terms are jointly convex for x[den] > 0; callers must
bound x[den] away from zero with an affine floor row.  The solver follows
the standard barrier path (t starting at 1, growing by a fixed factor,
backtracking line search with parameters 0.25 / 0.5) from a strictly
feasible start.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .options import DEFAULT_OPTIONS, SolverOptions

__all__ = [
    "PerspectiveTerm",
    "QuadConstraint",
    "QolConstraint",
    "BarrierProblem",
    "BarrierResult",
    "InfeasibleStartError",
    "solve_barrier",
]

_LN2 = np.log(2.0)


class InfeasibleStartError(ValueError):
    """The supplied start point is not strictly feasible."""


@dataclass(frozen=True)
class PerspectiveTerm:
    tau: int                  # index of the slot-duration coordinate
    s_lin: np.ndarray         # dense (n,) weights of the numerator
    s_const: float = 0.0


@dataclass(frozen=True)
class QuadConstraint:
    idx: np.ndarray           # coordinates entering the quadratic form
    M: np.ndarray             # (d, d) PSD
    a: np.ndarray             # dense (n,) linear part
    b: float


@dataclass(frozen=True)
class QolConstraint:
    den: int                  # index of the positive denominator coordinate
    idx: np.ndarray
    M: np.ndarray             # (d, d) PSD, divided by x[den]
    R: np.ndarray             # (d, d) PSD, not divided
    a: np.ndarray
    b: float


@dataclass(frozen=True)
class BarrierProblem:
    n: int
    terms: tuple              # PerspectiveTerm...
    G: np.ndarray             # (ma, n) affine rows
    h: np.ndarray             # (ma,)
    quads: tuple = ()
    qols: tuple = ()

    @property
    def n_constraints(self) -> int:
        return len(self.h) + len(self.quads) + len(self.qols)


@dataclass
class BarrierResult:
    x: np.ndarray
    objective: float
    status: str               # "optimal" | "max_iter" | "stall"
    iterations: int
    outer_objectives: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


def _objective(prob: BarrierProblem, x: np.ndarray):
    """Value of the concave objective, or None outside its domain."""
    total = 0.0
    for term in prob.terms:
        tau = x[term.tau]
        s = float(term.s_lin @ x) + term.s_const
        if tau <= 0.0 or 1.0 + s / tau <= 0.0:
            return None
        total += tau * np.log1p(s / tau) / _LN2
    return total


def _slacks(prob: BarrierProblem, x: np.ndarray):
    """Constraint slacks (positive inside the feasible region), or None."""
    for c in prob.qols:
        if x[c.den] <= 0.0:
            return None
    s_aff = prob.h - prob.G @ x if len(prob.h) else np.empty(0)
    out = [s_aff]
    for c in prob.quads:
        xi = x[c.idx]
        out.append(np.array([c.b - float(xi @ c.M @ xi) - float(c.a @ x)]))
    for c in prob.qols:
        xi = x[c.idx]
        val = float(xi @ c.M @ xi) / x[c.den] + float(xi @ c.R @ xi) + float(c.a @ x)
        out.append(np.array([c.b - val]))
    return np.concatenate(out) if out else np.empty(0)


def _barrier_f(prob, x, t):
    """t * (-objective) + sum -log(slack); None when infeasible."""
    obj = _objective(prob, x)
    if obj is None:
        return None
    s = _slacks(prob, x)
    if s is None or np.any(s <= 0.0):
        return None
    return -t * obj + float(-np.sum(np.log(s)))


def _support(vec, extra):
    nz = np.flatnonzero(vec)
    return np.unique(np.concatenate([nz, np.asarray(extra, dtype=nz.dtype)]))


def _grad_hess(prob: BarrierProblem, x: np.ndarray, t: float):
    """Gradient and Hessian of t * (-objective) + barrier.

    Rank-one pieces touch only each term's support, so assembly is linear
    in the number of per-slot blocks rather than quadratic in n.
    """
    n = prob.n
    g = np.zeros(n)
    H = np.zeros((n, n))

    # objective: concave, enters negated
    for term in prob.terms:
        tau = x[term.tau]
        s = float(term.s_lin @ x) + term.s_const
        r = s / tau
        dtau = (np.log1p(r) - r / (1.0 + r)) / _LN2
        ds = 1.0 / ((1.0 + r) * _LN2)
        g[term.tau] -= t * dtau
        g -= t * ds * term.s_lin
        # Hessian of the term is -coef * outer(r*e_tau - w)
        u = -term.s_lin.copy()
        u[term.tau] += r
        coef = t / (tau * (1.0 + r) ** 2 * _LN2)
        nz = _support(u, [term.tau])
        H[np.ix_(nz, nz)] += coef * np.outer(u[nz], u[nz])

    if len(prob.h):
        s_aff = prob.h - prob.G @ x
        w = 1.0 / s_aff
        g += prob.G.T @ w
        H += (prob.G * (w**2)[:, None]).T @ prob.G

    for c in prob.quads:
        xi = x[c.idx]
        slack = c.b - float(xi @ c.M @ xi) - float(c.a @ x)
        q1 = c.a.copy()
        q1[c.idx] += 2.0 * (c.M @ xi)
        g += q1 / slack
        nz = _support(q1, c.idx)
        H[np.ix_(nz, nz)] += np.outer(q1[nz], q1[nz]) / slack**2
        H[np.ix_(c.idx, c.idx)] += 2.0 * c.M / slack

    for c in prob.qols:
        xi = x[c.idx]
        den = x[c.den]
        mval = float(xi @ c.M @ xi)
        slack = c.b - mval / den - float(xi @ c.R @ xi) - float(c.a @ x)
        Mxi = c.M @ xi
        q1 = c.a.copy()
        q1[c.idx] += 2.0 * Mxi / den + 2.0 * (c.R @ xi)
        q1[c.den] += -mval / den**2
        g += q1 / slack
        nz = _support(q1, np.concatenate([c.idx, [c.den]]))
        H[np.ix_(nz, nz)] += np.outer(q1[nz], q1[nz]) / slack**2
        H[np.ix_(c.idx, c.idx)] += (2.0 * c.M / den + 2.0 * c.R) / slack
        H[np.ix_(c.idx, [c.den])] += (-2.0 * Mxi / den**2)[:, None] / slack
        H[np.ix_([c.den], c.idx)] += (-2.0 * Mxi / den**2)[None, :] / slack
        H[c.den, c.den] += (2.0 * mval / den**3) / slack
    return g, H


def solve_barrier(
    prob: BarrierProblem, start: np.ndarray, opts: SolverOptions | None = None
) -> BarrierResult:
    """Maximize the perspective objective from a strictly feasible start.

    Stops when n_constraints / t certifies a duality gap below
    tol_gap * (1 + |objective|).  A stalled line search returns the best
    iterate with status "stall"; an exhausted Newton budget returns
    status "max_iter".
    """
    opts = opts or DEFAULT_OPTIONS
    x = np.asarray(start, dtype=float).copy()
    if x.shape != (prob.n,):
        raise ValueError("start has wrong dimension")
    if _barrier_f(prob, x, 1.0) is None:
        raise InfeasibleStartError("start point is not strictly feasible")

    m_bar = prob.n_constraints
    t = 1.0
    used = 0
    outer_objs = []
    status = "optimal"
    while True:
        fval = _barrier_f(prob, x, t)
        inner_status = "budget"
        while used < opts.max_iter:
            g, H = _grad_hess(prob, x, t)
            ridge = 0.0
            base = max(np.max(np.diag(H)), 1e-30)
            while True:
                try:
                    d = np.linalg.solve(H + ridge * np.eye(prob.n), -g)
                    lam2 = float(-g @ d)
                    if lam2 >= -1e-10 * max(1.0, abs(fval)):
                        break
                except np.linalg.LinAlgError:
                    pass
                ridge = max(ridge * 100.0, 1e-12 * base)
                if ridge > 1e8 * base:
                    d = None
                    break
            if d is None:
                inner_status = "stall"
                break
            lam2 = max(lam2, 0.0)
            if lam2 / 2.0 <= opts.newton_tol * (1.0 + abs(fval)):
                inner_status = "converged"
                break
            slope = float(g @ d)
            alpha = 1.0
            fn = None
            while alpha >= opts.min_step:
                fn = _barrier_f(prob, x + alpha * d, t)
                if fn is not None and fn <= fval + 0.25 * alpha * slope:
                    break
                alpha *= 0.5
            else:
                inner_status = "stall"
                break
            x = x + alpha * d
            fval = fn
            used += 1

        obj = _objective(prob, x)
        outer_objs.append(obj)
        if inner_status == "budget" and used >= opts.max_iter:
            status = "max_iter"
            break
        if inner_status == "stall":
            status = "stall" if m_bar / t > opts.tol_gap * (1.0 + abs(obj)) else "optimal"
            break
        if m_bar / t <= opts.tol_gap * (1.0 + abs(obj)):
            status = "optimal"
            break
        t *= opts.barrier_growth

    return BarrierResult(
        x=x,
        objective=_objective(prob, x),
        status=status,
        iterations=used,
        outer_objectives=outer_objs,
        info={"t": t, "gap": m_bar / t},
    )
