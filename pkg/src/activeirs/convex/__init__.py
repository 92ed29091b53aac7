"""Self-contained convex solvers: Hermitian SDP, perspective barrier, knapsack LP."""

import csv

from .barrier import (
    BarrierProblem,
    BarrierResult,
    InfeasibleStartError,
    PerspectiveTerm,
    QolConstraint,
    QuadConstraint,
    solve_barrier,
)
from .knapsack import KnapsackLp, solve_knapsack
from .options import DEFAULT_OPTIONS, SolverOptions
from .sdp import (
    SdpInfeasibleError,
    SdpProblem,
    SdpResult,
    SdpUnboundedError,
    extract_rank_one,
    solve_sdp,
)

def dump_trace(values, buf, residuals=None):
    """Write an iterate trace (iteration, objective[, residual]) as CSV."""
    w = csv.writer(buf)
    if residuals is None:
        w.writerow(["iteration", "objective"])
        for i, val in enumerate(values):
            w.writerow([i, repr(float(val))])
    else:
        w.writerow(["iteration", "objective", "residual"])
        for i, (val, res) in enumerate(zip(values, residuals)):
            w.writerow([i, repr(float(val)), repr(float(res))])


__all__ = [
    "dump_trace",
    "BarrierProblem",
    "BarrierResult",
    "InfeasibleStartError",
    "PerspectiveTerm",
    "QolConstraint",
    "QuadConstraint",
    "solve_barrier",
    "KnapsackLp",
    "solve_knapsack",
    "DEFAULT_OPTIONS",
    "SolverOptions",
    "SdpInfeasibleError",
    "SdpProblem",
    "SdpResult",
    "SdpUnboundedError",
    "extract_rank_one",
    "solve_sdp",
]
