"""Shared numeric knobs for all solvers."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and iteration caps used across the solver stack.

    tol_gap bounds the relative duality gap certified by the barrier path;
    max_iter caps the total Newton iterations of one solve.  The SCA/AO
    fields control the outer scheme loops; rank_one_ratio is the eigenvalue
    dominance required to call a PSD matrix rank-one.
    """

    tol_gap: float = 1e-7
    max_iter: int = 4000
    barrier_growth: float = 10.0
    min_step: float = 1e-12
    rank_one_ratio: float = 1.0 - 1e-6
    newton_tol: float = 1e-10
    # outer-loop controls
    sca_tol: float = 1e-5
    sca_max_iter: int = 50
    sca_restarts: int = 3
    ao_tol: float = 1e-6
    ao_max_iter: int = 30
    randomization_samples: int = 200
    tau_floor_frac: float = 1e-9
    rng_seed: int = 0

    def __post_init__(self):
        if self.tol_gap <= 0:
            raise ValueError("tol_gap must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_OPTIONS = SolverOptions()
