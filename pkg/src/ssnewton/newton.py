"""Semismooth Newton iteration on block-structured systems.

Each step assembles one generalized-Jacobian element H_k, solves
H_k delta = -F(x_k) with a sparse direct factorization and updates
x <- x + t_k delta.  The default is the full step t_k = 1; backtracking on
the merit value 0.5 |F|^2 is available as an opt-in globalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .blocks import (
    BlockSystem,
    SemismoothBlockFamily,
    StateVector,
    assemble_H,
    eval_affine,
    eval_F,
    schur_H,
)
from .eigencomp import SymmetricPair, check_pair

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max_iter"
STATUS_SINGULAR = "singular_jacobian"

FULL_STEP = "full_step"
BACKTRACKING = "backtracking"

# Pivot magnitudes below this fraction of max|H| flag a rank-deficient
# factorization rather than rounding noise.
PIVOT_RTOL = 1e-12

ARMIJO_SLOPE = 1e-4


class SolverFailure(RuntimeError):
    """A solve that was required to converge did not; carries the trace."""

    def __init__(self, message: str, trace: "IterationTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 50
    damping: str = FULL_STEP
    contraction: float = 0.5
    min_step: float = 1e-4
    kink_tau: float = 1.0
    kink_tol: float = 1e-12

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.damping not in (FULL_STEP, BACKTRACKING):
            raise ValueError(f"unknown damping mode {self.damping!r}")
        if not 0.0 < self.contraction < 1.0:
            raise ValueError("contraction must lie in (0, 1)")
        if not 0.0 < self.min_step <= 1.0:
            raise ValueError("min_step must lie in (0, 1]")
        if not 0.0 <= self.kink_tau <= 1.0:
            raise ValueError("kink_tau must lie in [0, 1]")


@dataclass
class IterationTrace:
    """Per-iterate history of one solver run.

    ``residuals``, ``merits``, ``affine_residuals`` and ``iterates`` hold
    one entry per iterate (including the start), ``step_lengths`` one entry
    per accepted step.
    """

    residuals: list = field(default_factory=list)
    merits: list = field(default_factory=list)
    affine_residuals: list = field(default_factory=list)
    step_lengths: list = field(default_factory=list)
    flagged_steps: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    status: str = "running"

    @property
    def iterations(self) -> int:
        return len(self.step_lengths)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1]

    @property
    def final_merit(self) -> float:
        return self.merits[-1]


def merit_value(residual: np.ndarray) -> float:
    return 0.5 * float(residual @ residual)


def backtrack(merit_at, x: np.ndarray, delta: np.ndarray, cfg: SolverConfig):
    """Largest t in {1, c, c^2, ...} >= min_step passing the descent test.

    Accepts t when merit(x + t*delta) <= (1 - 1e-4 t) * merit(x).  Returns
    (t, flagged); a flagged step fell back to min_step without acceptance.
    """
    m0 = merit_at(x)
    if m0 == 0.0:
        return 1.0, False
    t = 1.0
    while t >= cfg.min_step:
        if merit_at(x + t * delta) <= (1.0 - ARMIJO_SLOPE * t) * m0:
            return t, False
        t *= cfg.contraction
    return cfg.min_step, True


def _factorize(H):
    """Sparse LU with rank-deficiency detection; returns None when singular."""
    scale = np.abs(H.data).max() if H.nnz else 0.0
    if scale == 0.0:
        return None
    try:
        lu = spla.splu(H.tocsc())
    except RuntimeError:
        return None
    if np.abs(lu.U.diagonal()).min() <= PIVOT_RTOL * scale:
        return None
    return lu


def solve(
    sys: BlockSystem,
    blocks: SemismoothBlockFamily,
    x0: StateVector,
    cfg: SolverConfig | None = None,
):
    """Run the semismooth Newton iteration from x0.

    Returns (final state, trace).  Termination: residual norm |F| <= tol
    (converged), iteration budget exhausted (max_iter), or a numerically
    rank-deficient Jacobian element (singular_jacobian); the latter two are
    reported through ``trace.status``, not raised.
    """
    cfg = cfg or SolverConfig()
    trace = IterationTrace()
    x = x0.copy()

    def record(xv, Fv):
        trace.residuals.append(float(np.linalg.norm(Fv)))
        trace.merits.append(merit_value(Fv))
        trace.affine_residuals.append(float(np.linalg.norm(Fv[: sys.K])))
        trace.iterates.append(xv.concat())

    Fv = eval_F(sys, blocks, x)
    record(x, Fv)

    while trace.residuals[-1] > cfg.tol and trace.iterations < cfg.max_iter:
        H = assemble_H(sys, blocks, x).H
        lu = _factorize(H)
        if lu is None:
            trace.status = STATUS_SINGULAR
            return x, trace
        delta = lu.solve(-Fv)
        if not np.all(np.isfinite(delta)):
            trace.status = STATUS_SINGULAR
            return x, trace

        if cfg.damping == BACKTRACKING:
            xc = x.concat()

            def merit_at(z):
                return merit_value(eval_F(sys, blocks, StateVector.from_concat(sys, z)))

            t, flagged = backtrack(merit_at, xc, delta, cfg)
            if flagged:
                trace.flagged_steps.append(trace.iterations)
        else:
            t = 1.0

        x = StateVector.from_concat(sys, x.concat() + t * delta)
        Fv = eval_F(sys, blocks, x)
        trace.step_lengths.append(t)
        record(x, Fv)

    trace.status = STATUS_CONVERGED if trace.residuals[-1] <= cfg.tol else STATUS_MAX_ITER
    return x, trace


def affine_invariance_check(trace: IterationTrace, sys: BlockSystem):
    """Whether the affine residual block stays zero after the first full step.

    Returns True/False, or None when no full step occurred (not
    applicable, e.g. in a damped run without t = 1).
    """
    full = [k for k, t in enumerate(trace.step_lengths) if t == 1.0]
    if not full:
        return None
    scale = max(1.0, float(np.linalg.norm(sys.l)))
    start = full[0] + 1
    return all(r <= 1e-10 * scale for r in trace.affine_residuals[start:])


@dataclass
class PairReport:
    index: int
    symmetric: bool
    certified: bool
    failure_reason: str | None


@dataclass
class RegularityReport:
    """Convergence-theorem hypotheses evaluated at one point."""

    pair_reports: list
    n_certified: int
    all_pairs_certified: bool
    smallest_singular_value: float
    singular_value_scale: float
    schur_regular: bool

    @property
    def hypotheses_hold(self) -> bool:
        return self.all_pairs_certified and self.schur_regular


def regularity_report(sub, tol: float = 1e-9) -> RegularityReport:
    """Certify every (X_i, Y_i) pair and measure the regularity of S_H."""
    reports = []
    n_cert = 0
    for i in range(sub.system.n_blocks):
        Xi, Yi = sub.X_blocks[i], sub.Y_blocks[i]
        try:
            cert = check_pair(SymmetricPair(Xi, Yi, tol))
        except ValueError:
            reports.append(PairReport(i, False, False, "not_symmetric"))
            continue
        reports.append(PairReport(i, True, cert.is_eigencomplementary, cert.failure_reason))
        n_cert += int(cert.is_eigencomplementary)

    sv = np.linalg.svd(schur_H(sub), compute_uv=False)
    sv_min, sv_max = float(sv.min()), float(sv.max())
    return RegularityReport(
        pair_reports=reports,
        n_certified=n_cert,
        all_pairs_certified=n_cert == sub.system.n_blocks,
        smallest_singular_value=sv_min,
        singular_value_scale=sv_max,
        schur_regular=sv_min > 1e-10 * max(sv_max, 1e-300),
    )
