"""Exact hierarchically optimal shifts via two nested least-squares stages.

Stage 1 minimizes the high-priority infeasibility 0.5 ||b1 - A1 x||^2 over all x.
Stage 2 minimizes 0.5 ||b2 - A2 x||^2 over the stage-1 optimal set, which is the
affine set x_dag + null(A1). Both shifts are unique even when the minimizers are
not; the minimum-norm minimizer is returned as the representative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .problem import HierarchicalShift, ProblemData, ShiftKind

__all__ = ["OracleResult", "hierarchical_shift", "stage1_shift", "stage2_shift"]


@dataclass(frozen=True)
class OracleResult:
    """Exact shift plus the minimizers and diagnostics that produced it.

    Attributes:
        shift: The hierarchically optimal shift pair (kind OracleExact).
        x_dag: Minimum-norm stage-1 minimizer.
        x_ddag: Minimum-norm stage-2 minimizer within the stage-1 optimal set.
        rank1: Numerical rank of A1.
        stage1_value: 0.5 ||s1||^2 at the optimum.
        stage2_value: 0.5 ||s2||^2 at the optimum.
    """

    shift: HierarchicalShift
    x_dag: np.ndarray
    x_ddag: np.ndarray
    rank1: int
    stage1_value: float
    stage2_value: float


def stage1_shift(p: ProblemData) -> tuple[np.ndarray, np.ndarray, int]:
    """Minimize the high-priority residual.

    Returns:
        (s1, x_dag, rank1) where x_dag is the minimum-norm least-squares solution
        of A1 x = b1, s1 = b1 - A1 x_dag, and rank1 the numerical rank of A1 under
        the max(m1, n) * eps relative singular value cutoff.
    """
    if p.m1 == 0:
        return np.zeros(0), np.zeros(p.n), 0
    x_dag, _, rank1, _ = np.linalg.lstsq(p.A1, p.b1, rcond=None)
    return p.b1 - p.A1 @ x_dag, x_dag, int(rank1)


def stage2_shift(
    p: ProblemData, x_dag: np.ndarray, rank1: int
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize the low-priority residual over the stage-1 optimal set.

    The optimal set is parametrized as x_dag + Z z with Z an orthonormal null-space
    basis of A1, so the reduced problem is an ordinary least squares in z. Returns
    (s2, x_ddag) with x_ddag the minimum-norm point of the reduced solution set.
    """
    x_dag = np.asarray(x_dag, dtype=float)
    if p.m2 == 0:
        return np.zeros(0), x_dag
    if rank1 >= p.n:
        return p.b2 - p.A2 @ x_dag, x_dag
    Z = np.eye(p.n) if p.m1 == 0 else null_space(p.A1)
    if Z.shape[1] == 0:
        return p.b2 - p.A2 @ x_dag, x_dag
    z, *_ = np.linalg.lstsq(p.A2 @ Z, p.b2 - p.A2 @ x_dag, rcond=None)
    x_ddag = x_dag + Z @ z
    return p.b2 - p.A2 @ x_ddag, x_ddag


def hierarchical_shift(p: ProblemData) -> OracleResult:
    """Compute the exact hierarchically optimal shift for both blocks."""
    s1, x_dag, rank1 = stage1_shift(p)
    s2, x_ddag = stage2_shift(p, x_dag, rank1)
    shift = HierarchicalShift(s1, s2, ShiftKind.ORACLE_EXACT)
    return OracleResult(
        shift=shift,
        x_dag=x_dag,
        x_ddag=x_ddag,
        rank1=rank1,
        stage1_value=0.5 * float(s1 @ s1),
        stage2_value=0.5 * float(s2 @ s2),
    )
