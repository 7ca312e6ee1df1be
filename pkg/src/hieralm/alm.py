"""Augmented Lagrangian outer loop with per-iteration infeasibility shifts.

Each outer iteration solves one strongly structured subproblem

    minimize  f(x) + lh1'r1(x) + lh2'r2(x) + rho/2 (||r1(x)||^2 + ||r2(x)||^2)

with shifted residuals r_i(x) = A_i x - b_i + s_i, then updates shifts,
multipliers, and the penalty. In infeasibility-control mode the shift is
recomputed each iteration from a growing weight schedule so the iterates track
the hierarchically optimal relaxation; in standard mode the shift is pinned to
zero, which on an infeasible problem drives the penalty and multipliers to
divergence (flagged via ``rho_cap``).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import cho_factor, cho_solve

from .control import SigmaSchedule, approximate_shift, sigma_at
from .oracle import OracleResult, hierarchical_shift
from .problem import (
    HierarchicalShift,
    ProblemData,
    Severity,
    constraint_residuals,
    objective_value,
    validate_problem,
)

__all__ = [
    "IterationRecord",
    "IterationState",
    "Mode",
    "SolveReport",
    "SolverConfig",
    "Status",
    "SubproblemUnboundedError",
    "TRACE_FIELDS",
    "augmented_lagrangian_value",
    "iterate",
    "kkt_residual",
    "project_box",
    "solve",
    "solve_subproblem",
    "update_penalty",
]

logger = logging.getLogger(__name__)

# trace table / CSV column order
TRACE_FIELDS = (
    "k",
    "E",
    "norm_s1",
    "norm_s2",
    "r1",
    "r2",
    "rho",
    "norm_lambda1",
    "norm_lambda2",
)


class Mode(enum.Enum):
    INFEASIBILITY_CONTROL = "infeasibility-control"
    STANDARD_AL = "standard-al"


class Status(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    DIVERGENCE_SUSPECTED = "DivergenceSuspected"


class SubproblemUnboundedError(RuntimeError):
    """The inner minimization has no finite minimum.

    Raised when the subproblem normal system is singular and inconsistent, which
    means the augmented Lagrangian decreases without bound along a null direction.
    ``iteration`` carries the 1-based outer iteration when raised from the loop.
    """

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    """Outer-loop parameters.

    The multiplier box is the safeguard interval for the projected multiplier
    estimates; bounds may be scalars or per-row vectors. ``eps0`` and
    ``eps_factor`` describe the inner tolerance sequence eps(k) = eps0 *
    eps_factor**k; the default eps0 = 0 requests direct solves, whose achieved
    gradient norm is recorded per iteration.
    """

    tau: float = 0.1
    gamma: float = 5.0
    box1_lo: float | np.ndarray = -1e6
    box1_hi: float | np.ndarray = 1e6
    box2_lo: float | np.ndarray = -1e6
    box2_hi: float | np.ndarray = 1e6
    rho0: float = 1.0
    u0: float = 1e3
    sigma_schedule: SigmaSchedule = field(default_factory=SigmaSchedule)
    eps0: float = 0.0
    eps_factor: float = 0.5
    kkt_tol: float = 1e-6
    max_iter: int = 50
    rho_cap: float = 1e14
    mode: Mode = Mode.INFEASIBILITY_CONTROL

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")
        for name in ("rho0", "u0", "kkt_tol", "rho_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.eps0 < 0:
            raise ValueError(f"eps0 must be >= 0, got {self.eps0}")
        if not 0.0 < self.eps_factor <= 1.0:
            raise ValueError(f"eps_factor must be in (0, 1], got {self.eps_factor}")
        if self.eps0 > 0 and self.eps_factor == 1.0:
            raise ValueError("eps_factor must be < 1 for a nonzero eps0 so eps(k) -> 0")
        for lo, hi, name in (
            (self.box1_lo, self.box1_hi, "box1"),
            (self.box2_lo, self.box2_hi, "box2"),
        ):
            if np.any(np.asarray(lo, dtype=float) > np.asarray(hi, dtype=float)):
                raise ValueError(f"{name} is empty (lo > hi)")
        if not isinstance(self.mode, Mode):
            raise ValueError(f"mode must be a Mode, got {self.mode!r}")

    def eps_at(self, k: int) -> float:
        """Inner tolerance at outer iteration k."""
        return self.eps0 * self.eps_factor**k


@dataclass(frozen=True)
class IterationRecord:
    """One trace row; field order up to subproblem_grad_norm matches TRACE_FIELDS."""

    k: int
    E: float
    norm_s1: float
    norm_s2: float
    r1: float
    r2: float
    rho: float
    norm_lambda1: float
    norm_lambda2: float
    subproblem_grad_norm: float


@dataclass(frozen=True)
class IterationState:
    """Full post-iteration state, for diagnostics and exact bookkeeping checks.

    ``rho_used`` is the penalty the subproblem was solved with; ``rho`` (also in
    the record) is the value after the update rule. ``lambda1``/``lambda2`` are
    the unprojected multipliers, the hatted pair is their box projection.
    """

    record: IterationRecord
    x: np.ndarray
    shift: HierarchicalShift
    s1: np.ndarray
    s2: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    lambda1_hat: np.ndarray
    lambda2_hat: np.ndarray
    u: float
    rho_used: float
    rho: float


@dataclass(frozen=True)
class SolveReport:
    status: Status
    x_final: np.ndarray
    trace: tuple[IterationRecord, ...]
    shift_final: HierarchicalShift
    objective_final: float


def augmented_lagrangian_value(
    p: ProblemData,
    x: np.ndarray,
    lambda1_hat: np.ndarray,
    lambda2_hat: np.ndarray,
    rho: float,
    shift: HierarchicalShift,
) -> float:
    """Evaluate the shifted augmented Lagrangian at x."""
    r1, r2 = constraint_residuals(p, x, shift)
    return float(
        objective_value(p, x)
        + lambda1_hat @ r1
        + lambda2_hat @ r2
        + 0.5 * rho * (r1 @ r1 + r2 @ r2)
    )


def project_box(v: np.ndarray, lo, hi) -> np.ndarray:
    """Componentwise projection onto [lo, hi]; bounds broadcast against v."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box is empty (lo > hi)")
    return np.clip(v, lo, hi)


def update_penalty(u_new: float, u_prev: float, rho: float, tau: float, gamma: float) -> float:
    """Keep rho when the infeasibility measure decreased enough, else scale by gamma."""
    return rho if u_new <= tau * u_prev else gamma * rho


def kkt_residual(
    p: ProblemData,
    x: np.ndarray,
    lambda1: np.ndarray,
    lambda2: np.ndarray,
    shift: HierarchicalShift,
) -> float:
    """Stationarity plus shifted feasibility, using the unprojected multipliers."""
    grad = p.Q @ x + p.c + p.A1.T @ lambda1 + p.A2.T @ lambda2
    r1, r2 = constraint_residuals(p, x, shift)
    return float(np.linalg.norm(grad) + np.linalg.norm(r1) + np.linalg.norm(r2))


def _subproblem_system(
    p: ProblemData,
    gram: np.ndarray,
    lambda1_hat: np.ndarray,
    lambda2_hat: np.ndarray,
    rho: float,
    shift: HierarchicalShift,
) -> tuple[np.ndarray, np.ndarray]:
    H = p.Q + rho * gram
    rhs = (
        -p.c
        - p.A1.T @ lambda1_hat
        - p.A2.T @ lambda2_hat
        + rho * (p.A1.T @ (p.b1 - shift.s1) + p.A2.T @ (p.b2 - shift.s2))
    )
    return H, rhs


def _solve_system(H: np.ndarray, rhs: np.ndarray, eps: float) -> tuple[np.ndarray, float]:
    bound = max(eps, 1e-10 * (1.0 + float(np.linalg.norm(rhs))))
    try:
        factor = cho_factor(H, lower=True, check_finite=False)
        x = cho_solve(factor, rhs, check_finite=False)
        # one refinement pass keeps the residual near the backward-stable floor
        x = x + cho_solve(factor, rhs - H @ x, check_finite=False)
        grad_norm = float(np.linalg.norm(H @ x - rhs))
        if grad_norm <= bound:
            return x, grad_norm
    except LinAlgError:
        pass
    # singular (or numerically indefinite) system: minimum-norm solution if consistent
    x, *_ = np.linalg.lstsq(H, rhs, rcond=None)
    grad_norm = float(np.linalg.norm(H @ x - rhs))
    if grad_norm > bound:
        raise SubproblemUnboundedError(
            "subproblem unbounded below: singular system is inconsistent "
            f"(residual {grad_norm:.3e} > {bound:.3e})"
        )
    return x, grad_norm


def solve_subproblem(
    p: ProblemData,
    lambda1_hat: np.ndarray,
    lambda2_hat: np.ndarray,
    rho: float,
    shift: HierarchicalShift,
    eps: float = 0.0,
) -> tuple[np.ndarray, float]:
    """Minimize the shifted augmented Lagrangian in x.

    The minimizer solves (Q + rho A1'A1 + rho A2'A2) x = rhs; a Cholesky
    factorization with one refinement pass handles the definite case and a
    minimum-norm least-squares solve the singular-but-consistent one.

    Args:
        eps: Acceptable gradient norm at the returned point. The direct solve
            lands far below any reasonable eps; the achieved norm is returned.

    Returns:
        (x, grad_norm) with grad_norm <= max(eps, 1e-10 * (1 + ||rhs||)).

    Raises:
        SubproblemUnboundedError: If the system is inconsistent, i.e. the
            subproblem has no finite minimum.
    """
    gram = p.A1.T @ p.A1 + p.A2.T @ p.A2
    H, rhs = _subproblem_system(p, gram, lambda1_hat, lambda2_hat, rho, shift)
    return _solve_system(H, rhs, eps)


def iterate(
    p: ProblemData, cfg: SolverConfig, oracle: OracleResult | None = None
) -> Iterator[IterationState]:
    """Run the outer loop step by step, yielding full state after each iteration.

    The generator never stops on its own; callers apply their stopping rule
    (see :func:`solve`). ``oracle`` avoids recomputing the exact shift when the
    caller already has it; it is only used for the r1/r2 trace columns.
    """
    if oracle is None:
        oracle = hierarchical_shift(p)
    s1_star, s2_star = oracle.shift.s1, oracle.shift.s2
    gram = p.A1.T @ p.A1 + p.A2.T @ p.A2

    lambda1_hat = np.zeros(p.m1)
    lambda2_hat = np.zeros(p.m2)
    u = cfg.u0
    rho = cfg.rho0
    k = 0
    while True:
        if cfg.mode is Mode.INFEASIBILITY_CONTROL:
            _, shift = approximate_shift(p, sigma_at(cfg.sigma_schedule, k))
        else:
            shift = HierarchicalShift.zero(p.m1, p.m2)
        H, rhs = _subproblem_system(p, gram, lambda1_hat, lambda2_hat, rho, shift)
        try:
            x, grad_norm = _solve_system(H, rhs, cfg.eps_at(k))
        except SubproblemUnboundedError as exc:
            raise SubproblemUnboundedError(f"iteration {k + 1}: {exc}", iteration=k + 1) from exc

        s1, s2 = constraint_residuals(p, x, shift)
        lambda1 = lambda1_hat + rho * s1
        lambda2 = lambda2_hat + rho * s2
        lambda1_hat_new = project_box(lambda1, cfg.box1_lo, cfg.box1_hi)
        lambda2_hat_new = project_box(lambda2, cfg.box2_lo, cfg.box2_hi)
        u_new = float(np.linalg.norm(s1) + np.linalg.norm(s2))
        rho_new = update_penalty(u_new, u, rho, cfg.tau, cfg.gamma)

        record = IterationRecord(
            k=k + 1,
            E=kkt_residual(p, x, lambda1, lambda2, shift),
            norm_s1=float(np.linalg.norm(s1)),
            norm_s2=float(np.linalg.norm(s2)),
            r1=float(np.linalg.norm(shift.s1 - s1_star)),
            r2=float(np.linalg.norm(shift.s2 - s2_star)),
            rho=rho_new,
            norm_lambda1=float(np.linalg.norm(lambda1)),
            norm_lambda2=float(np.linalg.norm(lambda2)),
            subproblem_grad_norm=grad_norm,
        )
        yield IterationState(
            record=record,
            x=x,
            shift=shift,
            s1=s1,
            s2=s2,
            lambda1=lambda1,
            lambda2=lambda2,
            lambda1_hat=lambda1_hat_new,
            lambda2_hat=lambda2_hat_new,
            u=u_new,
            rho_used=rho,
            rho=rho_new,
        )
        lambda1_hat, lambda2_hat = lambda1_hat_new, lambda2_hat_new
        u, rho = u_new, rho_new
        k += 1


def _check_box(lo, hi, m: int, name: str) -> None:
    for bound, side in ((lo, "lo"), (hi, "hi")):
        arr = np.asarray(bound, dtype=float)
        if arr.ndim > 1 or (arr.ndim == 1 and arr.shape[0] != m):
            raise ValueError(f"{name}_{side} must be a scalar or length-{m} vector")


def solve(p: ProblemData, cfg: SolverConfig | None = None) -> SolveReport:
    """Run the outer loop to one of the three terminal statuses.

    Stops with Converged once the KKT residual E falls to ``kkt_tol``, with
    DivergenceSuspected once the penalty passes ``rho_cap`` (the signature of an
    infeasible problem under a zero shift), and with MaxIter otherwise.

    Raises:
        ValueError: If validate_problem reports errors or box shapes do not
            match the constraint blocks.
        SubproblemUnboundedError: Propagated from the inner solve with the
            iteration index attached.
    """
    if cfg is None:
        cfg = SolverConfig()
    report = validate_problem(p)
    if not report.ok:
        raise ValueError("invalid problem: " + "; ".join(report.messages(Severity.ERROR)))
    for msg in report.messages(Severity.WARNING):
        logger.warning("%s", msg)
    _check_box(cfg.box1_lo, cfg.box1_hi, p.m1, "box1")
    _check_box(cfg.box2_lo, cfg.box2_hi, p.m2, "box2")

    records: list[IterationRecord] = []
    status = Status.MAX_ITER
    last: IterationState | None = None
    for state in iterate(p, cfg):
        records.append(state.record)
        last = state
        logger.debug(
            "k=%d E=%.3e rho=%.3e u=%.3e", state.record.k, state.record.E, state.rho, state.u
        )
        if state.record.E <= cfg.kkt_tol:
            status = Status.CONVERGED
            break
        if state.rho > cfg.rho_cap:
            status = Status.DIVERGENCE_SUSPECTED
            break
        if state.record.k >= cfg.max_iter:
            status = Status.MAX_ITER
            break
    assert last is not None
    logger.info(
        "%s after %d iterations (E=%.3e)", status.value, last.record.k, last.record.E
    )
    return SolveReport(
        status=status,
        x_final=last.x,
        trace=tuple(records),
        shift_final=last.shift,
        objective_final=objective_value(p, last.x),
    )
