"""Sigma-weighted approximate shifts and the weight schedule that drives them.

Instead of the exact two-stage shift, each outer iteration solves one weighted
least-squares problem

    minimize  sigma1/2 ||b1 - A1 x||^2 + sigma2/2 ||b2 - A2 x||^2

whose residual pair approaches the exact hierarchical shift as the weight ratio
eta = sigma1/sigma2 grows. The schedule drives eta up geometrically while capping
the absolute weight scale and the ratio to keep the stacked system well posed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .problem import HierarchicalShift, ProblemData, ShiftKind

__all__ = [
    "SigmaPair",
    "SigmaSchedule",
    "approximate_shift",
    "approximate_shift_sequence",
    "sigma_at",
]

logger = logging.getLogger(__name__)

# joint downscale bound on sigma1; rescaling both weights preserves eta
_SIGMA1_CAP = 1e12


@dataclass(frozen=True)
class SigmaPair:
    """Positive weights for the two priority blocks."""

    sigma1: float
    sigma2: float

    def __post_init__(self) -> None:
        for name in ("sigma1", "sigma2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def eta(self) -> float:
        """Priority ratio sigma1 / sigma2."""
        return self.sigma1 / self.sigma2


@dataclass(frozen=True)
class SigmaSchedule:
    """Geometric weight growth: sigma_i(k) = sigma_i_0 * factor_i**k.

    The high-priority factor must outgrow the low-priority one so eta increases.
    sigma1 is capped at 1e12 by rescaling both weights jointly (the ratio is all
    that matters for the shift), and eta itself is capped at ``eta_cap`` by
    raising sigma2, with a logged warning once the cap binds.
    """

    sigma1_0: float = 1.0
    sigma1_factor: float = 10.0
    sigma2_0: float = 1.0
    sigma2_factor: float = 1.1
    eta_cap: float = 1e12

    def __post_init__(self) -> None:
        for name in ("sigma1_0", "sigma2_0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not self.sigma1_factor > self.sigma2_factor >= 1.0:
            raise ValueError(
                "need sigma1_factor > sigma2_factor >= 1, got "
                f"{self.sigma1_factor} and {self.sigma2_factor}"
            )
        if not self.eta_cap >= 1.0:
            raise ValueError(f"eta_cap must be >= 1, got {self.eta_cap}")


def _power(base: float, scale: float, k: int) -> float:
    try:
        return scale * base**k
    except OverflowError:
        return math.inf


def sigma_at(schedule: SigmaSchedule, k: int) -> SigmaPair:
    """Weights at outer iteration k, after the scale and ratio caps."""
    if k < 0:
        raise ValueError(f"iteration index must be nonnegative, got {k}")
    sigma1 = _power(schedule.sigma1_factor, schedule.sigma1_0, k)
    if sigma1 <= _SIGMA1_CAP:
        sigma2 = _power(schedule.sigma2_factor, schedule.sigma2_0, k)
    else:
        # past the cap the ratio is all that matters; downscale jointly in log
        # space so huge k cannot overflow
        excess = (
            math.log(schedule.sigma1_0)
            + k * math.log(schedule.sigma1_factor)
            - math.log(_SIGMA1_CAP)
        )
        sigma1 = _SIGMA1_CAP
        sigma2 = math.exp(
            math.log(schedule.sigma2_0) + k * math.log(schedule.sigma2_factor) - excess
        )
    if sigma2 * schedule.eta_cap < sigma1:
        logger.warning(
            "eta cap %.3g binding at k=%d; raising sigma2 from %.3g", schedule.eta_cap, k, sigma2
        )
        sigma2 = sigma1 / schedule.eta_cap
    return SigmaPair(sigma1, sigma2)


def approximate_shift(p: ProblemData, sigma: SigmaPair) -> tuple[np.ndarray, HierarchicalShift]:
    """Solve the weighted relaxation for one weight pair.

    Stacks the row-scaled blocks [sqrt(sigma1) A1; sqrt(sigma2) A2] and takes the
    minimum-norm least-squares solution x_bar; the returned shift is the residual
    pair (b1 - A1 x_bar, b2 - A2 x_bar), which is unique regardless of which
    minimizer the factorization picks.

    Returns:
        (x_bar, shift) with shift.kind SigmaApproximate.
    """
    for name in ("A1", "b1", "A2", "b2"):
        if not np.isfinite(getattr(p, name)).all():
            raise ValueError(f"{name} has non-finite entries")
    w1 = math.sqrt(sigma.sigma1)
    w2 = math.sqrt(sigma.sigma2)
    if p.m == 0:
        x_bar = np.zeros(p.n)
    else:
        stacked = np.vstack([w1 * p.A1, w2 * p.A2])
        target = np.concatenate([w1 * p.b1, w2 * p.b2])
        x_bar, *_ = np.linalg.lstsq(stacked, target, rcond=None)
    shift = HierarchicalShift(
        p.b1 - p.A1 @ x_bar,
        p.b2 - p.A2 @ x_bar,
        ShiftKind.SIGMA_APPROXIMATE,
        sigma=(sigma.sigma1, sigma.sigma2),
    )
    return x_bar, shift


def approximate_shift_sequence(
    p: ProblemData, schedule: SigmaSchedule, count: int
) -> list[HierarchicalShift]:
    """Shifts for k = 0 .. count-1 along the schedule."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [approximate_shift(p, sigma_at(schedule, k))[1] for k in range(count)]
