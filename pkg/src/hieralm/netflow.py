"""Bidirectional grid network-flow instances with prioritized balance constraints.

Nodes sit on a rows x cols lattice; every adjacent pair is joined by two opposed
directed edges. The top row supplies one unit per node and the bottom row demands
one unit per node. Flow balance at demand and interior nodes forms the
high-priority block; balance at the supply nodes, whose targets can be inflated
by kappa to make the instance infeasible, forms the low-priority block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ProblemData

__all__ = ["GridSpec", "build_instance", "grid_incidence"]


@dataclass(frozen=True)
class GridSpec:
    """Grid shape plus instance parameters.

    ``kappa`` is added to every supply-row balance target; kappa = 0 keeps the
    instance feasible. Q = q_scale * I and c = c_scale * ones.
    """

    rows: int
    cols: int
    kappa: float = 0.0
    q_scale: float = 1.0
    c_scale: float = 0.1

    def __post_init__(self) -> None:
        if self.rows < 2:
            raise ValueError(f"rows must be >= 2 (supply and demand rows), got {self.rows}")
        if self.cols < 1:
            raise ValueError(f"cols must be >= 1, got {self.cols}")
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if not self.q_scale > 0:
            raise ValueError(f"q_scale must be positive, got {self.q_scale}")


def grid_incidence(rows: int, cols: int) -> tuple[np.ndarray, dict[tuple[int, int], int]]:
    """Dense node-edge incidence matrix of the bidirectional grid.

    Edge columns hold +1 at the head node and -1 at the tail, ordered rightward,
    leftward, downward, upward, each group in row-major order of the tail's grid
    position. Returns (A, node_index) with node_index mapping (row, col) to the
    node's matrix row.
    """
    if rows * cols < 2:
        raise ValueError("grid needs at least two nodes")
    node = {(r, c): r * cols + c for r in range(rows) for c in range(cols)}
    m = rows * cols
    n = 2 * (rows * (cols - 1) + (rows - 1) * cols)
    A = np.zeros((m, n))
    col = 0
    for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        for r in range(rows):
            for c in range(cols):
                head = (r + dr, c + dc)
                if head in node:
                    A[node[head], col] += 1.0
                    A[node[r, c], col] -= 1.0
                    col += 1
    assert col == n
    return A, node


def build_instance(spec: GridSpec) -> tuple[ProblemData, dict]:
    """Assemble the problem and a metadata block describing the priority split.

    The balance targets are -1 at supply nodes and +1 at demand nodes; the
    low-priority targets get +kappa each. Row order inside each block follows
    node row-major order, so the supply block is exactly the first ``cols``
    incidence rows.
    """
    A, node = grid_incidence(spec.rows, spec.cols)
    m = spec.rows * spec.cols
    b = np.zeros(m)
    b[:spec.cols] = -1.0
    b[m - spec.cols:] = 1.0
    n = A.shape[1]
    p = ProblemData(
        Q=spec.q_scale * np.eye(n),
        c=spec.c_scale * np.ones(n),
        A1=A[spec.cols:],
        b1=b[spec.cols:],
        A2=A[:spec.cols],
        b2=b[:spec.cols] + spec.kappa,
    )
    meta = {
        "generator": "grid-network",
        "rows": spec.rows,
        "cols": spec.cols,
        "kappa": spec.kappa,
        "q_scale": spec.q_scale,
        "c_scale": spec.c_scale,
        "supply_nodes": list(range(spec.cols)),
        "demand_nodes": list(range(m - spec.cols, m)),
        "priority_partition": {
            "high": "balance rows of demand and interior nodes (node indices cols..m-1)",
            "low": "balance rows of supply nodes (node indices 0..cols-1)",
        },
    }
    return p, meta
