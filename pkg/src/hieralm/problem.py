"""Problem container, validation, and file I/O for prioritized equality-constrained QPs.

A problem is

    minimize    0.5 x'Qx + c'x
    subject to  A1 x = b1   (high priority)
                A2 x = b2   (low priority)

with Q symmetric positive semidefinite. The constraint blocks may be jointly
infeasible; shifts (s1, s2) relax them to A_i x = b_i - s_i.

Instance files are JSON objects with fields ``n``, ``m1``, ``m2``, ``Q``, ``c``,
``A1``, ``b1``, ``A2``, ``b2`` and an optional ``meta`` block that loading ignores.
Vectors are arrays of numbers. A matrix is either dense (an array of row arrays) or
sparse, written as ``{"coo": {"rows": [...], "cols": [...], "values": [...]}}`` with
the shape implied by the declared dimensions. All reals use the shortest decimal
representation that round-trips the double exactly; non-finite values are rejected.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Finding",
    "HierarchicalShift",
    "ProblemData",
    "ProblemFormatError",
    "Severity",
    "ShiftKind",
    "ValidationReport",
    "constraint_residuals",
    "load_problem",
    "objective_value",
    "problem_document",
    "save_problem",
    "validate_problem",
]

FORMAT_NAME = "hieralm-problem"
FORMAT_VERSION = 1

_SYMMETRY_TOL = 1e-10


class ShiftKind(enum.Enum):
    """Provenance of a hierarchical shift."""

    ORACLE_EXACT = "oracle-exact"
    SIGMA_APPROXIMATE = "sigma-approximate"


@dataclass(frozen=True)
class HierarchicalShift:
    """A pair of constraint shifts, one per priority block.

    Attributes:
        s1: Shift for the high-priority block, shape (m1,).
        s2: Shift for the low-priority block, shape (m2,).
        kind: Whether the shift is exact or a sigma-weighted approximation.
        sigma: The (sigma1, sigma2) weights that produced an approximate shift;
            None for exact shifts.
    """

    s1: np.ndarray
    s2: np.ndarray
    kind: ShiftKind
    sigma: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "s1", _frozen_vector(self.s1, "s1"))
        object.__setattr__(self, "s2", _frozen_vector(self.s2, "s2"))
        if self.kind is ShiftKind.SIGMA_APPROXIMATE:
            if self.sigma is None:
                raise ValueError("sigma-approximate shift requires sigma weights")
            s1, s2 = self.sigma
            if not (s1 > 0 and s2 > 0):
                raise ValueError(f"sigma weights must be positive, got {self.sigma}")

    @classmethod
    def zero(cls, m1: int, m2: int) -> "HierarchicalShift":
        """The all-zero shift (the exact shift of a feasible problem)."""
        return cls(np.zeros(m1), np.zeros(m2), ShiftKind.ORACLE_EXACT)


@dataclass(frozen=True)
class ProblemData:
    """Immutable problem data. Arrays are copied and made read-only.

    The decision dimension ``n`` is taken from ``c``; block sizes come from the
    constraint matrices. Shapes are not cross-checked here, that is the job of
    :func:`validate_problem`, but matrices must be 2-D and vectors 1-D. A block
    with zero rows is normalized to shape (0, n).
    """

    Q: np.ndarray
    c: np.ndarray
    A1: np.ndarray
    b1: np.ndarray
    A2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "Q", _frozen_matrix(self.Q, "Q"))
        object.__setattr__(self, "c", _frozen_vector(self.c, "c"))
        n = self.c.shape[0]
        for mat, vec in (("A1", "b1"), ("A2", "b2")):
            a = _frozen_matrix(getattr(self, mat), mat)
            if a.shape[0] == 0:
                a = np.zeros((0, n))
                a.flags.writeable = False
            object.__setattr__(self, mat, a)
            object.__setattr__(self, vec, _frozen_vector(getattr(self, vec), vec))

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def m1(self) -> int:
        return self.A1.shape[0]

    @property
    def m2(self) -> int:
        return self.A2.shape[0]

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    @property
    def A(self) -> np.ndarray:
        """Both constraint blocks stacked, high priority first."""
        return np.vstack([self.A1, self.A2])

    @property
    def b(self) -> np.ndarray:
        return np.concatenate([self.b1, self.b2])


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    message: str


@dataclass(frozen=True)
class ValidationReport:
    """Validation findings; ``ok`` holds iff no finding is an error."""

    findings: tuple[Finding, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(f.severity is not Severity.ERROR for f in self.findings)

    def messages(self, severity: Severity | None = None) -> list[str]:
        return [f.message for f in self.findings if severity in (None, f.severity)]


class ProblemFormatError(ValueError):
    """Raised when an instance file cannot be parsed into a ProblemData."""


def _frozen_matrix(a, name: str) -> np.ndarray:
    out = np.array(a, dtype=float)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={out.ndim}")
    out.flags.writeable = False
    return out


def _frozen_vector(a, name: str) -> np.ndarray:
    out = np.array(a, dtype=float)
    if out.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got ndim={out.ndim}")
    out.flags.writeable = False
    return out


def validate_problem(p: ProblemData) -> ValidationReport:
    """Check dimensions, finiteness, symmetry, and positive semidefiniteness.

    Returns a report rather than raising: dimension mismatches and an indefinite
    or asymmetric Q are errors, a singular (semidefinite but not definite) Q is a
    warning since the solver may still handle it.
    """
    findings: list[Finding] = []

    def err(msg: str) -> None:
        findings.append(Finding(Severity.ERROR, msg))

    def warn(msg: str) -> None:
        findings.append(Finding(Severity.WARNING, msg))

    n = p.n
    if n == 0:
        err("empty decision vector (n = 0)")
    if p.Q.shape != (n, n):
        err(f"dimension mismatch: Q has shape {p.Q.shape}, expected ({n}, {n})")
    for name_m, name_v, mat, vec in (("A1", "b1", p.A1, p.b1), ("A2", "b2", p.A2, p.b2)):
        if mat.shape[0] > 0 and mat.shape[1] != n:
            err(f"dimension mismatch: {name_m} has {mat.shape[1]} columns, expected {n}")
        if vec.shape[0] != mat.shape[0]:
            err(
                f"dimension mismatch: {name_v} has length {vec.shape[0]}, "
                f"{name_m} has {mat.shape[0]} rows"
            )
    for name in ("Q", "c", "A1", "b1", "A2", "b2"):
        if not np.isfinite(getattr(p, name)).all():
            err(f"{name} has non-finite entries")

    q_ok = p.Q.shape == (n, n) and n > 0 and np.isfinite(p.Q).all()
    if q_ok:
        asym = float(np.abs(p.Q - p.Q.T).max())
        if asym > _SYMMETRY_TOL:
            err(f"Q is not symmetric (max |Q - Q'| = {asym:.3e})")
        scale = 1.0 + float(np.linalg.norm(p.Q, np.inf))
        lam_min = float(np.linalg.eigvalsh(0.5 * (p.Q + p.Q.T)).min())
        if lam_min < -1e-8 * scale:
            err(f"Q is not positive semidefinite (min eigenvalue {lam_min:.3e})")
        elif lam_min <= 1e-10 * scale:
            warn(f"Q is singular (min eigenvalue {lam_min:.3e})")

    return ValidationReport(tuple(findings))


def objective_value(p: ProblemData, x: np.ndarray) -> float:
    """Evaluate 0.5 x'Qx + c'x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({p.n},)")
    return float(0.5 * x @ p.Q @ x + p.c @ x)


def constraint_residuals(
    p: ProblemData, x: np.ndarray, shift: HierarchicalShift | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Shifted residuals (A1 x - b1 + s1, A2 x - b2 + s2); shift None means zero."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({p.n},)")
    r1 = p.A1 @ x - p.b1
    r2 = p.A2 @ x - p.b2
    if shift is not None:
        if shift.s1.shape != (p.m1,) or shift.s2.shape != (p.m2,):
            raise ValueError(
                f"shift has block sizes ({shift.s1.shape[0]}, {shift.s2.shape[0]}), "
                f"expected ({p.m1}, {p.m2})"
            )
        r1 = r1 + shift.s1
        r2 = r2 + shift.s2
    return r1, r2


# ---------------------------------------------------------------------------
# file format

_DENSE_MAX_ENTRIES = 256
_COO_DENSITY = 0.25


def _encode_matrix(a: np.ndarray):
    size = a.size
    nnz = int(np.count_nonzero(a))
    if size <= _DENSE_MAX_ENTRIES or nnz > _COO_DENSITY * size:
        return a.tolist()
    rows, cols = np.nonzero(a)
    return {
        "coo": {
            "rows": rows.tolist(),
            "cols": cols.tolist(),
            "values": a[rows, cols].tolist(),
        }
    }


def problem_document(p: ProblemData, meta: dict | None = None) -> dict:
    """The JSON-ready document for an instance; raises ValueError on non-finite data."""
    for name in ("Q", "c", "A1", "b1", "A2", "b2"):
        if not np.isfinite(getattr(p, name)).all():
            raise ValueError(f"cannot serialize non-finite entries in {name}")
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n": p.n,
        "m1": p.m1,
        "m2": p.m2,
        "Q": _encode_matrix(p.Q),
        "c": p.c.tolist(),
        "A1": _encode_matrix(p.A1),
        "b1": p.b1.tolist(),
        "A2": _encode_matrix(p.A2),
        "b2": p.b2.tolist(),
    }
    if meta is not None:
        doc["meta"] = meta
    return doc


def save_problem(p: ProblemData, path: str | Path, meta: dict | None = None) -> None:
    """Write an instance file; values round-trip bit exactly through load_problem.

    ``meta`` is stored verbatim under the ``meta`` key and ignored by
    :func:`load_problem`.
    """
    doc = problem_document(p, meta)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, allow_nan=False)
        fh.write("\n")


def _require_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFormatError(f"{where}: expected a number, got {type(value).__name__}")
    out = float(value)
    if not np.isfinite(out):
        raise ProblemFormatError(f"{where}: non-finite value")
    return out


def _require_index(value, bound: int, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProblemFormatError(f"{where}: expected an integer index")
    if not 0 <= value < bound:
        raise ProblemFormatError(f"{where}: index {value} out of range [0, {bound})")
    return value


def _decode_vector(value, length: int, name: str) -> np.ndarray:
    if not isinstance(value, list):
        raise ProblemFormatError(f"{name}: expected an array")
    if len(value) != length:
        raise ProblemFormatError(f"{name}: has length {len(value)}, declared {length}")
    return np.array([_require_number(v, f"{name}[{i}]") for i, v in enumerate(value)])


def _decode_matrix(value, rows: int, cols: int, name: str) -> np.ndarray:
    if isinstance(value, dict):
        if set(value) != {"coo"} or not isinstance(value["coo"], dict):
            raise ProblemFormatError(f"{name}: matrix object must hold a single 'coo' entry")
        coo = value["coo"]
        if set(coo) != {"rows", "cols", "values"}:
            raise ProblemFormatError(f"{name}.coo: expected keys rows, cols, values")
        ri, ci, vals = coo["rows"], coo["cols"], coo["values"]
        if not (isinstance(ri, list) and isinstance(ci, list) and isinstance(vals, list)):
            raise ProblemFormatError(f"{name}.coo: rows, cols, values must be arrays")
        if not len(ri) == len(ci) == len(vals):
            raise ProblemFormatError(f"{name}.coo: rows, cols, values differ in length")
        out = np.zeros((rows, cols))
        seen = set()
        for t, (r, c, v) in enumerate(zip(ri, ci, vals)):
            r = _require_index(r, rows, f"{name}.coo.rows[{t}]")
            c = _require_index(c, cols, f"{name}.coo.cols[{t}]")
            if (r, c) in seen:
                raise ProblemFormatError(f"{name}.coo: duplicate entry at ({r}, {c})")
            seen.add((r, c))
            out[r, c] = _require_number(v, f"{name}.coo.values[{t}]")
        return out
    if not isinstance(value, list):
        raise ProblemFormatError(f"{name}: expected an array of rows or a coo object")
    if len(value) != rows:
        raise ProblemFormatError(f"{name}: has {len(value)} rows, declared {rows}")
    out = np.zeros((rows, cols))
    for i, row in enumerate(value):
        if not isinstance(row, list):
            raise ProblemFormatError(f"{name}[{i}]: expected an array")
        if len(row) != cols:
            raise ProblemFormatError(f"{name}[{i}]: has {len(row)} entries, declared {cols}")
        for j, v in enumerate(row):
            out[i, j] = _require_number(v, f"{name}[{i}][{j}]")
    return out


def _require_dim(doc: dict, key: str) -> int:
    if key not in doc:
        raise ProblemFormatError(f"missing field '{key}'")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ProblemFormatError(f"{key}: expected a nonnegative integer")
    return v


def load_problem(path: str | Path) -> ProblemData:
    """Parse an instance file.

    Raises ProblemFormatError with the offending location for malformed files:
    bad JSON, missing fields, wrong row or column counts against the declared
    dimensions, non-numeric cells, non-finite values, duplicate sparse entries.
    """

    def _reject_constant(token: str):
        raise ProblemFormatError(f"non-finite literal '{token}' not allowed")

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ProblemFormatError(f"{path}: top level must be an object")
    if doc.get("format") != FORMAT_NAME:
        raise ProblemFormatError(f"{path}: not a {FORMAT_NAME} file")

    n = _require_dim(doc, "n")
    m1 = _require_dim(doc, "m1")
    m2 = _require_dim(doc, "m2")
    for key in ("Q", "c", "A1", "b1", "A2", "b2"):
        if key not in doc:
            raise ProblemFormatError(f"missing field '{key}'")
    return ProblemData(
        Q=_decode_matrix(doc["Q"], n, n, "Q"),
        c=_decode_vector(doc["c"], n, "c"),
        A1=_decode_matrix(doc["A1"], m1, n, "A1"),
        b1=_decode_vector(doc["b1"], m1, "b1"),
        A2=_decode_matrix(doc["A2"], m2, n, "A2"),
        b2=_decode_vector(doc["b2"], m2, "b2"),
    )
