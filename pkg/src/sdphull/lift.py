"""Shor lifting of an MIQCQP and valid-equality strengthening.

The lifted problem is linear in (x, X) where X stands in for xx'. Only the
upper triangle of X is stored; the single PSD requirement is on the
(n+1)x(n+1) moment matrix [[1, x'], [x, X]].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .model import EQ, LE, MiqcqpProblem, ModelError, numerical_rank

# provenance tags for generated rows
FROM_QI = "FromQI"
FROM_QE = "FromQE"
FROM_LE = "FromLE"
FROM_LI = "FromLI"
DIAG_BOUND = "DiagBound"
VALID_3A = "Valid3a"
VALID_3B = "Valid3b"
VALID_3C = "Valid3c"
MCCORMICK = "McCormick"

PAIRWISE_3A = "3a"
VECTOR_3B = "3b"
SCALAR_3C = "3c"


class MomentIndex:
    """Bijection between unordered pairs (i, j) and flat indices into the
    upper-triangle storage of X (row-major, diagonal included)."""

    def __init__(self, n: int):
        self.n = n
        self.size = n * (n + 1) // 2

    def flat(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        if not (0 <= i <= j < self.n):
            raise IndexError(f"moment index ({i},{j}) out of range for n={self.n}")
        return i * self.n - i * (i - 1) // 2 + (j - i)

    def pairs(self):
        for i in range(self.n):
            for j in range(i, self.n):
                yield i, j


@dataclass(frozen=True)
class LinearRow:
    """One linear constraint over (x, X): sum of x and X coefficients
    {<=,==} rhs.  X coefficients are keyed by ordered pairs i <= j."""

    x_coefs: dict[int, float]
    X_coefs: dict[tuple[int, int], float]
    rhs: float
    sense: str
    tag: str

    def value(self, x: np.ndarray, X: np.ndarray) -> float:
        v = sum(c * x[i] for i, c in self.x_coefs.items())
        v += sum(c * X[i, j] for (i, j), c in self.X_coefs.items())
        return v - self.rhs

    def normalized_key(self, ndigits: int = 12) -> tuple:
        """Scale-invariant fingerprint used for duplicate-row detection."""
        items = ([("x", i, c) for i, c in self.x_coefs.items()]
                 + [("X", ij, c) for ij, c in self.X_coefs.items()])
        items = [(k, i, c) for k, i, c in items if c != 0.0]
        items.sort(key=lambda t: (t[0], t[1] if t[0] == "x" else -1, t[1]))
        if not items:
            return (self.sense, round(self.rhs, ndigits))
        scale = items[0][2]
        return (self.sense,) + tuple(
            (k, i, round(c / scale, ndigits)) for k, i, c in items
        ) + (round(self.rhs / scale, ndigits),)


@dataclass
class SdpRelaxation:
    """Linear program over (x, X) plus the moment-matrix PSD constraint.

    Every row carries a provenance tag naming the constraint family that
    generated it.  Integer variable ids are carried through so the problem
    keeps its mixed-integer reading.
    """

    n: int
    obj_x: dict[int, float]
    obj_X: dict[tuple[int, int], float]
    obj_const: float
    rows: list[LinearRow]
    lower: np.ndarray
    upper: np.ndarray
    integer_ids: list[int]
    warnings: list[str] = field(default_factory=list)

    @property
    def moment_index(self) -> MomentIndex:
        return MomentIndex(self.n)

    def rows_tagged(self, tag: str) -> list[LinearRow]:
        return [r for r in self.rows if r.tag == tag]

    def copy(self) -> "SdpRelaxation":
        return SdpRelaxation(self.n, dict(self.obj_x), dict(self.obj_X),
                             self.obj_const, list(self.rows),
                             self.lower.copy(), self.upper.copy(),
                             list(self.integer_ids), list(self.warnings))

    def objective_value(self, x: np.ndarray, X: np.ndarray) -> float:
        v = sum(c * x[i] for i, c in self.obj_x.items())
        v += sum(c * X[i, j] for (i, j), c in self.obj_X.items())
        return v + self.obj_const

    def point_residuals(self, x: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Signed residual per row (clipped at 0 for satisfied inequalities)."""
        out = np.empty(len(self.rows))
        for k, row in enumerate(self.rows):
            r = row.value(x, X)
            out[k] = r if row.sense == EQ else max(r, 0.0)
        return out


def _form_coefs(Q, c) -> tuple[dict[int, float], dict[tuple[int, int], float]]:
    """Coefficients of tr(QX) + c'x over the upper-triangle X storage.

    tr(QX) = sum_i Q_ii X_ii + 2 sum_{i<j} Q_ij X_ij for symmetric Q.
    """
    x_coefs = {i: float(v) for i, v in enumerate(c) if v != 0.0}
    X_coefs: dict[tuple[int, int], float] = {}
    coo = Q.tocoo()
    for i, j, v in zip(coo.row, coo.col, coo.data):
        if v == 0.0:
            continue
        key = (int(i), int(j)) if i <= j else (int(j), int(i))
        # symmetric pairs (i,j)/(j,i) both contribute; diagonal appears once
        X_coefs[key] = X_coefs.get(key, 0.0) + float(v)
    return x_coefs, X_coefs


def diag_bounds(lower: float, upper: float) -> tuple[float, float]:
    """Tightest valid interval for x^2 given x in [lower, upper]."""
    lo = max(0.0, lower, -upper) ** 2
    hi = max(lower ** 2, upper ** 2)
    return lo, hi


def lift_basic(problem: MiqcqpProblem, mccormick: bool = False) -> SdpRelaxation:
    """Build the basic mixed-integer SDP relaxation of an MIQCQP.

    Quadratic forms become linear rows over (x, X); linear constraints are
    copied; interval bounds on the diagonal of X are added; the PSD block is
    implied by the SdpRelaxation type.  With ``mccormick`` set, interval
    product bounds on off-diagonal X entries are added as extra rows
    (not part of the basic relaxation).
    """
    n = problem.n
    tag_of = {}
    for i in problem.partition.S_QI:
        tag_of[i] = FROM_QI
    for i in problem.partition.S_QE:
        tag_of[i] = FROM_QE
    for i in problem.partition.S_LE:
        tag_of[i] = FROM_LE
    for i in problem.partition.S_LI:
        tag_of[i] = FROM_LI

    rows = []
    for idx, con in enumerate(problem.constraints):
        x_coefs, X_coefs = _form_coefs(con.Q, con.c)
        rows.append(LinearRow(x_coefs, X_coefs, con.b, con.sense, tag_of[idx]))

    lo, up = problem.lower, problem.upper
    for i in range(n):
        dlo, dhi = diag_bounds(lo[i], up[i])
        rows.append(LinearRow({}, {(i, i): 1.0}, dhi, LE, DIAG_BOUND))
        rows.append(LinearRow({}, {(i, i): -1.0}, -dlo, LE, DIAG_BOUND))

    if mccormick:
        for i in range(n):
            for j in range(i + 1, n):
                prods = [lo[i] * lo[j], lo[i] * up[j], up[i] * lo[j], up[i] * up[j]]
                rows.append(LinearRow({}, {(i, j): 1.0}, max(prods), LE, MCCORMICK))
                rows.append(LinearRow({}, {(i, j): -1.0}, -min(prods), LE, MCCORMICK))

    obj_x, obj_X = _form_coefs(problem.objective.Q, problem.objective.c)
    return SdpRelaxation(
        n=n, obj_x=obj_x, obj_X=obj_X, obj_const=-problem.objective.b,
        rows=rows, lower=lo.copy(), upper=up.copy(),
        integer_ids=list(problem.integer_set),
    )


def _row_3a(ci, bi, cj, bj, n) -> LinearRow:
    # ci'X cj - (bi cj' + bj ci')x + bi bj = 0
    x_coefs = {}
    lin = bi * cj + bj * ci
    for p in range(n):
        if lin[p] != 0.0:
            x_coefs[p] = -float(lin[p])
    X_coefs: dict[tuple[int, int], float] = {}
    for p in range(n):
        if ci[p] == 0.0:
            continue
        for q in range(n):
            if cj[q] == 0.0:
                continue
            key = (p, q) if p <= q else (q, p)
            X_coefs[key] = X_coefs.get(key, 0.0) + float(ci[p] * cj[q])
    return LinearRow(x_coefs, X_coefs, -float(bi * bj), EQ, VALID_3A)


def _rows_3b(ci, bi, n) -> list[LinearRow]:
    # X ci = bi x, one scalar row per component p
    rows = []
    for p in range(n):
        X_coefs: dict[tuple[int, int], float] = {}
        for q in range(n):
            if ci[q] == 0.0:
                continue
            key = (p, q) if p <= q else (q, p)
            X_coefs[key] = X_coefs.get(key, 0.0) + float(ci[q])
        rows.append(LinearRow({p: -float(bi)} if bi != 0.0 else {},
                              X_coefs, 0.0, EQ, VALID_3B))
    return rows


def _row_3c(ci, bi, cj, bj, n) -> LinearRow:
    X_coefs: dict[tuple[int, int], float] = {}
    for p in range(n):
        if ci[p] == 0.0:
            continue
        for q in range(n):
            if cj[q] == 0.0:
                continue
            key = (p, q) if p <= q else (q, p)
            X_coefs[key] = X_coefs.get(key, 0.0) + float(ci[p] * cj[q])
    return LinearRow({}, X_coefs, float(bi * bj), EQ, VALID_3C)


def add_valid_equalities(relax: SdpRelaxation, problem: MiqcqpProblem,
                         mode: str = PAIRWISE_3A) -> SdpRelaxation:
    """Strengthen a relaxation with one of the valid-equality families.

    ``3a``: pairwise products of the linear equalities, all unordered pairs
    including i = j.  ``3b``: X c_i = b_i x per equality (n rows each).
    ``3c``: scalar products c_i'X c_j = b_i b_j per unordered pair.
    Exact duplicate rows (after normalization) are dropped.
    """
    if mode not in (PAIRWISE_3A, VECTOR_3B, SCALAR_3C):
        raise ModelError(f"unknown valid-equality mode {mode!r}")
    out = relax.copy()
    idx = problem.partition.S_LE
    if not idx:
        out.warnings.append("no linear equalities: valid-equality step skipped")
        warnings.warn("S_LE is empty; relaxation returned unchanged")
        return out

    n = problem.n
    cs = [problem.constraints[i].c for i in idx]
    bs = [problem.constraints[i].b for i in idx]
    seen = {r.normalized_key() for r in out.rows}
    new_rows = []
    if mode == VECTOR_3B:
        for ci, bi in zip(cs, bs):
            new_rows.extend(_rows_3b(ci, bi, n))
    else:
        make = _row_3a if mode == PAIRWISE_3A else _row_3c
        for a in range(len(idx)):
            for b in range(a, len(idx)):
                new_rows.append(make(cs[a], bs[a], cs[b], bs[b], n))
    for row in new_rows:
        key = row.normalized_key()
        if key in seen:
            continue
        seen.add(key)
        out.rows.append(row)
    return out


def drop_redundant_2d(relax: SdpRelaxation) -> SdpRelaxation:
    """Remove the copied linear equalities (2d), valid once the complete
    diagonal 3a family is present (each c_i'x = b_i is then implied through
    the PSD block)."""
    le_rows = relax.rows_tagged(FROM_LE)
    if not le_rows:
        return relax.copy()
    # duplicate elimination may have folded a 3a row into an identical
    # pre-existing equality, so match keys against every equality row
    have_3a = {r.normalized_key() for r in relax.rows if r.sense == EQ}
    for row in le_rows:
        ci = np.zeros(relax.n)
        for i, c in row.x_coefs.items():
            ci[i] = c
        diag = _row_3a(ci, row.rhs, ci, row.rhs, relax.n)
        if diag.normalized_key() not in have_3a:
            raise ModelError(
                "drop_redundant_2d requires the complete i=j 3a family; "
                "refusing removal that would weaken the relaxation"
            )
    out = relax.copy()
    out.rows = [r for r in out.rows if r.tag != FROM_LE]
    return out


def exactness_certificate(problem: MiqcqpProblem) -> dict:
    """Rank check on the linear-equality coefficient matrix.

    When full_rank is true, any optimum of the strengthened relaxation has
    X = xx'.
    """
    C, _, rank = problem.linear_equality_matrix()
    return {"full_rank": rank == problem.n, "rank": rank,
            "n": problem.n, "num_equalities": C.shape[0]}


def moment_matrix(x: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Assemble [[1, x'], [x, X]]."""
    n = len(x)
    M = np.empty((n + 1, n + 1))
    M[0, 0] = 1.0
    M[0, 1:] = x
    M[1:, 0] = x
    M[1:, 1:] = X
    return M


def error_metrics(x: np.ndarray, X: np.ndarray) -> dict:
    """Max entry and numerical rank of the error matrix X - xx'."""
    E = X - np.outer(x, x)
    return {"error_max": float(np.abs(E).max()) if E.size else 0.0,
            "error_rank": numerical_rank(E)}
