"""Canonical MIQCQP representation.

A problem is ``min x'Q0x + c0'x - b0`` over box-bounded variables, some of
which carry a finite integer domain, subject to quadratic/linear constraints
that are partitioned into the four classes (quadratic/linear x eq/ineq) used
throughout the relaxation machinery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LE = "<="
EQ = "=="

# relative singular-value cutoff for numerical rank
RANK_RTOL = 1e-8


class ModelError(ValueError):
    """Raised when problem data violates a structural invariant."""


@dataclass(frozen=True)
class VarSpec:
    """One decision variable: box bounds plus an optional integer domain.

    ``domain`` is None for a continuous variable, otherwise a strictly
    ascending tuple of allowed values, all inside [lower, upper].
    """

    id: int
    name: str
    lower: float
    upper: float
    domain: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ModelError(f"variable {self.name!r}: bounds must be finite")
        if self.lower > self.upper:
            raise ModelError(f"variable {self.name!r}: lower > upper")
        if self.domain is not None:
            d = self.domain
            if len(d) == 0:
                raise ModelError(f"variable {self.name!r}: empty integer domain")
            if any(d[k] >= d[k + 1] for k in range(len(d) - 1)):
                raise ModelError(
                    f"variable {self.name!r}: domain must be strictly ascending"
                )
            if d[0] < self.lower or d[-1] > self.upper:
                raise ModelError(
                    f"variable {self.name!r}: domain values outside box"
                )

    @property
    def is_integer(self) -> bool:
        return self.domain is not None


class QuadraticForm:
    """One quadratic form ``x'Qx + c'x {<=,==} b``.

    Q is stored as a symmetric sparse matrix; a non-symmetric Q is rejected.
    A form with zero Q is classified as linear.
    """

    __slots__ = ("Q", "c", "b", "sense")

    def __init__(self, Q, c, b: float, sense: str = LE):
        n = len(c)
        if Q is None:
            Q = sp.csr_matrix((n, n))
        Q = sp.csr_matrix(Q, dtype=float)
        if Q.shape != (n, n):
            raise ModelError(f"Q shape {Q.shape} inconsistent with c length {n}")
        asym = abs(Q - Q.T)
        if asym.nnz and asym.max() > 0:
            raise ModelError("Q must be stored symmetric")
        if sense not in (LE, EQ):
            raise ModelError(f"unknown sense {sense!r}")
        self.Q = Q
        self.c = np.asarray(c, dtype=float)
        self.b = float(b)
        self.sense = sense

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def is_linear(self) -> bool:
        return self.Q.nnz == 0 or abs(self.Q).max() == 0.0

    def value(self, x: np.ndarray) -> float:
        """Evaluate x'Qx + c'x - b at a point."""
        x = np.asarray(x, dtype=float)
        return float(x @ (self.Q @ x) + self.c @ x - self.b)

    def __repr__(self):
        kind = "linear" if self.is_linear else "quadratic"
        return f"QuadraticForm({kind}, n={self.n}, sense={self.sense!r})"


@dataclass
class Partition:
    """Constraint indices split by (linear vs quadratic) x (eq vs ineq)."""

    S_QI: list[int] = field(default_factory=list)
    S_QE: list[int] = field(default_factory=list)
    S_LE: list[int] = field(default_factory=list)
    S_LI: list[int] = field(default_factory=list)

    def all_indices(self) -> list[int]:
        return sorted(self.S_QI + self.S_QE + self.S_LE + self.S_LI)


def classify_constraints(constraints: list[QuadraticForm]) -> Partition:
    """Partition constraint indices into S_QI / S_QE / S_LE / S_LI."""
    part = Partition()
    for idx, con in enumerate(constraints):
        if con.is_linear:
            (part.S_LE if con.sense == EQ else part.S_LI).append(idx)
        else:
            (part.S_QE if con.sense == EQ else part.S_QI).append(idx)
    return part


class MiqcqpProblem:
    """An MIQCQP: minimize a quadratic form over boxed variables with
    integer domains, subject to classified quadratic/linear constraints.

    Immutable after construction; constraints keep the order they were
    given in, and the partition holds stable indices into that list.
    """

    def __init__(self, variables: list[VarSpec], objective: QuadraticForm,
                 constraints: list[QuadraticForm]):
        n = len(variables)
        for k, v in enumerate(variables):
            if v.id != k:
                raise ModelError(f"variable ids must be 0..n-1 in order, got {v.id} at {k}")
        if objective.n != n:
            raise ModelError("objective dimension mismatch")
        if objective.sense != LE:
            raise ModelError("objective is minimized; its sense marker must "
                             "stay the default")
        for i, con in enumerate(constraints):
            if con.n != n:
                raise ModelError(f"constraint {i} dimension mismatch")
        self.variables = list(variables)
        self.objective = objective
        self.constraints = list(constraints)
        self.partition = classify_constraints(self.constraints)
        self.integer_set = [v.id for v in variables if v.is_integer]

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables])

    @property
    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables])

    def objective_value(self, x) -> float:
        return self.objective.value(x)

    # ----------------------------------------------------------- evaluation

    def evaluate_point(self, x) -> "ResidualReport":
        """Per-constraint signed violations and integer-domain distances.

        Inequality violations are clipped at 0 when satisfied; equality
        residuals are signed.
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ModelError(f"point has shape {x.shape}, expected ({self.n},)")
        residuals = np.empty(len(self.constraints))
        for i, con in enumerate(self.constraints):
            r = con.value(x)
            residuals[i] = r if con.sense == EQ else max(r, 0.0)
        box_viol = np.maximum(self.lower - x, 0.0) + np.maximum(x - self.upper, 0.0)
        int_dist = np.zeros(self.n)
        for i in self.integer_set:
            dom = np.asarray(self.variables[i].domain)
            int_dist[i] = np.min(np.abs(x[i] - dom))
        return ResidualReport(residuals, box_viol, int_dist)

    # --------------------------------------------------- linear equalities

    def linear_equality_matrix(self) -> tuple[np.ndarray, np.ndarray, int]:
        """Stack c_i' (i in S_LE) into C, return (C, b, numerical rank)."""
        idx = self.partition.S_LE
        if not idx:
            return np.zeros((0, self.n)), np.zeros(0), 0
        C = np.vstack([self.constraints[i].c for i in idx])
        b = np.array([self.constraints[i].b for i in idx])
        return C, b, numerical_rank(C)

    # -------------------------------------------------------- serialization

    def to_dict(self) -> dict:
        def form(f: QuadraticForm) -> dict:
            coo = f.Q.tocoo()
            return {
                "Q": [[int(i), int(j), float(v)]
                      for i, j, v in zip(coo.row, coo.col, coo.data)],
                "c": f.c.tolist(),
                "b": f.b,
                "sense": f.sense,
            }

        return {
            "vars": [
                {"name": v.name, "lower": v.lower, "upper": v.upper,
                 "domain": list(v.domain) if v.domain is not None else None}
                for v in self.variables
            ],
            "objective": form(self.objective),
            "constraints": [form(c) for c in self.constraints],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MiqcqpProblem":
        variables = [
            VarSpec(i, v["name"], v["lower"], v["upper"],
                    tuple(v["domain"]) if v.get("domain") is not None else None)
            for i, v in enumerate(d["vars"])
        ]
        n = len(variables)

        def form(fd: dict) -> QuadraticForm:
            Qd = fd["Q"]
            if Qd and isinstance(Qd[0], list) and len(Qd[0]) == 3:
                rows = [t[0] for t in Qd]
                cols = [t[1] for t in Qd]
                vals = [t[2] for t in Qd]
                Q = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
            else:
                Q = np.asarray(Qd, dtype=float) if Qd else None
            return QuadraticForm(Q, fd["c"], fd["b"], fd["sense"])

        return cls(variables, form(d["objective"]),
                   [form(fd) for fd in d["constraints"]])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "MiqcqpProblem":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ResidualReport:
    """Output of evaluate_point."""

    constraint_violation: np.ndarray
    box_violation: np.ndarray
    integer_distance: np.ndarray

    def max_violation(self) -> float:
        parts = [np.abs(self.constraint_violation), self.box_violation,
                 self.integer_distance]
        return float(max(p.max() if p.size else 0.0 for p in parts))

    def is_feasible(self, tol: float = 1e-6) -> bool:
        return self.max_violation() <= tol


def numerical_rank(A: np.ndarray) -> int:
    """Rank by singular values above RANK_RTOL times the largest one."""
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))
