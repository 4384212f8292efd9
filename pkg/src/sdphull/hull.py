"""Rank-1 disjunctions over integer variables and their convex-hull
reformulation, in full and compact forms.

For an integer variable x_i with domain D_i, each term k asserts
``x_i = a_ik`` and ``X_ij = a_ik x_j`` for all j.  The hull reformulation
introduces a simplex of selectors lambda_ik and disaggregated copies u_ik of
the aggregated vector y; the compact form restricts y to the components a
disjunction actually touches (row i of X plus x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .model import EQ, LE, MiqcqpProblem, ModelError
from .lift import MomentIndex, diag_bounds

FULL = "full"
COMPACT = "compact"

# row tags
DISAGG = "Disagg"
AUX_BOUND = "AuxBound"
TERM_EQ = "TermEq"
SIMPLEX = "Simplex"
FIXED = "FixedDomain"

# coordinate constructors: ("x", i), ("X", i, j) with i <= j,
# ("lam", i, k), ("u", i, k, local_component)


def xc(i: int) -> tuple:
    return ("x", i)


def Xc(i: int, j: int) -> tuple:
    return ("X", i, j) if i <= j else ("X", j, i)


@dataclass(frozen=True)
class Disjunction:
    """One integer variable's rank-1 disjunction: one term per domain value."""

    var_id: int
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) == 0:
            raise ModelError(f"variable {self.var_id}: empty integer domain")


@dataclass(frozen=True)
class HullRow:
    """A linear row over named coordinates."""

    coefs: dict[tuple, float]
    rhs: float
    sense: str
    tag: str


@dataclass
class HullReformulation:
    """Selector variables, auxiliary vectors, and linking rows for the
    convex-hull reformulation of a set of rank-1 disjunctions."""

    form: str
    n: int
    disjunctions: list[Disjunction]
    lam_ids: list[tuple[int, int]]                 # (var_id, term index)
    aux_components: dict[tuple[int, int], list[tuple]]  # (i,k) -> y coords
    rows: list[HullRow]
    y_lo: dict[tuple, float]
    y_hi: dict[tuple, float]
    fixed: dict[int, float] = field(default_factory=dict)

    @property
    def aux_count(self) -> int:
        """Actual number of auxiliary u components emitted."""
        return sum(len(v) for v in self.aux_components.values())

    def rows_tagged(self, tag: str) -> list[HullRow]:
        return [r for r in self.rows if r.tag == tag]


def build_disjunctions(problem: MiqcqpProblem) -> list[Disjunction]:
    """One disjunction per integer variable, in variable-id order."""
    if not problem.integer_set:
        raise ModelError("problem has no integer variables")
    return [Disjunction(i, tuple(problem.variables[i].domain))
            for i in problem.integer_set]


def y_layout(n: int) -> list[tuple]:
    """Aggregated-vector component order: upper-triangle X entries
    (row-major), then x entries."""
    mi = MomentIndex(n)
    return [Xc(i, j) for i, j in mi.pairs()] + [xc(p) for p in range(n)]


def derive_y_bounds(problem: MiqcqpProblem) -> tuple[dict, dict]:
    """Interval bounds for every component of y.

    x components take the variable boxes; X_ij takes the interval product
    of the two boxes, intersected with the diagonal square bounds for i = j.
    """
    lo, hi = {}, {}
    l, u = problem.lower, problem.upper
    n = problem.n
    for i in range(n):
        lo[xc(i)], hi[xc(i)] = float(l[i]), float(u[i])
        for j in range(i, n):
            prods = (l[i] * l[j], l[i] * u[j], u[i] * l[j], u[i] * u[j])
            plo, phi = min(prods), max(prods)
            if i == j:
                dlo, dhi = diag_bounds(l[i], u[i])
                plo, phi = max(plo, dlo), min(phi, dhi)
            lo[Xc(i, j)], hi[Xc(i, j)] = float(plo), float(phi)
    return lo, hi


def _term_rows(i: int, k: int, a: float, cidx: dict[tuple, int],
               n: int) -> list[HullRow]:
    """Equalities of term (i, k) imposed on the u_ik copy, scaled by lambda."""
    rows = [HullRow({("u", i, k, cidx[xc(i)]): 1.0,
                     ("lam", i, k): -a}, 0.0, EQ, TERM_EQ)]
    for j in range(n):
        coefs = {("u", i, k, cidx[Xc(i, j)]): 1.0}
        ck = ("u", i, k, cidx[xc(j)])
        coefs[ck] = coefs.get(ck, 0.0) - a
        rows.append(HullRow(coefs, 0.0, EQ, TERM_EQ))
    return rows


def _fixed_rows(i: int, a: float, n: int) -> list[HullRow]:
    # one-value domain: no simplex needed, substitute the constant
    rows = [HullRow({xc(i): 1.0}, a, EQ, FIXED)]
    for j in range(n):
        rows.append(HullRow({Xc(i, j): 1.0, xc(j): -a}, 0.0, EQ, FIXED))
    return rows


def _build_hull(disjunctions: list[Disjunction], y_lo: dict, y_hi: dict,
                n: int, form: str) -> HullReformulation:
    full_comps = y_layout(n)
    for c in full_comps:
        if c not in y_lo or c not in y_hi:
            raise ModelError(f"missing bound for y component {c}")
        if not (math.isfinite(y_lo[c]) and math.isfinite(y_hi[c])):
            raise ModelError(f"hull requires finite bounds; component {c} unbounded")

    lam_ids = []
    aux_components = {}
    rows: list[HullRow] = []
    fixed = {}
    for dis in sorted(disjunctions, key=lambda d: d.var_id):
        i = dis.var_id
        if len(dis.values) == 1:
            fixed[i] = dis.values[0]
            rows.extend(_fixed_rows(i, dis.values[0], n))
            continue
        if form == FULL:
            comps = full_comps
        else:
            comps = [Xc(i, j) for j in range(n)] + [xc(p) for p in range(n)]
        cidx = {c: ci for ci, c in enumerate(comps)}
        ks = range(len(dis.values))
        for k in ks:
            lam_ids.append((i, k))
            aux_components[(i, k)] = comps
        # disaggregation: y_c = sum_k u_ikc
        for ci, c in enumerate(comps):
            coefs = {c: 1.0}
            for k in ks:
                coefs[("u", i, k, ci)] = -1.0
            rows.append(HullRow(coefs, 0.0, EQ, DISAGG))
        # bound rows: lam*y_lo <= u <= lam*y_hi
        for k in ks:
            for ci, c in enumerate(comps):
                rows.append(HullRow({("u", i, k, ci): 1.0,
                                     ("lam", i, k): -y_hi[c]}, 0.0, LE, AUX_BOUND))
                rows.append(HullRow({("u", i, k, ci): -1.0,
                                     ("lam", i, k): y_lo[c]}, 0.0, LE, AUX_BOUND))
        # term equalities on the copies
        for k, a in enumerate(dis.values):
            rows.extend(_term_rows(i, k, a, cidx, n))
        # simplex
        rows.append(HullRow({("lam", i, k): 1.0 for k in ks}, 1.0, EQ, SIMPLEX))
    return HullReformulation(form, n, list(disjunctions), lam_ids,
                             aux_components, rows, dict(y_lo), dict(y_hi),
                             fixed)


def hull_full(disjunctions: list[Disjunction], y_lo: dict, y_hi: dict,
              n: int) -> HullReformulation:
    """Full hull reformulation: each u_ik spans every component of y."""
    return _build_hull(disjunctions, y_lo, y_hi, n, FULL)


def hull_compact(disjunctions: list[Disjunction], y_lo: dict, y_hi: dict,
                 n: int) -> HullReformulation:
    """Compact hull reformulation: u_ik spans only row i of X plus x."""
    return _build_hull(disjunctions, y_lo, y_hi, n, COMPACT)


def count_aux(n: int, m: int, k: int) -> dict:
    """Auxiliary-variable counts predicted by the size formulas.

    full: k*m*(t+1) with t = (n+1)*n.  compact: k*m*((n - m/2)*m + n + 1),
    evaluated in exact rationals; a non-integral result raises, since the
    count must be a whole number.
    """
    if not (0 <= m <= n):
        raise ModelError(f"need 0 <= m <= n, got m={m}, n={n}")
    if m and k < 2:
        raise ModelError(f"need k >= 2, got k={k}")
    if m == 0:
        return {"full": 0, "compact": 0}
    t = (n + 1) * n
    full = k * m * (t + 1)
    compact = Fraction(k) * m * ((Fraction(n) - Fraction(m, 2)) * m + n + 1)
    if compact.denominator != 1:
        raise ModelError(f"compact count formula is non-integral: {compact}")
    return {"full": int(full), "compact": int(compact)}
