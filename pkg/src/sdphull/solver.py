"""Built-in first-order conic solver and shared cone machinery.

Problems are solved in the slack form ``min c'z  s.t.  M z + s = q,
s in K`` where K stacks a zero cone (equalities), a nonnegative cone
(inequalities and finite box bounds) and one PSD cone holding the scaled
upper-triangle vectorization of the moment matrix.

The built-in method is ADMM with over-relaxation and a small proximal term:
a cached Cholesky solve for the affine step and a eigenvalue clipping for
the PSD block.  It is meant for desk-scale problems; larger instances
should go through an external backend (see backends.py).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .conic import ConicProblem

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
ITER_LIMIT = "IterLimit"
NUMERICAL_FAILURE = "NumericalFailure"

_SQRT2 = np.sqrt(2.0)


@dataclass
class Settings:
    eps_feas: float = 1e-6
    eps_gap: float = 1e-6
    max_iter: int = 50_000
    # built-in solver knobs
    rho: float = 1.0
    sigma: float = 1e-6
    over_relax: float = 1.6
    check_every: int = 25
    stall_window: int = 1000


@dataclass
class SolveResult:
    status: str
    objective: float
    z: np.ndarray | None
    x: np.ndarray | None
    X: np.ndarray | None
    primal_residual: float
    dual_residual: float | None
    iterations: int
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def project_psd(S: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clip negative eigenvalues to zero."""
    S = np.asarray(S, dtype=float)
    if np.abs(S - S.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(S).max(initial=0.0)):
        raise ValueError("matrix must be symmetric")
    try:
        w, V = np.linalg.eigh(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("eigendecomposition failed") from exc
    w = np.maximum(w, 0.0)
    P = (V * w) @ V.T
    return 0.5 * (P + P.T)


# scaled-svec helpers: column-major upper triangle, off-diagonals * sqrt(2)

def tri_size(order: int) -> int:
    return order * (order + 1) // 2


def svec(M: np.ndarray) -> np.ndarray:
    o = M.shape[0]
    out = np.empty(tri_size(o))
    k = 0
    for c in range(o):
        for r in range(c + 1):
            out[k] = M[r, c] if r == c else M[r, c] * _SQRT2
            k += 1
    return out


def smat(v: np.ndarray, order: int) -> np.ndarray:
    M = np.empty((order, order))
    k = 0
    for c in range(order):
        for r in range(c + 1):
            if r == c:
                M[r, c] = v[k]
            else:
                M[r, c] = M[c, r] = v[k] / _SQRT2
            k += 1
    return M


def cone_form(prob: ConicProblem, fixings=None):
    """Stack the problem into (M, q, dims): M z + s = q with
    s in Zero(me) x Nonneg(mi) x PSDTriangle(order).

    ``fixings`` is an iterable of (index, value) pairs appended to the
    zero-cone block.
    """
    N = prob.nvars
    eq_blocks = [prob.A]
    eq_rhs = [np.asarray(prob.b)]
    if fixings:
        rows = []
        vals = []
        for idx, val in fixings:
            r = sp.csr_matrix(([1.0], ([0], [idx])), shape=(1, N))
            rows.append(r)
            vals.append(val)
        eq_blocks.append(sp.vstack(rows))
        eq_rhs.append(np.array(vals, dtype=float))
    A = sp.vstack(eq_blocks).tocsr()
    b = np.concatenate(eq_rhs)

    in_blocks = [prob.G]
    in_rhs = [np.asarray(prob.h)]
    fin_lb = np.where(np.isfinite(prob.lb))[0]
    fin_ub = np.where(np.isfinite(prob.ub))[0]
    if fin_lb.size:
        # lb <= z  ->  -z + s = -lb
        D = sp.csr_matrix((-np.ones(fin_lb.size), (np.arange(fin_lb.size), fin_lb)),
                          shape=(fin_lb.size, N))
        in_blocks.append(D)
        in_rhs.append(-prob.lb[fin_lb])
    if fin_ub.size:
        D = sp.csr_matrix((np.ones(fin_ub.size), (np.arange(fin_ub.size), fin_ub)),
                          shape=(fin_ub.size, N))
        in_blocks.append(D)
        in_rhs.append(prob.ub[fin_ub])
    G = sp.vstack(in_blocks).tocsr()
    h = np.concatenate(in_rhs)

    # PSD rows: svec(moment(z)) = F z + f0; constraint -F z + s = f0
    o = prob.psd_order
    ts = tri_size(o)
    data, ri, ci = [], [], []
    f0 = np.zeros(ts)
    k = 0
    for c in range(o):
        for r in range(c + 1):
            scale = 1.0 if r == c else _SQRT2
            vid = int(prob.psd_map[r, c])
            if vid == -1:
                f0[k] = scale
            else:
                ri.append(k)
                ci.append(vid)
                data.append(scale)
            k += 1
    F = sp.csr_matrix((data, (ri, ci)), shape=(ts, N))

    M = sp.vstack([A, G, -F]).tocsr()
    q = np.concatenate([b, h, f0])
    dims = {"zero": A.shape[0], "nonneg": G.shape[0], "psd_order": o}
    return M, q, dims


def _project_cone(v: np.ndarray, dims: dict) -> np.ndarray:
    me, mi, o = dims["zero"], dims["nonneg"], dims["psd_order"]
    out = np.empty_like(v)
    out[:me] = 0.0
    out[me:me + mi] = np.maximum(v[me:me + mi], 0.0)
    S = smat(v[me + mi:], o)
    out[me + mi:] = svec(project_psd(S))
    return out


def residual_report(prob: ConicProblem, z: np.ndarray) -> dict:
    """Feasibility of a candidate point, measured directly on the problem."""
    eq = prob.A @ z - prob.b
    ineq = prob.G @ z - prob.h
    box = np.maximum(prob.lb - z, 0.0) + np.maximum(z - prob.ub, 0.0)
    Mz = prob.moment_from_z(z)
    w = np.linalg.eigvalsh(0.5 * (Mz + Mz.T))
    return {
        "eq_max": float(np.abs(eq).max(initial=0.0)),
        "ineq_max": float(np.maximum(ineq, 0.0).max(initial=0.0)),
        "box_max": float(box.max(initial=0.0)),
        "psd_min_eig": float(w.min(initial=0.0)),
    }


def _extract_xX(prob: ConicProblem, z: np.ndarray):
    Mz = prob.moment_from_z(z)
    return Mz[0, 1:].copy(), Mz[1:, 1:].copy()


class OperatorSplittingSolver:
    """Built-in ADMM solver for ConicProblem instances.

    Deterministic: identical inputs and settings produce identical
    iterates.  Stops when primal and dual residuals fall below eps_feas
    and eps_gap respectively; declares infeasibility when the primal
    residual stalls well above tolerance over a long window.
    """

    name = "builtin"

    def solve(self, prob: ConicProblem, settings: Settings | None = None,
              fixings=None, warm=None) -> SolveResult:
        st = settings or Settings()
        M, q, dims = cone_form(prob, fixings)
        N = prob.nvars
        m = M.shape[0]
        rho = st.rho
        sigma = st.sigma
        alpha = st.over_relax

        MT = M.T.tocsr()
        MtM = (MT @ M).toarray()

        def factor(rho_):
            return scipy.linalg.cho_factor(sigma * np.eye(N) + rho_ * MtM)

        cho = factor(rho)
        z = np.zeros(N) if warm is None else np.array(warm, dtype=float)
        s = _project_cone(q - M @ z, dims)
        y = np.zeros(m)

        best_stall = np.inf
        prev_best_stall = np.inf
        it = 0
        status = ITER_LIMIT
        rp = rd = np.inf
        for it in range(1, st.max_iter + 1):
            rhs = sigma * z - prob.c + rho * (MT @ (q - s - y))
            z_new = scipy.linalg.cho_solve(cho, rhs)
            Mz = M @ z_new
            v = alpha * Mz + (1 - alpha) * (q - s)
            s_new = _project_cone(q - v - y, dims)
            y = y + v + s_new - q
            rp = float(np.abs(M @ z_new + s_new - q).max(initial=0.0))
            if it % st.check_every == 0 or rp <= st.eps_feas:
                rd = float(rho * np.abs(MT @ (s_new - s)).max(initial=0.0)
                           + sigma * np.abs(z_new - z).max(initial=0.0))
                if rp <= st.eps_feas and rd <= st.eps_gap:
                    z, s = z_new, s_new
                    status = OPTIMAL
                    break
                # residual balancing
                if it % 500 == 0 and rd > 0:
                    if rp > 100 * rd and rho < 1e5:
                        rho *= 10.0
                        y /= 10.0
                        cho = factor(rho)
                    elif rd > 100 * rp and rho > 1e-5:
                        rho /= 10.0
                        y *= 10.0
                        cho = factor(rho)
            z, s = z_new, s_new
            best_stall = min(best_stall, rp)
            if it % st.stall_window == 0:
                stalled = best_stall > 0.999 * prev_best_stall
                if stalled and best_stall > max(1e-4, 100 * st.eps_feas):
                    status = INFEASIBLE
                    break
                prev_best_stall = best_stall
                best_stall = np.inf

        if status == INFEASIBLE:
            return SolveResult(INFEASIBLE, np.nan, None, None, None,
                               rp, rd, it, {"solver": self.name})
        x, X = _extract_xX(prob, z)
        return SolveResult(status, prob.objective_value(z), z, x, X,
                           rp, rd, it, {"solver": self.name})
