"""Pluggable conic backends.

Any object exposing ``solve(prob, settings=None, fixings=None)`` and
returning a SolveResult can serve as a backend; the conic text format
(conic.py) is the exchange medium for out-of-process solvers.  The default
external backend wraps Clarabel, an interior-point solver with native PSD
cone support.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .conic import ConicProblem
from .solver import (INFEASIBLE, ITER_LIMIT, NUMERICAL_FAILURE, OPTIMAL,
                     OperatorSplittingSolver, Settings, SolveResult,
                     cone_form, residual_report)


class ClarabelBackend:
    """Interior-point backend via the clarabel native API."""

    name = "clarabel"

    # retried with growing static regularization when the KKT system turns
    # out too ill-conditioned for the plain settings
    regularizations = (None, 1e-5)

    def solve(self, prob: ConicProblem, settings: Settings | None = None,
              fixings=None, warm=None) -> SolveResult:
        import clarabel

        st = settings or Settings()
        M, q, dims = cone_form(prob, fixings)
        cones = []
        if dims["zero"]:
            cones.append(clarabel.ZeroConeT(dims["zero"]))
        if dims["nonneg"]:
            cones.append(clarabel.NonnegativeConeT(dims["nonneg"]))
        cones.append(clarabel.PSDTriangleConeT(dims["psd_order"]))

        P = sp.csc_matrix((prob.nvars, prob.nvars))
        for reg in self.regularizations:
            cfg = clarabel.DefaultSettings()
            cfg.verbose = False
            cfg.max_iter = min(st.max_iter, 10_000)
            cfg.tol_feas = st.eps_feas * 1e-2
            cfg.tol_gap_abs = st.eps_gap * 1e-2
            cfg.tol_gap_rel = st.eps_gap * 1e-2
            if reg is not None:
                cfg.static_regularization_constant = reg
            solver = clarabel.DefaultSolver(P, prob.c, M.tocsc(), q, cones, cfg)
            sol = solver.solve()
            status = _map_status(str(sol.status))
            if status != NUMERICAL_FAILURE:
                break
        if status in (INFEASIBLE, NUMERICAL_FAILURE) or sol.x is None:
            return SolveResult(status, np.nan, None, None, None,
                               np.inf, None, int(sol.iterations),
                               {"solver": self.name,
                                "raw_status": str(sol.status)})
        z = np.asarray(sol.x, dtype=float)
        rep = residual_report(prob, z)
        Mz = prob.moment_from_z(z)
        return SolveResult(
            status, prob.objective_value(z), z,
            Mz[0, 1:].copy(), Mz[1:, 1:].copy(),
            max(rep["eq_max"], rep["ineq_max"], rep["box_max"]),
            None, int(sol.iterations),
            {"solver": self.name, "raw_status": str(sol.status),
             "psd_min_eig": rep["psd_min_eig"]},
        )


def _map_status(raw: str) -> str:
    raw = raw.lower()
    if "almostsolved" in raw or raw.endswith("solved"):
        return OPTIMAL
    if "primalinfeasible" in raw or "almostprimalinfeasible" in raw:
        return INFEASIBLE
    if "maxiterations" in raw or "maxtime" in raw:
        return ITER_LIMIT
    return NUMERICAL_FAILURE


_BACKENDS = {
    "clarabel": ClarabelBackend,
    "builtin": OperatorSplittingSolver,
}


def get_backend(name: str = "clarabel"):
    try:
        return _BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; "
                         f"choose from {sorted(_BACKENDS)}") from None
