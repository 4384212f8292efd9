"""Small built-in demo instances."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .model import LE, MiqcqpProblem, QuadraticForm, VarSpec

ILLUSTRATIVE_OBJECTIVES = ("x", "x+y")


def illustrative_problem(objective: str = "x") -> MiqcqpProblem:
    """Two-variable instance used throughout the docs: x in [-1, 1],
    y in {0, 1}, and the single quadratic constraint (x + y)^2 <= 1.

    The discrete feasible set is the segment {y=0, |x| <= 1} together with
    {y=1, -2 <= x <= 0} clipped to the box, so max x = 1 (at y=0) and
    max x + y = 1 (attained on a continuum of points).  Internally the
    instance minimizes the negated objective.
    """
    if objective not in ILLUSTRATIVE_OBJECTIVES:
        raise ValueError(f"objective must be one of {ILLUSTRATIVE_OBJECTIVES}")
    specs = [VarSpec(0, "x", -1.0, 1.0),
             VarSpec(1, "y", 0.0, 1.0, (0.0, 1.0))]
    Q = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    cons = [QuadraticForm(Q, np.zeros(2), 1.0, LE)]
    c = np.array([-1.0, 0.0]) if objective == "x" else np.array([-1.0, -1.0])
    return MiqcqpProblem(specs, QuadraticForm(None, c, 0.0, LE), cons)


def illustrative_oracle(objective: str = "x", grid: int = 2001) -> float:
    """Enumerate y over its domain and sweep x on a dense grid; returns the
    minimum of the (negated) objective over the feasible samples."""
    prob = illustrative_problem(objective)
    best = np.inf
    for y in (0.0, 1.0):
        for x in np.linspace(-1.0, 1.0, grid):
            p = np.array([x, y])
            if prob.evaluate_point(p).is_feasible(1e-9):
                best = min(best, prob.objective_value(p))
    return float(best)
