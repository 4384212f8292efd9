import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from sdphull import (EQ, LE, MiqcqpProblem, ModelError, QuadraticForm,
                     VarSpec, classify_constraints)
from sdphull.model import numerical_rank


def test_varspec_validation():
    VarSpec(0, "x", -1.0, 1.0)
    with pytest.raises(ModelError):
        VarSpec(0, "x", 1.0, -1.0)
    with pytest.raises(ModelError):
        VarSpec(0, "x", -np.inf, 1.0)
    with pytest.raises(ModelError):
        VarSpec(0, "x", 0.0, 1.0, (1.0, 0.0))   # domain must ascend
    with pytest.raises(ModelError):
        VarSpec(0, "x", 0.0, 1.0, (0.0, 2.0))   # domain outside the box


def test_quadratic_form_symmetry_and_value():
    Q = sp.csr_matrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ModelError):
        QuadraticForm(Q, np.zeros(2), 0.0)
    Qs = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    f = QuadraticForm(Qs, np.array([1.0, -1.0]), 2.0)
    x = np.array([1.0, 2.0])
    # x'Qx + c'x - b = 9 - 1 - 2
    assert f.value(x) == pytest.approx(6.0)
    assert not f.is_linear
    assert QuadraticForm(None, np.ones(2), 0.0).is_linear


def test_classify_constraints_partition():
    c = np.ones(2)
    Q = sp.csr_matrix(np.eye(2))
    forms = [QuadraticForm(Q, c, 1.0, LE), QuadraticForm(Q, c, 1.0, EQ),
             QuadraticForm(None, c, 1.0, LE), QuadraticForm(None, c, 1.0, EQ)]
    part = classify_constraints(forms)
    assert (part.S_QI, part.S_QE, part.S_LI, part.S_LE) == ([0], [1], [2], [3])


@given(st.lists(st.sampled_from(["qi", "qe", "li", "le"]), max_size=12))
def test_partition_is_exhaustive_and_disjoint(kinds):
    Q = sp.csr_matrix(np.eye(2))
    c = np.ones(2)
    make = {"qi": lambda: QuadraticForm(Q, c, 0.0, LE),
            "qe": lambda: QuadraticForm(Q, c, 0.0, EQ),
            "li": lambda: QuadraticForm(None, c, 0.0, LE),
            "le": lambda: QuadraticForm(None, c, 0.0, EQ)}
    part = classify_constraints([make[k]() for k in kinds])
    idx = part.all_indices()
    assert sorted(idx) == list(range(len(kinds)))
    assert len(set(idx)) == len(idx)


def _problem():
    specs = [VarSpec(0, "b", 0.0, 1.0, (0.0, 1.0)),
             VarSpec(1, "y", -2.0, 2.0)]
    Q = sp.csr_matrix(np.eye(2))
    obj = QuadraticForm(Q, np.zeros(2), 0.0)
    cons = [QuadraticForm(None, np.array([1.0, 1.0]), 1.0, LE),
            QuadraticForm(None, np.array([1.0, -1.0]), 0.0, EQ)]
    return MiqcqpProblem(specs, obj, cons)


def test_evaluate_point_reports_violations():
    prob = _problem()
    rep = prob.evaluate_point(np.array([0.5, 3.0]))
    assert rep.box_violation.max() == pytest.approx(1.0)
    assert rep.integer_distance.max() == pytest.approx(0.5)
    assert not rep.is_feasible()
    rep2 = prob.evaluate_point(np.array([0.0, 0.0]))
    assert rep2.is_feasible()


def test_linear_equality_matrix_and_rank():
    prob = _problem()
    C, b, rank = prob.linear_equality_matrix()
    assert C.shape == (1, 2)
    assert b[0] == 0.0
    assert rank == 1
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.eye(4)) == 4


def test_json_round_trip(tmp_path):
    prob = _problem()
    path = tmp_path / "instance.json"
    prob.save(path)
    back = MiqcqpProblem.load(path)
    assert back.n == prob.n
    assert back.integer_set == prob.integer_set
    x = np.array([1.0, 1.0])
    assert back.objective_value(x) == pytest.approx(prob.objective_value(x))
    for f, g in zip(back.constraints, prob.constraints):
        assert f.sense == g.sense
        assert f.value(x) == pytest.approx(g.value(x))


def test_objective_sense_must_be_minimize():
    specs = [VarSpec(0, "x", 0.0, 1.0)]
    with pytest.raises(ModelError):
        MiqcqpProblem(specs, QuadraticForm(None, np.ones(1), 0.0, EQ), [])
