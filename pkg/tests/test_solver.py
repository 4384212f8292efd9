import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings as hyp_settings, strategies as st

from sdphull import (ConicProblem, OperatorSplittingSolver, Settings,
                     get_backend, lift_basic, assemble, project_psd)
from sdphull.solver import cone_form, residual_report, smat, svec, tri_size

from gen import random_miqcqp


def analytic_2x2(x11_fixed=True):
    """min x subject to [[1, x], [x, X11]] PSD, X11 = 1: optimum -1."""
    c = np.array([1.0, 0.0])
    if x11_fixed:
        A = sp.csr_matrix(np.array([[0.0, 1.0]]))
        b = np.array([1.0])
    else:
        A = sp.csr_matrix((0, 2))
        b = np.zeros(0)
    G = sp.csr_matrix((0, 2))
    h = np.zeros(0)
    lb = np.array([-np.inf, -np.inf])
    ub = np.array([np.inf, np.inf])
    psd_map = np.array([[-1, 0], [0, 1]])
    return ConicProblem(c, 0.0, A, b, G, h, lb, ub, 2, psd_map)


@given(st.integers(0, 10_000))
@hyp_settings(max_examples=50, deadline=None)
def test_project_psd_idempotent_and_psd(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    A = rng.standard_normal((n, n))
    S = (A + A.T) / 2
    P = project_psd(S)
    assert np.linalg.eigvalsh(P).min() >= -1e-10
    assert np.abs(project_psd(P) - P).max() <= 1e-10
    # projection is the identity on PSD inputs
    Q = A @ A.T
    assert np.abs(project_psd(Q) - Q).max() <= 1e-8 * max(1, np.abs(Q).max())


def test_project_psd_rejects_asymmetric():
    with pytest.raises(ValueError):
        project_psd(np.array([[0.0, 1.0], [0.0, 0.0]]))


@given(st.integers(0, 10_000))
@hyp_settings(max_examples=25, deadline=None)
def test_svec_smat_round_trip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    A = rng.standard_normal((n, n))
    S = (A + A.T) / 2
    v = svec(S)
    assert v.shape == (tri_size(n),)
    assert np.abs(smat(v, n) - S).max() <= 1e-14
    # the scaling preserves inner products
    B = rng.standard_normal((n, n))
    T = (B + B.T) / 2
    assert np.dot(svec(S), svec(T)) == pytest.approx(np.trace(S @ T))


def test_cone_form_dims_and_fixings():
    rng = np.random.default_rng(1)
    prob = random_miqcqp(rng, n=3, nbin=1, mcons=1, with_equality=True)
    conic, _ = assemble(lift_basic(prob))
    M, q, dims = cone_form(conic)
    Mf, qf, dimsf = cone_form(conic, fixings=[(0, 1.0), (2, 0.5)])
    assert dimsf["zero"] == dims["zero"] + 2
    assert Mf.shape[0] == M.shape[0] + 2
    assert dimsf["psd_order"] == conic.psd_order


def test_builtin_solves_analytic_case():
    prob = analytic_2x2()
    res = OperatorSplittingSolver().solve(prob, Settings(eps_feas=1e-9,
                                                         eps_gap=1e-9))
    assert res.ok
    assert res.objective == pytest.approx(-1.0, abs=1e-7)


def test_builtin_with_free_diagonal_is_unbounded_below_the_bound():
    # without the X11 pin the diagonal drifts to its box, here absent, so
    # add a box to keep the problem bounded and check the optimum moves
    prob = analytic_2x2(x11_fixed=False)
    prob.ub[1] = 4.0
    res = OperatorSplittingSolver().solve(prob, Settings(eps_feas=1e-8,
                                                         eps_gap=1e-8))
    assert res.ok
    assert res.objective == pytest.approx(-2.0, abs=1e-5)


def test_builtin_agrees_with_interior_point_on_random_lifts():
    rng = np.random.default_rng(9)
    admm = OperatorSplittingSolver()
    ip = get_backend("clarabel")
    for _ in range(3):
        prob = random_miqcqp(rng, n=3, nbin=0, mcons=2)
        conic, _ = assemble(lift_basic(prob))
        a = admm.solve(conic, Settings(eps_feas=1e-8, eps_gap=1e-8))
        b = ip.solve(conic)
        assert a.ok and b.ok
        assert a.objective == pytest.approx(b.objective, abs=1e-5)


def test_builtin_detects_infeasible_box():
    rng = np.random.default_rng(3)
    prob = random_miqcqp(rng, n=2, nbin=0, mcons=1)
    conic, layout = assemble(lift_basic(prob))
    # contradictory fixing: x0 = 2 outside its [-1, 1] box
    res = OperatorSplittingSolver().solve(conic,
                                          fixings=[(layout.x_index(0), 2.0)])
    assert res.status == "Infeasible"


def test_residual_report_flags_violations():
    prob = analytic_2x2()
    good = np.array([0.0, 1.0])
    rep = residual_report(prob, good)
    assert rep["eq_max"] <= 1e-12
    assert rep["psd_min_eig"] >= -1e-12
    bad = np.array([3.0, 0.5])
    rep2 = residual_report(prob, bad)
    assert rep2["eq_max"] == pytest.approx(0.5)
    assert rep2["psd_min_eig"] < -0.5


def test_clarabel_backend_statuses():
    ip = get_backend("clarabel")
    prob = analytic_2x2()
    res = ip.solve(prob)
    assert res.ok
    assert res.objective == pytest.approx(-1.0, abs=1e-7)
    bad = ip.solve(prob, fixings=[(0, 5.0)])   # forces x = 5, X11 = 1
    assert bad.status == "Infeasible"
    with pytest.raises(ValueError):
        get_backend("mosek")
