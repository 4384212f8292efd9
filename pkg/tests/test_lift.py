import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings as hyp_settings, strategies as st

from sdphull import (LE, MiqcqpProblem, ModelError, QuadraticForm, VarSpec,
                     add_valid_equalities, assemble, drop_redundant_2d,
                     error_metrics, exactness_certificate, get_backend,
                     lift_basic)
from sdphull.lift import (FROM_LE, MomentIndex, VALID_3A, VALID_3B, VALID_3C,
                          diag_bounds, moment_matrix)

from gen import grid_minimum, random_miqcqp

BACKEND = get_backend("clarabel")


def _solve(relax, eps=None):
    from sdphull import Settings
    conic, layout = assemble(relax)
    settings = Settings(eps_feas=eps, eps_gap=eps) if eps else None
    res = BACKEND.solve(conic, settings)
    assert res.ok, res.status
    return res


def test_moment_index_bijection():
    mi = MomentIndex(4)
    seen = {mi.flat(i, j) for i, j in mi.pairs()}
    assert seen == set(range(10))
    assert mi.flat(1, 3) == mi.flat(3, 1)


def test_diag_bounds_cases():
    assert diag_bounds(0.0, 1.0) == (0.0, 1.0)
    assert diag_bounds(-1.0, 1.0) == (0.0, 1.0)
    assert diag_bounds(0.5, 2.0) == (0.25, 4.0)
    assert diag_bounds(-3.0, -1.0) == (1.0, 9.0)


def _single_var_problem(qsign):
    Q = sp.csr_matrix(np.array([[qsign]]))
    return MiqcqpProblem([VarSpec(0, "x", 0.0, 1.0)],
                         QuadraticForm(Q, np.zeros(1), 0.0), [])


def test_lift_min_square_is_zero():
    res = _solve(lift_basic(_single_var_problem(1.0)))
    assert res.objective == pytest.approx(0.0, abs=1e-7)


def test_lift_min_negative_square_hits_diag_bound():
    # min -x^2 on [0,1]: the lift floors at X11 = 1
    res = _solve(lift_basic(_single_var_problem(-1.0)))
    assert res.objective == pytest.approx(-1.0, abs=1e-7)
    assert res.X[0, 0] == pytest.approx(1.0, abs=1e-6)


def test_lift_is_lower_bound_on_random_qcqp():
    rng = np.random.default_rng(7)
    for _ in range(5):
        prob = random_miqcqp(rng, n=3, nbin=0, mcons=2)
        res = _solve(lift_basic(prob))
        true = grid_minimum(prob, points=21)
        assert res.objective <= true + 1e-6


def test_3a_symbolic_expansion():
    # c = [1,1], b = 1, i = j: X11 + 2 X12 + X22 - 2 x1 - 2 x2 + 1 = 0
    specs = [VarSpec(0, "a", -1.0, 1.0), VarSpec(1, "b", -1.0, 1.0)]
    prob = MiqcqpProblem(specs, QuadraticForm(None, np.ones(2), 0.0),
                         [QuadraticForm(None, np.ones(2), 1.0, "==")])
    relax = add_valid_equalities(lift_basic(prob), prob, "3a")
    rows = [r for r in relax.rows if r.tag == VALID_3A]
    assert len(rows) == 1
    row = rows[0]
    assert row.X_coefs == {(0, 0): 1.0, (0, 1): 2.0, (1, 1): 1.0}
    assert row.x_coefs == {0: -2.0, 1: -2.0}
    assert row.rhs == -1.0
    assert row.sense == "=="


def test_3b_unit_vector_zero_rhs_pins_column():
    specs = [VarSpec(0, "a", -1.0, 1.0), VarSpec(1, "b", -1.0, 1.0)]
    prob = MiqcqpProblem(specs, QuadraticForm(None, np.ones(2), 0.0),
                         [QuadraticForm(None, np.array([1.0, 0.0]), 0.0, "==")])
    relax = add_valid_equalities(lift_basic(prob), prob, "3b")
    rows = [r for r in relax.rows if r.tag == VALID_3B]
    assert len(rows) == 2
    # each row says X[p, 0] = 0
    X = np.full((2, 2), 0.5)
    X[0, :] = X[:, 0] = 0.0
    x = np.zeros(2)
    for r in rows:
        assert r.value(x, X) == pytest.approx(0.0)


def test_empty_S_LE_warns_and_returns_unchanged():
    rng = np.random.default_rng(0)
    prob = random_miqcqp(rng, n=2, nbin=0, mcons=1)
    relax = lift_basic(prob)
    with pytest.warns(UserWarning):
        out = add_valid_equalities(relax, prob, "3a")
    assert len(out.rows) == len(relax.rows)
    assert out.warnings


@given(st.integers(0, 10_000))
@hyp_settings(max_examples=25, deadline=None)
def test_rank1_points_satisfy_all_families(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    x0 = rng.uniform(-1.0, 1.0, n)
    specs = [VarSpec(i, f"x{i}", -1.0, 1.0) for i in range(n)]
    cons = []
    for _ in range(int(rng.integers(1, 4))):
        c = rng.standard_normal(n)
        cons.append(QuadraticForm(None, c, float(c @ x0), "=="))
    prob = MiqcqpProblem(specs, QuadraticForm(None, np.zeros(n), 0.0), cons)
    relax = lift_basic(prob)
    X0 = np.outer(x0, x0)
    for mode in ("3a", "3b", "3c"):
        strengthened = add_valid_equalities(relax, prob, mode)
        for row in strengthened.rows:
            if row.tag in (VALID_3A, VALID_3B, VALID_3C):
                assert abs(row.value(x0, X0)) <= 1e-10


def test_3a_and_3c_diagonal_blocks_agree_modulo_the_equalities():
    # a 3a diagonal row equals the matching 3c row minus 2b times the
    # original equality, so the two families span the same space once the
    # copied equalities are adjoined
    rng = np.random.default_rng(3)
    prob = random_miqcqp(rng, n=3, nbin=0, mcons=1, with_equality=True)
    relax = lift_basic(prob)
    mi = MomentIndex(3)

    def stack(mode, tags):
        rows = [r for r in add_valid_equalities(relax, prob, mode).rows
                if r.tag in tags]
        out = np.zeros((len(rows), 3 + 6 + 1))
        for k, r in enumerate(rows):
            for i, v in r.x_coefs.items():
                out[k, i] = v
            for (i, j), v in r.X_coefs.items():
                out[k, 3 + mi.flat(i, j)] = v
            out[k, -1] = r.rhs
        return out

    A = stack("3a", (VALID_3A, FROM_LE))
    C = stack("3c", (VALID_3C, FROM_LE))
    rank_a = np.linalg.matrix_rank(A, tol=1e-10)
    assert np.linalg.matrix_rank(np.vstack([A, C]), tol=1e-10) == rank_a
    assert np.linalg.matrix_rank(C, tol=1e-10) == rank_a


def test_drop_redundant_2d_preserves_optimum():
    rng = np.random.default_rng(11)
    prob = random_miqcqp(rng, n=3, nbin=0, mcons=1, with_equality=True)
    relax = add_valid_equalities(lift_basic(prob), prob, "3a")
    dropped = drop_redundant_2d(relax)
    assert not dropped.rows_tagged(FROM_LE)
    a = _solve(relax, eps=1e-9)
    b = _solve(dropped, eps=1e-9)
    assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_drop_redundant_2d_refuses_without_3a():
    rng = np.random.default_rng(11)
    prob = random_miqcqp(rng, n=3, nbin=0, mcons=1, with_equality=True)
    with pytest.raises(ModelError):
        drop_redundant_2d(lift_basic(prob))


def test_drop_redundant_2d_noop_without_equalities():
    rng = np.random.default_rng(2)
    prob = random_miqcqp(rng, n=2, nbin=0, mcons=1)
    relax = lift_basic(prob)
    out = drop_redundant_2d(relax)
    assert len(out.rows) == len(relax.rows)


def test_exactness_certificate():
    n = 3
    specs = [VarSpec(i, f"x{i}", -2.0, 2.0) for i in range(n)]
    cons = [QuadraticForm(None, np.eye(n)[i], 0.5, "==") for i in range(n)]
    prob = MiqcqpProblem(specs, QuadraticForm(None, np.ones(n), 0.0), cons)
    cert = exactness_certificate(prob)
    assert cert["full_rank"] and cert["rank"] == n
    # with C = I the relaxation optimum must be rank-1
    relax = add_valid_equalities(lift_basic(prob), prob, "3a")
    res = _solve(relax)
    assert error_metrics(res.x, res.X)["error_max"] <= 1e-6

    few = MiqcqpProblem(specs, QuadraticForm(None, np.ones(n), 0.0), cons[:2])
    assert not exactness_certificate(few)["full_rank"]


def test_moment_matrix_shape():
    x = np.array([1.0, 2.0])
    X = np.outer(x, x)
    M = moment_matrix(x, X)
    assert M.shape == (3, 3)
    assert M[0, 0] == 1.0
    assert np.allclose(M, M.T)
    w = np.linalg.eigvalsh(M)
    assert w.min() >= -1e-12
