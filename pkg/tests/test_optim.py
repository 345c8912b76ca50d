import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stlverify.optim import (
    LinearProgram,
    NodeLimitExceeded,
    find_counterexample,
    lp_solve,
    milp_branch_and_bound,
)
from stlverify.optim.lp import simplex_solve
from stlverify.setops import Polytope, poly_is_empty


def vertex_oracle(c, A, b, lo, hi):
    """Brute-force LP over ``A x <= b, lo <= x <= hi``: best feasible basic solution."""
    n = len(c)
    rows = np.vstack([A, np.eye(n), -np.eye(n)])
    rhs = np.concatenate([b, np.full(n, hi), np.full(n, -lo)])
    best = None
    for idx in itertools.combinations(range(len(rhs)), n):
        M = rows[list(idx)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, rhs[list(idx)])
        if np.all(rows @ x <= rhs + 1e-8):
            v = c @ x
            if best is None or v < best:
                best = v
    return best


class TestLp:
    @pytest.mark.parametrize("method", ["highs", "simplex"])
    def test_bounded_variable(self, method):
        res = lp_solve(LinearProgram([1.0], A_ub=[[-1.0], [1.0]], b_ub=[-1.0, 2.0]), method)
        assert res.status == "optimal"
        assert res.x[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("method", ["highs", "simplex"])
    def test_infeasible(self, method):
        res = lp_solve(LinearProgram([0.0], A_ub=[[1.0], [-1.0]], b_ub=[-1.0, -1.0]), method)
        assert res.status == "infeasible"

    @pytest.mark.parametrize("method", ["highs", "simplex"])
    def test_unbounded(self, method):
        res = lp_solve(LinearProgram([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0]), method)
        assert res.status == "unbounded"

    def test_equality_constraints(self):
        lp = LinearProgram([1.0, 2.0, 0.0], A_eq=[[1.0, 1.0, 1.0]], b_eq=[1.0], lb=0.0, ub=1.0)
        for method in ("highs", "simplex"):
            res = lp_solve(lp, method)
            assert res.value == pytest.approx(0.0, abs=1e-9)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            lp_solve(LinearProgram([1.0]), "interior")

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_lps_match_vertex_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 7))
        A = rng.normal(size=(m, n))
        b = rng.normal(size=m)
        c = rng.normal(size=n)
        expected = vertex_oracle(c, A, b, -2.0, 2.0)
        for method in ("highs", "simplex"):
            res = lp_solve(LinearProgram(c, A_ub=A, b_ub=b, lb=-2.0, ub=2.0), method)
            if expected is None:
                assert res.status == "infeasible"
            else:
                assert res.status == "optimal"
                assert res.value == pytest.approx(expected, abs=1e-7)
                assert np.all(A @ res.x <= b + 1e-8)

    def test_simplex_on_degenerate_problem(self):
        # many redundant constraints through one vertex
        A = np.array([[1.0, 1.0], [1.0, 2.0], [2.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        res = simplex_solve(LinearProgram([-1.0, -1.0], A_ub=A, b_ub=[2.0, 3.0, 3.0, 1.0, 1.0], lb=0.0))
        assert res.value == pytest.approx(-2.0)

    def test_emptiness_matches_grid(self, rng):
        g = np.linspace(-2, 2, 201)
        grid = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
        for _ in range(20):
            P = Polytope(rng.normal(size=(5, 2)), rng.normal(size=5) * 0.3)
            empty = poly_is_empty(P, -2.0, 2.0)
            if empty:
                assert not P.contains_points(grid).any()
            else:
                assert P.contains_points(grid, tol=0.05).any()


def enumerate_counterexample(polys, p, eps):
    """Oracle: try every choice of one violated row per polytope."""
    best = None
    for choice in itertools.product(*[range(P.n_constraints) for P in polys]):
        rows = np.array([P.C[k] for P, k in zip(polys, choice)])
        rhs = np.array([P.d[k] + eps for P, k in zip(polys, choice)])
        # min |a|_1 with a = a+ - a-, rows a >= rhs
        c = np.ones(2 * p)
        A = np.hstack([-rows, rows])
        res = lp_solve(LinearProgram(c, A_ub=A, b_ub=-rhs, lb=0.0, ub=1.0))
        if res.optimal and (best is None or res.value < best):
            best = res.value
    return best


def random_polys(rng, p, q, rows):
    out = []
    for _ in range(q):
        s = int(rng.integers(1, rows + 1))
        C = rng.normal(size=(s, p))
        out.append(Polytope(C, rng.uniform(-0.5, 1.0, s) * np.abs(C).sum(axis=1)))
    return out


class TestCounterexample:
    def test_empty_list_gives_origin(self):
        res = find_counterexample([], 3)
        assert res.status == "optimal"
        np.testing.assert_array_equal(res.alpha, np.zeros(3))

    def test_polytope_covering_box(self):
        assert find_counterexample([Polytope([[1.0, 0.0]], [2.0])], 2).status == "infeasible"

    def test_two_halves_cover_box(self):
        polys = [Polytope([[1.0]], [0.0]), Polytope([[-1.0]], [0.0])]
        assert find_counterexample(polys, 1).status == "infeasible"
        assert enumerate_counterexample(polys, 1, 1e-6) is None

    def test_single_rows_reduce_to_lp(self):
        polys = [Polytope([[1.0, 0.0]], [0.5]), Polytope([[0.0, -1.0]], [0.2])]
        res = find_counterexample(polys, 2)
        np.testing.assert_allclose(res.alpha, [0.5, -0.2], atol=1e-5)
        assert res.nodes == 1

    def test_three_polytopes_two_rows(self, rng):
        polys = random_polys(rng, 3, 3, 2)
        polys = [Polytope(P.C[:1].repeat(2, 0) * [[1], [-1]], P.d[:1].repeat(2)) for P in polys]
        res = find_counterexample(polys, 3)
        expected = enumerate_counterexample(polys, 3, 1e-6)
        assert (res.status == "optimal") == (expected is not None)
        if expected is not None:
            assert res.value == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("formulation", ["disaggregated", "bigm"])
    def test_matches_enumeration(self, rng, formulation):
        for _ in range(15):
            p = int(rng.integers(1, 5))
            polys = random_polys(rng, p, int(rng.integers(1, 5)), 3)
            res = find_counterexample(polys, p, formulation=formulation)
            expected = enumerate_counterexample(polys, p, 1e-6)
            assert (res.status == "optimal") == (expected is not None)
            if expected is not None:
                assert res.value == pytest.approx(expected, abs=1e-6)
                assert np.abs(res.alpha).sum() == pytest.approx(expected, abs=1e-6)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_returned_point_leaves_every_polytope(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(1, 5))
        polys = random_polys(rng, p, int(rng.integers(1, 5)), 3)
        eps = 1e-6
        res = find_counterexample(polys, p, eps)
        if res.status == "optimal":
            a = res.alpha
            assert np.all(np.abs(a) <= 1.0)
            for P in polys:
                assert np.max(P.C @ a - P.d) >= eps * (1 - 1e-9) - 1e-9

    def test_node_limit(self):
        # leave |a_j| <= 0.5 on either side: the relaxation splits every choice evenly
        polys = [Polytope(np.vstack([e, -e]), [0.5, 0.5]) for e in np.eye(4)]
        with pytest.raises(NodeLimitExceeded):
            find_counterexample(polys, 4, node_limit=1)
        res = find_counterexample(polys, 4)
        assert res.value == pytest.approx(4 * (0.5 + 1e-6), abs=1e-6)


class TestBranchAndBound:
    def test_binary_knapsack(self):
        # max 5x1 + 4x2 + 3x3 s.t. 2x1 + 3x2 + x3 <= 4, pick at most one of x1, x2 via a group
        c = np.array([-5.0, -4.0, -3.0, 0.0])
        lp = LinearProgram(c, A_ub=[[2.0, 3.0, 1.0, 0.0]], b_ub=[4.0],
                           A_eq=[[1.0, 1.0, 0.0, 1.0]], b_eq=[1.0], lb=0.0, ub=1.0)
        res = milp_branch_and_bound(lp, [[0, 1, 3]])
        assert res.status == "optimal"
        assert res.value == pytest.approx(-8.0)
        np.testing.assert_allclose(res.x, [1, 0, 1, 0], atol=1e-6)
