import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stlverify.cli.benchmarks import corridor
from stlverify.modelcheck import (
    PolytopeLimitExceeded,
    check_reach_sequence,
    model_check,
    pre_evaluate_predicates,
    rtl_entailment_wholeset,
    unsafe_factor_polytope,
)
from stlverify.reach import (
    DependencyMap,
    FactorIndexTuples,
    LinearSystem,
    ReachParams,
    ReachSequence,
    factors_to_signal,
    reach_sequence,
    simulate,
)
from stlverify.setops import Polytope, Zonotope, zono_poly_intersects
from stlverify.stl import FALSE, TRUE, And, Atom, SampledTrace, compile_formula, monitor_trace, parse_stl
from stlverify.verify import tune_truncation_order

from conftest import random_stable_system, random_zonotope

DI = LinearSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
DI_X0 = Zonotope([0.0, 1.0], 0.1 * np.eye(2))
DI_U = Zonotope([0.0], [[0.5]])


def one_d_sequence(R):
    seq = ReachSequence([R], [], 1, 0, 1.0, 0.0, 2)
    return seq, FactorIndexTuples(H=[[0]], K=[[1]])


class TestUnsafeFactorPolytope:
    def test_one_dimensional_example(self):
        R = Zonotope([0.5], [[1.0, 0.2]])
        seq, tup = one_d_sequence(R)
        K = unsafe_factor_polytope(R, tup, "point", 0, Polytope([[1.0]], [0.0]))
        # 0.5 + a + 0.2 b <= 0 for some |b| <= 1  <=>  a <= -0.3
        np.testing.assert_allclose(K.C, [[1.0]])
        np.testing.assert_allclose(K.d, [-0.3])

    def test_without_error_generators_is_exact(self, rng):
        R = Zonotope([0.2, -0.1], rng.normal(size=(2, 3)))
        tup = FactorIndexTuples(H=[[0, 1, 2]], K=[[]])
        P = Polytope(rng.normal(size=(3, 2)), rng.uniform(0, 1, 3))
        K = unsafe_factor_polytope(R, tup, "point", 0, P)
        for a in rng.uniform(-1, 1, (500, 3)):
            assert K.contains(a) == P.contains(R.point(a))

    def test_validation(self):
        R = Zonotope([0.5], [[1.0, 0.2]])
        _, tup = one_d_sequence(R)
        with pytest.raises(ValueError):
            unsafe_factor_polytope(R, tup, "cell", 0, Polytope([[1.0]], [0.0]))
        with pytest.raises(ValueError):
            unsafe_factor_polytope(R, tup, "point", 0, Polytope([[1.0, 0.0]], [0.0]))

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_outside_means_disjoint(self, seed):
        rng = np.random.default_rng(seed)
        sys = random_stable_system(rng, 2, 1)
        X0, U = random_zonotope(rng, 2, 2), random_zonotope(rng, 1, 1)
        seq, tup = reach_sequence(sys, X0, U, ReachParams(0.25, 1.0, 8))
        dm = DependencyMap(seq, tup)
        P = Polytope(rng.normal(size=(3, 2)), rng.normal(size=3))
        for j in range(2 * seq.steps + 1):
            kind, i = ("point", j // 2) if j % 2 == 0 else ("interval", j // 2)
            K = unsafe_factor_polytope(seq.set_at_half_step(j), tup, kind, i, P)
            t = (j / 2) * 0.25 if kind == "point" else (i + 0.5) * 0.25
            for a in rng.uniform(-1, 1, (100, seq.n_factors)):
                if not K.contains(a):
                    E = dm.error(t)
                    assert not zono_poly_intersects(Zonotope(E.c + dm.mu(t, a), E.G), P)


class TestModelCheck:
    def test_true_formula(self):
        assert model_check(DI, DI_X0, DI_U, TRUE, 0.5, 4).unsafe == []

    def test_violated_everywhere_gives_full_box(self):
        res = model_check(DI, DI_X0, DI_U, parse_stl("x1 > 1"), 0.5, 4, pre_evaluate=False)
        assert len(res.unsafe) == 1 and res.unsafe[0].n_constraints == 0

    def test_polytope_cap(self):
        phi = parse_stl("G[0,2] (x1 < 1 | x1 > 1.05)")
        with pytest.raises(PolytopeLimitExceeded):
            model_check(DI, DI_X0, DI_U, phi, 0.25, 4, max_polytopes=1)

    def test_checklist_beyond_sequence(self):
        seq, tup = reach_sequence(DI, DI_X0, DI_U, ReachParams(0.5, 1.0, 4))
        with pytest.raises(ValueError):
            check_reach_sequence(seq, tup, compile_formula(parse_stl("N[2] x1 < 1"), 0.5, 2))

    def test_corridor_needs_factor_tracking(self):
        p = corridor()
        phi = p.formula
        dt = 0.625
        res = model_check(p.system, p.X0, p.U, phi, dt, tune_truncation_order(p.system.A, dt))
        assert res.satisfied
        assert not rtl_entailment_wholeset(res.seq, compile_formula(phi, dt, 2))

    def test_points_outside_unsafe_satisfy(self, rng):
        phi = parse_stl("G[0,2] x1 < 3")
        res = model_check(DI, DI_X0, DI_U, phi, 0.25, 6)
        assert res.unsafe
        steps = res.seq.steps
        checked = 0
        for a in rng.uniform(-1, 1, (2000, res.n_factors)):
            if any(K.contains(a) for K in res.unsafe):
                continue
            checked += 1
            x0, u = factors_to_signal(DI_X0, DI_U, a, steps)
            t, X = simulate(DI, x0, u, 0.25, 4)
            assert monitor_trace(phi, SampledTrace(t, X))
        assert checked > 100


class TestWholeSet:
    def test_worked_checklist_handcrafted(self):
        far = Zonotope([3.0, 0.0], 0.2 * np.eye(2))
        near = Zonotope([0.0, 0.0], np.eye(2))
        seq = ReachSequence([near, far, near], [near, near], 2, 0, 0.5, 1.0, 2)
        cl = compile_formula(parse_stl("N[0.5] x1 > 2 | !F[0,0.8] x2 <= 3", 2), 0.5, 2)
        assert rtl_entailment_wholeset(seq, cl)
        seq.Rt[1] = near
        assert not rtl_entailment_wholeset(seq, cl)

    def test_all_disjoint(self):
        Z = Zonotope([0.0, 0.0], np.eye(2))
        seq = ReachSequence([Z, Z], [Z], 2, 0, 1.0, 1.0, 2)
        assert rtl_entailment_wholeset(seq, compile_formula(parse_stl("G[0,1] x1 < 2"), 1.0, 2))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_baseline_dominance(self, seed):
        rng = np.random.default_rng(seed)
        sys = random_stable_system(rng, 2, 1)
        X0, U = random_zonotope(rng, 2, 2), random_zonotope(rng, 1, 1)
        X0 = Zonotope(X0.c, 0.3 * X0.G)
        b = rng.uniform(0, 4)
        phi = parse_stl(f"G[0,1] x1 < {b:.3f} | F[0,1] x2 > {rng.uniform(-1, 1):.3f}")
        res = model_check(sys, X0, U, phi, 0.25, 8)
        if rtl_entailment_wholeset(res.seq, compile_formula(phi, 0.25, 2)):
            assert res.satisfied


class TestPreEvaluate:
    def setup_method(self):
        self.seq, _ = reach_sequence(DI, DI_X0, DI_U, ReachParams(0.5, 1.0, 4))

    def test_literals(self):
        always = Atom((1.0,), 10.0, "<")
        never = Atom((1.0,), -10.0, "<=")
        mixed = Atom((1.0,), 0.5, "<")
        out = pre_evaluate_predicates(self.seq, And((always, never, mixed)))
        assert out == And((TRUE, FALSE, mixed))

    def test_nested(self):
        phi = parse_stl("G[0,1] (x1 > -5 & x2 > 0.5)")
        assert pre_evaluate_predicates(self.seq, phi) == parse_stl("G[0,1] (true & x2 > 0.5)")
