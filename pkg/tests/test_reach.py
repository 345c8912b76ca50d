import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from stlverify.reach import (
    DependencyMap,
    LinearSystem,
    ReachParams,
    curvature_matrices,
    curvature_term,
    dependency_eval,
    exp_remainder,
    factors_to_signal,
    input_difference_D,
    propagation_matrix,
    reach_sequence,
    simulate,
)
from stlverify.setops import Zonotope, imat_frobenius_norm, zono_interval_enclosure

from conftest import random_stable_system, random_zonotope

DI = LinearSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])


def member(c, G, x, tol=1e-9):
    return Zonotope(c, G).contains(x, tol=tol)


class TestSystemAndParams:
    def test_shapes_validated(self):
        with pytest.raises(ValueError):
            LinearSystem(np.eye(2), np.ones((3, 1)))
        with pytest.raises(ValueError):
            LinearSystem(np.ones((2, 3)), np.ones((2, 1)))

    def test_params_validated(self):
        assert ReachParams(0.25, 1.0, 4).steps == 4
        with pytest.raises(ValueError):
            ReachParams(0.3, 1.0, 4)
        with pytest.raises(ValueError):
            ReachParams(0.5, 1.0, 1)


class TestExpRemainder:
    def test_zero_matrix(self):
        E = exp_remainder(np.zeros((2, 2)), 0.5, 4)
        np.testing.assert_array_equal(E.hi, 0.0)

    def test_scalar(self):
        E = exp_remainder([[1.0]], 1.0, 2)
        assert E.hi[0, 0] == pytest.approx(math.e - 2.5, rel=1e-12)
        assert E.lo[0, 0] == pytest.approx(-(math.e - 2.5), rel=1e-12)

    def test_large_norm_branch(self):
        E = exp_remainder([[3.0]], 1.0, 3)
        assert E.hi[0, 0] == pytest.approx(math.exp(3) - (1 + 3 + 4.5 + 4.5), rel=1e-10)

    def test_decreases_with_order(self, rng):
        A = rng.normal(size=(3, 3))
        norms = [imat_frobenius_norm(exp_remainder(A, 0.3, k)) for k in range(2, 10)]
        assert all(a > b for a, b in zip(norms, norms[1:]))


class TestPropagationMatrix:
    def test_zero(self):
        np.testing.assert_allclose(propagation_matrix(np.zeros((2, 2)), 0.3), 0.3 * np.eye(2))

    def test_nilpotent(self):
        np.testing.assert_allclose(propagation_matrix([[0, 1], [0, 0]], 0.1), [[0.1, 0.005], [0.0, 0.1]], atol=1e-15)

    def test_branches_agree(self, rng):
        from stlverify.reach import _propagation_series

        for _ in range(5):
            A = rng.normal(size=(3, 3))
            T = np.linalg.solve(A, expm(A * 0.2) - np.eye(3))
            np.testing.assert_allclose(_propagation_series(A, 0.2), T, rtol=1e-10, atol=1e-12)

    def test_exact_constant_input_response(self, rng):
        sys = random_stable_system(rng, 3, 1)
        T = propagation_matrix(sys.A, 0.5)
        # d/dt x = A x + b from 0: x(dt) = T b
        aug = np.zeros((4, 4))
        aug[:3, :3] = sys.A
        aug[:3, 3] = sys.B[:, 0]
        np.testing.assert_allclose(T @ sys.B[:, 0], expm(aug * 0.5)[:3, 3], atol=1e-12)


class TestCurvature:
    def test_zero_matrix(self):
        F, G = curvature_matrices(np.zeros((2, 2)), 0.5, 4)
        for M in (F, G):
            np.testing.assert_array_equal(M.lo, 0.0)
            np.testing.assert_array_equal(M.hi, 0.0)

    def test_scalar_second_order(self):
        T = curvature_term([[1.0]], 0.5, 2)
        assert T.lo[0, 0] == pytest.approx(-0.03125)
        assert T.hi[0, 0] == 0.0

    def test_rejects_low_order(self):
        with pytest.raises(ValueError):
            curvature_matrices(np.eye(2), 0.1, 1)

    def test_vanishes_with_step(self, rng):
        A = rng.normal(size=(3, 3))
        for M_idx in (0, 1):
            norms = [imat_frobenius_norm(curvature_matrices(A, dt, 6)[M_idx]) for dt in (0.4, 0.2, 0.1, 0.05)]
            assert all(a > b for a, b in zip(norms, norms[1:]))
            assert norms[-1] < 0.02 * norms[0]


class TestInputDifference:
    def test_point_input(self, rng):
        D = input_difference_D(rng.normal(size=(2, 2)), 0.1, 4, Zonotope([0.0, 0.0]))
        np.testing.assert_allclose(zono_interval_enclosure(D).hi, 0.0)

    def test_zero_matrix(self):
        D = input_difference_D(np.zeros((2, 2)), 0.1, 4, Zonotope([0.0, 0.0], np.eye(2)))
        np.testing.assert_allclose(zono_interval_enclosure(D).hi, 0.0)

    def test_quadratic_order(self, rng):
        for _ in range(3):
            sys = random_stable_system(rng, 3, 2)
            U0 = Zonotope(np.zeros(3), sys.B @ np.diag([0.5, 0.3]))
            r = [zono_interval_enclosure(input_difference_D(sys.A, dt, 8, U0)).hi.max() for dt in (0.02, 0.01)]
            assert 3.2 <= r[0] / r[1] <= 4.8


class TestReachSequence:
    def test_small_scale_counts(self):
        seq, tup = reach_sequence(DI, Zonotope([0, 1], 0.1 * np.eye(2)), Zonotope([0], [[0.5]]), ReachParams(0.5, 1.0, 4))
        assert len(seq.Rt) == 3 and len(seq.Rtau) == 2
        assert seq.n_factors == 2 + 2

    def test_points_under_zero_dynamics(self):
        sys = LinearSystem(np.zeros((2, 2)), np.eye(2))
        seq, _ = reach_sequence(sys, Zonotope([1.0, 2.0]), Zonotope([0.5, -1.0]), ReachParams(0.25, 1.0, 3))
        for i, R in enumerate(seq.Rt):
            I = zono_interval_enclosure(R)
            expected = np.array([1.0, 2.0]) + i * 0.25 * np.array([0.5, -1.0])
            np.testing.assert_allclose(I.lo, expected, atol=1e-14)
            np.testing.assert_allclose(I.hi, expected, atol=1e-14)

    def test_bookkeeping(self, rng):
        sys = random_stable_system(rng, 3, 2)
        X0, U = random_zonotope(rng, 3, 2), random_zonotope(rng, 2, 2)
        seq, tup = reach_sequence(sys, X0, U, ReachParams(0.1, 0.5, 4))
        for i, R in enumerate(seq.Rt):
            assert tup.H[i] == list(range(2 + 2 * i))
            assert sorted(tup.H[i] + tup.K[i]) == list(range(R.n_gens))
        for i, R in enumerate(seq.Rtau):
            assert tup.N[i] == list(range(2 + 2 * i))
            assert sorted(tup.N[i] + tup.M[i]) == list(range(R.n_gens))

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            reach_sequence(DI, Zonotope([0.0]), Zonotope([0.0]), ReachParams(0.5, 1.0, 4))
        with pytest.raises(ValueError):
            reach_sequence(DI, Zonotope([0.0, 0.0]), Zonotope([0.0, 0.0]), ReachParams(0.5, 1.0, 4))
        with pytest.raises(ValueError):
            reach_sequence(DI, Zonotope([0.0, 0.0]), Zonotope([0.0]), ReachParams(0.5, 1.0, 4), layout="other")

    def test_double_integrator_monte_carlo(self, rng):
        X0, U = Zonotope([0, 1], 0.1 * np.eye(2)), Zonotope([0], [[0.5]])
        dt, steps = 0.25, 8
        seq, _ = reach_sequence(DI, X0, U, ReachParams(dt, dt * steps, 6))
        boxes_t = [zono_interval_enclosure(R) for R in seq.Rt]
        boxes_tau = [zono_interval_enclosure(R) for R in seq.Rtau]
        for _ in range(200):
            a = rng.uniform(-1, 1, 2 + steps)
            x0, u = factors_to_signal(X0, U, a, steps)
            t, X = simulate(DI, x0, u, dt, 5)
            for k, x in enumerate(X):
                i, r = divmod(k, 5)
                if r == 0:
                    assert np.all((x >= boxes_t[i].lo - 1e-9) & (x <= boxes_t[i].hi + 1e-9))
                if i < steps:
                    assert np.all((x >= boxes_tau[i].lo - 1e-9) & (x <= boxes_tau[i].hi + 1e-9))

    def test_time_varying_inputs(self, rng):
        sys = random_stable_system(rng, 2, 1)
        Us = [Zonotope([float(k)], [[0.1]]) for k in range(4)]
        seq, _ = reach_sequence(sys, Zonotope([0.0, 0.0], 0.1 * np.eye(2)), Us, ReachParams(0.25, 1.0, 5))
        x0, u = factors_to_signal(Zonotope([0.0, 0.0], 0.1 * np.eye(2)), Us, np.ones(6), 4)
        _, X = simulate(sys, x0, u, 0.25)
        for x, R in zip(X, seq.Rt):
            assert R.contains(x, tol=1e-9)


def dependency_violations(sys, X0, U, dt, steps, rng, layout="sound", samples=100, substeps=4):
    seq, tup = reach_sequence(sys, X0, U, ReachParams(dt, dt * steps, 8), layout=layout)
    dm = DependencyMap(seq, tup)
    bad = 0
    for _ in range(samples):
        a = rng.uniform(-1, 1, seq.n_factors)
        a[: len(a) // 2] = np.sign(a[: len(a) // 2])
        x0, u = factors_to_signal(X0, U, a, steps)
        t, X = simulate(sys, x0, u, dt, substeps)
        for tk, x in zip(t, X):
            E = dm.error(tk)
            if not E.contains(x - dm.mu(tk, a), tol=1e-9):
                bad += 1
    return bad


class TestDependencyPreservation:
    def test_zero_factors(self, rng):
        sys = random_stable_system(rng, 2, 1)
        X0, U = random_zonotope(rng, 2, 2), random_zonotope(rng, 1, 1)
        seq, tup = reach_sequence(sys, X0, U, ReachParams(0.5, 1.0, 4))
        mu, E = dependency_eval(seq, tup, 0.75, np.zeros(seq.n_factors))
        np.testing.assert_array_equal(mu, 0.0)
        assert E.contains(E.c)

    def test_out_of_range_time(self, rng):
        seq, tup = reach_sequence(DI, Zonotope([0, 0], np.eye(2)), Zonotope([0], [[1]]), ReachParams(0.5, 1.0, 4))
        with pytest.raises(ValueError):
            dependency_eval(seq, tup, 1.5, np.zeros(seq.n_factors))

    def test_error_set_lies_in_reach_set(self, rng):
        sys = random_stable_system(rng, 2, 1)
        X0, U = random_zonotope(rng, 2, 2), random_zonotope(rng, 1, 1)
        seq, tup = reach_sequence(sys, X0, U, ReachParams(0.25, 1.0, 4))
        dm = DependencyMap(seq, tup)
        for t in (0.0, 0.3, 0.5, 0.9):
            a = rng.uniform(-1, 1, seq.n_factors)
            E = dm.error(t)
            R = seq.Rtau[int(t / 0.25)] if t % 0.25 else seq.Rt[int(t / 0.25)]
            for e in E.sample(rng, 5):
                assert R.contains(dm.mu(t, a) + e, tol=1e-9)

    @settings(max_examples=8, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_trajectories_inside_mu_plus_error(self, seed):
        rng = np.random.default_rng(seed)
        sys = random_stable_system(rng, 2, 1)
        X0, U = random_zonotope(rng, 2, 2), random_zonotope(rng, 1, 1)
        assert dependency_violations(sys, X0, U, 0.2, 5, rng, samples=20) == 0

    def test_classic_interval_layout_breaks_dependencies(self, rng):
        # adding the end-of-step input set does not cover the input's effect mid-step
        sys = LinearSystem([[-0.5, 1.0], [-1.0, -0.5]], [[1.0], [0.5]])
        X0, U = Zonotope([1.0, 0.0], 0.05 * np.eye(2)), Zonotope([0.2], [[1.0]])
        assert dependency_violations(sys, X0, U, 0.25, 4, rng, layout="sound", samples=40) == 0
        assert dependency_violations(sys, X0, U, 0.25, 4, rng, layout="classic", samples=40) > 0


class TestAccumulatedInputDifference:
    def test_per_step_boxing_is_sound_but_looser(self, rng):
        sys = LinearSystem([[0.0, 1.0], [-4.0, -0.4]], [[0.0], [1.0]])
        X0, U = Zonotope([1.0, 0.0], 0.05 * np.eye(2)), Zonotope([0.0], [[0.5]])
        boxed, _ = reach_sequence(sys, X0, U, ReachParams(0.1, 4.0, 6), d_order=None)
        kept, _ = reach_sequence(sys, X0, U, ReachParams(0.1, 4.0, 6))
        r_boxed = zono_interval_enclosure(boxed.diagnostics["D"][-1]).hi
        r_kept = zono_interval_enclosure(kept.diagnostics["D"][-1]).hi
        assert np.all(r_kept <= r_boxed + 1e-15)
        assert dependency_violations(sys, X0, U, 0.1, 40, rng, samples=10, substeps=2) == 0


class TestSimulate:
    def test_double_integrator_closed_form(self):
        t, X = simulate(DI, [1.0, 2.0], [[0.5], [-1.0]], 0.5, substeps=2)
        np.testing.assert_allclose(t, [0, 0.25, 0.5, 0.75, 1.0])
        # first step: x = 1 + 2t + 0.25 t^2
        np.testing.assert_allclose(X[2], [1 + 1 + 0.0625, 2.25], atol=1e-14)
        # second step from there under u = -1
        p, v = X[2]
        np.testing.assert_allclose(X[4], [p + v * 0.5 - 0.125, v - 0.5], atol=1e-14)
