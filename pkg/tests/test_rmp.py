import numpy as np
import pytest
from oracles import random_spd

from rmpflow.errors import DegenerateError, DimensionError, NonFiniteError
from rmpflow.rmp import CanonicalRmp, NaturalRmp, pinv_solve, resolve, resolve_root
from rmpflow.taskmap import (
    identity,
    make_linear,
    make_planar_arm_fk,
    make_reciprocal,
    make_sine_warp,
)
from rmpflow.tree import pullback, pullback_canonical, pushforward


class TestResolve:
    def test_identity_metric(self):
        a = resolve(NaturalRmp(np.array([3.0, -1.0]), np.eye(2))).a
        np.testing.assert_array_equal(a, [3.0, -1.0])

    def test_singular_diagonal(self):
        a = resolve(NaturalRmp(np.array([4.0, 0.0]), np.diag([2.0, 0.0]))).a
        np.testing.assert_allclose(a, [2.0, 0.0])

    def test_random_spd_residual(self, rng):
        for _ in range(20):
            M = random_spd(rng, 3)
            f = rng.normal(size=3)
            a = resolve(NaturalRmp(f, M)).a
            assert np.linalg.norm(M @ a - f) < 1e-10 * np.linalg.norm(f)
            np.testing.assert_allclose(a, np.linalg.solve(M, f), rtol=1e-10)

    def test_minimum_norm_solution(self, rng):
        U = np.linalg.qr(rng.normal(size=(4, 4)))[0]
        M = U @ np.diag([3.0, 1.0, 0.0, 0.0]) @ U.T
        f = rng.normal(size=4)
        a = resolve(NaturalRmp(f, M)).a
        np.testing.assert_allclose(a, np.linalg.lstsq(M, f, rcond=None)[0], atol=1e-12)
        # no component in the null space
        np.testing.assert_allclose(U[:, 2:].T @ a, 0.0, atol=1e-12)

    def test_tiny_singular_values_are_dropped(self):
        M = np.diag([1.0, 1e-12])
        a = resolve(NaturalRmp(np.array([1.0, 1.0]), M)).a
        np.testing.assert_array_equal(a, [1.0, 0.0])

    @pytest.mark.parametrize("bad", [np.nan, np.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(NonFiniteError):
            resolve(NaturalRmp(np.array([bad, 0.0]), np.eye(2)))
        with pytest.raises(NonFiniteError):
            resolve(NaturalRmp(np.zeros(2), np.array([[1.0, bad], [0.0, 1.0]])))

    def test_degenerate_root(self):
        with pytest.raises(DegenerateError, match="degenerate root"):
            resolve_root(NaturalRmp(np.ones(2), np.zeros((2, 2))))

    def test_naturalize_round_trip(self, rng):
        M = random_spd(rng, 3)
        a = rng.normal(size=3)
        back = resolve(CanonicalRmp(a, M).naturalize()).a
        np.testing.assert_allclose(back, a, rtol=1e-10, atol=1e-10)

    def test_pinv_solve_matches_numpy(self, rng):
        M = rng.normal(size=(3, 3))
        f = rng.normal(size=3)
        np.testing.assert_allclose(pinv_solve(M, f), np.linalg.pinv(M, rcond=1e-10) @ f, rtol=1e-10)


class TestPushforward:
    def test_identity_edge(self):
        y, yd = pushforward(([1.0, 2.0], [3.0, 4.0]), identity(2))
        np.testing.assert_array_equal(y, [1.0, 2.0])
        np.testing.assert_array_equal(yd, [3.0, 4.0])

    def test_reciprocal_edge(self):
        y, yd = pushforward(([2.0], [1.0]), make_reciprocal())
        np.testing.assert_allclose(y, [0.5])
        np.testing.assert_allclose(yd, [-0.25])

    def test_swap_edge(self):
        y, yd = pushforward(([1.0, 2.0], [3.0, 4.0]), make_linear([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_array_equal(y, [2.0, 1.0])
        np.testing.assert_array_equal(yd, [4.0, 3.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            pushforward(([1.0], [1.0]), identity(2))


class TestPullback:
    def test_single_identity_child(self, rng):
        child = NaturalRmp(rng.normal(size=2), random_spd(rng, 2))
        out = pullback([(child, identity(2))], (np.zeros(2), np.ones(2)))
        np.testing.assert_array_equal(out.f, child.f)
        np.testing.assert_array_equal(out.M, child.M)

    def test_additive(self):
        kids = [(NaturalRmp(np.array([1.0]), np.array([[1.0]])), identity(1)), (NaturalRmp(np.array([2.0]), np.array([[3.0]])), identity(1))]
        out = pullback(kids, ([0.0], [0.0]))
        np.testing.assert_array_equal(out.f, [3.0])
        np.testing.assert_array_equal(out.M, [[4.0]])

    def test_reciprocal_child(self):
        # J = -1 and Jdot qd = 2 at q = qd = 1
        out = pullback([(NaturalRmp(np.array([1.0]), np.array([[1.0]])), make_reciprocal())], ([1.0], [1.0]))
        np.testing.assert_allclose(out.f, [1.0])
        np.testing.assert_allclose(out.M, [[1.0]])

    def test_drop_jdot(self):
        out = pullback([(NaturalRmp(np.array([1.0]), np.array([[1.0]])), make_reciprocal())], ([1.0], [1.0]), drop_jdot=[True])
        np.testing.assert_allclose(out.f, [-1.0])

    def test_linear_in_child_list(self, rng):
        q = rng.normal(size=2)
        qd = rng.normal(size=2)
        kids = [
            (NaturalRmp(rng.normal(size=2), random_spd(rng, 2)), make_planar_arm_fk([1.0, 0.5])),
            (NaturalRmp(rng.normal(size=2), random_spd(rng, 2)), make_sine_warp(2, 0.2)),
            (NaturalRmp(rng.normal(size=3), random_spd(rng, 3)), make_linear(rng.normal(size=(3, 2)))),
        ]
        whole = pullback(kids, (q, qd))
        parts = pullback(kids[:1], (q, qd)) + pullback(kids[1:], (q, qd))
        np.testing.assert_allclose(whole.f, parts.f, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(whole.M, parts.M, rtol=1e-12, atol=1e-12)

    def test_mismatch_names_child(self):
        kids = [(NaturalRmp(np.zeros(1), np.eye(1)), identity(1)), (NaturalRmp(np.zeros(2), np.eye(2)), identity(1))]
        with pytest.raises(DimensionError, match="child 1"):
            pullback(kids, ([0.0], [0.0]))


class TestCanonicalPullback:
    def test_single_child(self, rng):
        v = rng.normal(size=2)
        out = pullback_canonical([(NaturalRmp(v, np.eye(2)), identity(2))], (np.zeros(2), np.zeros(2)))
        np.testing.assert_allclose(out.a, v)

    def test_inertia_weighted_mean(self):
        kids = [
            (NaturalRmp(np.array([0.0]), np.array([[1.0]])), identity(1)),
            (NaturalRmp(np.array([6.0]), np.array([[2.0]])), identity(1)),  # a = 3
        ]
        out = pullback_canonical(kids, ([0.0], [0.0]))
        np.testing.assert_allclose(out.a, [2.0])

    def test_matches_resolve_of_natural_pullback(self, rng):
        for _ in range(20):
            q = rng.normal(size=2)
            qd = rng.normal(size=2)
            kids = [
                (NaturalRmp(rng.normal(size=2), random_spd(rng, 2)), make_planar_arm_fk([1.0, 0.8])),
                (NaturalRmp(rng.normal(size=2), random_spd(rng, 2)), make_sine_warp(2, 0.3)),
            ]
            a_nat = resolve(pullback(kids, (q, qd))).a
            a_can = pullback_canonical(kids, (q, qd)).a
            np.testing.assert_allclose(a_can, a_nat, rtol=1e-10, atol=1e-10)
