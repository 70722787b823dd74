import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import LIBRARY, fd_jacobian, fd_jdot, rel_err

from rmpflow.errors import DimensionError, SingularDomainError
from rmpflow.taskmap import (
    MAPS,
    TaskMap,
    build_map,
    compose,
    identity,
    make_distance_to_point,
    make_inverse,
    make_joint_limit_map,
    make_linear,
    make_offset,
    make_planar_arm_fk,
    make_planar_arm_points,
    make_point_obstacle_distances,
    make_reciprocal,
    make_sine_warp,
    make_sine_warp_inverse,
    sine_warp_solve,
    stack,
)


def test_library_table_covers_registry():
    assert set(LIBRARY) == set(MAPS)


@pytest.mark.parametrize("name", sorted(LIBRARY))
class TestLibraryDerivatives:
    def test_jacobian_matches_central_differences(self, name, rng):
        params, sample = LIBRARY[name]
        tm = build_map(name, params)
        for _ in range(100):
            x = sample(rng)
            assert rel_err(tm.jacobian(x), fd_jacobian(tm, x)) < 1e-5

    def test_jdot_matches_differences_of_jacobian(self, name, rng):
        params, sample = LIBRARY[name]
        tm = build_map(name, params)
        for _ in range(100):
            x = sample(rng)
            xd = rng.normal(size=tm.dim_in)
            assert rel_err(tm.jdot_times_v(x, xd), fd_jdot(tm, x, xd)) < 1e-4

    def test_jdot_is_quadratic_in_velocity(self, name, rng):
        params, sample = LIBRARY[name]
        tm = build_map(name, params)
        x = sample(rng)
        xd = rng.normal(size=tm.dim_in)
        for c in (-2.0, 0.5, 3.0):
            np.testing.assert_allclose(tm.jdot_times_v(x, c * xd), c * c * tm.jdot_times_v(x, xd), rtol=1e-12, atol=1e-12)

    def test_forward_agrees_with_separate_calls(self, name, rng):
        params, sample = LIBRARY[name]
        tm = build_map(name, params)
        x = sample(rng)
        xd = rng.normal(size=tm.dim_in)
        y, J, c = tm.forward(x, xd)
        np.testing.assert_array_equal(y, tm.value(x))
        np.testing.assert_array_equal(J, tm.jacobian(x))
        np.testing.assert_allclose(c, tm.jdot_times_v(x, xd), rtol=1e-14)
        assert J.shape == (tm.dim_out, tm.dim_in)


class TestFallbacks:
    def test_value_only_map_uses_finite_differences(self, rng):
        tm = TaskMap(2, 1, lambda x: np.array([np.sin(x[0]) * x[1] ** 2]))
        x = rng.normal(size=2)
        xd = rng.normal(size=2)
        J = np.array([[np.cos(x[0]) * x[1] ** 2, 2 * np.sin(x[0]) * x[1]]])
        np.testing.assert_allclose(tm.jacobian(x), J, rtol=1e-7)
        H = np.array([[-np.sin(x[0]) * x[1] ** 2, 2 * np.cos(x[0]) * x[1]], [2 * np.cos(x[0]) * x[1], 2 * np.sin(x[0])]])
        np.testing.assert_allclose(tm.jdot_times_v(x, xd), [xd @ H @ xd], rtol=1e-4, atol=1e-6)

    def test_rejects_nonpositive_dimensions(self):
        with pytest.raises(DimensionError):
            TaskMap(0, 1, lambda x: x)


class TestCompose:
    def test_identity_with_identity(self):
        tm = compose(identity(2), identity(2))
        y, J, c = tm.forward(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
        np.testing.assert_array_equal(y, [1.0, 2.0])
        np.testing.assert_array_equal(J, np.eye(2))
        np.testing.assert_array_equal(c, [0.0, 0.0])

    def test_linear_jacobians_multiply(self, rng):
        A = rng.normal(size=(2, 3))
        B = rng.normal(size=(3, 4))
        tm = compose(make_linear(A), make_linear(B))
        np.testing.assert_allclose(tm.jacobian(rng.normal(size=4)), A @ B, rtol=1e-14)

    def test_reciprocal_after_doubling(self):
        tm = compose(make_reciprocal(), make_linear([[2.0]]))
        y, J, c = tm.forward(np.array([1.0]), np.array([1.0]))
        np.testing.assert_allclose(y, [0.5])
        np.testing.assert_allclose(J, [[-0.5]])
        # 1/(2q) has second derivative 1/q^3, so Jdot qd = 1 at q = qd = 1
        fd = fd_jdot(tm, np.array([1.0]), np.array([1.0]))
        np.testing.assert_allclose(c, fd, rtol=1e-6)
        np.testing.assert_allclose(c, [1.0], rtol=1e-12)

    def test_chain_rule_for_second_order_term(self, rng):
        outer = make_distance_to_point([0.3, -0.2], 0.1)
        inner = make_planar_arm_fk([1.0, 0.7])
        tm = compose(outer, inner)
        for _ in range(20):
            q = rng.uniform(-np.pi, np.pi, 2)
            qd = rng.normal(size=2)
            assert rel_err(tm.jacobian(q), fd_jacobian(tm, q)) < 1e-5
            assert rel_err(tm.jdot_times_v(q, qd), fd_jdot(tm, q, qd)) < 1e-4

    def test_associative(self, rng):
        a = make_sine_warp(2, 0.4)
        b = make_linear(rng.normal(size=(2, 4)))
        c = make_planar_arm_points([1.0, 0.5, 0.8], [(1, 1.0), (2, 0.5)])
        left = compose(compose(a, b), c)
        right = compose(a, compose(b, c))
        for _ in range(20):
            x = rng.normal(size=3)
            xd = rng.normal(size=3)
            for u, v in zip(left.forward(x, xd), right.forward(x, xd)):
                np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch_reports_both_sizes(self):
        with pytest.raises(DimensionError, match=r"dim_in=3.*dim_out=2"):
            compose(identity(3), identity(2))


class TestReciprocal:
    @pytest.mark.parametrize(
        "q, qd, x, J, c",
        [
            (2.0, 1.0, 0.5, -0.25, 0.25),
            (1.0, 0.0, 1.0, -1.0, 0.0),
            (-1.0, 1.0, -1.0, -1.0, -2.0),
        ],
    )
    def test_examples(self, q, qd, x, J, c):
        tm = make_reciprocal()
        y, Jq, cq = tm.forward(np.array([q]), np.array([qd]))
        np.testing.assert_allclose(y, [x])
        np.testing.assert_allclose(Jq, [[J]])
        np.testing.assert_allclose(cq, [c])
        np.testing.assert_allclose(cq, fd_jdot(tm, np.array([q]), np.array([qd])), atol=1e-8)

    @pytest.mark.parametrize("q", [0.0, 1e-13, -5e-13])
    def test_singular_near_zero(self, q):
        tm = make_reciprocal()
        for call in (lambda: tm.value(np.array([q])), lambda: tm.forward(np.array([q]), np.array([1.0]))):
            with pytest.raises(SingularDomainError):
                call()


class TestDistanceToPoint:
    def test_tangential_motion(self):
        tm = make_distance_to_point([0.0, 0.0], 1.0)
        y, J, c = tm.forward(np.array([2.0, 0.0]), np.array([0.0, 1.0]))
        np.testing.assert_allclose(y, [1.0])
        np.testing.assert_allclose(J, [[1.0, 0.0]])
        np.testing.assert_allclose(c, [0.5])
        np.testing.assert_allclose(c, fd_jdot(tm, np.array([2.0, 0.0]), np.array([0.0, 1.0])), rtol=1e-6)

    def test_radial_motion_has_no_curvature(self):
        tm = make_distance_to_point([0.0, 0.0], 1.0)
        np.testing.assert_allclose(tm.jdot_times_v(np.array([2.0, 0.0]), np.array([1.0, 0.0])), [0.0], atol=1e-15)

    def test_offset_center(self):
        tm = make_distance_to_point([1.0, 1.0], 0.5)
        np.testing.assert_allclose(tm.value(np.array([1.0, 3.0])), [1.5])

    def test_signed_inside(self):
        tm = make_distance_to_point([0.0, 0.0], 1.0)
        np.testing.assert_allclose(tm.value(np.array([0.25, 0.0])), [-0.75])

    def test_singular_at_center(self):
        with pytest.raises(SingularDomainError):
            make_distance_to_point([1.0, 2.0]).value(np.array([1.0, 2.0]))


class TestPlanarArm:
    @pytest.mark.parametrize(
        "q, expected",
        [
            ((0.0, 0.0), (2.0, 0.0)),
            ((np.pi / 2, 0.0), (0.0, 2.0)),
            ((np.pi / 2, -np.pi / 2), (1.0, 1.0)),
        ],
    )
    def test_end_effector(self, q, expected):
        tm = make_planar_arm_fk([1.0, 1.0], point_offset=1.0, link_index=1)
        np.testing.assert_allclose(tm.value(np.array(q)), expected, atol=1e-15)

    def test_hand_kinematics_jacobian(self):
        tm = make_planar_arm_fk([1.0, 1.0])
        q = np.array([np.pi / 2, -np.pi / 2])
        # d/dq1 rotates both links, d/dq2 only the second
        np.testing.assert_allclose(tm.jacobian(q), [[-1.0, 0.0], [1.0, 1.0]], atol=1e-15)
        assert rel_err(tm.jacobian(q), fd_jacobian(tm, q)) < 1e-8

    def test_intermediate_point(self):
        tm = make_planar_arm_fk([1.0, 2.0], point_offset=0.5, link_index=0)
        np.testing.assert_allclose(tm.value(np.array([np.pi / 2, 1.0])), [0.0, 0.5], atol=1e-15)
        np.testing.assert_array_equal(tm.jacobian(np.array([0.3, 1.0]))[:, 1], [0.0, 0.0])

    def test_points_stack_individual_fk(self, rng):
        lengths = [0.4, 0.35, 0.25]
        points = [(0, 0.5), (1, 1.0), (2, 0.3)]
        tm = make_planar_arm_points(lengths, points, base_angle=0.2)
        q = rng.normal(size=3)
        expect = np.concatenate([make_planar_arm_fk(lengths, f, k, base_angle=0.2).value(q) for k, f in points])
        np.testing.assert_allclose(tm.value(q), expect, rtol=1e-14)

    @pytest.mark.parametrize("bad", [[(3, 0.5)], [(0, 1.5)]])
    def test_rejects_bad_control_point(self, bad):
        with pytest.raises(ValueError):
            make_planar_arm_points([1.0, 1.0], bad)


class TestOffset:
    def test_zero_at_goal(self):
        np.testing.assert_array_equal(make_offset([1.0, 1.0]).value(np.array([1.0, 1.0])), [0.0, 0.0])

    def test_zero_goal_is_identity(self, rng):
        x = rng.normal(size=2)
        y, J, _ = make_offset([0.0, 0.0]).forward(x, x)
        np.testing.assert_array_equal(y, x)
        np.testing.assert_array_equal(J, np.eye(2))

    def test_constant_jacobian(self, rng):
        np.testing.assert_array_equal(make_offset([2.0, -1.0]).jdot_times_v(np.zeros(2), rng.normal(size=2)), [0.0, 0.0])


class TestJointLimit:
    def test_midpoint_maps_to_zero(self):
        np.testing.assert_allclose(make_joint_limit_map([-1.0], [1.0]).value(np.array([0.0])), [0.0], atol=1e-15)

    def test_unbounded_near_limit(self):
        assert make_joint_limit_map([-1.0], [1.0]).value(np.array([1.0 - 1e-5]))[0] > 10.0

    def test_jacobian_at_half(self):
        tm = make_joint_limit_map([-1.0], [1.0])
        x = np.array([0.5])
        assert rel_err(tm.jacobian(x), fd_jacobian(tm, x)) < 1e-5

    @pytest.mark.parametrize("q", [-1.0, 1.0, 1.2])
    def test_outside_limits(self, q):
        with pytest.raises(SingularDomainError):
            make_joint_limit_map([-1.0], [1.0]).value(np.array([q]))

    def test_rejects_inverted_limits(self):
        with pytest.raises(ValueError):
            make_joint_limit_map([1.0], [0.0])


class TestObstacleDistances:
    def test_ordering_is_point_major(self):
        tm = make_point_obstacle_distances(2, [[0.0, 0.0], [3.0, 0.0]], [0.5, 1.0])
        x = np.array([1.0, 0.0, 0.0, 2.0])
        expect = [0.5, 1.0, 1.5, np.hypot(3.0, 2.0) - 1.0]
        np.testing.assert_allclose(tm.value(x), expect, rtol=1e-14)

    def test_radius_count_mismatch(self):
        with pytest.raises(DimensionError):
            make_point_obstacle_distances(1, [[0.0, 0.0]], [1.0, 2.0])


class TestStackAndInverse:
    def test_stack_concatenates(self, rng):
        a = make_offset([1.0, 2.0])
        b = make_distance_to_point([0.0, 0.0])
        tm = stack([a, b])
        x = rng.normal(size=2)
        xd = rng.normal(size=2)
        y, J, c = tm.forward(x, xd)
        np.testing.assert_allclose(y, np.concatenate([a.value(x), b.value(x)]))
        np.testing.assert_allclose(J, np.vstack([a.jacobian(x), b.jacobian(x)]))
        np.testing.assert_allclose(c, np.concatenate([a.jdot_times_v(x, xd), b.jdot_times_v(x, xd)]))

    def test_stack_input_mismatch(self):
        with pytest.raises(DimensionError):
            stack([identity(2), identity(3)])

    def test_sine_warp_inverse(self, rng):
        h = make_sine_warp(3, 0.3)
        hinv = make_inverse(h, sine_warp_solve(0.3))
        for _ in range(20):
            q = rng.uniform(-6, 6, 3)
            qd = rng.normal(size=3)
            y, J, _ = h.forward(q, qd)
            np.testing.assert_allclose(hinv.value(y), q, rtol=1e-14, atol=1e-14)
            np.testing.assert_allclose(hinv.jacobian(y) @ J, np.eye(3), atol=1e-13)
            assert rel_err(hinv.jdot_times_v(y, J @ qd), fd_jdot(hinv, y, J @ qd)) < 1e-4
            # the round trip h^-1 o h is the identity, so its curvature vanishes
            np.testing.assert_allclose(compose(hinv, h).jdot_times_v(q, qd), 0.0, atol=1e-12)

    def test_closed_form_sine_inverse_matches_generic(self, rng):
        generic = make_inverse(make_sine_warp(3, 0.3), sine_warp_solve(0.3))
        closed = make_sine_warp_inverse(3, 0.3)
        for _ in range(20):
            y, yd = rng.uniform(-6, 6, 3), rng.normal(size=3)
            for a, b in zip(closed.forward(y, yd), generic.forward(y, yd)):
                np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)


class TestRegistry:
    def test_unknown_name(self):
        with pytest.raises(KeyError, match="unknown task map"):
            build_map("teleport", {})

    def test_bad_parameter(self):
        with pytest.raises(TypeError):
            build_map("offset", {"target": [0.0]})


@settings(max_examples=50, deadline=None)
@given(
    q=st.lists(st.floats(-3.0, 3.0), min_size=3, max_size=3),
    qd=st.lists(st.floats(-3.0, 3.0), min_size=3, max_size=3),
)
def test_arm_point_speed_is_jacobian_times_velocity(q, qd):
    tm = make_planar_arm_fk([0.4, 0.35, 0.25])
    q = np.array(q)
    qd = np.array(qd)
    h = 1e-6
    v = (tm.value(q + h * qd) - tm.value(q - h * qd)) / (2 * h)
    np.testing.assert_allclose(tm.jacobian(q) @ qd, v, atol=1e-8)
