import csv

import numpy as np
import pytest

from rmpflow.errors import NonFiniteError, SingularDomainError
from rmpflow.leaves import spring_leaf
from rmpflow.rmp import NaturalRmp
from rmpflow.sim import (
    RunMetrics,
    SimState,
    Trajectory,
    integrate,
    lyapunov_series,
    metrics,
)
from rmpflow.taskmap import identity
from rmpflow.tree import RmpNode, RmpTree


def raw_tree(dim, fn):
    root = RmpNode("root")
    root.add("raw", identity(dim), fn)
    return RmpTree(root, dim)


def oscillator(damping=0.0):
    """``qdd = -q - damping * qd`` as a unit-metric spring GDS."""
    root = RmpNode("root")
    root.add("spring", identity(1), spring_leaf(dim=1, stiffness=1.0, gain=damping))
    return RmpTree(root, 1)


def damped_solution(t, zeta=0.1):
    # q(0) = 1, qd(0) = 0 for qdd + 2 zeta qd + q = 0
    w = np.sqrt(1.0 - zeta**2)
    return np.exp(-zeta * t) * (np.cos(w * t) + zeta / w * np.sin(w * t))


def synthetic(q, step=0.1, distances=None):
    q = np.asarray(q, dtype=float).reshape(len(q), -1)
    n = len(q)
    qd = np.vstack([np.diff(q, axis=0) / step, np.zeros((1, q.shape[1]))])
    return Trajectory(
        step=step,
        horizon=step * (n - 1),
        t=np.arange(n) * step,
        q=q,
        qd=qd,
        accel_norm=np.zeros(n),
        V=np.zeros(n),
        K=np.zeros(n),
        distances=np.zeros((n, 0)) if distances is None else np.asarray(distances, dtype=float),
    )


class TestIntegrate:
    def test_coasting(self):
        tree = raw_tree(2, lambda x, xd: NaturalRmp(np.zeros(2), np.eye(2)))
        traj = integrate(tree, SimState(0.0, [1.0, -1.0], [0.5, 2.0]), step=0.01, horizon=1.0)
        assert traj.status == "horizon"
        expected = np.array([1.0, -1.0]) + np.outer(traj.t, [0.5, 2.0])
        np.testing.assert_allclose(traj.q, expected, rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(traj.t[-1], 1.0)
        assert len(traj) == 101

    def test_harmonic_oscillator(self):
        traj = integrate(oscillator(), SimState(0.0, [1.0], [0.0]), step=1e-3, horizon=1.0)
        assert abs(traj.q[-1, 0] - np.cos(1.0)) < 1e-8

    def test_rk4_order(self):
        errors = []
        for h in (0.1, 0.05, 0.025):
            traj = integrate(oscillator(0.2), SimState(0.0, [1.0], [0.0]), step=h, horizon=2.0, detect_convergence=False)
            errors.append(abs(traj.q[-1, 0] - damped_solution(2.0)))
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all((orders > 3.8) & (orders < 4.2)), orders

    def test_uniform_time_grid(self):
        traj = integrate(oscillator(1.0), SimState(0.5, [1.0], [0.0]), step=0.02, horizon=0.5)
        np.testing.assert_allclose(np.diff(traj.t), 0.02, rtol=1e-10)
        assert traj.t[0] == 0.5

    def test_convergence_stop(self):
        traj = integrate(oscillator(2.0), SimState(0.0, [1.0], [0.0]), step=1e-2, horizon=30.0)
        assert traj.status == "converged"
        assert traj.converged_time is not None
        assert traj.t[-1] == pytest.approx(traj.converged_time + 0.1, abs=1e-9)
        assert traj.accel_norm[-1] < 1e-3 and abs(traj.qd[-1, 0]) < 1e-3

    def test_convergence_can_be_disabled(self):
        traj = integrate(oscillator(2.0), SimState(0.0, [1.0], [0.0]), step=0.1, horizon=20.0, detect_convergence=False)
        assert traj.status == "horizon"

    def test_domain_exit(self):
        def wall(x, xd):
            if x[0] < 0.5:
                raise SingularDomainError("past the wall")
            return NaturalRmp(np.zeros(1), np.eye(1))

        traj = integrate(raw_tree(1, wall), SimState(0.0, [1.0], [-1.0]), step=0.01, horizon=2.0)
        assert traj.status == "domain_exit"
        assert "past the wall" in traj.cause
        assert traj.t[-1] < 0.6

    def test_error_truncates(self):
        def broken(x, xd):
            return NaturalRmp(np.array([np.nan if x[0] > 1.5 else 0.0]), np.eye(1))

        traj = integrate(raw_tree(1, broken), SimState(0.0, [1.0], [1.0]), step=0.01, horizon=2.0)
        assert traj.status == "error"
        assert "NonFiniteError" in traj.cause
        assert np.all(np.isfinite(traj.q))

    def test_stop_fn(self):
        traj = integrate(
            raw_tree(1, lambda x, xd: NaturalRmp(np.zeros(1), np.eye(1))),
            SimState(0.0, [0.0], [1.0]),
            step=0.01,
            horizon=2.0,
            stop_fn=lambda q, qd: "far" if q[0] > 0.5 else None,
        )
        assert traj.status == "stopped" and traj.cause == "far"

    def test_plain_callable_policy(self):
        traj = integrate(lambda q, qd: -q, SimState(0.0, [1.0], [0.0]), step=1e-3, horizon=1.0)
        assert abs(traj.q[-1, 0] - np.cos(1.0)) < 1e-8
        assert np.all(np.isnan(traj.V))

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            integrate(oscillator(), SimState(0.0, [1.0], [0.0]), step=0.0)
        with pytest.raises(ValueError):
            integrate(oscillator(), SimState(0.0, [1.0], [0.0]), step=0.1, horizon=0.01)
        with pytest.raises(NonFiniteError):
            SimState(0.0, [np.nan], [0.0])
        with pytest.raises(ValueError):
            SimState(0.0, [0.0, 1.0], [0.0])

    def test_deterministic(self):
        a = integrate(oscillator(0.5), SimState(0.0, [1.0], [0.3]), step=0.01, horizon=1.0)
        b = integrate(oscillator(0.5), SimState(0.0, [1.0], [0.3]), step=0.01, horizon=1.0)
        assert a.rows().tobytes() == b.rows().tobytes()

    def test_energy_recorded(self):
        traj = integrate(oscillator(), SimState(0.0, [1.0], [0.0]), step=1e-3, horizon=1.0)
        np.testing.assert_allclose(traj.V, 0.5, rtol=1e-9)
        np.testing.assert_allclose(traj.K, 0.5 * traj.qd[:, 0] ** 2)

    def test_distances_recorded(self):
        traj = integrate(oscillator(), SimState(0.0, [1.0], [0.0]), step=0.1, horizon=1.0, distance_fn=lambda q: [q[0] + 2, 5.0])
        assert traj.distances.shape == (len(traj), 2)
        np.testing.assert_allclose(traj.min_distance, traj.q[:, 0] + 2)


class TestCsv:
    def test_header(self):
        traj = synthetic(np.zeros((3, 2)))
        assert traj.csv_header() == ["t", "q0", "q1", "qd0", "qd1", "V", "K", "mindist"]
        assert traj.rows().shape == (3, 8)

    def test_write_round_trip(self, tmp_path):
        traj = integrate(oscillator(0.3), SimState(0.0, [1.0], [0.0]), step=0.1, horizon=1.0)
        path = tmp_path / "traj.csv"
        traj.write_csv(path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == traj.csv_header()
        data = np.array(rows[1:], dtype=float)
        np.testing.assert_array_equal(data[:, :5], traj.rows()[:, :5])


class TestLyapunovSeries:
    def test_constant_at_equilibrium(self):
        tree = oscillator(1.0)
        traj = integrate(tree, SimState(0.0, [0.0], [0.0]), step=0.01, horizon=0.05, detect_convergence=False)
        series = lyapunov_series(traj, tree.aggregate)
        np.testing.assert_array_equal(series.V, 0.0)
        np.testing.assert_array_equal(series.Vdot, 0.0)

    def test_rate_matches_dissipation(self):
        tree = oscillator(0.5)
        traj = integrate(tree, SimState(0.0, [1.0], [0.0]), step=1e-3, horizon=2.0, detect_convergence=False)
        series = lyapunov_series(traj, tree.aggregate)
        assert np.all(series.residual() < 1e-3 * (1 + np.abs(series.Vdot)))
        assert np.all(np.diff(series.V) <= 1e-12)
        assert series.rows().shape == (len(traj), 4)


class TestMetrics:
    def test_ending_at_goal(self):
        traj = synthetic([[0.0], [0.5], [1.0]])
        m = metrics(traj, [1.0], lambda q: q)
        assert m.goal_distance == 0.0
        assert m.path_length == pytest.approx(1.0)

    def test_stationary(self):
        traj = synthetic(np.zeros((5, 2)))
        m = metrics(traj, [1.0, 0.0], lambda q: q)
        assert m.path_length == 0.0 and m.goal_distance == 1.0
        assert m.time_to_goal == traj.horizon

    def test_collision_intensity(self):
        d = np.ones((20, 3))
        d[4, 1] = -0.01
        d[7, 2] = 0.0
        m = metrics(synthetic(np.zeros((20, 1)), distances=d), [0.0], lambda q: q)
        assert m.collision_intensity == pytest.approx(0.10)
        assert m.collided

    def test_distance_fn_overrides(self):
        m = metrics(synthetic(np.zeros((4, 1))), [0.0], lambda q: q, distance_fn=lambda q: [1.0])
        assert m.collision_intensity == 0.0 and not m.collided

    def test_time_to_goal_uses_convergence(self):
        traj = integrate(oscillator(2.0), SimState(0.0, [1.0], [0.0]), step=1e-2, horizon=30.0)
        m = metrics(traj, [0.0], lambda q: q)
        assert m.time_to_goal == traj.converged_time < 30.0

    def test_as_dict(self):
        d = RunMetrics(1.0, 2.0, 0.1, 0.0, False).as_dict()
        assert list(d) == ["time_to_goal", "path_length", "goal_distance", "collision_intensity", "collided"]
