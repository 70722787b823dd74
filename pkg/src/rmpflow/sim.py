"""Fixed-step integration of tree policies and trajectory diagnostics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteError, RmpflowError, SingularDomainError

DEFAULT_STEP = 1e-3
DEFAULT_HORIZON = 5.0
CONVERGED_SPEED = 1e-3
CONVERGED_ACCEL = 1e-3
CONVERGED_DWELL = 0.1


@dataclass(frozen=True)
class SimState:
    t: float
    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        qd = np.atleast_1d(np.asarray(self.qd, dtype=float))
        if q.shape != qd.shape or q.ndim != 1:
            raise ValueError(f"q and qd must be vectors of equal size, got {q.shape} and {qd.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd)) and np.isfinite(self.t)):
            raise NonFiniteError("initial state has non-finite entries")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)


@dataclass
class Trajectory:
    """Uniformly sampled states with per-sample diagnostics.

    ``status`` is ``"horizon"``, ``"converged"``, ``"domain_exit"``,
    ``"stopped"`` or ``"error"``; ``cause`` holds the message for the last three.
    """

    step: float
    horizon: float
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    accel_norm: np.ndarray
    V: np.ndarray
    K: np.ndarray
    distances: np.ndarray
    status: str = "horizon"
    cause: str | None = None
    converged_time: float | None = None

    def __len__(self):
        return self.t.size

    @property
    def final(self) -> SimState:
        return SimState(float(self.t[-1]), self.q[-1], self.qd[-1])

    @property
    def min_distance(self) -> np.ndarray:
        if self.distances.shape[1] == 0:
            return np.full(self.t.size, np.nan)
        return self.distances.min(axis=1)

    def csv_header(self):
        n = self.q.shape[1]
        return ["t"] + [f"q{i}" for i in range(n)] + [f"qd{i}" for i in range(n)] + ["V", "K", "mindist"]

    def rows(self):
        return np.column_stack([self.t, self.q, self.qd, self.V, self.K, self.min_distance])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.csv_header())
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


class _Recorder:
    def __init__(self, n, capacity):
        self.t = np.empty(capacity)
        self.q = np.empty((capacity, n))
        self.qd = np.empty((capacity, n))
        self.acc = np.full(capacity, np.nan)
        self.size = 0

    def push(self, t, q, qd):
        i = self.size
        self.t[i] = t
        self.q[i] = q
        self.qd[i] = qd
        self.size += 1


def _policy_of(tree):
    return tree if callable(tree) else tree.__call__


def integrate(
    tree,
    initial: SimState,
    step: float = DEFAULT_STEP,
    horizon: float = DEFAULT_HORIZON,
    *,
    energy: bool | None = None,
    distance_fn: Callable | None = None,
    stop_fn: Callable | None = None,
    detect_convergence: bool = True,
) -> Trajectory:
    """Integrate ``qdd = tree(q, qd)`` with classical fixed-step RK4.

    ``energy`` records ``V`` and ``K`` from the tree's aggregate GDS (default:
    whenever every leaf is a GDS). ``distance_fn(q)`` returns signed distances
    recorded per sample. ``stop_fn(q, qd)`` may return a reason string to end
    the run early. Policy failures truncate the trajectory and are recorded in
    ``status`` and ``cause``.
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step!r}")
    if not horizon >= step:
        raise ValueError(f"horizon {horizon!r} shorter than step {step!r}")
    policy = _policy_of(tree)
    if energy is None:
        energy = hasattr(tree, "is_gds") and tree.is_gds()
    n_steps = int(round(horizon / step))
    n = initial.q.size
    rec = _Recorder(n, n_steps + 1)
    q, qd = initial.q.copy(), initial.qd.copy()
    t0 = initial.t
    status, cause, conv_time = "horizon", None, None
    dwell_start = None
    rec.push(t0, q, qd)
    h, h2, h6 = step, 0.5 * step, step / 6.0
    i = 0
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        while True:
            t = t0 + i * step
            try:
                k1v = policy(q, qd)
                rec.acc[rec.size - 1] = np.sqrt(k1v @ k1v)
                if detect_convergence:
                    if np.sqrt(qd @ qd) < CONVERGED_SPEED and rec.acc[rec.size - 1] < CONVERGED_ACCEL:
                        if dwell_start is None:
                            dwell_start = t
                        if t - dwell_start >= CONVERGED_DWELL - 1e-12:
                            status, conv_time = "converged", dwell_start
                            break
                    else:
                        dwell_start = None
                if stop_fn is not None:
                    reason = stop_fn(q, qd)
                    if reason:
                        status, cause = "stopped", str(reason)
                        break
                if i >= n_steps:
                    break
                q2 = q + h2 * qd
                qd2 = qd + h2 * k1v
                k2v = policy(q2, qd2)
                q3 = q + h2 * qd2
                qd3 = qd + h2 * k2v
                k3v = policy(q3, qd3)
                q4 = q + h * qd3
                qd4 = qd + h * k3v
                k4v = policy(q4, qd4)
                q_new = q + h6 * (qd + 2.0 * qd2 + 2.0 * qd3 + qd4)
                qd_new = qd + h6 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            except SingularDomainError as e:
                status, cause = "domain_exit", str(e)
                break
            except (RmpflowError, FloatingPointError, np.linalg.LinAlgError) as e:
                status, cause = "error", f"{type(e).__name__}: {e}"
                break
            if not (np.all(np.isfinite(q_new)) and np.all(np.isfinite(qd_new))):
                status, cause = "error", f"non-finite state after t={t:.6g}"
                break
            q, qd = q_new, qd_new
            i += 1
            rec.push(t0 + i * step, q, qd)

    m = rec.size
    traj = Trajectory(
        step=step,
        horizon=horizon,
        t=rec.t[:m].copy(),
        q=rec.q[:m].copy(),
        qd=rec.qd[:m].copy(),
        accel_norm=rec.acc[:m].copy(),
        V=np.full(m, np.nan),
        K=np.full(m, np.nan),
        distances=np.zeros((m, 0)),
        status=status,
        cause=cause,
        converged_time=conv_time,
    )
    if energy:
        _fill_energy(traj, tree)
    if distance_fn is not None:
        traj.distances = np.array([np.atleast_1d(distance_fn(qi)) for qi in traj.q])
    return traj


def _fill_energy(traj, tree):
    for i in range(len(traj)):
        try:
            G, _, phi = tree.aggregate(traj.q[i], traj.qd[i])
        except RmpflowError:
            continue
        k = 0.5 * float(traj.qd[i] @ G @ traj.qd[i])
        traj.K[i] = k
        traj.V[i] = k + phi


@dataclass(frozen=True)
class LyapunovSeries:
    t: np.ndarray
    V: np.ndarray
    Vdot: np.ndarray
    dissipation: np.ndarray  # -qd' B qd

    def residual(self):
        return np.abs(self.Vdot - self.dissipation)

    def rows(self):
        return np.column_stack([self.t, self.V, self.Vdot, self.dissipation])


def lyapunov_series(traj: Trajectory, root_aggregate: Callable) -> LyapunovSeries:
    """``V = 1/2 qd' G qd + Phi`` along ``traj`` with its numeric rate and ``-qd' B qd``.

    ``root_aggregate(q, qd)`` returns the aggregate ``(G, B, Phi)``.
    """
    m = len(traj)
    V = np.empty(m)
    diss = np.empty(m)
    for i in range(m):
        G, B, phi = root_aggregate(traj.q[i], traj.qd[i])
        qd = traj.qd[i]
        V[i] = 0.5 * float(qd @ G @ qd) + phi
        diss[i] = -float(qd @ B @ qd)
    if m >= 3:
        Vdot = np.gradient(V, traj.t, edge_order=2)
    elif m == 2:
        Vdot = np.full(2, (V[1] - V[0]) / (traj.t[1] - traj.t[0]))
    else:
        Vdot = np.zeros(m)
    return LyapunovSeries(traj.t.copy(), V, Vdot, diss)


@dataclass(frozen=True)
class RunMetrics:
    time_to_goal: float
    path_length: float
    goal_distance: float
    collision_intensity: float
    collided: bool

    FIELDS = ("time_to_goal", "path_length", "goal_distance", "collision_intensity", "collided")

    def as_dict(self):
        return {k: getattr(self, k) for k in self.FIELDS}


def metrics(traj: Trajectory, goal, end_effector: Callable, distance_fn: Callable | None = None) -> RunMetrics:
    """Performance measures of one goal-reaching run.

    ``end_effector(q)`` maps configurations to task positions; signed
    distances come from ``distance_fn`` or else from ``traj.distances``.
    """
    goal = np.atleast_1d(np.asarray(goal, dtype=float))
    ttg = traj.converged_time if traj.status == "converged" else traj.horizon
    speeds = np.linalg.norm(traj.qd[:-1], axis=1)
    path = float(np.sum(speeds) * traj.step)
    ee = np.array([np.atleast_1d(end_effector(q)) for q in traj.q])
    gd = float(np.min(np.linalg.norm(ee - goal, axis=1)))
    if distance_fn is not None:
        D = np.array([np.atleast_1d(distance_fn(q)) for q in traj.q])
    else:
        D = traj.distances
    if D.size:
        intensity = float(np.mean(np.any(D <= 0.0, axis=1)))
    else:
        intensity = 0.0
    return RunMetrics(float(ttg), path, gd, intensity, intensity > 0.0)
