"""2D particle with an obstacle and an optional goal: curvature and potential ablations."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..sim import SimState, integrate, lyapunov_series
from . import io
from .trees import build_tree


@dataclass
class TwodResult:
    config: object
    trajectories: dict  # panel -> list of Trajectory
    lyapunov: dict  # panel -> list of LyapunovSeries
    summary: dict = field(default_factory=dict)
    runs: list = field(default_factory=list)

    def write(self, out):
        out = Path(out)
        for name, trajs in self.trajectories.items():
            for i, tr in enumerate(trajs):
                io.write_trajectory(out / name / f"traj_{i:03d}.csv", tr)
        for name, series in self.lyapunov.items():
            for i, s in enumerate(series):
                io.write_csv(out / name / f"lyapunov_{i:03d}.csv", ["t", "V", "Vdot", "minus_qdBqd"], s.rows())
        io.write_json(out / "metrics.json", io.metrics_document("twod", self.config.seed, self.runs, self.summary))


def chord_deviation(points):
    """Largest distance of ``points`` from the segment joining the first and last point."""
    a, b = points[0], points[-1]
    d = b - a
    L2 = float(d @ d)
    if L2 == 0.0:
        return float(np.max(np.linalg.norm(points - a, axis=1)))
    s = np.clip((points - a) @ d / L2, 0.0, 1.0)
    proj = a + s[:, None] * d
    return float(np.max(np.linalg.norm(points - proj, axis=1)))


def speed_variation(qd):
    speed = np.linalg.norm(qd, axis=1)
    return float(np.max(np.abs(speed - speed[0])))


def lyapunov_stats(series):
    resid = np.abs(series.Vdot - series.dissipation) / (1.0 + np.abs(series.Vdot))
    return float(np.max(series.Vdot)), float(np.max(resid))


def run_2d(cfg) -> TwodResult:
    center = np.asarray(cfg.obstacle.center, dtype=float)
    radius = cfg.obstacle.radius
    bound = cfg.workspace_bound

    def clearance(q):
        return np.linalg.norm(q - center) - radius

    def leave_workspace(q, qd):
        if np.max(np.abs(q)) > bound:
            return f"left workspace |q|_inf > {bound:g}"
        return None

    trajectories, lyap, summary, runs = {}, {}, {}, []
    for panel in cfg.panels:
        tree = build_tree(panel.tree)
        step, horizon = (panel.integration or cfg.integration).step, (panel.integration or cfg.integration).horizon
        trajs, series = [], []
        stats = {
            "min_clearance": np.inf,
            "max_chord_deviation": 0.0,
            "min_chord_deviation": np.inf,
            "max_speed_variation": 0.0,
            "statuses": [],
        }
        if panel.lyapunov:
            stats.update(max_Vdot=-np.inf, max_rate_residual=0.0)
        for i, start in enumerate(cfg.starts):
            tr = integrate(
                tree,
                SimState(0.0, start.q, start.qd),
                step,
                horizon,
                energy=False,
                distance_fn=clearance,
                stop_fn=leave_workspace,
            )
            trajs.append(tr)
            cd = chord_deviation(tr.q)
            rec = dict(
                min_clearance=float(np.min(tr.distances)),
                chord_deviation=cd,
                speed_variation=speed_variation(tr.qd),
            )
            stats["min_clearance"] = min(stats["min_clearance"], rec["min_clearance"])
            stats["max_chord_deviation"] = max(stats["max_chord_deviation"], cd)
            stats["min_chord_deviation"] = min(stats["min_chord_deviation"], cd)
            stats["max_speed_variation"] = max(stats["max_speed_variation"], rec["speed_variation"])
            stats["statuses"].append(tr.status)
            if panel.lyapunov:
                s = lyapunov_series(tr, tree.aggregate)
                series.append(s)
                vmax, resid = lyapunov_stats(s)
                rec.update(max_Vdot=vmax, max_rate_residual=resid)
                stats["max_Vdot"] = max(stats["max_Vdot"], vmax)
                stats["max_rate_residual"] = max(stats["max_rate_residual"], resid)
            runs.append(io.run_record(f"{panel.name}/{i}", tr, **rec))
        trajectories[panel.name] = trajs
        if series:
            lyap[panel.name] = series
        summary[panel.name] = stats
    return TwodResult(cfg, trajectories, lyap, summary, runs)
