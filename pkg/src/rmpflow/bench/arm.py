"""Planar arm reaching among circular obstacles: RMPflow against potential-field baselines."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..leaves import PF_SCALINGS
from ..sim import SimState, integrate, metrics
from ..taskmap import (
    make_planar_arm_fk,
    make_planar_arm_points,
    make_point_obstacle_distances,
)
from . import io
from .config import LeafDecl, MapDecl, NodeDecl, TreeDecl
from .trees import build_tree

MEASURES = ("time_to_goal", "path_length", "goal_distance", "collision_intensity", "collision_fraction")
TRIAL_HEADER = [
    "method",
    "environment",
    "trial",
    "target_x",
    "target_y",
    "time_to_goal",
    "path_length",
    "goal_distance",
    "collision_intensity",
    "collided",
    "status",
]
MAX_TARGET_DRAWS = 10_000


def target_rng(seed, trial):
    """Counter-based stream for one trial, independent of environments and methods."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(trial)])))


def sample_targets(cfg) -> np.ndarray:
    """Reachable targets clear of every environment's obstacles, shared by all environments."""
    ts = cfg.targets
    reach = sum(cfg.arm.link_lengths)
    if ts.r_max > reach:
        raise ConfigError(f"targets.r_max: {ts.r_max} exceeds the arm reach {reach}")
    obstacles = [(np.asarray(o.center), o.radius) for env in cfg.environments for o in env.obstacles]
    out = []
    for trial in range(ts.count):
        rng = target_rng(cfg.seed, trial)
        for _ in range(MAX_TARGET_DRAWS):
            r = rng.uniform(ts.r_min, ts.r_max)
            a = rng.uniform(ts.angle_min, ts.angle_max)
            p = np.array([r * np.cos(a), r * np.sin(a)])
            if all(np.linalg.norm(p - c) > rad + ts.clearance for c, rad in obstacles):
                out.append(p)
                break
        else:
            raise ConfigError(f"targets: no obstacle-free target found for trial {trial}")
    return np.array(out)


def _arm_params(cfg):
    a = cfg.arm
    return {"link_lengths": list(a.link_lengths), "base_angle": a.base_angle}


def tree_decl(cfg, method, env, goal) -> TreeDecl:
    """Tree declaration for one method, environment and goal."""
    a, lv = cfg.arm, cfg.leaves
    arm = _arm_params(cfg)
    n_points = len(a.control_points)
    centers = [list(o.center) for o in env.obstacles]
    radii = [o.radius for o in env.obstacles]
    points_map = MapDecl(name="planar_arm_points", params={**arm, "control_points": [list(p) for p in a.control_points]})
    ee_map = MapDecl(name="planar_arm_fk", params=arm)
    goal_map = MapDecl(name="offset", params={"goal": list(map(float, goal))})
    att = lv.attractor.model_dump()
    col = lv.collision
    posture = lv.posture.model_dump()
    posture["q0"] = list(a.q_start)

    if method.name == "rmpflow":
        obstacle = NodeDecl(
            name="points",
            map=points_map,
            children=[
                NodeDecl(
                    name="obstacles",
                    map=MapDecl(
                        name="point_obstacle_distances",
                        params={"n_points": n_points, "centers": centers, "radii": radii},
                    ),
                    leaf=LeafDecl(
                        name="collision",
                        params={
                            "dim": n_points * len(radii),
                            "alpha": col.alpha,
                            "epsilon": col.epsilon,
                            "b": col.b,
                            "weight": "bounded",
                            "w_max": col.w_max,
                            "sigma": col.sigma,
                            "scale_damping": True,
                        },
                    ),
                )
            ],
        )
        attractor = NodeDecl(
            name="ee",
            map=ee_map,
            children=[NodeDecl(name="goal", map=goal_map, leaf=LeafDecl(name="attractor", params=att))],
        )
        posture_leaf = LeafDecl(name="posture", params=posture)
    else:
        obs_scale, cspace_scale = PF_SCALINGS[method.scaling]
        obstacle = NodeDecl(
            name="points",
            map=points_map,
            drop_jdot=True,
            leaf=LeafDecl(
                name=method.name,
                params={
                    "kind": "obstacle",
                    "n_points": n_points,
                    "centers": centers,
                    "radii": radii,
                    "alpha": col.alpha,
                    "b": col.b,
                    "w_max": col.w_max,
                    "sigma": col.sigma,
                    "scale": obs_scale,
                },
            ),
        )
        attractor = NodeDecl(
            name="ee",
            map=ee_map,
            drop_jdot=True,
            children=[
                NodeDecl(name="goal", map=goal_map, leaf=LeafDecl(name=method.name, params={"kind": "attractor", **att}))
            ],
        )
        posture["weight"] = posture["weight"] * cspace_scale
        posture_leaf = LeafDecl(name="posture", params=posture)
    posture_node = NodeDecl(name="posture", map=MapDecl(name="identity", params={"dim": len(a.link_lengths)}), leaf=posture_leaf)
    return TreeDecl(config_dim=len(a.link_lengths), root_damping=a.root_damping, children=[obstacle, attractor, posture_node])


@dataclass
class ArmResult:
    config: object
    targets: np.ndarray
    trials: list  # dicts in (method, environment, trial) order
    aggregate: dict = field(default_factory=dict)

    def trial_rows(self):
        for t in self.trials:
            yield [t[k] for k in TRIAL_HEADER]

    def aggregate_rows(self):
        for label, agg in self.aggregate.items():
            row = [label, agg["trials"]]
            for m in MEASURES:
                row += [agg[m]["mean"], agg[m]["std"]]
            yield row

    def write(self, out):
        out = Path(out)
        io.write_csv(out / "trials.csv", TRIAL_HEADER, self.trial_rows())
        header = ["method", "trials"] + [f"{m}_{s}" for m in MEASURES for s in ("mean", "std")]
        io.write_csv(out / "aggregate.csv", header, self.aggregate_rows())
        io.write_csv(out / "targets.csv", ["trial", "x", "y"], [(i, *p) for i, p in enumerate(self.targets)])
        runs = []
        for t in self.trials:
            rec = {k: t[k] for k in ("time_to_goal", "path_length", "goal_distance", "collision_intensity", "collided")}
            runs.append(
                io.run_record(
                    f"{t['method']}/{t['environment']}/{t['trial']}", status=t["status"], cause=t["cause"], **rec
                )
            )
        io.write_json(out / "metrics.json", io.metrics_document("arm", self.config.seed, runs, self.aggregate))


def _mean_std(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"mean": float("nan"), "std": float("nan")}
    return {"mean": float(np.mean(v)), "std": float(np.std(v))}


def aggregate(trials, labels):
    out = {}
    for label in labels:
        rows = [t for t in trials if t["method"] == label]
        colliding = [t["collision_intensity"] for t in rows if t["collided"]]
        out[label] = {
            "trials": len(rows),
            "time_to_goal": _mean_std([t["time_to_goal"] for t in rows]),
            "path_length": _mean_std([t["path_length"] for t in rows]),
            "goal_distance": _mean_std([t["goal_distance"] for t in rows]),
            # percent time in collision, over colliding trials only
            "collision_intensity": _mean_std(colliding),
            "collision_fraction": _mean_std([float(t["collided"]) for t in rows]),
        }
    return out


def run_trial(cfg, method, env, goal):
    a = cfg.arm
    tree = build_tree(tree_decl(cfg, method, env, goal))
    n_points = len(a.control_points)
    points = make_planar_arm_points(a.link_lengths, a.control_points, a.base_angle)
    dist = make_point_obstacle_distances(
        n_points, [o.center for o in env.obstacles], [o.radius for o in env.obstacles]
    )
    ee = make_planar_arm_fk(a.link_lengths, base_angle=a.base_angle)
    step, horizon = cfg.integration.step, cfg.integration.horizon
    q0 = np.asarray(a.q_start, dtype=float)
    traj = integrate(
        tree,
        SimState(0.0, q0, np.zeros_like(q0)),
        step,
        horizon,
        energy=False,
        distance_fn=lambda q: dist.value(points.value(q)),
    )
    m = metrics(traj, goal, ee.value)
    collided = m.collided
    intensity = m.collision_intensity
    if traj.status == "domain_exit":
        # a barrier leaf left its domain: the arm reached an obstacle
        collided = True
        intensity = max(intensity, 1.0 / len(traj))
    return traj, {
        "time_to_goal": m.time_to_goal,
        "path_length": m.path_length,
        "goal_distance": m.goal_distance,
        "collision_intensity": intensity,
        "collided": bool(collided),
        "status": traj.status,
        "cause": traj.cause,
    }


def run_arm(cfg, progress=None) -> ArmResult:
    targets = sample_targets(cfg)
    trials = []
    labels = []
    for method in cfg.methods:
        if method.label not in labels:
            labels.append(method.label)
        for env in cfg.environments:
            for k, goal in enumerate(targets):
                _, rec = run_trial(cfg, method, env, goal)
                rec.update(method=method.label, environment=env.name, trial=k, target_x=goal[0], target_y=goal[1])
                trials.append(rec)
                if progress is not None:
                    progress(rec)
    return ArmResult(cfg, targets, trials, aggregate(trials, labels))
