"""1D barrier-map experiment: effect of the ``Jdot qd`` term in pullback."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import RmpflowError
from ..sim import SimState, integrate
from ..taskmap import identity
from ..tree import RmpNode, RmpTree
from . import io
from .trees import build_leaf_policy, build_tree


@dataclass
class OnedResult:
    config: object
    reference: list  # trajectories integrated directly in x
    variants: dict  # name -> list of q-space trajectories
    images: dict  # name -> list of (t, x, xd) arrays
    portraits: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    runs: list = field(default_factory=list)

    def write(self, out):
        out = Path(out)
        for i, tr in enumerate(self.reference):
            io.write_trajectory(out / "reference" / f"traj_{i:03d}.csv", tr)
        for name, trajs in self.variants.items():
            for i, tr in enumerate(trajs):
                io.write_trajectory(out / name / f"traj_{i:03d}.csv", tr)
                io.write_csv(out / name / f"image_{i:03d}.csv", ["t", "x", "xd"], self.images[name][i])
        for name, rows in self.portraits.items():
            io.write_csv(out / f"portrait_{name}.csv", ["q", "qd", "qdd"], rows)
        io.write_json(out / "metrics.json", io.metrics_document("oned", self.config.seed, self.runs, self.summary))


def reference_tree(leaf_decl) -> RmpTree:
    root = RmpNode("root")
    root.add("x", identity(1), build_leaf_policy(leaf_decl))
    return RmpTree(root, 1)


def to_x(q, qd):
    return 1.0 / q, -qd / q**2


def x_image(traj):
    x, xd = to_x(traj.q[:, 0], traj.qd[:, 0])
    return np.column_stack([traj.t, x, xd])


def portrait(tree, q_values, qd_values):
    rows = []
    for q in q_values:
        for qd in qd_values:
            try:
                a = float(tree(np.array([q]), np.array([qd]))[0])
            except (RmpflowError, FloatingPointError):
                a = np.nan
            rows.append((q, qd, a))
    return np.array(rows)


def run_1d(cfg) -> OnedResult:
    step, horizon = cfg.integration.step, cfg.integration.horizon
    ref_tree = reference_tree(cfg.reference)
    ref_spec = ref_tree.root.children[0].leaf_policy
    starts = [(q, qd) for q in cfg.grid.q for qd in cfg.grid.qd]

    reference = []
    for q0, qd0 in starts:
        x0, xd0 = to_x(q0, qd0)
        reference.append(integrate(ref_tree, SimState(0.0, [x0], [xd0]), step, horizon, detect_convergence=False))
    ref_bound = max(float(np.max(np.abs(tr.q[:, 0]))) for tr in reference)

    variants, images, summary, runs = {}, {}, {"reference_max_abs_x": ref_bound}, []
    for i, tr in enumerate(reference):
        runs.append(io.run_record(f"reference/{i}", tr))
    for var in cfg.variants:
        tree = build_tree(var.tree)
        trajs, imgs = [], []
        sup_dev, max_abs_x, max_dV = 0.0, 0.0, -np.inf
        complete = True
        for i, (q0, qd0) in enumerate(starts):
            tr = integrate(tree, SimState(0.0, [q0], [qd0]), step, horizon, detect_convergence=False)
            img = x_image(tr)
            ref = reference[i]
            m = min(len(tr), len(ref))
            complete &= len(tr) == len(ref)
            sup_dev = max(sup_dev, float(np.max(np.abs(img[:m, 1] - ref.q[:m, 0]))))
            max_abs_x = max(max_abs_x, float(np.max(np.abs(img[:, 1]))))
            V = np.array([0.5 * xd * xd + ref_spec.potential(np.array([x])) for _, x, xd in img])
            if V.size > 1:
                max_dV = max(max_dV, float(np.max(np.diff(V))))
            trajs.append(tr)
            imgs.append(img)
            runs.append(io.run_record(f"{var.name}/{i}", tr, deviation=float(np.max(np.abs(img[:m, 1] - ref.q[:m, 0])))))
        variants[var.name] = trajs
        images[var.name] = imgs
        summary[var.name] = {
            "sup_deviation_x": sup_dev,
            "max_abs_x": max_abs_x,
            "max_reference_V_increment": max_dV,
            "all_complete": bool(complete),
        }

    portraits = {}
    if cfg.portrait is not None:
        p = cfg.portrait
        qs = np.linspace(p.q_min, p.q_max, p.n)
        qds = np.linspace(p.qd_min, p.qd_max, p.n)
        for var in cfg.variants:
            portraits[var.name] = portrait(build_tree(var.tree), qs, qds)
        xs = np.linspace(1.0 / p.q_max, 1.0 / p.q_min, p.n)
        xds = np.linspace(-p.qd_max / p.q_min**2, -p.qd_min / p.q_min**2, p.n)
        portraits["reference"] = portrait(ref_tree, xs, xds)
    return OnedResult(cfg, reference, variants, images, portraits, summary, runs)
