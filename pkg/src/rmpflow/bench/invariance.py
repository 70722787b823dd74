"""Coordinate invariance: the same leaf set over ``q`` and over warped coordinates ``h(q)``."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import NumericalFailure
from ..rmp import NaturalRmp
from ..sim import SimState, integrate
from ..taskmap import identity, make_linear, make_sine_warp, make_sine_warp_inverse
from ..tree import RmpNode, RmpTree
from . import io
from .trees import build_node


class _Damper:
    name = "damper"

    def __init__(self, c):
        self.c = float(c)

    def __call__(self, x, xd):
        return NaturalRmp(-self.c * xd, np.zeros((x.size, x.size)))


def warp_maps(warp, dim):
    """``(h, h_inverse)`` as task maps."""
    if warp.kind == "identity":
        return identity(dim), identity(dim)
    if warp.kind == "linear":
        A = np.asarray(warp.matrix, dtype=float)
        return make_linear(A), make_linear(np.linalg.inv(A))
    return make_sine_warp(dim, warp.amplitude), make_sine_warp_inverse(dim, warp.amplitude)


def _leaf_set(decl):
    """Top-level nodes of the declared tree, with any root damping as a damper leaf in ``q``."""
    nodes = [build_node(c) for c in decl.children]
    if decl.root_damping:
        nodes.append(RmpNode("damper", identity(decl.config_dim), _Damper(decl.root_damping)))
    return nodes


def build_pair(cfg):
    """Trees over ``q`` and over ``h(q)``; the latter reaches the leaves through ``h^-1``."""
    decl = cfg.tree
    n = decl.config_dim
    h, hinv = warp_maps(cfg.warp, n)
    root_q = RmpNode("root", children=_leaf_set(decl))
    unwarp = RmpNode("unwarp", hinv, children=_leaf_set(decl))
    root_w = RmpNode("root", children=[unwarp])
    return RmpTree(root_q, n), RmpTree(root_w, n), h


def leaf_states(tree, q, qd):
    tree.forward(q, qd)
    return np.concatenate([node.x for _, node in tree.leaves()])


@dataclass
class InvarianceResult:
    config: object
    trajectory_q: object
    trajectory_w: object
    leaf_q: np.ndarray
    leaf_w: np.ndarray
    summary: dict = field(default_factory=dict)

    def write(self, out):
        out = Path(out)
        io.write_trajectory(out / "trajectory_q.csv", self.trajectory_q)
        io.write_trajectory(out / "trajectory_warped.csv", self.trajectory_w)
        k = self.leaf_q.shape[1]
        header = ["t"] + [f"x{i}" for i in range(k)] + [f"xw{i}" for i in range(k)]
        io.write_csv(out / "leaf_space.csv", header, np.column_stack([self.trajectory_q.t, self.leaf_q, self.leaf_w]))
        runs = [io.run_record("q", self.trajectory_q), io.run_record("warped", self.trajectory_w)]
        io.write_json(out / "metrics.json", io.metrics_document("invariance", self.config.seed, runs, self.summary))


def run_invariance(cfg) -> InvarianceResult:
    tree_q, tree_w, h = build_pair(cfg)
    q0 = np.asarray(cfg.start.q, dtype=float)
    qd0 = np.asarray(cfg.start.qd, dtype=float)
    y0, J0, _ = h.forward(q0, qd0)
    step, horizon = cfg.integration.step, cfg.integration.horizon
    tq = integrate(tree_q, SimState(0.0, q0, qd0), step, horizon, energy=False, detect_convergence=False)
    tw = integrate(tree_w, SimState(0.0, y0, J0 @ qd0), step, horizon, energy=False, detect_convergence=False)
    for name, tr in (("q", tq), ("warped", tw)):
        if tr.status not in ("horizon",):
            raise NumericalFailure(f"{name} trajectory ended early ({tr.status}): {tr.cause}")
    Xq = np.array([leaf_states(tree_q, q, qd) for q, qd in zip(tq.q, tq.qd)])
    Xw = np.array([leaf_states(tree_w, q, qd) for q, qd in zip(tw.q, tw.qd)])
    dev = float(np.max(np.abs(Xq - Xw)))
    summary = {"warp": cfg.warp.kind, "sup_deviation": dev, "samples": len(tq), "horizon": horizon, "step": step}
    return InvarianceResult(cfg, tq, tw, Xq, Xw, summary)
