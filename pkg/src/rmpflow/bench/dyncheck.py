"""Rigid-chain dynamics from the RMP-tree against the Lagrangian oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..rigid import (
    ChainModel,
    chain_tree,
    forward_dynamics_rmp,
    inverse_dynamics_rmp,
    lagrangian_forward,
    lagrangian_terms,
)
from . import io


def chain_of(decl) -> ChainModel:
    return ChainModel(decl.link_lengths, decl.masses, decl.mass_offsets, decl.gravity)


def check_chain(chain: ChainModel, rng, samples, q_range, qd_range, tau_range) -> dict:
    tree = chain_tree(chain)
    n = chain.dof
    worst = dict(forward_rel=0.0, mass_matrix_abs=0.0, bias_abs=0.0, roundtrip_abs=0.0, asymmetry=0.0, min_eig=np.inf)
    for _ in range(samples):
        q = rng.uniform(-q_range, q_range, n)
        qd = rng.uniform(-qd_range, qd_range, n)
        tau = rng.uniform(-tau_range, tau_range, n)
        qdd_des = rng.uniform(-1.0, 1.0, n)
        rmp = tree.root_natural(q, qd)
        M_o, h_o = lagrangian_terms(chain, q, qd)
        a_rmp = forward_dynamics_rmp(chain, q, qd, tau, tree=tree)
        a_orc = lagrangian_forward(chain, q, qd, tau)
        tau_id = inverse_dynamics_rmp(chain, q, qd, qdd_des, tree=tree)
        back = forward_dynamics_rmp(chain, q, qd, tau_id, tree=tree)
        worst["forward_rel"] = max(worst["forward_rel"], float(np.linalg.norm(a_rmp - a_orc) / np.linalg.norm(a_orc)))
        worst["mass_matrix_abs"] = max(worst["mass_matrix_abs"], float(np.max(np.abs(rmp.M - M_o))))
        worst["bias_abs"] = max(worst["bias_abs"], float(np.max(np.abs(-rmp.f - h_o))))
        worst["roundtrip_abs"] = max(worst["roundtrip_abs"], float(np.max(np.abs(back - qdd_des))))
        worst["asymmetry"] = max(worst["asymmetry"], float(np.max(np.abs(rmp.M - rmp.M.T))))
        worst["min_eig"] = min(worst["min_eig"], float(np.linalg.eigvalsh(0.5 * (rmp.M + rmp.M.T))[0]))
    return worst


def pendulum_checks(g=9.81, length=1.0, mass=1.0) -> dict:
    chain = ChainModel([length], [mass], gravity=(0.0, -g))
    qs = np.linspace(-np.pi, np.pi, 25)
    err = max(abs(forward_dynamics_rmp(chain, [q], [0.0])[0] + g / length * np.sin(q)) for q in qs)
    hold = inverse_dynamics_rmp(chain, [np.pi / 2], [0.0], [0.0])[0]
    return {
        "pendulum_max_abs_error": float(err),
        "pendulum_at_pi_6": float(forward_dynamics_rmp(chain, [np.pi / 6], [0.0])[0]),
        "static_hold_torque": float(hold),
        "static_hold_expected": mass * g * length,
    }


@dataclass
class DyncheckResult:
    config: object
    chains: dict
    pendulum: dict
    summary: dict = field(default_factory=dict)

    def write(self, out):
        runs = [io.run_record(name, status="ok", **vals) for name, vals in self.chains.items()]
        io.write_json(Path(out) / "metrics.json", io.metrics_document("dyncheck", self.config.seed, runs, self.summary))


def run_dyncheck(cfg) -> DyncheckResult:
    chains = {}
    for i, decl in enumerate(cfg.chains):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(cfg.seed), i])))
        chains[decl.name] = check_chain(chain_of(decl), rng, cfg.samples, cfg.q_range, cfg.qd_range, cfg.tau_range)
    pend = pendulum_checks()
    summary = {"chains": chains, **pend}
    return DyncheckResult(cfg, chains, pend, summary)
