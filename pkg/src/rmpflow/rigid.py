"""Forward and inverse dynamics of planar point-mass chains by RMP message passing.

Each point mass is a leaf GDS on its 2D position with metric ``m I``, zero
damping and gravity potential ``-m g . p``. The root natural RMP of such a
tree is ``[-(C qd + grad Phi), M(q)]``, the Lagrangian mass matrix and bias.
A symbolic Lagrangian of the same chain serves as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateError
from .gds import GdsSpec
from .rmp import pinv
from .taskmap import make_planar_arm_fk
from .tree import RmpNode, RmpTree

DEFAULT_GRAVITY = (0.0, -9.81)
#: Joint angles are measured from the downward vertical.
DOWN = -np.pi / 2
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class ChainModel:
    """Planar revolute chain with one point mass per link.

    ``mass_offsets[i]`` places mass ``i`` at that fraction of link ``i``.
    """

    link_lengths: tuple
    masses: tuple
    mass_offsets: tuple | None = None
    gravity: tuple = DEFAULT_GRAVITY
    base_angle: float = DOWN

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.link_lengths)
        masses = tuple(float(v) for v in self.masses)
        offsets = tuple(float(v) for v in (self.mass_offsets or [1.0] * len(lengths)))
        if not lengths or len(masses) != len(lengths) or len(offsets) != len(lengths):
            raise ValueError("link_lengths, masses and mass_offsets must have the same nonzero length")
        if min(lengths) <= 0 or min(masses) <= 0:
            raise ValueError("link lengths and masses must be positive")
        object.__setattr__(self, "link_lengths", lengths)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "mass_offsets", offsets)
        object.__setattr__(self, "gravity", tuple(float(v) for v in self.gravity))

    @property
    def dof(self):
        return len(self.link_lengths)


def point_mass_leaf(mass, gravity, name="mass") -> GdsSpec:
    m = float(mass)
    g = np.asarray(gravity, dtype=float)
    G = m * np.eye(2)
    zero = np.zeros((2, 2, 2))
    return GdsSpec(
        dim=2,
        metric=lambda x, xd: G,
        potential=lambda x: -m * float(g @ x),
        potential_grad=lambda x: -m * g,
        metric_dx=lambda x, xd: zero,
        velocity_free=True,
        potential_lower_bound=-np.inf,
        name=name,
    )


def chain_tree(chain: ChainModel) -> RmpTree:
    root = RmpNode("joints")
    for i, (m, off) in enumerate(zip(chain.masses, chain.mass_offsets)):
        fk = make_planar_arm_fk(chain.link_lengths, point_offset=off, link_index=i, base_angle=chain.base_angle)
        root.add(f"mass{i}", fk, point_mass_leaf(m, chain.gravity, name=f"mass{i}"))
    return RmpTree(root, chain.dof)


def _root_terms(chain, q, qd, tree=None):
    tree = tree or chain_tree(chain)
    rmp = tree.root_natural(q, qd)
    s = np.linalg.svd(rmp.M, compute_uv=False)
    if s[0] == 0.0 or s[-1] < SINGULAR_RTOL * s[0]:
        raise DegenerateError(f"root inertia is singular (singular values {s.tolist()})")
    return rmp.f, rmp.M


def forward_dynamics_rmp(chain: ChainModel, q, qd, tau=None, tree=None):
    """``qdd = M_r^+ (f_r + tau)`` from the root RMP of the chain tree."""
    f, M = _root_terms(chain, q, qd, tree)
    tau = np.zeros_like(f) if tau is None else np.asarray(tau, dtype=float)
    return pinv(M) @ (f + tau)


def inverse_dynamics_rmp(chain: ChainModel, q, qd, qdd, tree=None):
    """``tau = M_r qdd - f_r``."""
    f, M = _root_terms(chain, q, qd, tree)
    return M @ np.asarray(qdd, dtype=float) - f


def dump_dynamics(chain: ChainModel, q, qd) -> dict:
    """Root inertia and bias from the tree next to the Lagrangian oracle's."""
    f, M = _root_terms(chain, q, qd)
    Mo, ho = lagrangian_terms(chain, q, qd)
    return {
        "q": np.asarray(q, dtype=float).tolist(),
        "qd": np.asarray(qd, dtype=float).tolist(),
        "M_r": M.tolist(),
        "f_r": f.tolist(),
        "bias_r": (-f).tolist(),
        "M_oracle": Mo.tolist(),
        "bias_oracle": ho.tolist(),
    }


# ----------------------------------------------------------------------------
# symbolic oracle


@lru_cache(maxsize=32)
def _lagrangian_functions(lengths, masses, offsets, gravity, base_angle):
    import sympy as sp

    n = len(lengths)
    q = sp.symbols(f"q0:{n}", real=True)
    qd = sp.symbols(f"qd0:{n}", real=True)
    gx, gy = gravity
    T = 0
    P = 0
    x = y = 0
    theta = base_angle
    for i in range(n):
        theta = theta + q[i]
        px = x + offsets[i] * lengths[i] * sp.cos(theta)
        py = y + offsets[i] * lengths[i] * sp.sin(theta)
        vx = sum(sp.diff(px, q[j]) * qd[j] for j in range(n))
        vy = sum(sp.diff(py, q[j]) * qd[j] for j in range(n))
        T += sp.Rational(1, 2) * masses[i] * (vx**2 + vy**2)
        P += -masses[i] * (gx * px + gy * py)
        x = x + lengths[i] * sp.cos(theta)
        y = y + lengths[i] * sp.sin(theta)
    qv, qdv = sp.Matrix(q), sp.Matrix(qd)
    p = sp.Matrix([T]).jacobian(qdv).T
    M = p.jacobian(qdv)
    # d/dt dT/dqd without the qdd part, minus dL/dq
    h = p.jacobian(qv) * qdv - sp.Matrix([T]).jacobian(qv).T + sp.Matrix([P]).jacobian(qv).T
    args = list(q) + list(qd)
    return sp.lambdify(args, M, "numpy"), sp.lambdify(args, h, "numpy")


def lagrangian_terms(chain: ChainModel, q, qd):
    """Mass matrix ``M(q)`` and bias ``h = C qd + grad Phi`` from the symbolic Lagrangian."""
    Mf, hf = _lagrangian_functions(
        chain.link_lengths, chain.masses, chain.mass_offsets, chain.gravity, float(chain.base_angle)
    )
    args = list(np.asarray(q, dtype=float)) + list(np.asarray(qd, dtype=float))
    return np.array(Mf(*args), dtype=float), np.array(hf(*args), dtype=float).ravel()


def lagrangian_forward(chain: ChainModel, q, qd, tau=None):
    M, h = lagrangian_terms(chain, q, qd)
    tau = np.zeros(chain.dof) if tau is None else np.asarray(tau, dtype=float)
    return np.linalg.solve(M, tau - h)
