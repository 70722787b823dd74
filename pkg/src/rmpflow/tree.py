"""RMP-tree and the pushforward / pullback / resolve passes."""

from __future__ import annotations

import copy
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionError, RmpflowError, SingularDomainError
from .gds import GdsSpec, gds_natural_rmp
from .rmp import CanonicalRmp, NaturalRmp, pinv, resolve_root
from .taskmap import TaskMap, _compose, identity


def _vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


class RmpNode:
    """A node of an RMP-tree.

    Leaves carry ``leaf_policy``: either a :class:`GdsSpec` or a callable
    ``(x, xd) -> NaturalRmp``. ``drop_jdot`` removes the ``Jdot xd`` term of the
    edge into this node during pullback (ablations and potential-field baselines).
    """

    def __init__(self, name, edge_map: TaskMap | None = None, leaf_policy=None, drop_jdot=False, children=None):
        self.name = name
        self.edge_map = edge_map
        self.leaf_policy = leaf_policy
        self.drop_jdot = bool(drop_jdot)
        self.children: list[RmpNode] = []
        for c in children or ():
            self.add_child(c)
        # per-evaluation caches
        self.x = None
        self.xd = None
        self.J = None
        self.jdotv = None
        self.rmp: NaturalRmp | None = None

    def __repr__(self):
        kind = "leaf" if self.is_leaf else "node"
        return f"RmpNode({self.name!r}, {kind}, children={len(self.children)})"

    @property
    def is_leaf(self):
        return self.leaf_policy is not None

    def add_child(self, child: RmpNode) -> RmpNode:
        if self.leaf_policy is not None:
            raise ValueError(f"leaf node {self.name!r} cannot have children")
        if child.edge_map is None:
            raise ValueError(f"child {child.name!r} needs an edge map")
        self.children.append(child)
        return child

    def add(self, name, edge_map, leaf_policy=None, drop_jdot=False) -> RmpNode:
        """Create and attach a child; returns the new node."""
        return self.add_child(RmpNode(name, edge_map, leaf_policy, drop_jdot))

    @property
    def dim(self):
        return None if self.edge_map is None else self.edge_map.dim_out

    def leaf_rmp(self, x, xd) -> NaturalRmp:
        p = self.leaf_policy
        if isinstance(p, GdsSpec):
            return gds_natural_rmp(p, x, xd)
        return p(x, xd)


def pushforward(parent_state, edge: TaskMap):
    """``(psi(x), J(x) xd)``."""
    x, xd = (_vec(v) for v in parent_state)
    if x.size != edge.dim_in or xd.size != edge.dim_in:
        raise DimensionError(f"state of size {x.size} does not match {edge.name} (dim_in={edge.dim_in})")
    return edge.value(x), edge.jacobian(x) @ xd


def _pullback_term(rmp: NaturalRmp, J, jdotv):
    f = J.T @ (rmp.f - rmp.M @ jdotv) if jdotv is not None else J.T @ rmp.f
    return f, J.T @ rmp.M @ J


def pullback(children: Sequence, parent_state, drop_jdot: Sequence[bool] | None = None) -> NaturalRmp:
    """Combine child natural RMPs ``(rmp, edge)`` into the parent space, in listed order."""
    x, xd = (_vec(v) for v in parent_state)
    n = x.size
    f = np.zeros(n)
    M = np.zeros((n, n))
    for i, (rmp, edge) in enumerate(children):
        if edge.dim_in != n:
            raise DimensionError(f"child {i}: edge {edge.name} has dim_in={edge.dim_in}, parent has {n}")
        if rmp.f.shape[0] != edge.dim_out or rmp.M.shape != (edge.dim_out, edge.dim_out):
            raise DimensionError(f"child {i}: RMP of dimension {rmp.f.shape[0]} on edge with dim_out={edge.dim_out}")
        _, J, jdotv = edge.forward(x, xd)
        if drop_jdot is not None and drop_jdot[i]:
            jdotv = None
        fi, Mi = _pullback_term(rmp, J, jdotv)
        f = f + fi
        M = M + Mi
    return NaturalRmp(f, M)


def pullback_canonical(children: Sequence, parent_state) -> CanonicalRmp:
    """Least-squares combination of child canonical RMPs.

    Minimizes ``sum_i ||J_i a + Jdot_i xd - a_i||^2_{M_i}`` with ``a_i = M_i^+ f_i``.
    """
    x, xd = (_vec(v) for v in parent_state)
    n = x.size
    lhs = np.zeros((n, n))
    rhs = np.zeros(n)
    for i, (rmp, edge) in enumerate(children):
        if edge.dim_in != n or rmp.f.shape[0] != edge.dim_out:
            raise DimensionError(f"child {i}: dimension mismatch with edge {edge.name}")
        _, J, jdotv = edge.forward(x, xd)
        a_i = pinv(rmp.M) @ rmp.f
        lhs = lhs + J.T @ rmp.M @ J
        rhs = rhs + J.T @ rmp.M @ (a_i - jdotv)
    return CanonicalRmp(pinv(lhs) @ rhs, lhs)


class RmpTree:
    """A rooted tree of task spaces over a configuration space of size ``config_dim``.

    ``root_damping`` adds a virtual child of the root with damping
    ``root_damping * I`` and zero metric, which makes the aggregate damping
    strictly positive definite.
    """

    def __init__(self, root: RmpNode, config_dim: int, root_damping: float = 0.0):
        if root.edge_map is not None:
            raise ValueError("the root node must not have an edge map")
        if root.leaf_policy is not None:
            raise ValueError("the root node must not carry a leaf policy")
        self.root = root
        self.config_dim = int(config_dim)
        self.root_damping = float(root_damping)
        self.validate()

    @classmethod
    def empty(cls, config_dim, root_damping=0.0, name="root"):
        return cls(RmpNode(name), config_dim, root_damping)

    def validate(self):
        seen = set()

        def visit(node, dim_parent, path):
            if id(node) in seen:
                raise ValueError(f"node {path} appears twice; the tree must be acyclic")
            seen.add(id(node))
            if node.edge_map is not None and node.edge_map.dim_in != dim_parent:
                raise DimensionError(
                    f"{path}: edge {node.edge_map.name} expects dim {node.edge_map.dim_in}, parent has {dim_parent}"
                )
            if node.is_leaf and node.children:
                raise ValueError(f"{path}: leaf nodes cannot have children")
            dim = self.config_dim if node.edge_map is None else node.edge_map.dim_out
            for c in node.children:
                visit(c, dim, f"{path}/{c.name}")

        visit(self.root, self.config_dim, self.root.name)

    # -- traversal -----------------------------------------------------------

    def nodes(self) -> Iterator[tuple[str, RmpNode]]:
        """Depth-first (pre-order) iteration of ``(path, node)``."""
        stack = [(self.root.name, self.root)]
        while stack:
            path, node = stack.pop()
            yield path, node
            for c in reversed(node.children):
                stack.append((f"{path}/{c.name}", c))

    def leaves(self) -> list[tuple[str, RmpNode]]:
        return [(p, n) for p, n in self.nodes() if n.is_leaf]

    def clone(self) -> RmpTree:
        return copy.deepcopy(self)

    # -- passes --------------------------------------------------------------

    def forward(self, q, qd):
        q = _vec(q)
        qd = _vec(qd)
        if q.size != self.config_dim or qd.size != self.config_dim:
            raise DimensionError(f"state has size {q.size}/{qd.size}, tree expects {self.config_dim}")
        root = self.root
        root.x, root.xd = q, qd
        try:
            self._forward(root)
        except SingularDomainError as e:
            raise _with_path(e, root) from e

    def _forward(self, node):
        for c in node.children:
            try:
                y, J, jdotv = c.edge_map.forward(node.x, node.xd)
                c.x = y
                c.xd = J @ node.xd
                c.J = J
                c.jdotv = jdotv
                self._forward(c)
            except SingularDomainError as e:
                e.node_path = [c.name] + getattr(e, "node_path", [])
                raise

    def backward(self) -> NaturalRmp:
        try:
            rmp = self._backward(self.root)
        except RmpflowError as e:
            raise _with_path(e, self.root) from e
        if self.root_damping:
            rmp = NaturalRmp(rmp.f - self.root_damping * self.root.xd, rmp.M)
        self.root.rmp = rmp
        return rmp

    def _backward(self, node):
        if node.is_leaf:
            node.rmp = node.leaf_rmp(node.x, node.xd)
            return node.rmp
        n = node.x.shape[0]
        f = np.zeros(n)
        M = np.zeros((n, n))
        for c in node.children:
            try:
                crmp = self._backward(c)
            except RmpflowError as e:
                e.node_path = [c.name] + getattr(e, "node_path", [])
                raise
            fi, Mi = _pullback_term(crmp, c.J, None if c.drop_jdot else c.jdotv)
            f = f + fi
            M = M + Mi
        node.rmp = NaturalRmp(f, M)
        return node.rmp

    def root_natural(self, q, qd) -> NaturalRmp:
        """Forward and backward pass; returns ``[f_r, M_r]``."""
        self.forward(q, qd)
        return self.backward()

    def evaluate(self, q, qd) -> CanonicalRmp:
        """The global policy ``(a_r, M_r)`` at ``(q, qd)``."""
        return resolve_root(self.root_natural(q, qd))

    def __call__(self, q, qd):
        return self.evaluate(q, qd).a

    # -- GDS aggregate -------------------------------------------------------

    def aggregate(self, q, qd):
        """Pullback metric, damping and potential ``(G, B, Phi)`` at the root.

        Every leaf must be a :class:`GdsSpec`.
        """
        self.forward(q, qd)
        G, B, phi = self._aggregate(self.root)
        if self.root_damping:
            B = B + self.root_damping * np.eye(self.config_dim)
        return G, B, phi

    def _aggregate(self, node):
        if node.is_leaf:
            p = node.leaf_policy
            if not isinstance(p, GdsSpec):
                raise TypeError(f"leaf {node.name!r} is not a GDS; no aggregate metric")
            return p.metric(node.x, node.xd), p.damping_matrix(node.x, node.xd), float(p.potential(node.x))
        n = node.x.shape[0]
        G = np.zeros((n, n))
        B = np.zeros((n, n))
        phi = 0.0
        for c in node.children:
            Gc, Bc, pc = self._aggregate(c)
            G = G + c.J.T @ Gc @ c.J
            B = B + c.J.T @ Bc @ c.J
            phi += pc
        return G, B, phi

    def aggregate_spec(self) -> GdsSpec:
        """The root pullback GDS as a :class:`GdsSpec` (metric derivatives by differences)."""
        return GdsSpec(
            dim=self.config_dim,
            metric=lambda q, qd: self.aggregate(q, qd)[0],
            damping=lambda q, qd: self.aggregate(q, qd)[1],
            potential=lambda q: self.aggregate(q, np.zeros(self.config_dim))[2],
            name="root_aggregate",
        )

    def is_gds(self):
        return all(isinstance(n.leaf_policy, GdsSpec) for _, n in self.leaves())

    # -- debugging -----------------------------------------------------------

    def describe(self) -> str:
        lines = []

        def visit(node, depth):
            dim = self.config_dim if node.edge_map is None else node.edge_map.dim_out
            bits = [f"{'  ' * depth}{node.name} [dim={dim}]"]
            if node.edge_map is not None:
                bits.append(f"edge={node.edge_map.name}")
            if node.is_leaf:
                p = node.leaf_policy
                bits.append(f"leaf={getattr(p, 'name', type(p).__name__)}")
            if node.drop_jdot:
                bits.append("drop_jdot")
            lines.append(" ".join(bits))
            for c in node.children:
                visit(c, depth + 1)

        visit(self.root, 0)
        if self.root_damping:
            lines.append(f"  (root damping {self.root_damping:g})")
        return "\n".join(lines)


def _with_path(err, root):
    path = "/".join([root.name] + getattr(err, "node_path", []))
    return type(err)(f"{path}: {err}")


def evaluate(tree: RmpTree, q, qd) -> CanonicalRmp:
    return tree.evaluate(q, qd)


def tree_flatten(tree: RmpTree) -> RmpTree:
    """Star-shaped tree with each leaf linked to the root through its composed path map."""
    root = RmpNode(tree.root.name)

    def visit(node, path_map):
        # ``path_map`` maps the root to ``node``
        for c in node.children:
            if path_map is None:
                if c.is_leaf or not c.drop_jdot:
                    composed, drop = c.edge_map, c.drop_jdot
                else:
                    # fold the dropped term into the edge so descendants inherit it
                    composed = _compose(identity(c.edge_map.dim_out), c.edge_map, keep_inner_jdot=False)
                    drop = False
            else:
                composed = _compose(c.edge_map, path_map, keep_outer_jdot=not c.drop_jdot)
                drop = False
            if c.is_leaf:
                root.add_child(RmpNode(c.name, composed, c.leaf_policy, drop_jdot=drop))
            else:
                visit(c, composed)

    visit(tree.root, None)
    return RmpTree(root, tree.config_dim, tree.root_damping)
