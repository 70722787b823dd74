"""Build RMP-trees from declarations."""

from __future__ import annotations

import dataclasses

from ..gds import GdsSpec
from ..leaves import build_leaf
from ..taskmap import build_map
from ..tree import RmpNode, RmpTree


def build_leaf_policy(decl):
    policy = build_leaf(decl.name, dict(decl.params))
    if not decl.curvature:
        if not isinstance(policy, GdsSpec):
            raise TypeError(f"curvature toggle applies to GDS leaves only, not {decl.name!r}")
        policy = dataclasses.replace(policy, use_xi=False, use_Xi=False)
    return policy


def build_node(decl) -> RmpNode:
    edge = build_map(decl.map.name, dict(decl.map.params))
    leaf = build_leaf_policy(decl.leaf) if decl.leaf is not None else None
    node = RmpNode(decl.name, edge, leaf, drop_jdot=decl.drop_jdot)
    for c in decl.children:
        node.add_child(build_node(c))
    return node


def build_tree(decl, root_name="root") -> RmpTree:
    root = RmpNode(root_name)
    for c in decl.children:
        root.add_child(build_node(c))
    return RmpTree(root, decl.config_dim, decl.root_damping)
