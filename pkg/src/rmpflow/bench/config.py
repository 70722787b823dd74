"""Scenario configuration documents (JSON) and their validation."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    TypeAdapter,
    ValidationError,
    field_validator,
    model_validator,
)

from ..errors import ConfigError

UINT64_MAX = 2**64 - 1


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ----------------------------------------------------------------------------
# tree declarations


class MapDecl(Strict):
    name: str
    params: dict[str, Any] = Field(default_factory=dict)


class LeafDecl(Strict):
    name: str
    params: dict[str, Any] = Field(default_factory=dict)
    curvature: bool = True  # keep Xi_G and xi_G (GDS leaves only)


class NodeDecl(Strict):
    name: str
    map: MapDecl
    leaf: LeafDecl | None = None
    drop_jdot: bool = False
    children: list["NodeDecl"] = Field(default_factory=list)

    @model_validator(mode="after")
    def _leaf_xor_children(self):
        if self.leaf is not None and self.children:
            raise ValueError(f"node {self.name!r} has both a leaf and children")
        if self.leaf is None and not self.children:
            raise ValueError(f"node {self.name!r} has neither a leaf nor children")
        return self


class TreeDecl(Strict):
    config_dim: int = Field(gt=0)
    root_damping: float = Field(default=1e-3, ge=0)
    children: list[NodeDecl] = Field(min_length=1)

    @model_validator(mode="after")
    def _buildable(self):
        from .trees import build_tree

        try:
            build_tree(self)
        except (TypeError, ValueError, KeyError) as e:
            raise ValueError(f"tree does not build: {e}") from e
        return self


class Integration(Strict):
    step: float = Field(default=1e-3, gt=0)
    horizon: float = Field(default=5.0, gt=0)

    @model_validator(mode="after")
    def _horizon_covers_step(self):
        if self.horizon < self.step:
            raise ValueError("horizon must be at least one step")
        return self


class Start(Strict):
    q: list[float]
    qd: list[float]

    @model_validator(mode="after")
    def _same_size(self):
        if len(self.q) != len(self.qd):
            raise ValueError("q and qd must have the same length")
        return self


class Base(Strict):
    seed: int = Field(default=0, ge=0, le=UINT64_MAX)
    output: str | None = None
    integration: Integration = Field(default_factory=Integration)


# ----------------------------------------------------------------------------
# scenarios


class Grid1d(Strict):
    q: list[float] = Field(min_length=1)
    qd: list[float] = Field(min_length=1)

    @field_validator("q")
    @classmethod
    def _positive(cls, v):
        if min(v) <= 0:
            raise ValueError("initial q must be positive (x = 1/q)")
        return v


class Portrait(Strict):
    q_min: float = Field(gt=0)
    q_max: float = Field(gt=0)
    qd_min: float
    qd_max: float
    n: int = Field(default=15, ge=2)


class Variant(Strict):
    name: str
    tree: TreeDecl


class OnedConfig(Base):
    kind: Literal["oned"] = "oned"
    grid: Grid1d
    portrait: Portrait | None = None
    reference: LeafDecl
    variants: list[Variant] = Field(min_length=1)


class Obstacle(Strict):
    center: list[float]
    radius: float = Field(gt=0)


class Panel(Strict):
    name: str
    tree: TreeDecl
    lyapunov: bool = False
    integration: Integration | None = None  # overrides the scenario's


class TwodConfig(Base):
    kind: Literal["twod"] = "twod"
    obstacle: Obstacle
    goal: list[float] | None = None
    starts: list[Start] = Field(min_length=1)
    workspace_bound: float = Field(default=20.0, gt=0)
    panels: list[Panel] = Field(min_length=1)


class ArmFixture(Strict):
    link_lengths: list[float] = Field(min_length=1)
    base_angle: float = 0.0
    control_points: list[tuple[int, float]] = Field(min_length=1)
    q_start: list[float]
    root_damping: float = Field(default=1e-3, ge=0)

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.q_start) != len(self.link_lengths):
            raise ValueError("q_start must have one entry per link")
        if min(self.link_lengths) <= 0:
            raise ValueError("link lengths must be positive")
        for link, frac in self.control_points:
            if not (0 <= link < len(self.link_lengths) and 0.0 <= frac <= 1.0):
                raise ValueError(f"bad control point {(link, frac)}")
        return self


class Environment(Strict):
    name: str
    obstacles: list[Obstacle] = Field(min_length=1)


class TargetSampler(Strict):
    count: int = Field(default=10, ge=1)
    r_min: float = Field(gt=0)
    r_max: float = Field(gt=0)
    angle_min: float = -np.pi
    angle_max: float = np.pi
    clearance: float = Field(default=0.05, ge=0)

    @model_validator(mode="after")
    def _ordered(self):
        if not (self.r_min <= self.r_max and self.angle_min <= self.angle_max):
            raise ValueError("sampler ranges must be ordered")
        return self


class Method(Strict):
    name: Literal["rmpflow", "pf_basic", "pf_nonlinear"]
    scaling: Literal["none", "low", "med", "high"] = "none"

    @property
    def label(self):
        return self.name if self.name == "rmpflow" else f"{self.name}:{self.scaling}"


class CollisionParams(Strict):
    alpha: float = Field(default=1e-2, ge=0)
    epsilon: float = Field(default=1e-6, ge=0)
    b: float = Field(default=1.0, ge=0)
    w_max: float = Field(default=10.0, gt=0)
    sigma: float = Field(default=0.1, gt=0)


class AttractorParams(Strict):
    gain: float = Field(default=10.0, ge=0)
    w_min: float = Field(default=1.0, ge=0)
    w_max: float = Field(default=10.0, ge=0)
    sigma: float = Field(default=0.2, gt=0)
    eta: float = Field(default=2.0, ge=0)
    corner: float = Field(default=0.05, gt=0)

    @model_validator(mode="after")
    def _order(self):
        if self.w_min > self.w_max:
            raise ValueError("w_min must not exceed w_max")
        return self


class PostureParams(Strict):
    gamma_p: float = Field(default=0.5, ge=0)
    gamma_d: float = Field(default=1.0, ge=0)
    weight: float = Field(default=0.1, ge=0)


class ArmLeaves(Strict):
    collision: CollisionParams = Field(default_factory=CollisionParams)
    attractor: AttractorParams = Field(default_factory=AttractorParams)
    posture: PostureParams = Field(default_factory=PostureParams)


class ArmConfig(Base):
    kind: Literal["arm"] = "arm"
    arm: ArmFixture
    environments: list[Environment] = Field(min_length=1)
    targets: TargetSampler
    methods: list[Method] = Field(min_length=1)
    leaves: ArmLeaves = Field(default_factory=ArmLeaves)


class Warp(Strict):
    kind: Literal["identity", "linear", "sine"] = "sine"
    amplitude: float = 0.3
    matrix: list[list[float]] | None = None

    @model_validator(mode="after")
    def _invertible(self):
        if self.kind == "sine" and not abs(self.amplitude) < 1.0:
            raise ValueError("sine warp needs |amplitude| < 1 to be invertible")
        if self.kind == "linear":
            if self.matrix is None:
                raise ValueError("linear warp needs a matrix")
            A = np.asarray(self.matrix, dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise ValueError("warp matrix must be square")
            if np.linalg.cond(A) > 1e12:
                raise ValueError("warp matrix is not invertible")
        return self


class InvarianceConfig(Base):
    kind: Literal["invariance"] = "invariance"
    warp: Warp = Field(default_factory=Warp)
    tree: TreeDecl
    start: Start

    @model_validator(mode="after")
    def _dims(self):
        n = self.tree.config_dim
        if len(self.start.q) != n:
            raise ValueError("start state does not match config_dim")
        if self.warp.kind == "linear" and len(self.warp.matrix) != n:
            raise ValueError("warp matrix does not match config_dim")
        return self


class Chain(Strict):
    name: str
    link_lengths: list[float] = Field(min_length=1)
    masses: list[float] = Field(min_length=1)
    mass_offsets: list[float] | None = None
    gravity: tuple[float, float] = (0.0, -9.81)

    @model_validator(mode="after")
    def _valid(self):
        if len(self.masses) != len(self.link_lengths):
            raise ValueError("one mass per link")
        if min(self.masses) <= 0 or min(self.link_lengths) <= 0:
            raise ValueError("masses and lengths must be positive")
        if self.mass_offsets is not None and len(self.mass_offsets) != len(self.link_lengths):
            raise ValueError("one mass offset per link")
        return self


class DyncheckConfig(Base):
    kind: Literal["dyncheck"] = "dyncheck"
    chains: list[Chain] = Field(min_length=1)
    samples: int = Field(default=100, ge=1)
    q_range: float = Field(default=np.pi, gt=0)
    qd_range: float = Field(default=2.0, ge=0)
    tau_range: float = Field(default=5.0, ge=0)


ScenarioConfig = Annotated[
    Union[OnedConfig, TwodConfig, ArmConfig, InvarianceConfig, DyncheckConfig],
    Field(discriminator="kind"),
]
_ADAPTER = TypeAdapter(ScenarioConfig)


def _format(err: ValidationError) -> str:
    lines = []
    kinds = {"oned", "twod", "arm", "invariance", "dyncheck"}
    for e in err.errors():
        loc = list(e["loc"])
        if loc and loc[0] in kinds:
            loc = loc[1:]  # drop the union tag
        path = ".".join(str(p) for p in loc) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "\n".join(lines)


def parse_config(data: dict):
    """Validate a decoded config document; errors carry dotted key paths."""
    try:
        return _ADAPTER.validate_python(data)
    except ValidationError as e:
        raise ConfigError(_format(e)) from None


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return parse_config(data)


def dump_config(cfg) -> dict:
    return _ADAPTER.dump_python(cfg, mode="json")
