"""Leaf policies: collision avoidance, attractors, joint limits, posture, and potential-field baselines."""

from __future__ import annotations

import math

import numpy as np

from .errors import SingularDomainError
from .gds import GdsSpec, MetricDecomposition
from .rmp import NaturalRmp

#: Weight scalings ``(obstacle metric, C-space metric)`` for the potential-field baselines.
PF_SCALINGS = {
    "none": (1.0, 1.0),
    "low": (3.0, 10.0),
    "med": (5.0, 50.0),
    "high": (10.0, 100.0),
}


# ----------------------------------------------------------------------------
# weight functions: each returns (w, dw/dx)


def inverse_quartic_weight(x):
    if x.min() <= 0:
        raise SingularDomainError(f"collision leaf evaluated at nonpositive distance {x.min()!r}")
    r = 1.0 / x
    w = r * r
    w = w * w
    return w, -4.0 * w * r


def bounded_weight(w_max, sigma):
    """``w_max / (1 + x/sigma)^4``; equals ``w_max`` at contact and vanishes far away."""

    def weight(x):
        if x.min() <= 0:
            raise SingularDomainError(f"collision leaf evaluated at nonpositive distance {x.min()!r}")
        z = 1.0 + x / sigma
        z2 = z * z
        w = w_max / (z2 * z2)
        return w, -4.0 * w / (sigma * z)

    return weight


def extended_bounded_weight(w_max, sigma):
    """``bounded_weight`` continued linearly (C1) into penetration, for baselines that must keep running."""

    def weight(x):
        x = np.asarray(x, dtype=float)
        z = 1.0 + np.maximum(x, 0.0) / sigma
        w = np.where(x >= 0, w_max / z**4, w_max * (1.0 - 4.0 * x / sigma))
        dw = np.where(x >= 0, -4.0 * w_max / (sigma * z**5), -4.0 * w_max / sigma)
        return w, dw

    return weight


def _diag3(v):
    n = v.size
    T = np.zeros((n, n, n))
    idx = np.arange(n)
    T[idx, idx, idx] = v
    return T


# ----------------------------------------------------------------------------
# GDS leaves


def collision_leaf(
    dim=1,
    alpha=1e-3,
    epsilon=1e-6,
    b=1.0,
    weight="inverse_quartic",
    w_max=1.0,
    sigma=1.0,
    scale_damping=False,
    velocity_dependent=True,
    name="collision",
) -> GdsSpec:
    """Barrier GDS on (a product of) 1D distance spaces.

    Metric ``w(x) u(xd)`` per coordinate with ``u = epsilon + min(0, xd) xd``
    (or ``w(x)`` alone when ``velocity_dependent`` is false), potential
    ``1/2 alpha w^2`` and damping ``b`` (or ``b w(x)`` with ``scale_damping``).
    ``weight`` is ``"inverse_quartic"`` (``1/x^4``) or ``"bounded"``.
    """
    if weight == "inverse_quartic":
        wfn = inverse_quartic_weight
    elif weight == "bounded":
        wfn = bounded_weight(w_max, sigma)
    else:
        raise ValueError(f"unknown weight {weight!r}")
    if min(alpha, epsilon, b) < 0:
        raise ValueError("alpha, epsilon and b must be nonnegative")

    def u_of(xd):
        if not velocity_dependent:
            return np.ones_like(xd), np.zeros_like(xd)
        neg = np.minimum(xd, 0.0)
        # derivative at xd = 0 is taken as 0
        return epsilon + neg * xd, 2.0 * neg

    def metric(x, xd):
        w, _ = wfn(x)
        u, _ = u_of(xd)
        return np.diag(w * u)

    def metric_dx(x, xd):
        _, dw = wfn(x)
        u, _ = u_of(xd)
        return _diag3(dw * u)

    def metric_dxd(x, xd):
        w, _ = wfn(x)
        _, du = u_of(xd)
        return _diag3(w * du)

    def potential(x):
        w, _ = wfn(x)
        return 0.5 * alpha * float(w @ w)

    def potential_grad(x):
        w, dw = wfn(x)
        return alpha * w * dw

    def damping(x, xd):
        if scale_damping:
            w, _ = wfn(x)
            return np.diag(b * w)
        return b * np.eye(dim)

    eye = np.eye(dim)
    # strides of the diagonals in flattened (dim, dim) and (dim, dim, dim) arrays
    d2, d3 = dim + 1, dim * dim + dim + 1

    def fused(x, xd):
        w, dw = wfn(x)
        u, du = u_of(xd)
        G = np.zeros((dim, dim))
        G.flat[::d2] = w * u
        T = np.zeros((dim, dim, dim))
        T.flat[::d3] = dw * u
        S = np.zeros((dim, dim, dim))
        S.flat[::d3] = w * du
        if scale_damping:
            B = np.zeros((dim, dim))
            B.flat[::d2] = b * w
        else:
            B = b * eye
        return G, T, S, alpha * w * dw, B

    if velocity_dependent:
        form = MetricDecomposition(
            R=lambda x: np.zeros((dim, dim)),
            L=lambda x: np.eye(dim),
            d=lambda x, yd: wfn(x)[0] * u_of(yd)[0],
            dd=lambda x, yd: wfn(x)[0] * u_of(yd)[1],
        )
    else:
        form = MetricDecomposition(
            R=lambda x: np.diag(wfn(x)[0]),
            L=lambda x: np.zeros((dim, dim)),
            d=lambda x, yd: np.zeros(dim),
            dd=lambda x, yd: np.zeros(dim),
        )
    return GdsSpec(
        dim=dim,
        metric=metric,
        potential=potential,
        potential_grad=potential_grad,
        damping=damping,
        metric_dx=metric_dx,
        metric_dxd=metric_dxd,
        velocity_free=not velocity_dependent,
        potential_lower_bound=0.0,
        decomposition=form,
        name=name,
        fused=fused,
    )


def collision_leaf_1d(**params) -> GdsSpec:
    """``collision_leaf`` on a single distance coordinate."""
    params.pop("dim", None)
    return collision_leaf(dim=1, **params)


def attractor_weight(w_min, w_max, sigma):
    """``w_min + (w_max - w_min) exp(-||y||^2 / sigma^2)`` and its gradient."""

    span, inv_s2 = w_max - w_min, 1.0 / sigma**2

    def weight(y):
        e = math.exp(-float(y @ y) * inv_s2)
        return w_min + span * e, (-2.0 * span * e * inv_s2) * y

    return weight


def attractor_leaf(dim=2, gain=1.0, w_min=1.0, w_max=10.0, sigma=1.0, eta=1.0, corner=0.05, name="attractor") -> GdsSpec:
    """GDS on the offset ``y = x - goal``.

    Metric ``w_a(y) I``, damping ``eta w_a(y) I`` and a pseudo-Huber potential
    ``gain (sqrt(||y||^2 + c^2) - c)`` with unit slope far away.
    """
    if w_min > w_max:
        raise ValueError("w_min must not exceed w_max")
    if min(gain, w_min, eta, corner) < 0:
        raise ValueError("attractor gains must be nonnegative")
    wfn = attractor_weight(w_min, w_max, sigma)
    eye = np.eye(dim)

    c2 = corner**2

    def metric_dx(y, yd):
        _, g = wfn(y)
        return np.multiply.outer(eye, g)

    def potential_grad(y):
        return (gain / math.sqrt(float(y @ y) + c2)) * y

    zero = np.zeros((dim, dim, dim))

    def fused(y, yd):
        w, g = wfn(y)
        return w * eye, np.multiply.outer(eye, g), zero, potential_grad(y), (eta * w) * eye

    return GdsSpec(
        dim=dim,
        fused=fused,
        metric=lambda y, yd: wfn(y)[0] * eye,
        potential=lambda y: gain * (np.sqrt(y @ y + corner**2) - corner),
        potential_grad=potential_grad,
        damping=lambda y, yd: (eta * wfn(y)[0]) * eye,
        metric_dx=metric_dx,
        velocity_free=True,
        potential_lower_bound=0.0,
        decomposition=MetricDecomposition(
            R=lambda y: wfn(y)[0] * eye,
            L=lambda y: np.zeros((dim, dim)),
            d=lambda y, yd: np.zeros(dim),
            dd=lambda y, yd: np.zeros(dim),
        ),
        name=name,
    )


def joint_limit_leaf(dim=1, gamma_p=1.0, gamma_d=1.0, sigma=1.0, u0=None, name="joint_limit") -> GdsSpec:
    """GDS on logit joint coordinates pulling toward ``u0`` with priority growing away from it."""
    u0 = np.zeros(dim) if u0 is None else np.atleast_1d(np.asarray(u0, dtype=float))
    eye = np.eye(dim)

    def scale(u):
        e = u - u0
        return 1.0 + (e @ e) / sigma**2

    def metric_dx(u, ud):
        g = 2.0 * (u - u0) / sigma**2
        return eye[:, :, None] * g[None, None, :]

    return GdsSpec(
        dim=dim,
        metric=lambda u, ud: scale(u) * eye,
        potential=lambda u: 0.5 * gamma_p * float((u - u0) @ (u - u0)),
        potential_grad=lambda u: gamma_p * (u - u0),
        damping=lambda u, ud: gamma_d * eye,
        metric_dx=metric_dx,
        velocity_free=True,
        decomposition=MetricDecomposition(
            R=lambda u: scale(u) * eye,
            L=lambda u: np.zeros((dim, dim)),
            d=lambda u, ud: np.zeros(dim),
            dd=lambda u, ud: np.zeros(dim),
        ),
        name=name,
    )


def spring_leaf(dim=1, target=0.0, stiffness=1.0, damping="constant", gain=1.0, name="spring") -> GdsSpec:
    """Unit-metric GDS with potential ``1/2 k ||x - target||^2``.

    ``damping`` selects ``B``: ``"constant"`` (``gain I``), ``"barrier"``
    (``diag(1 + 1/x)``) or ``"nonlinear"`` (``diag(1 + xd^2/x)``).
    """
    target = np.broadcast_to(np.asarray(target, dtype=float), (dim,)).copy()
    eye = np.eye(dim)
    zero = np.zeros((dim, dim, dim))
    if damping == "constant":
        B = lambda x, xd: gain * eye  # noqa: E731
    elif damping == "barrier":
        B = lambda x, xd: np.diag(1.0 + 1.0 / x)  # noqa: E731
    elif damping == "nonlinear":
        B = lambda x, xd: np.diag(1.0 + xd * xd / x)  # noqa: E731
    else:
        raise ValueError(f"unknown damping kind {damping!r}")
    return GdsSpec(
        dim=dim,
        metric=lambda x, xd: eye,
        potential=lambda x: 0.5 * stiffness * float((x - target) @ (x - target)),
        potential_grad=lambda x: stiffness * (x - target),
        damping=B,
        metric_dx=lambda x, xd: zero,
        velocity_free=True,
        decomposition=MetricDecomposition(
            R=lambda x: eye,
            L=lambda x: np.zeros((dim, dim)),
            d=lambda x, xd: np.zeros(dim),
            dd=lambda x, xd: np.zeros(dim),
        ),
        name=name,
    )


# ----------------------------------------------------------------------------
# raw natural-RMP leaves


class PostureDamper:
    """C-space posture controller ``f = gamma_p (q0 - q) - gamma_d qd`` with metric ``weight * I``."""

    name = "posture"

    def __init__(self, q0, gamma_p=1.0, gamma_d=1.0, weight=1.0):
        self.q0 = np.atleast_1d(np.asarray(q0, dtype=float))
        self.gamma_p = float(gamma_p)
        self.gamma_d = float(gamma_d)
        self.M = float(weight) * np.eye(self.q0.size)

    def __call__(self, q, qd):
        return NaturalRmp(self.gamma_p * (self.q0 - q) - self.gamma_d * qd, self.M)


def posture_damper_leaf(q0, gamma_p=1.0, gamma_d=1.0, weight=1.0) -> PostureDamper:
    return PostureDamper(q0, gamma_p, gamma_d, weight)


class PotentialFieldObstacles:
    """Obstacle repulsion on stacked 2D control points with an isotropic metric.

    Uses the RMPflow collision potential ``1/2 alpha w_o(s)^2`` and damper
    ``b w_o(s)`` along the obstacle normal, without curvature terms. The metric
    per control point is ``scale * w_max * I`` (basic) or
    ``scale * sum_j w_o(s_j) * I`` (nonlinear).
    """

    def __init__(self, n_points, centers, radii, alpha=1.0, b=1.0, w_max=1.0, sigma=0.1, nonlinear=False, scale=1.0):
        self.n_points = int(n_points)
        self.C = np.atleast_2d(np.asarray(centers, dtype=float))
        self.R = np.atleast_1d(np.asarray(radii, dtype=float))
        self.alpha = float(alpha)
        self.b = float(b)
        self.w_max = float(w_max)
        self.nonlinear = bool(nonlinear)
        self.scale = float(scale)
        self.weight = extended_bounded_weight(w_max, sigma)
        self.name = "pf_nonlinear_obstacles" if nonlinear else "pf_basic_obstacles"

    def __call__(self, x, xd):
        P = x.reshape(self.n_points, 2)
        V = xd.reshape(self.n_points, 2)
        diff = P[:, None, :] - self.C[None, :, :]
        rho = np.sqrt(np.einsum("akd,akd->ak", diff, diff))
        normal = diff / np.maximum(rho, 1e-12)[..., None]
        s = rho - self.R[None, :]
        sd = np.einsum("akd,ad->ak", normal, V)
        w, dw = self.weight(s)
        mag = -self.alpha * w * dw - self.b * w * sd
        f = np.einsum("ak,akd->ad", mag, normal).ravel()
        if self.nonlinear:
            per_point = self.scale * w.sum(axis=1)
        else:
            per_point = np.full(self.n_points, self.scale * self.w_max)
        M = np.diag(np.repeat(per_point, 2))
        return NaturalRmp(f, M)


class PotentialFieldAttractor:
    """Attractor with an isotropic metric and no curvature terms.

    The desired acceleration ``-gain grad phi(y) - eta yd`` follows the
    soft-norm potential; the force is that acceleration times the metric
    (``w_max`` for basic, ``w_a(y)`` for nonlinear).
    """

    def __init__(self, dim=2, gain=1.0, w_min=1.0, w_max=10.0, sigma=1.0, eta=1.0, corner=0.05, nonlinear=False):
        self.dim = int(dim)
        self.gain = float(gain)
        self.eta = float(eta)
        self.corner = float(corner)
        self.w_max = float(w_max)
        self.nonlinear = bool(nonlinear)
        self.weight = attractor_weight(w_min, w_max, sigma)
        self.name = "pf_nonlinear_attractor" if nonlinear else "pf_basic_attractor"

    def __call__(self, y, yd):
        w, _ = self.weight(y)
        m = w if self.nonlinear else self.w_max
        a = -self.gain * y / np.sqrt(y @ y + self.corner**2) - self.eta * yd
        return NaturalRmp(m * a, m * np.eye(self.dim))


def pf_basic_leaf(kind="obstacle", **params):
    """Potential-field baseline with a constant isotropic metric."""
    return _pf_leaf(kind, nonlinear=False, **params)


def pf_nonlinear_leaf(kind="obstacle", **params):
    """Potential-field baseline with a configuration-dependent isotropic metric."""
    return _pf_leaf(kind, nonlinear=True, **params)


def _pf_leaf(kind, nonlinear, **params):
    if kind == "obstacle":
        return PotentialFieldObstacles(nonlinear=nonlinear, **params)
    if kind == "attractor":
        return PotentialFieldAttractor(nonlinear=nonlinear, **params)
    raise ValueError(f"unknown potential-field leaf kind {kind!r}")


LEAVES = {
    "collision": collision_leaf,
    "collision_1d": collision_leaf_1d,
    "attractor": attractor_leaf,
    "joint_limit": joint_limit_leaf,
    "spring": spring_leaf,
    "posture": posture_damper_leaf,
    "pf_basic": pf_basic_leaf,
    "pf_nonlinear": pf_nonlinear_leaf,
}


def build_leaf(name: str, params: dict | None = None):
    try:
        ctor = LEAVES[name]
    except KeyError:
        raise KeyError(f"unknown leaf {name!r}; known: {sorted(LEAVES)}") from None
    return ctor(**(params or {}))
