"""Differentiable maps between coordinate spaces.

A :class:`TaskMap` exposes the value ``psi(x)``, the Jacobian ``J(x)`` and the
curvature product ``Jdot(x, xd) @ xd``. Missing derivatives fall back to
central finite differences.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from . import numdiff
from .errors import DimensionError, SingularDomainError

#: Absolute distance to a singularity below which maps refuse to evaluate.
SINGULAR_TOL = 1e-12


def _vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


class TaskMap:
    """A map ``psi: R^dim_in -> R^dim_out`` with first and second order information.

    ``value`` and ``jacobian`` take ``x``; ``jdot_times_v`` takes ``(x, xd)``.
    ``fused`` optionally computes ``(y, J, Jdot @ xd)`` in one call, which is
    what the tree forward pass uses.
    """

    def __init__(
        self,
        dim_in: int,
        dim_out: int,
        value: Callable,
        jacobian: Callable | None = None,
        jdot_times_v: Callable | None = None,
        fused: Callable | None = None,
        name: str = "map",
    ):
        if dim_in < 1 or dim_out < 1:
            raise DimensionError(f"map dimensions must be positive, got {dim_in}->{dim_out}")
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        self.name = name
        self._value = value
        self._jacobian = jacobian
        self._jdot = jdot_times_v
        self._fused = fused

    def __repr__(self):
        return f"TaskMap({self.name!r}, {self.dim_in}->{self.dim_out})"

    @property
    def has_analytic_jdot(self):
        return self._jdot is not None or self._fused is not None

    def value(self, x):
        return self._value(x)

    def jacobian(self, x):
        if self._jacobian is None:
            return numdiff.jacobian(self._value, x).reshape(self.dim_out, self.dim_in)
        return self._jacobian(x)

    def jdot_times_v(self, x, xd):
        if self._jdot is not None:
            return self._jdot(x, xd)
        if self._fused is not None:
            return self._fused(x, xd)[2]
        # central difference of J along xd, applied to xd
        h = numdiff.step_for(x)
        dJ = (self.jacobian(x + h * xd) - self.jacobian(x - h * xd)) / (2.0 * h)
        return dJ @ xd

    def forward(self, x, xd):
        """Return ``(psi(x), J(x), Jdot(x, xd) @ xd)``."""
        if self._fused is not None:
            return self._fused(x, xd)
        return self.value(x), self.jacobian(x), self.jdot_times_v(x, xd)


def compose(outer: TaskMap, inner: TaskMap) -> TaskMap:
    """The map ``outer o inner``; second-order terms follow the chain rule."""
    return _compose(outer, inner)


def _compose(outer, inner, keep_outer_jdot=True, keep_inner_jdot=True):
    # The masks let a flattened tree reproduce edges whose Jdot term was dropped.
    if outer.dim_in != inner.dim_out:
        raise DimensionError(
            f"cannot compose {outer.name} (dim_in={outer.dim_in}) "
            f"with {inner.name} (dim_out={inner.dim_out})"
        )

    def fused(x, xd):
        y, Ji, ci = inner.forward(x, xd)
        yd = Ji @ xd
        z, Jo, co = outer.forward(y, yd)
        jdot = np.zeros(outer.dim_out)
        if keep_inner_jdot:
            jdot = jdot + Jo @ ci
        if keep_outer_jdot:
            jdot = jdot + co
        return z, Jo @ Ji, jdot

    def value(x):
        return outer.value(inner.value(x))

    def jac(x):
        return outer.jacobian(inner.value(x)) @ inner.jacobian(x)

    return TaskMap(
        inner.dim_in,
        outer.dim_out,
        value,
        jac,
        jdot_times_v=lambda x, xd: fused(x, xd)[2],
        fused=fused,
        name=f"{outer.name}o{inner.name}",
    )


def stack(maps: Sequence[TaskMap], name="stack") -> TaskMap:
    """Concatenate the outputs of maps sharing one input space."""
    maps = list(maps)
    if not maps:
        raise DimensionError("stack needs at least one map")
    dim_in = maps[0].dim_in
    for m in maps:
        if m.dim_in != dim_in:
            raise DimensionError(f"stack input mismatch: {m.name} has dim_in={m.dim_in}, expected {dim_in}")

    def fused(x, xd):
        parts = [m.forward(x, xd) for m in maps]
        return (
            np.concatenate([p[0] for p in parts]),
            np.vstack([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]),
        )

    return TaskMap(
        dim_in,
        sum(m.dim_out for m in maps),
        lambda x: np.concatenate([m.value(x) for m in maps]),
        lambda x: np.vstack([m.jacobian(x) for m in maps]),
        fused=fused,
        name=name,
    )


# ----------------------------------------------------------------------------
# map library


def identity(dim: int) -> TaskMap:
    eye = np.eye(dim)
    zero = np.zeros(dim)
    return TaskMap(
        dim,
        dim,
        lambda x: x,
        lambda x: eye,
        lambda x, xd: zero,
        fused=lambda x, xd: (x, eye, zero),
        name="identity",
    )


def make_linear(A, b=None) -> TaskMap:
    """``y = A x + b``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    b = np.zeros(m) if b is None else _vec(b)
    if b.shape != (m,):
        raise DimensionError(f"offset has shape {b.shape}, expected ({m},)")
    zero = np.zeros(m)

    def fused(x, xd):
        return A @ x + b, A, zero

    return TaskMap(n, m, lambda x: A @ x + b, lambda x: A, lambda x, xd: zero, fused=fused, name="linear")


def make_offset(goal) -> TaskMap:
    """``y = q - goal``."""
    goal = _vec(goal)
    n = goal.size
    eye = np.eye(n)
    zero = np.zeros(n)
    return TaskMap(
        n,
        n,
        lambda x: x - goal,
        lambda x: eye,
        lambda x, xd: zero,
        fused=lambda x, xd: (x - goal, eye, zero),
        name="offset",
    )


def make_reciprocal() -> TaskMap:
    """The 1D barrier map ``x = 1/q``."""

    def check(q):
        if abs(q[0]) < SINGULAR_TOL:
            raise SingularDomainError(f"reciprocal map evaluated at q={q[0]!r}")

    def value(q):
        check(q)
        return np.array([1.0 / q[0]])

    def jac(q):
        check(q)
        return np.array([[-1.0 / q[0] ** 2]])

    def jdot(q, qd):
        check(q)
        return np.array([2.0 * qd[0] ** 2 / q[0] ** 3])

    def fused(q, qd):
        check(q)
        s = q[0]
        return np.array([1.0 / s]), np.array([[-1.0 / (s * s)]]), np.array([2.0 * qd[0] ** 2 / s**3])

    return TaskMap(1, 1, value, jac, jdot, fused=fused, name="reciprocal")


def make_distance_to_point(center, radius=0.0) -> TaskMap:
    """Signed distance ``||q - c|| - r`` to a ball; negative inside."""
    c = _vec(center)
    r = float(radius)
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    n = c.size

    def fused(q, qd):
        diff = q - c
        rho = float(np.sqrt(diff @ diff))
        if rho < SINGULAR_TOL:
            raise SingularDomainError(f"distance map evaluated at its center {c.tolist()}")
        normal = diff / rho
        radial = normal @ qd
        return np.array([rho - r]), normal[None, :], np.array([(qd @ qd - radial * radial) / rho])

    return TaskMap(
        n,
        1,
        lambda q: fused(q, np.zeros(n))[0],
        lambda q: fused(q, np.zeros(n))[1],
        lambda q, qd: fused(q, qd)[2],
        fused=fused,
        name="distance",
    )


def _arm_weights(link_lengths, control_points):
    lengths = np.asarray(link_lengths, dtype=float)
    if lengths.ndim != 1 or lengths.size == 0 or np.any(lengths <= 0):
        raise ValueError(f"link lengths must be positive, got {lengths.tolist()}")
    W = np.zeros((len(control_points), lengths.size))
    for a, (link, frac) in enumerate(control_points):
        if not 0 <= link < lengths.size:
            raise ValueError(f"link index {link} out of range for {lengths.size} links")
        if not 0.0 <= frac <= 1.0:
            raise ValueError(f"point offset must be in [0, 1], got {frac}")
        W[a, :link] = lengths[:link]
        W[a, link] = frac * lengths[link]
    return W


def make_planar_arm_points(link_lengths, control_points, base_angle=0.0) -> TaskMap:
    """Positions of several points on a planar revolute chain.

    ``control_points`` is a list of ``(link_index, fraction)`` pairs. The output
    stacks ``(x, y)`` per point. Joint angles accumulate from ``base_angle``.
    """
    W = _arm_weights(link_lengths, control_points)
    p, n = W.shape

    def fused(q, qd):
        theta = base_angle + np.cumsum(q)
        thetad = np.cumsum(qd)
        c, s = np.cos(theta), np.sin(theta)
        Sx = -W * s
        Sy = W * c
        # column i sums links j >= i
        Jx = np.cumsum(Sx[:, ::-1], axis=1)[:, ::-1]
        Jy = np.cumsum(Sy[:, ::-1], axis=1)[:, ::-1]
        J = np.empty((2 * p, n))
        J[0::2] = Jx
        J[1::2] = Jy
        pos = np.empty(2 * p)
        pos[0::2] = W @ c
        pos[1::2] = W @ s
        w2 = thetad * thetad
        jdot = np.empty(2 * p)
        jdot[0::2] = -(W @ (c * w2))
        jdot[1::2] = -(W @ (s * w2))
        return pos, J, jdot

    zero = np.zeros(n)
    return TaskMap(
        n,
        2 * p,
        lambda q: fused(q, zero)[0],
        lambda q: fused(q, zero)[1],
        lambda q, qd: fused(q, qd)[2],
        fused=fused,
        name="arm_points",
    )


def make_planar_arm_fk(link_lengths, point_offset=1.0, link_index=None, base_angle=0.0) -> TaskMap:
    """2D position of the point at ``point_offset`` along link ``link_index`` (default: last)."""
    if link_index is None:
        link_index = len(link_lengths) - 1
    m = make_planar_arm_points(link_lengths, [(int(link_index), float(point_offset))], base_angle)
    m.name = f"fk[{link_index}:{point_offset:g}]"
    return m


def make_point_obstacle_distances(n_points, centers, radii) -> TaskMap:
    """Signed distances from each of ``n_points`` stacked 2D points to each ball.

    Input is ``(x0, y0, x1, y1, ...)``; output index ``a * k + j`` is point ``a``
    against obstacle ``j``.
    """
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    R = _vec(radii)
    k = C.shape[0]
    if R.size != k:
        raise DimensionError(f"{k} centers but {R.size} radii")
    dim = C.shape[1]
    rows = np.repeat(np.arange(n_points), k)
    cols = np.arange(n_points * k)

    def fused(x, xd):
        P = x.reshape(n_points, dim)
        V = xd.reshape(n_points, dim)
        diff = P[:, None, :] - C[None, :, :]
        rho = np.sqrt(np.einsum("akd,akd->ak", diff, diff))
        if np.any(rho < SINGULAR_TOL):
            raise SingularDomainError("obstacle distance evaluated at an obstacle center")
        normal = diff / rho[..., None]
        radial = np.einsum("akd,ad->ak", normal, V)
        speed2 = np.einsum("ad,ad->a", V, V)
        J = np.zeros((n_points * k, n_points * dim))
        nrm = normal.reshape(n_points * k, dim)
        for d in range(dim):
            J[cols, rows * dim + d] = nrm[:, d]
        jdot = (speed2[:, None] - radial**2) / rho
        return (rho - R[None, :]).ravel(), J, jdot.ravel()

    zero = np.zeros(n_points * dim)
    return TaskMap(
        n_points * dim,
        n_points * k,
        lambda x: fused(x, zero)[0],
        lambda x: fused(x, zero)[1],
        lambda x, xd: fused(x, xd)[2],
        fused=fused,
        name="obstacle_distances",
    )


def make_joint_limit_map(lower, upper, slope=1.0) -> TaskMap:
    """Per-dimension logit ``u = slope * log((q - l) / (U - q))``; unbounded at the limits."""
    lo = _vec(lower)
    hi = _vec(upper)
    if lo.shape != hi.shape:
        raise DimensionError(f"limit shapes differ: {lo.shape} vs {hi.shape}")
    if np.any(lo >= hi):
        raise ValueError("lower limits must be strictly below upper limits")
    n = lo.size

    def fused(q, qd):
        a = q - lo
        b = hi - q
        if np.any(a <= SINGULAR_TOL) or np.any(b <= SINGULAR_TOL):
            raise SingularDomainError(f"joint-limit map evaluated at or beyond limits: q={q.tolist()}")
        u = slope * np.log(a / b)
        d1 = slope * (1.0 / a + 1.0 / b)
        d2 = slope * (-1.0 / a**2 + 1.0 / b**2)
        return u, np.diag(d1), d2 * qd * qd

    zero = np.zeros(n)
    return TaskMap(
        n,
        n,
        lambda q: fused(q, zero)[0],
        lambda q: fused(q, zero)[1],
        lambda q, qd: fused(q, qd)[2],
        fused=fused,
        name="joint_limit",
    )


def make_sine_warp(dim, amplitude=0.3) -> TaskMap:
    """Componentwise ``q' = q + amplitude * sin(q)``; a diffeomorphism for ``|amplitude| < 1``."""
    a = float(amplitude)

    def fused(q, qd):
        return q + a * np.sin(q), np.diag(1.0 + a * np.cos(q)), -a * np.sin(q) * qd * qd

    zero = np.zeros(dim)
    return TaskMap(
        dim,
        dim,
        lambda q: fused(q, zero)[0],
        lambda q: fused(q, zero)[1],
        lambda q, qd: fused(q, qd)[2],
        fused=fused,
        name="sine_warp",
    )


def sine_warp_solve(amplitude):
    """Newton solver for ``q + a sin q = y`` (componentwise)."""
    a = float(amplitude)

    tol = 4.0 * np.finfo(float).eps

    def solve(y):
        # scalar Newton per component: the map is separable and the vectors are short
        out = []
        for yi in np.asarray(y, dtype=float).tolist():
            # first-order inverse as the starting point
            q = yi - a * math.sin(yi)
            for _ in range(100):
                step = (q + a * math.sin(q) - yi) / (1.0 + a * math.cos(q))
                q -= step
                if abs(step) <= tol * (1.0 + abs(q)):
                    break
            out.append(q)
        return np.array(out)

    return solve


def make_sine_warp_inverse(dim, amplitude=0.3) -> TaskMap:
    """Inverse of :func:`make_sine_warp` with closed-form derivatives."""
    a = float(amplitude)
    solve = sine_warp_solve(a)

    def fused(y, yd):
        q = solve(y)
        c = 1.0 + a * np.cos(q)
        qd = yd / c
        # d/dt (yd / c(q)) at fixed yd = a sin(q) qd^2 / c
        return q, np.diag(1.0 / c), a * np.sin(q) * qd * qd / c

    zero = np.zeros(dim)
    return TaskMap(
        dim,
        dim,
        solve,
        lambda y: fused(y, zero)[1],
        lambda y, yd: fused(y, yd)[2],
        fused=fused,
        name="inv(sine_warp)",
    )


def make_inverse(forward: TaskMap, solve: Callable, name=None) -> TaskMap:
    """Inverse of a square diffeomorphism given a solver for its value."""
    if forward.dim_in != forward.dim_out:
        raise DimensionError("only square maps can be inverted")

    def fused(y, yd):
        x = solve(y)
        Jg = np.linalg.inv(forward.jacobian(x))
        xd = Jg @ yd
        return x, Jg, -Jg @ forward.jdot_times_v(x, xd)

    n = forward.dim_in
    zero = np.zeros(n)
    return TaskMap(
        n,
        n,
        solve,
        lambda y: fused(y, zero)[1],
        lambda y, yd: fused(y, yd)[2],
        fused=fused,
        name=name or f"inv({forward.name})",
    )


MAPS = {
    "identity": identity,
    "linear": make_linear,
    "offset": make_offset,
    "reciprocal": make_reciprocal,
    "distance_to_point": make_distance_to_point,
    "planar_arm_fk": make_planar_arm_fk,
    "planar_arm_points": make_planar_arm_points,
    "point_obstacle_distances": make_point_obstacle_distances,
    "joint_limit": make_joint_limit_map,
    "sine_warp": make_sine_warp,
}


def build_map(name: str, params: dict | None = None) -> TaskMap:
    """Construct a library map from its registry name and keyword parameters."""
    try:
        ctor = MAPS[name]
    except KeyError:
        raise KeyError(f"unknown task map {name!r}; known: {sorted(MAPS)}") from None
    return ctor(**(params or {}))
