"""Geometric dynamical systems (GDS).

A GDS on coordinates ``x`` with metric ``G(x, xd)``, damping ``B(x, xd)`` and
potential ``Phi(x)`` obeys

    (G + Xi_G) xdd + xi_G = -grad Phi - B xd

where ``Xi_G = 1/2 sum_i xd_i d_xd g_i``, ``xi_G = Gdot_x xd - 1/2 grad_x(xd' G xd)``
and ``g_i`` is the i-th column of ``G``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import numdiff
from .errors import DegenerateError, NonFiniteError
from .rmp import NaturalRmp, pinv_solve
from .taskmap import TaskMap

PSD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MetricDecomposition:
    """Metric written as ``R(x) + L(x)^T diag(d(x, yd)) L(x)`` with ``yd = L(x) xd``.

    ``dd`` returns the elementwise partials ``d d_i / d yd_i``; finite
    differences are used when it is missing.
    """

    R: Callable
    L: Callable
    d: Callable
    dd: Callable | None = None


@dataclass(frozen=True, eq=False)
class GdsSpec:
    """Metric, damping and potential of a GDS, plus optional analytic derivatives.

    ``metric_dx(x, xd)`` and ``metric_dxd(x, xd)`` return the tensors
    ``T[i, j, k] = dG_ij / dx_k`` and ``S[i, j, k] = dG_ij / dxd_k``.
    ``use_Xi`` and ``use_xi`` zero the corresponding curvature term in the
    emitted RMP (ablations only; the result is no longer a GDS).
    ``fused(x, xd)``, when given, returns ``(G, T, S, grad Phi, B)`` in one
    call and must agree with the separate callables.
    """

    dim: int
    metric: Callable
    potential: Callable
    potential_grad: Callable | None = None
    damping: Callable | None = None
    metric_dx: Callable | None = None
    metric_dxd: Callable | None = None
    velocity_free: bool = False
    potential_lower_bound: float = 0.0
    decomposition: MetricDecomposition | None = None
    use_Xi: bool = True
    use_xi: bool = True
    name: str = "gds"
    fused: Callable | None = None

    def grad_potential(self, x):
        if self.potential_grad is not None:
            return self.potential_grad(x)
        return numdiff.gradient(self.potential, x)

    def damping_matrix(self, x, xd):
        if self.damping is None:
            return np.zeros((self.dim, self.dim))
        return self.damping(x, xd)


@dataclass(frozen=True, eq=False)
class CurvatureTerms:
    Xi: np.ndarray
    xi: np.ndarray
    M: np.ndarray
    G: np.ndarray = field(repr=False)


def _check_finite(spec, T, S):
    checks = (("position", T),) if spec.velocity_free else (("position", T), ("velocity", S))
    for name, D in checks:
        if not np.isfinite(D).all():
            bad = np.nonzero(~np.all(np.isfinite(D), axis=(0, 2)))[0]
            raise NonFiniteError(f"{spec.name}: non-finite metric {name} derivative in column {int(bad[0])}")


def metric_derivatives(spec: GdsSpec, x, xd):
    """Return ``(T, S)``: partials of the metric in position and velocity."""
    m = spec.dim
    if spec.fused is not None:
        _, T, S, _, _ = spec.fused(x, xd)
    else:
        if spec.metric_dx is not None:
            T = spec.metric_dx(x, xd)
        else:
            T = numdiff.jacobian(lambda z: spec.metric(z, xd), x).reshape(m, m, m)
        if spec.velocity_free:
            S = np.zeros((m, m, m))
        elif spec.metric_dxd is not None:
            S = spec.metric_dxd(x, xd)
        else:
            S = numdiff.jacobian(lambda v: spec.metric(x, v), xd).reshape(m, m, m)
    _check_finite(spec, T, S)
    return T, S


def _terms(spec, x, xd):
    if spec.fused is not None:
        G, T, S, grad, B = spec.fused(x, xd)
        _check_finite(spec, T, S)
        return G, T, S, grad, B
    T, S = metric_derivatives(spec, x, xd)
    return spec.metric(x, xd), T, S, spec.grad_potential(x), spec.damping_matrix(x, xd)


def _curvature(G, T, S, xd, velocity_free):
    # Xi_jk = 1/2 sum_i xd_i dG_ji/dxd_k; None when the metric ignores velocity
    Xi = None if velocity_free else 0.5 * (S.transpose(0, 2, 1) @ xd)
    # Gdot_x xd = sum_jk dG_ij/dx_k xd_k xd_j
    # grad_x(xd' G xd)_k = sum_ij xd_i xd_j dG_ij/dx_k
    return Xi, (T @ xd) @ xd - 0.5 * (xd @ (xd @ T))


def curvature(spec: GdsSpec, x, xd) -> CurvatureTerms:
    G, T, S, _, _ = _terms(spec, x, xd)
    Xi, xi = _curvature(G, T, S, xd, spec.velocity_free)
    if Xi is None:
        Xi = np.zeros_like(G)
    return CurvatureTerms(Xi=Xi, xi=xi, M=G + Xi, G=G)


def gds_natural_rmp(spec: GdsSpec, x, xd) -> NaturalRmp:
    """Leaf RMP ``[-xi - grad Phi - B xd, G + Xi]``."""
    G, T, S, grad, B = _terms(spec, x, xd)
    Xi, xi = _curvature(G, T, S, xd, spec.velocity_free)
    f = -grad - B @ xd
    if spec.use_xi:
        f = f - xi
    M = G + Xi if spec.use_Xi and Xi is not None else G
    return NaturalRmp(f, M)


def gds_accel(spec: GdsSpec, x, xd):
    return pinv_checked(gds_natural_rmp(spec, x, xd))


def pinv_checked(rmp: NaturalRmp):
    if not rmp.M.any():
        raise DegenerateError("inertia is identically zero")
    return pinv_solve(rmp.M, rmp.f)


def stack_gds(specs: Sequence[GdsSpec], name="stacked") -> GdsSpec:
    """Block-diagonal product of several GDSs on the concatenated coordinates."""
    specs = list(specs)
    dims = [s.dim for s in specs]
    offs = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    n = int(offs[-1])
    blocks = [slice(offs[i], offs[i + 1]) for i in range(len(specs))]

    def blockdiag(mats):
        out = np.zeros((n, n))
        for sl, Mb in zip(blocks, mats):
            out[sl, sl] = Mb
        return out

    def metric(x, xd):
        return blockdiag([s.metric(x[sl], xd[sl]) for s, sl in zip(specs, blocks)])

    def derivs(x, xd):
        T = np.zeros((n, n, n))
        S = np.zeros((n, n, n))
        for s, sl in zip(specs, blocks):
            Tb, Sb = metric_derivatives(s, x[sl], xd[sl])
            T[sl, sl, sl] = Tb
            S[sl, sl, sl] = Sb
        return T, S

    return GdsSpec(
        dim=n,
        metric=metric,
        potential=lambda x: sum(float(s.potential(x[sl])) for s, sl in zip(specs, blocks)),
        potential_grad=lambda x: np.concatenate([s.grad_potential(x[sl]) for s, sl in zip(specs, blocks)]),
        damping=lambda x, xd: blockdiag([s.damping_matrix(x[sl], xd[sl]) for s, sl in zip(specs, blocks)]),
        metric_dx=lambda x, xd: derivs(x, xd)[0],
        metric_dxd=lambda x, xd: derivs(x, xd)[1],
        velocity_free=all(s.velocity_free for s in specs),
        potential_lower_bound=sum(s.potential_lower_bound for s in specs),
        name=name,
    )


@dataclass(frozen=True, eq=False)
class StructuredGds:
    """A GDS whose metric factors as ``J(x)^T H(y, yd) J(x)`` through ``y = inner_map(x)``.

    ``outer`` supplies ``H``, the damping and the potential on ``y``.
    """

    inner_map: TaskMap
    outer: GdsSpec

    def pullback_spec(self) -> GdsSpec:
        """The plain GDS of the pullback metric, damping and potential (derivatives by differences)."""
        psi, outer = self.inner_map, self.outer

        def metric(x, xd):
            J = psi.jacobian(x)
            return J.T @ outer.metric(psi.value(x), J @ xd) @ J

        def damping(x, xd):
            J = psi.jacobian(x)
            return J.T @ outer.damping_matrix(psi.value(x), J @ xd) @ J

        return GdsSpec(
            dim=psi.dim_in,
            metric=metric,
            potential=lambda x: outer.potential(psi.value(x)),
            potential_grad=lambda x: psi.jacobian(x).T @ outer.grad_potential(psi.value(x)),
            damping=damping,
            velocity_free=outer.velocity_free,
            name=f"pullback({outer.name})",
        )


def structured_gds_accel(s: StructuredGds, x, xd):
    """Acceleration ``(G + Xi_G)^+ (-eta_{G;S} - grad Phi - B xd)`` evaluated in one shot."""
    y, J, jdotv = s.inner_map.forward(x, xd)
    yd = J @ xd
    c = curvature(s.outer, y, yd)
    H = c.G
    MH = H + c.Xi
    inertia = J.T @ MH @ J
    eta = J.T @ (c.xi + MH @ jdotv)
    grad = J.T @ s.outer.grad_potential(y)
    B = J.T @ s.outer.damping_matrix(y, yd) @ J
    if not np.any(inertia):
        raise DegenerateError("structured GDS inertia is identically zero")
    return pinv_solve(inertia, -eta - grad - B @ xd)


def coriolis_force(spec: GdsSpec, x, xd):
    """``C(x, xd) xd`` from Christoffel symbols of the first kind of ``G``."""
    T, _ = metric_derivatives(spec, x, xd)
    # Gamma_ijk = 1/2 (d_k G_ij + d_j G_ik - d_i G_jk)
    gamma = 0.5 * (T + np.einsum("ikj->ijk", T) - np.einsum("jki->ijk", T))
    C = np.einsum("ijk,k->ij", gamma, xd)
    return C @ xd


@dataclass
class InertiaClassReport:
    samples: int
    min_Xi_eig: float
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations


def inertia_class_check(spec: GdsSpec, samples) -> InertiaClassReport:
    """Check the sufficient condition for a PSD ``Xi_G`` at the given ``(x, xd)`` states.

    Violations are collected in the report rather than raised.
    """
    violations = []
    min_eig = np.inf
    form = spec.decomposition
    for idx, (x, xd) in enumerate(samples):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xd = np.atleast_1d(np.asarray(xd, dtype=float))
        if form is not None:
            R = np.atleast_2d(form.R(x))
            L = np.atleast_2d(form.L(x))
            yd = L @ xd
            d = np.atleast_1d(form.d(x, yd))
            if form.dd is not None:
                dd = np.atleast_1d(form.dd(x, yd))
            else:
                dd = np.array(
                    [numdiff.directional(lambda v: form.d(x, v)[i], yd, np.eye(yd.size)[i]) for i in range(yd.size)]
                )
            r_eig = np.linalg.eigvalsh(0.5 * (R + R.T))[0] if R.size else 0.0
            scale = max(1.0, float(np.max(np.abs(R))) if R.size else 1.0)
            if r_eig < -PSD_TOL * scale:
                violations.append(f"sample {idx}: R not PSD (min eig {r_eig:.3e})")
            if np.any(d < -PSD_TOL * max(1.0, float(np.max(np.abs(d))))):
                violations.append(f"sample {idx}: D has negative entries {d[d < 0].tolist()}")
            prod = yd * dd
            if np.any(prod < -PSD_TOL * max(1.0, float(np.max(np.abs(prod))))):
                violations.append(f"sample {idx}: yd * dd/dyd negative {prod[prod < 0].tolist()}")
        Xi = curvature(spec, x, xd).Xi
        eig = float(np.linalg.eigvalsh(0.5 * (Xi + Xi.T))[0])
        min_eig = min(min_eig, eig)
        if eig < -PSD_TOL * max(1.0, float(np.max(np.abs(Xi)))):
            violations.append(f"sample {idx}: Xi_G min eigenvalue {eig:.3e}")
    return InertiaClassReport(samples=len(samples), min_Xi_eig=float(min_eig), violations=violations)


def kinetic_energy(spec: GdsSpec, x, xd) -> float:
    return 0.5 * float(xd @ spec.metric(x, xd) @ xd)


def lyapunov(spec: GdsSpec, q, qd) -> float:
    """``V = 1/2 qd' G(q, qd) qd + Phi(q)``."""
    return kinetic_energy(spec, q, qd) + float(spec.potential(q))

