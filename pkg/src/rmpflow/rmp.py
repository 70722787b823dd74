"""Natural and canonical RMP forms and the ``resolve`` operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, NonFiniteError

#: Singular values below this fraction of the largest one are treated as zero.
PINV_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class NaturalRmp:
    """Force form ``[f, M]``."""

    f: np.ndarray
    M: np.ndarray

    @property
    def dim(self):
        return self.f.shape[0]

    def resolve(self) -> CanonicalRmp:
        return resolve(self)

    def __add__(self, other):
        return NaturalRmp(self.f + other.f, self.M + other.M)


@dataclass(frozen=True, eq=False)
class CanonicalRmp:
    """Acceleration form ``(a, M)``."""

    a: np.ndarray
    M: np.ndarray

    @property
    def dim(self):
        return self.a.shape[0]

    def naturalize(self) -> NaturalRmp:
        return NaturalRmp(self.M @ self.a, self.M)


def pinv(M):
    return np.linalg.pinv(M, rcond=PINV_RCOND)


def pinv_solve(M, f):
    """``pinv(M) @ f`` without forming the pseudo-inverse.

    LAPACK's minimum-norm least squares drops the same singular values as
    ``pinv`` (those at or below ``PINV_RCOND`` times the largest).
    """
    return np.linalg.lstsq(M, f, rcond=PINV_RCOND)[0]


def resolve(rmp: NaturalRmp) -> CanonicalRmp:
    """Minimum-norm least-squares acceleration ``a = M^+ f``."""
    f = np.asarray(rmp.f, dtype=float)
    M = np.asarray(rmp.M, dtype=float)
    if not (np.isfinite(f).all() and np.isfinite(M).all()):
        raise NonFiniteError("resolve received non-finite force or inertia")
    return CanonicalRmp(pinv_solve(M, f), M)


def resolve_root(rmp: NaturalRmp) -> CanonicalRmp:
    """``resolve`` that rejects an inertia with no nonzero entries."""
    if not rmp.M.any():
        raise DegenerateError("degenerate root: inertia is identically zero (no active leaf)")
    return resolve(rmp)
