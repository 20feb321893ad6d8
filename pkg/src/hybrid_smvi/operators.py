"""Operators used by the hybrid iteration.

Maximal monotone operators appear only through their resolvents
``J = (I + lam M)^-1``, each with a closed form. Inverse strongly monotone
maps are gradients of convex quadratics. Nonexpansive maps cover the
variants needed to plant fixed points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .core import Point, _check_dims, estimate_operator_norm

__all__ = [
    "NormalCone",
    "L1",
    "AffineMonotone",
    "ZeroResolvent",
    "Resolvent",
    "ZeroMap",
    "AffineGradient",
    "IsmMap",
    "Identity",
    "Negation",
    "Reflection",
    "Average",
    "ProjectionMap",
    "AffineContraction",
    "NonexpansiveMap",
    "WMapping",
    "resolvent_apply",
    "ism_apply",
    "forward_backward_apply",
    "w_mapping_apply",
    "fixed_point_residual",
    "PSD_TOL",
    "COND_LIMIT",
]

PSD_TOL = 1e-9
COND_LIMIT = 1e12


def _matrix(m, name):
    arr = np.array(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} entries must be finite")
    arr.flags.writeable = False
    return arr


def _check_lambda(lam):
    if not lam > 0:
        raise ValueError(f"resolvent parameter must be positive, got {lam}")


# --------------------------------------------------------------------------
# Resolvents
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NormalCone:
    """Resolvent of the normal cone of a closed convex set: the projection."""

    set: object
    lam: float = 1.0

    def __post_init__(self):
        _check_lambda(self.lam)

    @property
    def dim(self):
        return self.set.dim

    def _apply(self, v):
        return self.set._project_array(v)

    def __call__(self, x):
        return self.set.project(x)


@dataclass(frozen=True, eq=False)
class L1:
    """Resolvent of ``weight * d||.||_1``: soft thresholding at ``lam * weight``."""

    weight: float
    lam: float = 1.0

    def __post_init__(self):
        _check_lambda(self.lam)
        if not self.weight >= 0:
            raise ValueError("L1 weight must be nonnegative")

    dim = None

    def _apply(self, v):
        return np.sign(v) * np.maximum(np.abs(v) - self.lam * self.weight, 0.0)

    def __call__(self, x):
        return Point._wrap(self._apply(x.coords))


@dataclass(frozen=True, eq=False)
class AffineMonotone:
    """Resolvent of the monotone affine map ``z -> B z + c``.

    Monotonicity of the map is equivalent to ``B + B^T`` being positive
    semidefinite, which is checked on construction.
    """

    B: np.ndarray
    c: Point
    lam: float = 1.0

    def __post_init__(self):
        _check_lambda(self.lam)
        B = _matrix(self.B, "B")
        c = self.c if isinstance(self.c, Point) else Point(self.c)
        _check_dims(B.shape[0], c.dim, "B and c")
        sym_min = float(np.linalg.eigvalsh(B + B.T).min())
        if sym_min < -PSD_TOL:
            raise ValueError(f"B + B^T is not positive semidefinite (min eigenvalue {sym_min:.3e})")
        system = np.eye(B.shape[0]) + self.lam * B
        cond = np.linalg.cond(system)
        if not cond <= COND_LIMIT:
            raise ValueError(f"I + lam*B is too ill-conditioned (cond {cond:.3e})")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "_inverse", np.linalg.inv(system))

    @property
    def dim(self):
        return self.B.shape[0]

    def _apply(self, v):
        return self._inverse @ (v - self.lam * self.c.coords)

    def __call__(self, x):
        _check_dims(x.dim, self.dim)
        return Point._wrap(self._apply(x.coords))


@dataclass(frozen=True, eq=False)
class ZeroResolvent:
    """Resolvent of the zero operator, i.e. the identity."""

    lam: float = 1.0

    def __post_init__(self):
        _check_lambda(self.lam)

    dim = None

    def _apply(self, v):
        return v

    def __call__(self, x):
        return x


Resolvent = Union[NormalCone, L1, AffineMonotone, ZeroResolvent]


def resolvent_apply(J, x):
    """Evaluate the resolvent ``J`` at ``x``; firmly nonexpansive."""
    if J.dim is not None:
        _check_dims(x.dim, J.dim)
    return J(x)


# --------------------------------------------------------------------------
# Inverse strongly monotone maps
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ZeroMap:
    """The zero map, ``theta``-ism for every ``theta > 0``."""

    theta: float = 1.0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")

    dim = None

    def _apply(self, v):
        return np.zeros(v.shape[0])

    def __call__(self, x):
        return Point.zeros(x.dim)


@dataclass(frozen=True, eq=False)
class AffineGradient:
    """Gradient ``x -> P x + q`` of a convex quadratic.

    ``P`` must be symmetric positive semidefinite; the map is then
    ``1/lambda_max(P)``-inverse strongly monotone (Baillon-Haddad). When
    ``theta`` is omitted it is set to that value.
    """

    P: np.ndarray
    q: Point
    theta: float = field(default=None)

    def __post_init__(self):
        P = _matrix(self.P, "P")
        if not np.allclose(P, P.T, atol=1e-12, rtol=0):
            raise ValueError("P must be symmetric")
        q = self.q if isinstance(self.q, Point) else Point(self.q)
        _check_dims(P.shape[0], q.dim, "P and q")
        eig = np.linalg.eigvalsh(P)
        if eig[0] < -PSD_TOL:
            raise ValueError(f"P is not positive semidefinite (min eigenvalue {eig[0]:.3e})")
        lmax = max(float(eig[-1]), 0.0)
        limit = np.inf if lmax == 0.0 else 1.0 / lmax
        theta = self.theta
        if theta is None:
            theta = 1.0 if lmax == 0.0 else limit
        if not theta > 0:
            raise ValueError("theta must be positive")
        if theta > limit * (1 + 1e-12):
            raise ValueError(f"theta={theta} exceeds the ism modulus 1/lambda_max(P)={limit}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "theta", float(theta))

    @property
    def dim(self):
        return self.P.shape[0]

    def _apply(self, v):
        return self.P @ v + self.q.coords

    def __call__(self, x):
        _check_dims(x.dim, self.dim)
        return Point._wrap(self._apply(x.coords))


IsmMap = Union[ZeroMap, AffineGradient]


def ism_apply(f, x):
    if f.dim is not None:
        _check_dims(x.dim, f.dim)
    return f(x)


def forward_backward_apply(J, f, lam, x):
    """``J(x - lam f(x))``, the forward-backward operator.

    ``lam`` must equal the parameter baked into ``J`` and lie in
    ``(0, 2 theta)`` where ``theta`` is the ism modulus of ``f``.
    """
    if lam != J.lam:
        raise ValueError(f"lambda={lam} differs from the resolvent parameter {J.lam}")
    if not 0 < lam < 2 * f.theta:
        raise ValueError(f"lambda must lie in (0, {2 * f.theta}), got {lam}")
    fx = ism_apply(f, x)
    return resolvent_apply(J, x - lam * fx)


# --------------------------------------------------------------------------
# Nonexpansive maps
# --------------------------------------------------------------------------


class _ArrayMap:
    """Point-level call on top of an array-level ``_apply``."""

    def __call__(self, x):
        return Point._wrap(np.asarray(self._apply(x.coords), dtype=float))


@dataclass(frozen=True, eq=False)
class Identity(_ArrayMap):
    def _apply(self, v):
        return v

    def __call__(self, x):
        return x


@dataclass(frozen=True, eq=False)
class Negation(_ArrayMap):
    def _apply(self, v):
        return -v


@dataclass(frozen=True, eq=False)
class Reflection(_ArrayMap):
    """``2 P_C - I``."""

    set: object

    def _apply(self, v):
        return 2.0 * self.set._project_array(v) - v


@dataclass(frozen=True, eq=False)
class Average(_ArrayMap):
    """``alpha * inner + (1 - alpha) * I``."""

    alpha: float
    inner: object

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("Average alpha must lie in [0, 1]")

    def _apply(self, v):
        return self.alpha * self.inner._apply(v) + (1.0 - self.alpha) * v


@dataclass(frozen=True, eq=False)
class ProjectionMap(_ArrayMap):
    set: object

    def _apply(self, v):
        return self.set._project_array(v)


@dataclass(frozen=True, eq=False)
class AffineContraction(_ArrayMap):
    """``x -> R x + s`` with spectral norm of ``R`` at most one."""

    R: np.ndarray
    s: Point

    def __post_init__(self):
        R = _matrix(self.R, "R")
        s = self.s if isinstance(self.s, Point) else Point(self.s)
        _check_dims(R.shape[0], s.dim, "R and s")
        r = float(np.linalg.norm(R, 2))
        if r > 1.0 + 1e-12:
            raise ValueError(f"||R|| = {r} exceeds 1; map would not be nonexpansive")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "s", s)

    @property
    def lipschitz(self):
        return estimate_operator_norm(self.R)

    def _apply(self, v):
        return self.R @ v + self.s.coords

    def __call__(self, x):
        _check_dims(x.dim, self.R.shape[0])
        return Point._wrap(self._apply(x.coords))


NonexpansiveMap = Union[Identity, Negation, Reflection, Average, ProjectionMap, AffineContraction]


@dataclass(frozen=True, eq=False)
class WMapping:
    """W-mapping of a finite family ``T_1..T_N`` with weights ``lambdas``.

    ``U_{N+1} = I`` and ``U_k = lambdas[k] T_k U_{k+1} + (1 - lambdas[k]) I``;
    the mapping is ``U_1``. An empty family gives the identity.
    """

    family: tuple
    lambdas: tuple

    def __post_init__(self):
        family = tuple(self.family)
        lambdas = tuple(float(v) for v in self.lambdas)
        if len(family) != len(lambdas):
            raise ValueError("family and lambdas must have equal length")
        for v in lambdas:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"W-mapping weights must lie in [0, 1], got {v}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "lambdas", lambdas)

    def _apply(self, v):
        u = v
        for T, lam in zip(reversed(self.family), reversed(self.lambdas)):
            u = lam * T._apply(u) + (1.0 - lam) * v
        return u

    def __call__(self, x):
        if not self.family:
            return x
        return Point._wrap(self._apply(x.coords))


def w_mapping_apply(W, x):
    return W(x)


def fixed_point_residual(T, p):
    """``||T p - p||``."""
    d = T(p) - p
    return float(np.linalg.norm(d.coords))
