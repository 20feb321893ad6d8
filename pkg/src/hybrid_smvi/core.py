"""Finite-dimensional inner-product space primitives.

Points, linear maps with adjoints, closed convex sets with exact metric
projections, Dykstra's algorithm for intersections, and the algebraic
reduction of the two quadratic cut sets used by the hybrid iteration to
half-spaces.

Everything here is finite dimensional, so the weak and norm topologies
coincide.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "Point",
    "LinearMap",
    "HalfSpace",
    "WholeSpace",
    "Box",
    "Ball",
    "Intersection",
    "ConvexSet",
    "DimensionError",
    "ProjectionError",
    "EmptySetError",
    "DykstraNonConvergence",
    "inner",
    "norm",
    "apply",
    "apply_adjoint",
    "estimate_operator_norm",
    "project",
    "project_intersection",
    "project_halfspaces",
    "project_box_halfspaces",
    "dykstra",
    "build_cn_halfspace",
    "build_qn_halfspace",
]


class DimensionError(ValueError):
    """Operands live in spaces of different dimension."""


class ProjectionError(RuntimeError):
    """Base class for projection failures."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EmptySetError(ProjectionError):
    """The set (or intersection) has no points."""


class DykstraNonConvergence(ProjectionError):
    """Dykstra's iteration hit its budget before reaching tolerance."""


_add = np.add.reduce
_all = np.logical_and.reduce


def _check_dims(a, b, what="operands"):
    if a != b:
        raise DimensionError(f"dimension mismatch between {what}: {a} != {b}")


class Point:
    """Immutable element of a real coordinate space.

    Supports the vector-space operations only: ``p + q`` and ``p - q`` between
    points of equal dimension, and scaling by a real number. There is
    deliberately no way to add a real number to a point; such expressions
    raise ``TypeError``.
    """

    __slots__ = ("_coords",)
    # numpy must not coerce a Point into an array behind our back
    # (``np.float64(1) + p`` would otherwise succeed).
    __array_ufunc__ = None

    def __init__(self, coords):
        if isinstance(coords, Point):
            arr = coords._coords
        else:
            arr = np.array(coords, dtype=float)
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError("a Point needs a non-empty 1-d coordinate list")
            if not np.all(np.isfinite(arr)):
                raise ValueError("Point coordinates must be finite")
            arr.flags.writeable = False
        self._coords = arr

    @classmethod
    def _wrap(cls, arr):
        # fast path for internally computed 1-d float arrays; a finite sum
        # implies finite entries, the full check only runs on failure
        if not math.isfinite(_add(arr)) and not np.isfinite(arr).all():
            raise ValueError("Point coordinates must be finite")
        p = object.__new__(cls)
        arr.flags.writeable = False
        p._coords = arr
        return p

    @classmethod
    def _trusted(cls, arr):
        # caller has already established that ``arr`` is finite
        p = object.__new__(cls)
        arr.flags.writeable = False
        p._coords = arr
        return p

    @classmethod
    def zeros(cls, dim):
        return cls._wrap(np.zeros(int(dim)))

    @property
    def coords(self):
        """Read-only coordinate array."""
        return self._coords

    @property
    def dim(self):
        return self._coords.shape[0]

    def tolist(self):
        return self._coords.tolist()

    def __len__(self):
        return self.dim

    def __iter__(self):
        return iter(self._coords.tolist())

    def __getitem__(self, i):
        return float(self._coords[i])

    def __add__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        _check_dims(self.dim, other.dim)
        return Point._wrap(self._coords + other._coords)

    def __sub__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        _check_dims(self.dim, other.dim)
        return Point._wrap(self._coords - other._coords)

    def __neg__(self):
        return Point._wrap(-self._coords)

    def __mul__(self, scalar):
        if isinstance(scalar, Point) or not isinstance(scalar, numbers.Real):
            return NotImplemented
        return Point._wrap(self._coords * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Point) or not isinstance(scalar, numbers.Real):
            return NotImplemented
        return Point._wrap(self._coords / float(scalar))

    def __eq__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self._coords, other._coords))

    __hash__ = None

    def __repr__(self):
        return f"Point({self._coords.tolist()!r})"


def _as_point(x):
    return x if isinstance(x, Point) else Point(x)


def inner(x, y):
    """Standard inner product of two points of equal dimension."""
    _check_dims(x.dim, y.dim)
    return float(np.dot(x.coords, y.coords))


def _vnorm(v):
    # Euclidean norm of a 1-d array; cheaper than np.linalg.norm at desk scale
    return math.sqrt(float(v @ v))


def norm(x):
    return _vnorm(x.coords)


def estimate_operator_norm(matrix, tol=1e-10, seed=0, max_iter=100_000):
    """Spectral norm of a dense matrix by power iteration on ``M^T M``.

    The iteration starts from a seeded Gaussian vector and stops once the
    eigen-residual ``||M^T M v - mu v||`` falls below ``tol * mu``, which
    bounds the relative error of ``mu`` as an estimate of the top eigenvalue
    of ``M^T M``. The zero map returns 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    # accept a LinearMap as well as a bare matrix
    m = np.asarray(getattr(matrix, "matrix", matrix), dtype=float)
    if m.ndim != 2:
        raise ValueError("matrix must be 2-d")
    if not np.any(m):
        return 0.0
    gram = m.T @ m
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(max_iter):
        gv = gram @ v
        mu = float(v @ gv)
        if np.linalg.norm(gv - mu * v) <= tol * mu:
            break
        nrm = np.linalg.norm(gv)
        if nrm == 0.0:
            # seed vector landed in the kernel; restart elsewhere
            v = rng.standard_normal(gram.shape[0])
            v /= np.linalg.norm(v)
            continue
        v = gv / nrm
    return float(np.sqrt(max(mu, 0.0)))


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Dense linear map from H1 (columns) to H2 (rows).

    ``norm_estimate`` caches a power-iteration estimate of the operator norm;
    it is computed on construction when not supplied.
    """

    matrix: np.ndarray
    norm_estimate: float = field(default=None)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or 0 in m.shape:
            raise ValueError("LinearMap matrix must be a non-empty 2-d array")
        if not np.all(np.isfinite(m)):
            raise ValueError("LinearMap entries must be finite")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        if self.norm_estimate is None:
            object.__setattr__(self, "norm_estimate", estimate_operator_norm(m))
        elif self.norm_estimate < 0:
            raise ValueError("norm_estimate must be nonnegative")

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), norm_estimate=1.0)

    @property
    def domain_dim(self):
        return self.matrix.shape[1]

    @property
    def codomain_dim(self):
        return self.matrix.shape[0]


def apply(A, x):
    """``A x`` in H2."""
    _check_dims(x.dim, A.domain_dim, "point and map domain")
    return Point._wrap(A.matrix @ x.coords)


def apply_adjoint(A, y):
    """``A* y`` in H1; the adjoint of a real matrix is its transpose."""
    _check_dims(y.dim, A.codomain_dim, "point and map codomain")
    return Point._wrap(A.matrix.T @ y.coords)


# --------------------------------------------------------------------------
# Convex sets
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WholeSpace:
    dim: int

    def project(self, x):
        _check_dims(x.dim, self.dim)
        return x

    def _project_array(self, v):
        return v

    def contains(self, x, tol=0.0):
        return True


@dataclass(frozen=True, eq=False)
class Box:
    """Componentwise box ``lower <= z <= upper``."""

    lower: Point
    upper: Point

    def __post_init__(self):
        lo, hi = _as_point(self.lower), _as_point(self.upper)
        _check_dims(lo.dim, hi.dim, "box bounds")
        if np.any(lo.coords > hi.coords):
            raise EmptySetError("Box needs lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, dim, half_width=1.0):
        return cls(Point(np.full(dim, -half_width)), Point(np.full(dim, half_width)))

    @property
    def dim(self):
        return self.lower.dim

    def _project_array(self, v):
        return np.minimum(np.maximum(v, self.lower.coords), self.upper.coords)

    def project(self, x):
        _check_dims(x.dim, self.dim)
        return Point._wrap(self._project_array(x.coords))

    def contains(self, x, tol=0.0):
        c = x.coords
        if tol == 0.0:
            return bool(_all(c >= self.lower.coords)) and bool(_all(c <= self.upper.coords))
        return bool(_all(c >= self.lower.coords - tol)) and bool(_all(c <= self.upper.coords + tol))


@dataclass(frozen=True, eq=False)
class Ball:
    center: Point
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        if not self.radius >= 0:
            raise EmptySetError("Ball radius must be nonnegative")

    @property
    def dim(self):
        return self.center.dim

    def _project_array(self, v):
        d = v - self.center.coords
        r = np.linalg.norm(d)
        if r <= self.radius:
            return v
        return self.center.coords + (self.radius / r) * d

    def project(self, x):
        _check_dims(x.dim, self.dim)
        return Point._wrap(self._project_array(x.coords))

    def contains(self, x, tol=0.0):
        return norm(x - self.center) <= self.radius + tol


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """The set ``{z : <normal, z> <= offset}``.

    A zero normal is allowed only with a nonnegative offset, in which case the
    set is the whole space and ``degenerate`` is true.
    """

    normal: Point
    offset: float
    degenerate: bool = field(init=False)

    def __post_init__(self):
        a = _as_point(self.normal)
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))
        if not np.isfinite(self.offset):
            raise ValueError("HalfSpace offset must be finite")
        nsq = float(a.coords @ a.coords)
        object.__setattr__(self, "_nsq", nsq)
        object.__setattr__(self, "_norm", math.sqrt(nsq))
        degenerate = nsq == 0.0
        if degenerate and self.offset < 0:
            raise EmptySetError("zero-normal half-space with negative offset is empty")
        object.__setattr__(self, "degenerate", degenerate)

    @classmethod
    def _from_arrays(cls, a, offset, nsq=None):
        # same checks as __init__ without re-validating an internal normal
        h = object.__new__(cls)
        if nsq is None:
            nsq = float(a @ a)
        if nsq == 0.0 and offset < 0:
            raise EmptySetError("zero-normal half-space with negative offset is empty")
        if not math.isfinite(offset):
            raise ValueError("HalfSpace offset must be finite")
        sa = object.__setattr__
        sa(h, "normal", Point._wrap(a))
        sa(h, "offset", float(offset))
        sa(h, "degenerate", nsq == 0.0)
        sa(h, "_nsq", nsq)
        sa(h, "_norm", math.sqrt(nsq))
        return h

    @property
    def dim(self):
        return self.normal.dim

    def _project_array(self, v):
        if self.degenerate:
            return v
        a = self.normal.coords
        excess = float(a @ v) - self.offset
        if excess <= 0.0:
            return v
        return v - (excess / self._nsq) * a

    def project(self, x):
        _check_dims(x.dim, self.dim)
        return Point._wrap(self._project_array(x.coords))

    def value(self, z):
        """``<normal, z> - offset``; nonpositive exactly on the set."""
        return inner(self.normal, z) - self.offset

    def signed_distance(self, z):
        """Distance to the boundary, positive outside; ``-inf`` if degenerate."""
        if self.degenerate:
            return -math.inf
        return self.value(z) / self._norm

    def contains(self, x, tol=0.0):
        return self.signed_distance(x) <= tol


@dataclass(frozen=True, eq=False)
class Intersection:
    sets: tuple

    def __post_init__(self):
        sets = tuple(self.sets)
        if not sets:
            raise ValueError("Intersection needs at least one set")
        for s in sets[1:]:
            _check_dims(s.dim, sets[0].dim, "intersected sets")
        object.__setattr__(self, "sets", sets)

    @property
    def dim(self):
        return self.sets[0].dim

    def project(self, x, max_iter=10_000, tol=1e-10):
        return project_intersection(self.sets, x, max_iter=max_iter, tol=tol)

    def _project_array(self, v):
        return self.project(Point._wrap(np.array(v, dtype=float))).coords

    def contains(self, x, tol=0.0):
        return all(s.contains(x, tol) for s in self.sets)


ConvexSet = Union[WholeSpace, Box, Ball, HalfSpace, Intersection]


def project(cset, x):
    """Metric projection of ``x`` onto ``cset``."""
    return cset.project(x)


def _dist(cset, v):
    return float(np.linalg.norm(v - cset._project_array(v)))


def _flatten(sets):
    out = []
    for s in sets:
        if isinstance(s, Intersection):
            out.extend(_flatten(s.sets))
        elif isinstance(s, WholeSpace) or (isinstance(s, HalfSpace) and s.degenerate):
            continue
        else:
            out.append(s)
    return out


def _two_cut_kernel(v, a1, c1, nsq1, a2, c2, nsq2, v_norm=None):
    """Array form of :func:`project_halfspaces`; a zero ``nsq`` drops that cut.

    Returns ``v`` itself when no cut is violated.
    """
    tol = 1e-12 * (1.0 + (_vnorm(v) if v_norm is None else v_norm))
    if nsq1 == 0.0:
        a1, c1, nsq1, a2, c2, nsq2 = a2, c2, nsq2, None, 0.0, 0.0
    if nsq1 == 0.0:
        return v
    n1 = math.sqrt(nsq1)
    r1 = float(a1 @ v) - c1
    if nsq2 == 0.0:
        return v if r1 <= tol * n1 else v - (r1 / nsq1) * a1

    n2 = math.sqrt(nsq2)
    r2 = float(a2 @ v) - c2
    if r1 <= tol * n1 and r2 <= tol * n2:
        return v
    g11, g22, g12 = nsq1, nsq2, float(a1 @ a2)

    best = None  # (distance, mu1, mu2)
    if r1 > 0 and r2 - (r1 / g11) * g12 <= tol * n2:
        best = (r1 / n1, r1 / g11, 0.0)
    if r2 > 0 and r1 - (r2 / g22) * g12 <= tol * n1:
        d = r2 / n2
        if best is None or d < best[0]:
            best = (d, 0.0, r2 / g22)
    det = g11 * g22 - g12 * g12
    if det > 1e-14 * g11 * g22:
        mu1 = (g22 * r1 - g12 * r2) / det
        mu2 = (g11 * r2 - g12 * r1) / det
        if mu1 >= 0 and mu2 >= 0:
            d = math.sqrt(max(mu1 * mu1 * g11 + 2 * mu1 * mu2 * g12 + mu2 * mu2 * g22, 0.0))
            if best is None or d < best[0]:
                best = (d, mu1, mu2)
    if best is None:
        raise EmptySetError("intersection of half-spaces is empty")
    _, mu1, mu2 = best
    return v - mu1 * a1 - mu2 * a2


def project_halfspaces(halfspaces, x):
    """Exact projection onto the intersection of at most two half-spaces.

    Enumerates the KKT active sets: no constraint, either one alone, or both
    (a 2x2 Gram system). Among the candidates that are feasible and have
    nonnegative multipliers the nearest one is the projection. Feasibility is
    judged by signed distance, since normals can be tiny near a solution.
    """
    hs = [h for h in halfspaces if not h.degenerate]
    if len(hs) > 2:
        raise ValueError("closed form covers at most two half-spaces")
    if not hs:
        return x
    h1 = hs[0]
    h2 = hs[1] if len(hs) == 2 else h1
    v = x.coords
    out = _two_cut_kernel(v, h1.normal.coords, h1.offset, h1._nsq,
                          h2.normal.coords, h2.offset, h2._nsq if len(hs) == 2 else 0.0)
    return x if out is v else Point._wrap(out)


def _box_cut(lo, hi, v, a, b, tol):
    """Projection of ``v`` onto ``{lo <= z <= hi, <a, z> <= b}``.

    The multiplier ``mu`` solves ``<a, clamp(v - mu a)> = b``, a continuous
    nonincreasing piecewise-linear equation whose kinks sit where a
    coordinate reaches a bound; the root is found exactly between kinks.
    Returns ``(z, mu)``.
    """
    z = np.minimum(np.maximum(v, lo), hi)
    r = float(a @ z) - b
    na = _vnorm(a)
    if r <= tol * na:
        return z, 0.0
    nz = a != 0.0
    kinks = np.concatenate([(v[nz] - lo[nz]) / a[nz], (v[nz] - hi[nz]) / a[nz]])
    kinks = np.unique(kinks[kinks > 0.0])
    Z = np.minimum(np.maximum(v[None, :] - kinks[:, None] * a[None, :], lo), hi)
    g = Z @ a - b
    below = np.nonzero(g <= 0.0)[0]
    if below.size == 0:
        # past the last kink g is constant: the cut misses the box
        if g.size and g[-1] <= tol * na:
            return Z[-1], float(kinks[-1])
        raise EmptySetError("half-space does not meet the box", residual=float(g[-1] / na) if g.size else r / na)
    k = int(below[0])
    mu_l, g_l = (0.0, r) if k == 0 else (float(kinks[k - 1]), float(g[k - 1]))
    mu_r, g_r = float(kinks[k]), float(g[k])
    mu = mu_r if g_l == g_r else mu_l + (mu_r - mu_l) * g_l / (g_l - g_r)
    return np.minimum(np.maximum(v - mu * a, lo), hi), mu


def project_box_halfspaces(box, halfspaces, x):
    """Exact projection onto a box cut by at most two half-spaces.

    One cut is handled by :func:`_box_cut`. With two, the multiplier ``mu``
    of the second cut is the root of ``<a2, z(mu)> - b2`` where ``z(mu)`` is
    the one-cut projection of ``x - mu a2``; that function is continuous and
    nonincreasing (projections are monotone), so a bracketing root finder
    converges without any of the stalling Dykstra can show near thin
    intersections.
    """
    hs = [h for h in halfspaces if not h.degenerate]
    if len(hs) > 2:
        raise ValueError("closed form covers at most two half-spaces")
    lo, hi = box.lower.coords, box.upper.coords
    v = x.coords
    tol = 1e-12 * (1.0 + _vnorm(v))
    if not hs:
        return box.project(x)
    h1 = hs[0]
    a1, b1 = h1.normal.coords, h1.offset
    if len(hs) == 1:
        return Point._wrap(_box_cut(lo, hi, v, a1, b1, tol)[0])
    h2 = hs[1]
    a2, b2 = h2.normal.coords, h2.offset
    n2 = h2._norm

    def psi(mu):
        return float(a2 @ _box_cut(lo, hi, v - mu * a2, a1, b1, tol)[0]) - b2

    start = psi(0.0)
    if start <= tol * n2:
        return Point._wrap(_box_cut(lo, hi, v, a1, b1, tol)[0])
    top = start / h2._nsq
    for _ in range(200):
        end = psi(top)
        if end <= 0.0:
            break
        top *= 2.0
    else:
        if end > tol * n2:
            raise EmptySetError("two cuts and the box have no common point", residual=end / n2)
    mu = brentq(psi, 0.0, top, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return Point._wrap(_box_cut(lo, hi, v - mu * a2, a1, b1, tol)[0])


def dykstra(sets, x, max_iter=10_000, tol=1e-10, window=None):
    """Dykstra's alternating projections with correction terms.

    One sweep projects the corrected iterate onto every set in turn. The loop
    stops once a sweep moves both the iterate and every correction term by at
    most ``tol * (1 + ||x||)``. The iterate alone can sit still for a sweep
    while the corrections are still changing, so it is not a safe criterion
    on its own.

    Raises
    ------
    EmptySetError
        When the budget runs out and the distance to the farthest set has not
        decreased over the last ``window`` sweeps (default: half the budget)
        while staying well above tolerance. Dykstra can plateau for hundreds
        of sweeps on feasible problems, so the verdict waits for the budget.
    DykstraNonConvergence
        When ``max_iter`` sweeps are exhausted without that stall pattern.
    """
    sets = list(sets)
    if not sets:
        raise ValueError("need at least one set")
    for s in sets:
        _check_dims(x.dim, s.dim, "point and set")
    if window is None:
        window = max(max_iter // 2, 1)
    scale = 1.0 + float(np.linalg.norm(x.coords))
    v = np.array(x.coords, dtype=float)
    incs = [np.zeros_like(v) for _ in sets]
    history = []
    for _ in range(max_iter):
        v_start = v
        inc_change = 0.0
        for i, s in enumerate(sets):
            shifted = v + incs[i]
            v = s._project_array(shifted)
            new_inc = shifted - v
            inc_change = max(inc_change, _vnorm(new_inc - incs[i]))
            incs[i] = new_inc
        if _vnorm(v - v_start) <= tol * scale and inc_change <= tol * scale:
            return Point._wrap(v)
        history.append(max(_dist(s, v) for s in sets))
    residual = history[-1] if history else float("inf")
    if len(history) > window:
        old = history[-window - 1]
        if residual > 1e3 * tol * scale and residual >= (1.0 - 1e-6) * old:
            raise EmptySetError(
                "intersection appears empty: feasibility residual "
                f"{residual:.3e} did not decrease over the last {window} sweeps",
                residual=residual,
                iterations=max_iter,
            )
    raise DykstraNonConvergence(
        f"Dykstra did not converge in {max_iter} sweeps (residual {residual:.3e})",
        residual=residual,
        iterations=max_iter,
    )


def project_intersection(sets: Sequence, x, max_iter=10_000, tol=1e-10):
    """Metric projection of ``x`` onto the intersection of ``sets``.

    Whole-space members are dropped. If at most two half-spaces remain, their
    exact joint projection is computed first; when it already lies in every
    other set it is the answer (projection onto a superset landing inside the
    subset). A single box cut by those half-spaces is then solved exactly by
    :func:`project_box_halfspaces`. Anything else goes to Dykstra's
    algorithm.
    """
    sets = list(sets)
    if not sets:
        raise ValueError("need at least one set")
    dim = x.dim
    for s in sets:
        if s.dim != dim:
            _check_dims(dim, s.dim, "point and set")
    active = _flatten(sets)
    if not active:
        return x
    if len(active) == 1:
        return Point._wrap(active[0]._project_array(x.coords).copy())
    halfspaces, others = [], []
    for s in active:
        (halfspaces if isinstance(s, HalfSpace) else others).append(s)
    if len(halfspaces) <= 2:
        if halfspaces:
            z = project_halfspaces(halfspaces, x)
        else:
            z = x
        if all(s.contains(z) for s in others):
            return z
        if len(others) == 1 and isinstance(others[0], Box):
            return project_box_halfspaces(others[0], halfspaces, x)
    return dykstra(active, x, max_iter=max_iter, tol=tol)


# --------------------------------------------------------------------------
# Cut sets of the hybrid iteration
# --------------------------------------------------------------------------


def build_cn_halfspace(x_n, Sx_n, y_n, beta_n):
    """Half-space form of ``||y - z||^2 <= (1-b)||x - z||^2 + b||Sx - z||^2``.

    Expanding the squares, the ``||z||^2`` terms cancel because the weights
    on the right sum to one, leaving ``<a, z> <= c`` with
    ``a = 2((1-b)x + b Sx - y)`` and ``c = (1-b)||x||^2 + b||Sx||^2 - ||y||^2``.
    ``c`` is evaluated as ``<a, y> + (1-b)||x - y||^2 + b||Sx - y||^2``, the
    same quantity without the cancellation.
    """
    if not 0.0 <= beta_n <= 1.0:
        raise ValueError(f"beta_n must lie in [0, 1], got {beta_n}")
    _check_dims(x_n.dim, Sx_n.dim)
    _check_dims(x_n.dim, y_n.dim)
    a, c, nsq = _cn_arrays(x_n.coords, Sx_n.coords, y_n.coords, beta_n)
    return HalfSpace._from_arrays(a, c, nsq)


def _cn_arrays(x, s, y, beta):
    # (normal, offset, ||normal||^2); the offset is written around y so that
    # ||x||^2 is never cancelled against ||y||^2
    dx, ds = x - y, s - y
    a = 2.0 * ((1.0 - beta) * dx + beta * ds)
    c = float(a @ y) + (1.0 - beta) * float(dx @ dx) + beta * float(ds @ ds)
    nsq = float(a @ a)
    if nsq == 0.0:
        c = max(c, 0.0)
    return a, c, nsq


def build_qn_halfspace(x_0, x_n):
    """Half-space form of ``<x_n - z, x_0 - x_n> >= 0``."""
    _check_dims(x_0.dim, x_n.dim)
    a = x_0.coords - x_n.coords
    return HalfSpace._from_arrays(a, float(a @ x_n.coords))
