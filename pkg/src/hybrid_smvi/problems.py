"""Benchmark instances whose solution set is known by construction.

Every generator is a pure function of its parameters and seed; random draws
use ``numpy.random.default_rng(seed)`` in a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import Box, LinearMap, Point, WholeSpace, apply
from .operators import (
    AffineContraction,
    AffineGradient,
    AffineMonotone,
    Identity,
    L1,
    NormalCone,
    WMapping,
    ZeroMap,
    ZeroResolvent,
    fixed_point_residual,
)
from .solver import ProblemSpec, SolverConfig, validate_config

__all__ = [
    "BenchmarkProblem",
    "PlantError",
    "make_box_feasibility",
    "make_planted_singleton",
    "make_l1_denoise",
    "soft_threshold",
    "plant_residuals",
    "verify_plant",
    "GENERATORS",
    "PLANT_TOL",
]

PLANT_TOL = 1e-10
MAX_REDRAWS = 20


class PlantError(RuntimeError):
    """A generator could not produce an instance satisfying its plant."""


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    """A problem together with a known point of its solution set.

    ``solution_kind`` is ``"singleton"`` when the solution set is ``{planted}``
    and ``"box"`` when it is the box ``C`` itself; ``project_solution`` maps a
    starting point to its projection onto the solution set.
    """

    name: str
    spec: ProblemSpec
    planted: Point
    solution_kind: str
    project_solution: Callable
    recommended_config: SolverConfig
    x0: Point
    params: Optional[dict] = None

    def expected_limit(self, x0=None):
        return self.project_solution(self.x0 if x0 is None else x0)


def soft_threshold(b, t):
    c = np.asarray(b, dtype=float)
    return np.sign(c) * np.maximum(np.abs(c) - t, 0.0)


def plant_residuals(spec, cfg, p):
    """Fixed-point residuals of ``p`` under U, V∘A, W_0, S and every T_i."""
    Ap = apply(spec.A, p)
    W = WMapping(spec.family, cfg.lambdas_at(0, len(spec.family)))
    out = {
        "U": float(np.linalg.norm((spec.U(p, cfg.lam) - p).coords)),
        "V": float(np.linalg.norm((spec.V(Ap, cfg.lam) - Ap).coords)),
        "W": fixed_point_residual(W, p),
        "S": fixed_point_residual(spec.S, p),
    }
    for i, T in enumerate(spec.family, start=1):
        out[f"T{i}"] = fixed_point_residual(T, p)
    return out


def verify_plant(problem, tol=PLANT_TOL):
    res = plant_residuals(problem.spec, problem.recommended_config, problem.planted)
    bad = {k: v for k, v in res.items() if v > tol}
    if bad:
        raise PlantError(f"{problem.name}: planted point is not a fixed point: {bad}")
    violations = validate_config(problem.spec, problem.recommended_config)
    if violations:
        raise PlantError(f"{problem.name}: recommended config invalid: {violations}")
    return res


def make_box_feasibility(dim=2, seed=0, x0=None):
    """Normal cones of ``[-1, 1]^dim`` on both sides with ``A = I``.

    The solution set is the box itself, so the limit from ``x0`` is the
    componentwise clamp of ``x0``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    box = Box.cube(dim, 1.0)
    lam = 1.0
    spec = ProblemSpec(
        dim1=dim, dim2=dim, C=box, Q=WholeSpace(dim), A=LinearMap.identity(dim),
        M1_resolvent=NormalCone(box, lam), M2_resolvent=NormalCone(box, lam),
        f=ZeroMap(1.0), g=ZeroMap(1.0), theta1=1.0, theta2=1.0,
        S=Identity(), family=(Identity(),),
    )
    if x0 is None:
        x0 = Point(rng.uniform(-3.0, 3.0, dim))
    x0 = Point(x0)
    planted = box.project(x0)
    cfg = SolverConfig(gamma=0.5, lam=lam)
    problem = BenchmarkProblem(
        name="box", spec=spec, planted=planted, solution_kind="box",
        project_solution=box.project, recommended_config=cfg, x0=x0,
        params={"dim": dim, "seed": seed},
    )
    verify_plant(problem)
    return problem


def _random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _random_spd(rng, n, lo, hi):
    q = _random_orthogonal(rng, n)
    return (q * rng.uniform(lo, hi, n)) @ q.T


def _random_monotone(rng, n, lo, hi):
    # symmetric positive definite part plus a skew part: B + B^T stays PSD
    k = rng.standard_normal((n, n)) / np.sqrt(n)
    return _random_spd(rng, n, lo, hi) + 0.5 * (k - k.T)


def _random_contraction(rng, n, norm):
    r = rng.standard_normal((n, n))
    return norm * r / np.linalg.norm(r, 2)


def _random_full_rank(rng, m, n):
    for _ in range(MAX_REDRAWS):
        a = rng.standard_normal((m, n)) / np.sqrt(max(m, n))
        s = np.linalg.svd(a, compute_uv=False)
        if s[-1] > 1e-2 * s[0]:
            return a
    raise PlantError("could not draw a well-conditioned full-rank A")


def make_planted_singleton(dim1=2, dim2=2, seed=0, n_maps=2, x0=None, x0_radius=0.5):
    """Affine instance whose solution set is exactly ``{p}``.

    ``f(x) = P(x - p)``, ``M1 z = B1(z - p)`` on H1 and the analogous maps
    around ``A p`` on H2, so ``U p = p`` and ``V(A p) = A p``. ``S`` and each
    ``T_i`` are strict affine contractions towards ``p``, which pins the
    common fixed-point set to ``{p}``.

    Every map is affine and centred on ``p`` and ``C`` stays inactive, so in
    exact arithmetic the iteration is equivariant under scaling about ``p``
    and the error after ``n`` steps is proportional to ``||x0 - p||``. In
    floating point the trajectories for different radii agree only for the
    first few dozen steps, since rounding differences grow quickly; what
    survives is the bound ``||x_n - p||^2 <= ||x0 - p||^2 - ||x_n - x0||^2``.
    The default start sits at distance ``x0_radius`` from ``p`` in a seeded
    random direction.
    """
    if dim1 < 1 or dim2 < 1:
        raise ValueError("dims must be >= 1")
    rng = np.random.default_rng(seed)
    p = rng.uniform(-1.0, 1.0, dim1)
    A = LinearMap(_random_full_rank(rng, dim2, dim1))
    Ap = A.matrix @ p

    P1 = _random_spd(rng, dim1, 0.5, 1.0)
    P2 = _random_spd(rng, dim2, 0.5, 1.0)
    f = AffineGradient(P1, Point(-P1 @ p))
    g = AffineGradient(P2, Point(-P2 @ Ap))
    lam = min(f.theta, g.theta)
    B1 = _random_monotone(rng, dim1, 1.0, 2.0)
    B2 = _random_monotone(rng, dim2, 1.0, 2.0)
    M1 = AffineMonotone(B1, Point(-B1 @ p), lam)
    M2 = AffineMonotone(B2, Point(-B2 @ Ap), lam)

    def contraction():
        R = _random_contraction(rng, dim1, 0.1)
        return AffineContraction(R, Point(p - R @ p))

    S = contraction()
    family = tuple(contraction() for _ in range(n_maps))
    spec = ProblemSpec(
        dim1=dim1, dim2=dim2, C=Box.cube(dim1, 5.0), Q=WholeSpace(dim2), A=A,
        M1_resolvent=M1, M2_resolvent=M2, f=f, g=g,
        theta1=f.theta, theta2=g.theta, S=S, family=family,
    )
    gamma = 0.5 / A.norm_estimate**2
    cfg = SolverConfig(gamma=gamma, lam=lam)
    if x0 is None:
        direction = rng.standard_normal(dim1)
        x0 = Point(p + x0_radius * direction / np.linalg.norm(direction))
    planted = Point(p)
    problem = BenchmarkProblem(
        name="planted_singleton", spec=spec, planted=planted, solution_kind="singleton",
        project_solution=lambda _x: planted, recommended_config=cfg, x0=Point(x0),
        params={"dim1": dim1, "dim2": dim2, "seed": seed, "x0_radius": x0_radius},
    )
    verify_plant(problem)
    return problem


def make_l1_denoise(dim=5, weight=0.5, seed=0, b=None, x0=None):
    """Soft-thresholding instance: ``0 in x - b + weight * d||x||_1``.

    The unique solution is ``soft_threshold(b, weight)``.
    """
    if weight < 0:
        raise ValueError("weight must be nonnegative")
    rng = np.random.default_rng(seed)
    if b is None:
        b = rng.uniform(-2.0, 2.0, dim)
    b = np.asarray(b, dtype=float)
    dim = b.shape[0]
    lam = 0.5
    f = AffineGradient(np.eye(dim), Point(-b))
    spec = ProblemSpec(
        dim1=dim, dim2=dim, C=WholeSpace(dim), Q=WholeSpace(dim), A=LinearMap.identity(dim),
        M1_resolvent=L1(weight, lam), M2_resolvent=ZeroResolvent(lam),
        f=f, g=ZeroMap(1.0), theta1=f.theta, theta2=1.0,
        S=Identity(), family=(Identity(),),
    )
    if x0 is None:
        x0 = Point(rng.uniform(-3.0, 3.0, dim))
    planted = Point(soft_threshold(b, weight))
    problem = BenchmarkProblem(
        name="l1_denoise", spec=spec, planted=planted, solution_kind="singleton",
        project_solution=lambda _x: planted, recommended_config=SolverConfig(gamma=0.5, lam=lam),
        x0=Point(x0), params={"dim": dim, "weight": weight, "seed": seed},
    )
    verify_plant(problem)
    return problem


GENERATORS = {
    "box": make_box_feasibility,
    "planted_singleton": make_planted_singleton,
    "l1_denoise": make_l1_denoise,
}
