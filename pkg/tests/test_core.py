import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from hybrid_smvi.core import (
    Ball,
    Box,
    DimensionError,
    DykstraNonConvergence,
    EmptySetError,
    HalfSpace,
    Intersection,
    LinearMap,
    Point,
    WholeSpace,
    apply,
    apply_adjoint,
    build_cn_halfspace,
    build_qn_halfspace,
    dykstra,
    estimate_operator_norm,
    inner,
    norm,
    project,
    project_box_halfspaces,
    project_intersection,
)

FROZEN = json.loads((Path(__file__).parent / "data" / "oracles.json").read_text())

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vec(dim):
    return arrays(np.float64, dim, elements=finite)


# --------------------------------------------------------------------------
# Point
# --------------------------------------------------------------------------


class TestPoint:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Point([1.0, float("nan")])
        with pytest.raises(ValueError):
            Point([float("inf")])

    def test_rejects_empty_and_2d(self):
        with pytest.raises(ValueError):
            Point([])
        with pytest.raises(ValueError):
            Point([[1.0, 2.0]])

    def test_coords_read_only(self):
        p = Point([1.0, 2.0])
        with pytest.raises(ValueError):
            p.coords[0] = 5.0

    def test_copy_isolated_from_source(self):
        src = np.array([1.0, 2.0])
        p = Point(src)
        src[0] = 9.0
        assert p[0] == 1.0

    def test_vector_space_ops(self):
        p, q = Point([1.0, 2.0]), Point([3.0, -1.0])
        assert p + q == Point([4.0, 1.0])
        assert p - q == Point([-2.0, 3.0])
        assert 2 * p == Point([2.0, 4.0])
        assert p * 0.5 == Point([0.5, 1.0])
        assert p / 2 == Point([0.5, 1.0])
        assert -p == Point([-1.0, -2.0])

    @pytest.mark.parametrize("scalar", [1, 1.5, np.float64(2.0), np.int64(3), True])
    def test_no_real_plus_point(self, scalar):
        p = Point([1.0, 2.0])
        with pytest.raises(TypeError):
            scalar + p
        with pytest.raises(TypeError):
            p + scalar
        with pytest.raises(TypeError):
            p - scalar
        with pytest.raises(TypeError):
            scalar - p

    def test_no_array_plus_point(self):
        p = Point([1.0, 2.0])
        with pytest.raises(TypeError):
            np.array([1.0, 1.0]) + p
        with pytest.raises(TypeError):
            p + np.array([1.0, 1.0])

    def test_no_point_times_point(self):
        with pytest.raises(TypeError):
            Point([1.0]) * Point([2.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            Point([1.0]) + Point([1.0, 2.0])

    def test_unhashable(self):
        with pytest.raises(TypeError):
            hash(Point([1.0]))


# --------------------------------------------------------------------------
# inner, apply, adjoint, norm estimate
# --------------------------------------------------------------------------


def test_inner_examples():
    assert inner(Point([1, 0]), Point([0, 1])) == 0.0
    assert inner(Point([1, 2]), Point([3, 4])) == 11.0
    with pytest.raises(DimensionError):
        inner(Point([1.0]), Point([1.0, 2.0]))


def test_inner_self_matches_summation(rng):
    for _ in range(100):
        x = rng.standard_normal(int(rng.integers(1, 10)))
        ref = math.fsum(v * v for v in x)
        val = inner(Point(x), Point(x))
        assert val >= 0
        assert val == pytest.approx(ref, rel=1e-14, abs=1e-300)


@given(vec(4), vec(4), vec(4), st.floats(-10, 10))
def test_inner_symmetric_bilinear(x, y, z, a):
    px, py, pz = Point(x), Point(y), Point(z)
    assert inner(px, py) == inner(py, px)
    lhs = inner(a * px + pz, py)
    rhs = a * inner(px, py) + inner(pz, py)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-6)


def test_apply_examples():
    assert apply(LinearMap.identity(2), Point([3, 4])) == Point([3, 4])
    A = LinearMap(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert apply(A, Point([1, 0])) == Point([1, 3])
    assert apply_adjoint(LinearMap.identity(2), Point([1, 2])) == Point([1, 2])
    assert apply_adjoint(A, Point([1, 0])) == Point([1, 2])


def test_apply_dimension_errors():
    A = LinearMap(np.ones((3, 2)))
    with pytest.raises(DimensionError):
        apply(A, Point([1.0, 2.0, 3.0]))
    with pytest.raises(DimensionError):
        apply_adjoint(A, Point([1.0, 2.0]))


def test_adjoint_identity_random(rng):
    for _ in range(100):
        m, n = rng.integers(1, 8, size=2)
        A = LinearMap(rng.standard_normal((m, n)))
        x, y = Point(rng.standard_normal(n)), Point(rng.standard_normal(m))
        gap = abs(inner(apply(A, x), y) - inner(x, apply_adjoint(A, y)))
        assert gap <= 1e-12 * (1 + norm(x) * norm(y))


def test_norm_estimate_examples():
    assert estimate_operator_norm(np.eye(2)) == pytest.approx(1.0, rel=1e-10)
    assert estimate_operator_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, rel=1e-10)
    assert estimate_operator_norm([[1, 2], [3, 4]]) == pytest.approx(FROZEN["norm_1234"], rel=1e-10)
    assert FROZEN["norm_1234"] == pytest.approx(5.4650, abs=1e-4)


def test_norm_estimate_zero_map_and_linear_map_argument():
    assert estimate_operator_norm(np.zeros((3, 2))) == 0.0
    A = LinearMap(np.diag([2.0, 0.5]))
    assert estimate_operator_norm(A) == pytest.approx(2.0, rel=1e-10)
    assert A.norm_estimate == pytest.approx(2.0, rel=1e-10)


def test_norm_estimate_vs_eigen_oracle(rng):
    for _ in range(50):
        m, n = rng.integers(1, 12, size=2)
        M = rng.standard_normal((m, n))
        ref = oracles.spectral_norm(M)
        assert abs(estimate_operator_norm(M) - ref) <= 1e-10 * ref


def test_norm_estimate_deterministic(rng):
    M = rng.standard_normal((6, 4))
    assert estimate_operator_norm(M) == estimate_operator_norm(M)


def test_norm_estimate_bad_tol():
    with pytest.raises(ValueError):
        estimate_operator_norm(np.eye(2), tol=0)


# --------------------------------------------------------------------------
# Sets and projections
# --------------------------------------------------------------------------


def test_projection_examples():
    assert project(Box.cube(2, 1.0), Point([2, 0])) == Point([1, 0])
    assert project(HalfSpace(Point([1, 0]), 0.0), Point([1, 1])) == Point([0, 1])
    b = project(Ball(Point([0, 0]), 1.0), Point([3, 4]))
    assert np.allclose(b.coords, [0.6, 0.8], atol=1e-15)
    assert project(WholeSpace(2), Point([5, 6])) == Point([5, 6])


def test_halfspace_degenerate():
    h = HalfSpace(Point([0.0, 0.0]), 0.0)
    assert h.degenerate
    assert h.project(Point([3.0, 4.0])) == Point([3.0, 4.0])
    with pytest.raises(EmptySetError):
        HalfSpace(Point([0.0, 0.0]), -1.0)


def test_box_and_ball_validation():
    with pytest.raises(EmptySetError):
        Box(Point([1.0]), Point([0.0]))
    with pytest.raises(EmptySetError):
        Ball(Point([0.0]), -1.0)


def _random_sets(rng, dim):
    lo = -rng.uniform(0.5, 2, dim)
    return [
        Box(Point(lo), Point(lo + rng.uniform(0.5, 3, dim))),
        Ball(Point(rng.standard_normal(dim)), float(rng.uniform(0.1, 2))),
        HalfSpace(Point(rng.standard_normal(dim)), float(rng.standard_normal())),
        WholeSpace(dim),
    ]


def test_projection_characterisation(rng):
    for _ in range(50):
        dim = int(rng.integers(1, 6))
        for s in _random_sets(rng, dim):
            x = Point(rng.uniform(-5, 5, dim))
            px = s.project(x)
            for _ in range(10):
                z = s.project(Point(rng.uniform(-5, 5, dim)))
                assert inner(x - px, z - px) <= 1e-10


def test_projection_idempotent_and_nonexpansive(rng):
    for _ in range(50):
        dim = int(rng.integers(1, 6))
        for s in _random_sets(rng, dim):
            x, y = Point(rng.uniform(-5, 5, dim)), Point(rng.uniform(-5, 5, dim))
            px = s.project(x)
            assert norm(s.project(px) - px) <= 1e-12
            assert norm(s.project(x) - s.project(y)) <= norm(x - y) + 1e-12


@given(vec(3))
def test_box_projection_is_clamp(x):
    box = Box(Point([-1.0, 0.0, 2.0]), Point([1.0, 0.5, 3.0]))
    assert box.project(Point(x)) == Point(np.clip(x, [-1, 0, 2], [1, 0.5, 3]))


def test_project_dimension_mismatch():
    with pytest.raises(DimensionError):
        Box.cube(2).project(Point([1.0, 2.0, 3.0]))


# --------------------------------------------------------------------------
# Intersections
# --------------------------------------------------------------------------


def test_intersection_examples():
    h1, h2 = HalfSpace(Point([1, 0]), 1.0), HalfSpace(Point([0, 1]), 1.0)
    assert np.allclose(project_intersection([h1, h2], Point([2, 2])).coords, [1, 1])
    box = Box.cube(2, 1.0)
    x = Point([2.5, -0.3])
    assert project_intersection([box], x) == box.project(x)
    assert Intersection((h1, h2)).project(Point([2, 2])) == project_intersection([h1, h2], Point([2, 2]))


def test_intersection_whole_space_members_dropped():
    x = Point([2.0, 2.0])
    assert project_intersection([WholeSpace(2), HalfSpace(Point([0, 0]), 0.0)], x) == x


def _qp_instance(case):
    box = Box(Point(case["lower"]), Point(case["upper"]))
    hs = [HalfSpace(Point(a), b) for a, b in zip(case["normals"], case["offsets"])]
    return [box, *hs]


def test_project_intersection_vs_frozen_qp_oracle():
    worst = 0.0
    for case in FROZEN["qp_cases"]:
        z = project_intersection(_qp_instance(case), Point(case["x"]))
        worst = max(worst, float(np.linalg.norm(z.coords - case["projection"])))
    assert worst <= 1e-6


def test_dykstra_alone_vs_frozen_qp_oracle():
    # the closed-form shortcut is bypassed: pure Dykstra must also agree
    for case in FROZEN["qp_cases"][:30]:
        z = dykstra(_qp_instance(case), Point(case["x"]), max_iter=100_000, tol=1e-13)
        assert np.linalg.norm(z.coords - case["projection"]) <= 1e-6


def test_box_halfspaces_vs_frozen_qp_oracle():
    for case in FROZEN["qp_cases"]:
        box, *hs = _qp_instance(case)
        z = project_box_halfspaces(box, hs, Point(case["x"]))
        assert np.linalg.norm(z.coords - case["projection"]) <= 1e-9


@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_box_halfspaces_vs_live_oracle(seed, count):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(1, 4))
    lo = -rng.uniform(0.2, 2, dim)
    hi = rng.uniform(0.2, 2, dim)
    anchor = rng.uniform(lo, hi)
    A = rng.standard_normal((count, dim))
    b = A @ anchor + rng.uniform(0, 0.3, count)
    x = rng.uniform(-5, 5, dim)
    z = project_box_halfspaces(Box(Point(lo), Point(hi)), [HalfSpace(Point(a), c) for a, c in zip(A, b)], Point(x))
    Gb, hb = oracles.box_rows(lo, hi)
    ref = oracles.qp_project(np.vstack([Gb, A]) if count else Gb, np.concatenate([hb, b]), x)
    assert np.linalg.norm(z.coords - ref) <= 1e-8


def test_box_halfspaces_thin_intersection():
    # two nearly parallel cuts leave a sliver of the box; Dykstra crawls here
    box = Box.cube(2, 1.0)
    h1 = HalfSpace(Point([1.0, 1e-4]), 0.5)
    h2 = HalfSpace(Point([-1.0, 1e-4]), -0.5 + 1e-9)
    z = project_box_halfspaces(box, [h1, h2], Point([3.0, 3.0]))
    assert box.contains(z, 1e-12) and h1.contains(z, 1e-9) and h2.contains(z, 1e-9)
    Gb, hb = oracles.box_rows([-1, -1], [1, 1])
    ref = oracles.qp_project(np.vstack([Gb, [[1.0, 1e-4], [-1.0, 1e-4]]]),
                             np.concatenate([hb, [0.5, -0.5 + 1e-9]]), [3.0, 3.0], feas_tol=1e-13)
    assert np.linalg.norm(z.coords - ref) <= 1e-8


def test_box_halfspaces_empty():
    box = Box.cube(2, 1.0)
    with pytest.raises(EmptySetError):
        project_box_halfspaces(box, [HalfSpace(Point([1.0, 0.0]), -2.0)], Point([0.0, 0.0]))
    with pytest.raises(EmptySetError):
        project_box_halfspaces(box, [HalfSpace(Point([1.0, 1.0]), 0.0), HalfSpace(Point([-1.0, -1.0]), -0.5)],
                               Point([0.0, 0.0]))


def test_oracle_sanity_on_separable_case():
    G, h = oracles.box_rows([-1, -1], [1, 1])
    assert np.allclose(oracles.qp_project(G, h, [2, 0.5]), [1, 0.5])


def test_empty_intersection_detected():
    h1 = HalfSpace(Point([1.0, 0.0]), -1.0)   # z1 <= -1
    h2 = HalfSpace(Point([-1.0, 0.0]), -1.0)  # z1 >= 1
    with pytest.raises(EmptySetError):
        project_intersection([h1, h2], Point([0.0, 0.0]))
    with pytest.raises(EmptySetError):
        project_intersection([Box.cube(2, 1.0), HalfSpace(Point([1.0, 0.0]), -5.0),
                              HalfSpace(Point([0.0, 1.0]), 0.0)], Point([0.0, 0.0]))


def test_dykstra_budget_exhaustion_reports_residual():
    sets = [Ball(Point([0.0, 0.0]), 1.0), Ball(Point([1.9, 0.0]), 1.0), HalfSpace(Point([0.0, 1.0]), 0.5)]
    with pytest.raises(DykstraNonConvergence) as info:
        dykstra(sets, Point([5.0, 5.0]), max_iter=2, tol=1e-14)
    assert info.value.iterations == 2
    assert math.isfinite(info.value.residual)


# --------------------------------------------------------------------------
# Cut half-spaces
# --------------------------------------------------------------------------


def test_cn_examples():
    h = build_cn_halfspace(Point([1, 0]), Point([5, 5]), Point([0, 1]), 0.0)
    assert h.normal == Point([2, -2]) and h.offset == 0.0
    h = build_cn_halfspace(Point([1, 2]), Point([1, 2]), Point([1, 2]), 0.0)
    assert h.degenerate and h.offset == 0.0
    with pytest.raises(ValueError):
        build_cn_halfspace(Point([1]), Point([1]), Point([1]), 1.5)


def test_cn_offset_matches_textbook_formula(rng):
    for _ in range(100):
        x, s, y = (rng.standard_normal(4) for _ in range(3))
        b = float(rng.uniform())
        h = build_cn_halfspace(Point(x), Point(s), Point(y), b)
        textbook = (1 - b) * x @ x + b * s @ s - y @ y
        assert h.offset == pytest.approx(textbook, rel=1e-10, abs=1e-12)


def test_cn_membership_vs_quadratic(rng):
    mismatches = 0
    for _ in range(20):
        dim = int(rng.integers(1, 6))
        x, s, y = (rng.standard_normal(dim) for _ in range(3))
        b = float(rng.uniform())
        h = build_cn_halfspace(Point(x), Point(s), Point(y), b)
        for _ in range(50):
            z = rng.uniform(-3, 3, dim)
            q = oracles.cn_quadratic(x, s, y, b, z)
            if abs(q) > 1e-9 and (q <= 0) != (h.value(Point(z)) <= 0):
                mismatches += 1
    assert mismatches == 0


def test_qn_examples():
    assert build_qn_halfspace(Point([1, 2]), Point([1, 2])).degenerate
    h = build_qn_halfspace(Point([0, 0]), Point([1, 0]))
    assert h.normal == Point([-1, 0]) and h.offset == -1.0
    assert h.value(Point([1, 0])) == 0.0
    assert h.contains(Point([2, 5])) and not h.contains(Point([0.5, 0]))


def test_qn_xn_on_boundary_and_is_projection(rng):
    for _ in range(100):
        x0, xn = Point(rng.standard_normal(3)), Point(rng.standard_normal(3))
        h = build_qn_halfspace(x0, xn)
        assert abs(h.value(xn)) <= 1e-12 * (1 + norm(x0) * norm(xn))
        assert norm(h.project(x0) - xn) <= 1e-12 * (1 + norm(x0) + norm(xn))
