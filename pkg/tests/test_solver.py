import dataclasses
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import hybrid_smvi.solver as solver_mod
from hybrid_smvi.core import Box, EmptySetError, LinearMap, Point, WholeSpace, norm
from hybrid_smvi.operators import AffineGradient, Identity, NormalCone, ZeroMap, ZeroResolvent
from hybrid_smvi.problems import make_box_feasibility, make_planted_singleton
from hybrid_smvi.solver import (
    BUDGET_EXHAUSTED,
    CONVERGED,
    STEP_FAILED,
    ConfigError,
    Constant,
    Harmonic,
    PowerDecay,
    ProblemSpec,
    SolverConfig,
    TraceRecord,
    ensure_valid,
    run,
    step,
    validate_config,
)


def identity_spec(dim=2, A=None, theta1=1.0, theta2=1.0, lam=1.0, C=None):
    A = A or LinearMap.identity(dim)
    f = ZeroMap(theta1)
    g = ZeroMap(theta2)
    return ProblemSpec(
        dim1=A.domain_dim, dim2=A.codomain_dim, C=C or WholeSpace(A.domain_dim),
        Q=WholeSpace(A.codomain_dim), A=A,
        M1_resolvent=ZeroResolvent(lam), M2_resolvent=ZeroResolvent(lam),
        f=f, g=g, theta1=theta1, theta2=theta2, S=Identity(), family=(Identity(),),
    )


# --------------------------------------------------------------------------
# Schedules
# --------------------------------------------------------------------------


def test_schedules_values():
    assert Constant(0.5)(100) == 0.5
    assert Harmonic(1, 2)(0) == 0.5 and Harmonic(1, 2)(8) == 0.1
    assert PowerDecay(1, 0.5, 4)(0) == 0.5


@given(st.floats(0.01, 0.99), st.floats(1.01, 10.0), st.integers(0, 10**6))
def test_harmonic_in_unit_interval(a, b, n):
    s = Harmonic(a, b)
    assert s.decays() and s.in_range(0.0, 1.0)
    assert 0.0 < s(n) < 1.0


def test_schedule_range_checks():
    assert not Constant(1.0).in_range(0, 1)
    assert Constant(1.0).in_range(0, 1, closed=True)
    assert not Constant(0.5).decays()
    assert not Harmonic(2, 1).in_range(0, 1)
    assert not PowerDecay(1, 0, 2).decays()


# --------------------------------------------------------------------------
# validate_config
# --------------------------------------------------------------------------


def test_gamma_bound_message():
    spec = identity_spec(A=LinearMap(np.diag([2.0, 1.0])))
    v = validate_config(spec, SolverConfig(gamma=0.3, lam=1.0))
    assert [x.constraint for x in v] == ["gamma"]
    assert "γ must lie in (0, 0.25)" in v[0].message


def test_gamma_uses_inflated_norm():
    spec = identity_spec(A=LinearMap(np.diag([2.0, 1.0])))
    # inside the plain bound but outside the 1.01-inflated one
    assert validate_config(spec, SolverConfig(gamma=0.249, lam=1.0))
    assert not validate_config(spec, SolverConfig(gamma=0.24, lam=1.0))


def test_lambda_bound_message():
    spec = identity_spec(theta1=0.5, theta2=1.0)
    v = validate_config(spec, SolverConfig(gamma=0.5, lam=1.0))
    assert [x.constraint for x in v] == ["lambda"]
    assert "λ must lie in (0, 1)" in v[0].message


def test_valid_config_accepted():
    spec = identity_spec()
    cfg = SolverConfig(gamma=0.5, lam=1.0)
    assert validate_config(spec, cfg) == []
    assert ensure_valid(spec, cfg) is cfg


def test_all_violations_reported():
    spec = identity_spec(A=LinearMap(np.diag([2.0, 1.0])), theta1=0.5)
    cfg = SolverConfig(gamma=1.0, lam=1.0, alpha_schedule=Constant(1.0),
                       sigma_schedule=Constant(0.5), max_iter=-1)
    names = {v.constraint for v in validate_config(spec, cfg)}
    assert {"gamma", "lambda", "alpha_schedule", "sigma_schedule", "max_iter"} <= names
    with pytest.raises(ConfigError) as info:
        ensure_valid(spec, cfg)
    assert len(info.value.violations) >= 5


def test_resolvent_lambda_must_match_config():
    spec = identity_spec(lam=0.5)
    names = [v.constraint for v in validate_config(spec, SolverConfig(gamma=0.5, lam=1.0))]
    assert names == ["M1.lambda", "M2.lambda"]
    assert validate_config(spec.with_lambda(1.0), SolverConfig(gamma=0.5, lam=1.0)) == []


def test_w_weight_schedule_checks():
    spec = identity_spec()
    cfg = SolverConfig(gamma=0.5, lam=1.0, lambda_schedules=(Constant(0.5), Constant(0.5)))
    assert [v.constraint for v in validate_config(spec, cfg)] == ["lambda_schedules"]
    cfg = SolverConfig(gamma=0.5, lam=1.0, lambda_schedules=(Constant(1.5),))
    assert [v.constraint for v in validate_config(spec, cfg)] == ["lambda_schedule[1]"]


def test_problem_spec_consistency():
    with pytest.raises(ValueError):
        ProblemSpec(dim1=2, dim2=3, C=WholeSpace(2), Q=WholeSpace(2), A=LinearMap.identity(2),
                    M1_resolvent=ZeroResolvent(), M2_resolvent=ZeroResolvent(),
                    f=ZeroMap(), g=ZeroMap(), theta1=1.0, theta2=1.0, S=Identity())
    with pytest.raises(ValueError):
        ProblemSpec(dim1=2, dim2=2, C=WholeSpace(2), Q=WholeSpace(2), A=LinearMap.identity(2),
                    M1_resolvent=ZeroResolvent(), M2_resolvent=ZeroResolvent(),
                    f=ZeroMap(1.0), g=ZeroMap(), theta1=0.5, theta2=1.0, S=Identity())


# --------------------------------------------------------------------------
# step
# --------------------------------------------------------------------------


def test_step_everything_identity():
    spec = identity_spec(C=Box.cube(2, 1.0))
    cfg = SolverConfig(gamma=0.5, lam=1.0)
    x0 = Point([0.2, -0.3])
    s = step(spec, cfg, x0, x0, 0)
    for p in (s.u_n, s.z_n, s.w_n, s.y_n, s.x_next):
        assert p == x0
    assert s.cn_halfspace.degenerate and s.qn_halfspace.degenerate


def test_step_exact_split_gives_y_equal_z():
    spec = identity_spec()
    s = step(spec, SolverConfig(gamma=0.5, lam=1.0), Point([0.0, 0.0]), Point([3.0, 1.0]), 4)
    assert s.w_n == s.Az_n and s.y_n == s.z_n
    assert s.diagnostics.res_split == 0.0 and s.diagnostics.res_yz == 0.0


def test_step_box_problem_by_hand():
    pb = make_box_feasibility(dim=2)
    cfg = pb.recommended_config
    x0, xn = Point([2.5, -3.5]), Point([2.0, -3.0])
    s = step(pb.spec, cfg, x0, xn, 0)
    # sigma_0 = 1/2, alpha = 1/2, S = W = I: the anchor is clamp(x_n) = (1, -1)
    assert s.u_n == Point([1.5, -2.0])
    assert s.z_n == Point([1.0, -1.0])
    assert s.w_n == Point([1.0, -1.0]) and s.y_n == Point([1.0, -1.0])
    beta = 0.25
    a = 2 * ((1 - beta) * np.array([2.0, -3.0]) + beta * np.array([2.0, -3.0]) - np.array([1.0, -1.0]))
    assert np.allclose(s.cn_halfspace.normal.coords, a, atol=1e-15)
    assert np.allclose(s.qn_halfspace.normal.coords, [0.5, -0.5], atol=1e-15)
    # both cuts contain the box here, so x_1 = P_C(x_0)
    assert s.x_next == Point([1.0, -1.0])


def test_step_reports_empty_cut_intersection():
    # Q_n from an x_n outside C can miss C entirely; that is reported, not hidden
    pb = make_box_feasibility(dim=2)
    with pytest.raises(EmptySetError):
        step(pb.spec, pb.recommended_config, Point([0.5, 0.2]), Point([2.0, -3.0]), 0)


def test_step_planted_matches_direct_evaluation():
    pb = make_planted_singleton(3, 2, seed=4)
    spec, cfg = pb.spec, pb.recommended_config
    x0 = pb.x0
    xn = Point(pb.x0.coords + 0.1)
    s = step(spec, cfg, x0, xn, 3)
    x = xn.coords
    a, sg, lam, gamma = 0.5, 1.0 / 5.0, cfg.lam, cfg.gamma
    R, sv = spec.S.R, spec.S.s.coords
    Sx = R @ x + sv
    Tu = x
    for T in reversed(spec.family):
        Tu = 0.5 * (T.R @ Tu + T.s.coords) + 0.5 * x
    anchor = np.clip(sg * Sx + (1 - sg) * Tu, -5, 5)
    u = (1 - a) * x + a * anchor
    v = u - lam * (spec.f.P @ u + spec.f.q.coords)
    z = np.linalg.solve(np.eye(3) + lam * spec.M1_resolvent.B, v - lam * spec.M1_resolvent.c.coords)
    A = spec.A.matrix
    Az = A @ z
    v2 = Az - lam * (spec.g.P @ Az + spec.g.q.coords)
    w = np.linalg.solve(np.eye(2) + lam * spec.M2_resolvent.B, v2 - lam * spec.M2_resolvent.c.coords)
    y = z + gamma * A.T @ (w - Az)
    for got, ref in ((s.u_n, u), (s.z_n, z), (s.w_n, w), (s.y_n, y), (s.Sx_n, Sx)):
        assert np.allclose(got.coords, ref, rtol=0, atol=1e-12)


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------


def test_run_from_planted_point_stops_immediately():
    pb = make_planted_singleton(4, 3, seed=2)
    res = run(pb.spec, pb.recommended_config, pb.planted, planted=pb.planted)
    assert res.report.reason == CONVERGED
    assert res.report.iterations <= 2
    assert norm(res.final - pb.planted) <= 1e-12


def test_run_box_problem_reaches_clamp():
    pb = make_box_feasibility(dim=3, x0=Point([2.0, 3.0, -0.5]))
    res = run(pb.spec, pb.recommended_config, pb.x0)
    assert res.report.converged
    assert norm(res.final - Point([1.0, 1.0, -0.5])) <= 1e-4


def test_run_zero_budget():
    pb = make_box_feasibility(dim=2)
    cfg = dataclasses.replace(pb.recommended_config, max_iter=0)
    res = run(pb.spec, cfg, pb.x0)
    assert res.trace == [] and res.records == []
    assert res.report.reason == BUDGET_EXHAUSTED
    assert "iteration budget exhausted" in res.report.message


def test_run_projects_start_onto_c(caplog):
    pb = make_box_feasibility(dim=2)
    with caplog.at_level(logging.WARNING):
        res = run(pb.spec, pb.recommended_config, Point([4.0, -7.0]))
    assert res.report.x0_projected
    assert res.x_0 == Point([1.0, -1.0])
    assert "outside C" in caplog.text


def test_run_rejects_invalid_config():
    pb = make_box_feasibility(dim=2)
    with pytest.raises(ConfigError):
        run(pb.spec, dataclasses.replace(pb.recommended_config, gamma=2.0), pb.x0)


def test_run_step_failure_keeps_partial_trace(monkeypatch):
    pb = make_planted_singleton(2, 2, seed=1)
    real = solver_mod._two_cut_kernel
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 4:
            raise EmptySetError("synthetic", residual=0.5)
        return real(*args, **kwargs)

    monkeypatch.setattr(solver_mod, "_two_cut_kernel", flaky)
    res = run(pb.spec, pb.recommended_config, pb.x0)
    assert res.report.reason == STEP_FAILED
    assert len(res.trace) == 3 and res.report.residual == 0.5


def test_keep_states_false_keeps_records_only():
    pb = make_planted_singleton(2, 2, seed=3)
    cfg = dataclasses.replace(pb.recommended_config, max_iter=40)
    seen = []
    res = run(pb.spec, cfg, pb.x0, callback=seen.append, keep_states=False)
    assert len(res.records) == 40 and len(seen) == 40 and len(res.trace) == 1
    full = run(pb.spec, cfg, pb.x0)
    assert res.final == full.final


@pytest.fixture(scope="module")
def short_planted_runs():
    out = []
    for seed, (d1, d2) in enumerate([(2, 2), (5, 3), (6, 6)], start=1):
        pb = make_planted_singleton(d1, d2, seed=seed)
        cfg = dataclasses.replace(pb.recommended_config, max_iter=400)
        out.append((pb, run(pb.spec, cfg, pb.x0, planted=pb.planted)))
    return out


def test_iterates_feasible(short_planted_runs):
    for pb, res in short_planted_runs:
        for s in res.trace:
            x = s.x_next
            assert pb.spec.C.contains(x, 1e-8)
            assert s.cn_halfspace.contains(x, 1e-8)
            assert s.qn_halfspace.contains(x, 1e-8)


def test_planted_point_in_every_cut(short_planted_runs):
    for pb, res in short_planted_runs:
        for s in res.trace:
            for h in (s.cn_halfspace, s.qn_halfspace):
                assert h.value(pb.planted) <= 1e-8


def test_distance_to_start_nondecreasing(short_planted_runs):
    for _, res in short_planted_runs:
        d = [r.dist_x0 for r in res.records]
        assert all(b >= a - 1e-10 for a, b in zip(d, d[1:]))


def test_error_shrinks(short_planted_runs):
    for pb, res in short_planted_runs:
        assert norm(res.final - pb.planted) < 0.1 * norm(pb.x0 - pb.planted)


def test_trace_records_consistent(short_planted_runs):
    for pb, res in short_planted_runs:
        for s in res.trace:
            r = s.diagnostics
            assert r.res_split == pytest.approx(norm(s.w_n - s.Az_n), rel=1e-14, abs=0)
            assert r.res_yz <= r.bound_yz + 1e-10
            assert r.dist_p == pytest.approx(norm(s.x_n - pb.planted), rel=1e-14, abs=0)
            assert r.ratio_cond2 == pytest.approx(norm(s.x_n - s.u_n) / (s.alpha_n * s.sigma_n))
            assert all(np.isfinite(getattr(r, c)) and getattr(r, c) >= 0 for c in TraceRecord.COLUMNS)


def test_run_deterministic():
    pb = make_planted_singleton(5, 3, seed=9)
    cfg = dataclasses.replace(pb.recommended_config, max_iter=200)
    a = run(pb.spec, cfg, pb.x0, planted=pb.planted)
    b = run(pb.spec, cfg, pb.x0, planted=pb.planted)
    assert a.records == b.records
    assert all(np.array_equal(s.x_next.coords, t.x_next.coords) for s, t in zip(a.trace, b.trace))


def test_quadratic_on_box_with_boundary_solution():
    # min 0.5 x'Px + q'x over [-1, 1]^2 with P diagonal: the minimiser is the
    # clamp of -P^-1 q = (3, -0.25), which sits on the boundary of C. This
    # case once stalled inside Dykstra; the exact box solver handles it.
    f = AffineGradient(np.diag([1.0, 2.0]), Point([-3.0, 0.5]))
    box = Box.cube(2, 1.0)
    spec = ProblemSpec(dim1=2, dim2=2, C=box, Q=WholeSpace(2), A=LinearMap.identity(2),
                       M1_resolvent=NormalCone(box, 0.4), M2_resolvent=ZeroResolvent(0.4),
                       f=f, g=ZeroMap(), theta1=f.theta, theta2=1.0, S=Identity(), family=(Identity(),))
    res = run(spec, SolverConfig(gamma=0.5, lam=0.4, max_iter=3000), Point([0.0, 0.0]), keep_states=False)
    assert res.report.reason == CONVERGED
    assert norm(res.final - Point([1.0, -0.25])) <= 1e-6
