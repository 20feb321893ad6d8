"""Runtime checks of the inequalities that justify the hybrid iteration.

Each check evaluates both sides of an inequality on concrete iterates and
reports a margin, so a violation shows up as a negative number rather than a
silent failure. Quantities that involve the limit point ``x*`` use the planted
solution when one is known and the final iterate otherwise; the reference is
labelled accordingly in every report.

Scalar functions take one :class:`~hybrid_smvi.solver.IterateState`. The
``*_batch`` variants evaluate the same formulas over stacked iterates, which
is how whole traces are audited without keeping every state alive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Point, _check_dims, inner, norm

__all__ = [
    "CHECK_TOL",
    "BoundCheck",
    "ProbeSet",
    "ProbeReport",
    "ContinuityReport",
    "ConditionReport",
    "TraceArrays",
    "Audit",
    "check_simple_proof_bound",
    "weak_probe",
    "check_remark5_chain",
    "continuity_monitor_S",
    "condition_report",
    "simple_proof_bound_batch",
    "weak_probe_batch",
    "remark5_chain_batch",
    "PLANTED",
    "PROXY",
]

CHECK_TOL = 1e-10
PLANTED = "planted"
PROXY = "final-iterate proxy"


@dataclass(frozen=True)
class BoundCheck:
    """Outcome of one inequality ``lhs <= rhs``."""

    lhs: float
    rhs: float
    tol: float = CHECK_TOL

    @property
    def passed(self):
        return self.lhs <= self.rhs + self.tol

    @property
    def margin(self):
        return self.rhs - self.lhs


def check_simple_proof_bound(state, gamma, adjoint_norm):
    """``||y_n - z_n|| <= gamma ||A*|| ||w_n - A z_n||`` on one iterate."""
    lhs = norm(state.y_n - state.z_n)
    rhs = gamma * adjoint_norm * norm(state.w_n - state.Az_n)
    return BoundCheck(lhs, rhs)


def simple_proof_bound_batch(res_yz, res_split, gamma, adjoint_norm):
    """Vectorised form on trace columns; returns per-row margins."""
    return gamma * adjoint_norm * np.asarray(res_split) - np.asarray(res_yz)


# --------------------------------------------------------------------------
# Weak probes
# --------------------------------------------------------------------------


def _shift(state):
    # d_n = (u_n - x_n)/alpha_n + x_n, a point of H1
    if not state.alpha_n > 0:
        raise ValueError("alpha_n must be positive")
    return (state.u_n - state.x_n) / state.alpha_n + state.x_n


@dataclass(frozen=True, eq=False)
class ProbeSet:
    """Fixed unit probe directions and the reference point ``x*``."""

    directions: tuple
    reference: Point
    reference_kind: str = PLANTED

    def __post_init__(self):
        dirs = tuple(self.directions)
        if not dirs:
            raise ValueError("a ProbeSet needs at least one direction")
        for d in dirs:
            _check_dims(d.dim, self.reference.dim, "probe and reference")
            if abs(norm(d) - 1.0) > 1e-12:
                raise ValueError("probe directions must have unit norm")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "_matrix", np.stack([d.coords for d in dirs]))

    @classmethod
    def default(cls, reference, n_random=5, seed=0, reference_kind=PLANTED):
        """Canonical basis plus ``n_random`` seeded random unit vectors."""
        dim = reference.dim
        rng = np.random.default_rng(seed)
        dirs = [Point(row) for row in np.eye(dim)]
        for _ in range(n_random):
            v = rng.standard_normal(dim)
            dirs.append(Point(v / np.linalg.norm(v)))
        return cls(tuple(dirs), reference, reference_kind)

    @property
    def matrix(self):
        """Directions stacked as rows."""
        return self._matrix


@dataclass(frozen=True)
class ProbeReport:
    """Per-probe weak values with their bounds, plus the strong residual."""

    values: tuple
    bounds: tuple
    strong_residual: float
    reference_kind: str

    @property
    def passed(self):
        return all(abs(v) <= b + CHECK_TOL for v, b in zip(self.values, self.bounds))

    @property
    def max_abs(self):
        return max(abs(v) for v in self.values)


def weak_probe(state, probes):
    """Probe values ``<d_n - x*, y>`` for every direction ``y``.

    ``d_n = (u_n - x_n)/alpha_n + x_n`` is a vector, so the expression is an
    inner product of two points of H1. Each value comes with the bound
    ``(||u_n - x_n||/alpha_n)||y|| + |<x_n - x*, y>|``; the strong residual
    ``||x* - d_n||`` is reported next to them.
    """
    d = _shift(state)
    x_star = probes.reference
    step_len = norm(state.u_n - state.x_n) / state.alpha_n
    values, bounds = [], []
    for y in probes.directions:
        values.append(inner(d - x_star, y))
        bounds.append(step_len * norm(y) + abs(inner(state.x_n - x_star, y)))
    return ProbeReport(tuple(values), tuple(bounds), norm(x_star - d), probes.reference_kind)


def weak_probe_batch(X, U, alpha, probes):
    """Probe values, bounds and strong residuals for stacked iterates.

    ``X`` and ``U`` hold one iterate per row. Returns ``(values, bounds,
    strong)`` with ``values`` and ``bounds`` of shape ``(rows, probes)``.
    """
    X, U = np.asarray(X, dtype=float), np.asarray(U, dtype=float)
    alpha = np.asarray(alpha, dtype=float)[:, None]
    D = probes.matrix
    ref = probes.reference.coords
    step = U - X
    d = step / alpha + X
    values = (d - ref) @ D.T
    step_len = np.sqrt(np.einsum("ij,ij->i", step, step))[:, None] / alpha
    bounds = step_len * np.sqrt(np.einsum("ij,ij->i", D, D))[None, :] + np.abs((X - ref) @ D.T)
    strong = np.sqrt(np.einsum("ij,ij->i", d - ref, d - ref))
    return values, bounds, strong


# --------------------------------------------------------------------------
# Inequality chain involving S
# --------------------------------------------------------------------------


def check_remark5_chain(state, S_at_xn, S_at_xstar, probe_x, x_star):
    """Compare ``|<Sx_n, x - d_n> - <Sx*, x - x*>|`` with its two-term bound.

    The bound is ``||Sx_n - Sx*|| ||x - d_n|| + |<Sx*, x* - d_n>|``; it
    follows from splitting the difference and applying Cauchy-Schwarz.
    """
    d = _shift(state)
    lhs = abs(inner(S_at_xn, probe_x - d) - inner(S_at_xstar, probe_x - x_star))
    rhs = norm(S_at_xn - S_at_xstar) * norm(probe_x - d) + abs(inner(S_at_xstar, x_star - d))
    return BoundCheck(lhs, rhs)


def remark5_chain_batch(X, U, alpha, SX, S_star, P, x_star):
    """Both sides of the chain for every (iterate, probe point) pair.

    ``X``, ``U``, ``SX`` hold one iterate per row and ``P`` one probe point
    per row. Returns ``(lhs, rhs)`` of shape ``(iterates, points)``.
    """
    X, U, SX, P = (np.asarray(a, dtype=float) for a in (X, U, SX, P))
    alpha = np.asarray(alpha, dtype=float)[:, None]
    s_star, xs = S_star.coords, x_star.coords
    d = (U - X) / alpha + X
    # <Sx_n, x - d> - <Sx*, x - x*>, expanded row by row
    first = SX @ P.T - np.einsum("ij,ij->i", SX, d)[:, None]
    second = (P @ s_star)[None, :] - float(s_star @ xs)
    lhs = np.abs(first - second)
    gap = np.sqrt(np.einsum("ij,ij->i", SX - s_star, SX - s_star))[:, None]
    diff = P[None, :, :] - d[:, None, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    rhs = gap * dist + np.abs(xs @ s_star - d @ s_star)[:, None]
    return lhs, rhs


# --------------------------------------------------------------------------
# Continuity of S and the hypothesis conditions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuityReport:
    """``||Sx_n - Sx*||`` against ``||x_n - x*||`` over a run.

    In finite dimension a continuous ``S`` cannot keep the first residual
    away from zero while the second vanishes, so ``flagged`` documents the
    hypothesis rather than testing a live possibility.
    """

    s_residuals: tuple
    x_residuals: tuple
    max_ratio: float
    flagged: bool
    reference_kind: str = PLANTED


def _decayed(seq, factor=1e-3):
    peak = max(seq)
    return peak == 0.0 or seq[-1] <= factor * peak


def continuity_monitor_S(trace, S, x_star, reference_kind=PLANTED):
    """Decay report for ``S`` along the iterates of ``trace``.

    ``trace`` may hold :class:`IterateState` objects or plain points.
    """
    xs = [getattr(t, "x_n", t) for t in trace]
    if not xs:
        raise ValueError("trace must be nonempty")
    s_star = S(x_star)
    s_res = tuple(norm(S(x) - s_star) for x in xs)
    x_res = tuple(norm(x - x_star) for x in xs)
    ratios = [s / x for s, x in zip(s_res, x_res) if x > 0]
    max_ratio = max(ratios) if ratios else 0.0
    flagged = _decayed(x_res) and not _decayed(s_res)
    return ContinuityReport(s_res, x_res, max_ratio, flagged, reference_kind)


@dataclass(frozen=True)
class ConditionReport:
    """Last values and trailing-window trends of ``sigma_n`` and the ratio."""

    sigma_last: float
    sigma_decreasing: bool
    ratio_last: float
    ratio_window_start: float
    ratio_min: float
    ratio_max: float
    window: int
    ratio_flag: bool


def condition_report(trace, window=50):
    """Summarise the two hypothesis conditions over a trace.

    ``trace`` holds :class:`TraceRecord` or :class:`IterateState` objects.
    ``ratio_flag`` is raised when ``||x_n - u_n||/(alpha_n sigma_n)`` is
    positive at the end and has not decreased over the trailing window; the
    run itself is never aborted.
    """
    recs = [getattr(t, "diagnostics", t) for t in trace]
    if len(recs) < 2:
        raise ValueError("condition_report needs at least two iterates")
    sig = [r.sigma_n for r in recs]
    ratio = [r.ratio_cond2 for r in recs]
    w = min(window, len(recs) - 1)
    tail = ratio[-w - 1:]
    sig_tail = sig[-w - 1:]
    return ConditionReport(
        sigma_last=sig[-1],
        sigma_decreasing=all(b < a for a, b in zip(sig_tail, sig_tail[1:])),
        ratio_last=ratio[-1],
        ratio_window_start=tail[0],
        ratio_min=min(tail),
        ratio_max=max(tail),
        window=w,
        ratio_flag=ratio[-1] > 0 and ratio[-1] >= tail[0],
    )


# --------------------------------------------------------------------------
# Whole-run audit
# --------------------------------------------------------------------------


class TraceArrays:
    """Run callback that keeps ``x_n``, ``u_n``, ``S x_n`` and ``alpha_n`` rows.

    Storing three arrays per iterate is far cheaper than keeping every
    :class:`IterateState`, and is all the batch checks need.
    """

    def __init__(self):
        self._x, self._u, self._sx, self._alpha = [], [], [], []

    def __call__(self, state):
        self._x.append(state.x_n.coords)
        self._u.append(state.u_n.coords)
        self._sx.append(state.Sx_n.coords)
        self._alpha.append(state.alpha_n)

    def __len__(self):
        return len(self._alpha)

    @property
    def X(self):
        return np.array(self._x)

    @property
    def U(self):
        return np.array(self._u)

    @property
    def SX(self):
        return np.array(self._sx)

    @property
    def alpha(self):
        return np.array(self._alpha)


def _summary(margins):
    m = np.asarray(margins, dtype=float).ravel()
    if m.size == 0:
        return {"checked": 0, "violations": 0, "min_margin": None}
    return {
        "checked": int(m.size),
        "violations": int(np.count_nonzero(m < -CHECK_TOL)),
        "min_margin": float(m.min()),
    }


@dataclass
class Audit:
    """Every per-run check, evaluated once the run is over.

    Parameters
    ----------
    spec, cfg
        The problem and configuration the run used.
    result
        The :class:`RunResult`.
    arrays
        The :class:`TraceArrays` callback that watched the run.
    x_star
        Planted solution, or ``None`` to fall back to the final iterate.
    n_random_probes, probe_seed
        Random part of the default probe set.
    """

    spec: object
    cfg: object
    result: object
    arrays: TraceArrays
    x_star: Optional[Point] = None
    n_random_probes: int = 5
    probe_seed: int = 0
    report: dict = field(init=False)

    def __post_init__(self):
        self.report = self._evaluate()

    @property
    def passed(self):
        return self.report["split_bound"]["violations"] == 0 and self.report["s_chain"]["violations"] == 0

    def _evaluate(self):
        res = self.result
        recs = res.records
        if self.x_star is not None:
            ref, kind = self.x_star, PLANTED
        else:
            ref, kind = res.final, PROXY
        out = {
            "termination": res.report.reason,
            "iterations": res.report.iterations,
            "message": res.report.message,
            "x0_projected": res.report.x0_projected,
            "reference": kind,
            "final_distance_to_reference": norm(res.final - ref),
        }
        if not recs:
            for key in ("split_bound", "s_chain", "probe_bound"):
                out[key] = _summary([])
            return out
        res_yz = np.array([r.res_yz for r in recs])
        res_split = np.array([r.res_split for r in recs])
        out["split_bound"] = _summary(simple_proof_bound_batch(
            res_yz, res_split, self.cfg.gamma, self.spec.A.norm_estimate))

        probes = ProbeSet.default(ref, self.n_random_probes, self.probe_seed, kind)
        X, U, SX, alpha = self.arrays.X, self.arrays.U, self.arrays.SX, self.arrays.alpha
        values, bounds, strong = weak_probe_batch(X, U, alpha, probes)
        out["probe_bound"] = _summary(bounds - np.abs(values))
        out["probe_final_max_abs"] = float(np.abs(values[-1]).max())
        out["strong_residual_final"] = float(strong[-1])

        S_star = self.spec.S(ref)
        points = probes.matrix + ref.coords
        lhs, rhs = remark5_chain_batch(X, U, alpha, SX, S_star, points, ref)
        out["s_chain"] = _summary(rhs - lhs)

        s_res = np.sqrt(np.einsum("ij,ij->i", SX - S_star.coords, SX - S_star.coords))
        x_res = np.sqrt(np.einsum("ij,ij->i", X - ref.coords, X - ref.coords))
        nz = x_res > 0
        out["continuity_S"] = {
            "max_ratio": float((s_res[nz] / x_res[nz]).max()) if nz.any() else 0.0,
            "flagged": bool(_decayed(list(x_res)) and not _decayed(list(s_res))),
        }
        if len(recs) >= 2:
            cond = condition_report(recs, self.cfg.cond2_window)
            out["conditions"] = {
                "sigma_last": cond.sigma_last,
                "sigma_decreasing": cond.sigma_decreasing,
                "ratio_last": cond.ratio_last,
                "ratio_flag": cond.ratio_flag,
                "window": cond.window,
            }
        out["res_split_final"] = float(res_split[-1])
        out["res_yz_final"] = float(res_yz[-1])
        dists = [r.dist_x0 for r in recs] + [norm(res.final - res.x_0)]
        out["distance_monotone_violations"] = int(np.count_nonzero(np.diff(dists) < -CHECK_TOL))
        return out

