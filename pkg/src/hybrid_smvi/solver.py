"""Hybrid projection iteration for split monotone variational inclusions.

Given ``x_0`` in ``C`` the iteration computes, for ``n = 0, 1, ...``::

    u_n     = (1 - a_n) x_n + a_n P_C(s_n S x_n + (1 - s_n) W_n x_n)
    z_n     = U(u_n),   U = J1(I - lam f)
    w_n     = V(A z_n), V = J2(I - lam g)
    y_n     = z_n + gamma A*(w_n - A z_n)
    C_n     = {z in C : ||y_n - z||^2 <= (1 - a_n s_n)||x_n - z||^2 + a_n s_n ||S x_n - z||^2}
    Q_n     = {z in C : <x_n - z, x_0 - x_n> >= 0}
    x_{n+1} = P_{C_n & Q_n} x_0
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Optional

from .core import (
    HalfSpace,
    LinearMap,
    Point,
    ProjectionError,
    _cn_arrays,
    _two_cut_kernel,
    _vnorm,
    project_intersection,
)
from .operators import WMapping, forward_backward_apply

log = logging.getLogger(__name__)

__all__ = [
    "Constant",
    "Harmonic",
    "PowerDecay",
    "ProblemSpec",
    "SolverConfig",
    "TraceRecord",
    "IterateState",
    "Violation",
    "ConfigError",
    "TerminationReport",
    "RunResult",
    "validate_config",
    "ensure_valid",
    "step",
    "run",
    "BUDGET_EXHAUSTED",
    "CONVERGED",
    "STEP_FAILED",
]

CONVERGED = "converged"
BUDGET_EXHAUSTED = "iteration budget exhausted"
STEP_FAILED = "step failed"


# --------------------------------------------------------------------------
# Schedules
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    c: float

    def __call__(self, n):
        return self.c

    def decays(self):
        return False

    def in_range(self, lo, hi, closed=False):
        return lo <= self.c <= hi if closed else lo < self.c < hi


@dataclass(frozen=True)
class Harmonic:
    """``n -> a / (n + b)``."""

    a: float
    b: float

    def __call__(self, n):
        return self.a / (n + self.b)

    def decays(self):
        return self.a > 0 and self.b > 0

    def in_range(self, lo, hi, closed=False):
        # positive and decreasing, so the sup is at n = 0 and the inf is 0
        if not (self.a > 0 and self.b > 0):
            return False
        first = self(0)
        return (lo <= 0 and first <= hi) if closed else (lo <= 0 and first < hi)


@dataclass(frozen=True)
class PowerDecay:
    """``n -> a / (n + b)^p``."""

    a: float
    p: float
    b: float

    def __call__(self, n):
        return self.a / (n + self.b) ** self.p

    def decays(self):
        return self.a > 0 and self.b > 0 and self.p > 0

    def in_range(self, lo, hi, closed=False):
        if not self.decays():
            return False
        first = self(0)
        return (lo <= 0 and first <= hi) if closed else (lo <= 0 and first < hi)


# --------------------------------------------------------------------------
# Problem and configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One instance of the split inclusion problem with its auxiliary maps."""

    dim1: int
    dim2: int
    C: object
    Q: object
    A: LinearMap
    M1_resolvent: object
    M2_resolvent: object
    f: object
    g: object
    theta1: float
    theta2: float
    S: object
    family: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "family", tuple(self.family))
        problems = []
        if self.A.domain_dim != self.dim1 or self.A.codomain_dim != self.dim2:
            problems.append(f"A is {self.A.codomain_dim}x{self.A.domain_dim}, expected {self.dim2}x{self.dim1}")
        if self.C.dim != self.dim1:
            problems.append(f"C has dim {self.C.dim}, expected {self.dim1}")
        if self.Q.dim != self.dim2:
            problems.append(f"Q has dim {self.Q.dim}, expected {self.dim2}")
        for name, op, d in (("M1", self.M1_resolvent, self.dim1), ("M2", self.M2_resolvent, self.dim2),
                            ("f", self.f, self.dim1), ("g", self.g, self.dim2)):
            if op.dim is not None and op.dim != d:
                problems.append(f"{name} has dim {op.dim}, expected {d}")
        if self.theta1 != self.f.theta:
            problems.append(f"theta1={self.theta1} does not match f.theta={self.f.theta}")
        if self.theta2 != self.g.theta:
            problems.append(f"theta2={self.theta2} does not match g.theta={self.g.theta}")
        if problems:
            raise ValueError("inconsistent ProblemSpec: " + "; ".join(problems))

    def with_lambda(self, lam):
        """Copy with both resolvents rebound to parameter ``lam``."""
        return dataclasses.replace(
            self,
            M1_resolvent=dataclasses.replace(self.M1_resolvent, lam=lam),
            M2_resolvent=dataclasses.replace(self.M2_resolvent, lam=lam),
        )

    def U(self, x, lam):
        return forward_backward_apply(self.M1_resolvent, self.f, lam, x)

    def V(self, y, lam):
        return forward_backward_apply(self.M2_resolvent, self.g, lam, y)


@dataclass(frozen=True)
class SolverConfig:
    gamma: float
    lam: float
    alpha_schedule: object = Constant(0.5)
    sigma_schedule: object = Harmonic(1.0, 2.0)
    # one schedule per T_i; empty means constant 0.5 for every member
    lambda_schedules: tuple = ()
    max_iter: int = 10_000
    stop_tol: float = 1e-8
    dykstra_max_iter: int = 10_000
    dykstra_tol: float = 1e-10
    norm_tol: float = 1e-10
    norm_inflation: float = 1.01
    cond2_window: int = 50

    def lambdas_at(self, n, count):
        if not self.lambda_schedules:
            return (0.5,) * count
        return tuple(s(n) for s in self.lambda_schedules)


@dataclass(frozen=True)
class Violation:
    constraint: str
    value: object
    message: str

    def __str__(self):
        return self.message


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


def validate_config(spec, cfg):
    """Return every violated parameter constraint (empty list when valid)."""
    out = []
    norm_a = spec.A.norm_estimate
    if norm_a > 0:
        plain = 1.0 / norm_a**2
        limit = 1.0 / (cfg.norm_inflation * norm_a) ** 2
        if not 0 < cfg.gamma < limit:
            out.append(Violation(
                "gamma", cfg.gamma,
                f"γ must lie in (0, {plain:.6g}) with ||A|| = {norm_a:.6g} "
                f"(conservative limit {limit:.6g} after inflating ||A|| by {cfg.norm_inflation}); "
                f"got γ = {cfg.gamma:.6g}",
            ))
    elif not cfg.gamma > 0:
        out.append(Violation("gamma", cfg.gamma, f"γ must be positive; got γ = {cfg.gamma:.6g}"))

    alpha = 2.0 * min(spec.theta1, spec.theta2)
    if not 0 < cfg.lam < alpha:
        out.append(Violation(
            "lambda", cfg.lam,
            f"λ must lie in (0, {alpha:.6g}) with α = 2 min(θ1, θ2); got λ = {cfg.lam:.6g}",
        ))
    for name, J in (("M1", spec.M1_resolvent), ("M2", spec.M2_resolvent)):
        if J.lam != cfg.lam:
            out.append(Violation(
                f"{name}.lambda", J.lam,
                f"resolvent of {name} uses λ = {J.lam:.6g} but the config sets λ = {cfg.lam:.6g}",
            ))

    if not cfg.alpha_schedule.in_range(0.0, 1.0):
        out.append(Violation("alpha_schedule", cfg.alpha_schedule,
                             f"α_n schedule {cfg.alpha_schedule} leaves (0, 1)"))
    if not cfg.sigma_schedule.decays():
        out.append(Violation("sigma_schedule", cfg.sigma_schedule,
                             f"σ_n schedule {cfg.sigma_schedule} does not decay to 0"))
    elif not cfg.sigma_schedule.in_range(0.0, 1.0):
        out.append(Violation("sigma_schedule", cfg.sigma_schedule,
                             f"σ_n schedule {cfg.sigma_schedule} leaves (0, 1)"))
    if cfg.lambda_schedules:
        if len(cfg.lambda_schedules) != len(spec.family):
            out.append(Violation(
                "lambda_schedules", len(cfg.lambda_schedules),
                f"{len(cfg.lambda_schedules)} W-mapping weight schedules for {len(spec.family)} maps",
            ))
        for i, s in enumerate(cfg.lambda_schedules, start=1):
            if not s.in_range(0.0, 1.0, closed=True):
                out.append(Violation(f"lambda_schedule[{i}]", s,
                                     f"λ_(n,{i}) schedule {s} leaves [0, 1]"))
    if cfg.max_iter < 0:
        out.append(Violation("max_iter", cfg.max_iter, "max_iter must be nonnegative"))
    for name in ("stop_tol", "dykstra_tol", "norm_tol"):
        if not getattr(cfg, name) > 0:
            out.append(Violation(name, getattr(cfg, name), f"{name} must be positive"))
    if cfg.dykstra_max_iter < 1:
        out.append(Violation("dykstra_max_iter", cfg.dykstra_max_iter, "dykstra_max_iter must be >= 1"))
    if not cfg.norm_inflation >= 1:
        out.append(Violation("norm_inflation", cfg.norm_inflation, "norm_inflation must be >= 1"))
    return out


def ensure_valid(spec, cfg):
    violations = validate_config(spec, cfg)
    if violations:
        raise ConfigError(violations)
    return cfg


# --------------------------------------------------------------------------
# Iteration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    n: int
    res_split: float
    res_yz: float
    bound_yz: float
    ratio_cond2: float
    dist_x0: float
    dist_p: Optional[float]
    sigma_n: float
    alpha_n: float

    COLUMNS = ("n", "res_split", "res_yz", "bound_yz", "ratio_cond2",
               "dist_x0", "dist_p", "sigma_n", "alpha_n")


@dataclass(frozen=True, eq=False)
class IterateState:
    n: int
    x_n: Point
    u_n: Point
    z_n: Point
    w_n: Point
    Az_n: Point
    y_n: Point
    Sx_n: Point
    cn_halfspace: HalfSpace
    qn_halfspace: HalfSpace
    x_next: Point
    alpha_n: float
    sigma_n: float
    diagnostics: TraceRecord


class _Prepared:
    """Per-run constants of :func:`step` and the cached W-mapping."""

    __slots__ = ("A", "At", "a_norm", "x0", "x0_norm", "p", "lambdas", "W")

    def __init__(self, spec, x_0, planted):
        self.A = spec.A.matrix
        self.At = self.A.T.copy()
        self.a_norm = spec.A.norm_estimate
        self.x0 = x_0.coords
        self.x0_norm = _vnorm(self.x0)
        self.p = None if planted is None else planted.coords
        self.lambdas = self.W = None

    def w_mapping(self, spec, lambdas):
        if lambdas != self.lambdas:
            self.W = WMapping(spec.family, lambdas)
            self.lambdas = lambdas
        return self.W


def step(spec, cfg, x_0, x_n, n, planted=None, _prep=None):
    """One pass of the iteration from ``x_n``; returns the full state.

    The caller is expected to have validated ``cfg`` against ``spec``
    (``run`` does). Raises ``ProjectionError`` when the projection onto
    ``C & C_n & Q_n`` fails (non-convergence, or an empty intersection, which
    means the problem's hypotheses are violated).
    """
    prep = _prep if _prep is not None else _Prepared(spec, x_0, planted)
    a_n = float(cfg.alpha_schedule(n))
    s_n = float(cfg.sigma_schedule(n))
    W = prep.w_mapping(spec, cfg.lambdas_at(n, len(spec.family)))
    lam, gamma = cfg.lam, cfg.gamma

    # array arithmetic, one line per update of the iteration
    x = x_n.coords
    Sx = spec.S._apply(x)
    anchor = spec.C._project_array(s_n * Sx + (1.0 - s_n) * W._apply(x))
    u = (1.0 - a_n) * x + a_n * anchor
    z = spec.M1_resolvent._apply(u - lam * spec.f._apply(u))
    Az = prep.A @ z
    w = spec.M2_resolvent._apply(Az - lam * spec.g._apply(Az))
    gap = w - Az
    y = z + gamma * (prep.At @ gap)

    res_split, res_yz, move_u = _vnorm(gap), _vnorm(y - z), _vnorm(x - u)
    # x is finite, so finite differences certify u, z, w, Az and y at once
    if not math.isfinite(res_split + res_yz + move_u):
        raise ValueError(f"non-finite values produced at step {n}")
    Sx_n, y_n = Point._wrap(Sx), Point._trusted(y)
    beta = a_n * s_n

    a_c, c_c, nsq_c = _cn_arrays(x, Sx, y, beta)
    # Q_n: <x_0 - x_n, z> <= <x_0 - x_n, x_n>
    x0 = prep.x0
    a_q = x0 - x
    c_q = float(a_q @ x)
    nsq_q = float(a_q @ a_q)
    cn = HalfSpace._from_arrays(a_c, c_c, nsq_c)
    qn = HalfSpace._from_arrays(a_q, c_q, nsq_q)
    # the projection onto C_n & Q_n is exact; if it already lies in C it is
    # also the projection onto C & C_n & Q_n
    nxt = _two_cut_kernel(x0, a_c, c_c, nsq_c, a_q, c_q, nsq_q, prep.x0_norm)
    x_next = x_0 if nxt is x0 else Point._wrap(nxt)
    if not spec.C.contains(x_next):
        x_next = project_intersection(
            [spec.C, cn, qn], x_0, max_iter=cfg.dykstra_max_iter, tol=cfg.dykstra_tol
        )

    record = TraceRecord(
        n, res_split, res_yz, gamma * prep.a_norm * res_split, move_u / beta,
        math.sqrt(nsq_q), None if prep.p is None else _vnorm(x - prep.p), s_n, a_n,
    )
    return IterateState(
        n, x_n, Point._trusted(u), Point._trusted(z), Point._trusted(w), Point._trusted(Az),
        y_n, Sx_n, cn, qn, x_next, a_n, s_n, record,
    )


@dataclass(frozen=True)
class TerminationReport:
    reason: str
    iterations: int
    message: str
    x0_projected: bool = False
    residual: Optional[float] = None

    @property
    def converged(self):
        return self.reason == CONVERGED


@dataclass(frozen=True, eq=False)
class RunResult:
    """Outcome of :func:`run`.

    ``records`` holds one :class:`TraceRecord` per iteration. ``trace`` holds
    the matching :class:`IterateState` objects, or only the last one when the
    run was made with ``keep_states=False``.
    """

    trace: list
    records: list
    report: TerminationReport
    x_0: Point

    @property
    def final(self):
        """Last computed iterate (``x_0`` for an empty run)."""
        return self.trace[-1].x_next if self.trace else self.x_0


def run(spec, cfg, x_0, planted=None, callback=None, keep_states=True):
    """Iterate until both residuals drop below ``stop_tol`` or the budget runs out.

    A starting point outside ``C`` is replaced by its projection onto ``C``
    (with a logged warning). Step failures end the run; the partial trace is
    kept in the result. ``callback``, when given, sees every state as it is
    produced.
    """
    ensure_valid(spec, cfg)
    x0_projected = False
    if not spec.C.contains(x_0):
        log.warning("x_0 lies outside C; projecting it onto C")
        x_0 = spec.C.project(x_0)
        x0_projected = True

    trace, records = [], []

    def finish(reason, message, residual=None):
        report = TerminationReport(reason, len(records), message, x0_projected, residual)
        return RunResult(trace, records, report, x_0)

    x_n = x_0
    prep = _Prepared(spec, x_0, planted)
    for n in range(cfg.max_iter):
        try:
            state = step(spec, cfg, x_0, x_n, n, planted=planted, _prep=prep)
        except ProjectionError as exc:
            return finish(STEP_FAILED, f"step {n} failed: {exc}", exc.residual)
        if callback is not None:
            callback(state)
        if keep_states:
            trace.append(state)
        else:
            trace[:] = [state]
        records.append(state.diagnostics)
        move = _vnorm(state.x_next.coords - x_n.coords)
        if move <= cfg.stop_tol and state.diagnostics.res_split <= cfg.stop_tol:
            return finish(
                CONVERGED,
                f"converged after {n + 1} iterations: ||x_(n+1) - x_n|| = {move:.3e}, "
                f"||w_n - A z_n|| = {state.diagnostics.res_split:.3e}",
            )
        x_n = state.x_next
    return finish(BUDGET_EXHAUSTED, f"{BUDGET_EXHAUSTED} after {cfg.max_iter} iterations")
