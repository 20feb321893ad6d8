"""Command-line front end and file formats.

``hsmvi run`` builds or loads a problem, validates the configuration, runs
the iteration, audits it and writes a trace CSV plus a JSON summary.
``hsmvi verify`` re-checks a trace CSV offline.

File formats
------------
trace CSV
    Header ``n,res_split,res_yz,bound_yz,ratio_cond2,dist_x0,dist_p,sigma_n,alpha_n``;
    reals written with 17 significant digits, ``dist_p`` empty when no
    planted solution is known.
config file
    Flat ``key = value`` lines, ``#`` starts a comment. Keys are listed in
    :data:`CONFIG_KEYS`. Schedules are written ``constant:c``,
    ``harmonic:a,b`` or ``power:a,p,b``.
problem file
    JSON object describing every operator; see :func:`problem_to_dict`.

Exit codes: 0 when the run stopped on tolerance and every check passed,
2 when a check failed, 1 for configuration, input or budget problems.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Ball, Box, HalfSpace, Intersection, LinearMap, Point, WholeSpace
from .diagnostics import CHECK_TOL, Audit, TraceArrays, condition_report
from .operators import (
    L1,
    AffineContraction,
    AffineGradient,
    AffineMonotone,
    Average,
    Identity,
    Negation,
    NormalCone,
    ProjectionMap,
    Reflection,
    ZeroMap,
    ZeroResolvent,
)
from .problems import GENERATORS
from .solver import (
    CONVERGED,
    ConfigError,
    Constant,
    Harmonic,
    PowerDecay,
    ProblemSpec,
    SolverConfig,
    TraceRecord,
    run,
    validate_config,
)

log = logging.getLogger("hybrid_smvi")

__all__ = [
    "CONFIG_KEYS",
    "OUT_DIR_ENV",
    "SUITE",
    "RunManifest",
    "InputError",
    "parse_problem_ref",
    "resolve_problem",
    "parse_schedule",
    "format_schedule",
    "parse_config_text",
    "apply_config",
    "problem_to_dict",
    "problem_from_dict",
    "write_trace_csv",
    "read_trace_csv",
    "execute",
    "cmd_run",
    "cmd_verify",
    "run_suite",
    "main",
]

OUT_DIR_ENV = "HSMVI_OUT_DIR"
HEADER = ",".join(TraceRecord.COLUMNS)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK = 2

# suite used by the acceptance tests and ``run --suite``
SUITE = (
    [f"box:{s}:dim=10" for s in range(1, 11)]
    + [f"planted_singleton:{s}:dim1={a},dim2={b}" for a, b in ((2, 2), (5, 3), (20, 10)) for s in range(1, 11)]
    + [f"l1_denoise:1:dim={d}" for d in range(2, 21)]
)


class InputError(ValueError):
    """Unreadable or inconsistent user input (problem ref, config, CSV)."""


# --------------------------------------------------------------------------
# Problem references
# --------------------------------------------------------------------------


def _scalar(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError as exc:
        raise InputError(f"not a number: {text!r}") from exc


def parse_problem_ref(ref):
    """``name:seed[:key=value,...]`` -> ``(name, kwargs)``."""
    parts = ref.split(":", 2)
    name = parts[0]
    if name not in GENERATORS:
        raise InputError(f"unknown problem {name!r}; choose from {', '.join(GENERATORS)}")
    kwargs = {}
    if len(parts) > 1 and parts[1]:
        try:
            kwargs["seed"] = int(parts[1])
        except ValueError as exc:
            raise InputError(f"seed must be an integer, got {parts[1]!r}") from exc
    if len(parts) > 2 and parts[2]:
        for item in parts[2].split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise InputError(f"expected key=value in problem ref, got {item!r}")
            kwargs[key.strip()] = _scalar(value.strip())
    return name, kwargs


def resolve_problem(ref):
    name, kwargs = parse_problem_ref(ref)
    try:
        return GENERATORS[name](**kwargs)
    except TypeError as exc:
        raise InputError(f"bad parameters for {name}: {exc}") from exc


# --------------------------------------------------------------------------
# Config files
# --------------------------------------------------------------------------


_SCHEDULES = {"constant": (Constant, 1), "harmonic": (Harmonic, 2), "power": (PowerDecay, 3)}


def parse_schedule(text):
    kind, _, args = text.strip().partition(":")
    if kind not in _SCHEDULES:
        raise InputError(f"unknown schedule {kind!r}; use constant:c, harmonic:a,b or power:a,p,b")
    cls, arity = _SCHEDULES[kind]
    values = [float(v) for v in args.split(",")] if args else []
    if len(values) != arity:
        raise InputError(f"schedule {kind} takes {arity} parameter(s), got {text!r}")
    return cls(*values)


def format_schedule(s):
    if isinstance(s, Constant):
        return f"constant:{s.c!r}"
    if isinstance(s, Harmonic):
        return f"harmonic:{s.a!r},{s.b!r}"
    return f"power:{s.a!r},{s.p!r},{s.b!r}"


CONFIG_KEYS = {
    "gamma": ("gamma", float),
    "lambda": ("lam", float),
    "alpha": ("alpha_schedule", parse_schedule),
    "sigma": ("sigma_schedule", parse_schedule),
    "w_weights": ("lambda_schedules", lambda t: tuple(parse_schedule(p) for p in t.split(";") if p.strip())),
    "max_iter": ("max_iter", int),
    "stop_tol": ("stop_tol", float),
    "dykstra_max_iter": ("dykstra_max_iter", int),
    "dykstra_tol": ("dykstra_tol", float),
    "norm_tol": ("norm_tol", float),
    "norm_inflation": ("norm_inflation", float),
    "cond2_window": ("cond2_window", int),
    # audit settings, not solver settings
    "probe_seed": (None, int),
    "probes": (None, int),
}


def parse_config_text(text):
    """Flat ``key = value`` text -> dict of raw strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputError(f"config line {lineno}: expected key = value, got {raw!r}")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise InputError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def apply_config(cfg, entries):
    """Return ``(config, audit_settings)`` with ``entries`` applied to ``cfg``."""
    changes, audit = {}, {}
    for key, value in entries.items():
        attr, conv = CONFIG_KEYS[key]
        try:
            parsed = conv(value)
        except (ValueError, InputError) as exc:
            raise InputError(f"bad value for {key}: {value!r} ({exc})") from exc
        if attr is None:
            audit[key] = parsed
        else:
            changes[attr] = parsed
    return dataclasses.replace(cfg, **changes), audit


# --------------------------------------------------------------------------
# Problem files
# --------------------------------------------------------------------------


def _set_to_dict(s):
    if isinstance(s, WholeSpace):
        return {"type": "whole", "dim": s.dim}
    if isinstance(s, Box):
        return {"type": "box", "lower": s.lower.tolist(), "upper": s.upper.tolist()}
    if isinstance(s, Ball):
        return {"type": "ball", "center": s.center.tolist(), "radius": s.radius}
    if isinstance(s, HalfSpace):
        return {"type": "halfspace", "normal": s.normal.tolist(), "offset": s.offset}
    if isinstance(s, Intersection):
        return {"type": "intersection", "sets": [_set_to_dict(t) for t in s.sets]}
    raise TypeError(f"cannot serialise set {s!r}")


def _set_from_dict(d):
    kind = d["type"]
    if kind == "whole":
        return WholeSpace(int(d["dim"]))
    if kind == "box":
        return Box(Point(d["lower"]), Point(d["upper"]))
    if kind == "ball":
        return Ball(Point(d["center"]), float(d["radius"]))
    if kind == "halfspace":
        return HalfSpace(Point(d["normal"]), float(d["offset"]))
    if kind == "intersection":
        return Intersection(tuple(_set_from_dict(t) for t in d["sets"]))
    raise InputError(f"unknown set type {kind!r}")


def _resolvent_to_dict(J):
    if isinstance(J, NormalCone):
        return {"type": "normal_cone", "set": _set_to_dict(J.set)}
    if isinstance(J, L1):
        return {"type": "l1", "weight": J.weight}
    if isinstance(J, AffineMonotone):
        return {"type": "affine_monotone", "B": J.B.tolist(), "c": J.c.tolist()}
    if isinstance(J, ZeroResolvent):
        return {"type": "zero"}
    raise TypeError(f"cannot serialise resolvent {J!r}")


def _resolvent_from_dict(d, lam):
    kind = d["type"]
    if kind == "normal_cone":
        return NormalCone(_set_from_dict(d["set"]), lam)
    if kind == "l1":
        return L1(float(d["weight"]), lam)
    if kind == "affine_monotone":
        return AffineMonotone(np.array(d["B"], dtype=float), Point(d["c"]), lam)
    if kind == "zero":
        return ZeroResolvent(lam)
    raise InputError(f"unknown resolvent type {kind!r}")


def _ism_to_dict(f):
    if isinstance(f, ZeroMap):
        return {"type": "zero", "theta": f.theta}
    return {"type": "affine_gradient", "P": f.P.tolist(), "q": f.q.tolist(), "theta": f.theta}


def _ism_from_dict(d):
    kind = d["type"]
    if kind == "zero":
        return ZeroMap(float(d.get("theta", 1.0)))
    if kind == "affine_gradient":
        theta = d.get("theta")
        return AffineGradient(np.array(d["P"], dtype=float), Point(d["q"]),
                              None if theta is None else float(theta))
    raise InputError(f"unknown ism map type {kind!r}")


def _map_to_dict(T):
    if isinstance(T, Identity):
        return {"type": "identity"}
    if isinstance(T, Negation):
        return {"type": "negation"}
    if isinstance(T, Reflection):
        return {"type": "reflection", "set": _set_to_dict(T.set)}
    if isinstance(T, Average):
        return {"type": "average", "alpha": T.alpha, "inner": _map_to_dict(T.inner)}
    if isinstance(T, ProjectionMap):
        return {"type": "projection", "set": _set_to_dict(T.set)}
    if isinstance(T, AffineContraction):
        return {"type": "affine_contraction", "R": T.R.tolist(), "s": T.s.tolist()}
    raise TypeError(f"cannot serialise map {T!r}")


def _map_from_dict(d):
    kind = d["type"]
    if kind == "identity":
        return Identity()
    if kind == "negation":
        return Negation()
    if kind == "reflection":
        return Reflection(_set_from_dict(d["set"]))
    if kind == "average":
        return Average(float(d["alpha"]), _map_from_dict(d["inner"]))
    if kind == "projection":
        return ProjectionMap(_set_from_dict(d["set"]))
    if kind == "affine_contraction":
        return AffineContraction(np.array(d["R"], dtype=float), Point(d["s"]))
    raise InputError(f"unknown nonexpansive map type {kind!r}")


def problem_to_dict(spec, cfg=None, x0=None, planted=None):
    """JSON-ready description of a problem, optionally with config and points."""
    out = {
        "dim1": spec.dim1,
        "dim2": spec.dim2,
        "C": _set_to_dict(spec.C),
        "Q": _set_to_dict(spec.Q),
        "A": spec.A.matrix.tolist(),
        "lambda": spec.M1_resolvent.lam,
        "M1": _resolvent_to_dict(spec.M1_resolvent),
        "M2": _resolvent_to_dict(spec.M2_resolvent),
        "f": _ism_to_dict(spec.f),
        "g": _ism_to_dict(spec.g),
        "S": _map_to_dict(spec.S),
        "family": [_map_to_dict(T) for T in spec.family],
    }
    if cfg is not None:
        out["gamma"] = cfg.gamma
    if x0 is not None:
        out["x0"] = x0.tolist()
    if planted is not None:
        out["planted"] = planted.tolist()
    return out


def problem_from_dict(d):
    """Inverse of :func:`problem_to_dict`: ``(spec, cfg, x0, planted)``.

    ``cfg`` is ``None`` unless the file fixes ``gamma``; ``x0`` and
    ``planted`` are ``None`` when absent.
    """
    try:
        lam = float(d["lambda"])
        f, g = _ism_from_dict(d["f"]), _ism_from_dict(d["g"])
        spec = ProblemSpec(
            dim1=int(d["dim1"]), dim2=int(d["dim2"]),
            C=_set_from_dict(d["C"]), Q=_set_from_dict(d["Q"]),
            A=LinearMap(np.array(d["A"], dtype=float)),
            M1_resolvent=_resolvent_from_dict(d["M1"], lam),
            M2_resolvent=_resolvent_from_dict(d["M2"], lam),
            f=f, g=g, theta1=f.theta, theta2=g.theta,
            S=_map_from_dict(d["S"]),
            family=tuple(_map_from_dict(t) for t in d.get("family", [])),
        )
    except KeyError as exc:
        raise InputError(f"problem file is missing {exc}") from exc
    cfg = SolverConfig(gamma=float(d["gamma"]), lam=lam) if "gamma" in d else None
    x0 = Point(d["x0"]) if "x0" in d else None
    planted = Point(d["planted"]) if "planted" in d else None
    return spec, cfg, x0, planted


# --------------------------------------------------------------------------
# Trace CSV
# --------------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return format(v, ".17g")


def write_trace_csv(records, path):
    with open(path, "w", newline="") as fh:
        fh.write(HEADER + "\n")
        for r in records:
            fh.write(",".join(_fmt(getattr(r, c)) for c in TraceRecord.COLUMNS) + "\n")


def read_trace_csv(path):
    """Parse a trace CSV back into :class:`TraceRecord` rows.

    Raises :class:`InputError` on a wrong header, a short row, a non-numeric
    or non-finite field, or a negative entry.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path} is empty")
    if ",".join(rows[0]) != HEADER:
        raise InputError(f"{path}: header must be {HEADER!r}, got {','.join(rows[0])!r}")
    out = []
    for i, row in enumerate(rows[1:]):
        if len(row) != len(TraceRecord.COLUMNS):
            raise InputError(f"row {i}: expected {len(TraceRecord.COLUMNS)} fields, got {len(row)}")
        vals = {}
        for col, text in zip(TraceRecord.COLUMNS, row):
            if col == "dist_p" and text == "":
                vals[col] = None
                continue
            try:
                v = int(text) if col == "n" else float(text)
            except ValueError as exc:
                raise InputError(f"row {i}: {col} is not a number ({text!r})") from exc
            if not math.isfinite(v) or v < 0:
                raise InputError(f"row {i}: {col} must be finite and nonnegative, got {text!r}")
            vals[col] = v
        out.append(TraceRecord(**vals))
    return out


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------


@dataclass
class RunManifest:
    """Everything ``cmd_run`` needs; mirrors the ``run`` flags."""

    problem: Optional[str] = None
    problem_file: Optional[str] = None
    config: Optional[str] = None
    overrides: list = field(default_factory=list)
    max_iter: Optional[int] = None
    out: Optional[str] = None
    summary: Optional[str] = None
    verbosity: int = 0


def execute(spec, cfg, x0, planted=None, probes=5, probe_seed=0):
    """Run and audit one problem; returns ``(result, audit)``."""
    arrays = TraceArrays()
    result = run(spec, cfg, x0, planted=planted, callback=arrays, keep_states=False)
    audit = Audit(spec, cfg, result, arrays, x_star=planted,
                  n_random_probes=probes, probe_seed=probe_seed)
    return result, audit


def _stem(manifest):
    if manifest.problem:
        return manifest.problem.replace(":", "_").replace(",", "_").replace("=", "")
    return Path(manifest.problem_file).stem


def _load(manifest):
    """Problem, config, x0 and planted point described by a manifest."""
    if bool(manifest.problem) == bool(manifest.problem_file):
        raise InputError("give exactly one of --problem and --problem-file")
    if manifest.problem:
        pb = resolve_problem(manifest.problem)
        spec, cfg, x0, planted = pb.spec, pb.recommended_config, pb.x0, pb.expected_limit()
    else:
        try:
            with open(manifest.problem_file) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot load problem file: {exc}") from exc
        spec, cfg, x0, planted = problem_from_dict(data)
        if x0 is None:
            raise InputError("problem file must give x0")
        if cfg is None:
            cfg = SolverConfig(gamma=float("nan"), lam=spec.M1_resolvent.lam)
    entries = {}
    if manifest.config:
        try:
            entries.update(parse_config_text(Path(manifest.config).read_text()))
        except OSError as exc:
            raise InputError(f"cannot read config: {exc}") from exc
    if manifest.overrides:
        entries.update(parse_config_text("\n".join(manifest.overrides)))
    cfg, audit = apply_config(cfg, entries)
    if manifest.max_iter is not None:
        cfg = dataclasses.replace(cfg, max_iter=manifest.max_iter)
    if cfg.lam != spec.M1_resolvent.lam:
        spec = spec.with_lambda(cfg.lam)
    return spec, cfg, x0, planted, audit


def _outputs(manifest):
    base = Path(os.environ.get(OUT_DIR_ENV, "."))
    stem = _stem(manifest)
    out = Path(manifest.out) if manifest.out else base / f"{stem}.csv"
    summary = Path(manifest.summary) if manifest.summary else out.with_suffix(".json")
    return out, summary


def cmd_run(manifest, stdout=None, stderr=None):
    """Execute one manifest; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        spec, cfg, x0, planted, audit_opts = _load(manifest)
        violations = validate_config(spec, cfg)
        if violations:
            raise ConfigError(violations)
        out, summary_path = _outputs(manifest)
        out.parent.mkdir(parents=True, exist_ok=True)
        summary_path.parent.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v.message}", file=stderr)
        return EXIT_ERROR
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_ERROR

    result, audit = execute(spec, cfg, x0, planted, audit_opts.get("probes", 5),
                            audit_opts.get("probe_seed", 0))
    summary = dict(audit.report)
    summary["checks_passed"] = audit.passed
    try:
        write_trace_csv(result.records, out)
        with open(summary_path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=stderr)
        return EXIT_ERROR

    print(result.report.message, file=stdout)
    print(f"trace: {out}  summary: {summary_path}", file=stdout)
    if not audit.passed:
        r1, r5 = summary["split_bound"], summary["s_chain"]
        print(f"check failure: simple-proof bound violations {r1['violations']}, "
              f"S-chain violations {r5['violations']}", file=stderr)
        return EXIT_CHECK
    if result.report.reason != CONVERGED:
        print(f"error: {result.report.message}", file=stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_verify(path, stdout=None, stderr=None):
    """Offline re-check of a trace CSV; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        recs = read_trace_csv(path)
    except InputError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_ERROR
    if not recs:
        print(f"error: {path} holds no iterates", file=stderr)
        return EXIT_ERROR

    bad = [i for i, r in enumerate(recs) if r.res_yz > r.bound_yz + CHECK_TOL]
    rows = [("simple-proof bound", "FAIL" if bad else "pass",
             f"{len(recs) - len(bad)}/{len(recs)} rows")]
    if len(recs) >= 2:
        cond = condition_report(recs)
        rows.append(("sigma_n decreasing", "pass" if cond.sigma_decreasing else "note",
                     f"last {cond.sigma_last:.3e}"))
        rows.append(("ratio (ii) decaying", "note" if cond.ratio_flag else "pass",
                     f"last {cond.ratio_last:.3e} over window {cond.window}"))
    dists = [r.dist_x0 for r in recs]
    drops = sum(1 for a, b in zip(dists, dists[1:]) if b < a - CHECK_TOL)
    rows.append(("distance to x0 nondecreasing", "pass" if not drops else "note", f"{drops} drops"))
    for name, status, detail in rows:
        print(f"{name:<30} {status:<5} {detail}", file=stdout)
    if bad:
        shown = ", ".join(str(i) for i in bad[:10])
        print(f"simple-proof bound violated at row(s) {shown}", file=stderr)
        return EXIT_CHECK
    return EXIT_OK


def run_suite(refs=SUITE, out_dir=None, stdout=None):
    """Run every problem ref through :func:`cmd_run`; returns the exit codes."""
    stdout = stdout or sys.stdout
    base = Path(out_dir or os.environ.get(OUT_DIR_ENV, "."))
    codes = {}
    for ref in refs:
        m = RunManifest(problem=ref)
        m.out = str(base / f"{_stem(m)}.csv")
        codes[ref] = cmd_run(m, stdout=stdout)
    return codes


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="hsmvi", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the solver on one problem or the whole suite")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem", help="generated problem, name:seed[:key=value,...]")
    src.add_argument("--problem-file", help="JSON problem file")
    src.add_argument("--suite", action="store_true", help="run the standard benchmark suite")
    r.add_argument("--config", help="flat key = value config file")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    r.add_argument("--max-iter", type=int)
    r.add_argument("--out", help="trace CSV path")
    r.add_argument("--summary", help="summary JSON path")
    r.add_argument("-v", "--verbose", action="count", default=0)

    v = sub.add_parser("verify", help="re-check a trace CSV")
    v.add_argument("trace")
    v.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify":
        return cmd_verify(args.trace)
    if args.suite:
        codes = run_suite(out_dir=args.out)
        worst = max(codes.values())
        print(f"suite: {sum(c == EXIT_OK for c in codes.values())}/{len(codes)} exited 0")
        return worst
    manifest = RunManifest(
        problem=args.problem, problem_file=args.problem_file, config=args.config,
        overrides=args.overrides, max_iter=args.max_iter, out=args.out,
        summary=args.summary, verbosity=args.verbose,
    )
    return cmd_run(manifest)


if __name__ == "__main__":
    sys.exit(main())
