"""Run the benchmark suite in memory and print one line per problem.

Each line gives the termination reason, the iteration count, the final
distance to the known limit and whether every audit check passed.

    python3 scripts/run_suite.py
    python3 scripts/run_suite.py --only planted_singleton --max-iter 2000
"""

import argparse
import dataclasses
import logging
import sys
import time

from hybrid_smvi.cli import SUITE, execute, resolve_problem
from hybrid_smvi.core import norm


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--only", help="keep refs starting with this problem name")
    ap.add_argument("--max-iter", type=int, help="override the iteration budget")
    args = ap.parse_args(argv)
    logging.getLogger("hybrid_smvi").setLevel(logging.ERROR)

    refs = [r for r in SUITE if not args.only or r.startswith(args.only + ":")]
    t0 = time.perf_counter()
    worst = {}
    for ref in refs:
        pb = resolve_problem(ref)
        cfg = pb.recommended_config
        if args.max_iter is not None:
            cfg = dataclasses.replace(cfg, max_iter=args.max_iter)
        limit = pb.expected_limit()
        result, audit = execute(pb.spec, cfg, pb.x0, limit)
        err = norm(result.final - limit)
        kind = ref.split(":")[0]
        worst[kind] = max(worst.get(kind, 0.0), err)
        print(f"{ref:<40} {result.report.reason:<28} {result.report.iterations:>6} "
              f"err {err:.3e}  audit {'ok' if audit.passed else 'FAIL'}", flush=True)
    for kind, err in worst.items():
        print(f"worst {kind}: {err:.3e}")
    print(f"elapsed {time.perf_counter() - t0:.1f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
