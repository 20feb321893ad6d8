"""Final error on planted instances as a function of the start radius.

For every planted suite instance and every radius in ``--radii`` the solver
runs to its iteration budget from ``p + r * direction``; the script prints the
final ``||x_N - p||`` per radius (worst, median) and the worst ratio of final
error to radius.

    python3 scripts/scale_study.py --radii 0.25 0.5 1 2 --max-iter 10000
"""

import argparse
import csv
import sys
import time

import numpy as np

from hybrid_smvi.core import norm
from hybrid_smvi.problems import make_planted_singleton
from hybrid_smvi.solver import SolverConfig, run

DIMS = ((2, 2), (5, 3), (20, 10))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--radii", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--seeds", type=int, nargs="+", default=list(range(1, 11)))
    ap.add_argument("--max-iter", type=int, default=10_000)
    ap.add_argument("--csv", help="write one row per run here")
    args = ap.parse_args(argv)

    rows = []
    t0 = time.perf_counter()
    for r in args.radii:
        errs = []
        for dims in DIMS:
            for seed in args.seeds:
                pb = make_planted_singleton(*dims, seed=seed, x0_radius=r)
                cfg = SolverConfig(gamma=pb.recommended_config.gamma, lam=pb.recommended_config.lam,
                                   max_iter=args.max_iter)
                res = run(pb.spec, cfg, pb.x0, keep_states=False)
                err = norm(res.final - pb.planted)
                errs.append(err)
                rows.append((r, dims[0], dims[1], seed, res.report.iterations, err))
        errs = np.array(errs)
        print(f"radius {r:<6g} worst {errs.max():.3e}  median {np.median(errs):.3e}  "
              f"worst/radius {errs.max() / r:.3e}  runs {errs.size}", flush=True)
    print(f"elapsed {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["radius", "dim1", "dim2", "seed", "iterations", "final_error"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
