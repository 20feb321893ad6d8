"""Recompute the frozen oracle values in tests/data/oracles.json.

Run once before touching the solver; the tests compare against the file, not
against a fresh computation, so an oracle change shows up as a diff.

    python3 scripts/freeze_oracles.py
"""

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import oracles  # noqa: E402


def main():
    rng = np.random.default_rng(20240601)
    out = {}
    out["norm_1234"] = oracles.spectral_norm([[1, 2], [3, 4]])
    out["norm_diag31"] = oracles.spectral_norm(np.diag([3.0, 1.0]))
    out["soft_threshold_2_m05_0_t1"] = oracles.soft_threshold_brute([2.0, -0.5, 0.0], 1.0).tolist()
    out["l1_denoise_b2_m05_w1"] = oracles.soft_threshold_brute([2.0, -0.5], 1.0).tolist()

    cases = []
    for _ in range(100):
        dim = int(rng.integers(2, 4))
        lower = -rng.uniform(0.5, 2.0, dim)
        upper = rng.uniform(0.5, 2.0, dim)
        # half-spaces through a point of the box keep the system feasible
        anchor = rng.uniform(lower, upper)
        normals = rng.standard_normal((2, dim))
        offsets = normals @ anchor + rng.uniform(0.0, 0.5, 2)
        x = rng.uniform(-4.0, 4.0, dim)
        Gb, hb = oracles.box_rows(lower, upper)
        G = np.vstack([Gb, normals])
        h = np.concatenate([hb, offsets])
        cases.append({
            "lower": lower.tolist(), "upper": upper.tolist(),
            "normals": normals.tolist(), "offsets": offsets.tolist(),
            "x": x.tolist(), "projection": oracles.qp_project(G, h, x).tolist(),
        })
    out["qp_cases"] = cases

    path = ROOT / "tests" / "data" / "oracles.json"
    path.write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
