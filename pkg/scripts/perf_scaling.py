"""Time perfect sampling while varying one box parameter at a time.

Prints a table and the fitted log-log slope per parameter, plus the slope
against N*T*S at a fixed hexagon shape.  Results go to --out as JSON.
"""

import argparse
import json
import math
import time

import numpy as np

from hexshuffle.core import BoxDims
from hexshuffle.shuffle import sample_uniform


def best_time(dims: BoxDims, repeats: int) -> float:
    best = math.inf
    for k in range(repeats):
        t0 = time.perf_counter()
        sample_uniform(dims, k)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--base", type=int, nargs=3, default=(160, 320, 160), metavar=("N", "T", "S"))
    ap.add_argument("--factors", type=float, nargs="+", default=(0.5, 1, 2, 4))
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--out", default="perf_scaling.json")
    args = ap.parse_args()

    sample_uniform(BoxDims(2, 3, 1), 0)  # compile
    base = dict(zip("NTS", args.base))
    report = {"base": base, "series": {}, "slopes": {}}
    for name in "NTS":
        rows = []
        for f in args.factors:
            p = dict(base)
            p[name] = max(1, round(base[name] * f))
            if p["S"] > p["T"]:
                continue
            secs = best_time(BoxDims(p["N"], p["T"], p["S"]), args.repeats)
            rows.append({**p, "seconds": secs})
            print(f"{name}: N={p['N']:5d} T={p['T']:5d} S={p['S']:5d}  {secs * 1e3:9.1f} ms")
        xs = [r[name] for r in rows]
        report["series"][name] = rows
        report["slopes"][name] = float(np.polyfit(np.log(xs), np.log([r["seconds"] for r in rows]), 1)[0])

    joint = []
    for f in args.factors:
        N, T, S = (max(1, round(v * f)) for v in args.base)
        joint.append({"N": N, "T": T, "S": S, "seconds": best_time(BoxDims(N, T, S), args.repeats)})
    report["series"]["joint"] = joint
    report["slopes"]["NTS_fixed_shape"] = float(
        np.polyfit(np.log([r["N"] * r["T"] * r["S"] for r in joint]), np.log([r["seconds"] for r in joint]), 1)[0]
    )
    print("slopes:", ", ".join(f"{k}={v:.2f}" for k, v in report["slopes"].items()))
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
