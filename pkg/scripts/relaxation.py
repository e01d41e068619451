"""Relaxation of the alternating S+1/S-1 dynamics from the filled configuration.

Runs independent chains from the frozen "filled" state, records the mean
particle position of one section after each step and compares the final
one-point density of several sections with the exact uniform marginal.
Optionally writes SVG snapshots of the first chain and a matplotlib figure.
"""

import argparse
import json
from collections import Counter

import numpy as np

from hexshuffle.core import BoxDims, highest_family, section_bounds
from hexshuffle.render import write_svg
from hexshuffle.shuffle import MarkovPlan, RandomSource, iter_chain
from hexshuffle.spectral import correlation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs=3, default=(50, 50, 20), metavar=("N", "T", "S"))
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--chains", type=int, default=200)
    ap.add_argument("--section", type=int, default=None, help="section tracked over time (default T/2)")
    ap.add_argument("--snapshots", type=int, nargs="*", default=(0, 10, 50, 200))
    ap.add_argument("--svg-prefix", default=None)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--out", default="relaxation.json")
    ap.add_argument("--plot", default=None, help="PNG path for the mean-position curve and final profile")
    args = ap.parse_args()

    dims = BoxDims(*args.dims)
    t_track = dims.T // 2 if args.section is None else args.section
    plan = MarkovPlan.alternate(dims, args.steps)
    root = RandomSource(args.seed)
    means = np.zeros((args.chains, plan.length + 1))
    final = Counter()
    final_S = plan.S_at(plan.length)
    for c in range(args.chains):
        for r, state in iter_chain(plan, root.spawn(c), initial=highest_family(dims)):
            means[c, r] = state.X[t_track].mean()
            if c == 0 and args.svg_prefix and r in args.snapshots:
                write_svg(state, f"{args.svg_prefix}{r:06d}.svg")
        final.update(int(x) for x in state.X[t_track])

    lo, hi = section_bounds(dims.N, dims.T, final_S, t_track)
    xs = list(range(lo, hi + 1))
    exact = [correlation(MarkovPlan(dims.with_S(final_S)), [(0, t_track, x)]) for x in xs]
    empirical = [final.get(x, 0) / args.chains for x in xs]
    exact_mean = float(np.dot(xs, exact) / dims.N)
    curve = means.mean(axis=0)
    print(f"section {t_track}: exact mean position {exact_mean:.3f}")
    for r in sorted(set(args.snapshots) | {plan.length}):
        if r <= plan.length and plan.S_at(r) == final_S:
            print(f"  r={r:6d}  mean {curve[r]:.3f}  (gap {curve[r] - exact_mean:+.3f})")
    with open(args.out, "w") as fh:
        json.dump(
            {"dims": list(args.dims), "section": t_track, "exact_mean": exact_mean, "mean_curve": curve.tolist(),
             "x": xs, "exact_density": exact, "empirical_density": empirical},
            fh,
        )
    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
        # only states in the same box as the reference marginal
        rs = [r for r in range(1, plan.length + 1) if plan.S_at(r) == final_S]
        a1.semilogx(rs, curve[rs] - exact_mean)
        a1.axhline(0, color="k", lw=0.5)
        a1.set_xlabel("step r")
        a1.set_ylabel("mean position minus exact")
        a2.plot(xs, exact, "k-", label="exact")
        a2.plot(xs, empirical, ".", label=f"{args.chains} chains")
        a2.set_xlabel("x")
        a2.set_ylabel("density")
        a2.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=120)


if __name__ == "__main__":
    main()
