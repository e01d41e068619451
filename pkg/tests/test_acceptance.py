"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion k [PASS|FAIL]`` line (also collected
in the terminal summary) and fails honestly when the criterion is not met.
Seeds are fixed so that every run is reproducible.
"""

import itertools
import math
import resource
import subprocess
import sys
import time
from collections import Counter
from fractions import Fraction

import numpy as np
from scipy.stats import binomtest, chisquare

from hexshuffle.bulk import BulkRegime, bulk_kernel_value, bulk_params, convergence_check
from hexshuffle.core import BoxDims, PathFamily, enumerate_families, highest_family, section_bounds
from hexshuffle.errors import DomainError
from hexshuffle.matrices import (
    COMMUTATION_PAIRS,
    Direction,
    commutation_meaningful,
    commutation_sides,
    rho_vector,
    target_of,
    transition_matrix,
    u_product,
    u_t_plus_s_minus,
)
from hexshuffle.render import RenderOptions, render_svg
from hexshuffle.shuffle import (
    MarkovPlan,
    RandomSource,
    exact_step_prob,
    iter_chain,
    run_plan_batch,
    sample_uniform,
    sample_uniform_batch,
    step_up,
)
from hexshuffle.spectral import correlation, exact_correlation, mc_correlation, verify_spectral


def all_boxes(max_N, max_T):
    for N in range(1, max_N + 1):
        for T in range(1, max_T + 1):
            for S in range(T + 1):
                yield BoxDims(N, T, S)


def moves(dims, t):
    for d in Direction:
        try:
            target_of(dims, t, d)
        except DomainError:
            continue
        yield d


def test_1_stochasticity_and_preservation(criterion):
    start = time.perf_counter()
    checked = bad = 0
    for dims in all_boxes(4, 6):
        for t in range(dims.T + 1):
            for d in moves(dims, t):
                P = transition_matrix(dims, t, d)
                dims2, t2 = target_of(dims, t, d)
                ok = all(s == 1 for s in P.row_sums()) and P.left_apply(rho_vector(dims, t)) == rho_vector(dims2, t2)
                checked += 1
                bad += not ok
    elapsed = time.perf_counter() - start
    criterion(
        1,
        "rows sum to 1 and rho P = rho' (exact)",
        bad == 0 and elapsed < 60,
        f"{checked} matrices, {bad} failures, {elapsed:.1f}s",
    )


def test_2_commutativity(criterion):
    start = time.perf_counter()
    identities = bad = 0
    for dims in all_boxes(3, 5):
        for t in range(dims.T + 1):
            for tdir, sdir in COMMUTATION_PAIRS:
                if not commutation_meaningful(dims, t, tdir, sdir):
                    continue
                left, right = commutation_sides(dims, t, tdir, sdir)
                identities += 1
                bad += left != right
                rows, cols, A = u_product(dims, t, tdir, sdir)
                _, _, B = u_product(dims, t, sdir, tdir)
                bad += not np.array_equal(A, B)
                if (tdir, sdir) == (Direction.T_PLUS, Direction.S_MINUS):
                    closed = np.array([[u_t_plus_s_minus(dims, t, x, y) for y in cols] for x in rows], dtype=object)
                    bad += not np.array_equal(A, closed)
    elapsed = time.perf_counter() - start
    criterion(
        2,
        "P_t P_S = P_S P_t and U products commute (exact)",
        bad == 0 and elapsed < 60,
        f"{identities} identities, {bad} failures, {elapsed:.1f}s",
    )


def test_3_algorithm_matches_matrix(criterion):
    start = time.perf_counter()
    dims = BoxDims(2, 4, 1)
    targets = enumerate_families(dims.with_S(2))
    trials = 100_000
    src = RandomSource(3)
    cells = worst = bad = 0
    for X in enumerate_families(dims):
        counts = Counter(step_up(X, src).key() for _ in range(trials))
        for Y in targets:
            p = float(exact_step_prob(X, Y, "up"))
            freq = counts.get(Y.key(), 0) / trials
            sigma = math.sqrt(p * (1 - p) / trials)
            cells += 1
            if sigma == 0:
                bad += freq != p
            else:
                z = abs(freq - p) / sigma
                worst = max(worst, z)
                bad += z > 3
    elapsed = time.perf_counter() - start
    criterion(
        3,
        "step_up frequencies within 3 sigma of exact_step_prob at (2,4,1)",
        bad == 0 and elapsed < 300,
        f"{cells} (X,Y) cells, 1e5 trials per X, worst |z| = {worst:.2f}, {bad} outside, {elapsed:.1f}s",
    )


def test_4_perfect_sampling(criterion):
    start = time.perf_counter()
    pvals = {}
    for i, dims in enumerate((BoxDims(2, 4, 2), BoxDims(2, 5, 2))):
        keys = [f.X.astype(np.int32).tobytes() for f in enumerate_families(dims)]
        arr = sample_uniform_batch(dims, 100_000, 40 + i)
        counts = Counter(a.tobytes() for a in arr)
        assert set(counts) <= set(keys)
        pvals[(dims.N, dims.T, dims.S)] = chisquare([counts.get(k, 0) for k in keys]).pvalue
    elapsed = time.perf_counter() - start
    criterion(
        4,
        "uniformity chi-square over 1e5 samples",
        all(p > 1e-3 for p in pvals.values()) and elapsed < 300,
        ", ".join(f"{k}: p={v:.3f}" for k, v in pvals.items()) + f", {elapsed:.1f}s",
    )


def test_5_spectral_decomposition(criterion):
    worst, cases = 0.0, 0
    for dims in all_boxes(3, 6):
        for t in range(dims.T + 1):
            for d in moves(dims, t):
                worst = max(worst, verify_spectral(dims, t, d))
                cases += 1
    criterion(5, "spectral form of P", worst < 1e-10, f"{cases} cases, worst deviation {worst:.2e}")


def _admissible_configs(plan, count, rng, sim):
    """Random staircase configurations whose x values come from a simulated trajectory."""
    out = []
    while len(out) < count:
        n = int(rng.integers(1, 4))
        rs = sorted(int(v) for v in rng.integers(0, plan.length + 1, n))
        ts = sorted((int(v) for v in rng.integers(0, plan.dims.T + 1, n)), reverse=True)
        traj = sim[int(rng.integers(sim.shape[0]))]
        pts = [(r, t, int(traj[r, t, int(rng.integers(plan.dims.N))])) for r, t in zip(rs, ts)]
        if len(set(pts)) == n:
            out.append(pts)
    return out


def test_6_correlations(criterion):
    # exact part: all one- and two-point functions at (2,4,2)
    dims = BoxDims(2, 4, 2)
    plan = MarkovPlan(dims)
    fams = enumerate_families(dims)
    cells = [(t, x) for t in range(dims.T + 1) for x in range(section_bounds(2, 4, 2, t)[0], section_bounds(2, 4, 2, t)[1] + 1)]
    exact_worst = 0.0
    for n in (1, 2):
        for combo in itertools.combinations(cells, n):
            want = Fraction(sum(all(x in f.section(t) for t, x in combo) for f in fams), len(fams))
            got = correlation(plan, [(0, t, x) for t, x in combo])
            exact_worst = max(exact_worst, abs(got - float(want)))
    # across steps of a plan: exact law of the chain
    moving = MarkovPlan(dims, (-1, 1))
    for r1, r2 in itertools.product(range(3), repeat=2):
        for t1, t2 in itertools.product(range(5), repeat=2):
            if (r1 - r2) * (t1 - t2) > 0 or (r1, t1) == (r2, t2):
                continue
            for x1 in range(5):
                for x2 in range(5):
                    pts = [(r1, t1, x1), (r2, t2, x2)]
                    exact_worst = max(exact_worst, abs(correlation(moving, pts) - float(exact_correlation(moving, pts))))

    # Monte Carlo part at (3,6,3)
    mc_plan = MarkovPlan(BoxDims(3, 6, 3), (1, -1, -1, 1))
    trials = 100_000
    traj = run_plan_batch(mc_plan, trials, 66)
    configs = _admissible_configs(mc_plan, 25, np.random.default_rng(6), run_plan_batch(mc_plan, 50, 7))
    worst_z, outside = 0.0, 0
    for pts in configs:
        pred = correlation(mc_plan, pts)
        est = mc_correlation(mc_plan, pts, trials, None, trajectories=traj)
        sigma = math.sqrt(max(pred * (1 - pred), 0.0) / trials)
        z = abs(est.value - pred) / sigma if sigma > 0 else (0.0 if abs(est.value - pred) < 1e-12 else math.inf)
        worst_z = max(worst_z, z)
        outside += z > 3
    ok = exact_worst < 1e-10 and outside == 0
    criterion(
        6,
        "determinantal correlations",
        ok,
        f"exact worst {exact_worst:.1e} at (2,4,2); MC at (3,6,3): {len(configs)} configurations, "
        f"1e5 trajectories, worst |z| = {worst_z:.2f}, {outside} outside 3 sigma",
    )


def test_7_bulk_limit(criterion):
    start = time.perf_counter()
    centre = BulkRegime(1, 2, 1, 1, 1)
    density = bulk_params(centre).density
    finite = correlation(MarkovPlan(BoxDims(160, 320, 160)), [(0, 160, 160)])
    a_ok = abs(density - 2 / 3) < 1e-12 and abs(finite - 2 / 3) < 2e-2

    sine_worst = 0.0
    for reg in (centre, BulkRegime(0.7, 2.0, 1.3, 0.8, 0.9), BulkRegime(1.5, 2.5, 0.6, 1.2, 1.1)):
        p = bulk_params(reg)
        for d in range(-10, 11):
            want = p.phi / math.pi if d == 0 else math.sin(p.phi * d) / (math.pi * d)
            sine_worst = max(sine_worst, abs(bulk_kernel_value(p, (0, 0, d), (0, 0, 0)).value - want))
    b_ok = sine_worst < 1e-8

    cases = [
        (centre, [(0, 0, 0)], ()),
        (centre, [(0, 0, 0), (1, -1, 0)], (1, -1)),
        (BulkRegime(0.7, 2.0, 1.3, 0.8, 0.9), [(0, 0, 0), (0, 0, 1)], ()),
        (BulkRegime(1, 2, 1, 0.75, 0.9), [(0, 0, 0), (0, -1, 1)], ()),
        (BulkRegime(1, 2, 1, 1, 1.2), [(0, 0, 0), (1, 0, 1), (2, -1, 0)], (1, 1)),
    ]
    monotone = 0
    summaries = []
    for reg, pts, eps in cases:
        gaps = [r.gap for r in convergence_check(reg, pts, [20, 40, 80, 160], eps)]
        mono = all(a > b for a, b in zip(gaps, gaps[1:]))
        monotone += mono
        summaries.append("/".join(f"{g:.1e}" for g in gaps) + ("" if mono else " (oscillating)"))
    c_ok = monotone >= 3
    elapsed = time.perf_counter() - start
    criterion(
        7,
        "bulk limit",
        a_ok and b_ok and c_ok and elapsed < 1800,
        f"(a) phi/pi = {density:.12f}, R1 at N=160 = {finite:.5f}; (b) sine kernel worst {sine_worst:.1e}; "
        f"(c) {monotone}/{len(cases)} points monotone over eps = 1/20..1/160 [{'; '.join(summaries)}]; {elapsed:.1f}s",
    )


def _time_sample(dims, repeats=3):
    sample_uniform(BoxDims(2, 3, 1), 0)  # compile outside the timing
    best = math.inf
    for k in range(repeats):
        t0 = time.perf_counter()
        sample_uniform(dims, k)
        best = min(best, time.perf_counter() - t0)
    return best


def test_8_performance(criterion, tmp_path):
    out = tmp_path / "big.json"
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "hexshuffle.cli", "sample", "--N", "1000", "--T", "2000", "--S", "1000",
         "--seed", "1", "--out", str(out)],
        capture_output=True, text=True,
    )
    wall = time.perf_counter() - t0
    peak_mb = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss / 1024
    ran = proc.returncode == 0 and out.stat().st_size > 0

    slopes = {}
    base = {"N": 160, "T": 320, "S": 160}
    for name, values in (("N", (80, 160, 320)), ("T", (320, 640, 1280)), ("S", (40, 80, 160))):
        times = []
        for v in values:
            p = dict(base, **{name: v})
            times.append(_time_sample(BoxDims(p["N"], p["T"], p["S"])))
        slopes[name] = float(np.polyfit(np.log(values), np.log(times), 1)[0])
    slopes_ok = all(abs(s - 1.0) <= 0.15 for s in slopes.values())
    # informational only: all three sides scaled together (fixed hexagon shape)
    sides = (40, 80, 160, 320)
    joint = float(np.polyfit(np.log([k**3 for k in sides]), np.log([_time_sample(BoxDims(k, 2 * k, k)) for k in sides]), 1)[0])
    criterion(
        8,
        "performance",
        ran and wall <= 240 and peak_mb <= 1024 and slopes_ok,
        f"(1000,2000,1000) via CLI in {wall:.1f}s (target 60s, budget 240s), peak RSS {peak_mb:.0f} MB; "
        f"per-parameter log-log slopes " + ", ".join(f"{k}={v:.2f}" for k, v in slopes.items())
        + f" (required 1 +/- 0.15); slope in NTS at fixed shape {joint:.2f} (not part of the criterion)",
    )


def test_9_figures(criterion, data_dir):
    golden = PathFamily.from_json((data_dir / "golden_family.json").read_text())
    svg_ok = sample_uniform(golden.dims, 2008) == golden and render_svg(
        golden, RenderOptions(paths=True)
    ) == (data_dir / "golden_tiling.svg").read_text()

    # dynamics from the frozen "filled" state relax to the uniform section marginals
    dims = BoxDims(50, 50, 20)
    plan = MarkovPlan.alternate(dims, 1000)
    chains = 300
    final_S = plan.S_at(plan.length)
    sections = (10, 25, 40)
    counts = {t: Counter() for t in sections}
    root = RandomSource(9)
    for c in range(chains):
        state = None
        for _, state in iter_chain(plan, root.spawn(c), initial=highest_family(dims)):
            pass
        for t in sections:
            counts[t].update(int(x) for x in state.X[t])
    final_plan = MarkovPlan(dims.with_S(final_S))
    tests = 0
    min_p = 1.0
    for t in sections:
        lo, hi = section_bounds(dims.N, dims.T, final_S, t)
        for x in range(lo, hi + 1):
            p = min(max(correlation(final_plan, [(0, t, x)]), 0.0), 1.0)
            res = binomtest(counts[t].get(x, 0), chains, p) if 0 < p < 1 else None
            pv = res.pvalue if res is not None else float(counts[t].get(x, 0) == round(p) * chains)
            min_p = min(min_p, pv)
            tests += 1
    # Bonferroni over all section cells at a family-wise level of 1e-3
    dyn_ok = min_p > 1e-3 / tests
    criterion(
        9,
        "golden SVG and relaxed dynamics marginals",
        svg_ok and dyn_ok,
        f"golden SVG {'identical' if svg_ok else 'DIFFERS'}; {chains} chains x {plan.length} alternating steps "
        f"from the filled state at (50,50,20), {tests} section cells, min binomial p = {min_p:.2e} "
        f"(threshold {1e-3 / tests:.1e})",
    )
