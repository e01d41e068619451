"""Command-line entry point: ``hexshuffle <subcommand> ...``.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric or singular
configuration, 4 capacity (enumeration cap).  Every JSON document carries
``meta = {tool_version, seed, config_hash}``; wall-clock time goes to stderr
so that the same configuration and seed give byte-identical output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import secrets
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .bulk import BulkRegime, bulk_kernel_matrix, bulk_params
from .core import BoxDims, PathFamily, check, enumerate_families, highest_family, lowest_family, omega_size, to_lozenges
from .errors import CapacityError, DomainError, InconsistentStateError, OutsideBulkError, SingularConfigurationError, UnsupportedConfigurationError
from .render import RenderOptions, palette_from, write_svg
from .shuffle import MarkovPlan, RandomSource, iter_chain, sample_uniform, trajectory_record
from .spectral import correlation, exact_correlation, mc_correlation

SEED_ENV = "HEXSHUFFLE_SEED"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CAPACITY = 0, 2, 3, 4
# options that change where output goes but not what it is
_NOT_HASHED = {"out", "svg", "svg_prefix", "jobs", "seed", "func", "query", "input"}


class UsageError(Exception):
    pass


def load_schema(name: str) -> dict:
    text = resources.files("hexshuffle").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_document(doc, name: str):
    try:
        jsonschema.validate(doc, load_schema(name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"{name} document invalid at {where}: {exc.message}") from None
    return doc


def parse_json_text(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{source}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def read_json_arg(value: str):
    """A path, ``-`` for stdin, or an inline JSON document starting with ``{``."""
    if value.lstrip().startswith("{"):
        return parse_json_text(value, "inline JSON")
    if value == "-":
        return parse_json_text(sys.stdin.read(), "stdin")
    try:
        with open(value, encoding="utf-8") as fh:
            return parse_json_text(fh.read(), value)
    except OSError as exc:
        raise UsageError(f"cannot read {value}: {exc.strerror}") from None


def resolve_seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env, 0)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    if args.seed is not None:
        return args.seed
    return secrets.randbits(63)


def config_hash(args, extra: dict | None = None) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_HASHED}
    if extra:
        cfg.update(extra)
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def meta(args, seed, extra=None) -> dict:
    return {"tool_version": __version__, "seed": seed, "config_hash": config_hash(args, extra)}


def dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class Output:
    """Text sink for a path or stdout (``-`` or None)."""

    def __init__(self, path):
        self.path = path
        self.fh = None

    def __enter__(self):
        if self.path in (None, "-"):
            self.fh = sys.stdout
        else:
            self.fh = open(self.path, "w", encoding="utf-8", newline="\n")
        return self

    def line(self, text: str):
        self.fh.write(text + "\n")

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()
        else:
            self.fh.flush()


def dims_from(args, S_name="S") -> BoxDims:
    if getattr(args, "sides", None):
        if any(getattr(args, k) is not None for k in ("N", "T", S_name)):
            raise UsageError("give either --sides or --N/--T/--S, not both")
        a, b, c = args.sides
        return BoxDims.from_sides(a, b, c)
    missing = [k for k in ("N", "T", S_name) if getattr(args, k) is None]
    if missing:
        raise UsageError("missing " + ", ".join(f"--{k}" for k in missing))
    return BoxDims(args.N, args.T, getattr(args, S_name))


def render_options(args) -> RenderOptions:
    return RenderOptions(
        scale=args.scale,
        palette=palette_from(args.palette.split(",") if args.palette else None),
        paths=args.paths,
    )


# -- sample ---------------------------------------------------------------------------


def _sample_one(job):
    N, T, S, seed, k = job
    src = RandomSource(seed) if k is None else RandomSource(seed).spawn(k)
    return sample_uniform(BoxDims(N, T, S), src).X.tolist()


def cmd_sample(args) -> int:
    dims = dims_from(args)
    seed = resolve_seed(args)
    m = meta(args, seed)
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    if args.svg and args.count > 1:
        raise UsageError("--svg needs --count 1")
    if args.count == 1:
        X = _sample_one((dims.N, dims.T, dims.S, seed, None))
        pf = PathFamily(dims, X)
        doc = dict(pf.to_dict(), meta=m)
        with Output(args.out) as out:
            out.line(dump(doc))
        if args.svg:
            write_svg(pf, args.svg, render_options(args))
        return EXIT_OK
    # independent samples with seeds spawned from the master seed, one per line
    jobs = [(dims.N, dims.T, dims.S, seed, k) for k in range(args.count)]
    with Output(args.out) as out:
        out.line(dump({"meta": m}))
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = pool.map(_sample_one, jobs, chunksize=max(1, args.count // (4 * args.jobs)))
                for X in results:
                    out.line(dump({"N": dims.N, "T": dims.T, "S": dims.S, "X": X}))
        else:
            for job in jobs:
                out.line(dump({"N": dims.N, "T": dims.T, "S": dims.S, "X": _sample_one(job)}))
    return EXIT_OK


# -- dynamics -------------------------------------------------------------------------


def parse_eps(text: str) -> tuple[int, ...]:
    """``"+-+"`` or ``"1,-1,1"``."""
    text = text.strip()
    if not text:
        return ()
    if set(text) <= {"+", "-"}:
        return tuple(1 if ch == "+" else -1 for ch in text)
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"cannot parse moves {text!r}; use '+-+' or '1,-1,1'") from None
    return vals


def parse_int_list(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return sorted({int(v) for v in text.split(",")})
    except ValueError:
        raise UsageError(f"cannot parse integer list {text!r}") from None


def build_plan(args) -> MarkovPlan:
    if args.eps is not None:
        return MarkovPlan(dims_from(args), parse_eps(args.eps))
    if args.plan == "grow":
        target = dims_from(args)
        return MarkovPlan.grow(target.N, target.T, target.S)
    if args.steps is None:
        raise UsageError("--plan alternate needs --steps")
    return MarkovPlan.alternate(dims_from(args), args.steps)


def cmd_dynamics(args) -> int:
    plan = build_plan(args)
    seed = resolve_seed(args)
    src = RandomSource(seed)
    initial = None
    if args.start == "filled":
        initial = highest_family(plan.dims)
    elif args.start == "lowest":
        initial = lowest_family(plan.dims)
    snaps = set(parse_int_list(args.snapshots))
    if any(r > plan.length for r in snaps):
        raise UsageError(f"snapshot beyond the plan length {plan.length}")
    opts = render_options(args)
    with Output(args.out) as out:
        out.line(dump({"meta": meta(args, seed), "plan": plan.to_dict()}))
        for r, state in iter_chain(plan, src, initial):
            if r in snaps or (args.every and r % args.every == 0) or r == plan.length:
                out.line(dump(trajectory_record(r, state)))
            if r in snaps and args.svg_prefix:
                write_svg(state, f"{args.svg_prefix}{r:06d}.svg", opts)
    return EXIT_OK


# -- render ---------------------------------------------------------------------------


def cmd_render(args) -> int:
    doc = validate_document(read_json_arg(args.input), "family")
    pf = check(PathFamily.from_dict(doc))
    opts = RenderOptions(
        scale=args.scale,
        palette=palette_from(args.palette.split(",") if args.palette else None),
        paths=args.paths,
        outline=not args.no_outline,
    )
    if args.out in (None, "-"):
        from .render import render_svg

        sys.stdout.write(render_svg(pf, opts))
    else:
        write_svg(pf, args.out, opts)
    if args.counts:
        sys.stderr.write(dump(to_lozenges(pf).counts()) + "\n")
    return EXIT_OK


# -- correlate ------------------------------------------------------------------------


def cmd_correlate(args) -> int:
    doc = validate_document(read_json_arg(args.query), "correlation_query")
    plan = MarkovPlan.from_dict(doc["plan"])
    points = [(p["r"], p["t"], p["x"]) for p in doc["points"]]
    seed = None
    extra = {"query": doc}
    if args.mc:
        seed = resolve_seed(args)
        est = mc_correlation(plan, points, args.mc, RandomSource(seed))
        result = {"value": est.value, "method": "mc", "stderr": est.stderr, "trials": est.trials}
    elif args.exact:
        result = {"value": float(exact_correlation(plan, points)), "method": "exact"}
    else:
        try:
            result = {"value": correlation(plan, points), "method": "det"}
        except UnsupportedConfigurationError as exc:
            raise UnsupportedConfigurationError(f"{exc}; rerun with --mc TRIALS for a Monte Carlo estimate") from None
    result["meta"] = meta(args, seed, extra)
    with Output(args.out) as out:
        out.line(dump(result))
    return EXIT_OK


# -- bulk-kernel ----------------------------------------------------------------------


def _bulk_query(args) -> dict:
    if args.query:
        return validate_document(read_json_arg(args.query), "bulk_query")
    if not args.regime:
        raise UsageError("give --query or --regime")
    try:
        S0, T, N, t, x = (float(v) for v in args.regime.split(","))
    except ValueError:
        raise UsageError("--regime needs five numbers S0,T,N,t,x") from None
    pts = []
    for chunk in (args.points or "0,0,0").split(";"):
        try:
            r, dt, dx = (int(v) for v in chunk.split(","))
        except ValueError:
            raise UsageError(f"cannot parse point {chunk!r}; use r,t,x") from None
        pts.append({"r": r, "t": dt, "x": dx})
    doc = {"regime": {"S0": S0, "T": T, "N": N, "t": t, "x": x}, "points": pts}
    if args.eps:
        doc["eps"] = list(parse_eps(args.eps))
    return validate_document(doc, "bulk_query")


def cmd_bulk(args) -> int:
    doc = _bulk_query(args)
    reg = BulkRegime(**doc["regime"])
    params = bulk_params(reg)
    tol = doc.get("tolerance", args.tol)
    pts, K, err = bulk_kernel_matrix(reg, [(p["r"], p["t"], p["x"]) for p in doc["points"]], doc.get("eps", ()), tol)
    det = complex(np.linalg.det(K)) if len(K) else 1.0
    result = {
        "phi": params.phi,
        "c1": params.c1,
        "c2": params.c2,
        "density": params.density,
        "points": [{"r": q.r, "t": q.t, "x": q.x} for q in pts],
        "entries": [[[round(v.real, 15), round(v.imag, 15)] for v in row] for row in K],
        "determinant": round(det.real, 15),
        "determinant_imag": round(det.imag, 15),
        "quadrature_error": err,
        "meta": meta(args, None, {"query": doc}),
    }
    with Output(args.out) as out:
        out.line(dump(result))
    return EXIT_OK


# -- enumerate ------------------------------------------------------------------------


def cmd_enumerate(args) -> int:
    dims = dims_from(args)
    m = meta(args, None)
    with Output(args.out) as out:
        if not args.list:
            out.line(dump({"N": dims.N, "T": dims.T, "S": dims.S, "count": omega_size(dims), "meta": m}))
            return EXIT_OK
        fams = enumerate_families(dims, cap=args.cap)
        out.line(dump({"N": dims.N, "T": dims.T, "S": dims.S, "count": len(fams), "meta": m}))
        for pf in fams:
            out.line(dump(pf.to_dict()))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------


def _add_dims(p, S_help="total rise S (side b)"):
    p.add_argument("--N", type=int, help="number of paths (side c)")
    p.add_argument("--T", type=int, help="number of time steps (a + b)")
    p.add_argument("--S", type=int, help=S_help)
    p.add_argument("--sides", type=int, nargs=3, metavar=("A", "B", "C"), help="hexagon sides instead of N/T/S")


def _add_render(p):
    p.add_argument("--scale", type=float, default=20.0, help="pixels per lattice unit")
    p.add_argument("--palette", help="three comma-separated colours: horizontal,rising,flat")
    p.add_argument("--paths", action="store_true", help="overlay the paths")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hexshuffle", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="perfect uniform sample")
    _add_dims(p)
    p.add_argument("--seed", type=int, help=f"64-bit seed (overridden by ${SEED_ENV})")
    p.add_argument("--count", type=int, default=1, help="number of independent samples (NDJSON when > 1)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for --count > 1")
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.add_argument("--svg", help="also write an SVG picture")
    _add_render(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("dynamics", help="run a shuffling plan and stream states")
    _add_dims(p, S_help="initial S (target S for --plan grow)")
    p.add_argument("--plan", choices=("grow", "alternate"), default="alternate")
    p.add_argument("--eps", help="explicit moves, e.g. '+-+-' or '1,-1'")
    p.add_argument("--steps", type=int, help="number of moves for --plan alternate")
    p.add_argument("--start", choices=("uniform", "filled", "lowest"), default="uniform")
    p.add_argument("--snapshots", help="comma-separated r values to record (and render)")
    p.add_argument("--every", type=int, default=0, help="also record every k-th state")
    p.add_argument("--svg-prefix", help="write snapshot SVGs to PREFIX000123.svg")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="NDJSON output path (default stdout)")
    _add_render(p)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("render", help="SVG picture of a family JSON")
    p.add_argument("input", help="family JSON path or '-'")
    p.add_argument("--out", help="SVG path (default stdout)")
    p.add_argument("--no-outline", action="store_true")
    p.add_argument("--counts", action="store_true", help="print lozenge counts to stderr")
    _add_render(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("correlate", help="space-time correlation R_n")
    p.add_argument("query", help="query JSON path, '-' or inline JSON")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--mc", type=int, metavar="TRIALS", help="Monte Carlo estimate instead of the determinant")
    g.add_argument("--exact", action="store_true", help="exact rational value by enumeration (small boxes)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("bulk-kernel", help="bulk limit kernel matrix and determinant")
    p.add_argument("--query", help="query JSON path, '-' or inline JSON")
    p.add_argument("--regime", help="S0,T,N,t,x")
    p.add_argument("--points", help="points as 'r,t,x;r,t,x' (t and x are offsets)")
    p.add_argument("--eps", help="moves, e.g. '+-'")
    p.add_argument("--tol", type=float, default=1e-10, help="absolute quadrature tolerance")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bulk)

    p = sub.add_parser("enumerate", help="count (and optionally list) all tilings")
    _add_dims(p)
    p.add_argument("--list", action="store_true", help="also write every family (NDJSON)")
    p.add_argument("--cap", type=int, default=10**6, help="refuse to list more families than this")
    p.add_argument("--out")
    p.set_defaults(func=cmd_enumerate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            code = args.func(args)
    except CapacityError as exc:
        print(f"hexshuffle: capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (OutsideBulkError, SingularConfigurationError, ArithmeticError, InconsistentStateError) as exc:
        print(f"hexshuffle: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except UnsupportedConfigurationError as exc:
        print(f"hexshuffle: unsupported configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, DomainError, ValueError) as exc:
        print(f"hexshuffle: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"hexshuffle: wall_time={time.perf_counter() - start:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
