"""Command-line entry point: ``recsim {bench,div,validate,sample,decode}``."""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__
from .bench import (
    ALGORITHMS,
    SweepConfig,
    parse_grid,
    run_awgn_sweep,
    run_divergence_report,
    run_fixedkl_sweep,
)
from .bnb import bnb_astar, bnb_gprs, decode_bnb
from .coding import (
    BitString,
    astar_index_alpha,
    bnb_astar_depth_alpha,
    bnb_gprs_depth_alpha,
    decode_bnb_run,
    decode_index,
    decode_parallel_index,
    encode_bnb_run,
    encode_index,
    encode_parallel_index,
    sorted_uniform_alpha,
    sorted_uniform_decode,
    sorted_uniform_encode,
)
from .distributions import Gaussian, Laplace, Uniform, make_pair
from .divergences import kl_divergence, solve_stretch, write_stretch_csv
from .poisson import parse_seed
from .samplers import (
    astar_limited,
    astar_parallel,
    astar_sample,
    budget_for_tv,
    decode_global,
    decode_parallel,
    gprs_limited,
    gprs_parallel,
    gprs_sample,
)

_FAMILIES = {"gauss": Gaussian, "gaussian": Gaussian, "laplace": Laplace, "uniform": Uniform}


def parse_distribution(text: str):
    """'gauss:mean,variance', 'laplace:loc,scale' or 'uniform:lo,hi'."""
    name, _, args = text.partition(":")
    family = _FAMILIES.get(name.strip().lower())
    if family is None:
        raise argparse.ArgumentTypeError(f"unknown family {name!r}")
    try:
        a, b = (float(v) for v in args.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two numbers in {text!r}") from None
    try:
        return family(a, b)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed_arg(text: str) -> int:
    try:
        return parse_seed(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _algs(text: str) -> tuple[str, ...]:
    algs = tuple(a.strip() for a in text.split(",") if a.strip())
    unknown = [a for a in algs if a not in ALGORITHMS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown algorithms {unknown}; choose from {ALGORITHMS}")
    return algs


def _emit(rows, fields=None) -> None:
    from .bench import CSV_FIELDS, rows_to_csv

    sys.stdout.write(rows_to_csv(rows, fields or CSV_FIELDS))


# ------------------------------------------------------------------ bench


def cmd_bench(args) -> int:
    common = dict(trials=args.trials, seed=args.seed, out=args.out, workers=args.workers,
                  deterministic=args.deterministic, threads=args.threads)
    if args.experiment == "awgn":
        config = SweepConfig(experiment="awgn", grid=parse_grid(args.mi),
                             algorithms=args.algs or ("gprs", "bnb-gprs"), mi_cap=args.mi_cap, **common)
        rows = run_awgn_sweep(config)
    else:
        config = SweepConfig(experiment="fixedkl", grid=parse_grid(args.delta), kappa=args.kappa,
                             algorithms=args.algs or ("bnb-astar", "bnb-gprs"), **common)
        rows = run_fixedkl_sweep(config)
    if not args.out:
        _emit(rows)
    return 0


def cmd_div(args) -> int:
    from .bench import DIVERGENCE_FIELDS

    config = SweepConfig(experiment="divergences", grid=parse_grid(args.neg_log_b),
                         out=args.out, deterministic=args.deterministic)
    dims = [int(d) for d in parse_grid(args.dims)]
    rows = run_divergence_report(config, dims)
    if not args.out:
        _emit(rows, DIVERGENCE_FIELDS)
    return 0


def cmd_validate(args) -> int:
    from .validation import run_validation

    only = [c.strip().upper() for c in args.only.split(",")] if args.only else None
    report = run_validation(scale=args.scale, only=only)
    for entry in report["criteria"]:
        status = "PASS" if entry["passed"] else "FAIL"
        print(f"{entry['cid']} {status} {entry['title']}: {entry['detail']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2, default=float)
    return 0 if report["passed"] else 1


# ------------------------------------------------------------ sample / decode


def _build_pair(args):
    pair = make_pair(args.target, args.proposal)
    if args.bound is not None:
        pair = type(pair)(pair.target, pair.proposal, pair.mode_point, args.bound, pair.label)
    return pair


def _info_bits(args, pair) -> float:
    return args.info if args.info is not None else kl_divergence(pair)


def _alpha(args, pair) -> float:
    if args.alpha is not None:
        return args.alpha
    info = _info_bits(args, pair)
    if args.alg == "rs":
        return sorted_uniform_alpha(info)
    if args.alg == "bnb-astar":
        return bnb_astar_depth_alpha(math.log2(pair.sup_bound))
    if args.alg == "bnb-gprs":
        return bnb_gprs_depth_alpha(info)
    return astar_index_alpha(info)


def _budget(args, pair) -> float:
    if args.budget is not None:
        return args.budget
    try:
        return budget_for_tv(kl_divergence(pair), args.eps)
    except OverflowError:
        return math.inf


def _needs_bound(alg: str) -> bool:
    return alg in ("rs", "astar", "bnb-astar", "astar-par", "astar-lim")


def cmd_sample(args) -> int:
    pair = _build_pair(args)
    if _needs_bound(args.alg) and pair.sup_bound is None:
        raise SystemExit("error: this pair has no finite bound; pass --bound")
    alpha = _alpha(args, pair)
    stretch = None
    if "gprs" in args.alg:
        stretch = solve_stretch(pair)
    seed, M, alg = args.seed, pair.sup_bound, args.alg
    out = {"algorithm": alg, "seed": seed, "alpha": alpha}
    if alg == "rs":
        code = sorted_uniform_encode(seed, pair, M, alpha)
        bits = code.bits
        out.update(sample=code.sample, index=code.index, steps=code.index,
                   log_count=code.log_count, rank=code.rank)
    elif alg in ("bnb-astar", "bnb-gprs"):
        run = bnb_astar(pair, M, seed) if alg == "bnb-astar" else bnb_gprs(pair, stretch, seed)
        bits = encode_bnb_run(run, alpha)
        out.update(sample=run.sample, depth=run.depth, steps=run.steps,
                   heap_index=str(run.heap_index), bound_mass=run.bound_mass)
    elif alg in ("astar-par", "gprs-par"):
        run = (astar_parallel(pair, M, args.threads, seed) if alg == "astar-par"
               else gprs_parallel(pair, stretch, args.threads, seed))
        j, n = run.thread_tag
        bits = encode_parallel_index(j, args.threads, n, alpha)
        out.update(sample=run.sample, thread=j, index=n, steps=run.steps,
                   thread_steps=list(run.thread_steps))
    else:
        if alg == "astar":
            run = astar_sample(pair, M, seed)
        elif alg == "gprs":
            run = gprs_sample(pair, stretch, seed)
        elif alg == "astar-lim":
            run = astar_limited(pair, M, _budget(args, pair), seed)
        else:
            run = gprs_limited(pair, stretch, _budget(args, pair), seed)
        bits = encode_index(run.index, alpha)
        out.update(sample=run.sample, index=run.index, steps=run.steps,
                   exhausted_budget=run.exhausted_budget)
    out["bits"] = len(bits)
    if args.encode:
        with open(args.encode, "wb") as fh:
            fh.write(bits.to_bytes())
    if args.stretch_csv:
        if stretch is None:
            stretch = solve_stretch(pair)
        write_stretch_csv(stretch, args.stretch_csv)
    print(json.dumps(out))
    return 0


def cmd_decode(args) -> int:
    pair = _build_pair(args)
    alpha = _alpha(args, pair)
    with open(args.infile, "rb") as fh:
        reader = BitString.from_bytes(fh.read()).reader()
    seed, alg = args.seed, args.alg
    if alg == "rs":
        index, sample = sorted_uniform_decode(reader, seed, pair.proposal, alpha)
        out = {"sample": sample, "index": index}
    elif alg in ("bnb-astar", "bnb-gprs"):
        depth, path = decode_bnb_run(reader, alpha, seed)
        out = {"sample": decode_bnb(seed, depth, path, pair), "depth": depth}
    elif alg in ("astar-par", "gprs-par"):
        thread, index = decode_parallel_index(reader, args.threads, alpha)
        out = {"sample": decode_parallel(seed, thread, index, pair.proposal),
               "thread": thread, "index": index}
    else:
        index = decode_index(reader, alpha)
        out = {"sample": decode_global(seed, index, pair.proposal), "index": index}
    out.update(algorithm=alg, seed=seed)
    print(json.dumps(out))
    return 0


# ------------------------------------------------------------------ parser


def _add_pair_args(p) -> None:
    p.add_argument("--alg", required=True, choices=ALGORITHMS)
    p.add_argument("--target", required=True, type=parse_distribution,
                   help="gauss:mean,var | laplace:loc,scale | uniform:lo,hi")
    p.add_argument("--proposal", required=True, type=parse_distribution)
    p.add_argument("--seed", required=True, type=_seed_arg, help="decimal or 0x-prefixed")
    p.add_argument("--bound", type=float, help="upper bound M on the density ratio")
    p.add_argument("--alpha", type=float, help="zeta exponent (overrides --info)")
    p.add_argument("--info", type=float,
                   help="divergence in bits that sets the zeta exponent (default: D_KL of the pair)")
    p.add_argument("--threads", type=int, default=4, help="logical threads for *-par")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"recsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="runtime and codelength sweeps")
    bench.add_argument("experiment", choices=("awgn", "fixedkl"))
    bench.add_argument("--mi", default="0.1..12:24", help="MI grid in bits, 'a..b:n' or a list")
    bench.add_argument("--mi-cap", type=float, default=8.0,
                       help="skip general samplers above this MI")
    bench.add_argument("--kappa", type=float, default=2.0)
    bench.add_argument("--delta", default="5..25:5", help="D_inf grid in bits")
    bench.add_argument("--trials", type=int, default=1000)
    bench.add_argument("--seed", type=_seed_arg, default=0xC0FFEE)
    bench.add_argument("--algs", type=_algs)
    bench.add_argument("--threads", type=int, default=4, help="logical threads for *-par")
    bench.add_argument("--workers", type=int, help="worker processes (default RECSIM_THREADS or 1)")
    bench.add_argument("--out")
    bench.add_argument("--deterministic", action="store_true", help="omit the timestamp line")
    bench.set_defaults(func=cmd_bench)

    div = sub.add_parser("div", help="divergence report")
    div.add_argument("report", choices=("report",))
    div.add_argument("--neg-log-b", default="0..6:13", help="grid of -ln b for Laplace scales")
    div.add_argument("--dims", default="1,2,4,8,16,32,64")
    div.add_argument("--out")
    div.add_argument("--deterministic", action="store_true")
    div.set_defaults(func=cmd_div)

    val = sub.add_parser("validate", help="run the acceptance checks")
    val.add_argument("--json", help="write the report here")
    val.add_argument("--scale", type=float, default=1.0, help="fraction of the stated sample sizes")
    val.add_argument("--only", help="comma-separated criterion ids, e.g. C1,C4")
    val.set_defaults(func=cmd_validate)

    sample = sub.add_parser("sample", help="draw and encode one sample")
    _add_pair_args(sample)
    sample.add_argument("--encode", help="write the code here")
    sample.add_argument("--budget", type=int, help="step budget for *-lim")
    sample.add_argument("--eps", type=float, default=0.25, help="TV target for the default budget")
    sample.add_argument("--stretch-csv", help="dump (h, sigma(h), sha') at the solver knots")
    sample.set_defaults(func=cmd_sample)

    decode = sub.add_parser("decode", help="recover a sample from its code")
    _add_pair_args(decode)
    decode.add_argument("--in", dest="infile", required=True)
    decode.set_defaults(func=cmd_decode)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
