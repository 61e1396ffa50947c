"""Benchmark sweeps producing per-setting statistics as CSV.

Every trial is addressed by ``trial_seed(setting_seed, i)`` with the setting
seed folded from the base seed and the setting's position in the grid, so
results do not depend on how trials are spread over workers.
"""

from __future__ import annotations

import csv
import io
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bnb import bnb_astar, bnb_gprs
from .coding import (
    astar_index_alpha,
    bnb_astar_depth_alpha,
    bnb_gprs_depth_alpha,
    encode_bnb_run,
    encode_parallel_index,
    sorted_uniform_alpha,
    sorted_uniform_encode,
    zeta_encode,
)
from .distributions import (
    Laplace,
    awgn_sigma2_for_mi,
    fixed_kl_min_delta,
    make_awgn_pair,
    make_fixed_kl_pair,
    make_pair,
)
from .divergences import (
    QuadratureError,
    csd,
    csd_gap_product_gaussian,
    kl_divergence,
    laplace_csd_closed_form,
    solve_stretch,
)
from .poisson import fold_in, trial_seed, uniform_at
from .samplers import (
    astar_limited,
    astar_parallel,
    astar_sample,
    budget_for_tv,
    gprs_limited,
    gprs_parallel,
    gprs_sample,
    rejection_sample,
)

ALGORITHMS = ("rs", "astar", "gprs", "bnb-astar", "bnb-gprs",
              "astar-par", "gprs-par", "astar-lim", "gprs-lim")
GENERAL = frozenset({"rs", "astar", "gprs", "astar-par", "gprs-par", "astar-lim", "gprs-lim"})
NEEDS_STRETCH = frozenset({"gprs", "bnb-gprs", "gprs-par", "gprs-lim"})

CSV_FIELDS = ("setting", "algorithm", "trials", "steps_mean", "steps_se", "steps_median",
              "steps_q25", "steps_q75", "bits_mean", "bits_se", "bits_median", "bits_q25",
              "bits_q75", "skipped_reason")

_NORMAL = statistics.NormalDist()


@dataclass
class SweepConfig:
    experiment: str = "awgn"
    trials: int = 1000
    seed: int = 0xC0FFEE
    grid: list = field(default_factory=list)
    algorithms: tuple = ("gprs", "bnb-gprs")
    out: str | None = None
    mi_cap: float = 8.0
    kappa: float = 2.0
    threads: int = 4
    limit_eps: float = 0.25
    workers: int | None = None
    deterministic: bool = False

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if list(self.grid) != sorted(self.grid):
            raise ValueError("grid must be sorted")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")


def parse_grid(text: str) -> list[float]:
    """'a..b:n' for n evenly spaced points, or a comma-separated list."""
    text = text.strip()
    if ".." in text:
        span, _, count = text.partition(":")
        lo, hi = (float(v) for v in span.split(".."))
        n = int(count) if count else 2
        if n == 1:
            return [lo]
        return [lo + (hi - lo) * i / (n - 1) for i in range(n)]
    return sorted(float(v) for v in text.split(",") if v.strip())


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("RECSIM_THREADS")
    return max(1, int(env)) if env else 1


def quartiles(values) -> tuple[float, float, float]:
    """25th, 50th and 75th percentiles, median-unbiased interpolation."""
    q25, q50, q75 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75],
                                  method="median_unbiased")
    return float(q25), float(q50), float(q75)


def _summary(values) -> dict:
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    q25, q50, q75 = quartiles(arr)
    return {"mean": float(arr.mean()), "se": se, "median": q50, "q25": q25, "q75": q75}


def stat_row(setting: str, algorithm: str, steps, bits) -> dict:
    row = {"setting": setting, "algorithm": algorithm, "trials": len(steps), "skipped_reason": ""}
    for prefix, values in (("steps", steps), ("bits", bits)):
        for key, value in _summary(values).items():
            row[f"{prefix}_{key}"] = value
    return row


def skipped_row(setting: str, algorithm: str, reason: str) -> dict:
    row = {k: "" for k in CSV_FIELDS}
    row.update(setting=setting, algorithm=algorithm, trials=0, skipped_reason=reason)
    return row


def source_symbol(seed: int, sigma2: float) -> float:
    """x ~ N(0, sigma2) drawn from a sub-stream no sampler touches."""
    return math.sqrt(sigma2) * _NORMAL.inv_cdf(uniform_at(fold_in(seed, 0), 0))


@dataclass(frozen=True)
class _Coding:
    index_alpha: float
    depth_alpha_astar: float
    depth_alpha_gprs: float
    sorted_alpha: float


def _coding_for(info_bits: float, kl_bits: float, lb_bound: float) -> _Coding:
    return _Coding(astar_index_alpha(info_bits), bnb_astar_depth_alpha(lb_bound),
                   bnb_gprs_depth_alpha(kl_bits), sorted_uniform_alpha(info_bits))


def run_trial(alg: str, pair, seed: int, coding: _Coding, stretch=None,
              threads: int = 4, limit_eps: float = 0.25) -> tuple[int, int]:
    """Run one algorithm on one seed; return (steps, code bits)."""
    M = pair.sup_bound
    if alg == "rs":
        code = sorted_uniform_encode(seed, pair, M, coding.sorted_alpha)
        return code.index, len(code.bits)
    if alg == "astar":
        r = astar_sample(pair, M, seed)
        return r.steps, len(zeta_encode(r.index, coding.index_alpha))
    if alg == "gprs":
        r = gprs_sample(pair, stretch, seed)
        return r.steps, len(zeta_encode(r.index, coding.index_alpha))
    if alg == "bnb-astar":
        r = bnb_astar(pair, M, seed)
        return r.steps, len(encode_bnb_run(r, coding.depth_alpha_astar))
    if alg == "bnb-gprs":
        r = bnb_gprs(pair, stretch, seed)
        return r.steps, len(encode_bnb_run(r, coding.depth_alpha_gprs))
    if alg in ("astar-par", "gprs-par"):
        if alg == "astar-par":
            r = astar_parallel(pair, M, threads, seed)
        else:
            r = gprs_parallel(pair, stretch, threads, seed)
        j, n = r.thread_tag
        return r.steps, len(encode_parallel_index(j, threads, n, coding.index_alpha))
    if alg in ("astar-lim", "gprs-lim"):
        try:
            budget = budget_for_tv(kl_divergence(pair), limit_eps)
        except OverflowError:
            budget = math.inf
        if alg == "astar-lim":
            r = astar_limited(pair, M, budget, seed)
        else:
            r = gprs_limited(pair, stretch, budget, seed)
        return r.steps, len(zeta_encode(r.index, coding.index_alpha))
    raise ValueError(f"unknown algorithm {alg!r}")


def _awgn_job(job) -> tuple[list, list]:
    alg, mi, setting_seed, lo, hi, threads, limit_eps = job
    sigma2 = awgn_sigma2_for_mi(mi)
    steps, bits = [], []
    for i in range(lo, hi):
        seed = trial_seed(setting_seed, i)
        x = source_symbol(seed, sigma2)
        pair = make_awgn_pair(x, sigma2, 1.0)
        kl = kl_divergence(pair)
        coding = _coding_for(mi, kl, math.log2(pair.sup_bound))
        stretch = solve_stretch(pair) if alg in NEEDS_STRETCH else None
        k, b = run_trial(alg, pair, seed, coding, stretch, threads, limit_eps)
        steps.append(k)
        bits.append(b)
    return steps, bits


def _fixedkl_job(job) -> tuple[list, list]:
    alg, kappa, delta, setting_seed, lo, hi, threads, limit_eps = job
    pair = make_fixed_kl_pair(kappa, delta)
    coding = _coding_for(kappa, kappa, delta)
    stretch = solve_stretch(pair) if alg in NEEDS_STRETCH else None
    steps, bits = [], []
    for i in range(lo, hi):
        k, b = run_trial(alg, pair, trial_seed(setting_seed, i), coding, stretch, threads, limit_eps)
        steps.append(k)
        bits.append(b)
    return steps, bits


def _shards(trials: int, workers: int) -> list[tuple[int, int]]:
    per = max(1, math.ceil(trials / workers))
    return [(lo, min(trials, lo + per)) for lo in range(0, trials, per)]


def _map(fn, jobs, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _collect(fn, specs, config: SweepConfig) -> list[tuple[list, list]]:
    """Run each (job prefix, suffix) pair over trial shards; merge shards in order."""
    workers = worker_count(config.workers)
    shards = _shards(config.trials, workers)
    jobs = [head + (lo, hi) + tail for head, tail in specs for lo, hi in shards]
    results = _map(fn, jobs, workers)
    merged = []
    for s in range(len(specs)):
        steps, bits = [], []
        for k, b in results[s * len(shards):(s + 1) * len(shards)]:
            steps.extend(k)
            bits.extend(b)
        merged.append((steps, bits))
    return merged


def _setting_seed(base: int, idx: int) -> int:
    return fold_in(fold_in(base, 0), 1_000_000 + idx)


def run_awgn_sweep(config: SweepConfig) -> list[dict]:
    """Gaussian channel sweep over mutual information (bits) with rho^2 = 1."""
    config.validate()
    for mi in config.grid:
        if not 0.1 <= mi <= 12.0:
            raise ValueError(f"mutual information {mi} outside [0.1, 12] bits")
    specs, plan = [], []
    for idx, mi in enumerate(config.grid):
        setting = f"mi={mi:g}"
        for alg in config.algorithms:
            if alg in GENERAL and mi > config.mi_cap:
                plan.append((setting, alg, False))
                continue
            plan.append((setting, alg, True))
            specs.append(((alg, mi, _setting_seed(config.seed, idx)), (config.threads, config.limit_eps)))
    results = iter(_collect(_awgn_job, specs, config))
    rows = []
    for setting, alg, run in plan:
        if run:
            steps, bits = next(results)
            rows.append(stat_row(setting, alg, steps, bits))
        else:
            rows.append(skipped_row(setting, alg, "skipped: runtime"))
    _maybe_write(rows, CSV_FIELDS, config)
    return rows


def run_fixedkl_sweep(config: SweepConfig) -> list[dict]:
    """Fixed D_KL = kappa, growing D_inf = delta, for the branch-and-bound samplers."""
    config.validate()
    bad = [d for d in config.grid if not 2.0 <= d <= 25.0]
    if bad:
        raise ValueError(f"delta values outside [2, 25]: {bad}")
    infeasible = []
    for d in config.grid:
        try:
            make_fixed_kl_pair(config.kappa, d)
        except ValueError:
            infeasible.append(d)
    if infeasible:
        raise ValueError(
            f"infeasible (kappa, delta): kappa={config.kappa:g} needs delta >= "
            f"{fixed_kl_min_delta(config.kappa):.4f}, got {infeasible}")
    specs = []
    for idx, d in enumerate(config.grid):
        for alg in config.algorithms:
            specs.append(((alg, config.kappa, d, _setting_seed(config.seed, idx)),
                          (config.threads, config.limit_eps)))
    results = _collect(_fixedkl_job, specs, config)
    rows = []
    for ((alg, _, d, _), _), (steps, bits) in zip(specs, results):
        rows.append(stat_row(f"delta={d:g}", alg, steps, bits))
    _maybe_write(rows, CSV_FIELDS, config)
    return rows


DIVERGENCE_FIELDS = ("panel", "setting", "kl_bits", "csd_bits", "csd_closed_bits",
                     "gap_bits", "upper_bits", "sandwich_ok", "error")


def run_divergence_report(config: SweepConfig, dims=None) -> list[dict]:
    """Laplace scale sweep (panel A) and product-Gaussian dimension sweep (panel B).

    ``config.grid`` holds -ln b values for the Laplace targets L(0, b)
    against L(0, 1); ``dims`` the dimensions d of N(1, 1/4)^d against N(0, 1)^d.
    """
    config.validate()
    dims = list(dims) if dims is not None else [1, 2, 4, 8, 16, 32, 64]
    rows = []
    for neg_log_b in config.grid:
        b = math.exp(-neg_log_b)
        setting = f"neg_log_b={neg_log_b:g}"
        row = {"panel": "A", "setting": setting, "error": ""}
        try:
            pair = make_pair(Laplace(0.0, b), Laplace(0.0, 1.0))
            kl = kl_divergence(pair)
            closed = laplace_csd_closed_form(b) if b < 1.0 else 0.0
            value = csd(pair) if b < 1.0 else 0.0
            row.update(kl_bits=kl, csd_bits=value, csd_closed_bits=closed, gap_bits=value - kl)
        except (QuadratureError, ValueError) as exc:
            row.update(kl_bits="", csd_bits="", csd_closed_bits="", gap_bits="", upper_bits="",
                       sandwich_ok="", error=str(exc))
            rows.append(row)
            continue
        upper = kl + math.log2(kl + 1.0) + 1.0
        row.update(upper_bits=upper, sandwich_ok=kl - 1e-9 <= value <= upper + 1e-9)
        rows.append(row)
    for d in dims:
        row = {"panel": "B", "setting": f"dim={d}", "csd_closed_bits": "", "error": ""}
        kl = d * 0.5 * (0.25 + 1.0 - 1.0 - math.log(0.25)) / math.log(2.0)
        try:
            gap = csd_gap_product_gaussian(1.0, 0.25, d)
        except QuadratureError as exc:
            row.update(kl_bits=kl, csd_bits="", gap_bits="", upper_bits="", sandwich_ok="",
                       error=str(exc))
            rows.append(row)
            continue
        upper = kl + math.log2(kl + 1.0) + 1.0
        row.update(kl_bits=kl, csd_bits=kl + gap, gap_bits=gap, upper_bits=upper,
                   sandwich_ok=-1e-9 <= gap <= upper - kl + 1e-9)
        rows.append(row)
    _maybe_write(rows, DIVERGENCE_FIELDS, config)
    return rows


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows, fields, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    out = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    out.writeheader()
    for row in rows:
        out.writerow({k: _format(row.get(k, "")) for k in fields})
    return buf.getvalue()


def _maybe_write(rows, fields, config: SweepConfig) -> None:
    if not config.out:
        return
    header = None
    if not config.deterministic:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        header = f"recsim {__version__} {config.experiment} {stamp}"
    with open(config.out, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, fields, header))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))
