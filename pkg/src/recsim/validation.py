"""Acceptance checks shared by the test-suite and ``recsim validate``.

Each ``check_cN`` runs one criterion at its stated sample sizes (scaled by
``scale`` for quick runs) and returns a ``CheckResult``.  Nothing here
asserts; callers decide what to do with a failure.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .bench import SweepConfig, run_awgn_sweep, run_fixedkl_sweep, source_symbol
from .bnb import bnb_astar, bnb_gprs, decode_bnb
from .coding import (
    EULER_GAMMA,
    BitString,
    decode_bnb_run,
    decode_heap_path,
    elias_gamma_decode,
    elias_gamma_encode,
    encode_bnb_run,
    encode_heap_path,
    bnb_gprs_depth_alpha,
    sorted_uniform_alpha,
    sorted_uniform_decode,
    sorted_uniform_encode,
    zeta_decode,
    zeta_encode,
)
from .distributions import (
    LOG2E,
    Gaussian,
    Laplace,
    Uniform,
    awgn_sigma2_for_mi,
    make_awgn_pair,
    make_fixed_kl_pair,
    make_pair,
)
from .divergences import (
    csd,
    csd_gap_product_gaussian,
    kl_divergence,
    laplace_csd_closed_form,
    solve_stretch,
    sup_ratio_numeric,
)
from .poisson import fold_in, trial_seed, uniform_at
from .samplers import (
    astar_limited,
    astar_parallel,
    astar_sample,
    budget_for_tv,
    decode_global,
    gprs_limited,
    gprs_parallel,
    gprs_sample,
    rejection_sample,
)

BASE_SEED = 0x5EED_2024
KS_LEVEL = 1e-3
LB_E_MINUS_1 = LOG2E - 1.0


@dataclass
class CheckResult:
    cid: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    tolerance: str = ""
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{self.cid} {status} {self.title}"
        return f"{text}: {self.detail}" if self.detail else text


def _n(count: int, scale: float) -> int:
    return max(20, int(round(count * scale)))


def _seeds(cid: int, tag: int, count: int):
    root = fold_in(fold_in(BASE_SEED, cid), tag)
    return [trial_seed(root, i) for i in range(count)]


def _mean_se(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


# ------------------------------------------------------------------ fixtures


def awgn_fixture():
    """x = 0, sigma^2 = 3, rho^2 = 1: target N(0, 1) against N(0, 4), sup r = 2."""
    return make_awgn_pair(0.0, 3.0, 1.0)


def narrow_fixture():
    """N(1, 0.25^2) against N(0, 1)."""
    return make_pair(Gaussian(1.0, 0.0625), Gaussian(0.0, 1.0), label="narrow")


def identity_fixture():
    return make_pair(Gaussian(0.0, 1.0), Gaussian(0.0, 1.0), label="identity")


def centred_gaussian_pair(lb_bound: float):
    """N(0, s^2) against N(0, 1) with sup r = 1/s = 2^lb_bound."""
    return make_pair(Gaussian(0.0, 2.0 ** (-2.0 * lb_bound)), Gaussian(0.0, 1.0),
                     label=f"centred(lbM={lb_bound:g})")


def target_reference(pair, count: int, key: int) -> np.ndarray:
    """Independent inverse-CDF draws from the target."""
    q = pair.target.quantile
    return np.array([q(uniform_at(fold_in(key, i), 0)) for i in range(1, count + 1)])


def samplers_for(pair, threads: int = 4):
    """Every exact sampler as a seed -> RunResult-like callable."""
    M = pair.sup_bound
    stretch = solve_stretch(pair)
    return {
        "rs": lambda s: rejection_sample(pair, M, s),
        "astar": lambda s: astar_sample(pair, M, s),
        "gprs": lambda s: gprs_sample(pair, stretch, s),
        "bnb-astar": lambda s: bnb_astar(pair, M, s),
        "bnb-gprs": lambda s: bnb_gprs(pair, stretch, s),
        "astar-par": lambda s: astar_parallel(pair, M, threads, s),
        "gprs-par": lambda s: gprs_parallel(pair, stretch, threads, s),
    }


# ------------------------------------------------------------------ criteria


def geometric_gof(counts, p: float, bins: int = 15) -> float:
    """Chi-square p-value of counts against Geom(p) on 1..bins-1 plus a tail bin."""
    counts = np.asarray(counts)
    n = counts.size
    observed = [np.sum(counts == k) for k in range(1, bins)]
    observed.append(np.sum(counts >= bins))
    probs = [p * (1 - p) ** (k - 1) for k in range(1, bins)]
    probs.append((1 - p) ** (bins - 1))
    expected = np.array(probs) * n
    return float(stats.chisquare(observed, expected).pvalue)


def check_c1(scale: float = 1.0) -> CheckResult:
    pair = awgn_fixture()
    n = _n(100_000, scale)
    measured, ok, parts = {}, True, []
    for name, run in (("rs", rejection_sample), ("astar", astar_sample)):
        ks = np.array([run(pair, 2.0, s).steps for s in _seeds(1, len(measured), n)])
        pval = geometric_gof(ks, 0.5)
        mean = float(ks.mean())
        tol = 3.0 * math.sqrt(ks.var(ddof=1) / n)
        good = pval > KS_LEVEL and abs(mean - 2.0) <= tol
        ok &= good
        measured[name] = {"chi2_p": pval, "mean": mean, "tol": tol}
        parts.append(f"{name} mean={mean:.4f}±{tol:.4f} chi2 p={pval:.3g}")
    return CheckResult("C1", "geometric runtime law", ok, measured,
                       "chi2 p>0.001 over 15 bins; |mean-2|<=3 sqrt(Var/n)", "; ".join(parts))


def check_c2(scale: float = 1.0) -> CheckResult:
    n = _n(100_000, scale)
    measured, ok, parts = {}, True, []
    for tag, pair, target in ((0, awgn_fixture(), 2.0),
                              (1, narrow_fixture(), None)):
        if target is None:
            target = sup_ratio_numeric(pair)
        stretch = solve_stretch(pair)
        ks = [gprs_sample(pair, stretch, s).steps for s in _seeds(2, tag, n)]
        mean, se = _mean_se(ks)
        good = abs(mean - target) <= 3.0 * se
        ok &= good
        measured[pair.label] = {"mean": mean, "se": se, "sup_r": target}
        parts.append(f"{pair.label} E[K]={mean:.4f}±{se:.4f} vs {target:.4f}")
    return CheckResult("C2", "GPRS sample complexity", ok, measured, "within 3 SE", "; ".join(parts))


def check_c3(scale: float = 1.0) -> CheckResult:
    pair = awgn_fixture()
    stretch = solve_stretch(pair)
    n = _n(10_000, scale)
    measured, ok, parts = {}, True, []
    for j in (1, 2, 4, 8):
        for name, run in (("astar", lambda s: astar_parallel(pair, 2.0, j, s)),
                          ("gprs", lambda s: gprs_parallel(pair, stretch, j, s))):
            totals = [run(s).steps for s in _seeds(3, 10 * j + (name == "gprs"), n)]
            mean, se = _mean_se(totals)
            good = abs(mean - (2.0 + j - 1)) <= 3.0 * se
            ok &= good
            measured[f"{name}-J{j}"] = {"mean": mean, "se": se, "expected": 1.0 + j}
            parts.append(f"{name} J={j} {mean:.3f}±{se:.3f}")
    return CheckResult("C3", "parallel totals", ok, measured, "within 3 SE of M+J-1", "; ".join(parts))


def check_c4(scale: float = 1.0) -> CheckResult:
    n = _n(10_000, scale)
    measured, ok, failures = {}, True, []
    fixtures = (identity_fixture(), awgn_fixture(), narrow_fixture())
    for f_idx, pair in enumerate(fixtures):
        reference = target_reference(pair, n, fold_in(BASE_SEED ^ 0xA5A5, f_idx))
        for s_idx, (name, run) in enumerate(samplers_for(pair).items()):
            seeds = _seeds(4, 100 * f_idx + s_idx, n)
            draws = np.array([run(s).sample for s in seeds])
            pval = float(stats.ks_2samp(draws, reference).pvalue)
            measured[f"{pair.label}/{name}"] = pval
            if not pval > KS_LEVEL:
                ok = False
                failures.append(f"{pair.label}/{name} p={pval:.3g}")
    worst = min(measured, key=measured.get)
    detail = f"{len(measured)} cases, min p={measured[worst]:.3g} ({worst})"
    if failures:
        detail += "; failing: " + ", ".join(failures)
    return CheckResult("C4", "exactness (two-sample KS)", ok, measured, "p > 0.001", detail)


def check_c5(scale: float = 1.0) -> CheckResult:
    trials = _n(1000, scale)
    config = SweepConfig(experiment="awgn", trials=trials, seed=fold_in(BASE_SEED, 5),
                         grid=[1.0, 4.0, 8.0], algorithms=("astar", "gprs"))
    rows = run_awgn_sweep(config)
    measured, ok, parts = {}, True, []
    for row in rows:
        mi = float(row["setting"].split("=")[1])
        bound = mi + math.log2(mi + 2.0) + 3.0
        mean = row["bits_mean"]
        good = mean <= bound + 0.2
        tight = True
        if mi == 4.0:
            tight = bound - mean <= 1.5
            good &= tight
        ok &= good
        measured[f"{row['algorithm']}@{mi:g}"] = {"bits_mean": mean, "bits_se": row["bits_se"], "bound": bound}
        parts.append(f"{row['algorithm']} I={mi:g}: {mean:.3f} vs {bound:.3f}"
                     + ("" if mi != 4.0 else f" (gap {bound - mean:.3f}{'' if tight else ' > 1.5'})"))
    return CheckResult("C5", "A*/GPRS index codelength", ok, measured,
                       "mean <= I+lb(I+2)+3.2; gap <= 1.5 at I=4", "; ".join(parts))


GRID = (0.5, 1.0, 2.0, 4.0, 7.0, 10.0)


def bnb_grid_runs(scale: float = 1.0) -> dict:
    """BnB runs on the six-point divergence grid, shared by C6 and C7."""
    n = _n(10_000, scale)
    out = {}
    for i, lb_m in enumerate(GRID):
        pair = centred_gaussian_pair(lb_m)
        runs = [bnb_astar(pair, pair.sup_bound, s) for s in _seeds(6, i, n)]
        out[("bnb-astar", lb_m)] = (pair, runs)
    for i, kappa in enumerate(GRID):
        pair = make_fixed_kl_pair(kappa, kappa + 2.0)
        stretch = solve_stretch(pair)
        runs = [bnb_gprs(pair, stretch, s) for s in _seeds(6, 100 + i, n)]
        out[("bnb-gprs", kappa)] = (pair, runs)
    return out


def check_c6(scale: float = 1.0, runs: dict | None = None) -> CheckResult:
    runs = runs if runs is not None else bnb_grid_runs(scale)
    measured, ok, parts = {}, True, []
    for (alg, x), (pair, results) in runs.items():
        mean, se = _mean_se([r.steps for r in results])
        bound = 2.26 * x + 4.52 if alg == "bnb-astar" else 2.26 * x + 9.66
        good = 1.0 <= mean <= bound
        ok &= good
        measured[f"{alg}@{x:g}"] = {"mean": mean, "se": se, "bound": bound}
        parts.append(f"{alg}@{x:g} {mean:.2f}<={bound:.2f}{'' if good else ' !'}")
    return CheckResult("C6", "branch-and-bound runtime bounds", ok, measured,
                       "1 <= mean <= bound", "; ".join(parts))


def check_c7(scale: float = 1.0, runs: dict | None = None) -> CheckResult:
    runs = runs if runs is not None else bnb_grid_runs(scale)
    slack = (1.0 + EULER_GAMMA) * LOG2E
    measured, ok, parts = {}, True, []
    for (alg, x), (pair, results) in runs.items():
        info = [-math.log2(r.bound_mass) for r in results]
        mean, se = _mean_se(info)
        kl = kl_divergence(pair)
        bound = kl + 3.0 * se + (slack if alg == "bnb-gprs" else 0.0)
        good = mean <= bound
        ok &= good
        measured[f"{alg}@{x:g}"] = {"mean": mean, "se": se, "kl": kl, "bound": bound}
        parts.append(f"{alg}@{x:g} {mean:.3f}<={bound:.3f}{'' if good else ' !'}")
    return CheckResult("C7", "bound self-information", ok, measured,
                       "mean -lb P(B) <= D_KL (+(1+gamma) lb e for GPRS) + 3 SE", "; ".join(parts))


def check_c8(scale: float = 1.0) -> CheckResult:
    grid = [2.0, 5.0, 10.0, 15.0, 20.0, 25.0]
    trials = _n(1000, scale)
    config = SweepConfig(experiment="fixedkl", trials=trials, seed=fold_in(BASE_SEED, 8),
                         grid=grid, algorithms=("bnb-astar", "bnb-gprs"), kappa=2.0)
    infeasible = ""
    try:
        rows = run_fixedkl_sweep(config)
    except ValueError as exc:
        infeasible = str(exc)
        feasible = []
        for d in grid:
            try:
                make_fixed_kl_pair(2.0, d)
                feasible.append(d)
            except ValueError:
                pass
        config.grid = feasible
        rows = run_fixedkl_sweep(config)
    means = {(r["algorithm"], float(r["setting"].split("=")[1])): r["steps_mean"] for r in rows}
    gprs = [v for (a, _), v in means.items() if a == "bnb-gprs"]
    spread = max(gprs) - min(gprs)
    ratio = means[("bnb-astar", 25.0)] / means[("bnb-astar", 5.0)]
    ok = not infeasible and spread <= 2.0 and ratio >= 2.0
    detail = f"GPRS range {spread:.3f} (<=2.0), A* 25/5 ratio {ratio:.2f} (>=2)"
    if infeasible:
        detail = f"{infeasible}; on feasible deltas {config.grid}: " + detail
    measured = {f"{a}@{d:g}": v for (a, d), v in means.items()}
    measured.update(gprs_range=spread, astar_ratio=ratio)
    return CheckResult("C8", "fixed-KL runtime contrast", ok, measured,
                       "GPRS range <= 2.0; A*(25) >= 2 A*(5)", detail)


def tv_equal_mass(samples, target, bins: int = 64) -> float:
    """Total variation between the binned samples and the target on equal-mass bins."""
    idx = np.minimum((np.array([target.cdf(y) for y in samples]) * bins).astype(int), bins - 1)
    freq = np.bincount(idx, minlength=bins) / len(samples)
    return 0.5 * float(np.abs(freq - 1.0 / bins).sum())


def check_c9(scale: float = 1.0, budget: int = 4096, eps: float = 0.25) -> CheckResult:
    pair = make_fixed_kl_pair(2.0, 5.0)
    stretch = solve_stretch(pair)
    n = _n(100_000, scale)
    samples, mismatches, compared = [], 0, 0
    for s in _seeds(9, 0, n):
        lim = gprs_limited(pair, stretch, budget, s)
        samples.append(lim.sample)
        if not lim.exhausted_budget:
            exact = gprs_sample(pair, stretch, s)
            compared += 1
            if exact.sample != lim.sample or exact.index != lim.index:
                mismatches += 1
    for s in _seeds(9, 1, max(20, n // 10)):
        lim = astar_limited(pair, pair.sup_bound, budget, s)
        if not lim.exhausted_budget:
            exact = astar_sample(pair, pair.sup_bound, s)
            compared += 1
            if exact.sample != lim.sample or exact.index != lim.index:
                mismatches += 1
    tv = tv_equal_mass(samples, pair.target)
    limit = eps + 3.0 * math.sqrt(64.0 / n)
    ok = tv <= limit and mismatches == 0
    return CheckResult("C9", "step-limited TV budget", ok,
                       {"tv": tv, "limit": limit, "compared": compared, "mismatches": mismatches,
                        "budget": budget, "budget_for_tv": budget_for_tv(kl_divergence(pair), eps)},
                       "TV <= eps + 3 sqrt(64/n); limited == exact when K <= m",
                       f"TV={tv:.4f}<={limit:.4f}, {mismatches} mismatches over {compared} seeds")


def mixed_pairs(count: int = 40, seed: int = 7):
    """Deterministic mix of Gaussian, Laplace and uniform pairs with bounded ratios."""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        kind = i % 3
        if kind == 0:
            pairs.append(make_pair(Gaussian(rng.normal(0, 1.5), rng.uniform(0.05, 0.95)),
                                   Gaussian(0.0, 1.0)))
        elif kind == 1:
            pairs.append(make_pair(Laplace(rng.normal(0, 1.0), rng.uniform(0.05, 0.95)),
                                   Laplace(0.0, 1.0)))
        else:
            lo = rng.uniform(-1.0, 0.9)
            hi = lo + rng.uniform(0.01, 1.0 - lo)
            pairs.append(make_pair(Uniform(lo, hi), Uniform(-1.0, 1.0)))
    return pairs


def check_c10(scale: float = 1.0) -> CheckResult:
    measured, ok, parts = {}, True, []
    for s in (0.2, 0.5, 0.8):
        pair = make_pair(Laplace(0.0, s), Laplace(0.0, 1.0))
        err = abs(csd(pair) - laplace_csd_closed_form(s))
        ok &= err <= 1e-6
        measured[f"laplace_err@{s:g}"] = err
    parts.append(f"Laplace max err {max(v for k, v in measured.items()):.2e}")
    violations = 0
    for pair in mixed_pairs():
        kl = kl_divergence(pair)
        value = csd(pair)
        if not (kl - 1e-9 <= value <= kl + math.log2(kl + 1.0) + 1.0 + 1e-9):
            violations += 1
    ok &= violations == 0
    measured["sandwich_violations"] = violations
    parts.append(f"sandwich violations {violations}/40")
    dims = [1, 2, 4, 8, 16, 32, 64]
    gaps = [csd_gap_product_gaussian(1.0, 0.25, d) for d in dims]
    slope = float(np.polyfit(np.log2(dims), gaps, 1)[0])
    ok &= 0.4 <= slope <= 0.6
    measured["slope"] = slope
    parts.append(f"gap slope {slope:.3f}")
    return CheckResult("C10", "divergence numerics", ok, measured,
                       "1e-6 bits; sandwich; slope in [0.4, 0.6]", "; ".join(parts))


def check_c11(scale: float = 1.0) -> CheckResult:
    cases = _n(1000, scale)
    rng = np.random.default_rng(11)
    failures = {}

    bad = 0
    for _ in range(cases):
        n = int(rng.integers(1, 2**40)) if rng.random() < 0.5 else int(rng.integers(1, 64))
        alpha = float(rng.uniform(1.05, 3.0))
        r = zeta_encode(n, alpha).reader()
        bad += zeta_decode(r, alpha) != n or not r.exhausted
    failures["zeta"] = bad

    bad = 0
    for _ in range(cases):
        n = int(rng.integers(1, 2**62))
        r = elias_gamma_encode(n).reader()
        bad += elias_gamma_decode(r) != n or not r.exhausted
    failures["gamma"] = bad

    bad = 0
    for _ in range(cases):
        depth = int(rng.integers(0, 40))
        probs = [float(p) for p in rng.uniform(0.01, 0.99, depth)]
        path = tuple(int(b) for b in rng.integers(0, 2, depth))
        code = encode_heap_path(probs, path)
        r = BitString(code.bits + "1" * 5).reader()
        bad += decode_heap_path(r, depth, lambda d, _p: probs[d]) != path or r.pos != len(code)
    failures["heap_path"] = bad

    pair = narrow_fixture()
    stretch = solve_stretch(pair)
    alpha = bnb_gprs_depth_alpha(kl_divergence(pair))
    bad = 0
    for s in _seeds(11, 0, cases):
        run = bnb_gprs(pair, stretch, s)
        depth, path = decode_bnb_run(encode_bnb_run(run, alpha).reader(), alpha, s)
        bad += decode_bnb(s, depth, path, pair) != run.sample
    failures["bnb_two_part"] = bad

    awgn = awgn_fixture()
    su_alpha = sorted_uniform_alpha(1.0)
    bad = 0
    for s in _seeds(11, 1, cases):
        code = sorted_uniform_encode(s, awgn, awgn.sup_bound, su_alpha)
        n, y = sorted_uniform_decode(code.bits.reader(), s, awgn.proposal, su_alpha)
        bad += n != code.index or y != code.sample
    failures["sorted_uniform"] = bad

    mi = 1.0
    sigma2 = awgn_sigma2_for_mi(mi)
    lengths, steps = [], []
    for s in _seeds(11, 2, _n(10_000, scale)):
        p = make_awgn_pair(source_symbol(s, sigma2), sigma2, 1.0)
        code = sorted_uniform_encode(s, p, p.sup_bound, su_alpha)
        lengths.append(len(code.bits))
        steps.append(code.index)
    rate = float(np.mean(lengths))
    c_prime = float(np.mean(steps))
    bound = mi + math.log2(mi + 1.0) + 2.0 * math.log2(math.log2(c_prime) + 1.0) + 8.31
    ok = all(v == 0 for v in failures.values()) and rate <= bound
    measured = {"failures": failures, "rate": rate, "bound": bound, "c_prime": c_prime}
    detail = (f"round-trip failures {sum(failures.values())}/{5 * cases}; "
              f"sorted-uniform rate {rate:.3f}<={bound:.3f} (C'={c_prime:.3f})")
    return CheckResult("C11", "coding round-trips", ok, measured,
                       "exact round-trips; rate <= I+lb(I+1)+2lb(lbC'+1)+8.31", detail)


def _time_calls(fn, reps: int) -> float:
    best = math.inf
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        best = min(best, time.perf_counter() - t0)
    return best / reps


def check_c12(scale: float = 1.0) -> CheckResult:
    cases = _n(1000, scale)
    measured, ok = {}, True
    mismatches = 0
    for pair in (awgn_fixture(), narrow_fixture()):
        stretch = solve_stretch(pair)
        for s in _seeds(12, 0, cases // 2):
            for run in (astar_sample(pair, pair.sup_bound, s), gprs_sample(pair, stretch, s)):
                mismatches += decode_global(s, run.index, pair.proposal) != run.sample
            b = bnb_gprs(pair, stretch, s)
            mismatches += decode_bnb(s, b.depth, b.path_bits, pair) != b.sample
            b = bnb_astar(pair, pair.sup_bound, s)
            mismatches += decode_bnb(s, b.depth, b.path_bits, pair) != b.sample
    ok &= mismatches == 0
    proposal = awgn_fixture().proposal
    t1 = _time_calls(lambda: decode_global(BASE_SEED, 1, proposal), 2000)
    t_big = _time_calls(lambda: decode_global(BASE_SEED, 10**6, proposal), 2000)
    ok &= t_big <= 10.0 * t1
    measured.update(mismatches=mismatches, t_n1=t1, t_n1e6=t_big)
    return CheckResult("C12", "decodability and O(1) decoding", ok, measured,
                       "exact; t(n=1e6) <= 10 t(n=1)",
                       f"{mismatches} mismatches; decode {t1 * 1e6:.2f}us at n=1, "
                       f"{t_big * 1e6:.2f}us at n=1e6")


CHECKS = {
    "C1": check_c1, "C2": check_c2, "C3": check_c3, "C4": check_c4,
    "C5": check_c5, "C6": check_c6, "C7": check_c7, "C8": check_c8,
    "C9": check_c9, "C10": check_c10, "C11": check_c11, "C12": check_c12,
}


def run_validation(scale: float = 1.0, only=None) -> dict:
    """Run the acceptance checks and return a JSON-ready report."""
    selected = list(only) if only else list(CHECKS)
    results = []
    shared = None
    for cid in selected:
        t0 = time.perf_counter()
        if cid in ("C6", "C7"):
            shared = shared if shared is not None else bnb_grid_runs(scale)
            res = CHECKS[cid](scale, runs=shared)
        else:
            res = CHECKS[cid](scale)
        entry = asdict(res)
        entry["seconds"] = round(time.perf_counter() - t0, 3)
        results.append(entry)
    return {"scale": scale, "base_seed": BASE_SEED,
            "passed": all(r["passed"] for r in results), "criteria": results}
