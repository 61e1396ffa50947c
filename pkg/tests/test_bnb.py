import math

import numpy as np
import pytest
from scipy import stats

from recsim.bnb import bnb_astar, bnb_gprs, decode_bnb, heap_index, replay_branch
from recsim.distributions import (
    LOG2E,
    Gaussian,
    Laplace,
    interval_mass,
    make_awgn_pair,
    make_fixed_kl_pair,
    make_pair,
    quantile_restricted,
)
from recsim.divergences import solve_stretch
from recsim.poisson import branch_draws, trial_seed

NARROW = make_pair(Gaussian(1.0, 0.0625), Gaussian(0.0, 1.0))
LAPLACE = make_pair(Laplace(0.4, 0.2), Laplace(0.0, 1.0))


@pytest.fixture(scope="module")
def stretches():
    return {"narrow": solve_stretch(NARROW), "laplace": solve_stretch(LAPLACE)}


def _runs(pair, stretch, seeds):
    for s in seeds:
        yield bnb_astar(pair, pair.sup_bound, s)
        yield bnb_gprs(pair, stretch, s)


@pytest.mark.parametrize("bits, index", [((), 1), ((0,), 2), ((1,), 3), ((0, 1), 5), ((1, 1, 0), 14)])
def test_heap_index(bits, index):
    assert heap_index(bits) == index


def test_heap_index_is_exact_for_deep_paths():
    assert heap_index((0,) * 100) == 2**100
    assert heap_index((1,) * 100) == 2**101 - 1


def test_identity_pair_stops_at_the_root():
    pair = make_pair(Gaussian(0.0, 1.0), Gaussian(0.0, 1.0))
    stretch = solve_stretch(pair)
    for s in range(20):
        a = bnb_astar(pair, 1.0, s)
        g = bnb_gprs(pair, stretch, s)
        assert a.depth == g.depth == 0
        assert a.steps == g.steps == 1
        assert a.heap_index == 1
        assert a.bound_mass == 1.0


@pytest.mark.parametrize("name", ["narrow", "laplace"])
def test_decode_replays_the_sample(name, stretches):
    pair = NARROW if name == "narrow" else LAPLACE
    for run, s in zip(_runs(pair, stretches[name], range(60)), [s for s in range(60) for _ in (0, 1)]):
        assert decode_bnb(s, run.depth, run.path_bits, pair) == run.sample
        assert replay_branch(s, run.path_bits, pair.proposal) == run.sample


def test_branch_contains_the_mode_and_mass_is_the_product(stretches):
    for s in range(60):
        for run in (bnb_astar(NARROW, NARROW.sup_bound, s), bnb_gprs(NARROW, stretches["narrow"], s)):
            lo, hi = -math.inf, math.inf
            for d, bit in enumerate(run.path_bits):
                _, u = branch_draws(s, d)
                assert u == run.split_uniforms[d]
                y = quantile_restricted(NARROW.proposal, lo, hi, u)
                lo, hi = (y, hi) if bit else (lo, y)
                assert lo < NARROW.mode_point <= hi
            assert lo <= run.sample <= hi
            fractions = run.per_step_fraction[:run.depth]
            assert run.bound_mass == pytest.approx(math.prod(fractions), rel=1e-12)
            assert run.bound_mass == pytest.approx(interval_mass(NARROW.proposal, lo, hi), rel=1e-6)
            for f, u, bit in zip(fractions, run.split_uniforms, run.path_bits):
                assert f == (1.0 - u if bit else u)


def test_steps_follow_depth(stretches):
    for s in range(50):
        a = bnb_astar(NARROW, NARROW.sup_bound, s)
        g = bnb_gprs(NARROW, stretches["narrow"], s)
        assert a.steps >= a.depth
        assert g.steps == g.depth + 1


def test_corrupt_paths_are_rejected(stretches):
    hits = 0
    for s in range(40):
        run = bnb_gprs(NARROW, stretches["narrow"], s)
        if run.depth == 0:
            continue
        hits += 1
        flipped = list(run.path_bits)
        flipped[-1] ^= 1
        with pytest.raises(ValueError, match="corrupt path"):
            decode_bnb(s, run.depth, tuple(flipped), NARROW)
        with pytest.raises(ValueError, match="corrupt path"):
            decode_bnb(s, run.depth + 1, run.path_bits, NARROW)
    assert hits > 0


def test_invalid_bound():
    with pytest.raises(ValueError, match="invalid bound"):
        bnb_astar(NARROW, 0.5, 1)
    with pytest.raises(ValueError, match="invalid bound"):
        for s in range(50):
            bnb_astar(NARROW, 1.5, s)


def test_depth_limit():
    pair = make_awgn_pair(0.0, 2.0**16 - 1.0)
    with pytest.raises(RuntimeError, match="depth limit"):
        for s in range(20):
            bnb_astar(pair, pair.sup_bound, s, max_depth=1)


@pytest.mark.parametrize("name", ["narrow", "laplace"])
def test_samples_are_exact(name, stretches):
    pair = NARROW if name == "narrow" else LAPLACE
    t = pair.target
    cdf = stats.norm(t.mean, t.std).cdf if name == "narrow" else stats.laplace(t.location, t.scale).cdf
    a = [bnb_astar(pair, pair.sup_bound, trial_seed(9, i)).sample for i in range(2000)]
    g = [bnb_gprs(pair, stretches[name], trial_seed(9, i)).sample for i in range(2000)]
    assert stats.kstest(a, cdf).pvalue > 1e-3
    assert stats.kstest(g, cdf).pvalue > 1e-3


def _mean_se(values):
    arr = np.asarray(values, dtype=float)
    return arr.mean(), arr.std(ddof=1) / math.sqrt(arr.size)


def test_astar_runtime_and_bound_information():
    awgn = make_awgn_pair(0.0, 3.0)
    steps = [bnb_astar(awgn, 2.0, trial_seed(31, i)).steps for i in range(10_000)]
    assert np.mean(steps) <= 3.0 / (LOG2E - 1.0)
    info = [-math.log2(bnb_astar(NARROW, NARROW.sup_bound, trial_seed(32, i)).bound_mass)
            for i in range(10_000)]
    mean, se = _mean_se(info)
    assert mean <= 2.045 + 3 * se


def test_gprs_runtime_on_the_narrow_pair(stretches):
    steps = [bnb_gprs(NARROW, stretches["narrow"], trial_seed(33, i)).steps for i in range(10_000)]
    assert np.mean(steps) <= 2.26 * 2.045 + 9.66


def test_fixed_kl_sweep_separates_the_samplers():
    # delta = 2 admits no such pair for kappa = 2, so the sweep starts at 3
    deltas = [3, 5, 10, 15, 20, 25]
    a_means, g_means = [], []
    for d in deltas:
        pair = make_fixed_kl_pair(2.0, d)
        stretch = solve_stretch(pair)
        a_means.append(np.mean([bnb_astar(pair, pair.sup_bound, trial_seed(d, i)).steps for i in range(1000)]))
        g_means.append(np.mean([bnb_gprs(pair, stretch, trial_seed(d, i)).steps for i in range(1000)]))
    assert all(1.0 <= g <= 14.3 for g in g_means)
    assert np.polyfit(deltas, a_means, 1)[0] >= 0.5
    assert np.polyfit(deltas, g_means, 1)[0] <= 0.1


def test_decode_touches_each_level_once(monkeypatch, stretches):
    import recsim.bnb as bnb_module

    calls = []
    real = bnb_module.branch_draws

    def counting(key, depth):
        calls.append(depth)
        return real(key, depth)

    for s in range(20):
        run = bnb_gprs(NARROW, stretches["narrow"], s)
        monkeypatch.setattr(bnb_module, "branch_draws", counting)
        calls.clear()
        decode_bnb(s, run.depth, run.path_bits, NARROW)
        monkeypatch.setattr(bnb_module, "branch_draws", real)
        assert calls == list(range(run.depth + 1))
