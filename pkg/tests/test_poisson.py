import math

import numpy as np
import pytest
from scipy import stats

from recsim.distributions import Gaussian, Uniform
from recsim.poisson import (
    BranchState,
    GlobalProcess,
    SeedStream,
    acceptance_uniform,
    arrival_location,
    branch_draws,
    fold_in,
    log_domain_add_arrival,
    next_branch_arrival,
    parse_seed,
    split_on_sample,
    thread_key,
    trial_seed,
    uniform_at,
)


def _splitmix64(state, count):
    """Reference SplitMix64 stream, written out independently of the package."""
    mask = (1 << 64) - 1
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


def test_fold_in_is_splitmix64_from_zero():
    # the key 0 mixes to state 0, so fold_in(0, n) is the n-th output of the seed-0 stream
    assert [fold_in(0, n) for n in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    assert [fold_in(0, n) for n in range(64)] == _splitmix64(0, 64)


def test_uniforms_are_open_unit_and_uniform():
    u = np.array([uniform_at(12345, i) for i in range(20000)])
    assert u.min() > 0.0 and u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_streams_are_independent_of_order():
    key = 0xDEADBEEF
    forward = [uniform_at(key, i) for i in range(50)]
    backward = [uniform_at(key, i) for i in reversed(range(50))][::-1]
    assert forward == backward


def test_seed_stream():
    s = SeedStream(7)
    u0, s1 = s.draw_uniform()
    u1, _ = s1.draw_uniform()
    assert (u0, u1) == (uniform_at(7, 0), uniform_at(7, 1))
    e, _ = SeedStream(7).draw_exponential(rate=4.0)
    assert e == pytest.approx(-math.log(u0) / 4.0)
    with pytest.raises(ValueError):
        s.draw_exponential(0.0)


def test_derived_keys_differ():
    trials = [trial_seed(1, i) for i in range(1000)]
    assert len(set(trials)) == 1000
    threads = {thread_key(s, j) for s in trials[:50] for j in range(1, 21)}
    assert len(threads) == 1000
    assert not threads & set(trials)


@pytest.mark.parametrize("text, value", [("0", 0), ("42", 42), ("0xff", 255),
                                         ("0xFFFFFFFFFFFFFFFF", 2**64 - 1)])
def test_parse_seed(text, value):
    assert parse_seed(text) == value


def test_parse_seed_rejects_out_of_range():
    with pytest.raises(ValueError):
        parse_seed(str(2**64))
    with pytest.raises(ValueError):
        parse_seed("-1")


def test_random_access_matches_sequential():
    proposal = Gaussian(0.5, 2.0)
    proc = GlobalProcess(99, proposal)
    arrivals = [proc.next_arrival() for _ in range(200)]
    for a in arrivals:
        assert arrival_location(99, a.index, proposal) == a.location
    times = [a.time for a in arrivals]
    assert all(b > a for a, b in zip(times, times[1:]))
    with pytest.raises(ValueError):
        arrival_location(99, 0, proposal)


def test_arrival_statistics():
    proposal = Gaussian(0.0, 1.0)
    gaps, locs = [], []
    for s in range(200):
        proc = GlobalProcess(trial_seed(3, s), proposal, rate=2.0)
        prev = 0.0
        for a in (proc.next_arrival() for _ in range(50)):
            gaps.append(a.time - prev)
            locs.append(a.location)
            prev = a.time
    assert stats.kstest(np.array(gaps), stats.expon(scale=0.5).cdf).pvalue > 1e-3
    assert stats.kstest(np.array(locs), "norm").pvalue > 1e-3


def test_log_domain_process_agrees_with_linear():
    proposal = Gaussian(0.0, 1.0)
    lin = GlobalProcess(5, proposal)
    log = GlobalProcess(5, proposal, log_domain=True)
    for _ in range(100):
        a, b = lin.next_arrival(), log.next_arrival()
        assert a.location == b.location
        assert b.time == pytest.approx(a.time, rel=1e-12)
        assert math.exp(b.log_time) == pytest.approx(a.time, rel=1e-12)


def test_log_domain_add_is_stable():
    assert log_domain_add_arrival(-math.inf, 2.0) == pytest.approx(math.log(2.0))
    assert log_domain_add_arrival(1000.0, 1.0) == pytest.approx(1000.0)
    assert log_domain_add_arrival(math.log(3.0), 4.0) == pytest.approx(math.log(7.0))
    with pytest.raises(ValueError):
        log_domain_add_arrival(0.0, 0.0)


def test_acceptance_uses_its_own_slot():
    assert acceptance_uniform(11, 4) == uniform_at(fold_in(11, 4), 2)
    assert acceptance_uniform(11, 4) != uniform_at(fold_in(11, 4), 1)


def test_branch_arrival_is_restricted_and_rescaled():
    proposal = Gaussian(0.0, 1.0)
    state = BranchState()
    arrival, adv, u = next_branch_arrival(state, 21, proposal)
    e, u_ref = branch_draws(21, 0)
    assert u == u_ref
    assert arrival.time == pytest.approx(e)
    child = split_on_sample(adv, arrival.location, 10.0, proposal, u)
    assert child.depth == 1
    assert child.path_bits == ((1,) if arrival.location < 10.0 else (0,))
    assert child.lo <= 10.0 <= child.hi
    assert child.mass == pytest.approx(1.0 - u if child.path_bits == (1,) else u)
    arrival2, _, _ = next_branch_arrival(child, 21, proposal)
    assert child.lo <= arrival2.location <= child.hi
    e2, _ = branch_draws(21, 1)
    assert arrival2.time == pytest.approx(arrival.time + e2 / child.mass)


@pytest.mark.parametrize("log_prev, delta, expected", [
    (-math.inf, 0.5, math.log(0.5)),
    (0.0, 1.0, math.log(2.0)),
    (700.0, 1.0, 700.0),
])
def test_log_domain_add_examples(log_prev, delta, expected):
    assert log_domain_add_arrival(log_prev, delta) == pytest.approx(expected, abs=1e-15)


def test_cumulative_times():
    t = -math.inf
    times = []
    for delta in (0.5, 1.2):
        t = log_domain_add_arrival(t, delta)
        times.append(math.exp(t))
    assert times == pytest.approx([0.5, 1.7], abs=1e-15)


def test_tenth_arrival_time_has_gamma_mean():
    t10 = []
    for s in range(10_000):
        proc = GlobalProcess(trial_seed(6, s), Gaussian(0.0, 1.0))
        for _ in range(10):
            a = proc.next_arrival()
        t10.append(a.time)
    assert abs(np.mean(t10) - 10.0) <= 4 * math.sqrt(10 / 10_000)


def test_distinct_seeds_give_distinct_locations():
    g = Gaussian(0.0, 1.0)
    assert arrival_location(1, 1, g) == GlobalProcess(1, g).next_arrival().location
    assert arrival_location(1, 7, g) != arrival_location(2, 7, g)


def test_branch_time_increment_scales_with_mass():
    g = Gaussian(0.0, 1.0)
    state = BranchState(lo=-math.inf, hi=0.0, depth=0, time=0.0, mass=0.5)
    e, _ = branch_draws(3, 0)
    arrival, _, _ = next_branch_arrival(state, 3, g)
    assert arrival.time == pytest.approx(e / 0.5)
    gaps = [next_branch_arrival(BranchState(hi=-0.6744897501960817, mass=0.25), trial_seed(2, i), g)[0].time
            for i in range(10_000)]
    assert abs(np.mean(gaps) - 4.0) <= 4 * (4 / 100)


def test_full_line_branch_matches_global_increment_law():
    g = Gaussian(0.0, 1.0)
    branch = [next_branch_arrival(BranchState(), trial_seed(4, i), g)[0].time for i in range(5000)]
    assert stats.kstest(branch, "expon").pvalue > 1e-3


def test_split_examples():
    child = split_on_sample(BranchState(), 0.8, 0.0, Gaussian(0.0, 1.0))
    assert (child.lo, child.hi, child.path_bits) == (-math.inf, 0.8, (0,))
    u = Uniform(0.0, 1.0)
    child = split_on_sample(BranchState(lo=0.0, hi=1.0), 0.3, 0.9, u)
    assert (child.lo, child.hi, child.path_bits) == (0.3, 1.0, (1,))
    assert child.mass == pytest.approx(0.7)
    with pytest.raises(ValueError):
        split_on_sample(BranchState(lo=0.0, hi=1.0), 2.0, 0.5, u)


@pytest.mark.parametrize("c", [0.5, 0.1, 0.8])
def test_retained_fraction_law(c):
    # with the mode at the c-quantile the kept fraction is U if U >= c, else 1 - U, so
    # E[-ln fraction] = (1 - c + c ln c) + (c + (1 - c) ln(1 - c)); at c = 1/2 this is 1 - ln 2
    expected = (1 - c + c * math.log(c)) + (c + (1 - c) * math.log(1 - c))
    g = Gaussian(0.0, 1.0)
    mode = g.quantile(c)
    fractions = []
    for i in range(10_000):
        _, u = branch_draws(trial_seed(12, i), 0)
        fractions.append(split_on_sample(BranchState(), g.quantile(u), mode, g, u).mass)
    neg_log = -np.log(fractions)
    assert abs(neg_log.mean() - expected) <= 4 * neg_log.std() / 100
