"""Global selection samplers over a unit-rate Poisson process.

Every sampler examines the arrivals of the process keyed by ``seed`` in time
order and returns the selected arrival's location together with its index,
so that a decoder holding the seed can rebuild the sample from the index.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .distributions import INF
from .divergences import StretchFunction
from .poisson import (
    SLOT_ACCEPT,
    SLOT_LOCATION,
    SLOT_TIME,
    _TO_UNIT,
    GlobalProcess,
    arrival_location,
    fold_in,
    thread_key,
)

_BOUND_SLACK = 1.0 + 1e-9


@dataclass(frozen=True)
class RunResult:
    sample: float
    index: int
    steps: int
    acceptance_uniform: float | None = None
    thread_tag: tuple[int, int] | None = None
    thread_steps: tuple[int, ...] | None = None
    exhausted_budget: bool = False


def _check_bound(r: float, bound: float) -> None:
    if r > bound * _BOUND_SLACK:
        raise ValueError(f"invalid bound: ratio {r} exceeds M = {bound}")


def rejection_sample(pair, M: float, seed: int) -> RunResult:
    """Return the first arrival with U_n < r(Y_n) / M."""
    if not M >= 1.0:
        raise ValueError("invalid bound: M must be at least 1")
    quantile = pair.proposal.quantile
    log_ratio = pair.log_ratio
    n = 0
    while True:
        n += 1
        k = fold_in(seed, n)
        y = quantile(((fold_in(k, SLOT_LOCATION) >> 11) + 0.5) * _TO_UNIT)
        r = math.exp(log_ratio(y))
        _check_bound(r, M)
        u = ((fold_in(k, SLOT_ACCEPT) >> 11) + 0.5) * _TO_UNIT
        if u < r / M:
            return RunResult(y, n, n, acceptance_uniform=u)


def _astar(pair, M: float, seed: int, budget: float) -> RunResult:
    if not M >= 1.0:
        raise ValueError("invalid bound: M must be at least 1")
    quantile = pair.proposal.quantile
    log_ratio = pair.log_ratio
    best_u = INF
    best_n = 0
    best_y = math.nan
    t = 0.0
    n = 0
    while True:
        n += 1
        k = fold_in(seed, n)
        t -= math.log(((fold_in(k, SLOT_TIME) >> 11) + 0.5) * _TO_UNIT)
        y = quantile(((fold_in(k, SLOT_LOCATION) >> 11) + 0.5) * _TO_UNIT)
        r = math.exp(log_ratio(y))
        _check_bound(r, M)
        if r > 0.0:
            shifted = t / r
            if shifted < best_u:
                best_u, best_n, best_y = shifted, n, y
        if best_u < t / M:
            # the arrival that certifies termination is not counted as a step
            return RunResult(best_y, best_n, n - 1)
        if n >= budget:
            return RunResult(best_y, best_n, n, exhausted_budget=True)


def astar_sample(pair, M: float, seed: int) -> RunResult:
    """A* sampling: keep the arrival minimising T_n / r(Y_n), stop once that beats T_n / M."""
    return _astar(pair, M, seed, INF)


def astar_limited(pair, M: float, budget: int | float, seed: int) -> RunResult:
    """A* restricted to the first ``budget`` arrivals (``math.inf`` for no limit)."""
    if not budget >= 1:
        raise ValueError("budget must be at least 1")
    return _astar(pair, M, seed, budget)


def _gprs(pair, stretch: StretchFunction, seed: int, budget: float) -> RunResult:
    quantile = pair.proposal.quantile
    log_ratio = pair.log_ratio
    sha = stretch.sha
    t = 0.0
    n = 0
    while True:
        n += 1
        k = fold_in(seed, n)
        t -= math.log(((fold_in(k, SLOT_TIME) >> 11) + 0.5) * _TO_UNIT)
        y = quantile(((fold_in(k, SLOT_LOCATION) >> 11) + 0.5) * _TO_UNIT)
        # accept below the stretched graph, tested in shrink space
        if math.exp(log_ratio(y)) > sha(t):
            return RunResult(y, n, n)
        if n >= budget:
            return RunResult(y, n, n, exhausted_budget=True)


def gprs_sample(pair, stretch: StretchFunction, seed: int) -> RunResult:
    """Greedy Poisson rejection sampling: first arrival with r(Y_n) above sha(T_n)."""
    return _gprs(pair, stretch, seed, INF)


def gprs_limited(pair, stretch: StretchFunction, budget: int | float, seed: int) -> RunResult:
    """GPRS that falls back to the ``budget``-th arrival if nothing was accepted by then."""
    if not budget >= 1:
        raise ValueError("budget must be at least 1")
    return _gprs(pair, stretch, seed, budget)


def _thread_procs(pair, threads: int, seed: int) -> list[GlobalProcess]:
    if threads < 1:
        raise ValueError("need at least one thread")
    return [GlobalProcess(thread_key(seed, j), pair.proposal, rate=1.0 / threads)
            for j in range(1, threads + 1)]


def astar_parallel(pair, M: float, threads: int, seed: int) -> RunResult:
    """A* over ``threads`` superposed processes of rate 1/J sharing the running minimum.

    Arrivals are processed in global time order, which realises immediate
    propagation of the shared state between threads.  ``thread_steps`` holds
    raw per-thread counts; ``steps`` leaves out the single arrival whose
    examination ends the run, as in the serial sampler.
    """
    if not M >= 1.0:
        raise ValueError("invalid bound: M must be at least 1")
    procs = _thread_procs(pair, threads, seed)
    counts = [0] * threads
    heap = []
    for j, proc in enumerate(procs):
        a = proc.next_arrival()
        heap.append((a.time, j, a))
    heapq.heapify(heap)
    best_u = INF
    best = (0, 0, math.nan)
    while heap:
        t, j, a = heapq.heappop(heap)
        counts[j] += 1
        r = pair.ratio(a.location)
        _check_bound(r, M)
        if r > 0.0 and t / r < best_u:
            best_u = t / r
            best = (j + 1, a.index, a.location)
        if best_u < t / M:
            continue
        nxt = procs[j].next_arrival()
        heapq.heappush(heap, (nxt.time, j, nxt))
    j_star, n_star, y = best
    return RunResult(y, n_star, sum(counts) - 1, thread_tag=(j_star, n_star),
                     thread_steps=tuple(counts))


def gprs_parallel(pair, stretch: StretchFunction, threads: int, seed: int) -> RunResult:
    """GPRS over ``threads`` superposed processes sharing the earliest acceptance time."""
    procs = _thread_procs(pair, threads, seed)
    counts = [0] * threads
    heap = []
    for j, proc in enumerate(procs):
        a = proc.next_arrival()
        heap.append((a.time, j, a))
    heapq.heapify(heap)
    t_star = INF
    best = (0, 0, math.nan)
    sha = stretch.sha
    while heap:
        t, j, a = heapq.heappop(heap)
        counts[j] += 1
        if t_star < t:
            continue
        if pair.ratio(a.location) > sha(t):
            t_star = t
            best = (j + 1, a.index, a.location)
            continue
        nxt = procs[j].next_arrival()
        heapq.heappush(heap, (nxt.time, j, nxt))
    j_star, n_star, y = best
    return RunResult(y, n_star, sum(counts), thread_tag=(j_star, n_star), thread_steps=tuple(counts))


def budget_for_tv(kl_bits: float, eps: float) -> int:
    """Step budget ceil(2^((D_KL + 1) / eps)) for a total-variation error of eps."""
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    exponent = (kl_bits + 1.0) / eps
    if exponent >= 63.0:
        raise OverflowError("budget overflow")
    return math.ceil(2.0**exponent)


def decode_global(seed: int, index: int, proposal) -> float:
    """Rebuild the sample of a serial global run from its index in O(1)."""
    return arrival_location(seed, index, proposal)


def decode_parallel(seed: int, thread: int, index: int, proposal) -> float:
    return arrival_location(thread_key(seed, thread), index, proposal)
