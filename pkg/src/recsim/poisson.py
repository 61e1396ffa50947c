"""Seed-addressable simulation of spatio-temporal Poisson processes.

Randomness comes from a counter-based generator: every value is a pure
function of ``(key, counter)``, so the n-th arrival of a process can be
rebuilt from the seed alone.  The keying is SplitMix64's indexed output:
``fold_in(key, n)`` is the n-th output of a SplitMix64 stream whose state is
the mixed key.  Codes are only decodable under this exact scheme.

Arrival ``n`` (1-based) of the process keyed by ``k`` draws from the key
``fold_in(k, n)``: sub-counter 0 gives the exponential time increment,
sub-counter 1 the location uniform and sub-counter 2 is reserved for the
acceptance uniform of rejection sampling.  Index 0 is never an arrival; its
key roots derived sub-streams such as the per-thread processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .distributions import INF, interval_mass, quantile_restricted

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_TO_UNIT = 2.0**-53

SLOT_TIME = 0
SLOT_LOCATION = 1
SLOT_ACCEPT = 2


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fold_in(key: int, n: int) -> int:
    """Derive the 64-bit key addressed by ``n`` under ``key``."""
    return _mix((_mix(key & MASK64) + (n + 1) * GAMMA) & MASK64)


def bits_to_uniform(z: int) -> float:
    """Map 64 random bits to a float strictly inside (0, 1)."""
    return ((z >> 11) + 0.5) * _TO_UNIT


def uniform_at(key: int, counter: int) -> float:
    return ((fold_in(key, counter) >> 11) + 0.5) * _TO_UNIT


def exponential_at(key: int, counter: int) -> float:
    return -math.log(((fold_in(key, counter) >> 11) + 0.5) * _TO_UNIT)


def parse_seed(text: str | int) -> int:
    """Accept a decimal or 0x-prefixed 64-bit seed."""
    if isinstance(text, int):
        value = text
    else:
        value = int(text.strip(), 0)
    if not 0 <= value <= MASK64:
        raise ValueError(f"seed {text!r} is not a 64-bit unsigned value")
    return value


@dataclass(frozen=True)
class SeedStream:
    """Immutable handle on a counter-based stream.

    ``draw_*`` return the value together with the advanced stream.
    """

    base_seed: int
    counter: int = 0

    def fold_in(self, n: int) -> "SeedStream":
        return SeedStream(fold_in(self.base_seed, n))

    def draw_uniform(self) -> tuple[float, "SeedStream"]:
        u = uniform_at(self.base_seed, self.counter)
        return u, SeedStream(self.base_seed, self.counter + 1)

    def draw_exponential(self, rate: float = 1.0) -> tuple[float, "SeedStream"]:
        if not rate > 0.0:
            raise ValueError("rate must be positive")
        u, nxt = self.draw_uniform()
        return -math.log(u) / rate, nxt


def trial_seed(base: int, i: int) -> int:
    """Seed of the i-th independent trial of an experiment."""
    return fold_in(fold_in(base, 0), i)


def thread_key(seed: int, j: int) -> int:
    """Key of the j-th (1-based) logical thread of a parallel run."""
    return fold_in(fold_in(seed, 0), j)


@dataclass(frozen=True)
class Arrival:
    index: int
    location: float
    time: float
    log_time: float = math.nan


class GlobalProcess:
    """Time-ordered arrivals of a Poisson process with mean measure rate * (P x Lebesgue)."""

    __slots__ = ("key", "proposal", "scale", "n", "time", "log_time", "log_domain")

    def __init__(self, key: int, proposal, rate: float = 1.0, log_domain: bool = False):
        self.key = key
        self.proposal = proposal
        self.scale = 1.0 / rate
        self.n = 0
        self.time = 0.0
        self.log_time = -INF
        self.log_domain = log_domain

    def __iter__(self):
        return self

    def __next__(self) -> Arrival:
        return self.next_arrival()

    def next_arrival(self) -> Arrival:
        self.n += 1
        k = fold_in(self.key, self.n)
        delta = -math.log(((fold_in(k, SLOT_TIME) >> 11) + 0.5) * _TO_UNIT) * self.scale
        y = self.proposal.quantile(((fold_in(k, SLOT_LOCATION) >> 11) + 0.5) * _TO_UNIT)
        if self.log_domain:
            self.log_time = log_domain_add_arrival(self.log_time, delta)
            self.time = math.exp(self.log_time)
            return Arrival(self.n, y, self.time, self.log_time)
        self.time += delta
        return Arrival(self.n, y, self.time)


def next_global_arrival(gen: GlobalProcess) -> Arrival:
    return gen.next_arrival()


def arrival_location(key: int, n: int, proposal) -> float:
    """Location of the n-th arrival, without simulating the earlier ones."""
    if n < 1:
        raise ValueError("arrival indices start at 1")
    k = fold_in(key, n)
    return proposal.quantile(((fold_in(k, SLOT_LOCATION) >> 11) + 0.5) * _TO_UNIT)


def acceptance_uniform(key: int, n: int) -> float:
    return uniform_at(fold_in(key, n), SLOT_ACCEPT)


def log_domain_add_arrival(log_t_prev: float, delta: float) -> float:
    """ln(exp(log_t_prev) + delta), stable for huge or empty ``log_t_prev``."""
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    if log_t_prev == -INF:
        return math.log(delta)
    log_d = math.log(delta)
    hi, lo = (log_t_prev, log_d) if log_t_prev >= log_d else (log_d, log_t_prev)
    return hi + math.log1p(math.exp(lo - hi))


@dataclass(frozen=True)
class BranchState:
    """One branch of the on-sample BSP tree.

    ``depth`` counts the splits so far, ``path_bits`` holds 0 for a kept left
    part (L, y] and 1 for a kept right part (y, R].
    """

    lo: float = -INF
    hi: float = INF
    depth: int = 0
    time: float = 0.0
    path_bits: tuple[int, ...] = ()
    mass: float = 1.0


def branch_draws(key: int, depth: int) -> tuple[float, float]:
    """(E, U) used by the arrival examined at ``depth`` of a branch process."""
    k = fold_in(key, depth + 1)
    e = -math.log(((fold_in(k, SLOT_TIME) >> 11) + 0.5) * _TO_UNIT)
    u = ((fold_in(k, SLOT_LOCATION) >> 11) + 0.5) * _TO_UNIT
    return e, u


def next_branch_arrival(state: BranchState, key: int, proposal) -> tuple[Arrival, BranchState, float]:
    """First arrival of the restricted process after ``state.time``.

    Returns the arrival, the state with its time advanced and the location
    uniform (which equals the left fraction of the split at this arrival).
    """
    if not state.mass > 1e-300:
        raise ValueError("branch exhausted")
    e, u = branch_draws(key, state.depth)
    t = state.time + e / state.mass
    y = quantile_restricted(proposal, state.lo, state.hi, u)
    adv = BranchState(state.lo, state.hi, state.depth, t, state.path_bits, state.mass)
    return Arrival(state.depth + 1, y, t), adv, u


def split_on_sample(state: BranchState, y_pivot: float, mode_point: float, proposal,
                    u: float | None = None) -> BranchState:
    """Keep the side of the pivot that contains the mode (ties keep the left).

    When the pivot's location uniform ``u`` is given, the kept mass is the
    exact product of retained fractions (u on the left, 1 - u on the right)
    rather than a fresh CDF difference, which loses relative precision once
    the branch is narrow.
    """
    if not state.lo <= y_pivot <= state.hi:
        raise ValueError(f"pivot {y_pivot} outside ({state.lo}, {state.hi}]")
    if mode_point <= y_pivot:
        lo, hi, bit = state.lo, y_pivot, 0
        frac = u
    else:
        lo, hi, bit = y_pivot, state.hi, 1
        frac = None if u is None else 1.0 - u
    mass = interval_mass(proposal, lo, hi) if frac is None else state.mass * frac
    return BranchState(lo, hi, state.depth + 1, state.time, state.path_bits + (bit,), mass)
