"""Branch-and-bound samplers for quasiconcave density ratios on the real line.

Both samplers follow the single branch of the on-sample binary space
partition that contains the mode of r.  The branch at depth d draws its
arrival from ``branch_draws(seed, d)``, so a decoder holding the seed and the
retained sides can replay the branch without knowing the target.

Step counts follow the runtime theorems: A* does not count the arrival that
certifies termination, GPRS counts the accepted arrival.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .distributions import INF, quantile_restricted
from .divergences import StretchFunction
from .poisson import BranchState, branch_draws, next_branch_arrival, split_on_sample
from .samplers import _check_bound


@dataclass(frozen=True)
class BnbRunResult:
    sample: float
    depth: int
    path_bits: tuple[int, ...]
    steps: int
    per_step_fraction: tuple[float, ...]
    split_uniforms: tuple[float, ...]
    bound_mass: float

    @property
    def heap_index(self) -> int:
        return heap_index(self.path_bits)


def heap_index(path_bits) -> int:
    """Breadth-first index of the node reached by ``path_bits`` (root 1, children 2H and 2H+1)."""
    h = 1
    for b in path_bits:
        h = 2 * h + (1 if b else 0)
    return h


def _kept_fraction(bit: int, u: float) -> float:
    return 1.0 - u if bit else u


def _result(sample, depth, state, steps, uniforms) -> BnbRunResult:
    bits = state.path_bits
    fractions = tuple(_kept_fraction(b, u) for b, u in zip(bits, uniforms))
    mass = 1.0
    for f in fractions[:depth]:
        mass *= f
    return BnbRunResult(sample, depth, bits[:depth], steps, fractions, tuple(uniforms), mass)


def bnb_astar(pair, M: float, seed: int, max_depth: int = 10_000) -> BnbRunResult:
    """Branch-and-bound A* sampling along the mode-containing branch."""
    if not M >= 1.0:
        raise ValueError("invalid bound: M must be at least 1")
    proposal = pair.proposal
    mode = pair.mode_point
    state = BranchState()
    uniforms: list[float] = []
    best_u = INF
    best_y, best_depth = math.nan, 0
    while state.depth < max_depth:
        arrival, state, u = next_branch_arrival(state, seed, proposal)
        y, t = arrival.location, arrival.time
        r = pair.ratio(y)
        _check_bound(r, M)
        if r > 0.0 and t / r < best_u:
            best_u, best_y, best_depth = t / r, y, state.depth
        if best_u < t / M:
            return _result(best_y, best_depth, state, state.depth, uniforms)
        state = split_on_sample(state, y, mode, proposal, u)
        uniforms.append(u)
    raise RuntimeError("branch depth limit reached")


def bnb_gprs(pair, stretch: StretchFunction, seed: int, max_depth: int = 10_000) -> BnbRunResult:
    """Branch-and-bound GPRS: accept the first branch arrival with r(Y) > sha(T)."""
    proposal = pair.proposal
    mode = pair.mode_point
    sha = stretch.sha
    state = BranchState()
    uniforms: list[float] = []
    while state.depth < max_depth:
        arrival, state, u = next_branch_arrival(state, seed, proposal)
        y, t = arrival.location, arrival.time
        if pair.ratio(y) > sha(t):
            return _result(y, state.depth, state, state.depth + 1, uniforms)
        state = split_on_sample(state, y, mode, proposal, u)
        uniforms.append(u)
    raise RuntimeError("branch depth limit reached")


def decode_bnb(seed: int, depth: int, path_bits, pair) -> float:
    """Replay the branch along ``path_bits`` and return the arrival at ``depth``.

    Costs O(depth).  A bit that disagrees with the side holding the pair's
    mode raises ``ValueError("corrupt path")``.
    """
    if len(path_bits) != depth:
        raise ValueError("corrupt path: length differs from depth")
    proposal = pair.proposal
    mode = pair.mode_point
    lo, hi = -INF, INF
    for d, bit in enumerate(path_bits):
        _, u = branch_draws(seed, d)
        y = quantile_restricted(proposal, lo, hi, u)
        if (0 if mode <= y else 1) != bit:
            raise ValueError(f"corrupt path: bit {d} contradicts the mode side")
        if bit:
            lo = y
        else:
            hi = y
    _, u = branch_draws(seed, depth)
    return quantile_restricted(proposal, lo, hi, u)


def replay_branch(seed: int, path_bits, proposal) -> float:
    """Like ``decode_bnb`` but trusts the path, so only the proposal is needed."""
    lo, hi = -INF, INF
    for d, bit in enumerate(path_bits):
        _, u = branch_draws(seed, d)
        y = quantile_restricted(proposal, lo, hi, u)
        if bit:
            lo = y
        else:
            hi = y
    _, u = branch_draws(seed, len(path_bits))
    return quantile_restricted(proposal, lo, hi, u)
