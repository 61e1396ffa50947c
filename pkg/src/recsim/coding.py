"""Prefix codes for sample indices and branch-and-bound heap paths.

Interval coding is done with exact rationals.  A symbol narrows the current
interval [low, low + width) and the emitted code is the shortest dyadic
interval inside the final one, so a code costs at most -lb(width) + 2 bits.
The decoder reads one bit at a time and stops as soon as the dyadic interval
it has seen fits in a single symbol, which makes every code self-delimiting
and lets codes be concatenated without length fields.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from scipy import special

from .distributions import LOG2E
from .poisson import SLOT_ACCEPT, arrival_location, branch_draws, fold_in, uniform_at

DEFAULT_N_MAX = 2**32
EULER_GAMMA = 0.5772156649015329


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class BitString:
    """Immutable MSB-first bit sequence held as a string of '0'/'1'."""

    bits: str = ""

    def __post_init__(self):
        if self.bits.strip("01"):
            raise ValueError("bits must consist of '0' and '1'")

    def __len__(self) -> int:
        return len(self.bits)

    def __add__(self, other: "BitString") -> "BitString":
        return BitString(self.bits + other.bits)

    def __str__(self) -> str:
        return self.bits

    @classmethod
    def from_int(cls, value: int, width: int) -> "BitString":
        if width == 0:
            return cls("")
        return cls(format(value, f"0{width}b"))

    def to_bytes(self) -> bytes:
        """8-byte little-endian bit count followed by the bits packed MSB-first."""
        n = len(self.bits)
        padded = self.bits + "0" * (-n % 8)
        body = int(padded, 2).to_bytes(len(padded) // 8, "big") if padded else b""
        return struct.pack("<Q", n) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "BitString":
        if len(data) < 8:
            raise DecodeError("truncated header")
        (n,) = struct.unpack("<Q", data[:8])
        body = data[8:]
        if len(body) != (n + 7) // 8:
            raise DecodeError("length field does not match payload")
        if n == 0:
            return cls("")
        bits = format(int.from_bytes(body, "big"), f"0{len(body) * 8}b")
        return cls(bits[:n])

    def reader(self) -> "BitReader":
        return BitReader(self)


class BitReader:
    """Sequential cursor over a BitString."""

    def __init__(self, bits: BitString | str):
        self.bits = bits.bits if isinstance(bits, BitString) else bits
        self.pos = 0

    def read(self) -> int:
        if self.pos >= len(self.bits):
            raise DecodeError("truncated code")
        b = self.bits[self.pos]
        self.pos += 1
        return 1 if b == "1" else 0

    def read_int(self, width: int) -> int:
        if self.pos + width > len(self.bits):
            raise DecodeError("truncated code")
        chunk = self.bits[self.pos:self.pos + width]
        self.pos += width
        return int(chunk, 2) if chunk else 0

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.bits)


# ------------------------------------------------------------------ Elias codes


def elias_gamma_encode(n: int) -> BitString:
    if n < 1:
        raise ValueError("Elias gamma needs n >= 1")
    width = n.bit_length()
    return BitString("0" * (width - 1) + format(n, "b"))


def elias_gamma_decode(reader: BitReader) -> int:
    zeros = 0
    while reader.read() == 0:
        zeros += 1
    return (1 << zeros) | reader.read_int(zeros)


def elias_delta_encode(n: int) -> BitString:
    if n < 1:
        raise ValueError("Elias delta needs n >= 1")
    width = n.bit_length()
    return elias_gamma_encode(width) + BitString(format(n, "b")[1:])


def elias_delta_decode(reader: BitReader) -> int:
    width = elias_gamma_decode(reader)
    return (1 << (width - 1)) | reader.read_int(width - 1)


# ------------------------------------------------------------ interval coding


def shortest_dyadic(low: Fraction, high: Fraction) -> BitString:
    """Bits of the shortest dyadic interval [k/2^L, (k+1)/2^L) inside [low, high)."""
    if not 0 <= low < high <= 1:
        raise ValueError("need 0 <= low < high <= 1")
    p, q = low.numerator, low.denominator
    hp, hq = high.numerator, high.denominator
    length = 0
    while True:
        scale = 1 << length
        k = -((-p * scale) // q)
        if (k + 1) * hq <= hp * scale:
            return BitString.from_int(k, length)
        length += 1


class ExactIntervalCoder:
    """Narrows [low, low + width) by exact rational sub-intervals."""

    def __init__(self):
        self.low = Fraction(0)
        self.width = Fraction(1)

    def push(self, start: Fraction, stop: Fraction) -> None:
        """Restrict to the relative sub-interval [start, stop) of the current one."""
        if not 0 <= start < stop <= 1:
            raise ValueError("sub-interval must satisfy 0 <= start < stop <= 1")
        self.low += self.width * start
        self.width *= stop - start

    def finish(self) -> BitString:
        return shortest_dyadic(self.low, self.low + self.width)


class DyadicReader:
    """Decoder-side view of an interval code: the dyadic interval read so far."""

    def __init__(self, reader: BitReader):
        self.reader = reader
        self.numer = 0
        self.shift = 0

    def read(self) -> None:
        self.numer = 2 * self.numer + self.reader.read()
        self.shift += 1

    def bounds(self) -> tuple[Fraction, Fraction]:
        scale = 1 << self.shift
        return Fraction(self.numer, scale), Fraction(self.numer + 1, scale)

    def within(self, lo: Fraction, hi: Fraction) -> bool:
        a, b = self.bounds()
        return lo <= a and b <= hi


# ------------------------------------------------------------------ zeta code


@lru_cache(maxsize=256)
def _zeta_total(alpha: float) -> float:
    return float(special.zeta(alpha, 1.0))


def _zeta_tail(alpha: float, n: int) -> float:
    """sum_{k > n} k^-alpha."""
    return float(special.zeta(alpha, n + 1.0))


class ZetaModel:
    """pmf proportional to k^-alpha on 1..n_max, optionally with an escape symbol.

    Symbols are laid out from the top of [0, 1) downwards: n occupies
    [S(n), S(n-1)) with S the survival function, which stays accurate in
    relative terms for large n.  With ``escape`` the tail mass beyond n_max
    is kept and forms the escape region [0, S(n_max)).
    """

    def __init__(self, alpha: float, n_max: int = DEFAULT_N_MAX, escape: bool = True):
        if not alpha > 1.0:
            raise ValueError("zeta exponent must exceed 1")
        if n_max < 1:
            raise ValueError("n_max must be at least 1")
        self.alpha = float(alpha)
        self.n_max = int(n_max)
        self.escape = escape
        total = _zeta_total(self.alpha)
        cap_tail = _zeta_tail(self.alpha, self.n_max)
        if escape:
            self._offset, self._norm = 0.0, total
        else:
            self._offset, self._norm = cap_tail, total - cap_tail

    def survival(self, n: int) -> float:
        if n <= 0:
            return 1.0
        if n >= self.n_max and not self.escape:
            return 0.0
        return (_zeta_tail(self.alpha, n) - self._offset) / self._norm

    def interval(self, n: int) -> tuple[Fraction, Fraction]:
        return Fraction(self.survival(n)), Fraction(self.survival(n - 1))

    def escape_interval(self) -> tuple[Fraction, Fraction]:
        return Fraction(0), Fraction(self.survival(self.n_max))

    def locate(self, c: Fraction) -> int:
        """Symbol whose interval contains c (n_max + 1 for the escape region)."""
        lo, hi = 1, self.n_max + 1
        while lo < hi:
            mid = (lo + hi) // 2
            if Fraction(self.survival(mid)) <= c:
                hi = mid
            else:
                lo = mid + 1
        return lo


def zeta_ideal_length(n: int, alpha: float, n_max: int = DEFAULT_N_MAX) -> float:
    """alpha lb n + lb Z with Z the normaliser of the pmf truncated at n_max."""
    if not 1 <= n <= n_max:
        raise ValueError("index exceeds cap")
    z = _zeta_total(alpha) - _zeta_tail(alpha, n_max)
    return alpha * math.log2(n) + math.log2(z)


def zeta_encode(n: int, alpha: float, n_max: int = DEFAULT_N_MAX, escape: bool = True) -> BitString:
    """Interval-code n under the zeta model; indices beyond n_max escape to Elias delta."""
    if n < 1:
        raise ValueError("zeta code needs n >= 1")
    model = ZetaModel(alpha, n_max, escape)
    if n > n_max:
        if not escape:
            raise ValueError("index exceeds cap")
        lo, hi = model.escape_interval()
        return shortest_dyadic(lo, hi) + elias_delta_encode(n)
    lo, hi = model.interval(n)
    return shortest_dyadic(lo, hi)


def zeta_decode(reader: BitReader, alpha: float, n_max: int = DEFAULT_N_MAX, escape: bool = True) -> int:
    model = ZetaModel(alpha, n_max, escape)
    dy = DyadicReader(reader)
    n, lo, hi = 0, Fraction(1), Fraction(0)
    while True:
        a, b = dy.bounds()
        if not (lo <= a < hi):
            n = model.locate(a)
            lo, hi = model.escape_interval() if n > n_max else model.interval(n)
        if lo <= a and b <= hi:
            break
        dy.read()
    if n > n_max:
        if not escape:
            raise DecodeError("code points outside the truncated support")
        return elias_delta_decode(reader)
    return n


def zeta_encoded_length(n: int, alpha: float, n_max: int = DEFAULT_N_MAX) -> int:
    return len(zeta_encode(n, alpha, n_max))


def astar_index_alpha(info_bits: float) -> float:
    """Zeta exponent 1 + 1/(I + 1) for selection indices of global samplers."""
    return 1.0 + 1.0 / (info_bits + 1.0)


def sorted_uniform_alpha(info_bits: float) -> float:
    return 1.0 + 1.0 / (info_bits + math.log2(2.5))


def bnb_gprs_depth_alpha(kl_bits: float) -> float:
    return 1.0 + 1.0 / ((kl_bits + 2.0 + (1.0 + EULER_GAMMA) * LOG2E) / (LOG2E - 1.0) + 2.0)


def bnb_astar_depth_alpha(lb_bound: float) -> float:
    return 1.0 + 1.0 / ((lb_bound + 2.0) / (LOG2E - 1.0) + 2.0)


# ------------------------------------------------------------------ heap paths


def _check_probability(p: float) -> Fraction:
    if not 0.0 < p < 1.0:
        raise ValueError(f"fraction {p!r} outside (0, 1)")
    return Fraction(p)


def encode_heap_path(left_probabilities, path_bits) -> BitString:
    """Interval-code a branch: bit d goes left with probability ``left_probabilities[d]``.

    The taken side of step d therefore costs -lb p or -lb(1 - p); with exact
    arithmetic the code is at most 2 bits longer than their sum.
    """
    if len(left_probabilities) < len(path_bits):
        raise ValueError("need one probability per path bit")
    coder = ExactIntervalCoder()
    for p, bit in zip(left_probabilities, path_bits):
        q = _check_probability(p)
        if bit:
            coder.push(q, Fraction(1))
        else:
            coder.push(Fraction(0), q)
    return coder.finish()


def decode_heap_path(reader: BitReader, depth: int, left_probability) -> tuple[int, ...]:
    """Inverse of ``encode_heap_path``.

    ``left_probability(d, prefix)`` must return the encoder's probability for
    step d given the bits decoded so far.
    """
    dy = DyadicReader(reader)
    low, width = Fraction(0), Fraction(1)
    bits: list[int] = []
    for d in range(depth):
        split = low + width * _check_probability(left_probability(d, tuple(bits)))
        top = low + width
        while True:
            if dy.within(low, split):
                bits.append(0)
                width = split - low
                break
            if dy.within(split, top):
                bits.append(1)
                width = top - split
                low = split
                break
            dy.read()
    while not dy.within(low, low + width):
        dy.read()
    return tuple(bits)


def heap_path_ideal_length(fractions) -> float:
    """-sum lb of the taken-side probabilities."""
    return -sum(math.log2(f) for f in fractions)


# ------------------------------------------------------------- BnB two-part code


def encode_bnb_run(run, depth_alpha: float) -> BitString:
    """zeta(depth + 1) followed by the heap-path code of the retained sides."""
    depth = run.depth
    return (zeta_encode(depth + 1, depth_alpha)
            + encode_heap_path(run.split_uniforms[:depth], run.path_bits))


def decode_bnb_run(reader: BitReader, depth_alpha: float, seed: int) -> tuple[int, tuple[int, ...]]:
    """Recover (depth, path_bits); the left probabilities are replayed from the seed."""
    depth = zeta_decode(reader, depth_alpha) - 1
    path = decode_heap_path(reader, depth, lambda d, _prefix: branch_draws(seed, d)[1])
    return depth, path


# ------------------------------------------------------------ global indices


def encode_index(index: int, alpha: float) -> BitString:
    return zeta_encode(index, alpha)


def decode_index(reader: BitReader, alpha: float) -> int:
    return zeta_decode(reader, alpha)


def encode_parallel_index(thread: int, threads: int, index: int, alpha: float) -> BitString:
    """Fixed-width thread number (1-based) followed by the zeta-coded index."""
    if not 1 <= thread <= threads:
        raise ValueError("thread out of range")
    width = (threads - 1).bit_length()
    return BitString.from_int(thread - 1, width) + zeta_encode(index, alpha)


def decode_parallel_index(reader: BitReader, threads: int, alpha: float) -> tuple[int, int]:
    width = (threads - 1).bit_length()
    thread = reader.read_int(width) + 1
    return thread, zeta_decode(reader, alpha)


# ------------------------------------------------------- sorted-uniform coding


def _acceptance_uniforms(seed: int, count: int) -> list[float]:
    return [uniform_at(fold_in(seed, n), SLOT_ACCEPT) for n in range(1, count + 1)]


def _sorted_rank(uniforms: list[float], n: int) -> int:
    """1-based rank of uniforms[n - 1]; ties are broken by index."""
    target = uniforms[n - 1]
    below = sum(1 for u in uniforms if u < target)
    ties = sum(1 for u in uniforms[:n - 1] if u == target)
    return below + ties + 1


@dataclass(frozen=True)
class SortedUniformCode:
    log_count: int
    rank: int
    bits: BitString
    index: int
    sample: float


def sorted_uniform_encode(seed: int, pair, M: float, alpha: float) -> SortedUniformCode:
    """Code a rejection sample by the rank of its acceptance uniform.

    With N the accepted index, L = ceil(lb N) and N' = 2^L, the code is
    gamma(L + 1) followed by zeta(J') where J' is the rank of U_N among the
    first N' acceptance uniforms.
    """
    from .samplers import rejection_sample

    run = rejection_sample(pair, M, seed)
    n = run.index
    log_count = (n - 1).bit_length()
    uniforms = _acceptance_uniforms(seed, 1 << log_count)
    rank = _sorted_rank(uniforms, n)
    bits = elias_gamma_encode(log_count + 1) + zeta_encode(rank, alpha)
    return SortedUniformCode(log_count, rank, bits, n, run.sample)


def sorted_uniform_decode(reader: BitReader, seed: int, proposal, alpha: float) -> tuple[int, float]:
    """Return (accepted index, sample) from a sorted-uniform code."""
    log_count = elias_gamma_decode(reader) - 1
    rank = zeta_decode(reader, alpha)
    count = 1 << log_count
    if rank > count:
        raise DecodeError("rank exceeds the number of sorted uniforms")
    uniforms = _acceptance_uniforms(seed, count)
    order = sorted(range(count), key=lambda i: (uniforms[i], i))
    n = order[rank - 1] + 1
    return n, arrival_location(seed, n, proposal)


__all__ = [
    "BitReader", "BitString", "DecodeError", "DyadicReader", "ExactIntervalCoder",
    "SortedUniformCode", "ZetaModel", "astar_index_alpha", "bnb_astar_depth_alpha",
    "bnb_gprs_depth_alpha", "decode_bnb_run", "decode_heap_path", "decode_index",
    "decode_parallel_index", "elias_delta_decode", "elias_delta_encode",
    "elias_gamma_decode", "elias_gamma_encode", "encode_bnb_run", "encode_heap_path",
    "encode_index", "encode_parallel_index", "heap_path_ideal_length", "shortest_dyadic",
    "sorted_uniform_alpha", "sorted_uniform_decode", "sorted_uniform_encode",
    "zeta_decode", "zeta_encode", "zeta_encoded_length", "zeta_ideal_length",
]
