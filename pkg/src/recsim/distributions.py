"""One-dimensional distributions and target/proposal pairs.

All logarithms here are natural; conversion to bits happens at the reporting
edge.  The scalar evaluators are written against :mod:`math` because they sit
inside the samplers' hot loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

LN2 = math.log(2.0)
LOG2E = 1.0 / LN2
INF = math.inf

_STD_NORMAL = NormalDist()
_SQRT2 = math.sqrt(2.0)
_TINY_MASS = 1e-300


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not (self.variance > 0.0 and math.isfinite(self.variance)):
            raise ValueError(f"variance must be positive and finite, got {self.variance}")
        object.__setattr__(self, "_sd", math.sqrt(self.variance))
        object.__setattr__(self, "_lognorm", -0.5 * math.log(2.0 * math.pi * self.variance))

    @property
    def std(self) -> float:
        return self._sd

    def log_density(self, y: float) -> float:
        z = y - self.mean
        return self._lognorm - 0.5 * z * z / self.variance

    def cdf(self, y: float) -> float:
        return 0.5 * math.erfc(-(y - self.mean) / (self._sd * _SQRT2))

    def sf(self, y: float) -> float:
        return 0.5 * math.erfc((y - self.mean) / (self._sd * _SQRT2))

    def quantile(self, p: float) -> float:
        if p <= 0.0:
            return -INF
        if p >= 1.0:
            return INF
        return self.mean + self._sd * _STD_NORMAL.inv_cdf(p)

    def isf(self, q: float) -> float:
        if q <= 0.0:
            return INF
        if q >= 1.0:
            return -INF
        return self.mean - self._sd * _STD_NORMAL.inv_cdf(q)

    @property
    def median(self) -> float:
        return self.mean


@dataclass(frozen=True)
class Laplace:
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    def log_density(self, y: float) -> float:
        return -math.log(2.0 * self.scale) - abs(y - self.location) / self.scale

    def cdf(self, y: float) -> float:
        z = (y - self.location) / self.scale
        if z < 0.0:
            return 0.5 * math.exp(z)
        return 1.0 - 0.5 * math.exp(-z)

    def sf(self, y: float) -> float:
        z = (y - self.location) / self.scale
        if z > 0.0:
            return 0.5 * math.exp(-z)
        return 1.0 - 0.5 * math.exp(z)

    def quantile(self, p: float) -> float:
        if p <= 0.0:
            return -INF
        if p >= 1.0:
            return INF
        if p < 0.5:
            return self.location + self.scale * math.log(2.0 * p)
        return self.location - self.scale * math.log(2.0 * (1.0 - p))

    def isf(self, q: float) -> float:
        if q <= 0.0:
            return INF
        if q >= 1.0:
            return -INF
        if q < 0.5:
            return self.location - self.scale * math.log(2.0 * q)
        return self.location + self.scale * math.log(2.0 * (1.0 - q))

    @property
    def median(self) -> float:
        return self.location


@dataclass(frozen=True)
class Uniform:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (self.lo < self.hi and math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"need finite lo < hi, got ({self.lo}, {self.hi})")

    def log_density(self, y: float) -> float:
        if self.lo <= y <= self.hi:
            return -math.log(self.hi - self.lo)
        return -INF

    def cdf(self, y: float) -> float:
        return min(1.0, max(0.0, (y - self.lo) / (self.hi - self.lo)))

    def sf(self, y: float) -> float:
        return min(1.0, max(0.0, (self.hi - y) / (self.hi - self.lo)))

    def quantile(self, p: float) -> float:
        p = min(1.0, max(0.0, p))
        return self.lo + (self.hi - self.lo) * p

    def isf(self, q: float) -> float:
        q = min(1.0, max(0.0, q))
        return self.hi - (self.hi - self.lo) * q

    @property
    def median(self) -> float:
        return 0.5 * (self.lo + self.hi)


ContinuousDistribution = Gaussian | Laplace | Uniform


def _side_masses(dist, lo: float, hi: float):
    """Return (use_upper, a, b) with mass b - a measured on the better-conditioned side.

    Below the median the CDF is used, above it the survival function, so deep
    branches in either tail keep full relative precision.
    """
    if lo >= dist.median:
        return True, dist.sf(hi), dist.sf(lo)
    return False, dist.cdf(lo), dist.cdf(hi)


def interval_mass(dist, lo: float, hi: float) -> float:
    """P((lo, hi]) under ``dist``; degenerate intervals give 0."""
    if not lo < hi:
        return 0.0
    _, a, b = _side_masses(dist, lo, hi)
    return min(1.0, max(0.0, b - a))


def quantile_restricted(dist, lo: float, hi: float, u: float) -> float:
    """Generalised inverse transform of ``u`` for ``dist`` restricted to (lo, hi]."""
    if not math.isfinite(u):
        raise ValueError(f"non-finite uniform {u!r}")
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"uniform out of range: {u!r}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    if lo == -INF and hi == INF:
        return dist.quantile(u)
    upper, a, b = _side_masses(dist, lo, hi)
    if not b - a > _TINY_MASS:
        raise ValueError("empty restriction")
    if upper:
        # survival space: S(lo) = b, S(hi) = a, F^-1(F(lo) + m u) = S^-1(S(lo) - m u)
        y = dist.isf(b - (b - a) * u)
    else:
        y = dist.quantile(a + (b - a) * u)
    return min(hi, max(lo, y))


@dataclass(frozen=True)
class TargetProposalPair:
    """Target Q and proposal P with r = dQ/dP.

    ``mode_point`` maximises r and ``sup_bound`` (when known) is an upper
    bound on r on the natural scale.
    """

    target: ContinuousDistribution
    proposal: ContinuousDistribution
    mode_point: float
    sup_bound: float | None = None
    label: str = field(default="", compare=False)

    def log_ratio(self, y: float) -> float:
        return self.target.log_density(y) - self.proposal.log_density(y)

    def ratio(self, y: float) -> float:
        return math.exp(self.target.log_density(y) - self.proposal.log_density(y))

    @property
    def is_identity(self) -> bool:
        return self.target == self.proposal


def make_pair(target, proposal, label: str = "") -> TargetProposalPair:
    """Build a pair, filling in the mode and sup bound when they have closed forms."""
    if target == proposal:
        return TargetProposalPair(target, proposal, target.median, 1.0, label)
    if isinstance(target, Gaussian) and isinstance(proposal, Gaussian):
        vq, vp = target.variance, proposal.variance
        if vq < vp:
            shift = target.mean - proposal.mean
            mode = proposal.mean + shift * vp / (vp - vq)
            log_sup = 0.5 * math.log(vp / vq) + shift * shift / (2.0 * (vp - vq))
            return TargetProposalPair(target, proposal, mode, math.exp(log_sup), label)
        return TargetProposalPair(target, proposal, target.mean, None, label)
    if isinstance(target, Laplace) and isinstance(proposal, Laplace):
        s, b = target.scale, proposal.scale
        mode = target.location
        if s < b:
            log_sup = math.log(b / s) + abs(target.location - proposal.location) / b
            return TargetProposalPair(target, proposal, mode, math.exp(log_sup), label)
        return TargetProposalPair(target, proposal, mode, None, label)
    if isinstance(target, Uniform) and isinstance(proposal, Uniform):
        if proposal.lo <= target.lo and target.hi <= proposal.hi:
            sup = (proposal.hi - proposal.lo) / (target.hi - target.lo)
            return TargetProposalPair(target, proposal, target.median, sup, label)
        return TargetProposalPair(target, proposal, target.median, None, label)
    return TargetProposalPair(target, proposal, target.median, None, label)


def make_awgn_pair(x: float, sigma2: float, rho2: float = 1.0) -> TargetProposalPair:
    """Channel y = x + noise with x ~ N(0, sigma2) and noise ~ N(0, rho2).

    Target N(x, rho2), proposal the marginal N(0, sigma2 + rho2).
    """
    if not (sigma2 > 0.0 and rho2 > 0.0 and math.isfinite(sigma2) and math.isfinite(rho2)):
        raise ValueError("sigma2 and rho2 must be positive and finite")
    total = sigma2 + rho2
    sup = math.sqrt(total / rho2) * math.exp(x * x / (2.0 * sigma2))
    mode = x * total / sigma2
    return TargetProposalPair(Gaussian(x, rho2), Gaussian(0.0, total), mode, sup, f"awgn(x={x:g})")


def awgn_mutual_information(sigma2: float, rho2: float = 1.0) -> float:
    """I(x; y) in bits for the Gaussian channel."""
    return 0.5 * math.log2((sigma2 + rho2) / rho2)


def awgn_sigma2_for_mi(mi_bits: float, rho2: float = 1.0) -> float:
    """Source variance giving ``mi_bits`` of mutual information."""
    if not mi_bits > 0.0:
        raise ValueError("mutual information must be positive")
    return rho2 * math.expm1(2.0 * LN2 * mi_bits)


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function via Halley iteration."""
    branch = -1.0 / math.e
    if math.isnan(x) or x < branch:
        raise ValueError(f"lambert_w0 domain error: x={x!r} < -1/e")
    if x == 0.0:
        return 0.0
    if x == INF:
        return INF
    if x - branch < 1e-300:
        return -1.0
    if x < -0.32:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    elif x < 3.0:
        w = math.log1p(x) * 0.8
    else:
        lx = math.log(x)
        w = lx - math.log(lx)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def make_fixed_kl_pair(kappa_bits: float, delta_bits: float) -> TargetProposalPair:
    """Gaussian target against N(0, 1) with D_KL = kappa and D_inf = delta (bits).

    With b = 2 ln2 delta - 1 the two divergence equations reduce to
    s (b + ln s) = b - 2 ln2 kappa for s = sigma^2, solved by the principal
    Lambert W branch.  A solution with s < 1 exists only when delta exceeds
    kappa by a margin (see ``fixed_kl_min_delta``).
    """
    if not (kappa_bits > 0.0 and delta_bits >= kappa_bits):
        raise ValueError(f"infeasible (kappa, delta) = ({kappa_bits}, {delta_bits})")
    b = 2.0 * LN2 * delta_bits - 1.0
    arg = (b - 2.0 * LN2 * kappa_bits) * math.exp(b)
    if arg < -1.0 / math.e:
        raise ValueError(f"infeasible (kappa, delta) = ({kappa_bits}, {delta_bits})")
    sigma2 = math.exp(lambert_w0(arg) - b)
    operand = 2.0 * (1.0 - sigma2) * (LN2 * delta_bits + 0.5 * math.log(sigma2))
    if not (0.0 < sigma2 < 1.0) or operand < 0.0:
        raise ValueError(f"infeasible (kappa, delta) = ({kappa_bits}, {delta_bits})")
    mu = math.sqrt(operand)
    return make_pair(Gaussian(mu, sigma2), Gaussian(0.0, 1.0),
                     label=f"fixedkl(k={kappa_bits:g},d={delta_bits:g})")


def fixed_kl_min_delta(kappa_bits: float) -> float:
    """Smallest delta for which ``make_fixed_kl_pair(kappa, delta)`` exists."""
    def feasible(d):
        try:
            make_fixed_kl_pair(kappa_bits, d)
            return True
        except ValueError:
            return False

    lo, hi = kappa_bits, kappa_bits + 1.0
    while not feasible(hi):
        lo, hi = hi, hi + 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if feasible(mid) else (mid, hi)
    return hi


def overdispersion(sigma2: float, rho2: float) -> float:
    """Optimal extra proposal variance sigma * sqrt(rho2 + sigma2)."""
    if sigma2 < 0.0 or not rho2 > 0.0:
        raise ValueError("need sigma2 >= 0 and rho2 > 0")
    return math.sqrt(sigma2) * math.sqrt(rho2 + sigma2)


def overdispersed_proposal(sigma2: float, rho2: float) -> Gaussian:
    """Marginal proposal widened by the optimal overdispersion."""
    return Gaussian(0.0, sigma2 + rho2 + overdispersion(sigma2, rho2))
