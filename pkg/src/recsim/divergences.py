"""Width functions, divergences and the GPRS stretch/shrink pair.

For r = dQ/dP the width functions are w_P(h) = P[r(Z) >= h] with Z ~ P and
w_Q(h) = P[r(Z) >= h] with Z ~ Q.  ``w_P`` is the density of a positive
random variable H whose differential entropy is the channel simulation
divergence, and S(h) = w_Q(h) - h w_P(h) is its survival function.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from .distributions import (
    INF,
    LN2,
    LOG2E,
    Gaussian,
    Laplace,
    TargetProposalPair,
    Uniform,
)

EULER_GAMMA = 0.57721566490153286061


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved tolerance {achieved:.3g})")
        self.achieved = achieved


# ---------------------------------------------------------------- special functions


def digamma(x: float) -> float:
    """psi(x) for x > 0: shift up with the recurrence, then the asymptotic series."""
    if not x > 0.0:
        raise ValueError(f"digamma domain error: x={x!r}")
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (
        1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12.0))))))
    return acc + math.log(x) - 0.5 * inv - series


def _normal_interval(a: float, b: float) -> float:
    """Phi(b) - Phi(a) for a <= b, evaluated on the tail that keeps precision."""
    if b <= a:
        return 0.0
    if a >= 0.0:
        return 0.5 * (math.erfc(a / math.sqrt(2.0)) - math.erfc(b / math.sqrt(2.0)))
    if b <= 0.0:
        return 0.5 * (math.erfc(-b / math.sqrt(2.0)) - math.erfc(-a / math.sqrt(2.0)))
    return 1.0 - 0.5 * (math.erfc(-a / math.sqrt(2.0)) + math.erfc(b / math.sqrt(2.0)))


def ncx2_cdf(x: float, k: int, lam: float) -> float:
    """CDF of a noncentral chi-squared variable as a Poisson mixture of central ones."""
    if x <= 0.0:
        return 0.0
    if lam < 0.0 or k < 1:
        raise ValueError("need k >= 1 and lam >= 0")
    half = 0.5 * lam
    if half == 0.0:
        return float(special.gammainc(0.5 * k, 0.5 * x))
    jmax = int(half + 10.0 * math.sqrt(half) + 20.0)
    while special.gammainc(jmax + 1, half) > 1e-14:
        jmax *= 2
    j = np.arange(jmax + 1)
    logw = -half + j * math.log(half) - special.gammaln(j + 1.0)
    terms = np.exp(logw) * special.gammainc(0.5 * k + j, 0.5 * x)
    return float(min(1.0, max(0.0, terms.sum())))


def ncx2_cdf_1dof(x: float, lam: float) -> float:
    """One-degree-of-freedom case in closed form: P[(Z + sqrt(lam))^2 <= x]."""
    if x <= 0.0:
        return 0.0
    rx, rl = math.sqrt(x), math.sqrt(lam)
    return _normal_interval(-rx - rl, rx - rl)


# ---------------------------------------------------------------- width functions


@dataclass(frozen=True)
class WidthFunction:
    w_p: Callable[[float], float]
    w_q: Callable[[float], float]
    source: str
    h_max: float
    breakpoints: tuple[float, ...] = ()
    jumps: np.ndarray | None = None  # sorted r(Z), Z ~ P, for step-function widths

    def survival(self, h: float) -> float:
        """S(h) = w_Q(h) - h w_P(h), clamped to [0, 1]."""
        return min(1.0, max(0.0, self.w_q(h) - h * self.w_p(h)))


def _step_width() -> WidthFunction:
    def w(h: float) -> float:
        return 1.0 if h <= 1.0 else 0.0

    return WidthFunction(w, w, "identity", 1.0)


def width_uniform(pair: TargetProposalPair) -> WidthFunction:
    """Nested uniforms: r equals M on the target's support, so both widths are steps at M."""
    t, p = pair.target, pair.proposal
    if not p.lo <= t.lo < t.hi <= p.hi:
        raise ValueError("target support must lie inside the proposal support")
    M = (p.hi - p.lo) / (t.hi - t.lo)

    def w_p(h: float) -> float:
        return 1.0 / M if h <= M else 0.0

    def w_q(h: float) -> float:
        return 1.0 if h <= M else 0.0

    return WidthFunction(w_p, w_q, "uniform", M)


def _standardized_gaussian(pair: TargetProposalPair) -> tuple[float, float]:
    p, q = pair.proposal, pair.target
    return (q.mean - p.mean) / p.std, q.variance / p.variance


def width_gaussian(pair: TargetProposalPair) -> WidthFunction:
    """Closed-form widths of a Gaussian/Gaussian pair.

    In standardized coordinates (P = N(0, 1), Q = N(mu, s2)) the superlevel
    set {r >= h} is {(z - m)^2 <= c(h)} with m = mu / (1 - s2), so both widths
    are one-degree-of-freedom noncentral chi-squared CDFs.
    """
    if not (isinstance(pair.target, Gaussian) and isinstance(pair.proposal, Gaussian)):
        raise TypeError("width_gaussian needs a Gaussian/Gaussian pair")
    if pair.is_identity:
        return _step_width()
    mu, s2 = _standardized_gaussian(pair)
    if s2 >= 1.0:
        raise ValueError("unbounded ratio")
    m = mu / (1.0 - s2)
    scale2 = s2 / (1.0 - s2)
    offset = -math.log(s2) + mu * mu / (1.0 - s2)
    lam_p = m * m
    shift_q = (m - mu) / math.sqrt(s2)
    lam_q = shift_q * shift_q
    h_max = math.exp(0.5 * offset)

    def threshold(h: float) -> float:
        if h <= 0.0:
            return INF
        return scale2 * (offset - 2.0 * math.log(h))

    def w_p(h: float) -> float:
        if h <= 0.0:
            return 1.0
        return ncx2_cdf_1dof(threshold(h), lam_p)

    def w_q(h: float) -> float:
        if h <= 0.0:
            return 1.0
        return ncx2_cdf_1dof(threshold(h) / s2, lam_q)

    return WidthFunction(w_p, w_q, "gaussian", h_max)


def _laplace_standardized(pair: TargetProposalPair) -> tuple[float, float]:
    p, q = pair.proposal, pair.target
    return abs(q.location - p.location) / p.scale, q.scale / p.scale


def laplace_superlevel_interval(s: float, m: float, h: float) -> tuple[float, float]:
    """Endpoints of {r >= h} for Q = L(m, s), P = L(0, 1), m >= 0, 0 < s < 1."""
    if h <= 0.0:
        return -INF, INF
    lsh = math.log(s * h)
    if lsh > m:
        return math.nan, math.nan
    right = (m - s * lsh) / (1.0 - s)
    if lsh * s >= -m:  # left endpoint inside [0, m]
        left = (s * lsh + m) / (1.0 + s)
    else:
        left = (s * lsh + m) / (1.0 - s)
    return left, right


def laplace_width_p(s: float, m: float, h: float) -> float:
    """Piecewise closed form of w_P for Q = L(m, s), P = L(0, 1).

    The branch point is ln h = -|m|/s - ln s.  On the upper branch the
    exponent is (s^2 ln(sh) - |m|) / (1 - s^2); this is the grouping that is
    continuous at the branch point and agrees with the superlevel-interval
    computation.
    """
    m = abs(m)
    if h <= 0.0:
        return 1.0
    lsh = math.log(s * h)
    if lsh >= m:
        return 0.0
    if math.log(h) <= -m / s - math.log(s):
        return 1.0 - math.exp(s / (1.0 - s) * lsh) * math.cosh(m / (1.0 - s))
    d = 1.0 - s * s
    return math.exp((s * s * lsh - m) / d) * math.sinh(-s * (lsh - m) / d)


def width_laplace(pair: TargetProposalPair) -> WidthFunction:
    if not (isinstance(pair.target, Laplace) and isinstance(pair.proposal, Laplace)):
        raise TypeError("width_laplace needs a Laplace/Laplace pair")
    if pair.is_identity:
        return _step_width()
    m, s = _laplace_standardized(pair)
    if not 0.0 < s < 1.0:
        raise ValueError(f"Laplace width needs 0 < s < 1, got s={s}")
    target = Laplace(m, s)

    def w_p(h: float) -> float:
        return laplace_width_p(s, m, h)

    def w_q(h: float) -> float:
        if h <= 0.0:
            return 1.0
        a, b = laplace_superlevel_interval(s, m, h)
        if math.isnan(a):
            return 0.0
        return min(1.0, max(0.0, target.sf(a) - target.sf(b) if a >= m else target.cdf(b) - target.cdf(a)))

    h_max = math.exp(m) / s
    branch = math.exp(-m / s) / s
    return WidthFunction(w_p, w_q, "laplace", h_max, (branch,))


def _ppf_array(dist, p: np.ndarray) -> np.ndarray:
    if isinstance(dist, Gaussian):
        return dist.mean + dist.std * special.ndtri(p)
    if isinstance(dist, Laplace):
        return dist.location - dist.scale * np.sign(p - 0.5) * np.log1p(-np.abs(2.0 * p - 1.0))
    if isinstance(dist, Uniform):
        return dist.lo + (dist.hi - dist.lo) * p
    raise TypeError(f"unsupported distribution {dist!r}")


def _logpdf_array(dist, x: np.ndarray) -> np.ndarray:
    if isinstance(dist, Gaussian):
        z = x - dist.mean
        return -0.5 * math.log(2.0 * math.pi * dist.variance) - 0.5 * z * z / dist.variance
    if isinstance(dist, Laplace):
        return -math.log(2.0 * dist.scale) - np.abs(x - dist.location) / dist.scale
    if isinstance(dist, Uniform):
        inside = (x >= dist.lo) & (x <= dist.hi)
        return np.where(inside, -math.log(dist.hi - dist.lo), -np.inf)
    raise TypeError(f"unsupported distribution {dist!r}")


def log_ratio_array(pair: TargetProposalPair, x: np.ndarray) -> np.ndarray:
    return _logpdf_array(pair.target, x) - _logpdf_array(pair.proposal, x)


def width_empirical(pair: TargetProposalPair, n: int = 100_000) -> WidthFunction:
    """Monte Carlo widths from stratified quantile grids of P and Q."""
    if n < 1000:
        raise ValueError("width_empirical needs n >= 1000")
    grid = (np.arange(n) + 0.5) / n
    r_p = np.sort(np.exp(log_ratio_array(pair, _ppf_array(pair.proposal, grid))))
    r_q = np.sort(np.exp(log_ratio_array(pair, _ppf_array(pair.target, grid))))

    def frac_at_least(sorted_r: np.ndarray, h: float) -> float:
        if h <= 0.0:
            return 1.0
        return 1.0 - np.searchsorted(sorted_r, h, side="left") / n

    return WidthFunction(
        lambda h: frac_at_least(r_p, h),
        lambda h: frac_at_least(r_q, h),
        f"empirical({n})",
        float(max(r_p[-1], r_q[-1])),
        jumps=r_p,
    )


def width_for(pair: TargetProposalPair) -> WidthFunction:
    """Closed-form width for the supported families."""
    if isinstance(pair.target, Gaussian) and isinstance(pair.proposal, Gaussian):
        return width_gaussian(pair)
    if isinstance(pair.target, Laplace) and isinstance(pair.proposal, Laplace):
        return width_laplace(pair)
    if pair.is_identity:
        return _step_width()
    if isinstance(pair.target, Uniform) and isinstance(pair.proposal, Uniform):
        return width_uniform(pair)
    raise TypeError("no closed-form width for this pair; use width_empirical")


# ---------------------------------------------------------------- divergences


def kl_divergence(pair: TargetProposalPair) -> float:
    """D_KL(Q || P) in bits."""
    q, p = pair.target, pair.proposal
    if pair.is_identity:
        return 0.0
    if isinstance(q, Gaussian) and isinstance(p, Gaussian):
        v = q.variance / p.variance
        d = (q.mean - p.mean) ** 2 / p.variance
        return 0.5 * (v + d - 1.0 - math.log(v)) * LOG2E
    if isinstance(q, Laplace) and isinstance(p, Laplace):
        d = abs(q.location - p.location)
        s, b = q.scale, p.scale
        nats = math.log(b / s) - 1.0 + (d + s * math.exp(-d / s)) / b
        return max(0.0, nats) * LOG2E
    lo, hi = (q.lo, q.hi) if isinstance(q, Uniform) else (q.quantile(1e-15), q.quantile(1.0 - 1e-15))

    def integrand(y: float) -> float:
        lq = q.log_density(y)
        if lq == -INF:
            return 0.0
        return math.exp(lq) * (lq - p.log_density(y))

    val, err = integrate.quad(integrand, lo, hi, limit=400, epsabs=1e-12, points=[pair.mode_point]
                              if lo < pair.mode_point < hi else None)
    if not math.isfinite(val):
        raise ValueError("divergent KL integral")
    return max(0.0, val) * LOG2E


def sup_ratio_numeric(pair: TargetProposalPair, grid_size: int = 4001) -> float:
    """max r by a dense grid over both laws' bulk, polished by golden-section search."""
    q, p = pair.target, pair.proposal
    lo = min(q.quantile(1e-12), p.quantile(1e-12))
    hi = max(q.quantile(1.0 - 1e-12), p.quantile(1.0 - 1e-12))
    xs = np.linspace(lo, hi, grid_size)
    lr = log_ratio_array(pair, xs)
    i = int(np.argmax(lr))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid_size - 1)]
    res = optimize.minimize_scalar(lambda y: -pair.log_ratio(y), bracket=(a, xs[i], b)
                                   if a < xs[i] < b else None, method="golden", tol=1e-12)
    best = max(float(lr[i]), -float(res.fun))
    return math.exp(best)


def _ratio_unbounded(pair: TargetProposalPair) -> bool:
    q, p = pair.target, pair.proposal
    if pair.is_identity:
        return False
    if isinstance(q, Gaussian) and isinstance(p, Gaussian):
        return q.variance >= p.variance
    if isinstance(q, Laplace) and isinstance(p, Laplace):
        return q.scale >= p.scale
    if isinstance(q, Uniform) and isinstance(p, Uniform):
        return not (p.lo <= q.lo and q.hi <= p.hi)
    return False


def renyi_inf(pair: TargetProposalPair) -> float:
    """D_inf(Q || P) = lb sup r in bits; +inf for unbounded ratios."""
    if pair.sup_bound is not None:
        return math.log2(pair.sup_bound)
    if _ratio_unbounded(pair):
        return INF
    return math.log2(sup_ratio_numeric(pair))


def _neg_w_log_w(w: float) -> float:
    if w <= 0.0 or w >= 1.0:
        return 0.0
    return -w * math.log(w)


def _knee(width: WidthFunction) -> float:
    lo, hi = 0.0, width.h_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if width.w_p(mid) >= 0.5:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _quad(f, a: float, b: float, tol: float, points=None) -> float:
    if not b > a:
        return 0.0
    val, err, *rest = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=500,
                                     points=points, full_output=1)
    warned = len(rest) > 1
    if warned and err > 100.0 * tol * max(1.0, abs(val)):
        raise QuadratureError("quadrature did not converge", err)
    return val


def csd_from_width(width: WidthFunction, quad_tol: float = 1e-10) -> float:
    """-integral of w_P lb w_P over (0, h_max), in bits.

    The range is split at the knee where w_P crosses 1/2 and at any declared
    breakpoints.  Large ranges are integrated in log h.  The last piece is
    integrated in v = sqrt(h_max - h) because w_P typically vanishes like a
    square root at the top of the ratio.
    """
    if width.jumps is not None:
        # w_P = (n - i) / n on [r_(i), r_(i+1)), integrate the steps exactly
        r = width.jumps
        n = r.size
        w = (n - np.arange(1, n)) / n
        return float(np.sum(np.diff(r) * -w * np.log(w)) * LOG2E)
    h_max = width.h_max
    if h_max <= 1.0 and width.w_p(0.5 * h_max) >= 1.0:
        return 0.0

    def f(h: float) -> float:
        return _neg_w_log_w(width.w_p(h))

    knee = _knee(width)
    cuts = sorted({c for c in (*width.breakpoints, knee) if 0.0 < c < h_max})
    total = 0.0
    if h_max <= 64.0:
        edges = [0.0, *cuts, h_max]
        for a, b in zip(edges[:-2], edges[1:-1]):
            total += _quad(f, a, b, quad_tol)
        a = edges[-2]
        total += _quad(lambda v: f(h_max - v * v) * 2.0 * v, 0.0, math.sqrt(h_max - a), quad_tol)
        return total * LOG2E
    lin_cuts = [c for c in cuts if c < 1.0]
    edges = [0.0, *lin_cuts, 1.0]
    for a, b in zip(edges[:-1], edges[1:]):
        total += _quad(f, a, b, quad_tol)
    top = math.log(h_max)
    log_edges = [0.0, *[math.log(c) for c in cuts if c > 1.0], top]

    def g(u: float) -> float:
        h = math.exp(u)
        return f(h) * h

    pieces = []
    for a, b in zip(log_edges[:-1], log_edges[1:]):
        n = max(1, int(math.ceil((b - a) / 2.0)))
        pieces.extend((a + (b - a) * i / n, a + (b - a) * (i + 1) / n) for i in range(n))
    for a, b in pieces[:-1]:
        total += _quad(g, a, b, quad_tol)
    a = pieces[-1][0]
    total += _quad(lambda v: g(top - v * v) * 2.0 * v, 0.0, math.sqrt(top - a), quad_tol)
    return total * LOG2E


def csd(pair: TargetProposalPair, quad_tol: float = 1e-10, width: WidthFunction | None = None) -> float:
    """Channel simulation divergence D_CS(Q || P) in bits."""
    if pair.is_identity:
        return 0.0
    return csd_from_width(width if width is not None else width_for(pair), quad_tol)


def laplace_csd_closed_form(s: float) -> float:
    """D_CS(L(0, s) || L(0, 1)) in bits."""
    return (s + digamma(1.0 / s) + EULER_GAMMA - 1.0) * LOG2E


def product_gaussian_width(mu: float, sigma2: float, d: int) -> WidthFunction:
    """Widths of N(mu, sigma2)^d against N(0, 1)^d via the d-dof noncentral chi-squared."""
    if not (0.0 < sigma2 < 1.0) or d < 1:
        raise ValueError("need 0 < sigma2 < 1 and d >= 1")
    m2 = d * (mu / (1.0 - sigma2)) ** 2
    scale2 = sigma2 / (1.0 - sigma2)
    offset = -d * math.log(sigma2) + d * mu * mu / (1.0 - sigma2)
    shift_q2 = d * ((mu / (1.0 - sigma2) - mu) ** 2) / sigma2
    cdf = (lambda x, lam: ncx2_cdf_1dof(x, lam)) if d == 1 else (lambda x, lam: ncx2_cdf(x, d, lam))

    def w_p(h: float) -> float:
        if h <= 0.0:
            return 1.0
        return cdf(scale2 * (offset - 2.0 * math.log(h)), m2)

    def w_q(h: float) -> float:
        if h <= 0.0:
            return 1.0
        return cdf(scale2 * (offset - 2.0 * math.log(h)) / sigma2, shift_q2)

    return WidthFunction(w_p, w_q, f"gaussian^{d}", math.exp(0.5 * offset))


def csd_gap_product_gaussian(mu: float, sigma2: float, d: int, quad_tol: float = 1e-10) -> float:
    """D_CS - D_KL (bits) for N(mu, sigma2)^d against N(0, 1)^d."""
    kl = d * 0.5 * (sigma2 + mu * mu - 1.0 - math.log(sigma2)) * LOG2E
    return csd_from_width(product_gaussian_width(mu, sigma2, d), quad_tol) - kl


# ---------------------------------------------------------------- stretch / shrink


@dataclass
class StretchFunction:
    """Tabulated solution of the shrink ODE sha' = w_Q(sha) - sha w_P(sha), sha(0) = 0.

    ``sha`` (the inverse stretch) is interpolated by cubic Hermite segments
    between the integrator's knots.  The table grows lazily: a query past the
    current horizon advances the integrator, up to ``t_cap``.
    """

    width: WidthFunction
    ode_tol: float = 1e-10
    t_cap: float = 1e13
    ts: list = field(default_factory=lambda: [0.0])
    ys: list = field(default_factory=lambda: [0.0])
    fs: list = field(default_factory=lambda: [1.0])
    saturated: bool = False
    _solver: object = None

    def __post_init__(self):
        self.fs[0] = self._rhs_scalar(0.0)
        self._solver = integrate.RK45(
            lambda t, y: np.array([self._rhs_scalar(y[0])]),
            0.0, np.array([0.0]), INF, rtol=self.ode_tol, atol=self.ode_tol * 1e-2,
        )

    def _rhs_scalar(self, y: float) -> float:
        return min(1.0, max(0.0, self.width.w_q(y) - y * self.width.w_p(y)))

    @property
    def h_max(self) -> float:
        return self.ys[-1] if self.saturated else self.width.h_max

    @property
    def t_end(self) -> float:
        return self.ts[-1]

    def _advance(self) -> bool:
        if self.saturated or self.ts[-1] >= self.t_cap:
            return False
        solver = self._solver
        solver.step()
        if solver.status == "failed":
            raise RuntimeError("shrink ODE integration failed")
        y = float(solver.y[0])
        y = max(y, self.ys[-1])
        f = self._rhs_scalar(y)
        self.ts.append(float(solver.t))
        self.ys.append(y)
        self.fs.append(f)
        if f < 1e-300:
            self.saturated = True
        return True

    def extend_to(self, t: float) -> None:
        while self.ts[-1] < t:
            if not self._advance():
                break

    def _segment_value(self, i: int, t: float) -> float:
        t0, t1 = self.ts[i], self.ts[i + 1]
        y0, y1 = self.ys[i], self.ys[i + 1]
        dt = t1 - t0
        x = (t - t0) / dt
        x2 = x * x
        x3 = x2 * x
        v = ((2 * x3 - 3 * x2 + 1) * y0 + (x3 - 2 * x2 + x) * dt * self.fs[i]
             + (-2 * x3 + 3 * x2) * y1 + (x3 - x2) * dt * self.fs[i + 1])
        return min(y1, max(y0, v))

    def sha(self, t: float) -> float:
        """Inverse stretch sigma^-1(t)."""
        if t <= 0.0:
            return 0.0
        if t > self.ts[-1]:
            self.extend_to(t)
            if t > self.ts[-1]:
                if self.saturated:
                    return self.ys[-1]
                raise RuntimeError("t_max too small")
        i = bisect.bisect_right(self.ts, t) - 1
        if i >= len(self.ts) - 1:
            return self.ys[-1]
        return self._segment_value(i, t)

    def sha_prime(self, t: float) -> float:
        return self._rhs_scalar(self.sha(t))

    def sigma(self, h: float) -> float:
        """Stretch sigma(h) = inf{t : sha(t) >= h}; +inf at or above the sup."""
        if h <= 0.0:
            return 0.0
        if h >= self.width.h_max:
            return INF
        while self.ys[-1] < h:
            if not self._advance():
                return INF
        i = bisect.bisect_left(self.ys, h)
        if self.ys[i] == h:
            return self.ts[i]
        i -= 1
        lo, hi = self.ts[i], self.ts[i + 1]
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if self._segment_value(i, mid) < h:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        return 0.5 * (lo + hi)

    def table(self) -> list[tuple[float, float, float]]:
        """(h, sigma(h), sha'(sigma(h))) at every knot."""
        return [(y, t, f) for t, y, f in zip(self.ts, self.ys, self.fs)]


def solve_stretch(pair: TargetProposalPair, width: WidthFunction | None = None,
                  t_max: float | None = None, ode_tol: float = 1e-10) -> StretchFunction:
    """Integrate the shrink ODE for ``pair`` up to ``t_max`` (more on demand)."""
    if width is None:
        width = width_for(pair)
    if not math.isfinite(kl_divergence(pair)):
        raise ValueError("D_KL must be finite")
    stretch = StretchFunction(width, ode_tol)
    if t_max is None:
        t_max = 8.0 * max(1.0, width.h_max)
    stretch.extend_to(t_max)
    return stretch


def write_stretch_csv(stretch: StretchFunction, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["h", "sigma_h", "sha_prime"])
        for h, t, f in stretch.table():
            out.writerow([repr(h), repr(t), repr(f)])
