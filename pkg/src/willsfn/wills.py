"""Generalised Wills functional by three routes, weight moments and Gaussian measures.

W_u(K;E) = int exp(-u(d_E(x,K))) dx
         = int_{u(0)}^inf vol(K + u^{-1}(s) E) e^{-s} ds
         = sum_i binom(n,i) m_i^u W_i(K;E)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize, special, stats

from . import bodies as B
from . import steiner as S
from .config import Estimate, MCConfig, mc_mean
from .errors import DivergentMoment, TruncationDominates


# ---------------------------------------------------------------------------
# weight functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightFunction:
    """A nondecreasing convex u : [0, inf) -> R with u^{-1} on [u(0), inf)."""

    eval: Callable = field(compare=False)
    inverse: Callable = field(compare=False)
    u0_value: float
    preset: str
    params: tuple = ()
    strictly_increasing: bool = True

    def __call__(self, t):
        return self.eval(t)

    @staticmethod
    def classical(c: float = 1.0) -> "WeightFunction":
        """u(t) = c pi t^2; c = 1 gives the classical Wills functional."""
        if c <= 0:
            raise ValueError("scale must be positive")
        return WeightFunction(
            lambda t: c * math.pi * np.square(t),
            lambda s: np.sqrt(np.maximum(s, 0.0) / (c * math.pi)),
            0.0, "classical", (float(c),))

    @staticmethod
    def p_power(p: float, c: float = 1.0) -> "WeightFunction":
        """u(t) = c (2 Gamma(1 + 1/p) t)^p, p > 1."""
        if p <= 1:
            raise ValueError("p_power needs p > 1")
        if c <= 0:
            raise ValueError("scale must be positive")
        a = 2.0 * math.gamma(1.0 + 1.0 / p)
        return WeightFunction(
            lambda t: c * np.power(a * np.asarray(t, dtype=float), p),
            lambda s: np.power(np.maximum(s, 0.0) / c, 1.0 / p) / a,
            0.0, "p_power", (float(p), float(c)))

    @staticmethod
    def custom(fn: Callable, inverse: Callable | None = None, name: str = "custom") -> "WeightFunction":
        """Wrap a user function; the inverse defaults to monotone bisection."""
        u0 = float(fn(0.0))
        if not math.isfinite(u0):
            raise ValueError("u(0) must be finite")
        if inverse is None:
            inverse = _bisection_inverse(fn, u0)
        return WeightFunction(lambda t: np.vectorize(fn, otypes=[float])(t), inverse, u0, "custom", (name,))

    def scaled(self, k: float) -> "WeightFunction":
        """The weight k * u."""
        if k <= 0:
            raise ValueError("scale must be positive")
        if self.preset == "classical":
            return WeightFunction.classical(self.params[0] * k)
        if self.preset == "p_power":
            return WeightFunction.p_power(self.params[0], self.params[1] * k)
        ev, inv = self.eval, self.inverse
        return WeightFunction(lambda t: k * ev(t), lambda s: inv(np.asarray(s) / k), k * self.u0_value,
                              "custom", (*self.params, ("scaled", k)), self.strictly_increasing)

    def describe(self) -> dict:
        return {"preset": self.preset, "params": [p if not isinstance(p, tuple) else list(p) for p in self.params],
                "u0": self.u0_value}


def _bisection_inverse(fn, u0):
    def inv_one(s):
        if s <= u0:
            return 0.0
        hi = 1.0
        while fn(hi) < s:
            hi *= 2.0
            if hi > 1e300:
                return math.inf
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if fn(mid) < s:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * max(1.0, hi):
                break
        return 0.5 * (lo + hi)

    def inv(s):
        arr = np.asarray(s, dtype=float)
        out = np.vectorize(inv_one, otypes=[float])(arr)
        return out if arr.ndim else float(out)

    return inv


def check_weight(u: WeightFunction, rng: np.random.Generator | None = None, m: int = 1000, t_max: float = 4.0):
    """Spot-check monotonicity, convexity and the inverse; returns the worst defects."""
    rng = rng or np.random.default_rng(0)
    a, b = rng.random(m) * t_max, rng.random(m) * t_max
    ua, ub, um = u(a), u(b), u(0.5 * (a + b))
    convexity = float(np.max(um - 0.5 * (ua + ub)))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    monotone = float(np.max(u(lo) - u(hi)))
    s = u.u0_value + rng.random(m) * 10.0
    inverse = float(np.max(np.abs(u(u.inverse(s)) - s) / np.maximum(1.0, np.abs(s))))
    return {"convexity": convexity, "monotone": monotone, "inverse": inverse}


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def _tail_bound(u: WeightFunction, s_cut: float, power_coeffs) -> float:
    """Bound on int_{s_cut}^inf P(u^{-1}(s)) e^{-s} ds for a polynomial P with nonnegative coefficients.

    u^{-1} is concave, so u^{-1}(s_cut + x) <= a + D x with a = u^{-1}(s_cut)
    and D the secant slope just below s_cut.
    """
    h = 1e-3 * max(1.0, s_cut - u.u0_value)
    a = float(u.inverse(s_cut))
    d = (a - float(u.inverse(max(s_cut - h, u.u0_value)))) / h
    d = max(d, 0.0)
    total = 0.0
    for i, c in enumerate(power_coeffs):
        if c == 0:
            continue
        # int_0^inf (a + D x)^i e^{-x} dx = sum_k binom(i,k) a^{i-k} D^k k!
        total += c * sum(math.comb(i, k) * a ** (i - k) * d**k * math.factorial(k) for k in range(i + 1))
    return float(math.exp(-s_cut) * total)


def _gl(n):
    return np.polynomial.legendre.leggauss(n)


def _panel_integral(fn, a, b, panels, order=16):
    x, w = _gl(order)
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        total += half * float(np.dot(w, fn(mid + half * x)))
    return total


def moment_estimate(u: WeightFunction, i: int, s_max: float | None = None) -> Estimate:
    """m_i^u = int_{u(0)}^inf u^{-1}(s)^i e^{-s} ds with a rigorous truncation bound."""
    if i < 0 or int(i) != i:
        raise ValueError("moment order must be a nonnegative integer")
    if not u.strictly_increasing:
        raise ValueError("moments need a strictly increasing weight")
    if u.preset == "classical":
        c = u.params[0]
        return Estimate(math.gamma(1 + i / 2) / (c * math.pi) ** (i / 2))
    if u.preset == "p_power":
        p, c = u.params
        a = 2.0 * math.gamma(1.0 + 1.0 / p)
        return Estimate(math.gamma(1 + i / p) / (a**i * c ** (i / p)))
    s_max = s_max if s_max is not None else MCConfig().s_max
    u0 = u.u0_value
    root = math.sqrt(s_max)

    # s = u0 + tau^2 smooths square-root behaviour of u^{-1} at u(0)
    def integrand(tau):
        s = u0 + tau * tau
        return np.power(u.inverse(s), i) * np.exp(-s) * 2.0 * tau

    panels, prev = 4, None
    for _ in range(12):
        val = _panel_integral(integrand, 0.0, root, panels)
        if prev is not None and abs(val - prev) <= 1e-10 * max(abs(val), 1e-300):
            break
        prev, panels = val, panels * 2
    else:
        raise DivergentMoment(f"moment {i} quadrature did not settle")
    coeffs = [0.0] * i + [1.0]
    tail = _tail_bound(u, u0 + s_max, coeffs)
    if not math.isfinite(val) or not math.isfinite(tail) or tail > 1e-6 * max(abs(val), 1e-300):
        raise DivergentMoment(f"u^-1(s)^{i} e^-s has not decayed by s_max")
    return Estimate(val, 0.0, tail + abs(val - prev) if prev is not None else tail)


def moment(u: WeightFunction, i: int, s_max: float | None = None) -> float:
    return moment_estimate(u, i, s_max).value


# ---------------------------------------------------------------------------
# route 1: weighted Steiner sum
# ---------------------------------------------------------------------------

def wills_sum(k: B.ConvexBody, e: B.ConvexBody | None = None, u: WeightFunction | None = None,
              cfg: MCConfig | None = None) -> Estimate:
    """sum_i binom(n,i) m_i^u W_i(K;E)."""
    cfg = cfg or MCConfig()
    n = k.dim
    e = e if e is not None else B.Ball(n, 1.0)
    u = u or WeightFunction.classical()
    B.check_origin_interior(e)
    ms = [moment_estimate(u, i, cfg.s_max) for i in range(n + 1)]
    bf = B.ball_form(e)
    if bf is not None:
        # binom(n,i) W_i(K; rho B) = kappa_i rho^i V_{n-i}(K), and the V_j are cached
        iv = S.intrinsic_volumes(k, cfg)
        rho = bf[1]
        w = np.array([ms[n - j].value * S.kappa(n - j) * rho ** (n - j) for j in range(n + 1)])
        var = float(w @ iv.cov @ w)
        bound = sum(ms[n - j].bound * S.kappa(n - j) * rho ** (n - j) * abs(iv.values[j]) for j in range(n + 1))
        return Estimate(float(w @ iv.values), math.sqrt(max(var, 0.0)), float(bound))
    coef = S.relative_steiner(k, e, cfg)
    weights = np.array([math.comb(n, i) * ms[i].value for i in range(n + 1)])
    est = coef.linear(weights)
    bound = sum(math.comb(n, i) * ms[i].bound * abs(coef.W[i]) for i in range(n + 1))
    return Estimate(est.value, est.stderr, float(bound))


def wills(k: B.ConvexBody, cfg: MCConfig | None = None) -> Estimate:
    """Classical Wills functional sum_i V_i(K)."""
    return S.intrinsic_volumes(k, cfg).total()


def wills_ball(n: int, r: float) -> float:
    return float(S.ball_intrinsic_volumes(n, r).sum())


def wills_polynomial_ball(n: int) -> np.ndarray:
    """Coefficients c_j with W(x B^n) = sum_j c_j x^j."""
    return S.ball_intrinsic_volumes(n, 1.0)


# ---------------------------------------------------------------------------
# stratified sampling over nested regions
# ---------------------------------------------------------------------------

class _Regions:
    """Nested boxes or balls R_0 ⊆ ... ⊆ R_L containing K + t_h E."""

    def __init__(self, k, e, t_levels):
        n = k.dim
        self.n = n
        self.t = np.asarray(t_levels, dtype=float)
        lo_k, hi_k = k.bounding_box()
        lo_e, hi_e = e.bounding_box()
        ck, rk = B.circumcenter(k), B.circumradius(k)
        ce, re = B.circumcenter(e), B.circumradius(e)
        t_top = self.t[-1]
        box_top = float(np.prod((hi_k - lo_k) + t_top * (hi_e - lo_e)))
        r_top = rk + t_top * re
        self.use_ball = S.kappa(n) * r_top**n < box_top
        if self.use_ball:
            self.c = ck[None, :] + self.t[:, None] * ce[None, :]
            self.r = (rk + self.t * re) * (1 + 1e-9)
            self.vol = S.kappa(n) * self.r**n
        else:
            self.lo = lo_k[None, :] + self.t[:, None] * lo_e[None, :]
            self.hi = hi_k[None, :] + self.t[:, None] * hi_e[None, :]
            self.vol = np.prod(self.hi - self.lo, axis=1)
        self.stratum_vol = np.diff(np.concatenate([[0.0], self.vol]))
        self.rk, self.re = rk, re

    def _draw_region(self, rng, h, m):
        if self.use_ball:
            return self.c[h] + self.r[h] * S.uniform_ball(rng, m, self.n)
        return self.lo[h] + (self.hi[h] - self.lo[h]) * rng.random((m, self.n))

    def _inside(self, h, x):
        if self.use_ball:
            return np.linalg.norm(x - self.c[h], axis=1) <= self.r[h]
        return np.all((x >= self.lo[h]) & (x <= self.hi[h]), axis=1)

    def sample(self, rng, h, m):
        """Uniform points in R_h minus R_{h-1}."""
        if h == 0:
            return self._draw_region(rng, 0, m)
        out, have = [], 0
        while have < m:
            want = max(64, int(1.2 * (m - have) * self.vol[h] / max(self.stratum_vol[h], 1e-300)))
            x = self._draw_region(rng, h, min(want, 1 << 18))
            x = x[~self._inside(h - 1, x)]
            out.append(x)
            have += len(x)
        return np.concatenate(out)[:m]

    def tail_bound(self, u: WeightFunction, s_cut: float) -> float:
        """Bound on the integral of e^{-u(d)} outside K + u^{-1}(s_cut) E."""
        n = self.n
        coeffs = [math.comb(n, j) * self.rk ** (n - j) * self.re**j * S.kappa(n) for j in range(n + 1)]
        return _tail_bound(u, s_cut, coeffs)


def _levels(u: WeightFunction, s_max: float, count: int):
    s = u.u0_value + s_max * (np.arange(count + 1) / count) ** 2
    return s, np.asarray(u.inverse(s), dtype=float)


def _stratified(regions: _Regions, cfg: MCConfig, tag: str, fn, columns: int, min_per: int = 1000):
    """Stratified estimate of sum_h vol(stratum h) E_h[fn(x)] with Neyman allocation.

    Returns the per-column totals and their covariance.
    """
    live = [h for h in range(len(regions.vol)) if regions.stratum_vol[h] > 0]
    if not live:
        return np.zeros(columns), np.zeros((columns, columns))
    per_pilot = max(100, min(min_per, cfg.samples // (4 * len(live))))
    pilots = {}
    for h in live:
        pilots[h] = mc_mean(cfg.with_(workers=1), f"{tag}:pilot:{h}", per_pilot,
                            lambda rng, m, h=h: fn(regions.sample(rng, h, m)))
    score = np.array([regions.stratum_vol[h] * math.sqrt(max(float(pilots[h].cov[0, 0]) * per_pilot, 0.0))
                      for h in live])
    budget = max(cfg.samples - per_pilot * len(live), 0)
    if score.sum() > 0:
        alloc = np.floor(budget * score / score.sum()).astype(int)
    else:
        alloc = np.full(len(live), budget // len(live))
    alloc = np.maximum(alloc, min_per)
    mean = np.zeros(columns)
    cov = np.zeros((columns, columns))
    for h, nh in zip(live, alloc):
        r = mc_mean(cfg, f"{tag}:main:{h}", int(nh), lambda rng, m, h=h: fn(regions.sample(rng, h, m)))
        v = regions.stratum_vol[h]
        mean += v * np.atleast_1d(r.mean)
        cov += v * v * np.atleast_2d(r.cov)
    return mean, cov


# ---------------------------------------------------------------------------
# route 2: direct Monte Carlo of the Kampf integral
# ---------------------------------------------------------------------------

def wills_mc(k: B.ConvexBody, e: B.ConvexBody | None = None, u: WeightFunction | None = None,
             cfg: MCConfig | None = None, strata: int = 8) -> Estimate:
    """Stratified Monte Carlo of int exp(-u(d_E(x,K))) dx."""
    cfg = cfg or MCConfig()
    n = k.dim
    e = e if e is not None else B.Ball(n, 1.0)
    u = u or WeightFunction.classical()
    B.check_origin_interior(e)
    s_lv, t_lv = _levels(u, cfg.s_max, strata)
    regions = _Regions(k, e, np.concatenate([[0.0], t_lv[1:]]))

    def fn(x):
        d = B.distance_batch(k, e, x)
        return np.exp(-np.asarray(u(d), dtype=float))

    mean, cov = _stratified(regions, cfg, f"wills_mc:{k.key}|{e.key}|{u.preset}{u.params}", fn, 1)
    tail = regions.tail_bound(u, s_lv[-1])
    se = math.sqrt(max(cov[0, 0], 0.0))
    if tail > max(se, 1e-12 * abs(mean[0])):
        raise TruncationDominates(f"truncation bound {tail:.3g} exceeds stderr {se:.3g}")
    return Estimate(float(mean[0]), se, tail)


# ---------------------------------------------------------------------------
# route 3: radial quadrature in s
# ---------------------------------------------------------------------------

def _radial_rule(u: WeightFunction, s_max: float, panels: int, order: int = 8):
    """Nodes s_j and weights w_j for int_{u0}^{u0+s_max} g(s) e^{-s} ds via s = u0 + tau^2."""
    x, w = _gl(order)
    edges = np.linspace(0.0, math.sqrt(s_max), panels + 1)
    taus, wts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        taus.append(mid + half * x)
        wts.append(half * w)
    tau = np.concatenate(taus)
    s = u.u0_value + tau**2
    return s, np.concatenate(wts) * 2.0 * tau * np.exp(-s)


def wills_radial(k: B.ConvexBody, e: B.ConvexBody | None = None, u: WeightFunction | None = None,
                 cfg: MCConfig | None = None, panels: int = 8, strata: int = 8) -> Estimate:
    """Gauss-Legendre quadrature of int vol(K + u^{-1}(s) E) e^{-s} ds.

    The volumes at all nodes share one stratified sample (common random
    numbers). The quadrature error is bounded by comparison with a rule
    on half as many panels.
    """
    cfg = cfg or MCConfig()
    n = k.dim
    e = e if e is not None else B.Ball(n, 1.0)
    u = u or WeightFunction.classical()
    B.check_origin_interior(e)
    s_fine, w_fine = _radial_rule(u, cfg.s_max, panels)
    s_coarse, w_coarse = _radial_rule(u, cfg.s_max, max(panels // 2, 1))
    t_fine = np.asarray(u.inverse(s_fine), dtype=float)
    t_coarse = np.asarray(u.inverse(s_coarse), dtype=float)
    s_lv, t_lv = _levels(u, cfg.s_max, strata)
    regions = _Regions(k, e, np.concatenate([[0.0], t_lv[1:]]))

    def fn(x):
        d = B.distance_batch(k, e, x)[:, None]
        fine = (d <= t_fine[None, :]) @ w_fine
        coarse = (d <= t_coarse[None, :]) @ w_coarse
        return np.column_stack([fine, coarse])

    mean, cov = _stratified(regions, cfg, f"wills_radial:{k.key}|{e.key}|{u.preset}{u.params}", fn, 2)
    quad = abs(mean[0] - mean[1])
    se_diff = math.sqrt(max(cov[0, 0] + cov[1, 1] - 2 * cov[0, 1], 0.0))
    # only the part of the disagreement not explained by sampling noise counts as quadrature error
    quad = max(quad - 3 * se_diff, 0.0)
    tail = regions.tail_bound(u, s_lv[-1])
    return Estimate(float(mean[0]), math.sqrt(max(cov[0, 0], 0.0)), tail + quad)


# ---------------------------------------------------------------------------
# Gaussian and weighted measures of shifted bodies
# ---------------------------------------------------------------------------

def _gauss_exact(k: B.ConvexBody, y):
    n = k.dim
    bf = B.ball_form(k)
    if bf is not None:
        c, r = bf
        nc = float(np.sum((y + c) ** 2))
        if r == 0:
            return 0.0
        if nc == 0:
            return float(stats.chi2.cdf(r * r, n))
        return float(stats.ncx2.cdf(r * r, n, nc))
    box = B._axis_box(k)
    if box is not None:
        lo, hi = box[0] + y, box[1] + y
        return float(np.prod(special.ndtr(hi) - special.ndtr(lo)))
    if isinstance(k, B.OrthogonalProduct):
        a = _gauss_exact(k.first, y[: k.k])
        b = _gauss_exact(k.second, y[k.k:])
        return None if a is None or b is None else a * b
    if isinstance(k, B.Translate):
        return _gauss_exact(k.body, y + k.vector)
    return None


def gaussian_measure(k: B.ConvexBody, y=None, cfg: MCConfig | None = None) -> Estimate:
    """gamma_n(y + K)."""
    cfg = cfg or MCConfig()
    n = k.dim
    y = np.zeros(n) if y is None else np.asarray(y, dtype=float)
    ex = _gauss_exact(k, y)
    if ex is not None:
        return Estimate(ex)

    def draw(rng, m):
        g = rng.standard_normal((m, n))
        return k.contains(g - y).astype(float)

    r = mc_mean(cfg, f"gauss:{k.key}:{y.tobytes().hex()}", cfg.samples, draw)
    return Estimate(float(r.mean[0]), float(r.stderr[0]))


@dataclass
class SupResult:
    value: Estimate
    y: np.ndarray
    exact_location: bool
    note: str


def _exact_center(k: B.ConvexBody):
    """A point c with K - c 0-symmetric, when structurally evident."""
    if k.symmetric:
        return np.zeros(k.dim)
    bf = B.ball_form(k)
    if bf is not None:
        return bf[0]
    box = B._axis_box(k)
    if box is not None:
        return 0.5 * (box[0] + box[1])
    if isinstance(k, B.Translate):
        c = _exact_center(k.body)
        return None if c is None else c + np.asarray(k.vector, dtype=float)
    if isinstance(k, B.Scale):
        c = _exact_center(k.body)
        return None if c is None else k.factor * c
    if isinstance(k, B.Negate):
        c = _exact_center(k.body)
        return None if c is None else -c
    if isinstance(k, (B.MinkowskiSum, B.OrthogonalProduct)):
        a, b = (_exact_center(p) for p in k.children())
        if a is None or b is None:
            return None
        return a + b if isinstance(k, B.MinkowskiSum) else np.concatenate([a, b])
    return None


def uniform_in_body(k: B.ConvexBody, rng, m):
    lo, hi = k.bounding_box()
    out, have = [], 0
    while have < m:
        x = lo + (hi - lo) * rng.random((max(2 * (m - have), 256), k.dim))
        x = x[k.contains(x)]
        out.append(x)
        have += len(x)
    return np.concatenate(out)[:m]


def sup_gaussian(k: B.ConvexBody, cfg: MCConfig | None = None) -> SupResult:
    """sup_y gamma_n(y + K).

    For centrally symmetric K (about a known centre) the supremum sits at the
    centre: y -> gamma_n(y + K) is a convolution of even log-concave functions.
    Otherwise a search result is returned as a lower bound of the supremum.
    """
    cfg = cfg or MCConfig()
    c = _exact_center(k)
    if c is not None:
        return SupResult(gaussian_measure(k, -c, cfg), -c, True, "centre of symmetry")
    n = k.dim
    rng = np.random.default_rng(cfg.seed)
    z = uniform_in_body(k, rng, min(cfg.samples, 20000))

    def neg(y):
        return -float(np.mean(np.exp(-0.5 * np.sum((z + y) ** 2, axis=1))))

    y0 = -z.mean(axis=0)
    res = optimize.minimize(neg, y0, method="Nelder-Mead",
                            options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 400 * n})
    y = np.asarray(res.x)
    # fresh samples at the found point give an unbiased value there
    val = gaussian_measure(k, y, cfg.with_(seed=(cfg.seed + 1) % 2**64))
    return SupResult(val, y, False, "search result; lower bound of sup")


def weighted_measure(k: B.ConvexBody, e: B.ConvexBody, u: WeightFunction, y=None,
                     cfg: MCConfig | None = None) -> Estimate:
    """mu_{u,E}(y - K) with d mu = exp(-u(|x|_E)) dx."""
    cfg = cfg or MCConfig()
    n = k.dim
    y = np.zeros(n) if y is None else np.asarray(y, dtype=float)
    vol = S.volume(k, cfg)
    if vol.value == 0.0:
        return Estimate(0.0)

    def draw(rng, m):
        z = uniform_in_body(k, rng, m)
        return np.exp(-np.asarray(u(B.gauge_batch(e, y - z)), dtype=float))

    r = mc_mean(cfg, f"mu:{k.key}|{e.key}|{y.tobytes().hex()}", cfg.samples, draw)
    return vol * Estimate(float(r.mean[0]), float(r.stderr[0]))


def sup_weighted_measure(k: B.ConvexBody, e: B.ConvexBody, u: WeightFunction,
                         cfg: MCConfig | None = None) -> SupResult:
    """sup_y mu_{u,E}(y - K); exact location when K and E are symmetric about known centres."""
    cfg = cfg or MCConfig()
    c = _exact_center(k)
    if c is not None and e.symmetric:
        return SupResult(weighted_measure(k, e, u, c, cfg), c, True, "centre of symmetry")
    n = k.dim
    rng = np.random.default_rng(cfg.seed)
    z = uniform_in_body(k, rng, min(cfg.samples, 5000))

    def neg(y):
        return -float(np.mean(np.exp(-np.asarray(u(B.gauge_batch(e, y - z)), dtype=float))))

    res = optimize.minimize(neg, z.mean(axis=0), method="Nelder-Mead",
                            options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 200 * n})
    y = np.asarray(res.x)
    return SupResult(weighted_measure(k, e, u, y, cfg.with_(seed=(cfg.seed + 1) % 2**64)), y, False,
                     "search result; lower bound of sup")


def gauge_integral(e: B.ConvexBody, u: WeightFunction, cfg: MCConfig | None = None) -> Estimate:
    """int exp(-u(|x|_E)) dx = m_n^u vol(E)."""
    cfg = cfg or MCConfig()
    return moment_estimate(u, e.dim, cfg.s_max) * S.volume(e, cfg)
