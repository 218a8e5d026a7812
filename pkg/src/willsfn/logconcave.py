"""Log-concave functions: Asplund product, convolution, lambda-difference, projection,
Legendre transform, polar function and polar projection bodies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from . import bodies as B
from . import steiner as S
from .config import Estimate, MCConfig, mc_mean, stream
from .errors import ConvergenceFailure, UnboundedSupport
from .wills import WeightFunction

INF = math.inf
# f < 1e-16 * sup f once u(t) - u(0) exceeds this
_NEG_LOG_CUTOFF = 16.0 * math.log(10.0)
# quadratic-penalty continuation for indicator constraints
_PENALTIES = (1e3, 1e6, 1e9)
# constraint slack accepted after the penalised solve
_FEAS_TOL = 1e-6


def _as_rows(x, n):
    a = np.asarray(x, dtype=float)
    return a.reshape(1, n) if a.ndim == 1 else a


@dataclass
class LogConcaveFn:
    """f = exp(-neg_log) with a kind tag for structural shortcuts."""

    dim: int
    batch: Callable = field(repr=False)
    kind: str = "generic"
    data: dict = field(default_factory=dict, repr=False)
    maximizer_hint: np.ndarray | None = None
    effective_support: B.ConvexBody | None = None
    penalized: Callable | None = field(default=None, repr=False)
    tolerant: Callable | None = field(default=None, repr=False)

    def neg_log(self, x) -> float:
        return float(self.batch(_as_rows(x, self.dim))[0])

    def neg_log_batch(self, x) -> np.ndarray:
        return np.asarray(self.batch(_as_rows(x, self.dim)), dtype=float)

    def neg_log_tol(self, x, tol: float = _FEAS_TOL) -> float:
        """neg_log with indicator supports inflated by ``tol``."""
        if self.tolerant is None:
            return self.neg_log(x)
        return float(self.tolerant(_as_rows(x, self.dim), tol)[0])

    def __call__(self, x):
        v = self.neg_log_batch(x)
        out = np.exp(-v)
        return float(out[0]) if np.asarray(x).ndim == 1 else out

    def objective(self, x, weight=None) -> float:
        """neg_log, or the finite surrogate weight * dist^2 for indicator constraints."""
        if self.penalized is not None and weight is not None:
            return float(self.penalized(_as_rows(x, self.dim), weight)[0])
        return self.neg_log(x)

    # -- constructors -------------------------------------------------------
    @staticmethod
    def indicator(k: B.ConvexBody) -> "LogConcaveFn":
        def batch(x):
            return np.where(k.contains(x), 0.0, INF)

        def pen(x, weight):
            if k.has_nearest:
                return weight * np.asarray(k.distance(x)) ** 2
            far = 1.0 + np.linalg.norm(x - B.circumcenter(k), axis=1)
            return np.where(k.contains(x), 0.0, weight * far**2)

        def tolerant(x, tol):
            return np.where(k.contains(x, tol), 0.0, INF)

        return LogConcaveFn(k.dim, batch, "indicator", {"body": k}, B.circumcenter(k), k, pen, tolerant)

    @staticmethod
    def gaussian_like(e: B.ConvexBody, u: WeightFunction) -> "LogConcaveFn":
        """exp(-u(|x|_E))."""
        B.check_origin_interior(e)

        def batch(x):
            return np.asarray(u(B.gauge_batch(e, x)), dtype=float)

        reach = float(u.inverse(u.u0_value + _NEG_LOG_CUTOFF))
        return LogConcaveFn(e.dim, batch, "gaussian_like", {"E": e, "u": u}, np.zeros(e.dim),
                            B.Scale(e, reach))

    @staticmethod
    def gaussian(a: float, n: int) -> "LogConcaveFn":
        """exp(-a |x|^2)."""
        return LogConcaveFn.gaussian_like(B.Ball(n, 1.0), WeightFunction.classical(a / math.pi))

    @staticmethod
    def wills_kernel(k: B.ConvexBody, e: B.ConvexBody, u: WeightFunction) -> "LogConcaveFn":
        """f_{K,E}^u = exp(-u(d_E(x, K)))."""
        B.check_origin_interior(e)

        def batch(x):
            return np.asarray(u(B.distance_batch(k, e, x)), dtype=float)

        reach = float(u.inverse(u.u0_value + _NEG_LOG_CUTOFF))
        return LogConcaveFn(k.dim, batch, "wills_kernel", {"K": k, "E": e, "u": u}, B.circumcenter(k),
                            B.MinkowskiSum(k, B.Scale(e, reach)))

    @staticmethod
    def generic(n: int, neg_log: Callable, hint=None, support: B.ConvexBody | None = None) -> "LogConcaveFn":
        def batch(x):
            return np.array([float(neg_log(p)) for p in x])

        return LogConcaveFn(n, batch, "generic", {}, None if hint is None else np.asarray(hint, float), support)

    def compose(self, t) -> "LogConcaveFn":
        """x -> f(T x) for an invertible n x n matrix T."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        if t.shape != (self.dim, self.dim):
            raise ValueError("compose needs a square matrix of the function's dimension")
        tinv = np.linalg.inv(t)
        base = self

        def batch(x):
            return base.batch(x @ t.T)

        pen = None
        if base.penalized is not None:
            def pen(x, weight):
                return base.penalized(x @ t.T, weight)

        tol_fn = None
        if base.tolerant is not None:
            def tol_fn(x, tol):
                return base.tolerant(x @ t.T, tol)

        hint = None if base.maximizer_hint is None else tinv @ base.maximizer_hint
        sup = None if base.effective_support is None else B.LinearImage(base.effective_support, tinv)
        return LogConcaveFn(self.dim, batch, "linear", {"base": base, "matrix": t}, hint, sup, pen, tol_fn)

    def reflect(self) -> "LogConcaveFn":
        """x -> f(-x)."""
        return self.compose(-np.eye(self.dim))

    def power(self, a: float) -> "LogConcaveFn":
        """f^a for a > 0."""
        base = self
        pen = None if base.penalized is None else (lambda x, weight: a * base.penalized(x, weight))
        tol_fn = None if base.tolerant is None else (lambda x, tol: a * base.tolerant(x, tol))
        return LogConcaveFn(self.dim, lambda x: a * base.batch(x), "power", {"base": base, "exponent": a},
                            base.maximizer_hint, base.effective_support, pen, tol_fn)

    def sup_value(self) -> float:
        """||f||_inf, exact for the structural kinds."""
        if self.kind == "indicator":
            return 1.0
        if self.kind in ("gaussian_like", "wills_kernel"):
            return math.exp(-self.data["u"].u0_value)
        if self.kind == "linear":
            return self.data["base"].sup_value()
        starts = [self.maximizer_hint if self.maximizer_hint is not None else np.zeros(self.dim)]
        _, x = _minimize(self.objective, starts, penalised=self.penalized is not None)
        return math.exp(-self.neg_log(x))


# ---------------------------------------------------------------------------
# inner optimisation
# ---------------------------------------------------------------------------

def _nm(fun, x0, scale, maxiter=None):
    n = len(x0)
    simplex = np.vstack([x0] + [x0 + scale * np.eye(n)[i] for i in range(n)])
    res = optimize.minimize(fun, x0, method="Nelder-Mead",
                            options={"initial_simplex": simplex, "xatol": 1e-11, "fatol": 1e-14,
                                     "maxiter": maxiter or 4000 * n, "adaptive": n > 2})
    return float(res.fun), np.asarray(res.x)


def _local(fun, x0, scale=0.5):
    """BFGS, then a Nelder-Mead polish on a simplex of the given size."""
    x0 = np.asarray(x0, dtype=float)
    v0 = fun(x0)
    if math.isfinite(v0):
        with np.errstate(all="ignore"):
            res = optimize.minimize(fun, x0, method="BFGS", options={"gtol": 1e-10, "maxiter": 100})
        if math.isfinite(res.fun) and res.fun <= v0:
            x0, v0 = np.asarray(res.x), float(res.fun)
    v, x = _nm(fun, x0, scale if math.isfinite(v0) else 0.5, maxiter=200 * len(x0))
    return (v, x) if v <= v0 else (v0, x0)


def _minimize(fun, starts, penalised=False):
    """Minimise a convex objective fun(x, weight) from several starts.

    All starts are solved at the first penalty weight and must agree within
    1e-6 (relative, on exp(-value)) or ConvergenceFailure is raised. The best
    point is then carried through the stiffer weights. Without ``penalised``
    the weight is None throughout.
    """
    weights = _PENALTIES if penalised else (None,)
    results = []
    for x0 in starts:
        x = np.asarray(x0, dtype=float)
        if not np.all(np.isfinite(x)):
            continue
        results.append(_local(lambda y: fun(y, weights[0]), x))
    if not results:
        raise ConvergenceFailure("no finite starting point")
    results.sort(key=lambda p: p[0])
    best_v, best_x = results[0]
    finite = [v for v, _ in results if math.isfinite(v)]
    if math.isfinite(best_v) and len(finite) > 1:
        spread = max(finite) - best_v
        if -math.expm1(-spread) > 1e-6:
            raise ConvergenceFailure(f"multi-start disagreement {spread:.3g}")
    x, v, scale = best_x, best_v, 0.1
    for w in weights[1:]:
        prev = x
        v, x = _local(lambda y, w=w: fun(y, w), x, scale)
        # a stiffer stage moves the point by about as much again
        scale = max(float(np.linalg.norm(x - prev)), 1e-9)
    return v, x


def _starts(n, hints, z=None):
    pts = [h for h in hints if h is not None]
    if len(pts) >= 2:
        pts.append(0.5 * (pts[0] + pts[1]))
    if z is not None:
        pts.append(np.asarray(z, dtype=float))
    if not pts:
        pts.append(np.zeros(n))
    base = pts[0]
    for i in range(n):
        for s in (1.0, -1.0):
            pts.append(base + 0.5 * s * np.eye(n)[i])
    return pts


# ---------------------------------------------------------------------------
# Asplund product
# ---------------------------------------------------------------------------

def _is_euclid_quadratic(f: LogConcaveFn):
    """a with f = exp(-a |x|^2), else None."""
    if f.kind != "gaussian_like":
        return None
    u, e = f.data["u"], f.data["E"]
    bf = B.ball_form(e)
    if u.preset != "classical" or bf is None or np.any(bf[0] != 0):
        return None
    return u.params[0] * math.pi / bf[1] ** 2


def asplund_shortcut(f: LogConcaveFn, g: LogConcaveFn):
    """Closed form of f ⋆ g as a LogConcaveFn, or None."""
    if f.kind == "indicator" and g.kind == "indicator":
        return LogConcaveFn.indicator(B.MinkowskiSum(f.data["body"], g.data["body"]))
    for a, b in ((f, g), (g, f)):
        if a.kind == "gaussian_like" and b.kind == "indicator":
            return LogConcaveFn.wills_kernel(b.data["body"], a.data["E"], a.data["u"])
        if a.kind == "wills_kernel" and b.kind == "indicator":
            d = a.data
            return LogConcaveFn.wills_kernel(B.MinkowskiSum(d["K"], b.data["body"]), d["E"], d["u"])
    qa, qb = _is_euclid_quadratic(f), _is_euclid_quadratic(g)
    if qa is not None and qb is not None:
        return LogConcaveFn.gaussian(qa * qb / (qa + qb), f.dim)
    return None


def asplund_generic(f: LogConcaveFn, g: LogConcaveFn, z) -> float:
    """sup_x f(x) g(z - x) by direct maximisation."""
    z = np.asarray(z, dtype=float)
    n = f.dim

    def obj(x, w):
        return f.objective(x, w) + g.objective(z - x, w)

    hg = None if g.maximizer_hint is None else z - g.maximizer_hint
    _, x = _minimize(obj, _starts(n, [f.maximizer_hint, hg], 0.5 * z), _penalised(f, g))
    pf, pg = _projector(f), _projector(g)
    if (pf is None) != (pg is None):
        if pf is not None:
            x = _feasible_polish(lambda p: g.neg_log(z - p), pf, x, 1e-3)
        else:
            x = z - _feasible_polish(lambda q: f.neg_log(z - q), pg, z - x, 1e-3)
    val = f.neg_log_tol(x) + g.neg_log_tol(z - x)
    return math.exp(-val) if math.isfinite(val) else 0.0


def _projector(f: LogConcaveFn):
    """A continuous map onto the constraint set of f that fixes feasible points, or None."""
    if f.kind == "indicator":
        k = f.data["body"]
        if not k.has_nearest:
            return None
        return lambda x: k.nearest(x)[0][0]
    if f.kind == "linear":
        inner = _projector(f.data["base"])
        if inner is None:
            return None
        t = f.data["matrix"]
        tinv = np.linalg.inv(t)
        return lambda x: tinv @ inner(t @ x)
    if f.kind == "power":
        return _projector(f.data["base"])
    return None


def _feasible_polish(obj, proj, x, scale):
    """Minimise obj(proj(x)) near x; returns the feasible minimiser proj(x*)."""
    def fun(y):
        return obj(proj(y))

    v0 = fun(x)
    v, y = _nm(fun, x, scale, maxiter=1000 * len(x))
    return proj(y) if v <= v0 else proj(x)


def _penalised(*fns):
    return any(f.penalized is not None for f in fns)


def asplund(f: LogConcaveFn, g: LogConcaveFn, z, shortcut: bool = True) -> float:
    """(f ⋆ g)(z) = sup_{x + y = z} f(x) g(y)."""
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    if shortcut:
        h = asplund_shortcut(f, g)
        if h is not None:
            return h(np.asarray(z, dtype=float))
    return asplund_generic(f, g, z)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def convolve(f: LogConcaveFn, g: LogConcaveFn, z, cfg: MCConfig | None = None) -> Estimate:
    """(f * g)(z) = int f(x) g(z - x) dx by Monte Carlo over the overlap of supports."""
    cfg = cfg or MCConfig()
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    if f.effective_support is None or g.effective_support is None:
        raise UnboundedSupport("both functions need an effective support")
    z = np.asarray(z, dtype=float)
    n = f.dim
    if f.kind == "indicator" and g.kind == "indicator":
        kb = B._axis_box(f.data["body"])
        lb = B._axis_box(g.data["body"])
        if kb is not None and lb is not None:
            lo = np.maximum(kb[0], z - lb[1])
            hi = np.minimum(kb[1], z - lb[0])
            return Estimate(float(np.prod(np.clip(hi - lo, 0.0, None))))
    flo, fhi = f.effective_support.bounding_box()
    glo, ghi = g.effective_support.bounding_box()
    lo = np.maximum(flo, z - ghi)
    hi = np.minimum(fhi, z - glo)
    if np.any(hi <= lo):
        return Estimate(0.0)
    w = hi - lo
    box = float(np.prod(w))

    def draw(rng, m):
        x = lo + w * rng.random((m, n))
        v = f.neg_log_batch(x) + g.neg_log_batch(z - x)
        return np.exp(-v)

    r = mc_mean(cfg, f"convolve:{id(f)}:{id(g)}:{z.tobytes().hex()}", cfg.samples, draw)
    return Estimate(box * float(r.mean[0]), box * float(r.stderr[0]))


# ---------------------------------------------------------------------------
# lambda-difference
# ---------------------------------------------------------------------------

def lambda_difference(f: LogConcaveFn, g: LogConcaveFn, lam: float, z, shortcut: bool = True) -> float:
    """sup over z = (1-λ)x + λy of f(x/(1-λ))^{1-λ} g(-y/λ)^λ.

    With a = x/(1-λ) and b = -y/λ the constraint reads z = (1-λ)^2 a - λ^2 b.
    """
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    z = np.asarray(z, dtype=float)
    n = f.dim
    p, q = (1 - lam) ** 2, lam**2
    if shortcut and f.kind == "indicator" and g.kind == "indicator":
        body = B.MinkowskiSum(B.Scale(f.data["body"], p), B.Scale(B.Negate(g.data["body"]), q))
        return 1.0 if body.contains(z[None])[0] else 0.0

    def b_of(a):
        return (p * a - z) / q

    def obj(a, w):
        return (1 - lam) * f.objective(a, w) + lam * g.objective(b_of(a), w)

    hints = [f.maximizer_hint]
    if g.maximizer_hint is not None:
        hints.append((z + q * g.maximizer_hint) / p)
    _, a = _minimize(obj, _starts(n, hints), _penalised(f, g))
    pf, pg = _projector(f), _projector(g)
    if (pf is None) != (pg is None):
        if pf is not None:
            a = _feasible_polish(lambda p: lam * g.neg_log(b_of(p)), pf, a, 1e-3)
        else:
            # b = (p a - z) / q, so a = (z + q b) / p
            b = _feasible_polish(lambda bb: (1 - lam) * f.neg_log((z + q * bb) / p), pg, b_of(a), 1e-3)
            a = (z + q * b) / p
    val = (1 - lam) * f.neg_log_tol(a) + lam * g.neg_log_tol(b_of(a))
    return math.exp(-val) if math.isfinite(val) else 0.0


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def project_shortcut(f: LogConcaveFn, h: B.Subspace):
    if f.kind == "indicator":
        return LogConcaveFn.indicator(B.project_body(f.data["body"], h))
    if f.kind == "gaussian_like":
        return LogConcaveFn.gaussian_like(B.project_body(f.data["E"], h), f.data["u"])
    if f.kind == "wills_kernel":
        d = f.data
        return LogConcaveFn.wills_kernel(B.project_body(d["K"], h), B.project_body(d["E"], h), d["u"])
    return None


def project_fn(f: LogConcaveFn, h: B.Subspace, x, shortcut: bool = True) -> float:
    """(P_H f)(x) = sup_{y ⊥ H} f(x + y), with x in the coordinates of H."""
    x = np.asarray(x, dtype=float)
    if h.n != f.dim or len(x) != h.k:
        raise ValueError("dimension mismatch")
    if shortcut:
        p = project_shortcut(f, h)
        if p is not None:
            return p(x)
    perp = h.complement()
    base = h.embed(x)
    if perp.k == 0:
        return f(base)

    def obj(y, w):
        return f.objective(base + perp.embed(y), w)

    hint = None if f.maximizer_hint is None else perp.coords(f.maximizer_hint)
    _, y = _minimize(obj, _starts(perp.k, [hint]), _penalised(f))
    val = f.neg_log_tol(base + perp.embed(y))
    return math.exp(-val) if math.isfinite(val) else 0.0


# ---------------------------------------------------------------------------
# Legendre transform and polar function
# ---------------------------------------------------------------------------

def legendre(phi: Callable, x, hint=None, radius_probe=(1e2, 1e4, 1e6)) -> float:
    """L(phi)(x) = sup_y <x, y> - phi(y); +inf when the sup diverges along a probed ray."""
    x = np.asarray(x, dtype=float)
    n = len(x)

    def obj(y):
        with np.errstate(all="ignore"):
            v = phi(y)
            out = v - x @ y if math.isfinite(v) else INF
        return INF if not math.isfinite(out) else float(out)

    starts = _starts(n, [None if hint is None else np.asarray(hint, float)], x)
    best = INF
    arg = None
    for s in starts:
        try:
            with np.errstate(all="ignore"):
                v, y = _nm(obj, np.asarray(s, float), 0.5)
        except (FloatingPointError, ValueError):
            continue
        if v < best:
            best, arg = v, y
    if arg is None:
        return INF
    # unbounded directions show up as values that keep falling along a ray
    dirs = [arg, x] + [np.eye(n)[i] * s for i in range(n) for s in (1, -1)]
    for d in dirs:
        nd = np.linalg.norm(d)
        if nd == 0:
            continue
        d = d / nd
        vals = [obj(r * d) for r in radius_probe]
        if all(math.isfinite(v) for v in vals) and vals[0] > vals[1] > vals[2] and vals[2] < best - 1.0:
            return INF
    if np.linalg.norm(arg) > 1e5:
        return INF
    return -best


def legendre_of(f: LogConcaveFn, x) -> float:
    """L(-log f)(x), exact for indicator, quadratic and Euclidean Wills kernels."""
    x = np.asarray(x, dtype=float)
    if f.kind == "indicator":
        return float(f.data["body"].support(x))
    a = _is_euclid_quadratic(f)
    if a is not None:
        return float(x @ x) / (4 * a)
    if f.kind == "wills_kernel":
        d = f.data
        u, bf = d["u"], B.ball_form(d["E"])
        if u.preset == "classical" and bf is not None and np.all(bf[0] == 0):
            a = u.params[0] * math.pi / bf[1] ** 2
            return float(x @ x) / (4 * a) + float(d["K"].support(x))
    return legendre(f.neg_log, x, f.maximizer_hint)


def polar(f: LogConcaveFn, x) -> float:
    """f°(x) = exp(-L(-log f)(x))."""
    v = legendre_of(f, x)
    return 0.0 if v == INF else math.exp(-v)


# ---------------------------------------------------------------------------
# polar projection body
# ---------------------------------------------------------------------------

def _wills_classical_value(k: B.ConvexBody, cfg: MCConfig) -> Estimate:
    return S.intrinsic_volumes(k, cfg).total()


def polar_projection_norm(f: LogConcaveFn, v, cfg: MCConfig | None = None) -> Estimate:
    """|v|_{Π*f} = 2 int_{v^⊥} (P_{v^⊥} f)(x) dx."""
    cfg = cfg or MCConfig()
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    h = B.Subspace.hyperplane(v)
    if f.kind == "indicator":
        return 2.0 * S.volume(B.project_body(f.data["body"], h), cfg)
    if f.kind == "wills_kernel":
        d = f.data
        bf = B.ball_form(d["E"])
        if d["u"].preset == "classical" and d["u"].params[0] == 1.0 and bf is not None and bf[1] == 1.0:
            return 2.0 * _wills_classical_value(B.project_body(d["K"], h), cfg)
    if f.effective_support is None:
        raise UnboundedSupport("polar projection needs an effective support")
    supp = B.project_body(f.effective_support, h)
    lo, hi = supp.bounding_box()
    w = hi - lo
    box = float(np.prod(w))
    p = project_shortcut(f, h)

    def draw(rng, m):
        y = lo + w * rng.random((m, h.k))
        if p is not None:
            return p(y) if y.ndim == 2 else np.array([p(y)])
        return np.array([project_fn(f, h, yi, shortcut=False) for yi in y])

    r = mc_mean(cfg, f"polar_proj:{v.tobytes().hex()}", cfg.samples, draw)
    return 2.0 * Estimate(box * float(r.mean[0]), box * float(r.stderr[0]))


def polar_projection_volume(f: LogConcaveFn, cfg: MCConfig | None = None, directions: int = 256) -> Estimate:
    """vol(Π*f) = κ_n E_σ[|v|^{-n}] over uniform directions (antipodal pairs share a value)."""
    cfg = cfg or MCConfig()
    n = f.dim
    rng = stream(cfg, "polar_volume_dirs")
    g = rng.standard_normal((directions, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    vals = np.array([polar_projection_norm(f, d, cfg).value ** (-n) for d in g])
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return S.kappa(n) * Estimate(mean, se)


def check_convexity(phi: Callable, n: int, rng=None, m: int = 1000, scale: float = 2.0) -> float:
    """Largest midpoint defect phi((a+b)/2) - (phi(a)+phi(b))/2 over random pairs."""
    rng = rng or np.random.default_rng(0)
    worst = -INF
    for _ in range(m):
        a = scale * rng.standard_normal(n)
        b = scale * rng.standard_normal(n)
        fa, fb = phi(a), phi(b)
        if not (math.isfinite(fa) and math.isfinite(fb)):
            continue
        worst = max(worst, phi(0.5 * (a + b)) - 0.5 * (fa + fb))
    return worst
