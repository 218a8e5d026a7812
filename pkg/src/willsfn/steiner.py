"""Intrinsic volumes, relative quermassintegrals and Steiner polynomial fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ellipe, gammaln

from . import bodies as B
from .config import Estimate, MCConfig, mc_mean
from .errors import IllConditionedFit


def kappa(n: int) -> float:
    """Volume of the n-dimensional Euclidean unit ball."""
    if n < 0 or int(n) != n:
        raise ValueError("kappa needs a nonnegative integer")
    if n == 0:
        return 1.0
    if n <= 50:
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return math.exp(0.5 * n * math.log(math.pi) - gammaln(n / 2 + 1))


def elementary_symmetric(values) -> np.ndarray:
    """e_0..e_m of the given numbers (coefficients of prod (1 + a_j t))."""
    e = np.zeros(len(values) + 1)
    e[0] = 1.0
    for a in values:
        e[1:] = e[1:] + a * e[:-1]
    return e


def ball_intrinsic_volumes(n: int, r: float) -> np.ndarray:
    kn = kappa(n)
    return np.array([math.comb(n, i) * kn / kappa(n - i) * r**i for i in range(n + 1)])


def _pad(v, n):
    out = np.zeros(n + 1)
    m = min(len(v), n + 1)
    out[:m] = v[:m]
    return out


def _steiner_shift(v, r, n):
    """Intrinsic volumes of K + r B^n from those of K."""
    out = np.zeros(n + 1)
    for j in range(n + 1):
        out[j] = sum(math.comb(n - k, j - k) * kappa(n - k) / kappa(n - j) * r ** (j - k) * v[k]
                     for k in range(j + 1))
    return out


def _merge_parallel(g):
    """Collapse parallel zonotope generators: [0,a] + [0,b] along one line is a segment of length |a|+|b|."""
    out = []
    for v in g:
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        for i, w in enumerate(out):
            nw = np.linalg.norm(w)
            if abs(abs(v @ w) - nv * nw) <= 1e-13 * nv * nw:
                out[i] = w * ((nw + nv) / nw)
                break
        else:
            out.append(np.asarray(v, dtype=float))
    return np.array(out).reshape(-1, g.shape[1] if g.ndim == 2 else 0)


def _orthogonal_generators(g):
    if len(g) == 0:
        return True
    gram = g @ g.T
    off = gram - np.diag(np.diag(gram))
    return np.all(np.abs(off) <= 1e-13 * max(1.0, np.abs(gram).max()))


def exact_intrinsic_volumes(k: B.ConvexBody):
    """V_0..V_n by closed form or exact low-dimensional geometry, else None."""
    n = k.dim
    if isinstance(k, B.Point):
        return _pad([1.0], n)
    if isinstance(k, B.Segment):
        return _pad([1.0, k.length], n)
    if isinstance(k, B.Ball):
        return ball_intrinsic_volumes(n, k.radius)
    if isinstance(k, B.Box):
        return elementary_symmetric(k.widths)
    if isinstance(k, B.Ellipsoid):
        bf = B.ball_form(k)
        if bf is not None:
            return ball_intrinsic_volumes(n, bf[1])
        if n == 2:
            a, b = sorted(k.semi_axes, reverse=True)
            perim = 4 * a * ellipe(1 - (b / a) ** 2)
            return np.array([1.0, perim / 2, math.pi * a * b])
        return None
    if isinstance(k, B.Scale):
        if k.factor == 0:
            return _pad([1.0], n)
        v = exact_intrinsic_volumes(k.body)
        return None if v is None else v * k.factor ** np.arange(n + 1)
    if isinstance(k, (B.Negate, B.Translate)):
        return exact_intrinsic_volumes(k.body)
    if isinstance(k, B.LinearImage) and k.similarity is not None:
        v = exact_intrinsic_volumes(k.body)
        return None if v is None else v * k.similarity ** np.arange(n + 1)
    if isinstance(k, B.OrthogonalProduct):
        a, b = exact_intrinsic_volumes(k.first), exact_intrinsic_volumes(k.second)
        if a is None or b is None:
            return None
        return np.convolve(a, b)[: n + 1]
    if isinstance(k, B.Intersection) and k._simple is not None:
        return exact_intrinsic_volumes(k._simple)
    if isinstance(k, B.MinkowskiSum):
        for a, b in ((k.left, k.right), (k.right, k.left)):
            bf = B.ball_form(b)
            if bf is not None:
                va = exact_intrinsic_volumes(a)
                if va is not None:
                    return _steiner_shift(va, bf[1], n)
    nf = k.ball_zonotope()
    gens = _merge_parallel(nf[2]) if nf is not None and len(nf[2]) else None
    if nf is not None and (gens is None or _orthogonal_generators(gens)):
        base = elementary_symmetric(np.linalg.norm(gens, axis=1)) if gens is not None and len(gens) \
            else np.array([1.0])
        base = _pad(base, n)
        return _steiner_shift(base, nf[1], n) if nf[1] > 0 else base
    v = k.vertices()
    if v is not None:
        g = k.geometry
        iv = g.intrinsic_volumes_exact
        if iv is not None:
            return _pad(iv, n)
    if n == 2:
        return _planar_mixed(k)
    return None


# Planar Minkowski combinations: V_1 is additive and V_2 is a quadratic form in
# the mixed areas V(K_i, K_j) of the summands.

def _planar_atoms(k: B.ConvexBody, m: np.ndarray):
    """Summands of m K as ("poly", vertices) or ("ellipse", A), translations dropped."""
    if isinstance(k, B.Point):
        return []
    if isinstance(k, B.Translate):
        return _planar_atoms(k.body, m)
    if isinstance(k, B.Negate):
        return _planar_atoms(k.body, -m)
    if isinstance(k, B.Scale):
        return [] if k.factor == 0 else _planar_atoms(k.body, k.factor * m)
    if isinstance(k, B.LinearImage):
        return _planar_atoms(k.body, m @ k.matrix)
    if isinstance(k, B.MinkowskiSum):
        a, b = _planar_atoms(k.left, m), _planar_atoms(k.right, m)
        return None if a is None or b is None else a + b
    if isinstance(k, B.Ball):
        return [_ellipse_atom(k.radius * m)]
    if isinstance(k, B.Ellipsoid):
        return [_ellipse_atom(m @ np.diag(k.semi_axes))]
    v = k.vertices()
    if v is None:
        return None
    return [("poly", _ordered_polygon(v @ m.T))]


def _ellipse_atom(a):
    if abs(np.linalg.det(a)) > 1e-14 * max(1.0, np.abs(a).max() ** 2):
        return ("ellipse", a)
    u, sv, _ = np.linalg.svd(a)
    half = sv[0] * u[:, 0]
    return ("poly", np.array([-half, half]))


def _ordered_polygon(v):
    from scipy.spatial import ConvexHull, QhullError

    v = np.asarray(v, dtype=float)
    try:
        return v[ConvexHull(v).vertices]
    except (QhullError, ValueError):
        c = v.mean(axis=0)
        _, _, vt = np.linalg.svd(v - c)
        t = (v - c) @ vt[0]
        return v[[int(np.argmin(t)), int(np.argmax(t))]]


def _atom_support(atom, u):
    kind, d = atom
    if kind == "poly":
        return (u @ d.T).max(axis=1)
    return np.linalg.norm(u @ d, axis=1)


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _mixed_area(p, q, nodes=4096):
    """V(P, Q) = 1/2 int h_Q dS_P."""
    if p[0] == "ellipse" and q[0] == "poly":
        p, q = q, p
    if p[0] == "poly":
        v = p[1]
        if len(v) < 2:
            return 0.0
        e = np.roll(v, -1, axis=0) - v
        if len(v) == 2:
            e = e[:1]
            e = np.vstack([e, -e])
        ln = np.linalg.norm(e, axis=1)
        nrm = np.column_stack([e[:, 1], -e[:, 0]]) / np.where(ln > 0, ln, 1.0)[:, None]
        if len(v) > 2 and _cross2(v[1] - v[0], v[2] - v[1]) < 0:
            nrm = -nrm
        return 0.5 * float(ln @ _atom_support(q, nrm))
    a = p[1]
    if q[0] == "ellipse" and np.allclose(q[1] @ q[1].T, a @ a.T, rtol=0, atol=1e-15):
        return math.pi * abs(np.linalg.det(a))
    prev = None
    while nodes <= 1 << 16:
        th = 2 * math.pi * np.arange(nodes) / nodes
        u = np.column_stack([np.cos(th), np.sin(th)])
        # radius of curvature of A B^2 at outer normal u is det(A)^2 / |A^T u|^3
        rho = np.linalg.det(a) ** 2 / np.linalg.norm(u @ a, axis=1) ** 3
        val = math.pi * float(np.mean(_atom_support(q, u) * rho))
        if prev is not None and abs(val - prev) <= 1e-14 * max(1.0, abs(val)):
            return val
        prev, nodes = val, 2 * nodes
    return None


def _planar_mixed(k: B.ConvexBody):
    atoms = _planar_atoms(k, np.eye(2))
    if not atoms:
        return None if atoms is None else np.array([1.0, 0.0, 0.0])
    disc = ("ellipse", np.eye(2))
    v1 = 0.0
    v2 = 0.0
    for i, p in enumerate(atoms):
        w = _mixed_area(p, disc)
        if w is None:
            return None
        v1 += w
        for q in atoms[i:]:
            m = _mixed_area(p, q)
            if m is None:
                return None
            v2 += m if q is p else 2 * m
    return np.array([1.0, v1, v2])


def exact_volume(k: B.ConvexBody):
    v = exact_intrinsic_volumes(k)
    if v is not None:
        return float(v[-1])
    if isinstance(k, B.Ellipsoid):
        return kappa(k.dim) * float(np.prod(k.semi_axes))
    if isinstance(k, B.Scale):
        inner = exact_volume(k.body)
        return None if inner is None else inner * k.factor**k.dim
    if isinstance(k, (B.Negate, B.Translate)):
        return exact_volume(k.body)
    if isinstance(k, B.LinearImage):
        inner = exact_volume(k.body)
        return None if inner is None else inner * abs(np.linalg.det(k.matrix))
    if isinstance(k, B.OrthogonalProduct):
        a, b = exact_volume(k.first), exact_volume(k.second)
        return None if a is None or b is None else a * b
    if k.vertices() is not None:
        g = k.geometry
        return float(g.volume_in_hull) if g.k == k.dim else 0.0
    return None


def bounding_box_volume_mc(k: B.ConvexBody, cfg: MCConfig, tag: str = "volume") -> Estimate:
    lo, hi = k.bounding_box()
    w = hi - lo
    box = float(np.prod(w))
    if box == 0:
        return Estimate(0.0)

    def draw(rng, m):
        x = lo + w * rng.random((m, k.dim))
        return k.contains(x).astype(float)

    r = mc_mean(cfg, f"{tag}:{k.key}", cfg.samples, draw)
    return Estimate(box * float(r.mean[0]), box * float(r.stderr[0]))


def volume(k: B.ConvexBody, cfg: MCConfig | None = None) -> Estimate:
    v = exact_volume(k)
    if v is not None:
        return Estimate(v)
    return bounding_box_volume_mc(k, cfg or MCConfig())


@dataclass
class SteinerCoefficients:
    """W_i(K;E) for vol(K + tE) = sum binom(n,i) W_i t^i."""

    n: int
    W: np.ndarray
    method: str
    stderr: np.ndarray = field(default=None)
    cov: np.ndarray = field(default=None, repr=False)
    t_max: float = 0.0
    residual: float = 0.0

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.stderr is None:
            self.stderr = np.zeros(self.n + 1)
        if self.cov is None:
            self.cov = np.diag(np.asarray(self.stderr) ** 2)

    def estimate(self, i: int) -> Estimate:
        return Estimate(float(self.W[i]), float(self.stderr[i]))

    def polynomial(self):
        """Coefficients p_i of vol(K + tE) = sum p_i t^i."""
        return np.array([math.comb(self.n, i) for i in range(self.n + 1)]) * self.W

    def linear(self, weights) -> Estimate:
        """sum w_i W_i with propagated standard error."""
        w = np.asarray(weights, dtype=float)
        var = float(w @ self.cov @ w)
        return Estimate(float(w @ self.W), math.sqrt(max(var, 0.0)))

    def as_dict(self):
        return {"n": self.n, "W": self.W.tolist(), "stderr": self.stderr.tolist(), "method": self.method}


def _box_poly(widths, e_widths):
    """Coefficients of prod_j (w_j + t e_j)."""
    p = np.array([1.0])
    for w, e in zip(widths, e_widths):
        p = np.convolve(p, [w, e])
    return p


def exact_steiner_polynomial(k: B.ConvexBody, e: B.ConvexBody):
    """p_0..p_n with vol(K + tE) = sum p_i t^i, when a closed form is known."""
    n = k.dim
    bf = B.ball_form(e)
    if bf is not None:
        v = exact_intrinsic_volumes(k)
        if v is not None:
            rho = bf[1]
            return np.array([kappa(i) * v[n - i] * rho**i for i in range(n + 1)])
    kb = B.ball_form(k)
    if kb is not None:
        v = exact_intrinsic_volumes(e)
        if v is not None:
            r = kb[1]
            return np.array([kappa(n - i) * v[i] * r ** (n - i) for i in range(n + 1)])
    if isinstance(k, B.Point) or (k.vertices() is not None and len(k.vertices()) == 1):
        ve = exact_volume(e)
        if ve is not None:
            return _pad([0.0] * n + [ve], n)
    kb, eb = B._axis_box(k), B._axis_box(e)
    if kb is not None and eb is not None:
        return _box_poly(kb[1] - kb[0], eb[1] - eb[0])
    if isinstance(k, (B.Translate, B.Negate)) and not isinstance(k, B.Negate):
        return exact_steiner_polynomial(k.body, e)
    if isinstance(e, B.Translate):
        return exact_steiner_polynomial(k, e.body)
    if isinstance(k, B.Negate) and isinstance(e, B.Negate):
        return exact_steiner_polynomial(k.body, e.body)
    if isinstance(k, B.Scale) and k.factor > 0:
        p = exact_steiner_polynomial(k.body, B.Scale(e, 1.0 / k.factor) if not isinstance(e, B.Scale)
                                     else B.Scale(e.body, e.factor / k.factor))
        if p is not None:
            return p * k.factor ** (n - np.arange(n + 1))
    if isinstance(e, B.Scale) and e.factor > 0:
        p = exact_steiner_polynomial(k, e.body)
        if p is not None:
            return p * e.factor ** np.arange(n + 1)
    if isinstance(k, B.OrthogonalProduct) and isinstance(e, B.OrthogonalProduct) and k.k == e.k:
        a = exact_steiner_polynomial(k.first, e.first)
        b = exact_steiner_polynomial(k.second, e.second)
        if a is not None and b is not None:
            return np.convolve(a, b)
    return None


def exact_steiner(k: B.ConvexBody, e: B.ConvexBody):
    p = exact_steiner_polynomial(k, e)
    if p is None:
        return None
    n = k.dim
    w = p / np.array([math.comb(n, i) for i in range(n + 1)])
    return SteinerCoefficients(n, w, "closed_form")


def inradius_proxy(e: B.ConvexBody) -> float:
    n = e.dim
    return float(np.min(e.support(np.vstack([np.eye(n), -np.eye(n)]))))


def chebyshev_nodes(m: int, t_max: float) -> np.ndarray:
    j = np.arange(m)
    return 0.5 * t_max * (1 - np.cos((2 * j + 1) * np.pi / (2 * m)))


def uniform_ball(rng, m, n):
    g = rng.standard_normal((m, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random((m, 1)) ** (1.0 / n)


def enclosing_sampler(k: B.ConvexBody, e: B.ConvexBody, t: float):
    """(volume, sampler) for a region containing K + tE: a box or a ball, whichever is smaller."""
    n = k.dim
    lo_k, hi_k = k.bounding_box()
    lo_e, hi_e = e.bounding_box()
    lo = lo_k + t * lo_e
    hi = hi_k + t * hi_e
    w = hi - lo
    box = float(np.prod(w))
    ck, rk = B.circumcenter(k), B.circumradius(k)
    ce, re = B.circumcenter(e), B.circumradius(e)
    c = ck + t * ce
    r = (rk + t * re) * (1 + 1e-9)
    ball = kappa(n) * r**n
    if ball < box:
        return ball, lambda rng, m: c + r * uniform_ball(rng, m, n)
    return box, lambda rng, m: lo + w * rng.random((m, n))


def steiner_fit(k: B.ConvexBody, e: B.ConvexBody, cfg: MCConfig | None = None,
                known: dict[int, float] | None = None, tag: str = "steiner",
                t_scale: float = 1.0) -> SteinerCoefficients:
    """Fit vol(K + tE) on Chebyshev nodes from shared Monte-Carlo samples.

    ``known`` pins selected W_i (for instance W_n = vol(E)) and the rest are
    fitted by generalised least squares on the estimated node covariance.
    """
    cfg = cfg or MCConfig()
    B.check_origin_interior(e)
    n = k.dim
    rho = inradius_proxy(e)
    cir = B.circumradius(k)
    t_max = t_scale * max(cir, 0.5 * rho) / rho
    m = 2 * (n + 1)
    t = chebyshev_nodes(m, t_max)
    region, sample = enclosing_sampler(k, e, t_max)

    def draw(rng, count):
        x = sample(rng, count)
        d = B.distance_batch(k, e, x)
        return (d[:, None] <= t[None, :]).astype(float)

    r = mc_mean(cfg, f"{tag}:{k.key}|{e.key}", cfg.samples, draw)
    y = region * r.mean
    cov_y = region**2 * r.cov

    # scaled unknowns c_i = binom(n,i) W_i t_max^i, nodes s = t / t_max
    s = t / t_max
    a = s[:, None] ** np.arange(n + 1)[None, :]
    scale = np.array([math.comb(n, i) * t_max**i for i in range(n + 1)])
    known = dict(known or {})
    free = [i for i in range(n + 1) if i not in known]
    rhs = y.copy()
    for i, val in known.items():
        rhs -= a[:, i] * val * scale[i]
    af = a[:, free]

    # whiten with the node covariance (ridge keeps it positive definite)
    ridge = 1e-12 * max(float(np.trace(cov_y)) / m, 1e-300)
    try:
        chol = np.linalg.cholesky(cov_y + ridge * np.eye(m))
        wa = np.linalg.solve(chol, af)
        wb = np.linalg.solve(chol, rhs)
    except np.linalg.LinAlgError:
        chol = None
        wa, wb = af, rhs
    q, rr = np.linalg.qr(wa)
    cf = np.linalg.solve(rr, q.T @ wb)
    pinv = np.linalg.solve(rr, q.T)
    if chol is not None:
        pinv = pinv @ np.linalg.inv(chol)
    cov_c = pinv @ cov_y @ pinv.T

    resid = rhs - af @ cf
    noise = np.sqrt(np.maximum(np.diag(cov_y), 0.0))
    dof = max(m - len(free), 1)
    if chol is not None:
        chi = float(np.linalg.norm(np.linalg.solve(chol, resid)) / math.sqrt(dof))
    else:
        chi = float(np.abs(resid).max() / max(noise.max(), 1e-300))
    if cfg.samples >= 1000 and chi > 5.0:
        raise IllConditionedFit(f"Steiner fit residual is {chi:.2f} times the sampling noise")

    wvals = np.zeros(n + 1)
    cov = np.zeros((n + 1, n + 1))
    for i, val in known.items():
        wvals[i] = val
    sf = scale[free]
    wvals[free] = cf / sf
    cov[np.ix_(free, free)] = cov_c / np.outer(sf, sf)
    return SteinerCoefficients(n, wvals, "mc_fit", np.sqrt(np.maximum(np.diag(cov), 0.0)), cov,
                               t_max, chi)


def _facets(k: B.ConvexBody):
    """(unit outer normals, facet areas) of a full-dimensional polytope, else None."""
    if k.vertices() is None:
        return None
    g = k.geometry
    if g.k != k.dim or g.hull is None:
        return None
    hull = g.hull
    normals = hull.equations[:, :-1] @ g.q.T
    areas = np.array([_facet_area(g.coords[s]) for s in hull.simplices])
    return normals, areas


def _facet_area(pts):
    d = pts[1:] - pts[0]
    m = len(d)
    return math.sqrt(max(np.linalg.det(d @ d.T), 0.0)) / math.factorial(m)


def mixed_facet_term(k: B.ConvexBody, e: B.ConvexBody):
    """(1/n) sum_F h_E(u_F) area(F) over the facets of a polytope K, i.e. W_1(K;E)."""
    f = _facets(k)
    if f is None:
        return None
    u, a = f
    return float(e.support(u) @ a) / k.dim


def known_coefficients(k: B.ConvexBody, e: B.ConvexBody) -> dict[int, float]:
    n = k.dim
    known = {}
    ve = exact_volume(e)
    if ve is not None:
        known[n] = ve
    vk = exact_volume(k)
    if vk is not None:
        known[0] = vk
    if n >= 2:
        w1 = mixed_facet_term(k, e)
        if w1 is not None:
            known[1] = w1
        wn1 = mixed_facet_term(e, k)
        if wn1 is not None:
            known[n - 1] = wn1
    return known


def relative_steiner(k: B.ConvexBody, e: B.ConvexBody, cfg: MCConfig | None = None) -> SteinerCoefficients:
    """Closed form when available, otherwise a Monte-Carlo fit."""
    ex = exact_steiner(k, e)
    if ex is not None:
        return ex
    return steiner_fit(k, e, cfg, known=known_coefficients(k, e))


def _affine_reduction(k: B.ConvexBody):
    """Express a lower-dimensional polytope in coordinates of its affine hull."""
    v = k.vertices()
    if v is None:
        return None
    g = k.geometry
    if g.k >= k.dim or g.k == 0:
        return None
    return B.PolytopeV(g.coords) if g.k > 0 else B.Point(np.zeros(1))


@dataclass
class IntrinsicVolumes:
    values: np.ndarray
    stderr: np.ndarray
    method: str
    cov: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.cov is None:
            self.cov = np.diag(np.asarray(self.stderr) ** 2)

    def __getitem__(self, i):
        return Estimate(float(self.values[i]), float(self.stderr[i]))

    def total(self) -> Estimate:
        """sum_i V_i, the classical Wills functional."""
        one = np.ones(len(self.values))
        return Estimate(float(self.values.sum()), math.sqrt(max(float(one @ self.cov @ one), 0.0)))

    def as_dict(self):
        return {"V": self.values.tolist(), "stderr": self.stderr.tolist(), "method": self.method}


_IV_CACHE: dict[tuple, IntrinsicVolumes] = {}


def intrinsic_volumes(k: B.ConvexBody, cfg: MCConfig | None = None) -> IntrinsicVolumes:
    cfg = cfg or MCConfig()
    n = k.dim
    ex = exact_intrinsic_volumes(k)
    if ex is not None:
        return IntrinsicVolumes(ex, np.zeros(n + 1), "closed_form")
    red = _affine_reduction(k)
    if red is not None:
        sub = intrinsic_volumes(red, cfg)
        vals = _pad(sub.values, n)
        se = _pad(sub.stderr, n)
        cov = np.zeros((n + 1, n + 1))
        m = len(sub.values)
        cov[:m, :m] = sub.cov
        return IntrinsicVolumes(vals, se, sub.method, cov)
    if isinstance(k, (B.Translate, B.Negate)):
        return intrinsic_volumes(k.body, cfg)
    factor = None
    if isinstance(k, B.Scale) and k.factor > 0:
        factor = k.factor
    elif isinstance(k, B.LinearImage) and k.similarity is not None:
        factor = k.similarity
    if factor is not None:
        sub = intrinsic_volumes(k.body, cfg)
        c = factor ** np.arange(n + 1)
        return IntrinsicVolumes(sub.values * c, sub.stderr * c, sub.method, sub.cov * np.outer(c, c))
    key = (k.key, cfg.key())
    hit = _IV_CACHE.get(key)
    if hit is not None:
        return hit
    pb = B.polytope_ball_form(k) if isinstance(k, B.MinkowskiSum) else None
    if pb is not None and pb[1] > 0 and len(pb[0]) > 1:
        # conv V + r B: shift the polytope's intrinsic volumes exactly
        sub = intrinsic_volumes(B.PolytopeV(pb[0]), cfg)
        m = np.array([_steiner_shift(e, pb[1], n) for e in np.eye(n + 1)]).T
        cov = m @ sub.cov @ m.T
        out = IntrinsicVolumes(m @ sub.values, np.sqrt(np.maximum(np.diag(cov), 0.0)), sub.method, cov)
        _IV_CACHE[key] = out
        return out
    if n >= 4 and k.vertices() is not None and k.geometry.k == n:
        out = _polytope_intrinsic_volumes(k, cfg)
        _IV_CACHE[key] = out
        return out
    fit = relative_steiner(k, B.Ball(n, 1.0), cfg)
    # V_i = binom(n,i) / kappa_{n-i} * W_{n-i}
    t = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        t[i, n - i] = math.comb(n, i) / kappa(n - i)
    vals = t @ fit.W
    cov = t @ fit.cov @ t.T
    out = IntrinsicVolumes(vals, np.sqrt(np.maximum(np.diag(cov), 0.0)), fit.method, cov)
    _IV_CACHE[key] = out
    return out


def _polytope_intrinsic_volumes(k: B.ConvexBody, cfg: MCConfig) -> IntrinsicVolumes:
    """V_{n-2}, V_{n-1}, V_n from the boundary; lower orders by Kubota's projection formula.

    V_j = binom(n,j) kappa_n / (kappa_j kappa_{n-j}) E vol_j(K | L) over uniform j-planes L.
    """
    from scipy.spatial import ConvexHull, QhullError

    n = k.dim
    g = k.geometry
    vals = np.zeros(n + 1)
    se = np.zeros(n + 1)
    vals[0] = 1.0
    vals[n] = g.volume_in_hull
    vals[n - 1] = g.hull.area / 2.0
    vals[n - 2] = g._ridge_term()
    vert = g.vertices
    if n - 3 >= 1:
        v1 = mean_width_V1(k, cfg)
        vals[1], se[1] = v1.value, v1.stderr
    count = max(1000, cfg.samples // 16)
    for j in range(2, n - 2):
        def draw(rng, m, j=j):
            out = np.empty(m)
            for t in range(m):
                q, _ = np.linalg.qr(rng.standard_normal((n, j)))
                try:
                    out[t] = ConvexHull(vert @ q).volume
                except QhullError:
                    out[t] = 0.0
            return out

        r = mc_mean(cfg, f"kubota{j}:{k.key}", count, draw)
        c = math.comb(n, j) * kappa(n) / (kappa(j) * kappa(n - j))
        vals[j], se[j] = c * float(r.mean[0]), c * float(r.stderr[0])
    return IntrinsicVolumes(vals, se, "boundary+kubota")


def mean_width_V1(k: B.ConvexBody, cfg: MCConfig | None = None) -> Estimate:
    """First intrinsic volume, n kappa_n / kappa_{n-1} times the mean of h_K on the sphere."""
    ex = exact_intrinsic_volumes(k)
    if ex is not None:
        return Estimate(float(ex[1]) if len(ex) > 1 else 0.0)
    cfg = cfg or MCConfig()
    n = k.dim
    c = n * kappa(n) / kappa(n - 1)

    def draw(rng, m):
        g = rng.standard_normal((m, n))
        u = g / np.linalg.norm(g, axis=1, keepdims=True)
        # symmetrising over +-u removes the translation part of h_K
        return 0.5 * (k.support(u) + k.support(-u))

    r = mc_mean(cfg, f"V1:{k.key}", cfg.samples, draw)
    return Estimate(c * float(r.mean[0]), c * float(r.stderr[0]))


def gaussian_mean_support(k: B.ConvexBody, cfg: MCConfig | None = None) -> Estimate:
    """Monte-Carlo value of the integral of h_K against the standard Gaussian measure."""
    cfg = cfg or MCConfig()
    n = k.dim

    def draw(rng, m):
        return k.support(rng.standard_normal((m, n)))

    r = mc_mean(cfg, f"gauss_h:{k.key}", cfg.samples, draw)
    return Estimate(float(r.mean[0]), float(r.stderr[0]))
