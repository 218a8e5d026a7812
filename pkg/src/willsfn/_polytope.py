"""Polytope kernels: affine hulls, nearest points, enclosing balls, V/H conversion."""

from __future__ import annotations

import itertools
import math
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import ConvergenceFailure, UnboundedBody


def affine_frame(points: np.ndarray, rtol: float = 1e-10):
    """Return (origin, Q, coords) with Q an orthonormal basis of the affine hull."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    origin = points.mean(axis=0)
    centred = points - origin
    if len(points) == 1:
        return origin, np.zeros((points.shape[1], 0)), np.zeros((1, 0))
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    scale = max(s[0], 1e-300) if len(s) else 1.0
    k = int(np.sum(s > rtol * scale)) if s[0] > 1e-14 else 0
    q = vt[:k].T
    return origin, q, centred @ q


def unique_rows(a: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if len(a) == 0:
        return a
    scale = max(1.0, float(np.abs(a).max()))
    key = np.round(a / (tol * 1e3 * scale)).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return a[np.sort(idx)]


class PolytopeGeometry:
    """Cached geometry of conv(vertices) used by every polytopal oracle."""

    def __init__(self, vertices):
        v = unique_rows(np.atleast_2d(np.asarray(vertices, dtype=float)))
        self.n = v.shape[1]
        self.origin, self.q, y = affine_frame(v)
        self.k = self.q.shape[1]
        if self.k >= 2:
            hull = ConvexHull(y)
            keep = np.unique(hull.vertices)
            self.vertices = v[keep]
            self.coords = y[keep]
            self.hull = ConvexHull(self.coords)
        elif self.k == 1:
            lo, hi = int(np.argmin(y[:, 0])), int(np.argmax(y[:, 0]))
            self.vertices = v[[lo, hi]]
            self.coords = y[[lo, hi]]
            self.hull = None
        else:
            self.vertices = v[:1]
            self.coords = y[:1]
            self.hull = None

    # -- affine coordinates -------------------------------------------------
    def to_coords(self, x):
        d = x - self.origin
        y = d @ self.q
        perp = d - y @ self.q.T
        return y, perp

    @cached_property
    def equations(self):
        """Facet inequalities a.y <= b in hull coordinates (k >= 2)."""
        eq = self.hull.equations
        return eq[:, :-1], -eq[:, -1]

    @cached_property
    def faces(self):
        """All simplicial faces of the triangulated boundary, grouped by size."""
        groups: dict[int, set] = {}
        for simplex in self.hull.simplices:
            s = sorted(simplex.tolist())
            for r in range(1, len(s) + 1):
                for sub in itertools.combinations(s, r):
                    groups.setdefault(r, set()).add(sub)
        return {r: np.array(sorted(g), dtype=int) for r, g in groups.items()}

    # -- oracles --------------------------------------------------------------
    def support(self, u):
        return np.max(np.atleast_2d(u) @ self.vertices.T, axis=-1)

    def contains(self, x, tol=1e-10):
        x = np.atleast_2d(x)
        y, perp = self.to_coords(x)
        scale = 1.0 + np.abs(self.vertices).max()
        ok = np.linalg.norm(perp, axis=1) <= tol * scale
        if self.k >= 2:
            a, b = self.equations
            ok &= np.all(y @ a.T <= b + tol * scale, axis=1)
        elif self.k == 1:
            lo, hi = self.coords[0, 0], self.coords[1, 0]
            ok &= (y[:, 0] >= lo - tol * scale) & (y[:, 0] <= hi + tol * scale)
        return ok

    def nearest(self, x, chunk=4096):
        """Euclidean nearest points of conv(V) for each row of x."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y, perp = self.to_coords(x)
        if self.k == 0:
            py = np.zeros_like(y)
        elif self.k == 1:
            lo, hi = self.coords[0, 0], self.coords[1, 0]
            py = np.clip(y, lo, hi)
        else:
            py = np.empty_like(y)
            for s in range(0, len(y), chunk):
                py[s:s + chunk] = self._nearest_coords(y[s:s + chunk])
        p = self.origin + py @ self.q.T
        return p, np.linalg.norm(x - p, axis=1)

    def _nearest_coords(self, y):
        a, b = self.equations
        inside = np.all(y @ a.T <= b + 1e-12 * (1 + np.abs(b)), axis=1)
        best = np.full(len(y), np.inf)
        arg = y.copy()
        out = ~inside
        yo = y[out]
        if len(yo):
            bo = np.full(len(yo), np.inf)
            po = np.zeros_like(yo)
            c = self.coords
            for r, faces in self.faces.items():
                block = max(1, 400_000 // len(yo))
                for f0 in range(0, len(faces), block):
                    self._update_faces(yo, c[faces[f0:f0 + block]], bo, po)
            arg[out] = po
            best[out] = bo
        return arg

    @staticmethod
    def _update_faces(yo, pts, bo, po):
        r = pts.shape[1]
        if r == 1:
            d2 = ((yo[:, None, :] - pts[None, :, 0, :]) ** 2).sum(-1)
            j = np.argmin(d2, axis=1)
            dj = d2[np.arange(len(yo)), j]
            upd = dj < bo
            bo[upd] = dj[upd]
            po[upd] = pts[j[upd], 0]
            return
        base = pts[:, 0, :]
        bvec = pts[:, 1:, :] - base[:, None, :]  # (f, r-1, k)
        gram = np.einsum("fik,fjk->fij", bvec, bvec)
        ginv = np.linalg.pinv(gram)
        rel = yo[None, :, :] - base[:, None, :]  # (f, N, k)
        rhs = np.einsum("fnk,fik->fni", rel, bvec)
        alpha = np.einsum("fni,fij->fnj", rhs, ginv)
        valid = np.all(alpha >= -1e-12, axis=2) & (alpha.sum(axis=2) <= 1 + 1e-12)
        resid = rel - np.einsum("fni,fik->fnk", alpha, bvec)
        d2 = np.where(valid, (resid ** 2).sum(-1), np.inf)
        j = np.argmin(d2, axis=0)
        cols = np.arange(len(yo))
        dj = d2[j, cols]
        upd = dj < bo
        bo[upd] = dj[upd]
        idx = np.nonzero(upd)[0]
        jj = j[idx]
        po[idx] = base[jj] + np.einsum("ni,nik->nk", alpha[jj, idx], bvec[jj])

    def nearest_wolfe(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return x + wolfe_min_norm(self.vertices - x, tol=tol)

    # -- measures -------------------------------------------------------------
    @cached_property
    def volume_in_hull(self):
        if self.k == 0:
            return 1.0
        if self.k == 1:
            return float(self.coords[1, 0] - self.coords[0, 0])
        return float(self.hull.volume)

    @cached_property
    def intrinsic_volumes_exact(self):
        """V_0..V_k when the affine dimension k <= 3, else None."""
        k = self.k
        if k == 0:
            return np.array([1.0])
        if k == 1:
            return np.array([1.0, self.volume_in_hull])
        if k == 2:
            return np.array([1.0, self.hull.area / 2.0, self.hull.volume])
        if k == 3:
            return np.array([1.0, self._ridge_term(), self.hull.area / 2.0, self.hull.volume])
        return None

    def _ridge_term(self):
        """sum over (k-2)-faces of vol * exterior angle, i.e. V_{k-2}."""
        hull = self.hull
        normals = hull.equations[:, :-1]
        total = 0.0
        for i, simplex in enumerate(hull.simplices):
            for j, nb in enumerate(hull.neighbors[i]):
                if nb <= i:
                    continue
                a, b = normals[i], normals[nb]
                # acos loses half the digits near 1; the half-angle form does not
                ang = 2.0 * math.atan2(np.linalg.norm(a - b), np.linalg.norm(a + b))
                if ang < 1e-12:
                    continue
                ridge = self.coords[np.delete(simplex, j)]
                total += _simplex_volume(ridge) * ang / (2 * math.pi)
        return total


def _simplex_volume(pts):
    m = len(pts) - 1
    if m == 0:
        return 1.0
    b = pts[1:] - pts[0]
    g = b @ b.T
    return math.sqrt(max(np.linalg.det(g), 0.0)) / math.factorial(m)


def wolfe_min_norm(p, tol=1e-12, max_iter=10_000):
    """Minimum-norm point of conv(rows of p) by Wolfe's algorithm."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    scale = max(1.0, float((p * p).sum(axis=1).max()))
    s = [int(np.argmin((p * p).sum(axis=1)))]
    w = np.array([1.0])
    x = p[s[0]].copy()
    for _ in range(max_iter):
        j = int(np.argmin(p @ x))
        if x @ x - x @ p[j] <= tol * scale or j in s:
            return x
        s.append(j)
        w = np.append(w, 0.0)
        while True:
            ps = p[s]
            kkt = np.zeros((len(s) + 1, len(s) + 1))
            kkt[:-1, :-1] = ps @ ps.T
            kkt[:-1, -1] = 1.0
            kkt[-1, :-1] = 1.0
            rhs = np.zeros(len(s) + 1)
            rhs[-1] = 1.0
            v = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:-1]
            if np.all(v > tol):
                w = v
                break
            neg = v <= tol
            ratios = w[neg] / np.maximum(w[neg] - v[neg], 1e-300)
            theta = min(1.0, float(ratios.min()))
            w = theta * v + (1 - theta) * w
            w[w < tol] = 0.0
            keep = w > 0
            s = [si for si, kp in zip(s, keep) if kp]
            w = w[keep]
            if len(s) == 1:
                w = np.array([1.0])
                break
        x = w @ p[s]
    raise ConvergenceFailure("Wolfe nearest-point iteration did not converge")


def _circumsphere(b):
    b = np.asarray(b, dtype=float)
    if len(b) == 0:
        return None, -1.0
    if len(b) == 1:
        return b[0].copy(), 0.0
    p0 = b[0]
    q = b[1:] - p0
    g = q @ q.T
    alpha = np.linalg.lstsq(2 * g, np.diag(g), rcond=None)[0]
    c = p0 + alpha @ q
    return c, float(np.max(np.linalg.norm(b - c, axis=1)))


def min_enclosing_ball(points, seed=0):
    """Smallest enclosing ball (center, radius) by Welzl's move-to-front scheme."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    pts = unique_rows(pts)
    d = pts.shape[1]
    order = np.random.default_rng(seed).permutation(len(pts))
    lst = [pts[i] for i in order]
    scale = 1.0 + float(np.abs(pts).max())

    def inside(c, r, p):
        return c is not None and np.linalg.norm(p - c) <= r + 1e-12 * scale

    def mtf(end, boundary):
        c, r = _circumsphere(boundary)
        if len(boundary) == d + 1:
            return c, r
        i = 0
        while i < end:
            p = lst[i]
            if not inside(c, r, p):
                c, r = mtf(i, boundary + [p])
                lst.insert(0, lst.pop(i))
            i += 1
        return c, r

    c, r = mtf(len(lst), [])
    # final polish: radius is the true max distance from the found center
    r = float(np.max(np.linalg.norm(pts - c, axis=1)))
    return c, r


def _chebyshev_center(a, b):
    """Centre and radius of the largest ball in {x : a x <= b}, or None if empty."""
    from scipy.optimize import linprog

    m, n = a.shape
    norms = np.linalg.norm(a, axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.hstack([a, norms[:, None]]), b_ub=b,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status == 2:
        return None
    if res.status == 3:
        raise UnboundedBody("halfspace system is unbounded")
    if res.status != 0:
        raise ConvergenceFailure(f"Chebyshev centre LP failed: {res.message}")
    return res.x[:n], float(res.x[-1])


def vertices_from_halfspaces(a, b, tol=1e-9):
    """Vertices of {x : a x <= b} by qhull when full-dimensional, else brute force."""
    from scipy.spatial import HalfspaceIntersection

    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    scale = 1.0 + np.abs(b).max()
    try:
        cc = _chebyshev_center(a, b)
    except UnboundedBody:
        cc = False
    if cc is None:
        return np.zeros((0, n))
    if cc and cc[1] > 1e-7 * scale:
        try:
            hs = HalfspaceIntersection(np.hstack([a, -b[:, None]]), cc[0])
            v = hs.intersections
            if np.all(np.isfinite(v)):
                return unique_rows(v, tol=1e-10)
        except QhullError:
            pass
    # flat or unbounded systems: enumerate n-subsets of constraints
    if math.comb(m, n) > 200_000:
        raise ValueError("too many halfspaces for brute-force vertex enumeration")
    out = []
    for rows in itertools.combinations(range(m), n):
        sub = a[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12 * max(1.0, np.abs(sub).max()) ** n:
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        if np.all(a @ x <= b + tol * scale):
            out.append(x)
    if not out:
        return np.zeros((0, n))
    return unique_rows(np.array(out), tol=1e-10)


def halfspaces_from_vertices(v):
    """Facet inequalities (a, b) of a full-dimensional polytope."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    try:
        hull = ConvexHull(v)
    except QhullError as exc:
        raise ValueError("polytope is not full-dimensional") from exc
    eq = hull.equations
    a, b = eq[:, :-1], -eq[:, -1]
    ab = unique_rows(np.hstack([a, b[:, None]]), tol=1e-9)
    return ab[:, :-1], ab[:, -1]


def lp_support(a, b, u):
    """max <u,x> s.t. a x <= b via HiGHS."""
    from scipy.optimize import linprog

    res = linprog(-np.asarray(u, float), A_ub=a, b_ub=b, bounds=[(None, None)] * a.shape[1],
                  method="highs")
    if res.status == 3:
        raise UnboundedBody("halfspace description is unbounded")
    if res.status == 2:
        raise ValueError("halfspace description is empty")
    if res.status != 0:
        raise ConvergenceFailure(res.message)
    return float(-res.fun), res.x
