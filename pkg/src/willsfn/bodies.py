"""Constructive convex bodies and their geometric oracles.

Every body is an immutable expression tree. The leaves are the primitive
kinds (ball, box, ellipsoid, polytopes, segment, point) and the inner nodes
are Minkowski operations (scale, negate, translate, sum), intersections,
orthogonal products and linear images.

Oracles work on batches: a direction or point argument may be a single
vector of shape (n,) or an array of shape (m, n).
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import _polytope as poly
from .errors import (
    BodySpecError,
    ConvergenceFailure,
    EmptySection,
    OriginNotInterior,
    UnboundedBody,
    UnsupportedOperation,
    UnsupportedSection,
)

log = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-10


def _vec(x, n=None, name="vector"):
    a = np.asarray(x, dtype=float).reshape(-1)
    if n is not None and a.shape != (n,):
        raise ValueError(f"{name} must have length {n}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


def _rows(x, n):
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape[1] != n:
        raise ValueError(f"expected vectors of length {n}, got shape {a.shape}")
    return a, single


class Subspace:
    """A k-dimensional linear subspace of R^n given by an orthonormal basis."""

    def __init__(self, basis, n: int | None = None, tol: float = 1e-12):
        b = np.atleast_2d(np.asarray(basis, dtype=float))
        if b.size == 0:
            if n is None:
                raise ValueError("ambient dimension required for the zero subspace")
            b = np.zeros((0, n))
        if n is not None and b.shape[1] != n:
            raise ValueError("basis vectors have the wrong length")
        g = b @ b.T
        if not np.allclose(g, np.eye(len(b)), atol=tol * 10):
            raise ValueError("basis is not orthonormal")
        self.basis = b
        self.n = b.shape[1]
        self.k = b.shape[0]

    @property
    def q(self):
        """n x k matrix whose columns span the subspace."""
        return self.basis.T

    @classmethod
    def coordinate(cls, n: int, indices: Iterable[int]) -> "Subspace":
        idx = list(indices)
        return cls(np.eye(n)[idx], n)

    @classmethod
    def span(cls, vectors, n: int | None = None) -> "Subspace":
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        q, r = np.linalg.qr(v.T)
        keep = np.abs(np.diag(r)) > 1e-12
        return cls(q[:, keep].T, v.shape[1] if n is None else n)

    @classmethod
    def hyperplane(cls, v) -> "Subspace":
        """The orthogonal complement of a nonzero vector."""
        v = _vec(v)
        return cls.span(v[None, :]).complement()

    def complement(self) -> "Subspace":
        if self.k == 0:
            return Subspace(np.eye(self.n), self.n)
        _, _, vt = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(vt[self.k:], self.n)

    def coords(self, x):
        return np.asarray(x, dtype=float) @ self.q

    def embed(self, y):
        return np.asarray(y, dtype=float) @ self.basis

    def coordinate_selection(self):
        """If every basis vector is +-e_j, return [(j, sign)], else None."""
        out = []
        for row in self.basis:
            j = int(np.argmax(np.abs(row)))
            if abs(abs(row[j]) - 1.0) > 1e-12 or np.sum(np.abs(row) > 1e-12) != 1:
                return None
            out.append((j, 1.0 if row[j] > 0 else -1.0))
        return out

    def to_dict(self):
        return {"dim": self.n, "basis": self.basis.tolist()}


# ---------------------------------------------------------------------------
# base class
# ---------------------------------------------------------------------------


class ConvexBody:
    """Nonempty compact convex set in R^dim."""

    kind: str = "abstract"

    def __init__(self, dim: int):
        if int(dim) != dim or dim < 1:
            raise ValueError("dimension must be a positive integer")
        self.dim = int(dim)

    # public oracles ---------------------------------------------------------
    def support(self, u):
        """h_K(u) = max <z, u> over z in K."""
        a, single = _rows(u, self.dim)
        h = self._support(a)
        return float(h[0]) if single else h

    def contains(self, x, tol: float = MEMBERSHIP_TOL):
        a, single = _rows(x, self.dim)
        c = self._contains(a, tol)
        return bool(c[0]) if single else c

    def nearest(self, x):
        """Euclidean nearest points and distances, shape (m, n) and (m,)."""
        a, _ = _rows(x, self.dim)
        return self._nearest(a)

    def distance(self, x):
        a, single = _rows(x, self.dim)
        d = self._nearest(a)[1]
        return float(d[0]) if single else d

    @property
    def has_nearest(self) -> bool:
        return self._has_nearest()

    @property
    def symmetric(self) -> bool:
        return False

    def vertices(self):
        """Vertex array when the body is a polytope that can be enumerated, else None."""
        return self._vertices_cached

    @cached_property
    def _vertices_cached(self):
        v = self._vertices()
        if v is None:
            return None
        return poly.unique_rows(np.atleast_2d(v))

    @cached_property
    def geometry(self):
        v = self.vertices()
        if v is None:
            return None
        return poly.PolytopeGeometry(v)

    def halfspaces(self):
        """(A, b) with K = {x : A x <= b} for full-dimensional polytopes, else None."""
        return self._halfspaces_cached

    @cached_property
    def _halfspaces_cached(self):
        return self._halfspaces()

    def bounding_box(self):
        e = np.eye(self.dim)
        hi = self._support(e)
        lo = -self._support(-e)
        return lo, hi

    @cached_property
    def key(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        return isinstance(other, ConvexBody) and self.key == other.key

    def __repr__(self):
        s = self.key
        return f"<{type(self).__name__} {s[:120]}{'...' if len(s) > 120 else ''}>"

    # operators ------------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, ConvexBody):
            return MinkowskiSum(self, other)
        return Translate(self, other)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        if isinstance(other, ConvexBody):
            return MinkowskiSum(self, Negate(other))
        return Translate(self, -np.asarray(other, dtype=float))

    def __neg__(self):
        return Negate(self)

    def __mul__(self, factor):
        return Scale(self, factor)

    __rmul__ = __mul__

    # structural hooks --------------------------------------------------------
    def _support(self, u):
        raise NotImplementedError

    def _contains(self, x, tol):
        _, d = self._nearest(x)
        return d <= tol * (1.0 + np.linalg.norm(x, axis=1))

    def _nearest(self, x):
        g = self.geometry
        if g is not None:
            return g.nearest(x)
        raise UnsupportedOperation(f"no Euclidean projection for {self.kind}")

    def _has_nearest(self):
        return self.vertices() is not None

    def _vertices(self):
        return None

    def _halfspaces(self):
        v = self.vertices()
        if v is None:
            return None
        try:
            return poly.halfspaces_from_vertices(v)
        except ValueError:
            return None

    def ball_zonotope(self):
        """Normal form (c, r, G) with K = c + r B + sum_j [0, G_j], or None."""
        return None

    def ellipsoid_form(self):
        """(c, S) with K = {x : |S (x - c)| <= 1} and S invertible, or None."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError

    def children(self) -> Sequence["ConvexBody"]:
        return ()


# ---------------------------------------------------------------------------
# primitive kinds
# ---------------------------------------------------------------------------


class Ball(ConvexBody):
    kind = "ball"

    def __init__(self, dim: int, radius: float = 1.0):
        super().__init__(dim)
        r = float(radius)
        if not (r > 0 and math.isfinite(r)):
            raise ValueError("ball radius must be positive")
        self.radius = r

    @property
    def symmetric(self):
        return True

    def _support(self, u):
        return self.radius * np.linalg.norm(u, axis=1)

    def _contains(self, x, tol):
        return np.linalg.norm(x, axis=1) <= self.radius * (1 + tol) + tol

    def _nearest(self, x):
        nrm = np.linalg.norm(x, axis=1)
        f = np.minimum(1.0, self.radius / np.maximum(nrm, 1e-300))
        return x * f[:, None], np.maximum(nrm - self.radius, 0.0)

    def _has_nearest(self):
        return True

    def gauge(self, x):
        return np.linalg.norm(x, axis=1) / self.radius

    def ball_zonotope(self):
        return np.zeros(self.dim), self.radius, np.zeros((0, self.dim))

    def ellipsoid_form(self):
        return np.zeros(self.dim), np.eye(self.dim) / self.radius

    def to_dict(self):
        return {"dim": self.dim, "kind": "ball", "radius": self.radius}


class Box(ConvexBody):
    kind = "box"

    def __init__(self, intervals):
        iv = np.asarray(intervals, dtype=float)
        if iv.ndim != 2 or iv.shape[1] != 2 or len(iv) == 0:
            raise ValueError("box intervals must be a list of (lo, hi) pairs")
        if not np.all(np.isfinite(iv)) or np.any(iv[:, 0] > iv[:, 1]):
            raise ValueError("box intervals must satisfy lo <= hi")
        super().__init__(len(iv))
        self.lo = iv[:, 0].copy()
        self.hi = iv[:, 1].copy()

    @classmethod
    def cube(cls, n: int, lo: float = 0.0, hi: float = 1.0) -> "Box":
        return cls([[lo, hi]] * n)

    @property
    def widths(self):
        return self.hi - self.lo

    @property
    def symmetric(self):
        return bool(np.all(self.lo == -self.hi))

    def _support(self, u):
        return np.maximum(u * self.lo, u * self.hi).sum(axis=1)

    def _contains(self, x, tol):
        s = tol * (1 + np.abs(x))
        return np.all((x >= self.lo - s) & (x <= self.hi + s), axis=1)

    def _nearest(self, x):
        p = np.clip(x, self.lo, self.hi)
        return p, np.linalg.norm(x - p, axis=1)

    def _has_nearest(self):
        return True

    def gauge(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            pos = np.where(x > 0, x / self.hi, 0.0)
            neg = np.where(x < 0, x / self.lo, 0.0)
        return np.maximum(pos, neg).max(axis=1)

    def _vertices(self):
        if self.dim > 14:
            return None
        corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(self.lo, self.hi)], indexing="ij"))
        return corners.reshape(self.dim, -1).T

    def _halfspaces(self):
        e = np.eye(self.dim)
        return np.vstack([e, -e]), np.concatenate([self.hi, -self.lo])

    def ball_zonotope(self):
        w = self.widths
        nz = w > 0
        return self.lo.copy(), 0.0, (np.eye(self.dim) * w)[nz]

    def to_dict(self):
        return {"dim": self.dim, "kind": "box", "intervals": np.column_stack([self.lo, self.hi]).tolist()}


class Ellipsoid(ConvexBody):
    """Axis-aligned ellipsoid centred at the origin."""

    kind = "ellipsoid"

    def __init__(self, semi_axes):
        a = _vec(semi_axes, name="semi_axes")
        if len(a) == 0 or np.any(a <= 0):
            raise ValueError("semi-axes must be positive")
        super().__init__(len(a))
        self.semi_axes = a

    @property
    def symmetric(self):
        return True

    def _support(self, u):
        return np.linalg.norm(u * self.semi_axes, axis=1)

    def gauge(self, x):
        return np.linalg.norm(x / self.semi_axes, axis=1)

    def _contains(self, x, tol):
        return self.gauge(x) <= 1 + tol

    def _has_nearest(self):
        return True

    def _nearest(self, x):
        a2 = self.semi_axes**2
        out = self.gauge(x) > 1
        p = x.copy()
        xo = x[out]
        if len(xo):
            # Newton on g(mu) = sum a^2 x^2 / (a^2 + mu)^2 - 1, convex decreasing
            mu = np.zeros(len(xo))
            c = a2 * xo**2
            for _ in range(200):
                den = a2 + mu[:, None]
                g = (c / den**2).sum(axis=1) - 1.0
                dg = (-2 * c / den**3).sum(axis=1)
                step = g / dg
                mu = mu - step
                if np.all(np.abs(step) <= 1e-15 * (1 + mu)):
                    break
            p[out] = a2 * xo / (a2 + mu[:, None])
        return p, np.linalg.norm(x - p, axis=1)

    def ball_zonotope(self):
        a = self.semi_axes
        if np.allclose(a, a[0], rtol=1e-15, atol=0):
            return np.zeros(self.dim), float(a[0]), np.zeros((0, self.dim))
        return None

    def ellipsoid_form(self):
        return np.zeros(self.dim), np.diag(1.0 / self.semi_axes)

    def to_dict(self):
        return {"dim": self.dim, "kind": "ellipsoid", "semi_axes": self.semi_axes.tolist()}


class PolytopeV(ConvexBody):
    kind = "polytope_v"

    def __init__(self, vertices):
        v = np.atleast_2d(np.asarray(vertices, dtype=float))
        if v.ndim != 2 or v.size == 0 or not np.all(np.isfinite(v)):
            raise ValueError("vertices must be a nonempty list of finite vectors")
        super().__init__(v.shape[1])
        self.points = v

    @property
    def symmetric(self):
        v = self.vertices()
        key = {tuple(np.round(p, 12)) for p in v}
        return all(tuple(np.round(-p, 12)) in key for p in v)

    def _support(self, u):
        return np.max(u @ self.points.T, axis=1)

    def _contains(self, x, tol):
        return self.geometry.contains(x, tol)

    def _vertices(self):
        return self.points

    def ball_zonotope(self):
        v = self.vertices()
        if len(v) == 1:
            return v[0].copy(), 0.0, np.zeros((0, self.dim))
        if len(v) == 2:
            return v[0].copy(), 0.0, (v[1] - v[0])[None, :]
        return None

    def to_dict(self):
        return {"dim": self.dim, "kind": "polytope_v", "vertices": self.points.tolist()}


class PolytopeH(ConvexBody):
    """{x : <a_i, x> <= b_i}; boundedness is verified at construction."""

    kind = "polytope_h"

    def __init__(self, normals, offsets):
        a = np.atleast_2d(np.asarray(normals, dtype=float))
        b = _vec(offsets, name="offsets")
        if a.shape[0] != len(b) or a.size == 0:
            raise ValueError("normals and offsets must have matching lengths")
        if not np.all(np.isfinite(a)):
            raise ValueError("normals must be finite")
        super().__init__(a.shape[1])
        self.a = a
        self.b = b
        e = np.eye(self.dim)
        for u in np.vstack([e, -e]):
            poly.lp_support(a, b, u)  # raises UnboundedBody / ValueError when empty

    @property
    def symmetric(self):
        rows = {tuple(np.round(np.append(ai, bi) / max(np.linalg.norm(ai), 1e-300), 12))
                for ai, bi in zip(self.a, self.b)}
        return all(tuple(np.round(np.append(-ai, bi) / max(np.linalg.norm(ai), 1e-300), 12)) in rows
                   for ai, bi in zip(self.a, self.b))

    def _support(self, u):
        v = self.vertices()
        if v is not None:
            return np.max(u @ v.T, axis=1)
        return np.array([poly.lp_support(self.a, self.b, ui)[0] for ui in u])

    def _contains(self, x, tol):
        scale = 1 + np.abs(self.b)
        return np.all(x @ self.a.T <= self.b + tol * scale, axis=1)

    def gauge(self, x):
        if np.any(self.b <= 0):
            raise OriginNotInterior("origin is not interior to the halfspace body")
        return np.maximum(0.0, (x @ self.a.T / self.b).max(axis=1))

    def _vertices(self):
        try:
            return poly.vertices_from_halfspaces(self.a, self.b)
        except ValueError:
            return None

    def _halfspaces(self):
        return self.a, self.b

    def to_dict(self):
        hs = [{"normal": ai.tolist(), "offset": float(bi)} for ai, bi in zip(self.a, self.b)]
        return {"dim": self.dim, "kind": "polytope_h", "halfspaces": hs}


class Segment(ConvexBody):
    kind = "segment"

    def __init__(self, a, b):
        a = _vec(a, name="endpoint")
        b = _vec(b, len(a), name="endpoint")
        super().__init__(len(a))
        self.a, self.b = a, b

    @property
    def length(self):
        return float(np.linalg.norm(self.b - self.a))

    @property
    def symmetric(self):
        return bool(np.allclose(self.a, -self.b, atol=0))

    def _support(self, u):
        return np.maximum(u @ self.a, u @ self.b)

    def _has_nearest(self):
        return True

    def _nearest(self, x):
        d = self.b - self.a
        dd = d @ d
        if dd == 0:
            t = np.zeros(len(x))
        else:
            t = np.clip((x - self.a) @ d / dd, 0.0, 1.0)
        p = self.a + t[:, None] * d
        return p, np.linalg.norm(x - p, axis=1)

    def _vertices(self):
        return np.vstack([self.a, self.b])

    def ball_zonotope(self):
        return self.a.copy(), 0.0, (self.b - self.a)[None, :]

    def to_dict(self):
        return {"dim": self.dim, "kind": "segment", "endpoints": [self.a.tolist(), self.b.tolist()]}


class Point(ConvexBody):
    kind = "point"

    def __init__(self, location):
        p = _vec(location, name="location")
        super().__init__(len(p))
        self.location = p

    @classmethod
    def origin(cls, n):
        return cls(np.zeros(n))

    @property
    def symmetric(self):
        return bool(np.all(self.location == 0))

    def _support(self, u):
        return u @ self.location

    def _has_nearest(self):
        return True

    def _nearest(self, x):
        p = np.broadcast_to(self.location, x.shape).copy()
        return p, np.linalg.norm(x - p, axis=1)

    def _vertices(self):
        return self.location[None, :]

    def ball_zonotope(self):
        return self.location.copy(), 0.0, np.zeros((0, self.dim))

    def to_dict(self):
        return {"dim": self.dim, "kind": "point", "location": self.location.tolist()}


# ---------------------------------------------------------------------------
# composite kinds
# ---------------------------------------------------------------------------


class Scale(ConvexBody):
    kind = "scale"

    def __init__(self, body: ConvexBody, factor: float):
        f = float(factor)
        if not (f >= 0 and math.isfinite(f)):
            raise ValueError("scale factor must be nonnegative")
        super().__init__(body.dim)
        self.body, self.factor = body, f

    def children(self):
        return (self.body,)

    @property
    def symmetric(self):
        return self.factor == 0 or self.body.symmetric

    def _support(self, u):
        return self.factor * self.body._support(u)

    def _contains(self, x, tol):
        if self.factor == 0:
            return np.linalg.norm(x, axis=1) <= tol
        return self.body._contains(x / self.factor, tol)

    def _has_nearest(self):
        return self.factor == 0 or self.body.has_nearest

    def _nearest(self, x):
        if self.factor == 0:
            return np.zeros_like(x), np.linalg.norm(x, axis=1)
        p, d = self.body._nearest(x / self.factor)
        return p * self.factor, d * self.factor

    def gauge(self, x):
        return gauge_batch(self.body, x) / self.factor

    def _vertices(self):
        v = self.body.vertices()
        return None if v is None else v * self.factor

    def ball_zonotope(self):
        nf = self.body.ball_zonotope()
        if nf is None:
            return None
        c, r, g = nf
        return c * self.factor, r * self.factor, g * self.factor

    def ellipsoid_form(self):
        ef = self.body.ellipsoid_form()
        if ef is None or self.factor == 0:
            return None
        return ef[0] * self.factor, ef[1] / self.factor

    def to_dict(self):
        return {"dim": self.dim, "kind": "scale", "factor": self.factor, "body": self.body.to_dict()}


class Negate(ConvexBody):
    kind = "negate"

    def __init__(self, body: ConvexBody):
        super().__init__(body.dim)
        self.body = body

    def children(self):
        return (self.body,)

    @property
    def symmetric(self):
        return self.body.symmetric

    def _support(self, u):
        return self.body._support(-u)

    def _contains(self, x, tol):
        return self.body._contains(-x, tol)

    def _has_nearest(self):
        return self.body.has_nearest

    def _nearest(self, x):
        p, d = self.body._nearest(-x)
        return -p, d

    def gauge(self, x):
        return gauge_batch(self.body, -x)

    def _vertices(self):
        v = self.body.vertices()
        return None if v is None else -v

    def ball_zonotope(self):
        nf = self.body.ball_zonotope()
        if nf is None:
            return None
        c, r, g = nf
        return -c - g.sum(axis=0), r, g

    def ellipsoid_form(self):
        ef = self.body.ellipsoid_form()
        return None if ef is None else (-ef[0], ef[1])

    def to_dict(self):
        return {"dim": self.dim, "kind": "negate", "body": self.body.to_dict()}


class Translate(ConvexBody):
    kind = "translate"

    def __init__(self, body: ConvexBody, vector):
        super().__init__(body.dim)
        self.body = body
        self.vector = _vec(vector, body.dim, "translation")

    def children(self):
        return (self.body,)

    @property
    def symmetric(self):
        return bool(np.all(self.vector == 0)) and self.body.symmetric

    def _support(self, u):
        return self.body._support(u) + u @ self.vector

    def _contains(self, x, tol):
        return self.body._contains(x - self.vector, tol)

    def _has_nearest(self):
        return self.body.has_nearest

    def _nearest(self, x):
        p, d = self.body._nearest(x - self.vector)
        return p + self.vector, d

    def _vertices(self):
        v = self.body.vertices()
        return None if v is None else v + self.vector

    def ball_zonotope(self):
        nf = self.body.ball_zonotope()
        if nf is None:
            return None
        c, r, g = nf
        return c + self.vector, r, g

    def ellipsoid_form(self):
        ef = self.body.ellipsoid_form()
        return None if ef is None else (ef[0] + self.vector, ef[1])

    def to_dict(self):
        return {"dim": self.dim, "kind": "translate", "vector": self.vector.tolist(),
                "body": self.body.to_dict()}


def ball_form(body: ConvexBody):
    """(center, radius) if the body is a Euclidean ball, else None."""
    nf = body.ball_zonotope()
    if nf is None:
        return None
    c, r, g = nf
    if len(g) or r <= 0:
        return None
    return c, r


def polytope_ball_form(body: ConvexBody):
    """(V, r) with body = conv V + r B^n, or None."""
    bf = ball_form(body)
    if bf is not None:
        return bf[0][None, :], bf[1]
    if isinstance(body, MinkowskiSum):
        a, b = polytope_ball_form(body.left), polytope_ball_form(body.right)
        if a is None or b is None or len(a[0]) * len(b[0]) > 20_000:
            return None
        s = (a[0][:, None, :] + b[0][None, :, :]).reshape(-1, body.dim)
        return poly.PolytopeGeometry(s).vertices, a[1] + b[1]
    if isinstance(body, (Scale, Negate, Translate)):
        inner = polytope_ball_form(body.body)
        if inner is None:
            return None
        v, r = inner
        if isinstance(body, Scale):
            return v * body.factor, r * body.factor
        if isinstance(body, Negate):
            return -v, r
        return v + body.vector, r
    v = body.vertices()
    return None if v is None else (v, 0.0)


class MinkowskiSum(ConvexBody):
    kind = "minkowski_sum"

    def __init__(self, left: ConvexBody, right: ConvexBody):
        if left.dim != right.dim:
            raise ValueError("Minkowski summands must share the ambient dimension")
        super().__init__(left.dim)
        self.left, self.right = left, right

    def children(self):
        return (self.left, self.right)

    @property
    def symmetric(self):
        return self.left.symmetric and self.right.symmetric

    def _support(self, u):
        return self.left._support(u) + self.right._support(u)

    @cached_property
    def _ball_split(self):
        for a, b in ((self.left, self.right), (self.right, self.left)):
            bf = ball_form(b)
            if bf is not None and a.has_nearest:
                return a, bf
        return None

    def _has_nearest(self):
        if self._ball_split is not None or self.vertices() is not None:
            return True
        return self.ball_zonotope() is not None or self._polytope_ball is not None

    @cached_property
    def _polytope_ball(self):
        return polytope_ball_form(self)

    def _nearest(self, x):
        split = self._ball_split
        if split is not None:
            a, (c, r) = split
            pa, da = a._nearest(x - c)
            pa = pa + c
            far = da > r
            p = x.copy()
            if np.any(far):
                p[far] = pa[far] + (x[far] - pa[far]) * (r / da[far])[:, None]
            return p, np.maximum(da - r, 0.0)
        if self.vertices() is not None:
            return self.geometry.nearest(x)
        nf = self.ball_zonotope()
        if nf is not None:
            c, r, g = nf
            z = zonotope_body(c, g)
            return Translate(MinkowskiSum(Translate(z, -c), Ball(self.dim, r)), c)._nearest(x) \
                if r > 0 else z._nearest(x)
        pb = self._polytope_ball
        if pb is not None:
            v, r = pb
            core = PolytopeV(v)
            return MinkowskiSum(core, Ball(self.dim, r))._nearest(x) if r > 0 else core._nearest(x)
        raise UnsupportedOperation("no Euclidean projection for this Minkowski sum")

    def _vertices(self):
        va, vb = self.left.vertices(), self.right.vertices()
        if va is None or vb is None or len(va) * len(vb) > 20_000:
            return None
        s = (va[:, None, :] + vb[None, :, :]).reshape(-1, self.dim)
        return poly.PolytopeGeometry(s).vertices

    def ball_zonotope(self):
        a, b = self.left.ball_zonotope(), self.right.ball_zonotope()
        if a is None or b is None:
            return None
        return a[0] + b[0], a[1] + b[1], np.vstack([a[2], b[2]])

    def to_dict(self):
        return {"dim": self.dim, "kind": "minkowski_sum",
                "bodies": [self.left.to_dict(), self.right.to_dict()]}


class Intersection(ConvexBody):
    kind = "intersection"

    def __init__(self, left: ConvexBody, right: ConvexBody):
        if left.dim != right.dim:
            raise ValueError("intersected bodies must share the ambient dimension")
        super().__init__(left.dim)
        self.left, self.right = left, right
        self._simple = _simplify_intersection(left, right)
        if self._simple is None:
            self._check_nonempty()

    def children(self):
        return (self.left, self.right)

    @property
    def symmetric(self):
        return self.left.symmetric and self.right.symmetric

    @cached_property
    def _hrep(self):
        ha, hb = self.left.halfspaces(), self.right.halfspaces()
        if ha is None or hb is None:
            return None
        return np.vstack([ha[0], hb[0]]), np.concatenate([ha[1], hb[1]])

    def _check_nonempty(self):
        h = self._hrep
        if h is not None:
            try:
                poly.lp_support(h[0], h[1], np.zeros(self.dim))
            except ValueError as exc:
                raise ValueError("intersection is empty") from exc
            return
        if self.left.has_nearest and self.right.has_nearest:
            p = _dykstra(self.left, self.right, np.zeros((1, self.dim)), iters=2000)
            if self.left.distance(p[0]) + self.right.distance(p[0]) > 1e-6 * (1 + np.abs(p).max()):
                raise ValueError("intersection is empty")

    def _support(self, u):
        if self._simple is not None:
            return self._simple._support(u)
        v = self.vertices()
        if v is not None:
            return np.max(u @ v.T, axis=1)
        h = self._hrep
        if h is not None:
            return np.array([poly.lp_support(h[0], h[1], ui)[0] for ui in u])
        return _cvx_support(self, u)

    def _contains(self, x, tol):
        return self.left._contains(x, tol) & self.right._contains(x, tol)

    def _has_nearest(self):
        if self._simple is not None:
            return self._simple.has_nearest
        return self.vertices() is not None or (self.left.has_nearest and self.right.has_nearest)

    def _nearest(self, x):
        if self._simple is not None:
            return self._simple._nearest(x)
        if self.vertices() is not None:
            return self.geometry.nearest(x)
        p = _dykstra(self.left, self.right, x)
        return p, np.linalg.norm(x - p, axis=1)

    def _vertices(self):
        if self._simple is not None:
            return self._simple.vertices()
        h = self._hrep
        if h is None:
            return None
        try:
            v = poly.vertices_from_halfspaces(*h)
        except ValueError:
            return None
        return v if len(v) else None

    def _halfspaces(self):
        if self._simple is not None:
            return self._simple.halfspaces()
        return self._hrep

    def ball_zonotope(self):
        return None if self._simple is None else self._simple.ball_zonotope()

    def ellipsoid_form(self):
        return None if self._simple is None else self._simple.ellipsoid_form()

    def to_dict(self):
        return {"dim": self.dim, "kind": "intersection",
                "bodies": [self.left.to_dict(), self.right.to_dict()]}


def _simplify_intersection(a: ConvexBody, b: ConvexBody):
    if isinstance(a, Box) and isinstance(b, Box):
        lo, hi = np.maximum(a.lo, b.lo), np.minimum(a.hi, b.hi)
        if np.any(lo > hi):
            raise ValueError("intersection is empty")
        return Box(np.column_stack([lo, hi]))
    fa, fb = ball_form(a), ball_form(b)
    if fa is not None and fb is not None and np.allclose(fa[0], fb[0], atol=0):
        return a if fa[1] <= fb[1] else b
    return None


def _dykstra(a: ConvexBody, b: ConvexBody, x, iters=400, tol=1e-13):
    """Euclidean projection onto A ∩ B by Dykstra's alternating scheme.

    Points still moving after ``iters`` sweeps (typically where the two
    boundaries meet tangentially, where the scheme converges sublinearly)
    are projected by a conic program instead.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = x.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    scale = 1.0 + np.abs(x).max()
    active = np.arange(len(x))
    for _ in range(iters):
        if not len(active):
            break
        ya, pa, qa = y[active], p[active], q[active]
        z, _ = a._nearest(ya + pa)
        p[active] = ya + pa - z
        y_new, _ = b._nearest(z + qa)
        q[active] = z + qa - y_new
        y[active] = y_new
        moving = (np.abs(y_new - ya).max(axis=1) > tol * scale) | (np.abs(y_new - z).max(axis=1) > 1e-10 * scale)
        active = active[moving]
    if len(active):
        y[active] = _cvx_nearest(Intersection(a, b), x[active])
    return y


class OrthogonalProduct(ConvexBody):
    """A x B in R^k x R^(n-k)."""

    kind = "product"

    def __init__(self, first: ConvexBody, second: ConvexBody):
        super().__init__(first.dim + second.dim)
        self.first, self.second = first, second
        self.k = first.dim

    def children(self):
        return (self.first, self.second)

    @property
    def symmetric(self):
        return self.first.symmetric and self.second.symmetric

    def _support(self, u):
        return self.first._support(u[:, :self.k]) + self.second._support(u[:, self.k:])

    def _contains(self, x, tol):
        return self.first._contains(x[:, :self.k], tol) & self.second._contains(x[:, self.k:], tol)

    def _has_nearest(self):
        return self.first.has_nearest and self.second.has_nearest

    def _nearest(self, x):
        pa, da = self.first._nearest(x[:, :self.k])
        pb, db = self.second._nearest(x[:, self.k:])
        return np.hstack([pa, pb]), np.hypot(da, db)

    def gauge(self, x):
        return np.maximum(gauge_batch(self.first, x[:, :self.k]), gauge_batch(self.second, x[:, self.k:]))

    def _vertices(self):
        va, vb = self.first.vertices(), self.second.vertices()
        if va is None or vb is None or len(va) * len(vb) > 20_000:
            return None
        return np.hstack([np.repeat(va, len(vb), axis=0), np.tile(vb, (len(va), 1))])

    def ball_zonotope(self):
        a, b = self.first.ball_zonotope(), self.second.ball_zonotope()
        if a is None or b is None or a[1] > 0 or b[1] > 0:
            return None
        ga = np.hstack([a[2], np.zeros((len(a[2]), self.second.dim))])
        gb = np.hstack([np.zeros((len(b[2]), self.k)), b[2]])
        return np.concatenate([a[0], b[0]]), 0.0, np.vstack([ga, gb])

    def to_dict(self):
        return {"dim": self.dim, "kind": "product", "bodies": [self.first.to_dict(), self.second.to_dict()]}


class LinearImage(ConvexBody):
    """T K for an n x n matrix T (singular matrices allowed)."""

    kind = "linear_image"

    def __init__(self, body: ConvexBody, matrix):
        t = np.asarray(matrix, dtype=float)
        if t.shape != (body.dim, body.dim) or not np.all(np.isfinite(t)):
            raise ValueError("linear image needs a finite n x n matrix")
        super().__init__(body.dim)
        self.body, self.matrix = body, t

    def children(self):
        return (self.body,)

    @property
    def symmetric(self):
        return self.body.symmetric

    @cached_property
    def _inverse(self):
        if abs(np.linalg.det(self.matrix)) < 1e-14 * max(1.0, np.abs(self.matrix).max()) ** self.dim:
            return None
        return np.linalg.inv(self.matrix)

    @cached_property
    def similarity(self):
        """c with T = c Q for orthogonal Q, else None."""
        g = self.matrix.T @ self.matrix
        c2 = g[0, 0]
        if c2 > 0 and np.allclose(g, c2 * np.eye(self.dim), rtol=0, atol=1e-13 * c2):
            return math.sqrt(c2)
        return None

    def _support(self, u):
        return self.body._support(u @ self.matrix)

    def _contains(self, x, tol):
        inv = self._inverse
        if inv is not None:
            return self.body._contains(x @ inv.T, tol)
        return super()._contains(x, tol)

    @cached_property
    def _ellipsoid(self):
        ef = self.ellipsoid_form()
        if ef is None:
            return None
        return _GeneralEllipsoid(*ef)

    def _has_nearest(self):
        if self.similarity is not None and self.body.has_nearest:
            return True
        return self._ellipsoid is not None or self.vertices() is not None

    def _nearest(self, x):
        c = self.similarity
        if c is not None and self.body.has_nearest:
            q = self.matrix / c
            p, d = self.body._nearest(x @ q / c)
            return p @ q.T * c, d * c
        if self._ellipsoid is not None:
            return self._ellipsoid.nearest(x)
        if self.vertices() is not None:
            return self.geometry.nearest(x)
        raise UnsupportedOperation("no Euclidean projection for this linear image")

    def gauge(self, x):
        inv = self._inverse
        if inv is None:
            raise OriginNotInterior("singular linear image has empty interior")
        return gauge_batch(self.body, x @ inv.T)

    def _vertices(self):
        v = self.body.vertices()
        return None if v is None else v @ self.matrix.T

    def ball_zonotope(self):
        nf = self.body.ball_zonotope()
        if nf is None:
            return None
        c, r, g = nf
        if r > 0:
            s = self.similarity
            if s is None:
                return None
            r = r * s
        return self.matrix @ c, r, g @ self.matrix.T

    def ellipsoid_form(self):
        ef = self.body.ellipsoid_form()
        inv = self._inverse
        if ef is None or inv is None:
            return None
        c, s = ef
        return self.matrix @ c, s @ inv

    def to_dict(self):
        return {"dim": self.dim, "kind": "linear_image", "matrix": self.matrix.tolist(),
                "body": self.body.to_dict()}


class _GeneralEllipsoid:
    """{x : |S (x - c)| <= 1} handled through its principal axes."""

    def __init__(self, c, s):
        # S^T S = V diag(1/a^2) V^T
        m = s.T @ s
        w, v = np.linalg.eigh(m)
        self.c = c
        self.rot = v
        self.axes = Ellipsoid(1.0 / np.sqrt(w))

    def nearest(self, x):
        y = (x - self.c) @ self.rot
        p, d = self.axes._nearest(y)
        return p @ self.rot.T + self.c, d


def zonotope_body(c, generators) -> ConvexBody:
    """c + sum_j [0, g_j] as a composite body."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    body: ConvexBody | None = None
    for g in np.atleast_2d(generators).reshape(-1, n):
        if not np.any(g):
            continue
        s = Segment(np.zeros(n), g)
        body = s if body is None else MinkowskiSum(body, s)
    if body is None:
        return Point(c)
    return Translate(body, c) if np.any(c) else body


# ---------------------------------------------------------------------------
# cvxpy fallback for support functions of general intersections
# ---------------------------------------------------------------------------

_CVX_CACHE: dict[str, tuple] = {}


def _cvx_constraints(body: ConvexBody, z):
    import cvxpy as cp

    if isinstance(body, Ball):
        return [cp.norm(z, 2) <= body.radius]
    if isinstance(body, Box):
        return [z >= body.lo, z <= body.hi]
    if isinstance(body, Ellipsoid):
        return [cp.norm(cp.multiply(1.0 / body.semi_axes, z), 2) <= 1]
    if isinstance(body, PolytopeH):
        return [body.a @ z <= body.b]
    if isinstance(body, (PolytopeV, Segment, Point)):
        v = body.vertices()
        lam = cp.Variable(len(v), nonneg=True)
        return [cp.sum(lam) == 1, z == v.T @ lam]
    if isinstance(body, Scale):
        if body.factor == 0:
            return [z == 0]
        w = cp.Variable(body.dim)
        return _cvx_constraints(body.body, w) + [z == body.factor * w]
    if isinstance(body, Negate):
        w = cp.Variable(body.dim)
        return _cvx_constraints(body.body, w) + [z == -w]
    if isinstance(body, Translate):
        w = cp.Variable(body.dim)
        return _cvx_constraints(body.body, w) + [z == w + body.vector]
    if isinstance(body, MinkowskiSum):
        w1, w2 = cp.Variable(body.dim), cp.Variable(body.dim)
        return (_cvx_constraints(body.left, w1) + _cvx_constraints(body.right, w2)
                + [z == w1 + w2])
    if isinstance(body, Intersection):
        return _cvx_constraints(body.left, z) + _cvx_constraints(body.right, z)
    if isinstance(body, OrthogonalProduct):
        return _cvx_constraints(body.first, z[:body.k]) + _cvx_constraints(body.second, z[body.k:])
    if isinstance(body, LinearImage):
        w = cp.Variable(body.dim)
        return _cvx_constraints(body.body, w) + [z == body.matrix @ w]
    raise UnsupportedOperation(f"no convex program for {body.kind}")


def _cvx_support(body: ConvexBody, u):
    import cvxpy as cp

    entry = _CVX_CACHE.get(body.key)
    if entry is None:
        z = cp.Variable(body.dim)
        par = cp.Parameter(body.dim)
        prob = cp.Problem(cp.Maximize(par @ z), _cvx_constraints(body, z))
        entry = (prob, par)
        _CVX_CACHE[body.key] = entry
    prob, par = entry
    out = np.empty(len(u))
    for i, ui in enumerate(u):
        par.value = ui
        try:
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11)
        except (cp.error.SolverError, TypeError):
            prob.solve()
        if prob.status not in ("optimal", "optimal_inaccurate"):
            raise ConvergenceFailure(f"support program ended with status {prob.status}")
        out[i] = prob.value
    return out


def _cvx_nearest(body: ConvexBody, x):
    import cvxpy as cp

    key = "nearest:" + body.key
    entry = _CVX_CACHE.get(key)
    if entry is None:
        z = cp.Variable(body.dim)
        par = cp.Parameter(body.dim)
        prob = cp.Problem(cp.Minimize(cp.sum_squares(z - par)), _cvx_constraints(body, z))
        entry = (prob, par, z)
        _CVX_CACHE[key] = entry
    prob, par, z = entry
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        par.value = xi
        with warnings.catch_warnings():
            # tangential contact makes the program degenerate; the status is checked below
            warnings.simplefilter("ignore", UserWarning)
            try:
                prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-11)
            except (cp.error.SolverError, TypeError):
                prob.solve()
        if prob.status not in ("optimal", "optimal_inaccurate"):
            raise ConvergenceFailure(f"projection program ended with status {prob.status}")
        out[i] = z.value
    return out


# ---------------------------------------------------------------------------
# gauge and relative distance
# ---------------------------------------------------------------------------

_ORIGIN_CHECKED: dict[str, bool] = {}


def check_origin_interior(e: ConvexBody) -> None:
    """Raise OriginNotInterior unless h_E is strictly positive on probe directions."""
    ok = _ORIGIN_CHECKED.get(e.key)
    if ok is None:
        n = e.dim
        dirs = np.vstack([np.eye(n), -np.eye(n), _fibonacci_directions(n, 64)])
        h = e._support(dirs)
        scale = max(1.0, float(np.abs(h).max()))
        ok = bool(np.all(h > 1e-12 * scale)) and bool(e.contains(np.zeros(n)))
        _ORIGIN_CHECKED[e.key] = ok
    if not ok:
        raise OriginNotInterior("the origin must lie in the interior of E")


def _fibonacci_directions(n: int, m: int):
    rng = np.random.default_rng(1234 + n)
    g = rng.standard_normal((m, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def gauge_batch(e: ConvexBody, x):
    """|x|_E for each row of x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = getattr(e, "gauge", None)
    if g is not None:
        return g(x)
    ef = e.ellipsoid_form()
    if ef is not None and np.allclose(ef[0], 0):
        return np.linalg.norm((x - ef[0]) @ ef[1].T, axis=1)
    hs = e.halfspaces()
    if hs is not None and np.all(hs[1] > 0):
        return np.maximum(0.0, (x @ hs[0].T / hs[1]).max(axis=1))
    return _gauge_bisect(e, x)


def _gauge_bisect(e: ConvexBody, x, tol=1e-12):
    nx = np.linalg.norm(x, axis=1)
    out = np.zeros(len(x))
    nz = nx > 0
    xs = x[nz]
    if not len(xs):
        return out
    u = xs / nx[nz, None]
    hi_rad = e._support(u)  # radial function <= h_E(u)
    lo = np.zeros(len(xs))
    hi = np.ones(len(xs))
    # find hi with x/hi in E
    for _ in range(200):
        bad = ~e._contains(xs / hi[:, None], 0.0)
        if not np.any(bad):
            break
        hi[bad] *= 2.0
    lo = nx[nz] / hi_rad  # |x|_E >= |x| / h_E(x/|x|)
    lo = np.minimum(lo, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        inside = e._contains(xs / np.maximum(mid, 1e-300)[:, None], 0.0)
        hi = np.where(inside, mid, hi)
        lo = np.where(inside, lo, mid)
        if np.all(hi - lo <= tol * (1 + nx[nz])):
            break
    out[nz] = hi
    return out


def gauge_value(e: ConvexBody, x) -> float:
    """|x|_E (Minkowski functional)."""
    check_origin_interior(e)
    return float(gauge_batch(e, _vec(x, e.dim))[0])


def _axis_box(body: ConvexBody):
    """(lo, hi) if the body is an axis-parallel box (possibly degenerate)."""
    if isinstance(body, Box):
        return body.lo, body.hi
    nf = body.ball_zonotope()
    if nf is None or nf[1] > 0:
        return None
    c, _, g = nf
    lo, hi = c.copy(), c.copy()
    for row in g:
        nz = np.nonzero(np.abs(row) > 0)[0]
        if len(nz) != 1:
            return None
        j = nz[0]
        if row[j] > 0:
            hi[j] += row[j]
        else:
            lo[j] += row[j]
    return lo, hi


def _structural_distance(k: ConvexBody, e: ConvexBody):
    """Return a vectorised exact d_E(., K) or None."""
    bf = ball_form(e)
    if bf is not None and np.allclose(bf[0], 0, atol=0) and k.has_nearest:
        rho = bf[1]
        return lambda x: k._nearest(x)[1] / rho
    ef = e.ellipsoid_form()
    if ef is not None and np.allclose(ef[0], 0, atol=0):
        s = ef[1]
        img = LinearImage(k, s)
        if img.has_nearest:
            return lambda x: img._nearest(x @ s.T)[1]
    if isinstance(k, Point) or (isinstance(k, PolytopeV) and len(k.vertices()) == 1):
        p = k.vertices()[0]
        return lambda x: gauge_batch(e, x - p)
    ebox = _axis_box(e)
    if ebox is not None:
        elo, ehi = ebox
        kb = _axis_box(k)
        if kb is not None:
            return lambda x: _box_box_distance(x, kb[0], kb[1], elo, ehi)
        nf = k.ball_zonotope()
        if nf is not None and nf[1] > 0:
            c, r, g = nf
            inner = _axis_box(zonotope_body(c, g)) if len(g) else (c, c)
            if inner is not None:
                return lambda x: _ballbox_box_distance(x, inner[0], inner[1], r, elo, ehi)
    return None


def _box_box_distance(x, lo, hi, elo, ehi):
    with np.errstate(divide="ignore", invalid="ignore"):
        above = np.where(x > hi, (x - hi) / ehi, 0.0)
        below = np.where(x < lo, (x - lo) / elo, 0.0)
    return np.maximum(above, below).max(axis=1)


def _ballbox_box_distance(x, lo, hi, r, elo, ehi, iters=200):
    # d = min t with dist_2(x, Box(lo + t elo, hi + t ehi)) <= r
    def excess(t):
        p = np.clip(x, lo + t[:, None] * elo, hi + t[:, None] * ehi)
        return np.linalg.norm(x - p, axis=1) - r

    lo_t = np.zeros(len(x))
    hi_t = np.ones(len(x))
    for _ in range(200):
        bad = excess(hi_t) > 0
        if not np.any(bad):
            break
        hi_t[bad] *= 2
    zero = excess(lo_t) <= 0
    for _ in range(iters):
        mid = 0.5 * (lo_t + hi_t)
        ok = excess(mid) <= 0
        hi_t = np.where(ok, mid, hi_t)
        lo_t = np.where(ok, lo_t, mid)
        if np.all(hi_t - lo_t <= 1e-14 * (1 + hi_t)):
            break
    return np.where(zero, 0.0, hi_t)


def distance_batch(k: ConvexBody, e: ConvexBody, x):
    """d_E(x, K) for each row of x."""
    check_origin_interior(e)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    f = _structural_distance(k, e)
    if f is not None:
        return f(x)
    if len(x) > 2000:
        log.warning("no structural distance route for %s / %s: per-point ascent on %d points",
                    k.kind, e.kind, len(x))
    return np.array([gauge_distance_dual(k, e, xi) for xi in x])


def has_fast_distance(k: ConvexBody, e: ConvexBody) -> bool:
    return _structural_distance(k, e) is not None


def gauge_distance(k: ConvexBody, e: ConvexBody, x) -> float:
    """d_E(x, K) = min{t >= 0 : x in K + t E}."""
    check_origin_interior(e)
    xv = _vec(x, k.dim)
    bf = ball_form(e)
    if bf is not None and np.allclose(bf[0], 0, atol=0):
        g = k.geometry if k.vertices() is not None and not isinstance(k, (Box, Ball)) else None
        if g is not None and g.k >= 1:
            p = g.nearest_wolfe(xv)
            return float(np.linalg.norm(xv - p) / bf[1])
    f = _structural_distance(k, e)
    if f is not None:
        return float(f(xv[None, :])[0])
    return gauge_distance_dual(k, e, xv)


def gauge_distance_dual(k: ConvexBody, e: ConvexBody, x, starts: int | None = None,
                        tol: float = 1e-6) -> float:
    """d_E(x, K) from sup_u (<x,u> - h_K(u)) / h_E(u) by multi-start Nelder-Mead."""
    check_origin_interior(e)
    x = _vec(x, k.dim)
    n = k.dim
    if k.contains(x, 1e-12):
        return 0.0

    def neg_phi(v):
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            return 0.0
        u = (v / nv)[None, :]
        return -float((u[0] @ x - k._support(u)[0]) / e._support(u)[0])

    m = max(8, starts - 2 * n) if starts else 8
    lo, hi = k.bounding_box()
    centre_dir = x - 0.5 * (lo + hi)
    dirs = [*np.eye(n), *(-np.eye(n)), *_fibonacci_directions(n, m)]
    if np.linalg.norm(centre_dir) > 0:
        dirs.append(centre_dir / np.linalg.norm(centre_dir))
    opts = {"xatol": 1e-11, "fatol": 1e-13, "maxiter": 4000 * n, "adaptive": n > 2}
    runs = []
    for d in dirs:
        r = minimize(neg_phi, d, method="Nelder-Mead", options=opts)
        runs.append((r.fun, r.x))
    runs.sort(key=lambda t: t[0])
    polished = []
    for fun, v in runs[:3]:
        r = minimize(neg_phi, v / np.linalg.norm(v), method="Nelder-Mead",
                     options={**opts, "initial_simplex": None})
        polished.append(min(fun, r.fun))
    polished.sort()
    best = -polished[0]
    if best <= 0:
        return 0.0
    if abs(polished[1] - polished[0]) > tol * max(1.0, abs(best)):
        raise ConvergenceFailure("ascent starts disagree on the relative distance")
    return best


# ---------------------------------------------------------------------------
# circumradius
# ---------------------------------------------------------------------------


def circumradius(k: ConvexBody, return_exact: bool = False):
    """Radius of the smallest enclosing Euclidean ball."""
    r, exact = _circumradius(k)
    return (r, exact) if return_exact else r


def circumcenter(k: ConvexBody):
    return _circumball(k)[0]


def _circumradius(k):
    c, r, exact = _circumball(k)
    return r, exact


def _circumball(k: ConvexBody):
    if isinstance(k, Ball):
        return np.zeros(k.dim), k.radius, True
    if isinstance(k, Box):
        return 0.5 * (k.lo + k.hi), 0.5 * float(np.linalg.norm(k.widths)), True
    if isinstance(k, Ellipsoid):
        return np.zeros(k.dim), float(k.semi_axes.max()), True
    if isinstance(k, Point):
        return k.location.copy(), 0.0, True
    if isinstance(k, Segment):
        return 0.5 * (k.a + k.b), 0.5 * k.length, True
    if isinstance(k, Scale):
        c, r, ex = _circumball(k.body)
        return c * k.factor, r * k.factor, ex
    if isinstance(k, Negate):
        c, r, ex = _circumball(k.body)
        return -c, r, ex
    if isinstance(k, Translate):
        c, r, ex = _circumball(k.body)
        return c + k.vector, r, ex
    if isinstance(k, LinearImage) and k.similarity is not None:
        c, r, ex = _circumball(k.body)
        return k.matrix @ c, r * k.similarity, ex
    if isinstance(k, OrthogonalProduct):
        ca, ra, ea = _circumball(k.first)
        cb, rb, eb = _circumball(k.second)
        return np.concatenate([ca, cb]), math.hypot(ra, rb), ea and eb
    if isinstance(k, MinkowskiSum):
        for a, b in ((k.left, k.right), (k.right, k.left)):
            bf = ball_form(b)
            if bf is not None:
                c, r, ex = _circumball(a)
                return c + bf[0], r + bf[1], ex
    v = k.vertices()
    if v is not None and len(v) <= 5000:
        c, r = poly.min_enclosing_ball(v)
        return c, r, True
    return _approx_circumball(k)


def _approx_circumball(k: ConvexBody):
    n = k.dim
    rng = np.random.default_rng(99)
    g = rng.standard_normal((512 * n, n))
    u = np.vstack([np.eye(n), -np.eye(n), g / np.linalg.norm(g, axis=1, keepdims=True)])
    h = k._support(u)
    lo, hi = k.bounding_box()

    def radius(c):
        return float(np.max(h - u @ c))

    cands = [0.5 * (lo + hi)]
    # Chebyshev-type center of the sampled support points
    pts = u * h[:, None]
    cands.append(pts.mean(axis=0))
    best = min(cands, key=radius)
    res = minimize(radius, best, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 5000 * n})
    c = res.x if res.fun < radius(best) else best
    return c, radius(c), False


# ---------------------------------------------------------------------------
# projections and sections
# ---------------------------------------------------------------------------


def _fold_sum(parts):
    out = None
    for p in parts:
        out = p if out is None else MinkowskiSum(out, p)
    return out


def linear_map(k: ConvexBody, m) -> ConvexBody:
    """Image of K under a (p x n) matrix, as a body in R^p."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    p, n = m.shape
    if n != k.dim:
        raise ValueError("matrix does not match the body dimension")
    if isinstance(k, Point):
        return Point(m @ k.location)
    if isinstance(k, Segment):
        return Segment(m @ k.a, m @ k.b)
    if isinstance(k, Ball):
        return _ball_image(m, k.radius)
    if isinstance(k, Ellipsoid):
        return _ball_image(m * k.semi_axes, 1.0)
    if isinstance(k, Box):
        sel = [(int(np.argmax(np.abs(row))), np.sign(row[np.argmax(np.abs(row))])) for row in m]
        if (all(abs(abs(row[j]) - 1) < 1e-15 and np.sum(row != 0) == 1 for row, (j, _) in zip(m, sel))
                and len({j for j, _ in sel}) == p):
            iv = [[k.lo[j], k.hi[j]] if s > 0 else [-k.hi[j], -k.lo[j]] for j, s in sel]
            return Box(iv)
        gens = (m * k.widths).T
        return zonotope_body(m @ k.lo, gens)
    if isinstance(k, Scale):
        return Scale(linear_map(k.body, m), k.factor)
    if isinstance(k, Negate):
        return Negate(linear_map(k.body, m))
    if isinstance(k, Translate):
        return Translate(linear_map(k.body, m), m @ k.vector)
    if isinstance(k, MinkowskiSum):
        return MinkowskiSum(linear_map(k.left, m), linear_map(k.right, m))
    if isinstance(k, OrthogonalProduct):
        return MinkowskiSum(linear_map(k.first, m[:, :k.k]), linear_map(k.second, m[:, k.k:]))
    if isinstance(k, LinearImage):
        return linear_map(k.body, m @ k.matrix)
    v = k.vertices()
    if v is not None:
        return PolytopeV(poly.PolytopeGeometry(v @ m.T).vertices)
    raise UnsupportedOperation(f"cannot map a {k.kind} body linearly")


def _ball_image(m, r):
    p, n = m.shape
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    # image = u diag(s) r B^{min(p, n)} inside R^p
    q = len(s)
    if q == p and np.allclose(s, s[0], rtol=1e-13, atol=0) and s[0] > 0:
        return Ball(p, r * s[0])
    if q == p and np.all(s > 1e-14 * max(1.0, s.max())):
        return LinearImage(Ellipsoid(r * s), u)
    full = np.zeros((p, p))
    full[:, :q] = u * s
    return LinearImage(Ball(p, r), full)


def project_body(k: ConvexBody, h: Subspace) -> ConvexBody:
    """P_H K expressed in the coordinates of H's basis."""
    if h.n != k.dim:
        raise ValueError("subspace and body live in different dimensions")
    return linear_map(k, h.basis)


def section_body(k: ConvexBody, h: Subspace, offset=None) -> ConvexBody:
    """K ∩ (offset + H) in the coordinates y -> offset + Q y."""
    if h.n != k.dim:
        raise ValueError("subspace and body live in different dimensions")
    o = np.zeros(k.dim) if offset is None else _vec(offset, k.dim, "offset")
    return _section(k, h, o)


def _section(k, h, o):
    if isinstance(k, Translate):
        return _section(k.body, h, o - k.vector)
    if isinstance(k, Scale):
        if k.factor == 0:
            return _section(Point(np.zeros(k.dim)), h, o)
        return Scale(_section(k.body, h, o / k.factor), k.factor)
    if isinstance(k, Negate):
        return Negate(_section(k.body, h, -o))
    if isinstance(k, Point):
        y = h.coords(k.location - o)
        if np.linalg.norm(o + h.embed(y) - k.location) > 1e-12 * (1 + np.abs(k.location).max()):
            raise EmptySection("affine subspace misses the point")
        return Point(y)
    if isinstance(k, Intersection):
        if k._simple is not None:
            return _section(k._simple, h, o)
        return Intersection(_section(k.left, h, o), _section(k.right, h, o))
    if isinstance(k, Box):
        sel = h.coordinate_selection()
        if sel is not None:
            return _box_coordinate_section(k, sel, o)
    ef = k.ellipsoid_form()
    if ef is not None:
        return _quadric_section(ef[0], ef[1], h, o)
    hs = k.halfspaces()
    if hs is not None:
        a, b = hs
        return _halfspace_section(a @ h.q, b - a @ o)
    nf = k.ball_zonotope()
    sel = h.coordinate_selection()
    if nf is not None and nf[1] > 0 and sel is not None:
        c, r, g = nf
        inner = _axis_box(zonotope_body(c, g)) if len(g) else (c, c)
        if inner is not None:
            return _ballbox_coordinate_section(inner[0], inner[1], r, sel, o)
    raise UnsupportedSection(f"sections of {k.kind} bodies are not supported")


def _box_coordinate_section(k, sel, o):
    chosen = {j for j, _ in sel}
    for j in range(k.dim):
        if j not in chosen and not (k.lo[j] - 1e-12 <= o[j] <= k.hi[j] + 1e-12):
            raise EmptySection("affine subspace misses the box")
    iv = []
    for j, s in sel:
        lo, hi = k.lo[j] - o[j], k.hi[j] - o[j]
        iv.append([lo, hi] if s > 0 else [-hi, -lo])
    return Box(iv)


def _ballbox_coordinate_section(lo, hi, r, sel, o):
    # {y : dist(o + Q y, box) <= r} = (box slice) + rho B with rho^2 = r^2 - off-slice gap^2
    chosen = {j for j, _ in sel}
    gap2 = sum(max(lo[j] - o[j], o[j] - hi[j], 0.0) ** 2 for j in range(len(o)) if j not in chosen)
    rho2 = r * r - gap2
    if rho2 < -1e-12 * r * r:
        raise EmptySection("affine subspace misses the rounded box")
    iv = []
    for j, s in sel:
        a, b = lo[j] - o[j], hi[j] - o[j]
        iv.append([a, b] if s > 0 else [-b, -a])
    box = Box(iv)
    if rho2 <= 1e-24:
        return box
    return MinkowskiSum(box, Ball(len(sel), math.sqrt(rho2)))


def _quadric_section(c, s, h, o):
    m = s @ h.q
    w = s @ (o - c)
    g = m.T @ m
    ystar = -np.linalg.solve(g, m.T @ w)
    rho2 = 1.0 - float(np.sum((m @ ystar + w) ** 2))
    if rho2 < -1e-12:
        raise EmptySection("affine subspace misses the ellipsoid")
    if rho2 <= 1e-24:
        return Point(ystar)
    ev, vec = np.linalg.eigh(g)
    root_inv = (vec / np.sqrt(ev)) @ vec.T
    body = _ball_image(root_inv * math.sqrt(rho2), 1.0)
    return Translate(body, ystar) if np.any(ystar) else body


def _halfspace_section(a, b):
    keep = np.linalg.norm(a, axis=1) > 1e-14
    if np.any(~keep & (b < -1e-12)):
        raise EmptySection("affine subspace misses the polytope")
    a, b = a[keep], b[keep]
    try:
        v = poly.vertices_from_halfspaces(a, b)
    except ValueError:
        return PolytopeH(a, b)
    if len(v) == 0:
        raise EmptySection("affine subspace misses the polytope")
    return PolytopeV(v)


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------

KINDS = ("ball", "box", "ellipsoid", "polytope_v", "polytope_h", "segment", "point", "scale",
         "negate", "translate", "minkowski_sum", "intersection", "product", "linear_image")


def _need(obj, field, path):
    if field not in obj:
        raise BodySpecError(f"missing field '{field}'", path)
    return obj[field]


def _num_list(val, path, length=None):
    if not isinstance(val, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                            for v in val):
        raise BodySpecError("expected a list of numbers", path)
    if length is not None and len(val) != length:
        raise BodySpecError(f"expected {length} numbers", path)
    return [float(v) for v in val]


def body_from_dict(obj, path: str = "$") -> ConvexBody:
    """Build a body from its JSON description; errors carry a JSON path."""
    if not isinstance(obj, dict):
        raise BodySpecError("body description must be an object", path)
    dim = _need(obj, "dim", path)
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise BodySpecError("dim must be a positive integer", f"{path}.dim")
    kind = _need(obj, "kind", path)
    if kind not in KINDS:
        raise BodySpecError(f"unknown kind {kind!r}", f"{path}.kind")
    try:
        body = _build(obj, kind, dim, path)
    except BodySpecError:
        raise
    except (ValueError, UnboundedBody, TypeError) as exc:
        raise BodySpecError(str(exc), path) from exc
    if body.dim != dim:
        raise BodySpecError(f"declared dim {dim} but the body lives in R^{body.dim}", f"{path}.dim")
    return body


def _build(obj, kind, dim, path):
    def child(field):
        return body_from_dict(_need(obj, field, path), f"{path}.{field}")

    def pair():
        bodies = _need(obj, "bodies", path)
        if not isinstance(bodies, list) or len(bodies) != 2:
            raise BodySpecError("expected a list of two bodies", f"{path}.bodies")
        return [body_from_dict(b, f"{path}.bodies[{i}]") for i, b in enumerate(bodies)]

    if kind == "ball":
        r = _need(obj, "radius", path)
        if not isinstance(r, (int, float)) or isinstance(r, bool) or not r > 0:
            raise BodySpecError("radius must be a positive number", f"{path}.radius")
        return Ball(dim, r)
    if kind == "box":
        iv = _need(obj, "intervals", path)
        if not isinstance(iv, list) or len(iv) != dim:
            raise BodySpecError(f"expected {dim} intervals", f"{path}.intervals")
        rows = [_num_list(p, f"{path}.intervals[{i}]", 2) for i, p in enumerate(iv)]
        for i, (lo, hi) in enumerate(rows):
            if lo > hi:
                raise BodySpecError("interval has lo > hi", f"{path}.intervals[{i}]")
        return Box(rows)
    if kind == "ellipsoid":
        return Ellipsoid(_num_list(_need(obj, "semi_axes", path), f"{path}.semi_axes", dim))
    if kind == "polytope_v":
        vs = _need(obj, "vertices", path)
        if not isinstance(vs, list) or not vs:
            raise BodySpecError("expected a nonempty list of vertices", f"{path}.vertices")
        return PolytopeV([_num_list(v, f"{path}.vertices[{i}]", dim) for i, v in enumerate(vs)])
    if kind == "polytope_h":
        hs = _need(obj, "halfspaces", path)
        if not isinstance(hs, list) or not hs:
            raise BodySpecError("expected a nonempty list of halfspaces", f"{path}.halfspaces")
        normals, offsets = [], []
        for i, h in enumerate(hs):
            p = f"{path}.halfspaces[{i}]"
            if not isinstance(h, dict):
                raise BodySpecError("halfspace must be an object with normal and offset", p)
            normals.append(_num_list(_need(h, "normal", p), f"{p}.normal", dim))
            off = _need(h, "offset", p)
            if not isinstance(off, (int, float)) or isinstance(off, bool):
                raise BodySpecError("offset must be a number", f"{p}.offset")
            offsets.append(float(off))
        return PolytopeH(normals, offsets)
    if kind == "segment":
        ep = _need(obj, "endpoints", path)
        if not isinstance(ep, list) or len(ep) != 2:
            raise BodySpecError("expected two endpoints", f"{path}.endpoints")
        return Segment(_num_list(ep[0], f"{path}.endpoints[0]", dim),
                       _num_list(ep[1], f"{path}.endpoints[1]", dim))
    if kind == "point":
        return Point(_num_list(_need(obj, "location", path), f"{path}.location", dim))
    if kind == "scale":
        f = _need(obj, "factor", path)
        if not isinstance(f, (int, float)) or isinstance(f, bool) or f < 0:
            raise BodySpecError("factor must be a nonnegative number", f"{path}.factor")
        return Scale(child("body"), f)
    if kind == "negate":
        return Negate(child("body"))
    if kind == "translate":
        return Translate(child("body"), _num_list(_need(obj, "vector", path), f"{path}.vector", dim))
    if kind == "minkowski_sum":
        a, b = pair()
        return MinkowskiSum(a, b)
    if kind == "intersection":
        a, b = pair()
        return Intersection(a, b)
    if kind == "product":
        a, b = pair()
        return OrthogonalProduct(a, b)
    if kind == "linear_image":
        mat = _need(obj, "matrix", path)
        if not isinstance(mat, list) or len(mat) != dim:
            raise BodySpecError(f"expected a {dim} x {dim} matrix", f"{path}.matrix")
        rows = [_num_list(r, f"{path}.matrix[{i}]", dim) for i, r in enumerate(mat)]
        return LinearImage(child("body"), rows)
    raise BodySpecError(f"unknown kind {kind!r}", f"{path}.kind")  # pragma: no cover


def load_body(path) -> ConvexBody:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BodySpecError(f"invalid JSON: {exc.msg} (line {exc.lineno})", "$") from exc
    return body_from_dict(obj)


def dumps(body: ConvexBody, indent: int | None = None) -> str:
    return json.dumps(body.to_dict(), indent=indent)


def cross_polytope(n: int, scale: float = 1.0) -> PolytopeV:
    e = np.eye(n) * scale
    return PolytopeV(np.vstack([e, -e]))
