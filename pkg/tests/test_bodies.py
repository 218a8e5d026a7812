import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from willsfn import bodies as B
from willsfn.errors import BodySpecError, EmptySection, OriginNotInterior, UnboundedBody


def unit(rng, m, n):
    g = rng.standard_normal((m, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sampled_points(body, rng, m=10_000):
    """Points of K from a sampler that does not use the support oracle."""
    n = body.dim
    if isinstance(body, B.Ball):
        u = unit(rng, m, n)
        return u * body.radius * rng.random((m, 1)) ** (1 / n)
    if isinstance(body, B.Box):
        corners = np.array(np.meshgrid(*zip(body.lo, body.hi))).reshape(n, -1).T
        return np.vstack([body.lo + (body.hi - body.lo) * rng.random((m, n)), corners])
    v = body.vertices()
    w = rng.dirichlet(np.full(len(v), 0.2), m)
    return np.vstack([w @ v, v])


def test_support_examples():
    u = np.array([0.3, -2.0, 1.5])
    assert B.Box.cube(3, -1.0, 1.0).support(u) == pytest.approx(np.abs(u).sum(), rel=1e-15)
    assert B.Ball(3, 2.5).support(u) == pytest.approx(2.5 * np.linalg.norm(u), rel=1e-15)
    a, b = B.Ball(3, 1.0), B.PolytopeV(np.random.default_rng(0).normal(size=(6, 3)))
    assert B.MinkowskiSum(a, b).support(u) == pytest.approx(a.support(u) + b.support(u), rel=1e-15)


@pytest.mark.parametrize("body", [
    B.Ball(3, 0.7),
    B.Box([[0, 1], [-2, 0.5], [1, 3]]),
    B.PolytopeV(np.random.default_rng(3).normal(size=(9, 3))),
    B.PolytopeV(np.random.default_rng(4).normal(size=(5, 2))),
])
def test_support_dominates_and_is_attained(body):
    rng = np.random.default_rng(11)
    pts = sampled_points(body, rng)
    u = unit(rng, 200, body.dim)
    h = body.support(u)
    best = (u @ pts.T).max(axis=1)
    assert np.all(best <= h + 1e-9 * np.abs(h) + 1e-12)
    if body.vertices() is not None:
        assert np.allclose(best, h, rtol=1e-9, atol=1e-12)


def test_support_structural_rules():
    rng = np.random.default_rng(5)
    k = B.PolytopeV(rng.normal(size=(7, 3)))
    m = rng.normal(size=(3, 3))
    u = rng.normal(size=(50, 3))
    assert np.allclose(B.Scale(k, 2.5).support(u), 2.5 * k.support(u), rtol=1e-14)
    assert np.allclose(B.LinearImage(k, m).support(u), k.support(u @ m), rtol=1e-12)
    assert np.allclose(B.Negate(k).support(u), k.support(-u), rtol=1e-14)
    t = np.array([1.0, -2.0, 0.5])
    assert np.allclose(B.Translate(k, t).support(u), k.support(u) + u @ t, rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(0.0, 50.0), seed=st.integers(0, 2**16))
def test_support_positively_homogeneous(lam, seed):
    rng = np.random.default_rng(seed)
    k = B.MinkowskiSum(B.PolytopeV(rng.normal(size=(6, 3))), B.Ellipsoid(rng.uniform(0.2, 2, 3)))
    u = rng.normal(size=3)
    assert k.support(lam * u) == pytest.approx(lam * k.support(u), rel=1e-12, abs=1e-12)


def test_gauge_examples():
    x = np.array([0.4, -1.2, 2.0])
    assert B.gauge_value(B.Ball(3), x) == pytest.approx(np.linalg.norm(x), rel=1e-14)
    assert B.gauge_value(B.Ball(3, 4.0), x) == pytest.approx(np.linalg.norm(x) / 4, rel=1e-14)
    a = np.array([0.5, 2.0, 1.0])
    box = B.Box(np.column_stack([-a, a]))
    assert B.gauge_value(box, x) == pytest.approx(np.max(np.abs(x) / a), rel=1e-14)
    with pytest.raises(OriginNotInterior):
        B.gauge_value(B.Box.cube(3), x)


def test_gauge_distance_examples():
    assert B.gauge_distance(B.Ball(3), B.Ball(3), [0, 2, 0]) == pytest.approx(1.0, rel=1e-12)
    x = np.array([0.3, 0.4, 1.2])
    assert B.gauge_distance(B.Point(np.zeros(3)), B.Ball(3), x) == pytest.approx(np.linalg.norm(x), rel=1e-12)
    assert B.gauge_distance(B.Box.cube(3), B.Ball(3), [0.5, 0.5, 0.5]) == 0.0


def test_gauge_distance_dual_agrees_with_projection():
    rng = np.random.default_rng(8)
    k = B.PolytopeV(rng.normal(size=(8, 2)))
    e = B.Ellipsoid([1.0, 0.4])
    for x in rng.normal(size=(5, 2)) * 2:
        exact = B.distance_batch(k, e, x[None, :])[0]
        assert B.gauge_distance_dual(k, e, x) == pytest.approx(exact, rel=1e-8, abs=1e-10)


def test_intersection_projection_at_tangential_contact():
    # near (0, -1) the boundary is the unit arc for x < 0 and the edge y = -1 for x > 0
    k = B.Intersection(B.Box.cube(2, -1.0, 1.0), B.MinkowskiSum(B.Ball(2), B.Box.cube(2)))
    th = np.linspace(-0.3, 0.3, 41) + 1.5 * math.pi
    x = 3 * np.column_stack([np.cos(th), np.sin(th)])
    want = np.where(x[:, 0] < 0, np.linalg.norm(x, axis=1) - 1, -x[:, 1] - 1)
    assert np.allclose(B.distance_batch(k, B.Ball(2), x), want, rtol=0, atol=1e-10)


@pytest.mark.parametrize("k,e", [
    (B.Box.cube(3), B.Ball(3)),
    (B.PolytopeV(np.random.default_rng(2).normal(size=(8, 3))), B.Ball(3, 0.5)),
    (B.Ball(2, 0.7), B.Box.cube(2, -1.0, 2.0)),
])
def test_zero_distance_iff_membership(k, e):
    rng = np.random.default_rng(1)
    lo, hi = k.bounding_box()
    x = lo - 0.5 + (hi - lo + 1.0) * rng.random((300, k.dim))
    d = B.distance_batch(k, e, x)
    inside = k.contains(x, 1e-8)
    assert np.all((d <= 1e-8) == inside)


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(0.05, 20.0), seed=st.integers(0, 2**16))
def test_distance_homogeneous(lam, seed):
    rng = np.random.default_rng(seed)
    k = B.PolytopeV(rng.normal(size=(6, 3)))
    e = B.Ellipsoid(rng.uniform(0.3, 2.0, 3))
    x = rng.normal(size=3) * 3
    d = B.gauge_distance(k, e, x)
    d_lam = B.gauge_distance(B.Scale(k, lam), e, lam * x)
    assert d_lam == pytest.approx(lam * d, rel=1e-7, abs=1e-12)


def test_circumradius_examples():
    assert B.circumradius(B.Ball(4, 1.7)) == pytest.approx(1.7)
    for n in range(1, 7):
        r, exact = B.circumradius(B.Box.cube(n, -1.0, 1.0), return_exact=True)
        assert exact and r == pytest.approx(math.sqrt(n), rel=1e-12)
    seg = B.Segment([0, 0, 0], [1, 2, 2])
    assert B.circumradius(seg) == pytest.approx(1.5, rel=1e-12)


def test_circumradius_cube_by_brute_force():
    # oracle: the centre of a minimal ball of a symmetric vertex set is the centre of symmetry
    for n in (2, 3, 4):
        v = np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T
        brute = max(np.linalg.norm(p - q) for p in v for q in v) / 2
        assert B.circumradius(B.PolytopeV(v)) == pytest.approx(brute, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**16))
def test_circumradius_translation_invariant(seed):
    rng = np.random.default_rng(seed)
    k = B.PolytopeV(rng.normal(size=(7, 3)))
    t = rng.normal(size=3) * 5
    r0 = B.circumradius(k)
    assert B.circumradius(B.PolytopeV(k.vertices() + t)) == pytest.approx(r0, rel=1e-10)


def test_projection_examples():
    h = B.Subspace.coordinate(4, [0, 2])
    p = B.project_body(B.Ball(4, 3.0), h)
    assert p.dim == 2 and p.support([1.0, 0.0]) == pytest.approx(3.0)
    box = B.Box([[0, 1], [2, 5], [-1, 1]])
    pb = B.project_body(box, B.Subspace.coordinate(3, [0, 1]))
    assert np.allclose(pb.support(np.eye(2)), [1.0, 5.0])
    assert np.allclose(pb.support(-np.eye(2)), [0.0, -2.0])


def test_projection_preserves_support_on_subspace():
    rng = np.random.default_rng(6)
    k = B.PolytopeV(rng.normal(size=(10, 4)))
    h = B.Subspace.span(rng.normal(size=(2, 4)))
    p = B.project_body(k, h)
    for y in rng.normal(size=(30, 2)):
        assert p.support(y) == pytest.approx(k.support(h.embed(y)), rel=1e-9, abs=1e-12)


def test_section_examples():
    s = B.section_body(B.Box.cube(2), B.Subspace.coordinate(2, [0]))
    assert s.dim == 1
    assert s.support([1.0]) == pytest.approx(1.0) and s.support([-1.0]) == pytest.approx(0.0)
    with pytest.raises(EmptySection):
        B.section_body(B.Box([[0, 1], [1, 2]]), B.Subspace.coordinate(2, [0]))


def test_section_of_rounded_box():
    k = B.MinkowskiSum(B.Ball(3), B.Box.cube(3))
    h = B.Subspace.coordinate(3, [0, 1])
    s = B.section_body(k, h, [0, 0, 1.6])
    # |gap| = 0.6 in the dropped coordinate leaves a disc of radius 0.8 around the square
    assert s.support([1.0, 0.0]) == pytest.approx(1.8, rel=1e-12)
    assert s.support([-1.0, 0.0]) == pytest.approx(0.8, rel=1e-12)


def test_subspace_orthonormal_and_complement():
    rng = np.random.default_rng(0)
    h = B.Subspace.span(rng.normal(size=(3, 5)))
    assert np.allclose(h.basis @ h.basis.T, np.eye(3), atol=1e-12)
    c = h.complement()
    assert c.k == 2 and np.allclose(c.basis @ h.basis.T, 0.0, atol=1e-12)
    with pytest.raises(ValueError):
        B.Subspace([[1.0, 1.0]])


def test_polytope_h_must_be_bounded():
    with pytest.raises(UnboundedBody):
        B.PolytopeH([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])


def test_polytope_h_support_matches_vertices():
    k = B.PolytopeH([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1]], [1, 1, 1, 1, 1.5])
    u = np.random.default_rng(1).normal(size=(20, 2))
    v = k.vertices()
    assert np.allclose(k.support(u), (u @ v.T).max(axis=1), rtol=1e-10)


BODY_JSON = [
    {"dim": 3, "kind": "ball", "radius": 1.5},
    {"dim": 2, "kind": "box", "intervals": [[0, 1], [-1, 2]]},
    {"dim": 3, "kind": "ellipsoid", "semi_axes": [1, 2, 0.5]},
    {"dim": 2, "kind": "polytope_v", "vertices": [[0, 0], [1, 0], [0, 1]]},
    {"dim": 2, "kind": "polytope_h", "halfspaces": [
        {"normal": [1, 0], "offset": 1}, {"normal": [-1, 0], "offset": 1},
        {"normal": [0, 1], "offset": 1}, {"normal": [0, -1], "offset": 1}]},
    {"dim": 3, "kind": "segment", "endpoints": [[0, 0, 0], [1, 1, 1]]},
    {"dim": 2, "kind": "point", "location": [0.5, -1]},
    {"dim": 2, "kind": "minkowski_sum", "bodies": [
        {"dim": 2, "kind": "ball", "radius": 1},
        {"dim": 2, "kind": "translate", "vector": [1, 2],
         "body": {"dim": 2, "kind": "scale", "factor": 2, "body": {"dim": 2, "kind": "box",
                                                                    "intervals": [[0, 1], [0, 1]]}}}]},
    {"dim": 2, "kind": "intersection", "bodies": [
        {"dim": 2, "kind": "ball", "radius": 1}, {"dim": 2, "kind": "box", "intervals": [[0, 2], [0, 2]]}]},
    {"dim": 3, "kind": "product", "bodies": [
        {"dim": 1, "kind": "box", "intervals": [[0, 1]]}, {"dim": 2, "kind": "ball", "radius": 1}]},
    {"dim": 2, "kind": "linear_image", "matrix": [[1, 2], [0, 1]],
     "body": {"dim": 2, "kind": "negate", "body": {"dim": 2, "kind": "ball", "radius": 1}}},
]


@pytest.mark.parametrize("obj", BODY_JSON, ids=[o["kind"] for o in BODY_JSON])
def test_json_round_trip(obj):
    k = B.body_from_dict(obj)
    again = B.body_from_dict(json.loads(B.dumps(k)))
    u = np.random.default_rng(0).normal(size=(100, k.dim))
    assert np.allclose(again.support(u), k.support(u), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("obj,path", [
    ({"dim": 2, "kind": "ball", "radius": -1}, "$.radius"),
    ({"dim": 2, "kind": "blob"}, "$.kind"),
    ({"dim": 2, "kind": "box", "intervals": [[0, 1]]}, "$.intervals"),
    ({"dim": 2, "kind": "minkowski_sum", "bodies": [
        {"dim": 2, "kind": "ball", "radius": 1}, {"dim": 2, "kind": "box", "intervals": [[0, 1], [3, 2]]}]},
     "$.bodies[1].intervals[1]"),
    ({"kind": "ball", "radius": 1}, "$"),
])
def test_malformed_json_reports_path(obj, path):
    with pytest.raises(BodySpecError) as exc:
        B.body_from_dict(obj)
    assert exc.value.path == path


@pytest.mark.parametrize("n", [2, 3, 4])
def test_vertex_enumeration_matches_brute_force(n):
    import itertools
    from willsfn import _polytope as P
    rng = np.random.default_rng(n)
    a = rng.normal(size=(3 * n + 2, n))
    b = rng.uniform(0.5, 1.5, size=len(a))
    brute = []
    for rows in itertools.combinations(range(len(a)), n):
        sub = a[list(rows)]
        if abs(np.linalg.det(sub)) > 1e-12:
            x = np.linalg.solve(sub, b[list(rows)])
            if np.all(a @ x <= b + 1e-9):
                brute.append(x)
    got = P.vertices_from_halfspaces(a, b)
    dist = np.linalg.norm(got[:, None] - np.array(brute)[None], axis=2)
    assert dist.min(axis=1).max() < 1e-9 and dist.min(axis=0).max() < 1e-9


def test_intersection_of_many_facet_polytopes_has_vertices():
    from scipy.optimize import linprog
    from scipy.spatial import ConvexHull
    rng = np.random.default_rng(5)
    pa, pb = rng.normal(size=(40, 5)), rng.normal(size=(40, 5)) + 0.2
    v = B.Intersection(B.PolytopeV(pa), B.PolytopeV(pb)).vertices()
    assert v is not None
    eq = np.vstack([ConvexHull(pa).equations, ConvexHull(pb).equations])
    for u in unit(rng, 20, 5):
        lp = linprog(-u, A_ub=eq[:, :-1], b_ub=-eq[:, -1], bounds=[(None, None)] * 5, method="highs")
        assert (v @ u).max() == pytest.approx(-lp.fun, abs=1e-8)
