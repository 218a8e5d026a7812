import math

import numpy as np
import pytest
from scipy import integrate

from willsfn import bodies as B
from willsfn import steiner as S
from willsfn import wills as W
from willsfn.config import MCConfig
from willsfn.errors import DivergentMoment

CFG = MCConfig(samples=100_000)


def within(a, b, k=3.0, floor=1e-12):
    return abs(a.value - b.value) <= k * math.hypot(a.stderr, b.stderr) + a.bound + b.bound + floor


def test_weight_presets_are_convex_with_exact_inverse():
    for u in (W.WeightFunction.classical(), W.WeightFunction.p_power(1.5), W.WeightFunction.p_power(4.0),
              W.WeightFunction.custom(lambda t: math.exp(t) - 1.0)):
        d = W.check_weight(u)
        assert d["convexity"] <= 1e-10
        assert d["monotone"] <= 0.0
        assert d["inverse"] <= 1e-10
    with pytest.raises(ValueError):
        W.WeightFunction.p_power(1.0)


def test_classical_moments():
    u = W.WeightFunction.classical()
    for i in range(0, 12):
        assert W.moment(u, i) == pytest.approx(1 / S.kappa(i), rel=1e-14)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 7.0])
def test_p_power_moments_are_reciprocal_p_ball_volumes(p):
    u = W.WeightFunction.p_power(p)
    for i in range(0, 6):
        ball = (2 * math.gamma(1 + 1 / p)) ** i / math.gamma(1 + i / p)
        assert W.moment(u, i) == pytest.approx(1 / ball, rel=1e-13)


def test_custom_moment_matches_scipy():
    u = W.WeightFunction.custom(lambda t: t + t * t)
    for i in range(0, 5):
        est = W.moment_estimate(u, i)
        ref, _ = integrate.quad(lambda t: t**i * (1 + 2 * t) * math.exp(-t - t * t), 0, math.inf, epsabs=1e-14)
        # integrating by parts: int t^i d(1 - e^{-u}) = int u^{-1}(s)^i e^{-s} ds
        assert est.value == pytest.approx(ref, rel=1e-9)
        assert est.bound < 1e-9


def test_moment_zero_order_is_one():
    assert W.moment(W.WeightFunction.custom(lambda t: 2 * t), 0) == pytest.approx(1.0, rel=1e-10)


def test_divergent_moment_raises():
    slow = W.WeightFunction.custom(lambda t: math.log1p(t))
    with pytest.raises(DivergentMoment):
        W.moment_estimate(slow, 3)


def test_closed_form_examples():
    for n in range(1, 11):
        assert W.wills_sum(B.Box.cube(n)).value == pytest.approx(2.0**n, rel=1e-12)
    r = 0.8
    assert W.wills_sum(B.Ball(2, r)).value == pytest.approx(1 + math.pi * r + math.pi * r * r, rel=1e-14)
    pt = B.Point([1.0, -2.0])
    assert W.wills_sum(pt).value == pytest.approx(1.0, rel=1e-14)
    # for a point only the i = n term survives: m_n^u vol(E)
    custom = W.WeightFunction.custom(lambda t: t**3 + t)
    assert W.wills_sum(pt, u=custom).value == pytest.approx(W.moment(custom, 2) * math.pi, rel=1e-9)
    assert W.wills_sum(pt, u=custom).value != pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize("k", [
    B.Box.cube(3),
    B.Ball(3, 0.5),
    B.MinkowskiSum(B.Ball(2), B.Box.cube(2)),
    B.PolytopeV(np.random.default_rng(3).normal(size=(7, 3))),
])
def test_three_routes_agree(k):
    a = W.wills_sum(k, cfg=CFG)
    b = W.wills_mc(k, cfg=CFG)
    c = W.wills_radial(k, cfg=CFG)
    assert within(a, b) and within(a, c)


@pytest.mark.parametrize("k,e,u", [
    (B.Box.cube(2), B.Box.cube(2, -1.0, 1.0), W.WeightFunction.classical()),
    (B.Ball(3, 0.5), B.Ball(3), W.WeightFunction.p_power(3.0)),
    (B.Box([[0, 1], [0, 2]]), B.Box([[-1, 1], [-0.5, 0.5]]), W.WeightFunction.p_power(1.5)),
])
def test_three_routes_agree_generalized(k, e, u):
    a = W.wills_sum(k, e, u, CFG)
    assert within(a, W.wills_mc(k, e, u, CFG))
    assert within(a, W.wills_radial(k, e, u, CFG))


@pytest.mark.parametrize("e,u", [
    (B.Ball(2), W.WeightFunction.classical()),
    (B.Ellipsoid([1.0, 0.5, 2.0]), W.WeightFunction.p_power(3.0)),
    (B.Box.cube(2, -1.0, 1.0), W.WeightFunction.custom(lambda t: t + t * t)),
])
def test_gauge_integral(e, u):
    # d_E(x, {0}) = |x|_E, so the direct integral over the origin is the left side
    direct = W.wills_mc(B.Point(np.zeros(e.dim)), e, u, CFG)
    assert within(direct, W.gauge_integral(e, u, CFG))


def test_monotone_under_inclusion():
    rng = np.random.default_rng(1)
    big = B.PolytopeV(rng.normal(size=(10, 3)))
    small = B.Scale(big, 0.6)
    a, b = W.wills(small, CFG), W.wills(big, CFG)
    assert a.value <= b.value + 3 * math.hypot(a.stderr, b.stderr)


def test_hadwiger_product():
    a, b = B.Box([[0, 1], [0, 3]]), B.Box([[0, 2]])
    prod = B.OrthogonalProduct(a, b)
    assert W.wills(prod).value == pytest.approx(W.wills(a).value * W.wills(b).value, rel=1e-15)
    k, e = B.Ball(2, 0.7), B.Box([[0, 1.5]])
    direct = W.wills_mc(B.OrthogonalProduct(k, e), cfg=CFG)
    assert within(direct, W.wills(k) * W.wills(e))


@pytest.mark.parametrize("k", [B.Box.cube(2), B.Ball(3, 0.7), B.PolytopeV(np.random.default_rng(0).normal(size=(6, 2)))])
@pytest.mark.parametrize("p", [2.0, 3.5])
def test_p_norm_identity(k, p):
    # ||exp(-pi d(., K)^2)||_p^p is the wills functional of p u_0; the right side rescales K
    n = k.dim
    lhs = W.wills_mc(k, None, W.WeightFunction.classical(p), CFG) ** (1 / p)
    rhs = W.wills(B.Scale(k, math.sqrt(p)), CFG) ** (1 / p) * p ** (-n / (2 * p))
    assert within(lhs, rhs)


@pytest.mark.parametrize("r", [0.3, 1.0, 2.5])
def test_gaussian_measure_of_disc(r):
    g = W.gaussian_measure(B.Ball(2, r), cfg=CFG)
    assert g.value == pytest.approx(1 - math.exp(-r * r / 2), rel=1e-12)
    g = W.gaussian_measure(B.Translate(B.Ball(2, r), [0.2, 0.0]), cfg=CFG)
    assert g.value <= 1 - math.exp(-r * r / 2) + 3 * g.stderr


def test_gaussian_measure_mc_of_polygon():
    k = B.PolytopeV([[-1, -1], [2, -1], [-1, 2]])
    g = W.gaussian_measure(k, cfg=CFG)
    ref, _ = integrate.dblquad(lambda y, x: math.exp(-(x * x + y * y) / 2) / (2 * math.pi),
                               -1, 2, lambda x: -1, lambda x: 1 - x)
    assert abs(g.value - ref) <= 3 * g.stderr


def test_gaussian_measure_large_box_and_half_line():
    assert W.gaussian_measure(B.Box.cube(3, -12.0, 12.0)).value == pytest.approx(1.0, abs=1e-12)
    assert W.gaussian_measure(B.Box([[0, 40]])).value == pytest.approx(0.5, rel=1e-12)


def test_sup_gaussian_at_centre_for_symmetric_bodies():
    k = B.Translate(B.Box.cube(2, -1.0, 1.0), [3.0, -1.0])
    res = W.sup_gaussian(k)
    assert res.exact_location and np.allclose(res.y, [-3.0, 1.0])
    assert res.value.value == pytest.approx(math.erf(1 / math.sqrt(2)) ** 2, rel=1e-12)


@pytest.mark.parametrize("n,r", [(2, 0.5), (3, 1.0), (4, 1.5)])
def test_hadwiger_second_representation(n, r):
    ref, _ = integrate.quad(lambda t: 2 * math.pi * S.kappa(n) * (r + t) ** n * t * math.exp(-math.pi * t * t),
                            0, math.inf, epsabs=1e-13)
    assert W.wills_ball(n, r) == pytest.approx(ref, rel=1e-10)
    est = W.wills_radial(B.Ball(n, r), cfg=CFG)
    assert abs(est.value - ref) <= 3 * est.stderr + est.bound + 1e-12


def test_translation_invariance():
    k = B.PolytopeV(np.random.default_rng(5).normal(size=(6, 3)))
    a = W.wills_mc(k, cfg=CFG)
    b = W.wills_mc(B.Translate(k, [10.0, -4.0, 2.0]), cfg=CFG)
    assert within(a, b)


def test_dimension_invariance():
    flat = B.OrthogonalProduct(B.Box.cube(2), B.Point([0.0]))
    a = W.wills_mc(flat, cfg=CFG)
    assert abs(a.value - 4.0) <= 3 * a.stderr + a.bound
    assert W.wills(flat).value == pytest.approx(4.0, rel=1e-14)


def test_reports_are_reproducible():
    k = B.PolytopeV(np.random.default_rng(2).normal(size=(6, 2)))
    cfg = MCConfig(samples=20_000, workers=3)
    a = W.wills_mc(k, cfg=cfg)
    b = W.wills_mc(k, cfg=cfg)
    assert a == b
    assert W.wills_mc(k, cfg=cfg.with_(seed=1)) != a
