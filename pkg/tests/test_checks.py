import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from willsfn import bodies as B
from willsfn import checks as C
from willsfn import steiner as S
from willsfn.config import Estimate, MCConfig
from willsfn.errors import ConvergenceFailure, MissingInput, UnknownCheck

CFG = MCConfig(samples=20_000)
finite = st.floats(-1e6, 1e6, allow_nan=False)


def w_disc(r):
    return 1 + math.pi * r + math.pi * r * r


@given(finite, st.floats(0, 1e6))
def test_verdict_rule(margin, unc):
    v = C.verdict_for(margin, unc)
    assert (v == C.HOLDS) == (margin > unc)
    assert (v == C.VIOLATED) == (margin < -unc)
    assert v in (C.HOLDS, C.VIOLATED, C.INCONCLUSIVE)


def test_verdict_rule_non_finite():
    assert C.verdict_for(math.nan, 1.0) == C.INCONCLUSIVE
    assert C.verdict_for(1.0, math.inf) == C.INCONCLUSIVE


@given(finite, finite, st.floats(0, 10), st.floats(0, 10))
@settings(max_examples=200)
def test_inequality_part(a, b, sa, sb):
    p = C.inequality("x", Estimate(a, sa), Estimate(b, sb))
    assert p.margin == b - a
    assert p.uncertainty == pytest.approx(3 * math.hypot(sa, sb) + 1e-12 * max(1, abs(a), abs(b)))
    assert p.verdict == C.verdict_for(p.margin, p.uncertainty)


@given(finite, finite)
def test_identity_part_is_two_valued(a, b):
    p = C.identity("x", a, b)
    assert p.verdict == (C.HOLDS if abs(a - b) <= p.uncertainty else C.VIOLATED)
    assert p.margin <= 0


def test_combine_picks_the_worst():
    ok = C.inequality("ok", 1.0, 2.0)
    close = C.inequality("close", 1.0, 1.0)
    bad = C.inequality("bad", 2.0, 1.0)
    assert C.combine([ok, close, bad])[1] == C.VIOLATED
    assert C.combine([ok, close])[0] is close
    assert C.combine([ok, C.inequality("ok2", 1.0, 1.5)])[0].label == "ok2"
    with pytest.raises(ValueError):
        C.combine([])


def test_registry_is_complete():
    es = C.entries()
    assert [e.id for e in es] == list(range(1, 33))
    assert {e.id for e in es if e.informational} == {31, 32}
    assert C.resolve("mcmullen_two_sided").id == 1
    assert C.resolve("12").id == 12
    with pytest.raises(UnknownCheck):
        C.resolve(99)
    with pytest.raises(UnknownCheck):
        C.resolve("no_such_check")


def test_mcmullen_on_the_disc():
    r = C.run_check(1, [B.Ball(2)], cfg=CFG)
    assert r.verdict == C.HOLDS
    # 1 = e^{pi - pi} <= 1 + 2 pi <= e^pi; the lower part is the tighter one
    assert r.lhs.value == pytest.approx(1.0, rel=1e-14)
    assert r.rhs.value == pytest.approx(1 + 2 * math.pi, rel=1e-14)
    assert any(f"rhs={math.exp(math.pi):.12g}" in n for n in r.notes)


def test_report_columns():
    r = C.run_check(1, [B.Box.cube(2)], cfg=CFG)
    d = r.as_dict()
    assert tuple(d) == C.REPORT_COLUMNS
    assert d["margin"] == pytest.approx(d["rhs"] - d["lhs"])
    assert d["inputs"]["bodies"][0]["kind"] == "box"


def test_ball_counterexample_n2():
    r = C.run_check(12, [], {"n": 2}, CFG)
    lhs = 0.5 * (math.sqrt(w_disc(1)) + math.sqrt(w_disc(2)))
    rhs = math.sqrt(w_disc(1.5))
    assert r.verdict == C.VIOLATED and r.matches_expectation
    assert r.lhs.value == pytest.approx(lhs, rel=1e-14)
    assert r.rhs.value == pytest.approx(rhs, rel=1e-14)
    assert r.margin == pytest.approx(-0.001962290677629, rel=1e-9)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_small_balls_counterexample(n):
    r = C.run_check(14, [], {"n": n}, CFG)
    assert r.verdict == C.VIOLATED and r.expected == C.VIOLATED


def test_additive_counterexample():
    r = C.run_check(13, [], {"n": 2}, CFG)
    assert r.verdict == C.VIOLATED
    assert r.lhs.value == pytest.approx(math.sqrt(w_disc(1)) + math.sqrt(w_disc(2)), rel=1e-14)


def test_cube_remark_branches():
    assert C.cube_branches(10, 5) == (258048.0, pytest.approx(215231.99524234305, rel=1e-14))
    r = C.run_check(19, [], {"n": 10, "k": 5}, CFG)
    assert r.verdict == C.HOLDS and r.lhs.value < r.rhs.value
    assert r.rhs.value == 258048.0
    for k in (1, 2):
        r = C.run_check(19, [], {"n": 10, "k": k}, CFG)
        assert r.verdict == C.HOLDS and r.lhs.value == math.comb(10, k) * 1024.0


def test_cube_remark_other_dimension_is_informational():
    r = C.run_check(19, [], {"n": 6, "k": 3}, CFG)
    assert r.verdict == C.INFORMATIONAL


def test_difference_remark():
    r9 = C.run_check(23, [], {"n": 9}, CFG)
    assert r9.verdict == C.HOLDS and r9.lhs.value == 4.0**9
    r3 = C.run_check(23, [], {"n": 3}, CFG)
    assert r3.verdict == C.HOLDS and r3.rhs.value == 4.0**3


def test_cn_table():
    table = C.cn_table(20)
    assert [t["C_n"] for t in table[1:3]] == [6.0, 20.0]
    assert all(t["branch"] == "8^{n/2}" for t in table[3:])
    assert all(t["C_n"] == min(math.comb(2 * t["n"], t["n"]), 8 ** (t["n"] / 2)) for t in table)
    assert C.c_constant(3) == 20.0 and C.c_constant(4) == 64.0


def test_solve_phi_at_091():
    s = C.solve_phi(0.91)
    assert s.positive
    assert s.coefficients == pytest.approx([0.825664184945701, 0.368385899508855, 0.382639764565399], rel=1e-12)
    assert np.max(np.abs(s.residuals)) < 1e-10
    # quadrature of the moments as an independent check
    for i, target in enumerate((1.0, 0.5, 1 / math.pi)):
        m, _ = integrate.quad(lambda t: np.polyval(s.coefficients[::-1], t) * t**i, 0, 0.91, epsabs=1e-14)
        assert m == pytest.approx(target, rel=1e-12)


def test_solve_phi_routes_agree():
    for a in np.random.default_rng(0).uniform(0.5, 1.5, 20):
        assert C.solve_phi(a).agreement < 1e-10
    with pytest.raises(ValueError):
        C.solve_phi(0.0)


def test_projection_extrema_of_the_disc():
    res = C.projection_extrema(B.Ball(2), 64, CFG)
    assert res["max"].value == pytest.approx(3.0, rel=1e-14)
    assert res["min"].value == pytest.approx(3.0, rel=1e-14)
    c2, d2 = C.projection_constants(2)
    assert c2 == pytest.approx(0.5 * math.sqrt(0.5) * 2 / math.sqrt(math.pi), rel=1e-14)
    assert d2 == pytest.approx(math.sqrt(2 * math.pi), rel=1e-14)
    scale = math.sqrt(1 + 2 * math.pi)
    assert 3 >= 2 * c2 * scale and 3 <= d2 * scale
    assert res["fraction_above_threshold"] == 1.0


def test_probe_concavity_examples():
    rng = np.random.default_rng(1)
    k, l = C.random_polytope(3, rng), B.Ball(3, 0.5)
    r = C.probe_concavity(k, l, 0.3, 0.0, CFG)
    assert r.margin >= -r.uncertainty
    r = C.probe_concavity(B.Ball(3, 0.2), B.Ball(3, 0.05), 0.5, 0.25, CFG)
    assert r.verdict == C.VIOLATED
    a, b = C.random_planar_body(rng), C.random_planar_body(rng)
    r = C.probe_concavity(a, b, 0.5, 1 / 3, CFG)
    assert r.margin >= -r.uncertainty
    with pytest.raises(ValueError):
        C.probe_concavity(k, l, 1.0, 0.0)


def test_hadwiger_product_is_exact():
    r = C.run_check(25, [B.Box.cube(1), B.Ball(2, 0.7)], cfg=CFG)
    assert r.verdict == C.HOLDS


def test_hadwiger_derivative_literal_and_reindexed():
    # the stated i-th derivative does not match; the (n-i)-th derivative does
    r = C.run_check(27, [], {"n": 2}, CFG)
    assert r.verdict == C.VIOLATED
    assert r.margin == pytest.approx(-4 * math.pi, rel=1e-12)
    assert all("(agrees)" in n for n in r.notes if "literal" in n)


def test_reindexed_derivative_identity():
    for n in range(1, 9):
        p = C.ball_wills_polynomial(n)
        for i in range(n + 1):
            d = np.polynomial.polynomial.polyder(p, n - i)
            c = math.factorial(n) * S.kappa(n) / (math.factorial(i) * S.kappa(i))
            assert np.allclose(d, c * C.ball_wills_polynomial(i), rtol=1e-12, atol=0)


def test_informational_entries():
    r = C.run_check(31, [B.Ball(2), B.Box.cube(2)], cfg=CFG)
    assert r.verdict == C.INFORMATIONAL and r.matches_expectation
    assert any("ratio" in n for n in r.notes)
    r = C.run_check(32, [B.Box.cube(2)], cfg=CFG)
    assert r.verdict == C.INFORMATIONAL


def test_missing_inputs_and_sample_floor():
    with pytest.raises(MissingInput):
        C.run_check(21, [], cfg=CFG)
    with pytest.raises(MissingInput):
        C.run_check(11, [B.Ball(3), B.Ball(3)], cfg=CFG)
    with pytest.raises(ValueError):
        C.run_check(1, [B.Ball(2)], cfg=MCConfig(samples=999))


def test_numeric_error_is_inconclusive(monkeypatch):
    def boom(*a, **k):
        raise ConvergenceFailure("stalled")
    monkeypatch.setattr(S, "mean_width_V1", boom)
    r = C.run_check(1, [B.PolytopeV(np.random.default_rng(2).normal(size=(6, 2)))], cfg=CFG)
    assert r.verdict == C.INCONCLUSIVE
    assert any("ConvergenceFailure" in n for n in r.notes)


def test_john_catalog_holds():
    for _, k in C.john_catalog(3):
        assert C.run_check(24, [k], cfg=CFG).verdict in (C.HOLDS, C.INCONCLUSIVE)


def test_gaussian_mean_width_entry():
    r = C.run_check(30, [B.Box([[0, 1], [0, 2], [0, 0.5]])], cfg=CFG)
    assert r.verdict == C.HOLDS


def test_catalog_shapes():
    cat = C.standard_catalog(3, seed=4)
    assert len(cat) == 9
    for name, k in cat:
        assert k.dim == 3
        if name.startswith("polytope"):
            assert len(k.vertices()) <= 12 and k.contains(np.zeros(3))
    for a, b in C.shadow_pairs(3):
        h = B.Subspace.coordinate(3, [0, 1])
        u = h.embed(np.random.default_rng(5).normal(size=(50, 2)))
        assert np.allclose(a.support(u), b.support(u), atol=1e-12)


def test_sweep_jobs_cover_the_proved_entries():
    jobs = C.sweep_jobs(2)
    assert {j[0] for j in jobs} == set(C.PROVED_ENTRIES)
    assert 11 not in {j[0] for j in C.sweep_jobs(3)}


def test_reports_are_reproducible():
    k, l = C.random_polytope(2, np.random.default_rng(6)), B.Ball(2, 0.5)
    a = C.run_check(9, [k, l], cfg=CFG).as_dict()
    b = C.run_check(9, [k, l], cfg=CFG).as_dict()
    assert a == b
