"""Inequality registry with uncertainty-aware verdicts, and the special solvers behind it.

Every entry turns bodies and parameters into an ``InequalityReport`` with
``margin = rhs - lhs`` (nonnegative means the stated inequality holds) and an
``uncertainty`` radius. The verdict is three-valued: holds when the margin
clears the radius, violated when it clears it in the negative direction, and
inconclusive otherwise. Identity entries compare ``|lhs - rhs|`` against the
radius instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import bodies as B
from . import steiner as S
from . import wills as WL
from .config import Estimate, MCConfig, stream
from .errors import EmptySection, MissingInput, SingularSystem, UnknownCheck, WillsError
from .wills import WeightFunction

HOLDS = "holds"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"
INFORMATIONAL = "informational"

MIN_SAMPLES = 1000

REPORT_COLUMNS = ("check_id", "inputs", "lhs", "rhs", "lhs_stderr", "rhs_stderr", "margin",
                  "uncertainty", "verdict", "notes", "seed", "samples")


# ---------------------------------------------------------------------------
# reports and verdicts
# ---------------------------------------------------------------------------

def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class InequalityReport:
    check_id: str
    inputs: dict
    lhs: Estimate
    rhs: Estimate
    margin: float
    uncertainty: float
    verdict: str
    notes: list[str] = field(default_factory=list)
    seed: int = 0
    samples: int = 0
    entry: int | None = None
    expected: str | None = None

    @property
    def matches_expectation(self) -> bool:
        """False only for an unexpected violation or a counterexample that did not reproduce."""
        if self.verdict == INFORMATIONAL:
            return True
        if self.expected is not None:
            return self.verdict in (self.expected, INCONCLUSIVE)
        return self.verdict != VIOLATED

    def as_dict(self) -> dict:
        out = {
            "check_id": self.check_id,
            "inputs": self.inputs,
            "lhs": _num(self.lhs.value),
            "rhs": _num(self.rhs.value),
            "lhs_stderr": _num(self.lhs.stderr),
            "rhs_stderr": _num(self.rhs.stderr),
            "margin": _num(self.margin),
            "uncertainty": _num(self.uncertainty),
            "verdict": self.verdict,
            "notes": list(self.notes),
            "seed": self.seed,
            "samples": self.samples,
        }
        if self.expected is not None:
            out["expected"] = self.expected
        return out


def verdict_for(margin: float, uncertainty: float) -> str:
    if not (math.isfinite(margin) and math.isfinite(uncertainty)):
        return INCONCLUSIVE
    if margin > uncertainty:
        return HOLDS
    if margin < -uncertainty:
        return VIOLATED
    return INCONCLUSIVE


def uncertainty_of(lhs: Estimate, rhs: Estimate, rel: float) -> float:
    floor = rel * max(1.0, abs(lhs.value), abs(rhs.value))
    return 3.0 * math.hypot(lhs.stderr, rhs.stderr) + lhs.bound + rhs.bound + floor


@dataclass
class Part:
    label: str
    lhs: Estimate
    rhs: Estimate
    margin: float
    uncertainty: float
    verdict: str


def inequality(label: str, lhs, rhs, rel: float = 1e-12) -> Part:
    """Part for the claim lhs <= rhs."""
    lhs, rhs = Estimate.of(lhs), Estimate.of(rhs)
    m = rhs.value - lhs.value
    unc = uncertainty_of(lhs, rhs, rel)
    return Part(label, lhs, rhs, m, unc, verdict_for(m, unc))


def identity(label: str, lhs, rhs, rel: float = 1e-12) -> Part:
    """Part for the claim lhs == rhs: holds iff |lhs - rhs| is within the uncertainty."""
    lhs, rhs = Estimate.of(lhs), Estimate.of(rhs)
    gap = abs(rhs.value - lhs.value)
    unc = uncertainty_of(lhs, rhs, rel)
    if not (math.isfinite(gap) and math.isfinite(unc)):
        v = INCONCLUSIVE
    else:
        v = HOLDS if gap <= unc else VIOLATED
    return Part(label, lhs, rhs, -gap, unc, v)


def _describe(p: Part) -> str:
    return (f"{p.label}: lhs={p.lhs.value:.12g} rhs={p.rhs.value:.12g} "
            f"margin={p.margin:.6g} unc={p.uncertainty:.3g} -> {p.verdict}")


def combine(parts: Sequence[Part]) -> tuple[Part, str]:
    """Worst verdict over the parts, and the part that decides it."""
    if not parts:
        raise ValueError("no parts to combine")
    for v in (VIOLATED, INCONCLUSIVE):
        bad = [p for p in parts if p.verdict == v]
        if bad:
            return min(bad, key=lambda p: p.margin), v
    return min(parts, key=lambda p: p.margin - p.uncertainty), HOLDS


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Entry:
    id: int
    name: str
    statement: str
    inputs: str
    fn: Callable = field(compare=False, repr=False)
    bodies: int = 1
    informational: bool = False
    parametric: bool = False


REGISTRY: dict[int, Entry] = {}
_BY_NAME: dict[str, int] = {}


def _entry(id, name, statement, inputs, bodies=1, informational=False, parametric=False):
    def deco(fn):
        e = Entry(id, name, statement, inputs, fn, bodies, informational, parametric)
        REGISTRY[id] = e
        _BY_NAME[name] = id
        return fn
    return deco


def resolve(check) -> Entry:
    if isinstance(check, Entry):
        return check
    if isinstance(check, (int, np.integer)) or (isinstance(check, str) and check.strip().isdigit()):
        i = int(check)
        if i in REGISTRY:
            return REGISTRY[i]
    elif isinstance(check, str) and check in _BY_NAME:
        return REGISTRY[_BY_NAME[check]]
    raise UnknownCheck(f"unknown check {check!r}")


def entries() -> list[Entry]:
    return [REGISTRY[i] for i in sorted(REGISTRY)]


class _Run:
    """Per-call state handed to entry functions."""

    def __init__(self, entry: Entry, bodies, params, cfg: MCConfig):
        self.entry = entry
        self.bodies = list(bodies)
        self.params = dict(params or {})
        self.cfg = cfg
        self.notes: list[str] = []
        self.expected: str | None = None
        self.shown: Part | None = None
        self.informational = entry.informational
        self.rel = cfg.tol.verdict_rel

    # inputs -------------------------------------------------------------
    def body(self, i=0) -> B.ConvexBody:
        if len(self.bodies) <= i:
            raise MissingInput(f"check {self.entry.name} needs {self.entry.bodies} body input(s)")
        return self.bodies[i]

    def dim(self, default: int | None = None) -> int:
        if "n" in self.params:
            return int(self.params["n"])
        if self.bodies:
            return self.bodies[0].dim
        if default is None:
            raise MissingInput(f"check {self.entry.name} needs a dimension")
        return default

    def lams(self, default=(0.25, 0.5, 0.75)) -> list[float]:
        if "lam" in self.params:
            vals = [float(self.params["lam"])]
        else:
            vals = [float(x) for x in self.params.get("lams", default)]
        for lam in vals:
            if not 0.0 < lam < 1.0:
                raise MissingInput("lambda must lie in (0, 1)")
        return vals

    def weight(self) -> WeightFunction:
        return weight_from(self.params.get("u"))

    def gauge_body(self, n: int) -> B.ConvexBody:
        e = self.params.get("E")
        if e is None:
            return B.Ball(n, 1.0)
        if isinstance(e, dict):
            e = B.body_from_dict(e, "$.E")
        if e.dim != n:
            raise MissingInput("gauge body E has the wrong dimension")
        return e

    def ks(self, n: int) -> list[int]:
        if "k" in self.params:
            k = int(self.params["k"])
            if not 1 <= k <= n - 1:
                raise MissingInput("subspace dimension k must satisfy 1 <= k <= n-1")
            return [k]
        return list(range(1, n))

    def subspaces(self, n: int, k: int) -> tuple[B.Subspace, B.Subspace]:
        if "H" in self.params:
            h = B.Subspace(np.asarray(self.params["H"], dtype=float), n)
            if h.k != k:
                raise MissingInput("basis H does not match k")
            return h, h.complement()
        return B.Subspace.coordinate(n, range(k)), B.Subspace.coordinate(n, range(k, n))

    def direction(self, n: int) -> np.ndarray:
        v = np.asarray(self.params.get("v", np.eye(n)[n - 1]), dtype=float)
        if v.shape != (n,) or not np.linalg.norm(v) > 0:
            raise MissingInput("direction v must be a nonzero vector of length n")
        return v / np.linalg.norm(v)

    # functionals --------------------------------------------------------
    def W(self, k: B.ConvexBody | None) -> Estimate:
        if k is None:
            return Estimate(0.0)
        return WL.wills(k, self.cfg)

    def Wu(self, k: B.ConvexBody | None, e: B.ConvexBody, u: WeightFunction) -> Estimate:
        if k is None:
            return Estimate(0.0)
        bf = B.ball_form(e)
        if u.preset == "classical" and u.params[0] == 1.0 and bf is not None and bf[1] == 1.0 \
                and not np.any(bf[0]):
            return WL.wills(k, self.cfg)
        return WL.wills_sum(k, e, u, self.cfg)

    def vol(self, k: B.ConvexBody) -> Estimate:
        return S.volume(k, self.cfg)

    # output -------------------------------------------------------------
    def ineq(self, label, lhs, rhs) -> Part:
        return inequality(label, lhs, rhs, self.rel)

    def ident(self, label, lhs, rhs) -> Part:
        return identity(label, lhs, rhs, self.rel)

    def note(self, s: str):
        self.notes.append(s)


def weight_from(spec) -> WeightFunction:
    """WeightFunction from an instance, None (classical) or a dict {preset, c, p}."""
    if spec is None:
        return WeightFunction.classical()
    if isinstance(spec, WeightFunction):
        return spec
    if isinstance(spec, dict):
        preset = spec.get("preset", "classical")
        c = float(spec.get("c", 1.0))
        if preset == "classical":
            return WeightFunction.classical(c)
        if preset == "p_power":
            if "p" not in spec:
                raise MissingInput("p_power weight needs p")
            return WeightFunction.p_power(float(spec["p"]), c)
    raise MissingInput(f"cannot build a weight function from {spec!r}")


def _jsonable(x):
    if isinstance(x, B.ConvexBody):
        return x.to_dict()
    if isinstance(x, WeightFunction):
        return x.describe()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def run_check(check, bodies: Sequence[B.ConvexBody] = (), params: dict | None = None,
              cfg: MCConfig | None = None) -> InequalityReport:
    """Evaluate one registry entry on the given bodies and parameters."""
    entry = resolve(check)
    cfg = cfg or MCConfig()
    if not entry.informational and cfg.samples < MIN_SAMPLES:
        raise ValueError(f"verdict-producing checks need at least {MIN_SAMPLES} samples")
    run = _Run(entry, bodies, params, cfg)
    inputs = {"bodies": [b.to_dict() for b in run.bodies], "params": _jsonable(run.params),
              "cfg": {"samples": cfg.samples, "seed": cfg.seed, "workers": cfg.workers}}
    base = dict(check_id=entry.name, inputs=inputs, seed=cfg.seed, samples=cfg.samples, entry=entry.id)
    nan = Estimate(math.nan)
    try:
        parts = entry.fn(run)
    except (MissingInput, UnknownCheck):
        raise
    except _Precondition as exc:
        run.note(f"precondition not met: {exc}")
        return InequalityReport(lhs=nan, rhs=nan, margin=math.nan, uncertainty=math.nan,
                                verdict=INFORMATIONAL if entry.informational else INCONCLUSIVE,
                                notes=run.notes, expected=run.expected, **base)
    except (WillsError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        run.note(f"numeric error: {type(exc).__name__}: {exc}")
        return InequalityReport(lhs=nan, rhs=nan, margin=math.nan, uncertainty=math.nan,
                                verdict=INFORMATIONAL if entry.informational else INCONCLUSIVE,
                                notes=run.notes, expected=run.expected, **base)
    if len(parts) > 1:
        run.notes.extend(_describe(p) for p in parts)
    shown, verdict = combine(parts)
    if run.shown is not None:
        shown = run.shown
    if run.informational:
        verdict = INFORMATIONAL
    return InequalityReport(lhs=shown.lhs, rhs=shown.rhs, margin=shown.margin,
                            uncertainty=shown.uncertainty, verdict=verdict, notes=run.notes,
                            expected=run.expected, **base)


class _Precondition(Exception):
    pass


def _require_origin(run: _Run, k: B.ConvexBody):
    if not k.contains(np.zeros(k.dim)):
        raise _Precondition("the origin must belong to K")


def _sup_note(run: _Run, sup: WL.SupResult):
    if not sup.exact_location:
        run.note("supremum located by search; the value is a lower bound, so 'holds' is not certified")


# ---------------------------------------------------------------------------
# entries 1-8: bounds for a single body
# ---------------------------------------------------------------------------

@_entry(1, "mcmullen_two_sided", "e^{V1(K) - pi cir(K)^2} <= W(K) <= e^{V1(K)}", "K")
def _e1(run: _Run):
    k = run.body()
    w = run.W(k)
    v1 = S.mean_width_V1(k, run.cfg)
    r, exact = B.circumradius(k, return_exact=True)
    if not exact:
        run.note("circumradius from an approximate enclosing ball; it may be slightly too large")
    lower = (v1 - math.pi * r * r).exp()
    return [run.ineq("lower", lower, w), run.ineq("upper", w, v1.exp())]


def _gauss_sup_scaled(run: _Run, k: B.ConvexBody):
    sup = WL.sup_gaussian(B.Scale(k, math.sqrt(2.0 * math.pi)), run.cfg)
    _sup_note(run, sup)
    return sup.value


@_entry(2, "vol_sandwich", "(8^{n/2} vol K)^{1/2} <= W(K) <= 8^{n/2} vol K / sup_y gamma_n(y + sqrt(2 pi) K)", "K")
def _e2(run: _Run):
    k = run.body()
    n = k.dim
    w, vol = run.W(k), run.vol(k)
    parts = [run.ineq("lower", (vol * 8.0 ** (n / 2)) ** 0.5, w)]
    if vol.value <= 0:
        run.note("vol(K) = 0: the upper bound is vacuous")
        return parts
    sup = _gauss_sup_scaled(run, k)
    parts.append(run.ineq("upper", w, vol * 8.0 ** (n / 2) / sup))
    return parts


def c_constant(n: int) -> float:
    """min{binom(2n,n), 8^{n/2}}."""
    b = math.comb(2 * n, n)
    return float(b) if b * b <= 8 ** n else 8.0 ** (n / 2)


def cn_table(n_max: int = 20) -> list[dict]:
    """Which branch attains min{binom(2n,n), 8^{n/2}}, decided by exact integer comparison."""
    out = []
    for n in range(1, n_max + 1):
        b = math.comb(2 * n, n)
        binom_smaller = b * b < 8 ** n  # compare squares, all integers
        out.append({"n": n, "binom": b, "eight_pow": 8.0 ** (n / 2),
                    "C_n": float(b) if binom_smaller else 8.0 ** (n / 2),
                    "branch": "binom" if binom_smaller else "8^{n/2}"})
    return out


@_entry(3, "gaussian_upper_Cn", "W(K) <= C_n vol K / sup_y gamma_n(y + sqrt(2 pi) K)", "K")
def _e3(run: _Run):
    k = run.body()
    vol = run.vol(k)
    if vol.value <= 0:
        raise _Precondition("vol(K) = 0 makes the bound vacuous")
    sup = _gauss_sup_scaled(run, k)
    return [run.ineq("upper", run.W(k), vol * c_constant(k.dim) / sup)]


@_entry(4, "generalized_gaussian_upper",
        "W_u(K;E) <= min{binom(2n,n) e^{-u(0)} m_n^u, 4^n m_n^{2u}} vol K vol E / sup_y mu_{u,E}(y - K)",
        "K; params u, E")
def _e4(run: _Run):
    k = run.body()
    n = k.dim
    e, u = run.gauge_body(n), run.weight()
    vol = run.vol(k)
    if vol.value <= 0:
        raise _Precondition("vol(K) = 0 makes the bound vacuous")
    a = math.comb(2 * n, n) * math.exp(-u.u0_value) * WL.moment(u, n, run.cfg.s_max)
    b = 4.0 ** n * WL.moment(u.scaled(2.0), n, run.cfg.s_max)
    sup = WL.sup_weighted_measure(k, e, u, run.cfg)
    _sup_note(run, sup)
    rhs = vol * run.vol(e) * min(a, b) / sup.value
    return [run.ineq("upper", run.Wu(k, e, u), rhs)]


@_entry(5, "lower_lambda_family", "W(K) >= (lam^{-lam} (1-lam)^{-(1-lam)/2})^n vol(K)^lam", "K; params lams")
def _e5(run: _Run):
    k = run.body()
    n = k.dim
    w, vol = run.W(k), run.vol(k)
    parts = []
    for lam in run.lams((0.1, 0.25, 0.5, 0.75, 0.9)):
        c = (lam ** -lam * (1 - lam) ** (-(1 - lam) / 2)) ** n
        parts.append(run.ineq(f"lam={lam:g}", vol ** lam * c, w))
    return parts


@_entry(6, "generalized_lower_lambda",
        "W_u(K;E) >= (lam^lam (1-lam)^{1-lam})^{-n} (m_n^{u/(1-lam)} vol E)^{1-lam} vol(K)^lam",
        "K; params u, E, lams")
def _e6(run: _Run):
    k = run.body()
    n = k.dim
    e, u = run.gauge_body(n), run.weight()
    w, vol, ve = run.Wu(k, e, u), run.vol(k), run.vol(e)
    parts = []
    for lam in run.lams((0.1, 0.25, 0.5, 0.75, 0.9)):
        m = WL.moment(u.scaled(1.0 / (1.0 - lam)), n, run.cfg.s_max)
        c = (lam ** lam * (1 - lam) ** (1 - lam)) ** -n
        parts.append(run.ineq(f"lam={lam:g}", vol ** lam * (ve * m) ** (1 - lam) * c, w))
    return parts


def _lambda_for_projection(a: float, n: int) -> float | None:
    """Root of (lam / sqrt(1 - lam))^{n-1} = a on (0, 1) by monotone bisection."""
    if not a > 0:
        return None
    target = math.log(a) / (n - 1)

    def g(lam):
        return math.log(lam) - 0.5 * math.log1p(-lam) - target

    lo, hi = 1e-300, 1.0 - 1e-16
    if g(lo) > 0 or g(hi) < 0:
        return None
    return optimize.bisect(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)


@_entry(7, "common_projection_corollary",
        "vol_{n-1}(P_H K) = (lam/sqrt(1-lam))^{n-1} implies W(K) >= vol K / lam^{n-1} + (1-lam)^{-(n-2)/2}",
        "K; params v")
def _e7(run: _Run):
    k = run.body()
    n = k.dim
    if n < 2:
        raise _Precondition("needs n >= 2")
    h = B.Subspace.hyperplane(run.direction(n))
    a = S.volume(B.project_body(k, h), run.cfg)
    lam = _lambda_for_projection(a.value, n)
    if lam is None:
        raise _Precondition("no root of the projection equation in (0, 1)")
    run.note(f"vol_(n-1)(P_H K) = {a.value:.12g}, lambda = {lam:.15g}")
    vol = run.vol(k)

    def bound_of(av):
        lm = _lambda_for_projection(av, n)
        return (1.0 - lm) ** (-(n - 2) / 2)

    second = Estimate(bound_of(a.value))
    if a.stderr or a.bound:
        step = 1e-6 * a.value
        d = (bound_of(a.value + step) - bound_of(a.value - step)) / (2 * step)
        dl = (_lambda_for_projection(a.value + step, n) - _lambda_for_projection(a.value - step, n)) / (2 * step)
        d_first = -(n - 1) * vol.value * lam ** (-n) * dl
        second = Estimate(second.value, abs(d + d_first) * a.stderr, abs(d + d_first) * a.bound)
    lower = vol * lam ** (-(n - 1)) + second
    return [run.ineq("lower", lower, run.W(k))]


def _quermass(run: _Run, k: B.ConvexBody, e: B.ConvexBody) -> list[Estimate]:
    """W_i(K;E) for i = 0..n."""
    n = k.dim
    bf = B.ball_form(e)
    if bf is not None:
        iv = S.intrinsic_volumes(k, run.cfg)
        rho = bf[1]
        return [iv[n - i] * (S.kappa(i) * rho ** i / math.comb(n, i)) for i in range(n + 1)]
    coef = S.relative_steiner(k, e, run.cfg)
    return [coef.estimate(i) for i in range(n + 1)]


@_entry(8, "aleksandrov_fenchel_consequence",
        "W_i(K;E)^2 >= vol K vol E (0 < i < n), and W_u(K;E) >= m_0 vol K + m_n vol E + "
        "(vol K vol E)^{1/2} sum_{0<i<n} binom(n,i) m_i",
        "K; params u, E")
def _e8(run: _Run):
    k = run.body()
    n = k.dim
    e, u = run.gauge_body(n), run.weight()
    vol, ve = run.vol(k), run.vol(e)
    q = _quermass(run, k, e)
    parts = [run.ineq(f"W_{i}^2", vol * ve, q[i] * q[i]) for i in range(1, n)]
    for i in range(1, n):
        # the log-concavity consequence of the same quermassintegral inequalities
        p = run.ineq("", vol ** ((n - i) / n) * ve ** (i / n), q[i])
        run.note(f"W_{i} >= vol(K)^((n-{i})/n) vol(E)^({i}/n): margin {p.margin:.6g} ({p.verdict})")
    ms = [WL.moment(u, i, run.cfg.s_max) for i in range(n + 1)]
    lower = vol * ms[0] + ve * ms[n] + (vol * ve) ** 0.5 * sum(math.comb(n, i) * ms[i] for i in range(1, n))
    parts.append(run.ineq("lower_sum", lower, run.Wu(k, e, u)))
    return parts


# ---------------------------------------------------------------------------
# entries 9-15: Brunn-Minkowski type
# ---------------------------------------------------------------------------

def _mix(k: B.ConvexBody, l: B.ConvexBody, lam: float) -> B.ConvexBody:
    return B.MinkowskiSum(B.Scale(k, 1.0 - lam), B.Scale(l, lam))


def _pair(run: _Run):
    k, l = run.body(0), run.body(1)
    if k.dim != l.dim:
        raise MissingInput("K and L must share the ambient dimension")
    return k, l


@_entry(9, "bm_logconcave", "W_u((1-lam)K + lam L; E) >= W_u(K;E)^{1-lam} W_u(L;E)^lam", "K, L; params u, E, lams",
        bodies=2)
def _e9(run: _Run):
    k, l = _pair(run)
    e, u = run.gauge_body(k.dim), run.weight()
    wk, wl = run.Wu(k, e, u), run.Wu(l, e, u)
    return [run.ineq(f"lam={lam:g}", wk ** (1 - lam) * wl ** lam, run.Wu(_mix(k, l, lam), e, u))
            for lam in run.lams()]


@_entry(10, "bm_berwald_constant",
        "W_u((1-lam)K + lam L;E)^{1/n} >= e^{-(n-1)u(0)/n} (n!)^{-1/n} ((1-lam) W_u(K;E)^{1/n} + lam W_u(L;E)^{1/n})",
        "K, L; params u, E, lams", bodies=2)
def _e10(run: _Run):
    k, l = _pair(run)
    n = k.dim
    e, u = run.gauge_body(n), run.weight()
    c = math.exp(-(n - 1) * u.u0_value / n) / math.factorial(n) ** (1.0 / n)
    wk, wl = run.Wu(k, e, u) ** (1.0 / n), run.Wu(l, e, u) ** (1.0 / n)
    return [run.ineq(f"lam={lam:g}", (wk * (1 - lam) + wl * lam) * c,
                     run.Wu(_mix(k, l, lam), e, u) ** (1.0 / n))
            for lam in run.lams()]


@_entry(11, "bm_planar_third", "n = 2: W((1-lam)K + lam L)^{1/3} >= (1-lam) W(K)^{1/3} + lam W(L)^{1/3}",
        "planar K, L; params lams", bodies=2)
def _e11(run: _Run):
    k, l = _pair(run)
    if k.dim != 2:
        raise MissingInput("the 1/3-concavity entry is planar")
    wk, wl = run.W(k) ** (1 / 3), run.W(l) ** (1 / 3)
    return [run.ineq(f"lam={lam:g}", wk * (1 - lam) + wl * lam, run.W(_mix(k, l, lam)) ** (1 / 3))
            for lam in run.lams()]


def _parse_exponent(x, n: int) -> float:
    if isinstance(x, str):
        x = x.strip()
        if x == "1/n":
            return 1.0 / n
        if x == "1/(n+1)":
            return 1.0 / (n + 1)
        if "/" in x:
            a, b = x.split("/")
            return float(a) / float(b)
    return float(x)


def _ball_concavity_part(run: _Run, n: int, r: float, R: float, lam: float, q: float, label: str) -> Part:
    """Claim W((1-lam) r B + lam R B)^q >= (1-lam) W(rB)^q + lam W(RB)^q, from closed-form ball values."""
    mid = (1 - lam) * r + lam * R
    lhs = (1 - lam) * WL.wills_ball(n, r) ** q + lam * WL.wills_ball(n, R) ** q
    return run.ineq(label, lhs, WL.wills_ball(n, mid) ** q)


@_entry(12, "bm_ball_counterexample",
        "W((1-lam) rB + lam RB)^q >= (1-lam) W(rB)^q + lam W(RB)^q fails at r=1, R=2, lam=1/2",
        "params n (default 2), exponent (default 1/2)", bodies=0, parametric=True)
def _e12(run: _Run):
    n = run.dim(2)
    q = _parse_exponent(run.params.get("exponent", 0.5), n)
    r, R = float(run.params.get("r", 1.0)), float(run.params.get("R", 2.0))
    lam = float(run.params.get("lam", 0.5))
    standard = r == 1.0 and R == 2.0 and lam == 0.5 and (q == 0.5 or q == 1.0 / n)
    run.expected = VIOLATED if n >= 2 and standard else None
    main = _ball_concavity_part(run, n, r, R, lam, q, f"q={q:.6g}")
    alt = _ball_concavity_part(run, n, r, R, lam, 1.0 / n, "q=1/n")
    run.note(f"with exponent 1/n the margin is {alt.margin:.6g}")
    run.shown = main
    return [main, alt] if q != 1.0 / n else [main]


@_entry(13, "bm_additive_counterexample", "W(B + 2B)^{1/n} >= W(B)^{1/n} + W(2B)^{1/n} fails",
        "params n (default 2)", bodies=0, parametric=True)
def _e13(run: _Run):
    n = run.dim(2)
    q = 1.0 / n
    run.expected = VIOLATED if n >= 1 else None
    lhs = WL.wills_ball(n, 1.0) ** q + WL.wills_ball(n, 2.0) ** q
    return [run.ineq("additive", lhs, WL.wills_ball(n, 3.0) ** q)]


@_entry(14, "bm_small_balls_counterexample",
        "the 1/(n+1)-concavity fails for 0.2B, 0.05B and lam = 1/2 when n > 2",
        "params n (default 3)", bodies=0, parametric=True)
def _e14(run: _Run):
    n = run.dim(3)
    q = _parse_exponent(run.params.get("exponent", "1/(n+1)"), n)
    run.expected = VIOLATED if 3 <= n <= 6 and q == 1.0 / (n + 1) else None
    return [_ball_concavity_part(run, n, 0.2, 0.05, 0.5, q, f"q={q:.6g}")]


def _directions_in(h: B.Subspace, rng, m: int) -> np.ndarray:
    g = rng.standard_normal((m, h.k))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([h.basis, -h.basis, g @ h.basis])


@_entry(15, "equal_projection_linear_bm",
        "P_H K = P_H L implies W((1-lam)K + lam L) >= (1-lam) W(K) + lam W(L)",
        "K, L with a common projection onto H = v^perp; params v, lams", bodies=2)
def _e15(run: _Run):
    k, l = _pair(run)
    n = k.dim
    h = B.Subspace.hyperplane(run.direction(n))
    dirs = _directions_in(h, stream(run.cfg, "e15:dirs"), 256)
    hk, hl = k.support(dirs), l.support(dirs)
    gap = float(np.max(np.abs(hk - hl)))
    if gap > 1e-9 * (1.0 + float(np.max(np.abs(hk)))):
        raise _Precondition(f"projections onto H differ (support gap {gap:.3g})")
    wk, wl = run.W(k), run.W(l)
    return [run.ineq(f"lam={lam:g}", wk * (1 - lam) + wl * lam, run.W(_mix(k, l, lam)))
            for lam in run.lams()]


# ---------------------------------------------------------------------------
# entries 16-23: Rogers-Shephard type
# ---------------------------------------------------------------------------

def _section_or_none(k: B.ConvexBody, h: B.Subspace):
    try:
        return B.section_body(k, h)
    except EmptySection:
        return None


@_entry(16, "rs_projection_section",
        "W(P_H K) W(K cap H^perp) <= min{binom(n,k) W(K), 2^{n/2} W(sqrt2 K)} for 0 in K",
        "K containing 0; params k, H")
def _e16(run: _Run):
    k = run.body()
    n = k.dim
    _require_origin(run, k)
    wk, w2 = run.W(k), run.W(B.Scale(k, math.sqrt(2.0)))
    parts = []
    for d in run.ks(n):
        h, hp = run.subspaces(n, d)
        lhs = run.W(B.project_body(k, h)) * run.W(_section_or_none(k, hp))
        parts.append(run.ineq(f"k={d} binom", lhs, wk * math.comb(n, d)))
        parts.append(run.ineq(f"k={d} sqrt2", lhs, w2 * 2.0 ** (n / 2)))
    return parts


@_entry(17, "rs_generalized_projection",
        "W_u(P_H K; P_H E) W_u(K cap H^perp; E cap H^perp) <= binom(n,k) e^{-u(0)} W_u(K;E)",
        "K; params k, H, u, E")
def _e17(run: _Run):
    k = run.body()
    n = k.dim
    e, u = run.gauge_body(n), run.weight()
    whole = run.Wu(k, e, u)
    parts = []
    for d in run.ks(n):
        h, hp = run.subspaces(n, d)
        pe, se = B.project_body(e, h), B.section_body(e, hp)
        lhs = run.Wu(B.project_body(k, h), pe, u) * run.Wu(_section_or_none(k, hp), se, u)
        parts.append(run.ineq(f"k={d}", lhs, whole * (math.comb(n, d) * math.exp(-u.u0_value))))
    return parts


@_entry(18, "rs_lambda_family",
        "(1-lam)^{k/2} lam^{(n-k)/2} W(sqrt(1-lam) P_H K) W(sqrt(lam) K cap H^perp) <= W(K), "
        "including lam = (n-k)/n",
        "K containing 0; params k, H, lams")
def _e18(run: _Run):
    k = run.body()
    n = k.dim
    _require_origin(run, k)
    wk = run.W(k)
    parts = []
    for d in run.ks(n):
        h, hp = run.subspaces(n, d)
        proj, sec = B.project_body(k, h), _section_or_none(k, hp)
        grid = sorted(set(run.lams((0.25, 0.5, 0.75)) + [(n - d) / n]))
        for lam in grid:
            c = (1 - lam) ** (d / 2) * lam ** ((n - d) / 2)
            a = run.W(B.Scale(proj, math.sqrt(1 - lam)))
            b = run.W(None if sec is None else B.Scale(sec, math.sqrt(lam)))
            parts.append(run.ineq(f"k={d} lam={lam:g}", a * b * c, wk))
    return parts


def cube_branches(n: int, k: int) -> tuple[float, float]:
    """(binom(n,k) W([0,1]^n), 2^{n/2} W(sqrt2 [0,1]^n)) as closed-form sums."""
    a = math.comb(n, k) * 2.0 ** n
    b = sum(math.comb(n, i) * 2.0 ** (n - i / 2) for i in range(n + 1))
    return a, b


@_entry(19, "rs_minimum_cube_remark",
        "unit cube, n = 10: the 2^{n/2} W(sqrt2 K) branch is smaller at k = 5 and larger for k != 5",
        "params n (default 10), k (default 5)", bodies=0, parametric=True)
def _e19(run: _Run):
    n = run.dim(10)
    d = int(run.params.get("k", 5))
    if not 1 <= d <= n - 1:
        raise MissingInput("k must satisfy 1 <= k <= n-1")
    cube = B.Box.cube(n)
    a = run.W(cube) * math.comb(n, d)
    b = run.W(B.Scale(cube, math.sqrt(2.0))) * 2.0 ** (n / 2)
    ca, cb = cube_branches(n, d)
    run.note(f"closed forms: binom(n,k) 2^n = {ca:.15g}, sum_i binom(n,i) 2^(n-i/2) = {cb:.15g}")
    if abs(a.value - ca) > 1e-12 * ca or abs(b.value - cb) > 1e-12 * cb:
        run.note("closed forms disagree with the computed Wills values")
    if n != 10:
        run.note("the remark is stated for n = 10; reported without a verdict")
        run.informational = True
        return [run.ineq("sqrt2 <= binom", b, a)]
    if d == 5:
        run.expected = HOLDS
        return [run.ineq("sqrt2 branch < binom branch", b, a)]
    run.expected = HOLDS
    return [run.ineq("binom branch < sqrt2 branch", a, b)]


@_entry(20, "rs_intersection_difference",
        "W((lam K cap (1-lam) L)/sqrt(lam(1-lam))) W((1-lam) K - lam L) <= W(K) W(L) / (lam(1-lam))^{n/2}",
        "K, L; params lams (default 1/2)", bodies=2)
def _e20(run: _Run):
    k, l = _pair(run)
    n = k.dim
    wk, wl = run.W(k), run.W(l)
    parts = []
    for lam in run.lams((0.5,)):
        s = lam * (1 - lam)
        try:
            meet = B.Scale(B.Intersection(B.Scale(k, lam), B.Scale(l, 1 - lam)), 1 / math.sqrt(s))
        except (ValueError, EmptySection):
            meet = None
            run.note(f"lam={lam:g}: the intersection is empty")
        diff = B.MinkowskiSum(B.Scale(k, 1 - lam), B.Negate(B.Scale(l, lam)))
        parts.append(run.ineq(f"lam={lam:g}", run.W(meet) * run.W(diff), wk * wl / s ** (n / 2)))
    return parts


def _difference_body(k: B.ConvexBody) -> B.ConvexBody:
    return B.MinkowskiSum(k, B.Negate(k))


@_entry(21, "rs_diff_2n", "W(K - K) <= 2^n W(2K)", "K")
def _e21(run: _Run):
    k = run.body()
    return [run.ineq("diff", run.W(_difference_body(k)), run.W(B.Scale(k, 2.0)) * 2.0 ** k.dim)]


@_entry(22, "rs_diff_binom", "W(K - K) <= binom(2n,n) / 2^{n/2} W(sqrt2 K)", "K")
def _e22(run: _Run):
    k = run.body()
    n = k.dim
    rhs = run.W(B.Scale(k, math.sqrt(2.0))) * (math.comb(2 * n, n) / 2.0 ** (n / 2))
    return [run.ineq("diff", run.W(_difference_body(k)), rhs)]


@_entry(23, "rs_diff_compare_remark",
        "K = [0,1/2]^n: 2^n W(2K) = 4^n is the smaller bound at n = 9, the larger at n = 3",
        "params n (default 3)", bodies=0, parametric=True)
def _e23(run: _Run):
    n = run.dim(3)
    cube = B.Box.cube(n, 0.0, 0.5)
    b21 = run.W(B.Scale(cube, 2.0)) * 2.0 ** n
    b22 = run.W(B.Scale(cube, math.sqrt(2.0))) * (math.comb(2 * n, n) / 2.0 ** (n / 2))
    run.note(f"bound (W(K-K) <= 2^n W(2K)) = {b21.value:.15g}, 4^n = {4.0 ** n:.15g}; "
             f"bound (binom) = {b22.value:.15g}")
    if n == 9:
        run.expected = HOLDS
        return [run.ineq("2^n W(2K) < binom bound", b21, b22)]
    if n == 3:
        run.expected = HOLDS
        return [run.ineq("binom bound < 2^n W(2K)", b22, b21)]
    run.note("the remark concerns n = 3 and n = 9; reported without a verdict")
    run.informational = True
    return [run.ineq("2^n W(2K) <= binom bound", b21, b22)]


def john_catalog(n: int) -> list[tuple[str, B.ConvexBody]]:
    """Bodies whose John ellipsoid is the unit ball."""
    return [("cube[-1,1]", B.Box.cube(n, -1.0, 1.0)), ("ball", B.Ball(n, 1.0)),
            ("sqrt(n) cross-polytope", B.cross_polytope(n, math.sqrt(n)))]


@_entry(24, "john_cube_max", "K in John position: W(K) <= W([-1,1]^n) = 3^n", "K from the John catalog")
def _e24(run: _Run):
    k = run.body()
    n = k.dim
    known = {b.key for _, b in john_catalog(n)}
    if k.key not in known and not run.params.get("john", False):
        raise _Precondition("K is not a certified John-position body")
    return [run.ineq("john", run.W(k), run.W(B.Box.cube(n, -1.0, 1.0)))]


# ---------------------------------------------------------------------------
# entries 25-30: Hadwiger properties, projections, mean width
# ---------------------------------------------------------------------------

@_entry(25, "hadwiger_product", "K in H, E in H^perp: W(K) W(E) = W(K + E)", "K (in H), E (in H^perp)",
        bodies=2)
def _e25(run: _Run):
    k, e = run.body(0), run.body(1)
    prod = B.OrthogonalProduct(k, e)
    # the right side goes through the direct integral, independent of the factor values
    rhs = WL.wills_mc(prod, None, None, run.cfg)
    run.note("W(K + E) by the Monte-Carlo integral of exp(-pi d(x, K + E)^2)")
    return [run.ident("product", run.W(k) * run.W(e), rhs)]


def _adaptive_simpson(f, a, b, tol, depth=40):
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        err = left + right - whole
        if depth <= 0 or abs(err) <= 15 * tol:
            return left + right + err / 15, abs(err) / 15
        l, el = rec(a, m, fa, flm, fm, left, tol / 2, depth - 1)
        r, er = rec(m, b, fm, frm, fb, right, tol / 2, depth - 1)
        return l + r, el + er

    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    return rec(a, b, fa, fm, fb, whole, tol, depth)


@_entry(26, "hadwiger_slice",
        "W(K) >= (W(K cap H_{v,0}) + W(K cap H_{v,r}))/2 + int_0^r W(K cap H_{v,t}) dt",
        "K; params v, r (default h_K(v))")
def _e26(run: _Run):
    k = run.body()
    n = k.dim
    v = run.direction(n)
    if np.count_nonzero(v) == 1:
        j = int(np.flatnonzero(v)[0])
        hyper = B.Subspace.coordinate(n, [i for i in range(n) if i != j])
    else:
        hyper = B.Subspace.hyperplane(v)
    hv = float(k.support(v[None, :])[0])
    hmv = -float(k.support(-v[None, :])[0])
    r = float(run.params.get("r", max(hv, 0.0)))
    if r < 0:
        raise MissingInput("r must be nonnegative")
    exact = {"all": True}

    def slice_w(t) -> Estimate:
        if t > hv + 1e-12 or t < hmv - 1e-12:
            return Estimate(0.0)
        t = min(max(t, hmv), hv)
        try:
            sec = B.section_body(k, hyper, t * v)
        except EmptySection:
            return Estimate(0.0)
        w = run.W(sec)
        if not w.exact:
            exact["all"] = False
        return w

    ends = (slice_w(0.0) + slice_w(r)) * 0.5
    a, b = max(0.0, hmv), min(r, hv)
    integral = Estimate(0.0)
    if b > a:
        probe = slice_w(0.5 * (a + b))
        if probe.exact:
            cache = {}

            def f(t):
                if t not in cache:
                    cache[t] = slice_w(t).value
                return cache[t]

            val, err = _adaptive_simpson(f, a, b, 1e-10 * max(1.0, abs(probe.value) * (b - a)))
            integral = Estimate(val, 0.0, err)
            run.note(f"adaptive Simpson over [{a:.6g}, {b:.6g}] with {len(cache)} slice evaluations")
        else:
            panels = int(run.params.get("panels", 8))
            ts = np.linspace(a, b, 2 * panels + 1)
            ws = [slice_w(float(t)) for t in ts]
            h = (b - a) / (2 * panels)
            wts = np.ones(len(ts))
            wts[1:-1:2], wts[2:-1:2] = 4, 2
            total = Estimate(0.0)
            for c, w in zip(wts, ws):
                total = total + w * (c * h / 3)
            coarse = np.ones(panels + 1)
            coarse[1:-1:2], coarse[2:-1:2] = 4, 2
            h2 = (b - a) / panels
            coarse_val = sum(cw * ws[2 * i].value for i, cw in enumerate(coarse)) * h2 / 3 if panels % 2 == 0 \
                else total.value
            richardson = abs(total.value - coarse_val) / 15
            integral = Estimate(total.value, total.stderr, total.bound + richardson)
            run.note(f"composite Simpson with {2 * panels} intervals on Monte-Carlo slice values")
    return [run.ineq("slice", ends + integral, run.W(k))]


def ball_wills_polynomial(n: int) -> np.ndarray:
    """Coefficients c_j of P_n(x) = W(x B^n) = sum_j binom(n,j) kappa_n / kappa_{n-j} x^j."""
    return np.array([math.comb(n, j) * S.kappa(n) / S.kappa(n - j) for j in range(n + 1)])


def _poly_gap(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    m = max(len(a), len(b))
    a = np.pad(a, (0, m - len(a)))
    b = np.pad(b, (0, m - len(b)))
    return float(np.max(np.abs(a - b))), float(max(1.0, np.max(np.abs(a)), np.max(np.abs(b))))


@_entry(27, "hadwiger_derivative",
        "d^i/dlam^i W(-lam B^n) = n! kappa_n / (i! kappa_i) W(-lam B^i), as polynomial coefficients",
        "params n (default 4), i (default all 1..n-1)", bodies=0, parametric=True)
def _e27(run: _Run):
    n = run.dim(4)
    if n < 1:
        raise MissingInput("n must be positive")
    iis = [int(run.params["i"])] if "i" in run.params else list(range(1, n))
    flip = np.array([(-1.0) ** j for j in range(n + 1)])
    q = ball_wills_polynomial(n) * flip  # lam -> P_n(-lam)
    parts = []
    for i in iis:
        if not 0 <= i <= n:
            raise MissingInput("i must satisfy 0 <= i <= n")
        lhs = np.polynomial.polynomial.polyder(q, i) if i else q
        c = math.factorial(n) * S.kappa(n) / (math.factorial(i) * S.kappa(i))
        rhs = c * ball_wills_polynomial(i) * flip[: i + 1]
        gap, scale = _poly_gap(lhs, rhs)
        # report values at lam = 1 alongside the coefficient comparison
        lv = float(np.polynomial.polynomial.polyval(1.0, lhs))
        rv = float(np.polynomial.polynomial.polyval(1.0, rhs))
        unc = run.rel * scale
        parts.append(Part(f"i={i}", Estimate(lv), Estimate(rv), -gap, unc, HOLDS if gap <= unc else VIOLATED))
        # the reindexed form: d^{n-i}/dx^{n-i} P_n(x) = n! kappa_n / (i! kappa_i) P_i(x)
        alt = np.polynomial.polynomial.polyder(ball_wills_polynomial(n), n - i) if n - i else ball_wills_polynomial(n)
        agap, ascale = _poly_gap(alt, c * ball_wills_polynomial(i))
        run.note(f"i={i}: literal coefficient gap {gap:.6g} (degrees {len(lhs) - 1} vs {i}); "
                 f"(n-i)-th derivative of P_n vs the same right side: gap {agap:.3g} "
                 f"({'agrees' if agap <= run.rel * ascale else 'differs'})")
    return parts


def _sphere_directions(cfg: MCConfig, n: int, m: int, tag: str) -> np.ndarray:
    """m directions: m/2 normalised Gaussians and their antipodes."""
    half = (m + 1) // 2
    g = stream(cfg, tag).standard_normal((half, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([g, -g])[:m]


def projection_constants(n: int) -> tuple[float, float]:
    """C_n = 1/2 (sqrt((n-1)/n))^{n-1} kappa_{n-1} / kappa_n^{(n-1)/n}, D_n = (n! kappa_n)^{1/n}."""
    c = 0.5 * math.sqrt((n - 1) / n) ** (n - 1) * S.kappa(n - 1) / S.kappa(n) ** ((n - 1) / n)
    d = (math.factorial(n) * S.kappa(n)) ** (1.0 / n)
    return c, d


def projection_extrema(k: B.ConvexBody, directions: int = 64, cfg: MCConfig | None = None) -> dict:
    """Extrema of W(P_{v^perp} K) over sphere directions and the fraction above C_n W(K)^{(n-1)/n}."""
    cfg = cfg or MCConfig()
    if directions < 64:
        raise ValueError("at least 64 directions are required")
    n = k.dim
    if n < 2:
        raise ValueError("projection extrema need n >= 2")
    dirs = _sphere_directions(cfg, n, directions, f"proj-dirs:{k.key}")
    half = (directions + 1) // 2
    vals = []
    for v in dirs[:half]:
        vals.append(WL.wills(B.project_body(k, B.Subspace.hyperplane(v)), cfg))
    # v and -v give the same hyperplane
    vals = (vals + vals)[:directions]
    c, d = projection_constants(n)
    wk = WL.wills(k, cfg)
    scale = wk ** ((n - 1) / n)
    thr = scale * c
    above = np.array([w.value >= thr.value for w in vals], dtype=float)
    frac = float(above.mean())
    hi = max(vals, key=lambda w: w.value)
    lo = min(vals, key=lambda w: w.value)
    return {"max": hi, "min": lo, "fraction_above_threshold": frac,
            "fraction_stderr": math.sqrt(frac * (1 - frac) / directions),
            "C_n": c, "D_n": d, "threshold": thr, "scale": scale, "directions": directions,
            "values": [w.value for w in vals]}


@_entry(28, "projection_extrema",
        "max_v W(P_{v^perp} K) >= 2 C_n W(K)^{(n-1)/n} and min_v W(P_{v^perp} K) <= D_n W(K)^{(n-1)/n}",
        "K; params directions (default 64)")
def _e28(run: _Run):
    k = run.body()
    res = projection_extrema(k, int(run.params.get("directions", 64)), run.cfg)
    run.note(f"C_n = {res['C_n']:.12g}, D_n = {res['D_n']:.12g}, directions = {res['directions']}")
    run.note("extrema over sampled directions: the sampled max is a lower bound and the sampled min "
             "an upper bound of the true extrema")
    return [run.ineq("max", res["scale"] * (2 * res["C_n"]), res["max"]),
            run.ineq("min", res["min"], res["scale"] * res["D_n"])]


@_entry(29, "sigma_measure_bound", "sigma(v : W(P_{v^perp} K) >= C_n W(K)^{(n-1)/n}) >= 1 - 2^{-n}",
        "K; params directions (default 64)")
def _e29(run: _Run):
    k = run.body()
    n = k.dim
    res = projection_extrema(k, int(run.params.get("directions", 64)), run.cfg)
    frac = Estimate(res["fraction_above_threshold"], res["fraction_stderr"])
    run.note(f"fraction {frac.value:.6g} over {res['directions']} directions; binomial stderr {frac.stderr:.3g}")
    return [run.ineq("fraction", 1.0 - 2.0 ** -n, frac)]


@_entry(30, "gaussian_meanwidth_identity", "int h_K d gamma_n = V_1(K) / sqrt(2 pi)", "K")
def _e30(run: _Run):
    k = run.body()
    lhs = S.gaussian_mean_support(k, run.cfg)
    rhs = S.mean_width_V1(k, run.cfg) / math.sqrt(2 * math.pi)
    return [run.ident("mean width", lhs, rhs)]


# ---------------------------------------------------------------------------
# entries 31-32: existential statements, ratios only
# ---------------------------------------------------------------------------

@_entry(31, "reverse_bm_ratio", "W(K + L)^{1/n} / (W(K)^{1/n} + W(L)^{1/n}) with T = identity", "K, L",
        bodies=2, informational=True)
def _e31(run: _Run):
    k, l = _pair(run)
    n = k.dim
    num = run.W(B.MinkowskiSum(k, l)) ** (1.0 / n)
    den = run.W(k) ** (1.0 / n) + run.W(l) ** (1.0 / n)
    run.note(f"ratio = {num.value / den.value:.12g}; the absolute constant and the SL(n) map are not "
             "specified, so no verdict is possible")
    return [run.ineq("ratio", num, den)]


@_entry(32, "upper_vol_ratio",
        "W_u(K;E)^{1/n} / (vol(K)^{1/n} + (m_n^u)^{1/n} vol(E)^{1/n}) with T = identity", "K; params u, E",
        informational=True)
def _e32(run: _Run):
    k = run.body()
    n = k.dim
    e, u = run.gauge_body(n), run.weight()
    num = run.Wu(k, e, u) ** (1.0 / n)
    den = run.vol(k) ** (1.0 / n) + run.vol(e) ** (1.0 / n) * WL.moment(u, n, run.cfg.s_max) ** (1.0 / n)
    run.note(f"ratio = {num.value / den.value:.12g}; the absolute constant and the SL(n) map are not "
             "specified, so no verdict is possible")
    return [run.ineq("ratio", num, den)]


# ---------------------------------------------------------------------------
# special solvers
# ---------------------------------------------------------------------------

def phi_closed_form(a: float) -> np.ndarray:
    pi = math.pi
    return np.array([
        (9 * pi * a * a - 18 * pi * a + 30) / (pi * a ** 3),
        (-36 * pi * a * a + 96 * pi * a - 180) / (pi * a ** 4),
        (30 * pi * a * a - 90 * pi * a + 180) / (pi * a ** 5),
    ])


def _phi_system(a: float):
    m = np.array([[a ** (i + j + 1) / (i + j + 1) for j in range(3)] for i in range(3)])
    rhs = np.array([1.0 / S.kappa(i) for i in range(3)])
    return m, rhs


@dataclass
class PhiSolution:
    a: float
    coefficients: np.ndarray  # from the linear solve
    closed_form: np.ndarray
    residuals: np.ndarray  # moment residuals of the solved coefficients
    agreement: float  # max relative gap between the two routes

    @property
    def positive(self) -> bool:
        return bool(np.all(self.coefficients > 0))


def solve_phi(a: float) -> PhiSolution:
    """phi(t) = a1 + a2 t + a3 t^2 on [0, a] with int phi t^i dt = 1/kappa_i for i = 0, 1, 2."""
    a = float(a)
    if not a > 0:
        raise ValueError("a must be positive")
    m, rhs = _phi_system(a)
    if not np.isfinite(np.linalg.cond(m)) or np.linalg.cond(m) > 1e14:
        raise SingularSystem(f"moment system is singular at a = {a}")
    sol = np.linalg.solve(m, rhs)
    closed = phi_closed_form(a)
    res = m @ sol - rhs
    gap = float(np.max(np.abs(sol - closed) / np.maximum(1.0, np.abs(closed))))
    return PhiSolution(a, sol, closed, res, gap)


def probe_concavity(k: B.ConvexBody, l: B.ConvexBody, lam: float, p: float,
                    cfg: MCConfig | None = None) -> InequalityReport:
    """Compare W((1-lam)K + lam L)^p with the p-mean of W(K)^p, W(L)^p (geometric mean at p = 0)."""
    cfg = cfg or MCConfig()
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    wk, wl = WL.wills(k, cfg), WL.wills(l, cfg)
    wm = WL.wills(_mix(k, l, lam), cfg)
    if p == 0:
        lhs, rhs = wk ** (1 - lam) * wl ** lam, wm
    else:
        lhs, rhs = wk ** p * (1 - lam) + wl ** p * lam, wm ** p
    part = inequality(f"p={p:g}", lhs, rhs, cfg.tol.verdict_rel)
    inputs = {"bodies": [k.to_dict(), l.to_dict()], "params": {"lam": lam, "p": p},
              "cfg": {"samples": cfg.samples, "seed": cfg.seed, "workers": cfg.workers}}
    return InequalityReport("probe_concavity", inputs, part.lhs, part.rhs, part.margin, part.uncertainty,
                            part.verdict, [], cfg.seed, cfg.samples)


# ---------------------------------------------------------------------------
# catalogs
# ---------------------------------------------------------------------------

def random_polytope(n: int, rng: np.random.Generator, max_vertices: int = 12) -> B.PolytopeV:
    """Convex hull of between n+1 and max_vertices Gaussian points, containing the origin."""
    while True:
        m = int(rng.integers(n + 1, max(max_vertices, n + 1) + 1))
        pts = rng.standard_normal((m, n))
        pts -= pts.mean(axis=0)
        try:
            p = B.PolytopeV(pts)
            p.geometry.volume_in_hull
        except (ValueError, WillsError):
            continue
        return p


def standard_catalog(n: int, seed: int = 0, polytopes: int = 2) -> list[tuple[str, B.ConvexBody]]:
    """Balls of radius 1/2, 1, 2; boxes; a rounded box; random polytopes with at most 12 vertices."""
    rng = np.random.default_rng([seed, n])
    cat = [(f"ball r={r:g}", B.Ball(n, r)) for r in (0.5, 1.0, 2.0)]
    cat.append(("cube [0,1]", B.Box.cube(n)))
    cat.append(("box [0,1]^(n-1)x[0,2]", B.Box([[0.0, 1.0]] * (n - 1) + [[0.0, 2.0]])))
    cat.append(("cube [-1,1]", B.Box.cube(n, -1.0, 1.0)))
    cat.append(("ball+cube", B.MinkowskiSum(B.Ball(n, 1.0), B.Box.cube(n))))
    for i in range(polytopes):
        cat.append((f"polytope {i}", random_polytope(n, rng)))
    return cat


def shadow_pairs(n: int):
    """Pairs with a common projection onto e_n^perp."""
    cube = B.Box.cube(n)
    base = np.array(np.meshgrid(*[[0.0, 1.0]] * (n - 1))).reshape(n - 1, -1).T
    floor = np.column_stack([base, np.zeros(len(base))])
    pyramid = B.PolytopeV(np.vstack([floor, np.r_[np.full(n - 1, 0.5), 1.5]]))
    tall = B.Box([[0.0, 1.0]] * (n - 1) + [[0.0, 2.0]])
    return [(cube, tall), (cube, pyramid), (B.Ball(n), B.Ellipsoid([1.0] * (n - 1) + [2.0]))]


PROVED_ENTRIES = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 15, 16, 17, 18, 20, 21, 22, 24, 25, 26, 27, 28, 29, 30)


def sweep_jobs(n: int, seed: int = 0, ids=PROVED_ENTRIES):
    """(entry id, bodies, params) for the proved entries over the standard catalog in dimension n.

    Pair entries take cyclically adjacent catalog bodies; entry 15 takes the
    pairs of ``shadow_pairs``. Entry 24 uses the John catalog, entry 25 splits
    n into two factor dimensions.
    """
    cat = [b for _, b in standard_catalog(n, seed)]
    jobs = []
    for i in ids:
        e = resolve(i)
        if e.parametric:
            if i == 27 and n >= 2:
                jobs.append((i, [], {"n": n}))
            continue
        if i == 11 and n != 2:
            continue
        if i == 24:
            jobs.extend((i, [b], {}) for _, b in john_catalog(n))
        elif i == 25:
            for a in range(1, n // 2 + 1):
                left, right = standard_catalog(a, seed), standard_catalog(n - a, seed)
                jobs.extend((i, [left[j][1], right[j][1]], {}) for j in (0, 3, 6))
        elif i == 15:
            jobs.extend((i, list(pair), {}) for pair in shadow_pairs(n))
        elif e.bodies == 2:
            jobs.extend((i, [cat[j], cat[(j + 1) % len(cat)]], {}) for j in range(len(cat)))
        else:
            jobs.extend((i, [b], {}) for b in cat)
    return jobs


def random_planar_body(rng: np.random.Generator) -> B.ConvexBody:
    """A random planar body: polygon, ellipse, box, disc or a rounded polygon."""
    kind = int(rng.integers(0, 5))
    if kind == 0:
        return random_polytope(2, rng, max_vertices=12)
    if kind == 1:
        ang = rng.uniform(0, math.pi)
        rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        return B.Translate(B.linear_map(B.Ellipsoid(rng.uniform(0.1, 2.0, 2)), rot), rng.normal(size=2))
    if kind == 2:
        lo = rng.normal(size=2)
        return B.Box(np.column_stack([lo, lo + rng.uniform(0.05, 2.5, 2)]))
    if kind == 3:
        return B.Translate(B.Ball(2, float(rng.uniform(0.05, 2.0))), rng.normal(size=2))
    return B.MinkowskiSum(random_polytope(2, rng, max_vertices=8), B.Ball(2, float(rng.uniform(0.05, 1.0))))
