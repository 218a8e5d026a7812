"""Monte-Carlo configuration, value-with-error arithmetic and seeded sampling streams."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

# First 64 bits of sha256(b"0x5EED_W1LL5").
DEFAULT_SEED = 0x4B1D9E11B35512C5

DEFAULT_S_MAX = 12.0 * math.log(10.0)


@dataclass(frozen=True)
class Tolerances:
    support_rel: float = 1e-10
    gauge_abs: float = 1e-12
    distance_rel: float = 1e-8
    nearest_point: float = 1e-12
    quad_rel: float = 1e-10
    ascent_agree: float = 1e-6
    optimizer_rel: float = 1e-8
    convexity: float = 1e-10
    # floating round-off floor added to every verdict uncertainty
    verdict_rel: float = 1e-12


@dataclass(frozen=True)
class MCConfig:
    samples: int = 100_000
    seed: int = DEFAULT_SEED
    workers: int = 1
    s_max: float = DEFAULT_S_MAX
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.s_max <= 0:
            raise ValueError("s_max must be positive")

    def with_(self, **kw) -> "MCConfig":
        return replace(self, **kw)

    def key(self) -> tuple:
        return (self.samples, self.seed, self.workers, self.s_max, self.tol)


@dataclass(frozen=True)
class Estimate:
    """A real value with a standard error and a deterministic error bound.

    Arithmetic propagates ``stderr`` to first order assuming independent
    errors; ``bound`` (truncation, quadrature) is propagated linearly.
    """

    value: float
    stderr: float = 0.0
    bound: float = 0.0

    @staticmethod
    def of(x) -> "Estimate":
        if isinstance(x, Estimate):
            return x
        return Estimate(float(x))

    @property
    def exact(self) -> bool:
        return self.stderr == 0.0 and self.bound == 0.0

    def uncertainty(self, k: float = 3.0) -> float:
        return k * self.stderr + self.bound

    def __float__(self):
        return float(self.value)

    def __add__(self, other):
        o = Estimate.of(other)
        return Estimate(self.value + o.value, math.hypot(self.stderr, o.stderr), self.bound + o.bound)

    __radd__ = __add__

    def __neg__(self):
        return Estimate(-self.value, self.stderr, self.bound)

    def __sub__(self, other):
        return self + (-Estimate.of(other))

    def __rsub__(self, other):
        return Estimate.of(other) - self

    def __mul__(self, other):
        o = Estimate.of(other)
        a, b = self.value, o.value
        return Estimate(
            a * b,
            math.hypot(b * self.stderr, a * o.stderr),
            abs(b) * self.bound + abs(a) * o.bound + self.bound * o.bound,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * Estimate.of(other).reciprocal()

    def __rtruediv__(self, other):
        return Estimate.of(other) * self.reciprocal()

    def reciprocal(self):
        return self.apply(lambda v: 1.0 / v, lambda v: -1.0 / (v * v))

    def __pow__(self, p: float):
        p = float(p)
        if p == 1.0:
            return self
        return self.apply(lambda v: v**p, lambda v: p * v ** (p - 1.0) if v != 0 else 0.0)

    def exp(self):
        return self.apply(math.exp, math.exp)

    def log(self):
        return self.apply(math.log, lambda v: 1.0 / v)

    def apply(self, f: Callable[[float], float], df: Callable[[float], float]) -> "Estimate":
        v = f(self.value)
        d = abs(df(self.value))
        return Estimate(v, d * self.stderr, d * self.bound)

    def as_dict(self):
        return {"value": self.value, "stderr": self.stderr, "bound": self.bound}


def _tag_key(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def stream(cfg: MCConfig, tag: str, worker: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, tag, worker)."""
    ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(_tag_key(tag), worker))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class MCResult:
    mean: np.ndarray
    cov: np.ndarray  # covariance of the mean
    count: int

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0))


def _share(n: int, workers: int) -> list[int]:
    base, extra = divmod(n, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


def _combine(a, b):
    # Chan et al. pairwise update of (count, mean, scatter matrix)
    na, ma, sa = a
    nb, mb, sb = b
    if na == 0:
        return b
    if nb == 0:
        return a
    n = na + nb
    d = mb - ma
    return n, ma + d * (nb / n), sa + sb + np.outer(d, d) * (na * nb / n)


def mc_mean(cfg: MCConfig, tag: str, n: int, fn: Callable[[np.random.Generator, int], np.ndarray],
            chunk: int = 1 << 16) -> MCResult:
    """Mean of per-sample values ``fn(rng, m)`` over ``n`` samples.

    ``fn`` returns shape (m,) or (m, k). Work is split across ``cfg.workers``
    streams and reduced in worker order, so results only depend on
    (seed, tag, workers, n).
    """
    shares = _share(n, cfg.workers)

    def run(w):
        rng = stream(cfg, tag, w)
        acc = (0, None, None)
        left = shares[w]
        while left > 0:
            m = min(chunk, left)
            y = np.asarray(fn(rng, m), dtype=float)
            if y.ndim == 1:
                y = y[:, None]
            mu = y.mean(axis=0)
            c = y - mu
            part = (m, mu, c.T @ c)
            acc = part if acc[1] is None else _combine(acc, part)
            left -= m
        return acc

    if cfg.workers == 1:
        parts = [run(0)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(run, range(cfg.workers)))
    acc = (0, None, None)
    for p in parts:
        if p[1] is None:
            continue
        acc = p if acc[1] is None else _combine(acc, p)
    count, mean, scatter = acc
    if count > 1:
        cov = scatter / (count - 1) / count
    else:
        cov = np.full_like(scatter, np.inf)
    return MCResult(mean, cov, count)
