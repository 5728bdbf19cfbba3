"""Offspring laws, random streams and Poisson point process samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

MASK64 = (1 << 64) - 1


class Atom(NamedTuple):
    """A point of the driving Poisson process: position, arrival time, lives."""

    label: float
    time: float
    lives: int


@dataclass(frozen=True)
class OffspringDistribution:
    """Law of the initial number of lives, supported on {1, 2, ...}.

    Build instances with :meth:`dirac`, :meth:`geometric`, :meth:`table` or
    :meth:`parse`.
    """

    kind: str
    k: int = 0
    alpha: float = 0.0
    weights: tuple[tuple[int, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind == "dirac":
            if int(self.k) != self.k or self.k < 1:
                raise ValueError(f"dirac needs a positive integer, got {self.k!r}")
        elif self.kind == "geom":
            if not 0.0 < self.alpha < 1.0:
                raise ValueError(f"geometric parameter must lie in (0,1), got {self.alpha!r}")
        elif self.kind == "table":
            if not self.weights:
                raise ValueError("empty table")
            total = 0.0
            for v, p in self.weights:
                if int(v) != v or v < 1:
                    raise ValueError(f"table support must be positive integers (no leaves), got {v!r}")
                if p < 0:
                    raise ValueError(f"negative probability {p!r}")
                total += p
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"table weights sum to {total!r}, not 1")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def dirac(cls, k: int) -> "OffspringDistribution":
        return cls("dirac", k=int(k))

    @classmethod
    def geometric(cls, alpha: float) -> "OffspringDistribution":
        return cls("geom", alpha=float(alpha))

    @classmethod
    def table(cls, weights: Mapping[int, float]) -> "OffspringDistribution":
        items = tuple(sorted((int(v), float(p)) for v, p in weights.items() if p > 0))
        for v, _ in weights.items():
            if int(v) < 1:
                raise ValueError(f"table support must be positive integers (no leaves), got {v!r}")
        return cls("table", weights=items)

    @classmethod
    def parse(cls, spec: str, tol: float = 1e-9) -> "OffspringDistribution":
        """Parse ``dirac:K``, ``geom:ALPHA`` or ``table:V1=P1,V2=P2,...``.

        Table probabilities may be fractions (``1/2``) and are renormalised
        when they sum to 1 within ``tol``.
        """
        kind, sep, rest = spec.strip().partition(":")
        if not sep or not rest:
            raise ValueError(f"bad distribution spec {spec!r}")
        kind = kind.lower()
        if kind == "dirac":
            return cls.dirac(int(rest))
        if kind in ("geom", "geometric"):
            return cls.geometric(_number(rest))
        if kind == "table":
            weights: dict[int, float] = {}
            for part in rest.split(","):
                v, eq, p = part.partition("=")
                if not eq:
                    raise ValueError(f"bad table entry {part!r}")
                value = int(v)
                if value < 1:
                    raise ValueError(f"mass at {value} is not allowed (no leaves)")
                weights[value] = weights.get(value, 0.0) + _number(p)
            total = sum(weights.values())
            if abs(total - 1.0) > tol:
                raise ValueError(f"table probabilities sum to {total}, not 1")
            return cls.table({v: p / total for v, p in weights.items()})
        raise ValueError(f"unknown distribution kind in {spec!r}")

    def spec(self) -> str:
        if self.kind == "dirac":
            return f"dirac:{self.k}"
        if self.kind == "geom":
            return f"geom:{self.alpha!r}"
        return "table:" + ",".join(f"{v}={p!r}" for v, p in self.weights)

    def mean(self) -> float:
        if self.kind == "dirac":
            return float(self.k)
        if self.kind == "geom":
            return 1.0 / self.alpha
        return sum(v * p for v, p in self.weights)

    def pmf(self) -> dict[int, float]:
        """Probability table; only available for finite support."""
        if self.kind == "dirac":
            return {self.k: 1.0}
        if self.kind == "table":
            return dict(self.weights)
        raise ValueError("geometric law has infinite support")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` i.i.d. draws as an int64 array."""
        if self.kind == "dirac":
            return np.full(size, self.k, dtype=np.int64)
        if self.kind == "geom":
            # inversion: floor(log U / log(1 - alpha)) + 1
            u = 1.0 - rng.random(size)
            return (np.floor(np.log(u) / math.log1p(-self.alpha)) + 1).astype(np.int64)
        values = np.array([v for v, _ in self.weights], dtype=np.int64)
        cdf = np.cumsum([p for _, p in self.weights])
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return values[np.minimum(idx, len(values) - 1)]

    def __str__(self) -> str:
        return self.spec()


def _number(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def hash64(*parts: int | str) -> int:
    """Order-sensitive 64-bit mix of integers and strings (splitmix64 chain)."""
    h = 0x6A09E667F3BCC908
    for part in parts:
        if isinstance(part, str):
            for byte in part.encode("utf-8"):
                h = splitmix64(h ^ byte)
            h = splitmix64(h ^ 0xFF)
        else:
            h = splitmix64(h ^ (int(part) & MASK64))
    return h


@dataclass(frozen=True)
class RandomStream:
    """A reproducible stream keyed by ``(master_seed, stream_id)``."""

    master_seed: int
    stream_id: int = 0

    @classmethod
    def for_replica(cls, master_seed: int, experiment: str, replica: int) -> "RandomStream":
        return cls(master_seed, hash64(experiment, replica))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=int(self.master_seed) & MASK64,
                                     spawn_key=(int(self.stream_id) & MASK64,))
        return np.random.Generator(np.random.PCG64(seq))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomStream):
        return rng.generator()
    return np.random.default_rng(rng)


def sample_offspring(dist: OffspringDistribution, rng) -> int:
    return int(dist.sample(as_generator(rng), 1)[0])


def sample_marked_ppp(x_lo: float, x_hi: float, t_lo: float, t_hi: float,
                      dist: OffspringDistribution, rng) -> list[Atom]:
    """Atoms of a unit-intensity marked PPP on a rectangle, sorted by time."""
    labels, times, lives = marked_ppp_arrays(x_lo, x_hi, t_lo, t_hi, dist, rng)
    return [Atom(float(u), float(t), int(v)) for u, t, v in zip(labels, times, lives)]


def marked_ppp_arrays(x_lo, x_hi, t_lo, t_hi, dist: OffspringDistribution, rng):
    """Array form of :func:`sample_marked_ppp`: ``(labels, times, lives)``."""
    if x_hi < x_lo or t_hi < t_lo:
        raise ValueError(f"inverted rectangle [{x_lo},{x_hi}]x[{t_lo},{t_hi}]")
    if not all(map(math.isfinite, (x_lo, x_hi, t_lo, t_hi))):
        raise ValueError("rectangle bounds must be finite")
    gen = as_generator(rng)
    area = (x_hi - x_lo) * (t_hi - t_lo)
    n = int(gen.poisson(area)) if area > 0 else 0
    labels = x_lo + (x_hi - x_lo) * gen.random(n)
    times = t_lo + (t_hi - t_lo) * gen.random(n)
    lives = dist.sample(gen, n)
    order = np.argsort(times, kind="stable")
    return labels[order], times[order], lives[order]


def sink_cumulative(lam: float, alpha: float, lo: float, hi: float) -> float:
    """Integral of ds / (lam + (1 - alpha) s) over [lo, hi]."""
    beta = 1.0 - alpha
    if beta == 0.0:
        return (hi - lo) / lam
    return math.log((lam + beta * hi) / (lam + beta * lo)) / beta


def sample_sink_process(lam: float, alpha: float, t_max: float, rng,
                        t_min: float | None = None) -> np.ndarray:
    """Sorted heights of an inhomogeneous PPP with intensity 1/(lam + (1-alpha) s).

    The process lives on ``(t_min, t_max]``. ``t_min`` defaults to 0 when
    ``lam > 0``; with ``lam == 0`` the intensity is not integrable at 0 and an
    explicit positive truncation height is required.
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    if lam < 0 or not 0.0 < alpha <= 1.0:
        raise ValueError(f"need lam >= 0 and alpha in (0,1], got {lam}, {alpha}")
    if lam == 0:
        if alpha == 1.0:
            raise ValueError("lam = 0 with alpha = 1 has no sink process")
        if t_min is None or t_min <= 0:
            raise ValueError("lam = 0 needs a positive truncation height t_min")
    lo = 0.0 if t_min is None else float(t_min)
    gen = as_generator(rng)
    if lo >= t_max:
        return np.empty(0)
    mass = sink_cumulative(lam, alpha, lo, t_max)
    n = int(gen.poisson(mass))
    y = np.sort(gen.random(n)) * mass
    beta = 1.0 - alpha
    if beta == 0.0:
        s = lo + lam * y
    else:
        s = lo + (lam + beta * lo) * np.expm1(beta * y) / beta
    return np.minimum(s, t_max)


def sample_sources(x_lo: float, x_hi: float, lam: float, dist: OffspringDistribution, rng):
    """Homogeneous PPP of intensity ``lam`` on [x_lo, x_hi] with i.i.d. lives.

    Returns ``(positions, lives)`` sorted by position.
    """
    gen = as_generator(rng)
    n = int(gen.poisson(lam * (x_hi - x_lo))) if lam > 0 and x_hi > x_lo else 0
    pos = np.sort(x_lo + (x_hi - x_lo) * gen.random(n))
    return pos, dist.sample(gen, n)
