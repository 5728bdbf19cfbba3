"""Geometric offspring law: red/blue construction and the tagged particle.

With geometric(alpha) lives the number of lives need not be drawn up front.
Each atom is red with probability alpha and blue otherwise; a blue atom adds
a particle, a red atom adds a particle and kills its nearest alive left
neighbour. Sinks are coloured the same way and only red ones kill.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from sortedcontainers import SortedDict

from .distributions import (
    OffspringDistribution,
    as_generator,
    sample_sink_process,
)
from .hammersley_process import SINK, SourcesSinks, run_arrays

RED, BLUE = "red", "blue"


class ColoredAtom(NamedTuple):
    label: float
    time: float
    color: str


@dataclass
class RedBlueRecord:
    """Particle lifetimes of a red/blue run; lives are not tracked."""

    x_lo: float
    x_hi: float
    t_max: float
    positions: list[float] = field(default_factory=list)
    births: list[float] = field(default_factory=list)
    deaths: list[float] = field(default_factory=list)
    colors: list[str | None] = field(default_factory=list)
    sink_times: list[float] = field(default_factory=list)
    sink_colors: list[str] = field(default_factory=list)
    sink_targets: list[int] = field(default_factory=list)

    def alive_positions(self, t: float) -> np.ndarray:
        b = np.asarray(self.births)
        d = np.asarray(self.deaths)
        return np.sort(np.asarray(self.positions)[(b <= t) & (d > t)])

    def count(self, t: float) -> int:
        return len(self.alive_positions(t))


def color_atoms(labels, times, alpha: float, rng) -> list[ColoredAtom]:
    gen = as_generator(rng)
    red = gen.random(len(labels)) < alpha
    return [ColoredAtom(float(u), float(t), RED if r else BLUE) for u, t, r in zip(labels, times, red)]


def redblue_boundary(x_lo: float, x_hi: float, t_max: float, lam: float, alpha: float, rng,
                     t_min: float | None = None) -> SourcesSinks:
    """Sources PPP(lam) and sinks of intensity 1/(lam + (1-alpha)s), each sink red w.p. alpha.

    Source lives are irrelevant in the red/blue picture and are set to 1.
    """
    gen = as_generator(rng)
    n = int(gen.poisson(lam * (x_hi - x_lo))) if lam > 0 else 0
    pos = np.sort(x_lo + (x_hi - x_lo) * gen.random(n))
    sinks = sample_sink_process(lam, alpha, t_max, gen, t_min=t_min)
    colors = [RED if r else BLUE for r in gen.random(len(sinks)) < alpha]
    return SourcesSinks([(float(u), 1) for u in pos], sinks.tolist(), colors)


def simulate_redblue(x_lo: float, x_hi: float, t_max: float, alpha: float,
                     boundary: SourcesSinks | None = None, rng=None,
                     atoms: Sequence[ColoredAtom] | None = None) -> RedBlueRecord:
    """Red/blue run on ``[x_lo, x_hi] x [0, t_max]``.

    Unit-intensity atoms are sampled and coloured from ``rng`` unless given.
    Uncoloured sinks are coloured red with probability ``alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    if not x_lo < x_hi or not t_max > 0:
        raise ValueError("invalid rectangle")
    gen = as_generator(rng)
    boundary = boundary or SourcesSinks()
    if atoms is None:
        n = int(gen.poisson((x_hi - x_lo) * t_max))
        atoms = color_atoms(x_lo + (x_hi - x_lo) * gen.random(n), t_max * gen.random(n), alpha, gen)
    sink_colors = boundary.sink_colors
    if sink_colors is None:
        sink_colors = [RED if r else BLUE for r in gen.random(len(boundary.sinks)) < alpha]

    rec = RedBlueRecord(x_lo, x_hi, t_max)
    alive: SortedDict = SortedDict()

    def add(u, t, color):
        if u in alive:
            raise ValueError(f"duplicate position {u}")
        rec.positions.append(u)
        rec.births.append(t)
        rec.deaths.append(math.inf)
        rec.colors.append(color)
        alive[u] = len(rec.positions) - 1

    def kill(idx, t):
        vid = alive.values()[idx]
        del alive[alive.keys()[idx]]
        rec.deaths[vid] = t
        return vid

    for u, _ in sorted(boundary.sources):
        add(float(u), 0.0, None)
    events = [(a.time, 0, a.label, a.color) for a in atoms]
    events += [(s, 1, None, c) for s, c in zip(boundary.sinks, sink_colors) if s <= t_max]
    events.sort(key=lambda e: e[0])
    for t, kind, u, color in events:
        if kind == 0:
            i = alive.bisect_left(u)
            if color == RED and i > 0:
                kill(i - 1, t)
            add(float(u), t, color)
        else:
            rec.sink_times.append(t)
            rec.sink_colors.append(color)
            if color == RED and alive:
                rec.sink_targets.append(kill(len(alive) - 1, t))
            else:
                rec.sink_targets.append(-1)
    return rec


@dataclass
class TaggedTrajectory:
    """Leftmost alive descendant ``X`` of the first source in ``[0, inf)``, and its right gaps."""

    times: np.ndarray
    x: np.ndarray
    gaps: np.ndarray
    window: tuple[float, float]
    expansions: int = 0

    @property
    def displacement(self) -> np.ndarray:
        return self.x - self.x[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = self.gaps.shape[1]
        w.writerow(["t", "X"] + [f"gap_{i + 1}" for i in range(m)])
        for t, x, g in zip(self.times, self.x, self.gaps):
            w.writerow([repr(float(t)), repr(float(x))] + [repr(float(v)) for v in g])
        return buf.getvalue()


class WindowTooSmall(RuntimeError):
    pass


def default_left_width(lam: float, alpha: float) -> float:
    """Left margin ``10 * alpha / (lam (1 - alpha))``, ten times the limiting mean drift."""
    return 10.0 * alpha / (lam * (1.0 - alpha))


def default_right_width(lam: float, alpha: float, m_gaps: int) -> float:
    return default_left_width(lam, alpha) + 10.0 * (m_gaps + 2) / lam


def _strip(seed_seq_entropy: int, index: int, lam: float, t_max: float, dist: OffspringDistribution):
    """Sources and atoms of the unit strip ``[index, index + 1)``."""
    seq = np.random.SeedSequence(seed_seq_entropy, spawn_key=(1, index % 2**32))
    gen = np.random.Generator(np.random.PCG64(seq))
    ns = int(gen.poisson(lam))
    s_pos = index + gen.random(ns)
    s_lives = dist.sample(gen, ns)
    na = int(gen.poisson(t_max))
    a_lab = index + gen.random(na)
    a_time = t_max * gen.random(na)
    a_lives = dist.sample(gen, na)
    return s_pos, s_lives, a_lab, a_time, a_lives


def _assemble(entropy: int, lo: int, hi: int, lam: float, alpha: float, t_max: float, expansion: int):
    dist = OffspringDistribution.geometric(alpha)
    parts = [_strip(entropy, k, lam, t_max, dist) for k in range(lo, hi)]
    s_pos = np.concatenate([p[0] for p in parts])
    s_lives = np.concatenate([p[1] for p in parts])
    a_lab = np.concatenate([p[2] for p in parts])
    a_time = np.concatenate([p[3] for p in parts])
    a_lives = np.concatenate([p[4] for p in parts])
    sink_gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=(2, expansion))))
    sinks = sample_sink_process(lam, alpha, t_max, sink_gen)
    return run_arrays(a_lab, a_time, a_lives, s_pos, s_lives, sinks)


def track_tagged_particle(lam: float, alpha: float, t_max: float, window_width: float | None = None,
                          m_gaps: int = 3, rng=None, sample_times: Sequence[float] | None = None,
                          right_width: float | None = None, max_expansions: int = 6) -> TaggedTrajectory:
    """Follow the tagged particle in the stationary geometric system.

    The system lives on ``[-W, W']`` with sources PPP(lam) x Geom(alpha),
    unit-intensity atoms, and right-edge sinks of intensity
    1/(lam + (1-alpha)s), which is exactly the law of the lines entering
    from a larger box. ``W`` defaults to :func:`default_left_width`. When
    fewer than ``m_gaps`` particles lie right of ``X(t)`` at a sample time,
    ``W'`` is doubled and the run continues on the enlarged window with the
    same strips; nothing is redrawn.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    gen = as_generator(rng)
    entropy = int(gen.integers(0, 2**63))
    w_left = default_left_width(lam, alpha) if window_width is None else float(window_width)
    w_right = default_right_width(lam, alpha, m_gaps) if right_width is None else float(right_width)
    times = np.asarray(sample_times if sample_times is not None else np.linspace(0, t_max, 11), dtype=float)
    if times.min() < 0 or times.max() > t_max:
        raise ValueError("sample times must lie in [0, t_max]")
    lo = -int(math.ceil(w_left))
    for expansion in range(max_expansions + 1):
        hi = int(math.ceil(w_right))
        run = _assemble(entropy, lo, hi, lam, alpha, t_max, expansion)
        try:
            x, gaps = _tagged_path(run, times, m_gaps)
        except WindowTooSmall:
            w_right *= 2
            continue
        return TaggedTrajectory(times, x, gaps, (float(lo), float(hi)), expansion)
    raise WindowTooSmall(f"window still too small after {max_expansions} expansions")


def _tagged_path(run, times: np.ndarray, m: int):
    n_src = run.n_sources
    src_lab = run.labels[:n_src]
    right = np.flatnonzero(src_lab >= 0)
    if len(right) == 0:
        raise WindowTooSmall("no source in [0, W']")
    tag_vertex = right[np.argmin(src_lab[right])]
    ev_of_vertex = np.empty(len(run.labels), dtype=np.int64)
    is_vertex = run.vertex >= 0
    ev_of_vertex[run.vertex[is_vertex]] = np.flatnonzero(is_vertex)
    tag_event = ev_of_vertex[tag_vertex]

    vert_ev = np.flatnonzero(is_vertex)
    lab = run.labels[run.vertex[vert_ev]]
    death = run.death[vert_ev]
    in_tree = run.tree[vert_ev] == tag_event
    xs = np.empty(len(times))
    gaps = np.empty((len(times), m))
    for i, t in enumerate(times):
        k = int(np.searchsorted(run.times, t, side="right"))
        alive = (vert_ev < k) & ((death < 0) | (death >= k))
        tagged = alive & in_tree
        if not tagged.any():
            raise WindowTooSmall("tagged tree died at the right edge")
        x = lab[tagged].min()
        right_of = np.sort(lab[alive & (lab > x)])
        if len(right_of) < m:
            raise WindowTooSmall("fewer than m particles right of X(t)")
        xs[i] = x
        gaps[i] = np.diff(np.concatenate([[x], right_of[:m]]))
    return xs, gaps


def trees_crossing_origin(lam: float, alpha: float, width: float, t_max: float, rng,
                          right_width: float = 5.0) -> int:
    """Sources in ``(-width, 0]`` whose tree has a vertex in ``[0, inf)`` by ``t_max``."""
    gen = as_generator(rng)
    entropy = int(gen.integers(0, 2**63))
    run = _assemble(entropy, -int(math.ceil(width)), int(math.ceil(right_width)), lam, alpha, t_max, 0)
    n_src = run.n_sources
    src_lab = run.labels[:n_src]
    is_vertex = run.vertex >= 0
    ev_of_vertex = np.empty(len(run.labels), dtype=np.int64)
    ev_of_vertex[run.vertex[is_vertex]] = np.flatnonzero(is_vertex)
    candidates = np.flatnonzero((src_lab > -width) & (src_lab <= 0))
    vert_ev = np.flatnonzero(is_vertex & (run.kinds != SINK))
    crossing_trees = set(run.tree[vert_ev[run.labels[run.vertex[vert_ev]] >= 0]].tolist())
    return int(sum(ev_of_vertex[v] in crossing_trees for v in candidates))


def first_gap_mean(lam: float, alpha: float, t: float) -> float:
    return 1.0 / (lam + (1.0 - alpha) * t)


def mean_displacement(lam: float, alpha: float, t: float) -> float:
    """E[X(t) - X(0)] = alpha t / (lam (lam + (1-alpha) t))."""
    return alpha * t / (lam * (lam + (1.0 - alpha) * t))
