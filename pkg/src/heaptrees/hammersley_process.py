"""Continuous-time μ-Hammersley process on an interval, with sources and sinks.

Atoms of a unit-intensity marked PPP on ``[x_lo, x_hi] x (0, t_max]`` arrive
in time order. Sources are particles present at time 0; each sink removes a
life from the rightmost alive particle. The whole run is kept as a
:class:`~heaptrees.record.GraphicalRecord`.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .distributions import (
    Atom,
    OffspringDistribution,
    as_generator,
    marked_ppp_arrays,
    sample_sink_process,
    sample_sources,
)
from .record import INF, GraphicalRecord

SOURCE, ATOM, SINK = 0, 1, 2


@dataclass
class SourcesSinks:
    """Boundary data: sources on the bottom edge, sink times on the right edge."""

    sources: list[tuple[float, int]] = field(default_factory=list)
    sinks: list[float] = field(default_factory=list)
    sink_colors: list[str] | None = None

    def __post_init__(self):
        labels = [u for u, _ in self.sources]
        if len(set(labels)) != len(labels):
            raise ValueError("source labels must be distinct")
        if any(nu < 1 for _, nu in self.sources):
            raise ValueError("source lives must be >= 1")
        if any(s <= 0 for s in self.sinks):
            raise ValueError("sink times must be positive")
        if len(set(self.sinks)) != len(self.sinks):
            raise ValueError("sink times must be distinct")
        if self.sink_colors is not None and len(self.sink_colors) != len(self.sinks):
            raise ValueError("one color per sink")


def stationary_boundary(x_lo: float, x_hi: float, t_max: float, lam: float, alpha: float,
                        dist: OffspringDistribution, rng, t_min: float | None = None) -> SourcesSinks:
    """Sources PPP(lam) with lives from ``dist`` and sinks of intensity 1/(lam + (1-alpha)s).

    With ``dist`` geometric(alpha) this boundary makes the particle system
    stationary in the sense that at every time the particles form a PPP of
    intensity ``lam + (1 - alpha) t``. ``alpha = 1`` is the classical case.
    """
    gen = as_generator(rng)
    pos, lives = sample_sources(x_lo, x_hi, lam, dist, gen) if lam > 0 else (np.empty(0), np.empty(0, int))
    sinks = sample_sink_process(lam, alpha, t_max, gen, t_min=t_min)
    return SourcesSinks(list(zip(pos.tolist(), lives.tolist())), sinks.tolist())


def simulate(x_lo: float, x_hi: float, t_max: float, dist: OffspringDistribution | None,
             boundary: SourcesSinks | None = None, rng=None,
             atoms: Sequence[Atom] | None = None) -> GraphicalRecord:
    """Run the process on ``[x_lo, x_hi] x [0, t_max]``.

    Atoms are sampled from ``dist`` and ``rng`` unless given explicitly.
    Atom and sink times must be distinct from each other.
    """
    if not x_lo < x_hi or not t_max > 0:
        raise ValueError(f"invalid rectangle [{x_lo},{x_hi}]x[0,{t_max}]")
    boundary = boundary or SourcesSinks()
    if atoms is None:
        if dist is None:
            raise ValueError("need a distribution or explicit atoms")
        a_lab, a_time, a_lives = marked_ppp_arrays(x_lo, x_hi, 0.0, t_max, dist, rng)
    else:
        atoms = sorted(atoms, key=lambda a: a.time)
        a_lab = np.array([a.label for a in atoms], dtype=float)
        a_time = np.array([a.time for a in atoms], dtype=float)
        a_lives = np.array([a.lives for a in atoms], dtype=np.int64)
        if len(atoms) and (a_lab.min() < x_lo or a_lab.max() > x_hi
                           or a_time.min() <= 0 or a_time.max() > t_max):
            raise ValueError("atom outside the rectangle")
        if np.any(a_lives < 1):
            raise ValueError("atom lives must be >= 1")
    return _run(x_lo, x_hi, t_max, a_lab, a_time, a_lives, boundary)


@dataclass
class EventRun:
    """Array-level result of one run.

    Events are sources, then atoms and sinks by time. ``vertex`` maps an
    event to its vertex id (sources first, then atoms in input order) or -1
    for sinks. ``target``, ``death`` and ``tree`` are event indices as
    returned by the kernel.
    """

    labels: np.ndarray
    lives: np.ndarray
    n_sources: int
    kinds: np.ndarray
    times: np.ndarray
    vertex: np.ndarray
    target: np.ndarray
    death: np.ndarray
    remaining: np.ndarray
    tree: np.ndarray


def run_arrays(a_lab, a_time, a_lives, s_lab, s_lives, sinks) -> EventRun:
    """Merge sources, atoms and sinks into one event stream and run the kernel."""
    a_lab = np.asarray(a_lab, dtype=float)
    a_time = np.asarray(a_time, dtype=float)
    s_lab = np.asarray(s_lab, dtype=float)
    sinks = np.asarray(sinks, dtype=float)
    n_src, n_atom, n_sink = len(s_lab), len(a_lab), len(sinks)
    labels = np.concatenate([s_lab, a_lab])
    all_lives = np.concatenate([np.asarray(s_lives, dtype=np.int64), np.asarray(a_lives, dtype=np.int64)])
    if len(np.unique(labels)) != len(labels):
        raise ValueError("labels of atoms and sources must be distinct")
    if len(np.unique(np.concatenate([a_time, sinks]))) != n_atom + n_sink:
        raise ValueError("atom and sink times must be distinct")

    ev_time = np.concatenate([np.zeros(n_src), a_time, sinks])
    ev_kind = np.concatenate([np.full(n_src, SOURCE), np.full(n_atom, ATOM), np.full(n_sink, SINK)])
    order = np.concatenate([np.arange(n_src),
                            n_src + np.argsort(np.concatenate([a_time, sinks]), kind="stable")])
    kinds = ev_kind[order]
    times = ev_time[order]
    vertex = np.where(order < n_src + n_atom, order, -1)
    is_vertex = vertex >= 0
    ranks = np.empty(len(labels), dtype=np.int64)
    ranks[np.argsort(labels, kind="stable")] = np.arange(len(labels))
    rank_ev = np.zeros(len(order), dtype=np.int64)
    rank_ev[is_vertex] = ranks[vertex[is_vertex]]
    lives_ev = np.zeros(len(order), dtype=np.int64)
    lives_ev[is_vertex] = all_lives[vertex[is_vertex]]
    target, death, remaining, tree = kernels.run_events(kinds, rank_ev, lives_ev, len(labels))
    return EventRun(labels, all_lives, n_src, kinds, times, vertex, target, death, remaining, tree)


def _run(x_lo, x_hi, t_max, a_lab, a_time, a_lives, boundary: SourcesSinks) -> GraphicalRecord:
    s_lab = np.array([u for u, _ in boundary.sources], dtype=float)
    s_lives = np.array([nu for _, nu in boundary.sources], dtype=np.int64)
    if len(s_lab) and (s_lab.min() < x_lo or s_lab.max() > x_hi):
        raise ValueError("source outside the interval")
    sinks = np.asarray([s for s in boundary.sinks if s <= t_max], dtype=float)
    run = run_arrays(a_lab, a_time, a_lives, s_lab, s_lives, sinks)
    n_src, nv = run.n_sources, len(run.labels)

    is_vertex = run.vertex >= 0
    ev_v = np.empty(nv, dtype=np.int64)
    ev_v[run.vertex[is_vertex]] = np.flatnonzero(is_vertex)
    t_ev = run.target[ev_v]
    parent = np.where(t_ev >= 0, run.vertex[np.maximum(t_ev, 0)], -1)
    d_ev = run.death[ev_v]
    deaths = np.where(d_ev >= 0, run.times[np.maximum(d_ev, 0)], INF)

    sink_events = np.flatnonzero(run.kinds == SINK)
    sink_targets = run.target[sink_events]
    sink_targets = np.where(sink_targets >= 0, run.vertex[np.maximum(sink_targets, 0)], -1)

    rec = GraphicalRecord(x_lo, x_hi, t_max)
    rec.labels = run.labels.tolist()
    rec.births = np.concatenate([np.zeros(n_src), np.asarray(a_time, dtype=float)]).tolist()
    rec.lives = run.lives.tolist()
    rec.remaining = run.remaining[ev_v].tolist()
    rec.parent = parent.tolist()
    rec.deaths = deaths.tolist()
    rec.is_source = [True] * n_src + [False] * (nv - n_src)
    rec.sink_times = run.times[sink_events].tolist()
    rec.sink_targets = sink_targets.tolist()
    if boundary.sink_colors is not None:
        color_of = dict(zip(boundary.sinks, boundary.sink_colors))
        rec.sink_colors = [color_of[s] for s in rec.sink_times]
    return rec


class Trajectory:
    """Configurations of a record at arbitrary times.

    Snapshots of the alive set are stored every ``every`` events; a query
    replays the log from the nearest snapshot at or before the query time.
    """

    def __init__(self, record: GraphicalRecord, every: int = 1024):
        if every < 1:
            raise ValueError("checkpoint spacing must be >= 1")
        self.record = record
        self.every = every
        rec = record
        # (time, order key, kind, id): vertices and sinks in replay order
        ev = [(rec.births[v], 0 if rec.is_source[v] else 1, ATOM, v) for v in range(len(rec))]
        ev += [(s, 1, SINK, i) for i, s in enumerate(rec.sink_times)]
        ev.sort()
        self.events = [(t, kind, i) for t, _, kind, i in ev]
        self.times = [t for t, _, _ in self.events]
        self._snapshots: list[dict[int, int]] = []
        alive: dict[int, int] = {}
        for e, ev_item in enumerate(self.events):
            if e % every == 0:
                self._snapshots.append(dict(alive))
            self._apply(alive, ev_item)
        self.final = alive

    def _apply(self, alive: dict[int, int], event) -> None:
        _, kind, i = event
        rec = self.record
        if kind == ATOM:
            p = rec.parent[i]
            alive[i] = rec.lives[i]
        else:
            p = rec.sink_targets[i]
        if p >= 0:
            alive[p] -= 1
            if alive[p] == 0:
                del alive[p]

    def state(self, t: float) -> dict[int, int]:
        """Alive vertex id -> remaining lives, after all events at times <= t."""
        k = bisect_right(self.times, t)
        if not self._snapshots:
            return {}
        base = min(k // self.every, len(self._snapshots) - 1)
        alive = dict(self._snapshots[base])
        for e in range(base * self.every, k):
            self._apply(alive, self.events[e])
        return alive

    def configuration(self, t: float) -> list[tuple[float, int]]:
        """Sorted ``(label, remaining lives)`` of alive particles at time ``t``."""
        labels = self.record.labels
        return sorted((labels[v], r) for v, r in self.state(t).items())

    def count(self, t: float) -> int:
        return len(self.state(t))


@dataclass
class StepFunction:
    """Right-continuous non-decreasing integer step function with unit jumps."""

    jumps: list[float]

    def __call__(self, t: float) -> int:
        return bisect_right(self.jumps, t)

    def values(self, ts) -> np.ndarray:
        return np.searchsorted(np.asarray(self.jumps), np.asarray(ts, dtype=float), side="right")

    def final(self) -> int:
        return len(self.jumps)


def root_counting_process(record: GraphicalRecord) -> StepFunction:
    """t -> R(t), the number of trees started by time t."""
    return StepFunction(record.root_events)


def poissonized_bridge(n: int, dist: OffspringDistribution, rng, return_record: bool = False):
    """R(n) read off the continuous-time record at the n-th atom.

    The first n atoms of a unit-rate PPP on ``[0,1] x [0, inf)`` have uniform
    labels and Gamma arrival times; the record is built up to the n-th.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = as_generator(rng)
    times = np.cumsum(gen.exponential(1.0, n))
    labels = gen.random(n)
    lives = dist.sample(gen, n)
    rec = _run(0.0, 1.0, float(times[-1]), labels, times, lives, SourcesSinks())
    r = root_counting_process(rec)(times[-1])
    return (r, rec) if return_record else r


def count_in(positions: np.ndarray, lo: float, hi: float) -> int:
    """Number of sorted positions inside ``[lo, hi)``."""
    return int(np.searchsorted(positions, hi) - np.searchsorted(positions, lo))


def alive_lives_at(record: GraphicalRecord, t: float) -> list[tuple[float, int]]:
    """``(label, remaining lives)`` of particles alive at ``t`` (after events at ``t``)."""
    return Trajectory(record, every=max(len(record) + len(record.sink_times), 1)).configuration(t)


__all__ = [
    "EventRun",
    "SourcesSinks",
    "StepFunction",
    "Trajectory",
    "alive_lives_at",
    "count_in",
    "poissonized_bridge",
    "root_counting_process",
    "run_arrays",
    "simulate",
    "stationary_boundary",
]
