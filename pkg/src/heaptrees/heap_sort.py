"""Heap patience sorting.

Items ``(label, lives)`` arrive one at a time. Each new item becomes a child
of the alive vertex with the largest smaller label, which loses one life;
when no such vertex exists the item starts a new tree. The number of trees
built this way is minimal.

Two engines are provided: :class:`SortState`, an online structure keyed by
real labels, and the rank-based kernels in :mod:`heaptrees.kernels` that
:func:`sort` and :func:`root_count` use for whole sequences.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left, insort
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

import numpy as np
from sortedcontainers import SortedDict, SortedList

from . import kernels
from .distributions import Atom
from .record import INF, GraphicalRecord


class DuplicateLabelError(ValueError):
    """Two items share a label; ties are rejected rather than perturbed."""


@dataclass
class VertexRecord:
    label: float
    initial_lives: int
    remaining_lives: int
    parent: int | None
    children: list[int] = field(default_factory=list)
    arrival_index: int = 0


class SortState:
    """Online heap patience sorter.

    ``track_dead`` keeps an ordered index of every label so that
    :meth:`leading_dead` answers in ``O(log n)``.
    """

    def __init__(self, track_dead: bool = False):
        self.vertices: list[VertexRecord] = []
        self.alive_index: SortedDict = SortedDict()
        self.root_count = 0
        self.track_dead = track_dead
        self._all_labels: SortedList | None = SortedList() if track_dead else None
        self._labels_seen: set[float] = set()

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def dead_below_min_alive(self) -> int:
        return leading_dead(self)

    def insert_next(self, label: float, lives: int) -> bool:
        """Insert one item; return True when it starts a new tree."""
        label = float(label)
        lives = int(lives)
        if lives < 1:
            raise ValueError(f"lives must be >= 1, got {lives}")
        if label in self._labels_seen or math.isnan(label):
            raise DuplicateLabelError(f"label {label!r} already inserted")
        self._labels_seen.add(label)
        vid = len(self.vertices)
        idx = self.alive_index.bisect_left(label)
        parent = None
        if idx > 0:
            plabel, parent = self.alive_index.peekitem(idx - 1)
            pv = self.vertices[parent]
            pv.remaining_lives -= 1
            pv.children.append(vid)
            if pv.remaining_lives == 0:
                del self.alive_index[plabel]
        else:
            self.root_count += 1
        self.vertices.append(VertexRecord(label, lives, lives, parent, [], vid + 1))
        self.alive_index[label] = vid
        if self._all_labels is not None:
            self._all_labels.add(label)
        return parent is None

    def life_word(self) -> list[int]:
        """Remaining lives ordered by increasing label."""
        return [v.remaining_lives for v in sorted(self.vertices, key=lambda v: v.label)]

    def edges(self) -> int:
        return sum(len(v.children) for v in self.vertices)

    def check(self) -> None:
        """Raise ``AssertionError`` if an invariant is broken."""
        assert self.root_count == sum(v.parent is None for v in self.vertices)
        assert self.root_count == self.n - self.edges()
        for vid, v in enumerate(self.vertices):
            assert len(v.children) == v.initial_lives - v.remaining_lives
            assert v.remaining_lives >= 0
            if v.parent is not None:
                assert self.vertices[v.parent].label < v.label
            assert (v.label in self.alive_index) == (v.remaining_lives > 0)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "root_count": self.root_count,
            "vertices": [
                {
                    "id": i,
                    "label": v.label,
                    "initial_lives": v.initial_lives,
                    "remaining_lives": v.remaining_lives,
                    "parent": v.parent,
                    "arrival_index": v.arrival_index,
                }
                for i, v in enumerate(self.vertices)
            ],
        }

    def to_json(self, indent: int | None = 1) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict, track_dead: bool = False) -> "SortState":
        """Rebuild a state by replaying the serialized vertices in arrival order."""
        verts = sorted(data["vertices"], key=lambda d: d["arrival_index"])
        state = cls(track_dead=track_dead)
        for d in verts:
            state.insert_next(d["label"], d["initial_lives"])
        if state.to_dict()["vertices"] != sorted(data["vertices"], key=lambda d: d["id"]):
            raise ValueError("serialized forest is not the output of heap patience sorting")
        return state

    def shapes(self) -> list[list]:
        """Each tree as nested ``[label, [children...]]`` lists, roots in arrival order."""
        def build(vid):
            v = self.vertices[vid]
            return [v.label, [build(c) for c in v.children]]
        return [build(i) for i, v in enumerate(self.vertices) if v.parent is None]


def _check_items(items) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray([float(u) for u, _ in items], dtype=float)
    lives = np.asarray([int(v) for _, v in items], dtype=np.int64)
    if len(lives) and lives.min() < 1:
        raise ValueError("lives must be >= 1")
    if len(np.unique(labels)) != len(labels):
        raise DuplicateLabelError("duplicate labels")
    return labels, lives


def label_ranks(labels) -> np.ndarray:
    """Rank of each label among all labels (0 = smallest)."""
    labels = np.asarray(labels, dtype=float)
    ranks = np.empty(len(labels), dtype=np.int64)
    ranks[np.argsort(labels, kind="stable")] = np.arange(len(labels), dtype=np.int64)
    return ranks


def sort(items: Iterable[tuple[float, int]], track_dead: bool = False) -> SortState:
    """Sort a whole sequence; same result as folding :meth:`SortState.insert_next`."""
    items = list(items)
    labels, lives = _check_items(items)
    state = SortState(track_dead=track_dead)
    n = len(items)
    if n == 0:
        return state
    parent, _, remaining, _ = kernels.forest(label_ranks(labels), lives)
    verts = state.vertices
    for i in range(n):
        p = int(parent[i])
        verts.append(VertexRecord(float(labels[i]), int(lives[i]), int(remaining[i]),
                                  None if p < 0 else p, [], i + 1))
        if p >= 0:
            verts[p].children.append(i)
        else:
            state.root_count += 1
    for i in np.flatnonzero(remaining > 0):
        state.alive_index[float(labels[i])] = int(i)
    state._labels_seen.update(labels.tolist())
    if state._all_labels is not None:
        state._all_labels.update(labels.tolist())
    return state


def root_count(labels, lives) -> int:
    """Number of trees for a whole sequence, via the compiled kernel."""
    labels = np.asarray(labels, dtype=float)
    if len(labels) == 0:
        return 0
    r, _ = kernels.root_counts(label_ranks(labels), lives, [len(labels)])
    return int(r[0])


def leading_dead(state: SortState) -> int:
    """D_n: dead vertices whose label lies below every alive label (n if none alive)."""
    if not state.alive_index:
        return state.n
    lowest = state.alive_index.peekitem(0)[0]
    if state._all_labels is not None:
        return state._all_labels.bisect_left(lowest)
    return sum(1 for v in state.vertices if v.label < lowest)


def leading_dead_of_word(word: Sequence[int]) -> int:
    """Number of zeros at the start of a life word."""
    for i, x in enumerate(word):
        if x != 0:
            return i
    return len(word)


def record_from_atoms(atoms: Sequence[Atom], x_lo: float = 0.0, x_hi: float = 1.0,
                      t_max: float | None = None) -> GraphicalRecord:
    """Graphical record of heap patience sorting atoms in order of arrival time."""
    atoms = sorted(atoms, key=lambda a: a.time)
    if t_max is None:
        t_max = atoms[-1].time if atoms else 1.0
    rec = GraphicalRecord(x_lo, x_hi, t_max)
    if not atoms:
        return rec
    labels, lives = _check_items([(a.label, a.lives) for a in atoms])
    parent, death, remaining, _ = kernels.forest(label_ranks(labels), lives)
    times = [float(a.time) for a in atoms]
    rec.labels = labels.tolist()
    rec.births = times
    rec.lives = lives.tolist()
    rec.remaining = remaining.tolist()
    rec.parent = parent.tolist()
    rec.deaths = [INF if d < 0 else times[d] for d in death.tolist()]
    rec.is_source = [False] * len(atoms)
    return rec


def state_from_record(record: GraphicalRecord, track_dead: bool = False) -> SortState:
    """SortState of a record without sources or sinks (vertices in arrival order)."""
    if any(record.is_source) or record.sink_times:
        raise ValueError("record has sources or sinks")
    order = sorted(range(len(record)), key=lambda v: record.births[v])
    pos = {v: i for i, v in enumerate(order)}
    state = SortState(track_dead=track_dead)
    for i, v in enumerate(order):
        p = record.parent[v]
        state.vertices.append(VertexRecord(record.labels[v], record.lives[v], record.remaining[v],
                                           None if p < 0 else pos[p], [], i + 1))
        if p < 0:
            state.root_count += 1
        if record.remaining[v] > 0:
            state.alive_index[record.labels[v]] = i
    for i, v in enumerate(order):
        p = record.parent[v]
        if p >= 0:
            state.vertices[pos[p]].children.append(i)
    state._labels_seen.update(record.labels)
    if state._all_labels is not None:
        state._all_labels.update(record.labels)
    return state


def insert_rightmost(state: SortState | None, record: GraphicalRecord, atom: Atom):
    """Insert an atom whose label exceeds every existing label, in place.

    A second-class particle starts at the new atom, moves left to the first
    solid vertical line, climbs it while it stays solid, and moves left
    again from the point where the line dies; each turn re-parents the one
    child that no longer fits. The record is updated along that path only.

    Returns ``(state, created_root, path)``. ``state`` is rebuilt from the
    updated record (``None`` may be passed in); ``path`` lists the corners
    of the second-class particle's trajectory.
    """
    if record.sink_times:
        raise ValueError("rightmost insertion is defined for records without sinks")
    u, s, nu = float(atom.label), float(atom.time), int(atom.lives)
    if record.labels and u <= max(record.labels):
        raise ValueError(f"label {u} is not larger than every existing label")
    if not 0 < s <= record.t_max:
        raise ValueError(f"atom time {s} outside the record horizon")
    if nu < 1:
        raise ValueError("lives must be >= 1")
    by_label = sorted(range(len(record)), key=lambda v: record.labels[v])
    keys = [record.labels[v] for v in by_label]

    new = len(record)
    record.labels.append(u)
    record.births.append(s)
    record.lives.append(nu)
    record.remaining.append(nu)
    record.parent.append(-1)
    record.deaths.append(INF)
    record.is_source.append(False)
    record.x_hi = max(record.x_hi, u)

    children: dict[int, list[int]] = {}

    def kids(v):
        if v not in children:
            children[v] = record.children(v)
        return children[v]

    path = [(u, s)]
    child, x, tau = new, u, s
    created_root = False
    while True:
        p = record.nearest_alive_left(x, tau, by_label, keys)
        if p < 0:
            record.parent[child] = -1
            path.append((record.x_lo, tau))
            created_root = True
            break
        path.append((record.labels[p], tau))
        record.parent[child] = p
        plist = kids(p)
        insort(plist, child, key=lambda w: record.births[w])
        if record.deaths[p] == INF:
            record.remaining[p] -= 1
            if record.remaining[p] == 0:
                record.deaths[p] = record.births[plist[-1]]
            path.append((record.labels[p], record.t_max))
            break
        evicted = plist.pop()
        d = record.births[evicted]
        record.deaths[p] = record.births[plist[-1]]
        path.append((record.labels[p], d))
        child, x, tau = evicted, record.labels[p], d
    return state_from_record(record, track_dead=bool(state and state.track_dead)), created_root, path


def life_sweep(labels: Sequence[float], base_lives: Sequence[int], i0: int, m_max: int) -> list[int]:
    """Root counts R_1..R_{m_max} when item ``i0`` (1-based) gets m lives."""
    labels = np.asarray(labels, dtype=float)
    n = len(labels)
    if not 1 <= i0 <= n:
        raise ValueError(f"i0 must lie in [1, {n}]")
    ranks = label_ranks(labels)
    lives = np.array(base_lives, dtype=np.int64)
    out = []
    for m in range(1, m_max + 1):
        lives[i0 - 1] = m
        out.append(int(kernels.root_counts(ranks, lives, [n])[0][0]))
    return out


def min_heaps_bruteforce(items: Sequence[tuple[float, int]], max_n: int = 9) -> int:
    """Fewest trees over every valid parent assignment, by exhaustive search.

    A parent must arrive earlier, carry a smaller label and have a free life.
    """
    items = list(items)
    n = len(items)
    if n > max_n:
        raise ValueError(f"exhaustive search limited to n <= {max_n}, got {n}")
    labels, lives = _check_items(items)
    cap = lives.tolist()
    lab = labels.tolist()
    best = n

    def go(j, roots):
        nonlocal best
        if roots >= best:
            return
        if j == n:
            best = roots
            return
        for i in range(j):
            if lab[i] < lab[j] and cap[i] > 0:
                cap[i] -= 1
                go(j + 1, roots)
                cap[i] += 1
        go(j + 1, roots + 1)

    go(0, 0)
    return best


def longest_decreasing_subsequence(labels: Sequence[float]) -> int:
    """Length of the longest strictly decreasing subsequence (patience method)."""
    tails: list[float] = []
    for x in labels:
        key = -float(x)
        i = bisect_left(tails, key)
        if i == len(tails):
            tails.append(key)
        else:
            tails[i] = key
    return len(tails)


def expected_root_count(labels: Sequence[float], pmf: dict[int, float]) -> float:
    """Exact E[R] over i.i.d. lives drawn from a finite table, labels fixed."""
    labels = np.asarray(labels, dtype=float)
    n = len(labels)
    if n == 0:
        return 0.0
    ranks = label_ranks(labels)
    values = sorted(pmf)
    total = 0.0
    for combo in product(values, repeat=n):
        w = math.prod(pmf[v] for v in combo)
        if w:
            total += w * int(kernels.root_counts(ranks, combo, [n])[0][0])
    return total


def expected_leading_dead(n: int, pmf: dict[int, float]) -> float:
    """Exact E[D_n] for uniform labels and i.i.d. lives from a finite table.

    Enumerates all n! label orders and all life vectors, so keep n small.
    """
    from itertools import permutations

    if n < 1:
        raise ValueError("n must be >= 1")
    values = sorted(pmf)
    total = 0.0
    perms = list(permutations(range(n)))
    for combo in product(values, repeat=n):
        w = math.prod(pmf[v] for v in combo)
        if not w:
            continue
        for perm in perms:
            _, d = kernels.root_counts(perm, combo, [n], track_dead=True)
            total += w * int(d[0])
    return total / len(perms)
