"""The root process: root heights of the representation as the box grows leftward.

Scanning atoms from right to left, an atom ``(-u, s, nu)`` adds a root at
height ``s`` and removes the ``nu`` lowest roots above ``s``. A source
``(-u, nu)`` on the bottom edge removes the ``nu`` lowest roots overall.
Sinks on the right edge form the initial configuration.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

from sortedcontainers import SortedList

from .distributions import Atom


class RootConfiguration:
    """Sorted set of root heights in ``(0, t_max)``."""

    def __init__(self, heights: Iterable[float] = (), t_max: float = math.inf):
        self.t_max = t_max
        self._h = SortedList()
        for s in heights:
            self.insert(s)

    def insert(self, s: float) -> None:
        s = float(s)
        if not 0 < s < self.t_max:
            raise ValueError(f"height {s} outside (0, {self.t_max})")
        i = self._h.bisect_left(s)
        if i < len(self._h) and self._h[i] == s:
            raise ValueError(f"height {s} already present (exact ties are rejected)")
        self._h.add(s)

    def remove_above(self, s: float, k: int) -> list[float]:
        """Remove and return the ``k`` lowest heights strictly above ``s``."""
        i = self._h.bisect_right(s)
        gone = list(self._h.islice(i, i + k))
        del self._h[i:i + len(gone)]
        return gone

    def remove_lowest(self, k: int) -> list[float]:
        gone = list(self._h.islice(0, k))
        del self._h[:len(gone)]
        return gone

    @property
    def heights(self) -> list[float]:
        return list(self._h)

    def count(self, lo: float = -math.inf, hi: float = math.inf) -> int:
        """Number of heights in ``[lo, hi]``."""
        return self._h.bisect_right(hi) - self._h.bisect_left(lo)

    def copy(self) -> "RootConfiguration":
        out = RootConfiguration(t_max=self.t_max)
        out._h = SortedList(self._h)
        return out

    def __len__(self) -> int:
        return len(self._h)

    def __iter__(self):
        return iter(self._h)

    def __eq__(self, other) -> bool:
        return isinstance(other, RootConfiguration) and list(self._h) == list(other._h)

    def __le__(self, other: "RootConfiguration") -> bool:
        return set(self._h) <= set(other._h)

    def __repr__(self) -> str:
        return f"RootConfiguration({list(self._h)!r})"


def evolve(sinks_init: Iterable[float] | RootConfiguration, sources: Sequence[tuple[float, int]],
           atoms: Sequence[Atom], x_max: float, t_max: float,
           checkpoints: Sequence[float] = ()) -> tuple[RootConfiguration, dict[float, RootConfiguration]]:
    """Run the root process from ``x = 0`` to ``x = x_max``.

    Atoms and sources carry negative positions; the event at position ``-u``
    happens at time ``x = u``. Events with ``u > x_max`` are ignored. Atom
    heights must lie in ``(0, t_max)``.

    Returns the configuration at ``x_max`` and snapshots at ``checkpoints``.
    """
    if isinstance(sinks_init, RootConfiguration):
        config = sinks_init.copy()
        config.t_max = t_max
    else:
        config = RootConfiguration(sinks_init, t_max)
    events = []
    for a in atoms:
        if a.label > 0:
            raise ValueError(f"atom position {a.label} must be <= 0")
        if not 0 < a.time < t_max:
            raise ValueError(f"atom height {a.time} outside (0, {t_max})")
        if a.lives < 1:
            raise ValueError("lives must be >= 1")
        events.append((-a.label, 1, a.time, a.lives))
    for pos, nu in sources:
        if pos > 0:
            raise ValueError(f"source position {pos} must be <= 0")
        if nu < 1:
            raise ValueError("lives must be >= 1")
        events.append((-pos, 0, 0.0, nu))
    events.sort()
    xs = [e[0] for e in events]
    if len(set(xs)) != len(xs):
        raise ValueError("event positions must be distinct")
    cps = sorted(set(float(c) for c in checkpoints))
    snaps: dict[float, RootConfiguration] = {}
    ci = 0
    for x, kind, s, nu in events:
        if x > x_max:
            break
        while ci < len(cps) and cps[ci] < x:
            snaps[cps[ci]] = config.copy()
            ci += 1
        if kind == 1:
            config.insert(s)
            config.remove_above(s, nu)
        else:
            config.remove_lowest(nu)
    while ci < len(cps):
        snaps[cps[ci]] = config.copy()
        ci += 1
    return config, snaps


def roots_of_box(atoms: Sequence[Atom], x_lo: float, x_hi: float, t_max: float,
                 sources: Sequence[tuple[float, int]] = (), sinks: Iterable[float] = ()) -> RootConfiguration:
    """Root heights of the representation on ``[x_lo, x_hi] x [0, t_max]``.

    Shifts the box so its right edge sits at 0 and runs :func:`evolve`;
    atoms at height ``t_max`` are kept by widening the open upper bound.
    """
    shifted = [Atom(a.label - x_hi, a.time, a.lives) for a in atoms if x_lo <= a.label <= x_hi]
    src = [(u - x_hi, nu) for u, nu in sources if x_lo <= u <= x_hi]
    top = math.nextafter(t_max, math.inf)
    config, _ = evolve([s for s in sinks if s <= t_max], src, shifted, x_hi - x_lo, top)
    return config


def duality_check(atoms: Sequence[Atom], x_lo: float = 0.0, x_hi: float = 1.0,
                  t_max: float | None = None) -> tuple[int, int]:
    """``(|R(x_hi - x_lo, t)|, heap-sort root count)`` on the same atoms."""
    from .heap_sort import sort

    if t_max is None:
        t_max = max((a.time for a in atoms), default=1.0)
    roots = roots_of_box(atoms, x_lo, x_hi, t_max)
    ordered = sorted(atoms, key=lambda a: a.time)
    return len(roots), sort([(a.label, a.lives) for a in ordered]).root_count


@dataclass(frozen=True)
class MonotoneBoundary:
    """Right-continuous non-decreasing step function with a jump to +inf at ``a_f``.

    ``f(x) = 0`` for ``x < breaks[0]``, ``f(x) = values[i]`` on
    ``[breaks[i], breaks[i+1])`` and ``f(x) = inf`` for ``x >= a_f``.
    """

    breaks: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    a_f: float = math.inf

    def __post_init__(self):
        if len(self.breaks) != len(self.values):
            raise ValueError("one value per break")
        if any(b2 <= b1 for b1, b2 in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breaks must increase")
        if any(v < 0 for v in self.values) or any(v2 < v1 for v1, v2 in zip(self.values, self.values[1:])):
            raise ValueError("values must be non-negative and non-decreasing")
        if self.breaks and self.a_f <= self.breaks[-1]:
            raise ValueError("a_f must lie beyond the last break")

    @classmethod
    def zero(cls) -> "MonotoneBoundary":
        return cls()

    @classmethod
    def majorant(cls, points: Sequence[tuple[float, float]], a_f: float = math.inf) -> "MonotoneBoundary":
        """Lowest right-continuous non-decreasing step function lying on or above ``points``."""
        breaks, values = [], []
        level = 0.0
        for x, t in sorted(points):
            if t > level:
                level = t
                if breaks and breaks[-1] == x:
                    values[-1] = level
                else:
                    breaks.append(x)
                    values.append(level)
        return cls(tuple(breaks), tuple(values), a_f)

    def __call__(self, x: float) -> float:
        if x >= self.a_f:
            return math.inf
        i = bisect_right(self.breaks, x)
        return 0.0 if i == 0 else self.values[i - 1]


def falling_map(atoms: Sequence[Atom], f: MonotoneBoundary) -> list[Atom]:
    """Drop each atom by ``f(label)``; every atom must lie strictly above ``f``."""
    out = []
    for a in atoms:
        h = f(a.label)
        if not a.time > h:
            raise ValueError(f"atom {a} is not above the boundary (f = {h})")
        out.append(Atom(a.label, a.time - h, a.lives))
    return out


def root_count(atoms: Sequence[Atom]) -> int:
    """Number of trees of the representation built from ``atoms``."""
    from .heap_sort import root_count as rc

    ordered = sorted(atoms, key=lambda a: a.time)
    return rc([a.label for a in ordered], [a.lives for a in ordered])


def falling_counts(xi: Sequence[Atom], f: MonotoneBoundary, t: float) -> tuple[int, int, int]:
    """``(R(xi in B_t), R(F(xi in B_t)), R(F(xi) in B_t))`` with ``B_t = [0,1] x [0,t]``."""
    in_box = [a for a in xi if 0 <= a.label <= 1 and a.time <= t]
    fallen = falling_map(xi, f)
    return (root_count(in_box),
            root_count(falling_map(in_box, f)),
            root_count([a for a in fallen if 0 <= a.label <= 1 and a.time <= t]))
