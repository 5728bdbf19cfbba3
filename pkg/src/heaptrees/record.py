"""Space-time event log of a Hammersley tree construction.

A :class:`GraphicalRecord` stores, per vertex, its position, birth time,
initial and remaining lives, parent and death time, plus the sink events.
Vertical and horizontal segments, root events and forest views are derived
from those columns on demand.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .distributions import Atom

SCHEMA = "gr-1"
INF = math.inf


@dataclass
class GraphicalRecord:
    x_lo: float
    x_hi: float
    t_max: float
    labels: list[float] = field(default_factory=list)
    births: list[float] = field(default_factory=list)
    lives: list[int] = field(default_factory=list)
    remaining: list[int] = field(default_factory=list)
    parent: list[int] = field(default_factory=list)
    deaths: list[float] = field(default_factory=list)
    is_source: list[bool] = field(default_factory=list)
    sink_times: list[float] = field(default_factory=list)
    sink_targets: list[int] = field(default_factory=list)
    sink_colors: list[str] | None = None

    def __post_init__(self):
        self.x_lo, self.x_hi, self.t_max = float(self.x_lo), float(self.x_hi), float(self.t_max)

    @property
    def horizon(self) -> tuple[float, float, float]:
        return (self.x_lo, self.x_hi, self.t_max)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def atoms(self) -> list[Atom]:
        out = [Atom(self.labels[v], self.births[v], self.lives[v])
               for v in range(len(self)) if not self.is_source[v]]
        out.sort(key=lambda a: a.time)
        return out

    @property
    def sources(self) -> list[tuple[float, int]]:
        return [(self.labels[v], self.lives[v]) for v in range(len(self)) if self.is_source[v]]

    def alive_at(self, v: int, t: float) -> bool:
        """Whether vertex ``v`` is alive just before time ``t``."""
        return self.births[v] < t <= self.deaths[v]

    @property
    def vertical_segments(self) -> list[tuple[float, float, float, int, bool]]:
        """``(label, t_birth, t_end, vertex, dead)``; ``t_end`` is the death time or the horizon."""
        return [(self.labels[v], self.births[v], min(self.deaths[v], self.t_max), v,
                 self.deaths[v] <= self.t_max)
                for v in range(len(self))]

    @property
    def horizontal_segments(self) -> list[tuple[float, float, float, int]]:
        """``(time, x_from, x_to, child)``; sink lines run to the right edge with child -1.

        A sink that finds no alive particle crosses the whole box.
        """
        segs = []
        for v in range(len(self)):
            if self.is_source[v]:
                continue
            p = self.parent[v]
            segs.append((self.births[v], self.x_lo if p < 0 else self.labels[p], self.labels[v], v))
        for s, target in zip(self.sink_times, self.sink_targets):
            segs.append((s, self.x_lo if target < 0 else self.labels[target], self.x_hi, -1))
        segs.sort()
        return segs

    @property
    def root_events(self) -> list[float]:
        return sorted(self.births[v] for v in range(len(self))
                      if not self.is_source[v] and self.parent[v] < 0)

    @property
    def left_exits(self) -> list[float]:
        """Heights where a horizontal line reaches the left edge: root events and unmatched sinks."""
        unmatched = [s for s, t in zip(self.sink_times, self.sink_targets) if t < 0]
        return sorted(self.root_events + unmatched)

    @property
    def sink_events(self) -> list[tuple[float, int | None]]:
        return [(s, t if t >= 0 else None) for s, t in zip(self.sink_times, self.sink_targets)]

    def children(self, v: int) -> list[int]:
        kids = [w for w in range(len(self)) if self.parent[w] == v]
        kids.sort(key=lambda w: self.births[w])
        return kids

    def alive_positions(self, t: float) -> np.ndarray:
        """Sorted labels of particles alive at time ``t`` (after events at ``t``)."""
        lab = np.asarray(self.labels, dtype=float)
        b = np.asarray(self.births, dtype=float)
        d = np.asarray(self.deaths, dtype=float)
        mask = (b <= t) & (d > t)
        return np.sort(lab[mask])

    def check(self) -> None:
        """Raise ``ValueError`` if the record breaks a structural invariant."""
        n = len(self)
        for col in (self.births, self.lives, self.remaining, self.parent, self.deaths, self.is_source):
            if len(col) != n:
                raise ValueError("column length mismatch")
        if len(self.sink_times) != len(self.sink_targets):
            raise ValueError("sink column length mismatch")
        used = [0] * n
        for v in range(n):
            p = self.parent[v]
            if p >= 0:
                if not self.labels[p] < self.labels[v]:
                    raise ValueError(f"vertex {v} attached to a larger label")
                if not self.births[p] < self.births[v] <= self.deaths[p]:
                    raise ValueError(f"vertex {v} attached to a particle not alive at its birth")
                used[p] += 1
        for s, tgt in zip(self.sink_times, self.sink_targets):
            if tgt >= 0:
                used[tgt] += 1
        for v in range(n):
            if self.lives[v] < 1 or used[v] + self.remaining[v] != self.lives[v]:
                raise ValueError(f"life bookkeeping broken at vertex {v}")
            if (self.remaining[v] == 0) != (self.deaths[v] < INF):
                raise ValueError(f"death marker inconsistent at vertex {v}")

    def to_dict(self) -> dict:
        order = sorted(range(len(self)), key=lambda v: (self.births[v], self.labels[v]))
        return {
            "schema": SCHEMA,
            "horizon": {"x_lo": self.x_lo, "x_hi": self.x_hi, "t_max": self.t_max},
            "vertices": [
                {
                    "id": v,
                    "label": self.labels[v],
                    "time": self.births[v],
                    "initial_lives": self.lives[v],
                    "remaining_lives": self.remaining[v],
                    "parent": None if self.parent[v] < 0 else self.parent[v],
                    "death": None if self.deaths[v] == INF else self.deaths[v],
                    "source": self.is_source[v],
                }
                for v in order
            ],
            "sinks": [
                {"time": s, "affected": None if t < 0 else t,
                 **({"color": self.sink_colors[i]} if self.sink_colors else {})}
                for i, (s, t) in enumerate(zip(self.sink_times, self.sink_targets))
            ],
            "root_events": self.root_events,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "GraphicalRecord":
        if data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported record schema {data.get('schema')!r}")
        try:
            hz = data["horizon"]
            rec = cls(float(hz["x_lo"]), float(hz["x_hi"]), float(hz["t_max"]))
            verts = sorted(data["vertices"], key=lambda d: int(d["id"]))
            if [int(d["id"]) for d in verts] != list(range(len(verts))):
                raise ValueError("vertex ids must be 0..n-1")
            for d in verts:
                rec.labels.append(float(d["label"]))
                rec.births.append(float(d["time"]))
                rec.lives.append(int(d["initial_lives"]))
                rec.remaining.append(int(d["remaining_lives"]))
                rec.parent.append(-1 if d["parent"] is None else int(d["parent"]))
                rec.deaths.append(INF if d["death"] is None else float(d["death"]))
                rec.is_source.append(bool(d.get("source", False)))
            sinks = data.get("sinks", [])
            for d in sinks:
                rec.sink_times.append(float(d["time"]))
                rec.sink_targets.append(-1 if d["affected"] is None else int(d["affected"]))
            if sinks and all("color" in d for d in sinks):
                rec.sink_colors = [str(d["color"]) for d in sinks]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed record: {exc}") from exc
        rec.check()
        return rec

    @classmethod
    def from_json(cls, text: str) -> "GraphicalRecord":
        return cls.from_dict(json.loads(text))

    def nearest_alive_left(self, x: float, t: float, by_label: list[int], keys: list[float]) -> int:
        """Vertex with the largest label below ``x`` that is alive just before ``t``.

        ``by_label`` lists vertex ids in increasing label order and ``keys``
        holds the matching labels.
        """
        i = bisect_left(keys, x) - 1
        while i >= 0:
            v = by_label[i]
            if self.births[v] < t <= self.deaths[v]:
                return v
            i -= 1
        return -1
