"""Pure-Python twin of :mod:`heaptrees._kernels`.

Same algorithms, same outputs; roughly two orders of magnitude slower.
Selected automatically when the compiled module is missing, or on demand
with ``HEAPTREES_PURE=1``.
"""

from __future__ import annotations

import numpy as np


class BitTree:
    """Hierarchical 64-ary bitset over ``[0, universe)``."""

    def __init__(self, universe: int):
        self.universe = universe
        self.levels: list[list[int]] = []
        size = max(universe, 1)
        while True:
            size = (size + 63) >> 6
            self.levels.append([0] * size)
            if size <= 1:
                break

    def insert(self, i: int) -> None:
        for words in self.levels:
            before = words[i >> 6]
            words[i >> 6] = before | (1 << (i & 63))
            if before:
                return
            i >>= 6

    def remove(self, i: int) -> None:
        for words in self.levels:
            words[i >> 6] &= ~(1 << (i & 63))
            if words[i >> 6]:
                return
            i >>= 6

    def pred(self, r: int) -> int:
        """Largest member strictly below ``r``, or -1."""
        if r <= 0:
            return -1
        idx = r - 1
        levels = self.levels
        for lev, words in enumerate(levels):
            wi = idx >> 6
            word = words[wi] & ((2 << (idx & 63)) - 1)
            if word:
                idx = (wi << 6) | (word.bit_length() - 1)
                for lower in reversed(levels[:lev]):
                    idx = (idx << 6) | (lower[idx].bit_length() - 1)
                return idx
            if wi == 0:
                return -1
            idx = wi - 1
        return -1

    def succ(self, r: int) -> int:
        """Smallest member at or above ``r``, or -1."""
        idx = max(r, 0)
        levels = self.levels
        for lev, words in enumerate(levels):
            wi = idx >> 6
            if wi >= len(words):
                return -1
            word = (words[wi] >> (idx & 63)) << (idx & 63)
            if word:
                idx = (wi << 6) | ((word & -word).bit_length() - 1)
                for lower in reversed(levels[:lev]):
                    w = lower[idx]
                    idx = (idx << 6) | ((w & -w).bit_length() - 1)
                return idx
            idx = wi + 1
        return -1


def root_counts(ranks, lives, checkpoints, track_dead=False):
    ranks = [int(x) for x in ranks]
    lives = [int(x) for x in lives]
    checkpoints = [int(x) for x in checkpoints]
    n = len(ranks)
    k = len(checkpoints)
    out_r = np.zeros(k, dtype=np.int64)
    out_d = np.zeros(k, dtype=np.int64)
    rem = [0] * n
    bt = BitTree(n)
    seen = 0
    roots = 0
    c = 0
    while c < k and checkpoints[c] <= 0:
        c += 1
    for i in range(n):
        r = ranks[i]
        p = bt.pred(r)
        if p < 0:
            roots += 1
        else:
            rem[p] -= 1
            if rem[p] == 0:
                bt.remove(p)
        rem[r] = lives[i]
        bt.insert(r)
        if track_dead:
            seen |= 1 << r
        while c < k and checkpoints[c] == i + 1:
            out_r[c] = roots
            if track_dead:
                m = bt.succ(0)
                out_d[c] = i + 1 if m < 0 else bin(seen & ((1 << m) - 1)).count("1")
            c += 1
    return out_r, out_d


def run_events(kinds, ranks, lives, universe):
    kinds = [int(x) for x in kinds]
    ranks = [int(x) for x in ranks]
    lives = [int(x) for x in lives]
    n = len(kinds)
    target = [-1] * n
    death = [-1] * n
    remaining = [0] * n
    tree = [-1] * n
    owner = [0] * max(universe, 1)
    bt = BitTree(universe)
    for e in range(n):
        if kinds[e] == 2:
            p = bt.pred(universe)
            if p >= 0:
                v = owner[p]
                target[e] = v
                remaining[v] -= 1
                if remaining[v] == 0:
                    death[v] = e
                    bt.remove(p)
            continue
        r = ranks[e]
        tree[e] = e
        if kinds[e] == 1:
            p = bt.pred(r)
            if p >= 0:
                v = owner[p]
                target[e] = v
                tree[e] = tree[v]
                remaining[v] -= 1
                if remaining[v] == 0:
                    death[v] = e
                    bt.remove(p)
        remaining[e] = lives[e]
        owner[r] = e
        bt.insert(r)
    as_array = lambda xs: np.asarray(xs, dtype=np.int64)  # noqa: E731
    return as_array(target), as_array(death), as_array(remaining), as_array(tree)
