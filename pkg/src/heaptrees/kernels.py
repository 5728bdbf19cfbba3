"""Backend selection for the hot loops.

The compiled extension is preferred; the pure-Python twin is used when the
extension is not built or when ``HEAPTREES_PURE=1`` is set in the environment.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pure

if os.environ.get("HEAPTREES_PURE", "") not in ("", "0"):
    _backend = _pure
    BACKEND = "pure"
else:
    try:
        from . import _kernels as _backend

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build
        _backend = _pure
        BACKEND = "pure"


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def root_counts(ranks, lives, checkpoints, track_dead: bool = False, backend=None):
    """Root counts (and leading-dead counts) after prefixes of a ranked stream.

    ``ranks`` is a permutation of ``range(n)`` giving the label order of the
    items in arrival order.
    """
    mod = backend or _backend
    ranks, lives, checkpoints = _i64(ranks), _i64(lives), _i64(checkpoints)
    n = len(ranks)
    if len(lives) != n:
        raise ValueError("ranks and lives differ in length")
    if len(checkpoints) and (checkpoints[0] < 0 or checkpoints[-1] > n or np.any(np.diff(checkpoints) < 0)):
        raise ValueError(f"checkpoints must be non-decreasing within [0, {n}]")
    return mod.root_counts(ranks, lives, checkpoints, bool(track_dead))


def run_events(kinds, ranks, lives, universe: int, backend=None):
    """Replay sources (kind 0), atoms (kind 1) and sinks (kind 2) in order."""
    mod = backend or _backend
    return mod.run_events(_i64(kinds), _i64(ranks), _i64(lives), int(universe))


def forest(ranks, lives, backend=None):
    """Parent array, death index, remaining lives and tree ids for plain sorting."""
    n = len(ranks)
    return run_events(np.ones(n, dtype=np.int64), ranks, lives, n, backend=backend)
