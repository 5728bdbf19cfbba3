import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from heaptrees import _pure, kernels
from heaptrees import heap_sort as hs


def _naive_roots(ranks, lives):
    """Quadratic reference: scan the alive set for the largest smaller rank."""
    alive, roots, dead_all, out_d = {}, 0, set(), []
    seen = []
    for r, v in zip(ranks, lives):
        below = [a for a in alive if a < r]
        if below:
            p = max(below)
            alive[p] -= 1
            if alive[p] == 0:
                del alive[p]
                dead_all.add(p)
        else:
            roots += 1
        alive[r] = v
        seen.append(r)
        lowest = min(alive) if alive else None
        out_d.append(sum(1 for s in seen if s in dead_all and (lowest is None or s < lowest)))
    return roots, out_d


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(lives=st.lists(st.integers(1, 4), min_size=1, max_size=40), rnd=st.randoms(use_true_random=False))
def test_backend_root_counts_match_reference(backend, lives, rnd):
    n = len(lives)
    ranks = list(range(n))
    rnd.shuffle(ranks)
    R, D = kernels.root_counts(ranks, lives, list(range(1, n + 1)), track_dead=True, backend=backend)
    roots, d = _naive_roots(ranks, lives)
    assert int(R[-1]) == roots
    assert [int(x) for x in D] == d


def test_backends_agree_on_events():
    if kernels.BACKEND != "compiled":
        pytest.skip("compiled extension not built")
    from heaptrees import _kernels

    gen = np.random.default_rng(5)
    for _ in range(200):
        n_v = int(gen.integers(1, 60))
        n_s = int(gen.integers(0, 20))
        n_src = int(gen.integers(0, n_v))
        kinds = np.concatenate([np.zeros(n_src, np.int64),
                                gen.permutation(np.r_[np.ones(n_v - n_src), np.full(n_s, 2)]).astype(np.int64)])
        ranks = np.zeros(len(kinds), np.int64)
        ranks[kinds != 2] = gen.permutation(n_v)
        lives = np.where(kinds != 2, gen.integers(1, 4, len(kinds)), 0).astype(np.int64)
        a = _kernels.run_events(kinds, ranks, lives, n_v)
        b = _pure.run_events(kinds, ranks, lives, n_v)
        for x, y in zip(a, b):
            assert np.array_equal(np.asarray(x), np.asarray(y))
        atom_ranks = np.argsort(np.argsort(ranks[kinds == 1])).astype(np.int64)
        cps = np.array([len(atom_ranks)], dtype=np.int64)
        R1 = _kernels.root_counts(atom_ranks, lives[kinds == 1], cps, True)
        R2 = _pure.root_counts(atom_ranks, lives[kinds == 1], cps, True)
        assert [list(map(int, x)) for x in R1] == [list(map(int, x)) for x in R2]


def test_forest_matches_sorter():
    gen = np.random.default_rng(6)
    labels = gen.random(300)
    lives = gen.integers(1, 4, 300)
    state = hs.sort(zip(labels.tolist(), lives.tolist()))
    parent, _, remaining, _ = kernels.forest(hs.label_ranks(labels), lives, backend=_pure)
    assert [v.parent for v in state.vertices] == [None if p < 0 else int(p) for p in parent]
    assert [v.remaining_lives for v in state.vertices] == [int(x) for x in remaining]


def test_environment_selects_pure_backend():
    env = dict(os.environ, HEAPTREES_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from heaptrees import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "pure"


def test_checkpoints_out_of_range():
    with pytest.raises((ValueError, IndexError)):
        kernels.root_counts([0, 1], [1, 1], [3])
