# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for heap patience sorting.

Every kernel works on label *ranks* in ``[0, n)`` so that the alive set can be
held in a hierarchical 64-ary bitset. Predecessor and successor queries cost
``O(log_64 n)`` word operations.

The pure-Python twin lives in :mod:`heaptrees._pure` and must return
identical arrays.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport calloc, free

cnp.import_array()

cdef extern from *:
    """
    static inline int ht_clz(unsigned long long x) { return __builtin_clzll(x); }
    static inline int ht_ctz(unsigned long long x) { return __builtin_ctzll(x); }
    static inline int ht_popcount(unsigned long long x) { return __builtin_popcountll(x); }
    """
    int ht_clz(unsigned long long x) nogil
    int ht_ctz(unsigned long long x) nogil
    int ht_popcount(unsigned long long x) nogil


cdef struct BitTree:
    uint64_t* words
    int64_t offsets[12]
    int64_t sizes[12]
    int nlev
    int64_t universe


cdef int bt_init(BitTree* bt, int64_t universe) noexcept nogil:
    cdef int64_t size = universe if universe > 0 else 1
    cdef int64_t total = 0
    cdef int lev = 0
    while True:
        size = (size + 63) >> 6
        bt.offsets[lev] = total
        bt.sizes[lev] = size
        total += size
        lev += 1
        if size <= 1:
            break
    bt.nlev = lev
    bt.universe = universe
    bt.words = <uint64_t*> calloc(total, sizeof(uint64_t))
    return 0 if bt.words != NULL else -1


cdef inline void bt_insert(BitTree* bt, int64_t i) noexcept nogil:
    cdef int lev
    cdef uint64_t* w
    cdef uint64_t before
    for lev in range(bt.nlev):
        w = bt.words + bt.offsets[lev] + (i >> 6)
        before = w[0]
        w[0] = before | ((<uint64_t> 1) << (i & 63))
        if before != 0:
            return
        i >>= 6


cdef inline void bt_remove(BitTree* bt, int64_t i) noexcept nogil:
    cdef int lev
    cdef uint64_t* w
    for lev in range(bt.nlev):
        w = bt.words + bt.offsets[lev] + (i >> 6)
        w[0] &= ~((<uint64_t> 1) << (i & 63))
        if w[0] != 0:
            return
        i >>= 6


cdef inline int64_t bt_pred(BitTree* bt, int64_t r) noexcept nogil:
    """Largest member strictly below ``r``, or -1."""
    cdef int lev = 0
    cdef int64_t idx, wi
    cdef int b
    cdef uint64_t word, mask
    if r <= 0:
        return -1
    idx = r - 1
    while lev < bt.nlev:
        wi = idx >> 6
        b = idx & 63
        if b == 63:
            mask = ~(<uint64_t> 0)
        else:
            mask = ((<uint64_t> 1) << (b + 1)) - 1
        word = bt.words[bt.offsets[lev] + wi] & mask
        if word != 0:
            idx = (wi << 6) | (63 - ht_clz(word))
            while lev > 0:
                lev -= 1
                idx = (idx << 6) | (63 - ht_clz(bt.words[bt.offsets[lev] + idx]))
            return idx
        if wi == 0:
            return -1
        idx = wi - 1
        lev += 1
    return -1


cdef inline int64_t bt_succ(BitTree* bt, int64_t r) noexcept nogil:
    """Smallest member at or above ``r``, or -1."""
    cdef int lev = 0
    cdef int64_t idx, wi
    cdef int b
    cdef uint64_t word
    if r < 0:
        r = 0
    idx = r
    while lev < bt.nlev:
        wi = idx >> 6
        if wi >= bt.sizes[lev]:
            return -1
        b = idx & 63
        word = bt.words[bt.offsets[lev] + wi] & (~(<uint64_t> 0) << b)
        if word != 0:
            idx = (wi << 6) | ht_ctz(word)
            while lev > 0:
                lev -= 1
                idx = (idx << 6) | ht_ctz(bt.words[bt.offsets[lev] + idx])
            return idx
        idx = wi + 1
        lev += 1
    return -1


cdef int64_t count_below(uint64_t* seen, int64_t r) noexcept nogil:
    cdef int64_t wi, total = 0
    for wi in range(r >> 6):
        total += ht_popcount(seen[wi])
    if r & 63:
        total += ht_popcount(seen[r >> 6] & (((<uint64_t> 1) << (r & 63)) - 1))
    return total


def root_counts(const int64_t[::1] ranks, const int64_t[::1] lives,
                const int64_t[::1] checkpoints, bint track_dead=False):
    """Root count R(k) and leading-dead count D_k after the first k insertions.

    ``checkpoints`` must be non-decreasing and at most ``len(ranks)``.
    Returns two int64 arrays aligned with ``checkpoints``; the second is all
    zeros unless ``track_dead``.
    """
    cdef int64_t n = ranks.shape[0]
    cdef int64_t k = checkpoints.shape[0]
    out_r = np.zeros(k, dtype=np.int64)
    out_d = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] vr = out_r
    cdef int64_t[::1] vd = out_d
    cdef int64_t* rem = <int64_t*> calloc(n if n > 0 else 1, sizeof(int64_t))
    cdef uint64_t* seen = NULL
    cdef BitTree bt
    cdef int64_t i, c = 0, p, r, roots = 0, m
    if rem == NULL or bt_init(&bt, n) != 0:
        free(rem)
        raise MemoryError()
    if track_dead:
        seen = <uint64_t*> calloc((n + 63) // 64 + 1, sizeof(uint64_t))
        if seen == NULL:
            free(rem)
            free(bt.words)
            raise MemoryError()
    with nogil:
        while c < k and checkpoints[c] <= 0:
            c += 1
        for i in range(n):
            r = ranks[i]
            p = bt_pred(&bt, r)
            if p < 0:
                roots += 1
            else:
                rem[p] -= 1
                if rem[p] == 0:
                    bt_remove(&bt, p)
            rem[r] = lives[i]
            bt_insert(&bt, r)
            if track_dead:
                seen[r >> 6] |= (<uint64_t> 1) << (r & 63)
            while c < k and checkpoints[c] == i + 1:
                vr[c] = roots
                if track_dead:
                    m = bt_succ(&bt, 0)
                    if m < 0:
                        vd[c] = i + 1
                    else:
                        vd[c] = count_below(seen, m)
                c += 1
    free(rem)
    free(seen)
    free(bt.words)
    return out_r, out_d


def run_events(const int64_t[::1] kinds, const int64_t[::1] ranks,
               const int64_t[::1] lives, int64_t universe):
    """Replay a merged event stream of sources, atoms and sinks.

    ``kinds[e]`` is 0 for a source (placed without attachment), 1 for an atom
    (attaches to the alive particle with the largest smaller rank) and 2 for
    a sink (removes one life from the alive particle with the largest rank).
    Vertex ids are event indices.

    Returns ``(target, death, remaining, tree)``: ``target[e]`` is the parent
    of an atom or the particle hit by a sink (-1 for none); ``death[v]`` is
    the event index at which vertex ``v`` lost its last life (-1 if alive at
    the end); ``remaining[v]`` is the final life count; ``tree[v]`` is the
    root vertex of ``v``'s tree.
    """
    cdef int64_t n = kinds.shape[0]
    target = np.full(n, -1, dtype=np.int64)
    death = np.full(n, -1, dtype=np.int64)
    remaining = np.zeros(n, dtype=np.int64)
    tree = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] vt = target
    cdef int64_t[::1] vdeath = death
    cdef int64_t[::1] vrem = remaining
    cdef int64_t[::1] vtree = tree
    cdef int64_t* owner = <int64_t*> calloc(universe if universe > 0 else 1, sizeof(int64_t))
    cdef BitTree bt
    cdef int64_t e, p, v, r
    if owner == NULL or bt_init(&bt, universe) != 0:
        free(owner)
        raise MemoryError()
    with nogil:
        for e in range(n):
            if kinds[e] == 2:
                p = bt_pred(&bt, universe)
                if p >= 0:
                    v = owner[p]
                    vt[e] = v
                    vrem[v] -= 1
                    if vrem[v] == 0:
                        vdeath[v] = e
                        bt_remove(&bt, p)
                continue
            r = ranks[e]
            vtree[e] = e
            if kinds[e] == 1:
                p = bt_pred(&bt, r)
                if p >= 0:
                    v = owner[p]
                    vt[e] = v
                    vtree[e] = vtree[v]
                    vrem[v] -= 1
                    if vrem[v] == 0:
                        vdeath[v] = e
                        bt_remove(&bt, p)
            vrem[e] = lives[e]
            owner[r] = e
            bt_insert(&bt, r)
    free(owner)
    free(bt.words)
    return target, death, remaining, tree
