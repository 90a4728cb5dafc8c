"""Numba site tables and the Wilson-rooted-at-infinity walk kernel.

A site table is a ``(cap, W + 2)`` uint64 array whose rows hold
``[generation, key words..., value]``.  Lattice coordinates relative to a ball
centre are packed 16 bits each, four per key word, offset by 2**15 so that
every field is nonzero.  A row is live only if its generation matches the
caller's, so a table is emptied in O(1) by bumping the generation.
"""
from __future__ import annotations

import numpy as np
from numba import int64, njit, uint64

from .rng import nb_below, nb_derive_seed, nb_mix64, nb_next

OFFSET = 1 << 15
MAX_RADIUS = OFFSET - 2
MAX_LOAD = 0.7

HIT = 0
EXITED = 1
TRUNCATED = 2
TABLE_FULL = 3


def key_words(d: int) -> int:
    return (d + 3) // 4


def new_table(cap: int, d: int) -> np.ndarray:
    cap = 1 << max(10, int(cap - 1).bit_length())
    return np.zeros((cap, key_words(d) + 2), dtype=np.uint64)


@njit(inline="always", cache=True)
def _hash(key, W):
    h = nb_mix64(key[0])
    for w in range(1, W):
        h = nb_mix64(h ^ key[w])
    return h


@njit(inline="always", cache=True)
def find_slot(tab, gen, key, W):
    """(slot, found): the live row holding ``key`` or the first free row."""
    mask = uint64(tab.shape[0] - 1)
    h = _hash(key, W) & mask
    while True:
        if tab[h, 0] != gen:
            return int64(h), False
        same = True
        for w in range(W):
            if tab[h, 1 + w] != key[w]:
                same = False
                break
        if same:
            return int64(h), True
        h = (h + uint64(1)) & mask


@njit(inline="always", cache=True)
def lookup(tab, gen, key, W):
    h, found = find_slot(tab, gen, key, W)
    if found:
        return int64(tab[h, W + 1])
    return int64(-1)


@njit(inline="always", cache=True)
def store(tab, h, gen, key, W, value):
    tab[h, 0] = gen
    for w in range(W):
        tab[h, 1 + w] = key[w]
    tab[h, W + 1] = uint64(value)


@njit(cache=True)
def pack(rel, W):
    key = np.zeros(W, dtype=np.uint64)
    for j in range(rel.size):
        key[j >> 2] += uint64(rel[j] + OFFSET) << uint64(16 * (j & 3))
    return key


@njit(cache=True)
def unpack(key, d):
    out = np.empty(d, dtype=np.int64)
    for j in range(d):
        out[j] = int64((key[j >> 2] >> uint64(16 * (j & 3))) & uint64(0xFFFF)) - OFFSET
    return out


@njit(cache=True)
def erasing_walk(start, radius, max_steps, seed, struct, sgen, has_struct,
                 scratch, wgen, stack, erase):
    """One walk of Wilson's method rooted at infinity inside an l1 ball.

    ``start`` is relative to the ball centre.  The walk stops on hitting a live
    row of ``struct``, on reaching l1 norm ``radius`` or after ``max_steps``.
    With ``erase`` set the loop-erased path (hit or exit site included) is left
    in ``stack[:top]``.  Returns (status, hit_value, top, steps, distinct).
    """
    d = start.size
    W = stack.shape[1]
    key = pack(start, W)
    pos = start.copy()
    norm = int64(0)
    for j in range(d):
        norm += abs(pos[j])
    state = uint64(seed)
    top = int64(0)
    steps = int64(0)
    distinct = int64(0)
    limit = int64(MAX_LOAD * scratch.shape[0])
    two_d = 2 * d
    while True:
        if has_struct:
            v = lookup(struct, sgen, key, W)
            if v >= 0:
                if erase:
                    for w in range(W):
                        stack[top, w] = key[w]
                    top += 1
                return HIT, v, top, steps, distinct
        if erase:
            h, found = find_slot(scratch, wgen, key, W)
            popped = False
            if found:
                p = int64(scratch[h, W + 1])
                if p < top:
                    same = True
                    for w in range(W):
                        if stack[p, w] != key[w]:
                            same = False
                            break
                    if same:
                        top = p + 1
                        popped = True
            if not popped:
                if not found:
                    distinct += 1
                    if distinct > limit or top >= stack.shape[0]:
                        return TABLE_FULL, int64(-1), top, steps, distinct
                store(scratch, h, wgen, key, W, top)
                for w in range(W):
                    stack[top, w] = key[w]
                top += 1
        if norm >= radius:
            return EXITED, int64(-1), top, steps, distinct
        if steps >= max_steps:
            return TRUNCATED, int64(-1), top, steps, distinct
        state, u = nb_next(state)
        dirn = nb_below(u, two_d)
        ax = dirn >> 1
        word = ax >> 2
        inc = uint64(1) << uint64(16 * (ax & 3))
        old = pos[ax]
        if dirn & 1:
            pos[ax] = old - 1
            key[word] -= inc
            norm += -1 if old > 0 else 1
        else:
            pos[ax] = old + 1
            key[word] += inc
            norm += 1 if old >= 0 else -1
        steps += 1


@njit(cache=True)
def struct_add(struct, sgen, stack, lo, hi, value, n_live):
    """Insert stack rows lo..hi-1 into ``struct`` holding ``n_live`` rows.

    Returns the new live count, or -1 as soon as the load limit would be
    exceeded (the table is then left partly filled and must be rebuilt).
    """
    W = stack.shape[1]
    limit = int64(MAX_LOAD * struct.shape[0])
    count = int64(n_live)
    key = np.empty(W, dtype=np.uint64)
    for i in range(lo, hi):
        for w in range(W):
            key[w] = stack[i, w]
        h, found = find_slot(struct, sgen, key, W)
        if not found:
            if count >= limit:
                return int64(-1)
            count += 1
        store(struct, h, sgen, key, W, value)
    return count


@njit(cache=True)
def wilson_sequence_trial(rel_points, radius, max_steps, seed, struct, scratch,
                          stack, gens, stop_on_split):
    """Run the sequential construction from each point in order.

    Point j's walk uses stream ``derive_seed(seed, j)``.  Returns per-point
    component ids (component 0 belongs to the first point; -1 when skipped
    after an early stop) and a status: 0 ok, 2 some walk truncated by steps,
    3 a table overflowed (caller must retry with larger tables).
    ``gens`` holds the next generation numbers for (struct, scratch) and is
    advanced in place.
    """
    k = rel_points.shape[0]
    comp = np.full(k, -1, dtype=np.int64)
    sgen = gens[0]
    gens[0] += uint64(1)
    n_struct = int64(0)
    # segment -> component, segments are numbered by point index
    seg_comp = np.full(k, -1, dtype=np.int64)
    n_comp = int64(0)
    status = 0
    for j in range(k):
        wgen = gens[1]
        gens[1] += uint64(1)
        last = j == k - 1
        erase = not last or k == 1
        st, hitv, top, steps, distinct = erasing_walk(
            rel_points[j], radius, max_steps, nb_derive_seed(seed, j),
            struct, sgen, n_struct > 0, scratch, wgen, stack, erase)
        if st == TABLE_FULL:
            return comp, 3
        if st == TRUNCATED:
            status = 2
        if st == HIT:
            c = seg_comp[hitv]
            top_new = top - 1  # hit site already belongs to the structure
        else:
            c = n_comp
            n_comp += 1
            top_new = top
        seg_comp[j] = c
        comp[j] = c
        if stop_on_split and c != 0:
            return comp, status
        if erase and top_new > 0:
            n_struct = struct_add(struct, sgen, stack, 0, top_new, j, n_struct)
            if n_struct < 0:
                return comp, 3
    return comp, status


@njit(cache=True)
def wilson_sequence_batch(rel_points, radius, max_steps, master, lo, hi, struct,
                          scratch, stack, gens, stop_on_split):
    """Trials lo..hi-1 with seeds derive_seed(master, i); stops at the first overflow."""
    k = rel_points.shape[0]
    out = np.full((hi - lo, k), -1, dtype=np.int64)
    flags = np.zeros(hi - lo, dtype=np.int64)
    for i in range(lo, hi):
        comp, st = wilson_sequence_trial(rel_points, radius, max_steps,
                                         nb_derive_seed(master, i), struct, scratch,
                                         stack, gens, stop_on_split)
        flags[i - lo] = st
        if st == 3:
            return out, flags, i
        out[i - lo] = comp
    return out, flags, hi


@njit(cache=True)
def green_batch(x, y, max_steps, master, lo, hi):
    """Visit counts at y of walks from x over steps 0..max_steps."""
    d = x.size
    out = np.zeros(hi - lo, dtype=np.int64)
    two_d = 2 * d
    for i in range(lo, hi):
        state = nb_derive_seed(master, i)
        diff = x - y
        mism = int64(0)
        for j in range(d):
            if diff[j] != 0:
                mism += 1
        c = int64(1) if mism == 0 else int64(0)
        for _ in range(max_steps):
            state, u = nb_next(state)
            dirn = nb_below(u, two_d)
            ax = dirn >> 1
            before = diff[ax] != 0
            if dirn & 1:
                diff[ax] -= 1
            else:
                diff[ax] += 1
            after = diff[ax] != 0
            if before and not after:
                mism -= 1
            elif after and not before:
                mism += 1
            if mism == 0:
                c += 1
        out[i - lo] = c
    return out
