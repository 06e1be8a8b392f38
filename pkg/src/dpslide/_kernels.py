"""Compiled inner loops for the sliding-window heavy-hitter engines.

State lives in plain numpy arrays grouped into namedtuples.  A pool of
window counters is stored as linked lists inside flat arrays: each counter
owns a doubly linked list of (time, running count) nodes and sits on two
singly linked lists, one per tracked item and one per histogram slot.

Counters die only together with their slot.  A dead counter frees its
nodes at once but stays on its item list until the next walk of that list
(or a full sweep) unlinks it, which keeps slot removal cheap.

The run functions stop early and return the number of items consumed when
a pool is close to full; the Python wrapper grows the arrays and resumes.
Nothing is mutated for an item unless it can be processed completely.
"""

from __future__ import annotations

from collections import namedtuple

import numba as nb
import numpy as np

from .hashing import poly61

CounterPool = namedtuple("CounterPool", [
    "meta",    # int64[7]: free nodes, free counters, live nodes, live counters, dead counters,
               # counters ever created, counter touches
    "N",       # int64[node_cap, 4]: time, running count, next, prev
    "nfree",   # int32 stack of free node ids
    "C",       # int64[counter_cap, 8]: one 64-byte row per counter, fields below
    "Cf",      # float64 view of C (the budget of the last full pass)
    "cfree",   # int32 stack of free counter ids
    "item_head",
])

# node fields
N_TIME, N_CUM, N_NEXT, N_PREV = 0, 1, 2, 3
# counter fields; a dead counter has slot NONE
C_INEXT, C_SLOT, C_TAIL, C_TOTAL, C_FULL, C_HEAD, C_ITEM, C_SNEXT = 0, 1, 2, 3, 4, 5, 6, 7
C_WIDTH = 8

L2Slots = namedtuple("L2Slots", [
    "meta",        # int64[2]: live slots, free slots
    "time", "acc", "sumsq", "cs", "chead", "order", "free", "x", "mark",
])

L1Slots = namedtuple("L1Slots", [
    "meta", "time", "keys", "vals", "cnt", "table", "chead", "order", "free", "mark",
])

NONE = -1


# ---------------------------------------------------------------- allocation

def _aligned(shape, dtype, fill):
    """Array whose rows start on 64-byte boundaries."""
    itemsize = np.dtype(dtype).itemsize
    count = int(np.prod(shape))
    raw = np.empty(count + 64 // itemsize, dtype=dtype)
    off = (-raw.ctypes.data % 64) // itemsize
    out = raw[off: off + count].reshape(shape)
    out[...] = fill
    return out


def new_counter_pool(n, node_cap, counter_cap):
    C = _aligned((counter_cap, C_WIDTH), np.int64, NONE)
    return CounterPool(
        meta=np.array([node_cap, counter_cap, 0, 0, 0, 0, 0], dtype=np.int64),
        N=_aligned((node_cap, 4), np.int64, NONE),
        nfree=np.arange(node_cap - 1, -1, -1, dtype=np.int32),
        C=C,
        Cf=C.view(np.float64),
        cfree=np.arange(counter_cap - 1, -1, -1, dtype=np.int32),
        item_head=np.full(n + 1, NONE, np.int32),
    )


def _grow(arr, cap, fill):
    out = np.full((cap,) + arr.shape[1:], fill, dtype=arr.dtype)
    out[: arr.shape[0]] = arr
    return out


def _grow_free(free, nfree, old, new_cap):
    out = np.empty(new_cap, np.int32)
    out[:nfree] = free[:nfree]
    out[nfree: nfree + new_cap - old] = np.arange(new_cap - 1, old - 1, -1, dtype=np.int32)
    return out


def grow_nodes(pool, new_cap):
    old = pool.N.shape[0]
    nfree = int(pool.meta[0])
    meta = pool.meta.copy()
    meta[0] = nfree + new_cap - old
    N = _aligned((new_cap, 4), np.int64, NONE)
    N[:old] = pool.N
    return pool._replace(meta=meta, N=N, nfree=_grow_free(pool.nfree, nfree, old, new_cap))


def grow_counters(pool, new_cap):
    old = pool.C.shape[0]
    nfree = int(pool.meta[1])
    meta = pool.meta.copy()
    meta[1] = nfree + new_cap - old
    C = _aligned((new_cap, C_WIDTH), np.int64, NONE)
    C[:old] = pool.C
    return pool._replace(meta=meta, C=C, Cf=C.view(np.float64),
                         cfree=_grow_free(pool.cfree, nfree, old, new_cap))


def new_slot_arrays(cap):
    return dict(
        meta=np.array([0, cap], dtype=np.int64),
        time=np.zeros(cap, np.int64),
        chead=np.full(cap, NONE, np.int32),
        order=np.zeros(cap, np.int32),
        free=np.arange(cap - 1, -1, -1, dtype=np.int32),
        mark=np.zeros(cap, np.int64),
    )


def grow_slots(slots, new_cap):
    old = slots.time.shape[0]
    nfree = int(slots.meta[1])
    free = np.empty(new_cap, np.int32)
    free[:nfree] = slots.free[:nfree]
    free[nfree: nfree + new_cap - old] = np.arange(new_cap - 1, old - 1, -1, dtype=np.int32)
    meta = slots.meta.copy()
    meta[1] = nfree + new_cap - old
    fields = {}
    for name in slots._fields:
        if name in ("meta", "free"):
            continue
        arr = getattr(slots, name)
        fill = NONE if name in ("chead", "table") else 0
        fields[name] = _grow(arr, new_cap, fill)
    return slots._replace(meta=meta, free=free, **fields)


# ------------------------------------------------------------- counter pool
#
# The helpers take the pool's arrays one by one rather than the namedtuple:
# pulling an array out of a tuple costs a reference-count round trip, which
# dominated the hot loops.  Argument order: meta, N, nfree, C, Cf, cfree, ih.

@nb.njit(cache=True)
def _node_free(meta, nfree, x):
    nfree[meta[0]] = x
    meta[0] += 1
    meta[2] -= 1


@nb.njit(cache=True)
def _node_unlink(meta, N, nfree, C, c, x):
    nx = N[x, N_NEXT]
    pv = N[x, N_PREV]
    if pv == NONE:
        C[c, C_HEAD] = nx
    else:
        N[pv, N_NEXT] = nx
    if nx == NONE:
        C[c, C_TAIL] = pv
    else:
        N[nx, N_PREV] = pv
    _node_free(meta, nfree, x)


@nb.njit(cache=True)
def _counter_free(meta, cfree, c):
    cfree[meta[1]] = c
    meta[1] += 1
    meta[4] -= 1


@nb.njit(cache=True)
def _sweep_dead(meta, C, cfree, ih):
    # Rebuild every item chain and the free stack in one pass over the rows.
    # A sequential scan is far cheaper than walking the chains, and the
    # rebuilt stack hands out low row ids first, which keeps live rows close.
    freed = meta[4]
    ih[:] = NONE
    k = 0
    for c in range(C.shape[0] - 1, -1, -1):
        if C[c, C_SLOT] == NONE:
            cfree[k] = c
            k += 1
        else:
            item = C[c, C_ITEM]
            C[c, C_INEXT] = ih[item]
            ih[item] = c
    meta[1] = k
    meta[4] = 0
    return freed


@nb.njit(cache=True)
def sweep_dead(P):
    """Unlink and free every dead counter; returns how many were freed."""
    return _sweep_dead(P.meta, P.C, P.cfree, P.item_head)


@nb.njit(cache=True)
def _expire_nodes(meta, N, nfree, C, c, cut):
    x = C[c, C_HEAD]
    while x != NONE and N[x, N_TIME] < cut:
        nx = N[x, N_NEXT]
        _node_unlink(meta, N, nfree, C, c, x)
        x = nx


@nb.njit(cache=True)
def _full_pass(meta, N, nfree, C, Cf, c, budget):
    changed = True
    while changed:
        changed = False
        prev = C[c, C_HEAD]
        if prev == NONE:
            break
        cur = N[prev, N_NEXT]
        while cur != NONE and N[cur, N_NEXT] != NONE:
            nx = N[cur, N_NEXT]
            if N[nx, N_CUM] - N[prev, N_CUM] < budget:
                _node_unlink(meta, N, nfree, C, c, cur)
                changed = True
            else:
                prev = cur
            cur = nx
    Cf[c, C_FULL] = budget


@nb.njit(cache=True)
def _counter_query(meta, N, nfree, C, Cf, c, budget, cut, start):
    _expire_nodes(meta, N, nfree, C, c, cut)
    _full_pass(meta, N, nfree, C, Cf, c, budget)
    x = C[c, C_HEAD]
    while x != NONE and N[x, N_TIME] < start:
        x = N[x, N_NEXT]
    if x == NONE:
        return 0
    return C[c, C_TOTAL] - N[x, N_CUM] + 1


@nb.njit(cache=True)
def slot_counters_query(P, slot_head, slot, budget, cut, start, items, ests):
    """Window estimates from every counter of one slot; returns how many were written."""
    meta, N, nfree, C, Cf = P.meta, P.N, P.nfree, P.C, P.Cf
    c = slot_head[slot]
    k = 0
    while c != NONE:
        items[k] = C[c, C_ITEM]
        ests[k] = _counter_query(meta, N, nfree, C, Cf, c, budget, cut, start)
        k += 1
        c = C[c, C_SNEXT]
    return k


@nb.njit(cache=True)
def slot_counter_sizes(P, slot_head, slot, totals, lens):
    N = P.N
    C = P.C
    c = slot_head[slot]
    k = 0
    while c != NONE:
        totals[k] = C[c, C_TOTAL]
        size = 0
        x = C[c, C_HEAD]
        while x != NONE:
            size += 1
            x = N[x, N_NEXT]
        lens[k] = size
        k += 1
        c = C[c, C_SNEXT]
    return k


@nb.njit(cache=True)
def slot_counter_profile(P, slot_head, slot, first_counts, lens, budgets):
    """Per counter of a slot: count since its oldest node, node count, last full-pass budget."""
    N = P.N
    C = P.C
    c = slot_head[slot]
    k = 0
    while c != NONE:
        x = C[c, C_HEAD]
        first_counts[k] = C[c, C_TOTAL] - N[x, N_CUM] + 1 if x != NONE else 0
        size = 0
        while x != NONE:
            size += 1
            x = N[x, N_NEXT]
        lens[k] = size
        budgets[k] = P.Cf[c, C_FULL]
        k += 1
        c = C[c, C_SNEXT]
    return k


@nb.njit(cache=True)
def _release_slot_counters(meta, N, nfree, C, slot_head, slot):
    """Free the nodes of every counter in a slot and mark the counters dead."""
    c = slot_head[slot]
    while c != NONE:
        x = C[c, C_HEAD]
        while x != NONE:
            nfree[meta[0]] = x
            meta[0] += 1
            meta[2] -= 1
            x = N[x, N_NEXT]
        C[c, C_SLOT] = NONE
        meta[3] -= 1
        meta[4] += 1
        c = C[c, C_SNEXT]
    slot_head[slot] = NONE


@nb.njit(cache=True)
def touch_item(meta, N, nfree, C, Cf, cfree, ih, item, time, cut, growth, slot_budget, mark):
    """Record an arrival of `item` in every live counter tracking it.

    Sets mark[j] = time for each slot j that tracks the item and frees the
    dead counters met on the way.  The common steps are written out here
    rather than called, which keeps this loop free of per-call overhead.
    """
    prev = NONE
    c = ih[item]
    while c != NONE:
        nxc = C[c, C_INEXT]
        j = C[c, C_SLOT]
        if j == NONE:
            if prev == NONE:
                ih[item] = nxc
            else:
                C[prev, C_INEXT] = nxc
            cfree[meta[1]] = c
            meta[1] += 1
            meta[4] -= 1
            c = nxc
            continue
        mark[j] = time
        budget = slot_budget[j]
        meta[6] += 1
        # append a node
        total = C[c, C_TOTAL] + 1
        C[c, C_TOTAL] = total
        k = meta[0] - 1
        meta[0] = k
        meta[2] += 1
        x = nfree[k]
        tail = C[c, C_TAIL]
        N[x, N_TIME] = time
        N[x, N_CUM] = total
        N[x, N_NEXT] = NONE
        N[x, N_PREV] = tail
        N[tail, N_NEXT] = x
        C[c, C_TAIL] = x
        if N[C[c, C_HEAD], N_TIME] < cut:
            _expire_nodes(meta, N, nfree, C, c, cut)
        if budget >= growth * Cf[c, C_FULL]:
            _full_pass(meta, N, nfree, C, Cf, c, budget)
        else:
            # drop the second-newest node while the newest and third-newest
            # are closer than the budget
            while True:
                mid = N[x, N_PREV]
                if mid == NONE:
                    break
                old = N[mid, N_PREV]
                if old == NONE or total - N[old, N_CUM] >= budget:
                    break
                N[old, N_NEXT] = x
                N[x, N_PREV] = old
                nfree[meta[0]] = mid
                meta[0] += 1
                meta[2] -= 1
        prev = c
        c = nxc


@nb.njit(cache=True)
def create_counters(meta, N, nfree, C, Cf, cfree, ih, item, time, slots, budgets, count,
                    slot_head):
    """Start a counter for `item` in each of slots[:count], seeded with this arrival."""
    for q in range(count):
        slot = slots[q]
        k = meta[1] - 1
        meta[1] = k
        meta[3] += 1
        meta[5] += 1
        c = cfree[k]
        k = meta[0] - 1
        meta[0] = k
        meta[2] += 1
        x = nfree[k]
        N[x, N_TIME] = time
        N[x, N_CUM] = 1
        N[x, N_NEXT] = NONE
        N[x, N_PREV] = NONE
        C[c, C_ITEM] = item
        C[c, C_SLOT] = slot
        C[c, C_HEAD] = x
        C[c, C_TAIL] = x
        C[c, C_TOTAL] = 1
        Cf[c, C_FULL] = budgets[q]
        C[c, C_INEXT] = ih[item]
        ih[item] = c
        C[c, C_SNEXT] = slot_head[slot]
        slot_head[slot] = c


# ---------------------------------------------------------------- L2 engine

@nb.njit(cache=True)
def _median_small(buf, k):
    # insertion sort; k is a handful of repetitions or rows
    for i in range(1, k):
        v = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > v:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = v
    h = k // 2
    if k % 2 == 1:
        return buf[h]
    return (buf[h - 1] + buf[h]) / 2.0


@nb.njit(cache=True)
def l2_slot_estimate(sumsq, j, reps, rows, buf):
    # sort the raw sums and divide only the middle ones; same value as
    # dividing first, since division by rows keeps the order
    for d in range(reps):
        buf[d] = sumsq[j, d]
    for i in range(1, reps):
        v = buf[i]
        z = i - 1
        while z >= 0 and buf[z] > v:
            buf[z + 1] = buf[z]
            z -= 1
        buf[z + 1] = v
    h = reps // 2
    if reps % 2 == 1:
        return np.sqrt(buf[h] / rows)
    return np.sqrt((buf[h - 1] / rows + buf[h] / rows) / 2.0)


@nb.njit(cache=True)
def _cs_median(cs, j, cb, csg, nrows, buf):
    for r in range(nrows):
        buf[r] = csg[r] * cs[j, r, cb[r]]
    return _median_small(buf, nrows)


@nb.njit(cache=True)
def _cs_median_at_least(cs, j, cb, csg, nrows, cut, buf):
    """Whether the median signed bucket is >= cut.

    For an odd row count this holds exactly when more than half of the rows
    reach cut, so no sort is needed.
    """
    if nrows % 2 == 0:
        return _cs_median(cs, j, cb, csg, nrows, buf) >= cut
    need = nrows // 2 + 1
    hit = 0
    for r in range(nrows):
        if csg[r] * cs[j, r, cb[r]] >= cut:
            hit += 1
            if hit == need:
                return True
        elif r - hit >= nrows - need:
            return False
    return False


@nb.njit(cache=True)
def _cs_mean_abs(cs, j, cb, nrows):
    tot = 0.0
    for r in range(nrows):
        tot += abs(cs[j, r, cb[r]])
    return tot / nrows


@nb.njit(cache=True)
def l2_hash_tables(n, ams_coef, cs_sign_coef, cs_bucket_coef, buckets):
    """Per-item hash values for items 1..n, laid out as l2_run reads them."""
    R = ams_coef.shape[0]
    CR = cs_sign_coef.shape[0]
    sg = np.zeros((n + 1, R), np.int64)
    csg = np.zeros((n + 1, CR), np.int64)
    cb = np.zeros((n + 1, CR), np.int64)
    bucket_mod = np.uint64(buckets)
    one = np.uint64(1)
    for item in range(1, n + 1):
        u = np.uint64(item)
        for r in range(R):
            sg[item, r] = -1 if poly61(ams_coef[r], u) & one else 0
        for r in range(CR):
            csg[item, r] = -1 if poly61(cs_sign_coef[r], u) & one else 1
            cb[item, r] = np.int64(poly61(cs_bucket_coef[r], u) % bucket_mod)
    return sg, csg, cb


@nb.njit(cache=True)
def l2_run(items, t0, S, P, ams_coef, cs_sign_coef, cs_bucket_coef,
           reps, rows, buckets, gap, cs_cut, budget_factor, growth,
           max_window, mean_abs, sg_tab, csg_tab, cb_tab):
    """Feed items at times t0+1, t0+2, ...; returns how many were consumed.

    The three tables hold precomputed hash values per item (see
    l2_hash_tables); pass tables with no rows to hash every arrival instead.
    """
    R = ams_coef.shape[0]
    CR = cs_sign_coef.shape[0]
    sgm = np.empty(R, np.int64)
    cb = np.empty(CR, np.int64)
    csg = np.empty(CR, np.int64)
    buf = np.empty(max(reps, CR), np.float64)
    cs_finite = cs_cut < np.inf
    bucket_mod = np.uint64(buckets)
    one = np.uint64(1)
    s_meta = S.meta
    s_time = S.time
    acc = S.acc
    sumsq = S.sumsq
    cs = S.cs
    chead = S.chead
    s_order = S.order
    s_free = S.free
    s_x = S.x
    s_mark = S.mark
    meta, N, nfree, C, Cf, cfree, ih = P.meta, P.N, P.nfree, P.C, P.Cf, P.cfree, P.item_head
    s_budget = np.zeros(s_time.shape[0], np.float64)
    new_slots = np.empty(s_time.shape[0], np.int64)
    new_budgets = np.empty(s_time.shape[0], np.float64)
    for i in range(items.shape[0]):
        s = s_meta[0]
        if s_meta[1] < 1 or meta[1] < s + 1 or meta[0] < s + 1:
            return i
        item = items[i]
        t = t0 + i + 1
        if sg_tab.shape[0] > 0:
            sgm[:] = sg_tab[item]
            csg[:] = csg_tab[item]
            cb[:] = cb_tab[item]
        else:
            u = np.uint64(item)
            for r in range(R):
                sgm[r] = -1 if poly61(ams_coef[r], u) & one else 0
            for r in range(CR):
                csg[r] = -1 if poly61(cs_sign_coef[r], u) & one else 1
                cb[r] = np.int64(poly61(cs_bucket_coef[r], u) % bucket_mod)
        # open a slot starting now
        fk = s_meta[1] - 1
        s_meta[1] = fk
        j = s_free[fk]
        s_time[j] = t
        acc[j, :] = 0
        sumsq[j, :] = 0
        cs[j, :, :] = 0
        chead[j] = NONE
        s_order[s] = j
        s += 1
        s_meta[0] = s
        # sketch updates and estimates
        for q in range(s):
            j = s_order[q]
            # with sgm = 0 for sign +1 and -1 for sign -1:
            # old * sign = (old ^ sgm) - sgm and sign = 2 * sgm + 1
            arow = acc[j]
            for d in range(reps):
                dsq = 0
                base = d * rows
                for r in range(rows):
                    old = arow[base + r]
                    m = sgm[base + r]
                    dsq += (old ^ m) - m
                    arow[base + r] = old + 2 * m + 1
                sumsq[j, d] += 2 * dsq + rows
            for r in range(CR):
                cs[j, r, cb[r]] += csg[r]
            x = l2_slot_estimate(sumsq, j, reps, rows, buf)
            s_x[j] = x
            s_budget[j] = budget_factor * x
        # counters of this item: touch existing ones, start new ones on crossing
        cut = t - max_window + 1
        touch_item(meta, N, nfree, C, Cf, cfree, ih, item, t, cut, growth, s_budget, s_mark)
        k = 0
        for q in range(s):
            if not cs_finite:
                break
            j = s_order[q]
            if s_mark[j] == t:
                continue
            if mean_abs:
                hit = _cs_mean_abs(cs, j, cb, CR) >= cs_cut * s_x[j]
            else:
                hit = _cs_median_at_least(cs, j, cb, csg, CR, cs_cut * s_x[j], buf)
            if hit:
                new_slots[k] = j
                new_budgets[k] = s_budget[j]
                k += 1
        create_counters(meta, N, nfree, C, Cf, cfree, ih, item, t, new_slots, new_budgets, k,
                        chead)
        # expiry of slots wholly older than the maximum window
        drop = 0
        while s - drop >= 2 and s_time[s_order[drop + 1]] <= cut:
            j = s_order[drop]
            _release_slot_counters(meta, N, nfree, C, chead, j)
            s_free[s_meta[1]] = j
            s_meta[1] += 1
            drop += 1
        if drop > 0:
            for q in range(s - drop):
                s_order[q] = s_order[q + drop]
            s -= drop
            s_meta[0] = s
        # smooth histogram pruning to a fixed point
        keep = 1.0 - gap / 2.0
        changed = True
        while changed:
            changed = False
            q = 1
            while q < s - 1:
                if s_x[s_order[q + 1]] >= keep * s_x[s_order[q - 1]]:
                    j = s_order[q]
                    _release_slot_counters(meta, N, nfree, C, chead, j)
                    s_free[s_meta[1]] = j
                    s_meta[1] += 1
                    for z in range(q, s - 1):
                        s_order[z] = s_order[z + 1]
                    s -= 1
                    s_meta[0] = s
                    changed = True
                else:
                    q += 1
    return items.shape[0]


# ---------------------------------------------------------------- L1 engine

_GOLD = np.uint64(0x9E3779B97F4A7C15)


@nb.njit(cache=True)
def _mg_slot(keys, table, j, item, hmask, shift):
    """Probe position of `item` in slot j's table (its entry or the empty cell)."""
    h = np.int64((np.uint64(item) * _GOLD) >> shift) & hmask
    while True:
        p = table[j, h]
        if p == NONE or keys[j, p] == item:
            return h
        h = (h + 1) & hmask


@nb.njit(cache=True)
def mg_lookup(keys, vals, table, j, item, hmask, shift):
    p = table[j, _mg_slot(keys, table, j, item, hmask, shift)]
    if p == NONE:
        return 0
    return vals[j, p]


@nb.njit(cache=True)
def _mg_decrement(keys, vals, cnt, table, j, hmask, shift):
    """Decrement every counter of slot j, drop zeros and rebuild its table."""
    w = 0
    for p in range(cnt[j]):
        v = vals[j, p] - 1
        if v > 0:
            keys[j, w] = keys[j, p]
            vals[j, w] = v
            w += 1
    cnt[j] = w
    table[j, :] = NONE
    for p in range(w):
        h = _mg_slot(keys, table, j, keys[j, p], hmask, shift)
        table[j, h] = p


@nb.njit(cache=True)
def _mg_update(keys, vals, cnt, table, j, item, cap, hmask, shift):
    """Process one arrival in slot j and return the item's new estimate."""
    h = _mg_slot(keys, table, j, item, hmask, shift)
    p = table[j, h]
    if p != NONE:
        v = vals[j, p] + 1
        vals[j, p] = v
        return v
    k = cnt[j]
    if k < cap:
        keys[j, k] = item
        vals[j, k] = 1
        table[j, h] = k
        cnt[j] = k + 1
        return 1
    _mg_decrement(keys, vals, cnt, table, j, hmask, shift)
    return 0


@nb.njit(cache=True)
def l1_run(items, t0, M, P, cap, hmask, shift, create_frac, budget_frac,
           growth, ratio, max_window):
    m_meta = M.meta
    m_time = M.time
    m_keys = M.keys
    m_vals = M.vals
    m_cnt = M.cnt
    m_table = M.table
    m_chead = M.chead
    m_order = M.order
    m_free = M.free
    m_mark = M.mark
    meta, N, nfree, C, Cf, cfree, ih = P.meta, P.N, P.nfree, P.C, P.Cf, P.cfree, P.item_head
    m_budget = np.zeros(m_time.shape[0], np.float64)
    new_slots = np.empty(m_time.shape[0], np.int64)
    new_budgets = np.empty(m_time.shape[0], np.float64)
    for i in range(items.shape[0]):
        s = m_meta[0]
        if m_meta[1] < 1 or meta[1] < s + 1 or meta[0] < s + 1:
            return i
        item = items[i]
        t = t0 + i + 1
        fk = m_meta[1] - 1
        m_meta[1] = fk
        j = m_free[fk]
        m_time[j] = t
        m_cnt[j] = 0
        m_table[j, :] = NONE
        m_chead[j] = NONE
        m_order[s] = j
        s += 1
        m_meta[0] = s
        cut = t - max_window + 1
        for q in range(s):
            j = m_order[q]
            m_budget[j] = budget_frac * (t - m_time[j] + 1)
        touch_item(meta, N, nfree, C, Cf, cfree, ih, item, t, cut, growth, m_budget, m_mark)
        k = 0
        for q in range(s):
            j = m_order[q]
            v = _mg_update(m_keys, m_vals, m_cnt, m_table, j, item, cap, hmask, shift)
            if m_mark[j] != t:
                length = t - m_time[j] + 1
                if v >= create_frac * length:
                    new_slots[k] = j
                    new_budgets[k] = m_budget[j]
                    k += 1
        create_counters(meta, N, nfree, C, Cf, cfree, ih, item, t, new_slots, new_budgets, k,
                        m_chead)
        drop = 0
        while s - drop >= 2 and m_time[m_order[drop + 1]] <= cut:
            j = m_order[drop]
            _release_slot_counters(meta, N, nfree, C, m_chead, j)
            m_free[m_meta[1]] = j
            m_meta[1] += 1
            drop += 1
        if drop > 0:
            for q in range(s - drop):
                m_order[q] = m_order[q + drop]
            s -= drop
            m_meta[0] = s
        changed = True
        while changed:
            changed = False
            q = 1
            while q < s - 1:
                older = t - m_time[m_order[q - 1]] + 1
                newer = t - m_time[m_order[q + 1]] + 1
                if older <= ratio * newer:
                    j = m_order[q]
                    _release_slot_counters(meta, N, nfree, C, m_chead, j)
                    m_free[m_meta[1]] = j
                    m_meta[1] += 1
                    for z in range(q, s - 1):
                        m_order[z] = m_order[z + 1]
                    s -= 1
                    m_meta[0] = s
                    changed = True
                else:
                    q += 1
    return items.shape[0]
