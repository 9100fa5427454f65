"""Compiled inner loops shared by the sampler, the oracle and the statistics.

Everything here works on flat arrays.  Neighbour tables are ``int32`` arrays of
shape ``(n_sites, max_degree)`` padded with ``-1`` at the end of each row.
Random numbers arrive as raw 64-bit words drawn from a numpy bit generator so
that results do not depend on how a run is split into kernel calls.
"""

import numpy as np
from numba import njit

_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _below(word, n):
    # uniform integer in [0, n) from the top 53 bits of a word
    return int(np.float64(word >> np.uint64(11)) * _INV_2_53 * n)


@njit(cache=True, inline="always")
def _unit(word):
    return np.float64(word >> np.uint64(11)) * _INV_2_53


@njit(nogil=True, cache=True)
def swap_delta(cells, nbr, i, j):
    """Change in T2 when site ``i`` (a zero) becomes one and ``j`` (a one) becomes zero."""
    delta = 0
    for k in range(nbr.shape[1]):
        q = nbr[i, k]
        if q < 0:
            break
        delta += 1 - 2 * cells[q]
    for k in range(nbr.shape[1]):
        q = nbr[j, k]
        if q < 0:
            break
        v = 1 if q == i else cells[q]
        delta += 2 * v - 1
    return delta


@njit(nogil=True, cache=True)
def build_neighbors(dims):
    """Lattice neighbour table for a C-ordered grid of size ``dims``."""
    nd = dims.shape[0]
    n = 1
    for k in range(nd):
        n *= dims[k]
    table = np.full((n, 2 * nd), -1, dtype=np.int32)
    for p in range(n):
        fill = 0
        stride = n
        for axis in range(nd):
            size = dims[axis]
            stride //= size
            coord = (p // stride) % size
            if coord > 0:
                table[p, fill] = p - stride
                fill += 1
            if coord < size - 1:
                table[p, fill] = p + stride
                fill += 1
    return table


# -- tracked statistics -------------------------------------------------------


@njit(nogil=True, cache=True, inline="always")
def _window_match(cells, ncols, win, h, w, r0, c0):
    for a in range(h):
        base = (r0 + a) * ncols + c0
        for b in range(w):
            want = win[a, b]
            if want >= 0 and cells[base + b] != want:
                return False
    return True


@njit(nogil=True, cache=True)
def _motif_local(cells, p, nrows, ncols, mv, mvh, mvw, mown, mcount, sign):
    r = p // ncols
    c = p - r * ncols
    for v in range(mv.shape[0]):
        h = mvh[v]
        w = mvw[v]
        for r0 in range(max(0, r - h + 1), min(r, nrows - h) + 1):
            for c0 in range(max(0, c - w + 1), min(c, ncols - w) + 1):
                if _window_match(cells, ncols, mv[v], h, w, r0, c0):
                    mcount[mown[v]] += sign


@njit(nogil=True, cache=True)
def _window_local(cells, p, newval, ncols, win, wside, wa, wb):
    r = p // ncols
    c = p - r * ncols
    old = np.int64(cells[p])
    newval = np.int64(newval)
    for k in range(win.shape[0]):
        r0 = win[k, 0]
        c0 = win[k, 1]
        n = wside[k]
        if r < r0 or r >= r0 + n or c < c0 or c >= c0 + n:
            continue
        wa[k] += newval - old
        if r > r0:
            q = np.int64(cells[p - ncols])
            wb[k] += abs(newval - q) - abs(old - q)
        if r < r0 + n - 1:
            q = np.int64(cells[p + ncols])
            wb[k] += abs(newval - q) - abs(old - q)
        if c > c0:
            q = np.int64(cells[p - 1])
            wb[k] += abs(newval - q) - abs(old - q)
        if c < c0 + n - 1:
            q = np.int64(cells[p + 1])
            wb[k] += abs(newval - q) - abs(old - q)


@njit(nogil=True, cache=True)
def _flip(cells, p, newval, nrows, ncols, mv, mvh, mvw, mown, mcount, win, wside, wa, wb):
    if mv.shape[0] > 0:
        _motif_local(cells, p, nrows, ncols, mv, mvh, mvw, mown, mcount, -1)
    if win.shape[0] > 0:
        _window_local(cells, p, newval, ncols, win, wside, wa, wb)
    cells[p] = newval
    if mv.shape[0] > 0:
        _motif_local(cells, p, nrows, ncols, mv, mvh, mvw, mown, mcount, 1)


@njit(nogil=True, cache=True)
def window_values(grid, corners, n):
    """Ones and disagreeing internal edges of each ``n x n`` window (corners ``(k, 2)``)."""
    k = corners.shape[0]
    wa = np.zeros(k, dtype=np.int64)
    wb = np.zeros(k, dtype=np.int64)
    for q in range(k):
        r0 = corners[q, 0]
        c0 = corners[q, 1]
        for r in range(r0, r0 + n):
            for c in range(c0, c0 + n):
                v = np.int64(grid[r, c])
                wa[q] += v
                if c + 1 < c0 + n:
                    wb[q] += abs(v - np.int64(grid[r, c + 1]))
                if r + 1 < r0 + n:
                    wb[q] += abs(v - np.int64(grid[r + 1, c]))
    return wa, wb


# -- swap chain ---------------------------------------------------------------


@njit(nogil=True, cache=True)
def _swap_step(cells, nbr, ones, zeros, pos, st, lo, hi, b, parity, w0, w1,
               nrows, ncols, mv, mvh, mvw, mown, mcount, win, wside, wa, wb):
    nz = zeros.shape[0]
    no = ones.shape[0]
    accepted = False
    if nz > 0 and no > 0:
        zi = _below(w0, nz)
        oi = _below(w1, no)
        i = zeros[zi]
        j = ones[oi]
        t2 = st[0] + swap_delta(cells, nbr, i, j)
        if lo <= t2 <= hi and (parity == 0 or (t2 - b) % 2 == 0):
            _flip(cells, i, 1, nrows, ncols, mv, mvh, mvw, mown, mcount, win, wside, wa, wb)
            _flip(cells, j, 0, nrows, ncols, mv, mvh, mvw, mown, mcount, win, wside, wa, wb)
            zeros[zi] = j
            pos[j] = zi
            ones[oi] = i
            pos[i] = oi
            st[0] = t2
            st[1] += 1
            accepted = True
    if st[0] == b:
        st[2] += 1
    return accepted


@njit(nogil=True, cache=True)
def swap_run(cells, nbr, ones, zeros, pos, st, lo, hi, b, parity, words,
             nrows, ncols, mv, mvh, mvw, mown, mcount, win, wside, wa, wb):
    """Advance ``len(words) // 2`` proposals without recording."""
    for s in range(words.shape[0] // 2):
        _swap_step(cells, nbr, ones, zeros, pos, st, lo, hi, b, parity,
                   words[2 * s], words[2 * s + 1],
                   nrows, ncols, mv, mvh, mvw, mown, mcount, win, wside, wa, wb)


@njit(nogil=True, cache=True)
def swap_record(cells, nbr, ones, zeros, pos, st, lo, hi, b, parity, words, thin,
                nrows, ncols, mv, mvh, mvw, mown, mcount, win, wside, wa, wb,
                out_t2, out_m, out_wa, out_wb, out_cells):
    """Run ``thin`` proposals per record and snapshot the tracked state after each block."""
    nrec = out_t2.shape[0]
    s = 0
    for k in range(nrec):
        for _ in range(thin):
            _swap_step(cells, nbr, ones, zeros, pos, st, lo, hi, b, parity,
                       words[s], words[s + 1],
                       nrows, ncols, mv, mvh, mvw, mown, mcount, win, wside, wa, wb)
            s += 2
        out_t2[k] = st[0]
        for q in range(mcount.shape[0]):
            out_m[k, q] = mcount[q]
        for q in range(wa.shape[0]):
            out_wa[k, q] = wa[q]
            out_wb[k, q] = wb[q]
        if out_cells.shape[0] > 0:
            for q in range(cells.shape[0]):
                out_cells[k, q] = cells[q]


@njit(nogil=True, cache=True)
def descend_to_fiber(cells, nbr, ones, zeros, pos, st, b, words, uphill):
    """Swap walk that never moves away from ``T2 = b`` except with probability ``uphill``.

    Returns the number of proposals consumed (three words each) before hitting ``b``.
    """
    nz = zeros.shape[0]
    no = ones.shape[0]
    if nz == 0 or no == 0:
        return 0
    n = words.shape[0] // 3
    for s in range(n):
        if st[0] == b:
            return s
        zi = _below(words[3 * s], nz)
        oi = _below(words[3 * s + 1], no)
        i = zeros[zi]
        j = ones[oi]
        t2 = st[0] + swap_delta(cells, nbr, i, j)
        if abs(t2 - b) <= abs(st[0] - b) or _unit(words[3 * s + 2]) < uphill:
            cells[i] = 1
            cells[j] = 0
            zeros[zi] = j
            pos[j] = zi
            ones[oi] = i
            pos[i] = oi
            st[0] = t2
    return n


# -- single-site Metropolis for Boltzmann-type models ---------------------------


@njit(nogil=True, cache=True)
def _flip_log_ratio(cells, p, t1, alpha, nbr, nbr_w, nbr2, nbr2_w, gamma_parity):
    y = np.int64(cells[p])
    d = alpha[p] * (1 - 2 * y)
    for k in range(nbr.shape[1]):
        q = nbr[p, k]
        if q < 0:
            break
        d += nbr_w[p, k] * (1 - 2 * abs(y - np.int64(cells[q])))
    for k in range(nbr2.shape[1]):
        q = nbr2[p, k]
        if q < 0:
            break
        d += nbr2_w[p, k] * (1 - 2 * abs(y - np.int64(cells[q])))
    if gamma_parity != 0.0:
        # T3 = 1 when T1 is even; a flip always toggles the parity
        d += gamma_parity if t1 % 2 == 1 else -gamma_parity
    return d


@njit(nogil=True, cache=True)
def metropolis_sweeps(cells, alpha, nbr, nbr_w, nbr2, nbr2_w, gamma_parity, words,
                      record_every, out):
    """Single-site Metropolis; ``len(cells)`` proposals per sweep, two words each.

    When ``out`` has rows, the state after every ``record_every`` sweeps is written
    to consecutive rows.
    """
    n = cells.shape[0]
    t1 = 0
    for p in range(n):
        t1 += cells[p]
    sweeps = words.shape[0] // (2 * n)
    s = 0
    r = 0
    for sw in range(sweeps):
        for _ in range(n):
            p = _below(words[s], n)
            d = _flip_log_ratio(cells, p, t1, alpha, nbr, nbr_w, nbr2, nbr2_w, gamma_parity)
            if d >= 0.0 or _unit(words[s + 1]) < np.exp(d):
                t1 += 1 - 2 * cells[p]
                cells[p] = 1 - cells[p]
            s += 2
        if out.shape[0] > 0 and (sw + 1) % record_every == 0 and r < out.shape[0]:
            for q in range(n):
                out[r, q] = cells[q]
            r += 1
    return r


# -- exhaustive enumeration -------------------------------------------------------


@njit(nogil=True, cache=True)
def _next_combination(idx, n):
    a = idx.shape[0]
    k = a - 1
    while k >= 0 and idx[k] == n - a + k:
        k -= 1
    if k < 0:
        return False
    idx[k] += 1
    for m in range(k + 1, a):
        idx[m] = idx[m - 1] + 1
    return True


@njit(nogil=True, cache=True)
def _subset_stats(scratch, adm, idx, nbr):
    a = idx.shape[0]
    for k in range(a):
        scratch[adm[idx[k]]] = 1
    t2 = 0
    singles = 0
    for k in range(a):
        p = adm[idx[k]]
        occupied = 0
        for m in range(nbr.shape[1]):
            q = nbr[p, m]
            if q < 0:
                break
            if scratch[q] == 1:
                occupied += 1
            else:
                t2 += 1
        if occupied == 0:
            singles += 1
    for k in range(a):
        scratch[adm[idx[k]]] = 0
    return t2, singles


@njit(nogil=True, cache=True)
def enumerate_subsets(adm, nbr, n_sites, a, total):
    """All ``a``-subsets of the admissible sites, in lexicographic order.

    Returns bit masks over admissible-site positions and the T2 of each subset.
    """
    n = adm.shape[0]
    masks = np.empty(total, dtype=np.uint64)
    t2s = np.empty(total, dtype=np.int32)
    scratch = np.zeros(n_sites, dtype=np.uint8)
    idx = np.arange(a)
    c = 0
    while True:
        t2, _ = _subset_stats(scratch, adm, idx, nbr)
        m = np.uint64(0)
        for k in range(a):
            m |= np.uint64(1) << np.uint64(idx[k])
        masks[c] = m
        t2s[c] = t2
        c += 1
        if a == 0 or not _next_combination(idx, n):
            break
    return masks, t2s


@njit(nogil=True, cache=True)
def subset_census(adm, nbr, n_sites, a, max_t2):
    """Per-T2 count of ``a``-subsets and the largest singleton count seen in each."""
    n = adm.shape[0]
    counts = np.zeros(max_t2 + 1, dtype=np.int64)
    best = np.full(max_t2 + 1, -1, dtype=np.int64)
    scratch = np.zeros(n_sites, dtype=np.uint8)
    idx = np.arange(a)
    while True:
        t2, singles = _subset_stats(scratch, adm, idx, nbr)
        counts[t2] += 1
        if singles > best[t2]:
            best[t2] = singles
        if a == 0 or not _next_combination(idx, n):
            break
    return counts, best


@njit(cache=True, inline="always")
def _find(parent, u):
    while parent[u] != u:
        parent[u] = parent[parent[u]]
        u = parent[u]
    return u


@njit(nogil=True, cache=True)
def swap_components(masks, t2s, n_adm, lo, hi):
    """Union-find over ``a``-subsets (sorted ``masks``) joined by single swaps.

    Only subsets with ``lo <= T2 <= hi`` take part; the others keep their own label.
    """
    total = masks.shape[0]
    parent = np.arange(total)
    one = np.uint64(1)
    for u in range(total):
        if t2s[u] < lo or t2s[u] > hi:
            continue
        m = masks[u]
        for j in range(n_adm):
            bj = one << np.uint64(j)
            if (m & bj) == 0:
                continue
            for i in range(n_adm):
                bi = one << np.uint64(i)
                if (m & bi) != 0:
                    continue
                m2 = (m ^ bj) | bi
                if m2 < m:
                    continue  # each unordered pair once
                v = np.searchsorted(masks, m2)
                if v < total and masks[v] == m2 and lo <= t2s[v] <= hi:
                    ru = _find(parent, u)
                    rv = _find(parent, v)
                    if ru != rv:
                        parent[max(ru, rv)] = min(ru, rv)
    for u in range(total):
        parent[u] = _find(parent, u)
    return parent


# -- motif counting ---------------------------------------------------------------


@njit(nogil=True, cache=True)
def count_window(grid, win):
    """Placements of ``win`` (values 0/1, negative = wildcard) fully inside ``grid``."""
    nrows, ncols = grid.shape
    h, w = win.shape
    total = 0
    for r0 in range(nrows - h + 1):
        for c0 in range(ncols - w + 1):
            ok = True
            for a in range(h):
                for b in range(w):
                    want = win[a, b]
                    if want >= 0 and grid[r0 + a, c0 + b] != want:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                total += 1
    return total
