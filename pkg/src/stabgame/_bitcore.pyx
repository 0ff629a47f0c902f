# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled bit-kernel backend (mirror of `stabgame._bitcore_py`).

Same packed layout and identical elimination order as the pure-Python
reference; the two must stay bit-for-bit interchangeable.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint64_t

cnp.import_array()

BACKEND_NAME = "compiled"


cdef extern from *:
    """
    #define CTZ64(x) __builtin_ctzll(x)
    #define CLZ64(x) __builtin_clzll(x)
    """
    int CTZ64(unsigned long long) nogil
    int CLZ64(unsigned long long) nogil


def n_words(int n_qubits):
    return (2 * n_qubits + 63) // 64


cdef inline int _content(uint64_t[:, ::1] words, Py_ssize_t i, int j) nogil:
    cdef int c = 2 * j
    return <int> ((words[i, c >> 6] >> (c & 63)) & 3)


cdef inline int _scan_up(uint64_t[:, ::1] words, Py_ssize_t i, int start_col,
                         int total_cols) nogil:
    cdef Py_ssize_t w = words.shape[1]
    cdef Py_ssize_t k = start_col >> 6
    cdef int off = start_col & 63
    cdef uint64_t word
    cdef int col
    while k < w:
        word = words[i, k]
        if off:
            word &= ~((<uint64_t> 1 << off) - 1)
            off = 0
        if word:
            col = (<int> k << 6) + CTZ64(word)
            return col if col < total_cols else -1
        k += 1
    return -1


cdef inline int _scan_down(uint64_t[:, ::1] words, Py_ssize_t i, int start_col) nogil:
    if start_col < 0:
        return -1
    cdef Py_ssize_t k = start_col >> 6
    cdef int off = start_col & 63
    cdef uint64_t word
    while k >= 0:
        word = words[i, k]
        if off < 63:
            word &= ((<uint64_t> 1 << (off + 1)) - 1)
        off = 63
        if word:
            return (<int> k << 6) + 63 - CLZ64(word)
        k -= 1
    return -1


cdef inline void _xor_row(uint64_t[:, ::1] words, Py_ssize_t dst, Py_ssize_t src) nogil:
    cdef Py_ssize_t k
    for k in range(words.shape[1]):
        words[dst, k] ^= words[src, k]


cdef inline void _apply_one(uint64_t[:, ::1] words, int bond,
                            const uint64_t[::1] lut) nogil:
    cdef int off = 2 * bond
    cdef Py_ssize_t wi = off >> 6
    cdef int sh = off & 63
    cdef Py_ssize_t i
    cdef uint64_t v, nv, lo, hi
    if sh <= 60:
        for i in range(words.shape[0]):
            v = (words[i, wi] >> sh) & 15
            nv = lut[v]
            words[i, wi] ^= (v ^ nv) << sh
    else:
        for i in range(words.shape[0]):
            lo = (words[i, wi] >> 62) & 3
            hi = words[i, wi + 1] & 3
            v = lo | (hi << 2)
            nv = lut[v]
            words[i, wi] ^= (lo ^ (nv & 3)) << 62
            words[i, wi + 1] ^= hi ^ (nv >> 2)


def apply_gate(uint64_t[:, ::1] words, int bond, const uint64_t[::1] lut):
    """Apply a two-qubit gate (16-entry nibble LUT) at `bond`, in place."""
    _apply_one(words, bond, lut)


def apply_gate_sequence(uint64_t[:, ::1] words, const uint64_t[:, ::1] luts,
                        const int64_t[::1] gate_indices, const int64_t[::1] bonds):
    cdef Py_ssize_t k
    with nogil:
        for k in range(gate_indices.shape[0]):
            _apply_one(words, <int> bonds[k], luts[gate_indices[k]])


cdef int _clip_impl(uint64_t[:, ::1] words, int32_t[::1] l, int32_t[::1] r,
                    int32_t[::1] cand, int32_t[::1] surv) nogil:
    cdef Py_ssize_t n = words.shape[0]
    cdef int total_cols = 2 * <int> n
    cdef int j, c1, c2, lo, best
    cdef Py_ssize_t i, p1, p2, t
    cdef Py_ssize_t cnt, scnt

    for i in range(n):
        lo = _scan_up(words, i, 0, total_cols)
        if lo < 0:
            return 1
        l[i] = lo >> 1
        r[i] = _scan_down(words, i, total_cols - 1) >> 1

    # sweep 1: left endpoints, sites ascending
    for j in range(<int> n):
        cnt = 0
        for i in range(n):
            if l[i] == j:
                cand[cnt] = <int32_t> i
                cnt += 1
        if cnt == 0:
            continue
        p1 = cand[0]
        best = r[p1] - j
        for t in range(1, cnt):
            i = cand[t]
            if r[i] - j < best:
                p1 = i
                best = r[i] - j
        c1 = _content(words, p1, j)
        scnt = 0
        for t in range(cnt):
            i = cand[t]
            if i == p1:
                continue
            if _content(words, i, j) == c1:
                _xor_row(words, i, p1)
                lo = _scan_up(words, i, 2 * (j + 1), total_cols)
                if lo < 0:
                    return 1
                l[i] = lo >> 1
                r[i] = _scan_down(words, i, total_cols - 1) >> 1
            else:
                surv[scnt] = <int32_t> i
                scnt += 1
        if scnt > 0:
            p2 = surv[0]
            best = r[p2] - j
            for t in range(1, scnt):
                i = surv[t]
                if r[i] - j < best:
                    p2 = i
                    best = r[i] - j
            c2 = _content(words, p2, j)
            for t in range(scnt):
                i = surv[t]
                if i == p2:
                    continue
                if _content(words, i, j) != c2:
                    _xor_row(words, i, p1)
                _xor_row(words, i, p2)
                lo = _scan_up(words, i, 2 * (j + 1), total_cols)
                if lo < 0:
                    return 1
                l[i] = lo >> 1
                r[i] = _scan_down(words, i, total_cols - 1) >> 1

    # sweep 2: right endpoints, sites descending
    for j in range(<int> n - 1, -1, -1):
        cnt = 0
        for i in range(n):
            if r[i] == j:
                cand[cnt] = <int32_t> i
                cnt += 1
        if cnt == 0:
            continue
        p1 = cand[0]
        best = j - l[p1]
        for t in range(1, cnt):
            i = cand[t]
            if j - l[i] < best:
                p1 = i
                best = j - l[i]
        c1 = _content(words, p1, j)
        scnt = 0
        for t in range(cnt):
            i = cand[t]
            if i == p1:
                continue
            if _content(words, i, j) == c1:
                _xor_row(words, i, p1)
                r[i] = _scan_down(words, i, 2 * j - 1) >> 1
            else:
                surv[scnt] = <int32_t> i
                scnt += 1
        if scnt > 0:
            p2 = surv[0]
            best = j - l[p2]
            for t in range(1, scnt):
                i = surv[t]
                if j - l[i] < best:
                    p2 = i
                    best = j - l[i]
            c2 = _content(words, p2, j)
            for t in range(scnt):
                i = surv[t]
                if i == p2:
                    continue
                if _content(words, i, j) != c2:
                    _xor_row(words, i, p1)
                _xor_row(words, i, p2)
                r[i] = _scan_down(words, i, 2 * j - 1) >> 1
    return 0


def clip(uint64_t[:, ::1] words, int32_t[::1] l, int32_t[::1] r):
    """Canonical endpoint gauge, in place; fills l/r. 0 ok, 1 rank-deficient."""
    cdef Py_ssize_t n = words.shape[0]
    cdef int32_t[::1] cand = np.empty(n, dtype=np.int32)
    cdef int32_t[::1] surv = np.empty(n, dtype=np.int32)
    cdef int status
    with nogil:
        status = _clip_impl(words, l, r, cand, surv)
    return status


def left_block_residuals(uint64_t[:, ::1] words, int bond):
    """(rank of sites < bond, 16-bit mask of residual-row window nibbles)."""
    cdef Py_ssize_t n = words.shape[0]
    cdef Py_ssize_t w = words.shape[1]
    work_arr = np.array(np.asarray(words), dtype=np.uint64, order="C")
    cdef uint64_t[:, ::1] work = work_arr
    cdef int n_cols = 2 * bond
    cdef int rank = 0, col, nib_mask = 0, nib, sh
    cdef Py_ssize_t i, k, piv, wi
    cdef uint64_t mask, tmp
    cdef int c
    with nogil:
        for col in range(n_cols):
            wi = col >> 6
            mask = <uint64_t> 1 << (col & 63)
            piv = -1
            for i in range(rank, n):
                if work[i, wi] & mask:
                    piv = i
                    break
            if piv < 0:
                continue
            if piv != rank:
                for k in range(w):
                    tmp = work[piv, k]
                    work[piv, k] = work[rank, k]
                    work[rank, k] = tmp
            for i in range(rank + 1, n):
                if work[i, wi] & mask:
                    for k in range(w):
                        work[i, k] ^= work[rank, k]
            rank += 1
            if rank == <int> n:
                break
        c = 2 * bond
        wi = c >> 6
        sh = c & 63
        for i in range(rank, n):
            if sh <= 60:
                nib = <int> ((work[i, wi] >> sh) & 15)
            else:
                nib = <int> (((work[i, wi] >> 62) & 3) | ((work[i, wi + 1] & 3) << 2))
            nib_mask |= 1 << nib
    return rank, nib_mask


def profile_from_lr(int32_t[::1] l, int32_t[::1] r, int32_t[::1] profile):
    """Fill the crossing profile; returns its total, or -1 on odd crossings."""
    cdef Py_ssize_t n = l.shape[0]
    cdef Py_ssize_t i
    cdef int a, crossing = 0
    cdef long total = 0
    cdef int32_t[::1] delta = np.zeros(n + 1, dtype=np.int32)
    with nogil:
        for i in range(n):
            delta[l[i]] += 1
            delta[r[i]] -= 1
        for a in range(<int> n - 1):
            crossing += delta[a]
            if crossing & 1:
                total = -1
                break
            profile[a] = crossing >> 1
            total += crossing >> 1
    return total


cdef int _window_records_impl(uint64_t[:, ::1] words, int32_t[::1] l,
                              int32_t[::1] r, cnp.uint8_t[:, ::1] out) nogil:
    cdef Py_ssize_t n = words.shape[0]
    cdef Py_ssize_t i, k
    cdef int a, li, ri, flags, nib, entry, cnt, pos, c, sh, t
    cdef Py_ssize_t wi
    cdef int cand[4]
    cdef int ncand, dup, m
    for a in range(<int> n - 1):
        out[a, 0] = 0
        if a == 0:
            out[a, 0] |= 1
        if a == <int> n - 2:
            out[a, 0] |= 2
        out[a, 1] = 0
        for k in range(2, 6):
            out[a, k] = 0
    for i in range(n):
        li = l[i]
        ri = r[i]
        cand[0] = li - 1
        cand[1] = li
        cand[2] = ri - 1
        cand[3] = ri
        ncand = 0
        for m in range(4):
            a = cand[m]
            if a < 0 or a > <int> n - 2:
                continue
            dup = 0
            for t in range(ncand):
                if cand[t] == a:
                    dup = 1
                    break
            if dup:
                continue
            cand[ncand] = a
            ncand += 1
            flags = 0
            if li == a:
                flags |= 1
            elif li == a + 1:
                flags |= 2
            if ri == a:
                flags |= 4
            elif ri == a + 1:
                flags |= 8
            if flags == 0:
                continue
            c = 2 * a
            wi = c >> 6
            sh = c & 63
            if sh <= 60:
                nib = <int> ((words[i, wi] >> sh) & 15)
            else:
                nib = <int> (((words[i, wi] >> 62) & 3) | ((words[i, wi + 1] & 3) << 2))
            entry = (flags << 4) | nib
            cnt = out[a, 1]
            if cnt >= 4:
                return 1
            pos = 2
            while pos < 2 + cnt and out[a, pos] <= entry:
                pos += 1
            for k in range(2 + cnt, pos, -1):
                out[a, k] = out[a, k - 1]
            out[a, pos] = <cnp.uint8_t> entry
            out[a, 1] = <cnp.uint8_t> (cnt + 1)
    return 0


def window_records(uint64_t[:, ::1] words, int32_t[::1] l, int32_t[::1] r,
                   cnp.uint8_t[:, ::1] out):
    """Per-bond endpoint-row records: [boundary, count, sorted entries...]."""
    cdef int status
    with nogil:
        status = _window_records_impl(words, l, r, out)
    return status


def rank_prefix(uint64_t[:, ::1] words, int n_cols):
    """GF(2) rank of the submatrix formed by the first `n_cols` columns."""
    cdef Py_ssize_t n = words.shape[0]
    cdef Py_ssize_t wk = (n_cols + 63) // 64
    # explicit copy: elimination must never touch the caller's rows
    work_arr = np.array(np.asarray(words)[:, :wk], dtype=np.uint64, order="C")
    cdef uint64_t[:, ::1] work = work_arr
    cdef int tail = n_cols & 63
    cdef Py_ssize_t i, k, piv
    cdef int rank = 0, col
    cdef Py_ssize_t wi
    cdef uint64_t mask, tmp
    with nogil:
        if tail:
            for i in range(n):
                work[i, wk - 1] &= (<uint64_t> 1 << tail) - 1
        for col in range(n_cols):
            wi = col >> 6
            mask = <uint64_t> 1 << (col & 63)
            piv = -1
            for i in range(rank, n):
                if work[i, wi] & mask:
                    piv = i
                    break
            if piv < 0:
                continue
            if piv != rank:
                for k in range(wk):
                    tmp = work[piv, k]
                    work[piv, k] = work[rank, k]
                    work[rank, k] = tmp
            for i in range(rank + 1, n):
                if work[i, wi] & mask:
                    for k in range(wk):
                        work[i, k] ^= work[rank, k]
            rank += 1
            if rank == <int> n:
                break
    return rank
