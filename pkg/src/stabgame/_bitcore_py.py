"""Pure-Python bit-kernel backend.

Reference implementation of the packed-tableau kernels. The compiled
extension (`stabgame._bitcore`) mirrors these functions exactly; backend
parity is enforced by tests. Rows are machine-word bit vectors: row i of an
n-qubit tableau occupies ``words[i, :]`` (uint64, little-endian bit order),
with site-major columns -- site j owns bits 2j (x) and 2j+1 (z).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def n_words(n_qubits: int) -> int:
    return (2 * n_qubits + 63) // 64


def _content(words, i, j):
    # 2-bit Pauli content of row i at site j; never straddles a word.
    c = 2 * j
    return (int(words[i, c >> 6]) >> (c & 63)) & 3


def _scan_up(words, i, start_col, total_cols):
    # lowest set bit at column >= start_col, or -1
    w = words.shape[1]
    wi = start_col >> 6
    off = start_col & 63
    for k in range(wi, w):
        word = int(words[i, k])
        if k == wi and off:
            word &= ~((1 << off) - 1)
        if word:
            col = (k << 6) + (word & -word).bit_length() - 1
            return col if col < total_cols else -1
    return -1


def _scan_down(words, i, start_col):
    # highest set bit at column <= start_col, or -1
    wi = start_col >> 6
    off = start_col & 63
    for k in range(wi, -1, -1):
        word = int(words[i, k])
        if k == wi and off < 63:
            word &= (1 << (off + 1)) - 1
        if word:
            return (k << 6) + word.bit_length() - 1
    return -1


def apply_gate(words: np.ndarray, bond: int, lut: np.ndarray) -> None:
    """Apply a two-qubit gate (as a 16-entry nibble LUT) at `bond`, in place."""
    off = 2 * bond
    wi = off >> 6
    sh = off & 63
    if sh <= 60:
        v = (words[:, wi] >> np.uint64(sh)) & np.uint64(15)
        nv = lut[v]
        words[:, wi] ^= (v ^ nv) << np.uint64(sh)
    else:
        # nibble straddles a word boundary (sh == 62)
        lo = (words[:, wi] >> np.uint64(62)) & np.uint64(3)
        hi = words[:, wi + 1] & np.uint64(3)
        v = lo | (hi << np.uint64(2))
        nv = lut[v]
        words[:, wi] ^= (lo ^ (nv & np.uint64(3))) << np.uint64(62)
        words[:, wi + 1] ^= hi ^ (nv >> np.uint64(2))


def apply_gate_sequence(words, luts, gate_indices, bonds) -> None:
    for g, b in zip(gate_indices, bonds):
        apply_gate(words, int(b), luts[int(g)])


def clip(words: np.ndarray, l: np.ndarray, r: np.ndarray) -> int:
    """Bring the tableau to the canonical endpoint gauge, in place.

    Fills `l`/`r` with per-row leftmost/rightmost nontrivial sites. Returns 0
    on success, 1 if the rows are rank-deficient (a row reduced to zero).

    Two sweeps: left-to-right fixes left endpoints (at most two rows may start
    on a site, with independent local content); right-to-left does the same
    for right endpoints. Sweep 2 always folds the kept (larger-l, shorter)
    pivot into the smaller-l row so sweep-1 structure survives.
    """
    n = words.shape[0]
    total_cols = 2 * n

    for i in range(n):
        lo = _scan_up(words, i, 0, total_cols)
        if lo < 0:
            return 1
        l[i] = lo >> 1
        r[i] = _scan_down(words, i, total_cols - 1) >> 1

    # sweep 1: left endpoints, sites ascending
    for j in range(n):
        cand = [i for i in range(n) if l[i] == j]
        if not cand:
            continue
        p1 = min(cand, key=lambda i: (r[i] - j, i))
        c1 = _content(words, p1, j)
        survivors = []
        for i in cand:
            if i == p1:
                continue
            if _content(words, i, j) == c1:
                words[i] ^= words[p1]
                if _reseat_left(words, i, j, l, r, total_cols):
                    return 1
            else:
                survivors.append(i)
        if survivors:
            p2 = min(survivors, key=lambda i: (r[i] - j, i))
            c2 = _content(words, p2, j)
            for i in survivors:
                if i == p2:
                    continue
                if _content(words, i, j) != c2:
                    words[i] ^= words[p1]
                words[i] ^= words[p2]
                if _reseat_left(words, i, j, l, r, total_cols):
                    return 1

    # sweep 2: right endpoints, sites descending
    for j in range(n - 1, -1, -1):
        cand = [i for i in range(n) if r[i] == j]
        if not cand:
            continue
        p1 = min(cand, key=lambda i: (j - l[i], i))
        c1 = _content(words, p1, j)
        survivors = []
        for i in cand:
            if i == p1:
                continue
            if _content(words, i, j) == c1:
                words[i] ^= words[p1]
                r[i] = _scan_down(words, i, 2 * j - 1) >> 1
            else:
                survivors.append(i)
        if survivors:
            p2 = min(survivors, key=lambda i: (j - l[i], i))
            c2 = _content(words, p2, j)
            for i in survivors:
                if i == p2:
                    continue
                if _content(words, i, j) != c2:
                    words[i] ^= words[p1]
                words[i] ^= words[p2]
                r[i] = _scan_down(words, i, 2 * j - 1) >> 1
    return 0


def _reseat_left(words, i, j, l, r, total_cols):
    lo = _scan_up(words, i, 2 * (j + 1), total_cols)
    if lo < 0:
        return True
    l[i] = lo >> 1
    r[i] = _scan_down(words, i, total_cols - 1) >> 1
    return False


def left_block_residuals(words: np.ndarray, bond: int) -> tuple[int, int]:
    """Eliminate the columns of sites < bond; summarize what remains.

    Returns (r0, mask): r0 is the GF(2) rank of the left block, and mask is a
    16-bit set of the (x_a, z_a, x_a1, z_a1) nibbles found on the residual
    (non-pivot) rows. Together with a gate's nibble map these determine the
    post-gate entanglement at `bond`: rank0 + rank{site-a part of mapped
    nibbles} - (bond + 1).
    """
    n, w = words.shape
    work = words.copy()
    n_cols = 2 * bond
    rank = 0
    for col in range(n_cols):
        wi = col >> 6
        mask = np.uint64(1 << (col & 63))
        pivot = -1
        for ri in range(rank, n):
            if work[ri, wi] & mask:
                pivot = ri
                break
        if pivot < 0:
            continue
        if pivot != rank:
            work[[pivot, rank]] = work[[rank, pivot]]
        for ri in range(rank + 1, n):
            if work[ri, wi] & mask:
                work[ri] ^= work[rank]
        rank += 1
        if rank == n:
            break
    nib_mask = 0
    c = 2 * bond
    wi, sh = c >> 6, c & 63
    for ri in range(rank, n):
        if sh <= 60:
            nib = (int(work[ri, wi]) >> sh) & 15
        else:
            nib = ((int(work[ri, wi]) >> 62) & 3) | ((int(work[ri, wi + 1]) & 3) << 2)
        nib_mask |= 1 << nib
    return rank, nib_mask


def profile_from_lr(l, r, profile) -> int:
    """Fill the per-bond crossing profile from endpoint arrays.

    Returns the total (sum of the profile), or -1 on an odd crossing count.
    """
    n = len(l)
    delta = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        delta[l[i]] += 1
        delta[r[i]] -= 1
    crossing = 0
    total = 0
    for a in range(n - 1):
        crossing += int(delta[a])
        if crossing & 1:
            return -1
        profile[a] = crossing >> 1
        total += crossing >> 1
    return total


def window_records(words, l, r, out) -> int:
    """Per-bond endpoint-row records for window keys.

    ``out`` is an (n-1, 6) uint8 array; row a becomes
    [boundary_flags, count, entry_0, ..., entry_{count-1}] with entries
    sorted ascending and zero-padded. Entry byte = endpoint flags << 4 |
    local content nibble. Returns 0, or 1 if some bond collects more than
    four endpoint rows (not a valid clipped gauge).
    """
    n = words.shape[0]
    out[:] = 0
    for a in range(n - 1):
        out[a, 0] = (1 if a == 0 else 0) | (2 if a == n - 2 else 0)
    for i in range(n):
        li, ri = int(l[i]), int(r[i])
        bonds = {li - 1, li, ri - 1, ri}
        for a in bonds:
            if a < 0 or a > n - 2:
                continue
            flags = 0
            if li == a:
                flags |= 1
            elif li == a + 1:
                flags |= 2
            if ri == a:
                flags |= 4
            elif ri == a + 1:
                flags |= 8
            if not flags:
                continue
            c = 2 * a
            wi, sh = c >> 6, c & 63
            if sh <= 60:
                nib = (int(words[i, wi]) >> sh) & 15
            else:
                nib = ((int(words[i, wi]) >> 62) & 3) | ((int(words[i, wi + 1]) & 3) << 2)
            entry = (flags << 4) | nib
            cnt = int(out[a, 1])
            if cnt >= 4:
                return 1
            pos = 2
            while pos < 2 + cnt and out[a, pos] <= entry:
                pos += 1
            for k in range(2 + cnt, pos, -1):
                out[a, k] = out[a, k - 1]
            out[a, pos] = entry
            out[a, 1] = cnt + 1
    return 0


def rank_prefix(words: np.ndarray, n_cols: int) -> int:
    """GF(2) rank of the submatrix formed by the first `n_cols` columns."""
    n, w = words.shape
    wk = (n_cols + 63) // 64
    work = words[:, :wk].copy()
    tail = n_cols & 63
    if tail:
        work[:, wk - 1] &= np.uint64((1 << tail) - 1)
    rank = 0
    for col in range(n_cols):
        wi = col >> 6
        mask = np.uint64(1 << (col & 63))
        pivot = -1
        for ri in range(rank, n):
            if work[ri, wi] & mask:
                pivot = ri
                break
        if pivot < 0:
            continue
        if pivot != rank:
            work[[pivot, rank]] = work[[rank, pivot]]
        for ri in range(rank + 1, n):
            if work[ri, wi] & mask:
                work[ri] ^= work[rank]
        rank += 1
        if rank == n:
            break
    return rank
