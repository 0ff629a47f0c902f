"""Optimal disentangling gates via a window-key lookup table.

For a bond a, the rows holding an endpoint on site a or a+1 determine how
much entanglement a two-qubit gate there can remove. `window_key` packs those
rows (local Pauli content plus endpoint flags) into a canonical byte string;
`best_gate` memoizes, per key, the gate minimizing the post-gate bond
entanglement, found by brute force over the full gate set on a cache miss.

`classify_window` tags keys with one of 21 diagnostic endpoint-structure
classes (row archetypes: enter from the left and stop at a / at a+1, start at
a / at a+1 and leave right, single-site at a / at a+1, or contained on both).
The tag never influences gate selection.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from .backend import kernels
from .clipping import ClipMap
from .tableau import CliffordGate2, GateSet, Tableau, enumerate_clifford_gates

TABLE_FORMAT_HEADER = "stabgame-lookup-v1"


class LookupFormatError(ValueError):
    """Lookup-table file is malformed or has a mismatched format version."""


# endpoint-flag bits in a window-key entry byte (low nibble = local content)
_FLAG_L_AT_A = 1
_FLAG_L_AT_A1 = 2
_FLAG_R_AT_A = 4
_FLAG_R_AT_A1 = 8

# flag byte -> row archetype (see module docstring); used for classification
_ARCHETYPES = {
    _FLAG_R_AT_A: 1,                  # enters from the left, stops at a
    _FLAG_R_AT_A1: 2,                 # enters from the left, stops at a+1
    _FLAG_L_AT_A | _FLAG_R_AT_A: 3,   # single-site at a
    _FLAG_L_AT_A | _FLAG_R_AT_A1: 4,  # contained on (a, a+1)
    _FLAG_L_AT_A: 5,                  # starts at a, leaves right
    _FLAG_L_AT_A1 | _FLAG_R_AT_A1: 6,  # single-site at a+1
    _FLAG_L_AT_A1: 7,                 # starts at a+1, leaves right
}

# archetype multiset -> diagnostic label; starred = mirror image
_CLASS_LABELS = {
    (3, 6): "2.1",
    (4, 4): "2.2",
    (3, 7, 7): "3.1",
    (1, 1, 6): "3.1*",
    (2, 3, 7): "3.2",
    (1, 5, 6): "3.2*",
    (2, 2, 3): "3.3",
    (5, 5, 6): "3.3*",
    (4, 5, 7): "3.4",
    (1, 2, 4): "3.4*",
    (1, 4, 7): "3.5",
    (2, 4, 5): "3.6",
    (1, 1, 7, 7): "4.1",
    (1, 1, 2, 7): "4.2",
    (1, 5, 7, 7): "4.2*",
    (1, 2, 2, 5): "4.3",
    (2, 5, 5, 7): "4.3*",
    (1, 1, 2, 2): "4.4",
    (5, 5, 7, 7): "4.4*",
    (1, 2, 5, 7): "4.5",
    (2, 2, 5, 5): "4.6",
}

MINIMAL_CLASSES = frozenset(
    {"2.1", "3.1", "3.1*", "3.5", "4.1", "4.2", "4.2*", "4.4", "4.4*"})
SPECIAL_CLASSES = frozenset({"3.2", "3.2*"})


class LookupEntry:
    """Cached result for one window key."""

    __slots__ = ("gate_index", "delta_n", "class_label")

    def __init__(self, gate_index: int, delta_n: int, class_label: str):
        self.gate_index = gate_index
        self.delta_n = delta_n
        self.class_label = class_label

    def gate(self, gs: GateSet) -> CliffordGate2:
        return gs[self.gate_index]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LookupEntry)
            and self.gate_index == other.gate_index
            and self.delta_n == other.delta_n
            and self.class_label == other.class_label
        )

    def __repr__(self) -> str:
        return (f"LookupEntry(gate_index={self.gate_index}, "
                f"delta_n={self.delta_n}, class_label={self.class_label!r})")


def _local_nibble(words: np.ndarray, i: int, bond: int) -> int:
    c = 2 * bond
    wi, sh = c >> 6, c & 63
    if sh <= 60:
        return (int(words[i, wi]) >> sh) & 15
    return ((int(words[i, wi]) >> 62) & 3) | ((int(words[i, wi + 1]) & 3) << 2)


def window_key(t: Tableau, cm: ClipMap, bond: int) -> bytes:
    """Canonical key of the endpoint rows around `bond` (clipped gauge)."""
    n = t.n_qubits
    a1 = bond + 1
    l, r = cm.l, cm.r
    flags = ((l == bond) * _FLAG_L_AT_A | (l == a1) * _FLAG_L_AT_A1
             | (r == bond) * _FLAG_R_AT_A | (r == a1) * _FLAG_R_AT_A1)
    entries = sorted(
        (int(flags[i]) << 4) | _local_nibble(t.words, int(i), bond)
        for i in np.nonzero(flags)[0])
    boundary = (1 if bond == 0 else 0) | (2 if bond == n - 2 else 0)
    return bytes([boundary] + entries)


def classify_window(key: bytes) -> str:
    """Map a window key to its endpoint-structure class, or 'unclassified'."""
    kinds = []
    for byte in key[1:]:
        kind = _ARCHETYPES.get(byte >> 4)
        if kind is None:
            return "unclassified"
        kinds.append(kind)
    return _CLASS_LABELS.get(tuple(sorted(kinds)), "unclassified")


def bond_entanglement(cm: ClipMap, bond: int) -> int:
    """n(bond) read off the clip map (half the crossing count)."""
    return int(((cm.l <= bond) & (cm.r > bond)).sum()) // 2


class DisentanglerTable:
    """Window-key cache of optimal disentangling gates.

    Reads are plain dict lookups (safe to share); concurrent duplicate misses
    recompute the same deterministic entry, so last-write-wins is harmless.
    With `special_case=True`, a zero-gain key is additionally searched for a
    gate whose post-gate window collapses to a two-row structure; the default
    keeps the identity for zero-gain keys.
    """

    def __init__(self, gs: GateSet | None = None, special_case: bool = False,
                 track_hits: bool = False):
        self.gs = gs if gs is not None else enumerate_clifford_gates()
        self.special_case = special_case
        self.entries: dict[bytes, LookupEntry] = {}
        self.hits: Counter | None = Counter() if track_hits else None
        # 720 x 16 gate images of every local nibble, for the miss path
        self._lut_images = self.gs.luts.astype(np.int64)

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, key: bytes) -> LookupEntry | None:
        return self.entries.get(key)

    def best_gate(self, t: Tableau, cm: ClipMap, bond: int) -> LookupEntry:
        """Entry for the gate minimizing n(bond); computes and caches on miss.

        `t` must be in the clipped gauge described by `cm`.
        """
        key = window_key(t, cm, bond)
        if self.hits is not None:
            self.hits[key] += 1
        entry = self.entries.get(key)
        if entry is None:
            entry = self._compute(t, bond, key)
            self.entries[key] = entry
        return entry

    def entry_for_key(self, key: bytes, t: Tableau, bond: int) -> LookupEntry:
        if self.hits is not None:
            self.hits[key] += 1
        entry = self.entries.get(key)
        if entry is None:
            entry = self._compute(t, bond, key)
            self.entries[key] = entry
        return entry

    def scan_bonds(self, t: Tableau, cm: ClipMap,
                   rec: np.ndarray | None = None) -> list[LookupEntry]:
        """Entries for every bond at once (single kernel pass over the rows)."""
        n = t.n_qubits
        if rec is None:
            rec = np.empty((n - 1, 6), dtype=np.uint8)
        if kernels.window_records(t.words, cm.l, cm.r, rec) != 0:
            from .clipping import GaugeError
            raise GaugeError("window with more than four endpoint rows")
        rec_bytes = rec.tobytes()
        return [self.entry_for_key(record_key(rec_bytes, a), t, a)
                for a in range(n - 1)]

    def _compute(self, t: Tableau, bond: int, key: bytes) -> LookupEntry:
        best_idx, best_post, pre = brute_force_best(t, bond, self.gs,
                                                    self._lut_images)
        delta = pre - best_post
        if not 0 <= delta <= 2:
            raise AssertionError(f"gate gain {delta} outside 0..2")
        if delta == 0:
            best_idx = 0
            if self.special_case:
                alt = _special_case_gate(t, bond, self.gs, pre)
                if alt is not None:
                    best_idx = alt
        return LookupEntry(best_idx, delta, classify_window(key))


def record_key(rec_bytes: bytes, bond: int) -> bytes:
    """Window key for `bond` from a packed window-records buffer."""
    base = 6 * bond
    cnt = rec_bytes[base + 1]
    return rec_bytes[base:base + 1] + rec_bytes[base + 2:base + 2 + cnt]


# rank of the span of the site-a contents present in a 4-bit value set:
# 0 if only the zero content appears, 1 for a single nonzero content, 2 for
# two or more (distinct nonzero 2-bit vectors are independent)
_SPAN_RANK = np.zeros(16, dtype=np.int64)
for _m in range(16):
    _k = bin(_m & 0b1110).count("1")
    _SPAN_RANK[_m] = _k if _k < 2 else 2


def brute_force_best(t: Tableau, bond: int, gs: GateSet,
                     lut_images: np.ndarray | None = None) -> tuple[int, int, int]:
    """Scan every gate; return (gate index, minimal post n(bond), pre n(bond)).

    Factorizes the rank computation: the columns of sites left of the bond do
    not depend on the gate, so they are eliminated once; each gate then only
    remaps the residual rows' window nibbles, whose site-a span closes the
    rank. Ties prefer the identity, then the lowest gate index.
    """
    if lut_images is None:
        lut_images = gs.luts.astype(np.int64)
    r0, nib_mask = kernels.left_block_residuals(t.words, bond)
    present = [nib for nib in range(16) if (nib_mask >> nib) & 1]
    base = r0 - (bond + 1)
    if not present:
        return 0, base, base
    imgs = lut_images[:, present] & 3
    value_sets = np.bitwise_or.reduce(1 << imgs, axis=1)
    post = base + _SPAN_RANK[value_sets]
    best_idx = int(np.argmin(post))
    return best_idx, int(post[best_idx]), int(post[0])


def _special_case_gate(t: Tableau, bond: int, gs: GateSet, pre: int) -> int | None:
    """Lowest-index zero-gain gate whose post-state window has two rows."""
    n = t.n_qubits
    work = np.empty_like(t.words)
    l = np.empty(n, dtype=np.int32)
    r = np.empty(n, dtype=np.int32)
    for gi in range(len(gs)):
        work[:] = t.words
        kernels.apply_gate(work, bond, gs.luts[gi])
        kernels.clip(work, l, r)
        post = int(((l <= bond) & (r > bond)).sum()) // 2
        if post != pre:
            continue
        post_key = window_key(Tableau(n, work), ClipMap(l, r), bond)
        if len(post_key) - 1 == 2:
            return gi
    return None


def best_gate(t: Tableau, cm: ClipMap, bond: int, table: DisentanglerTable) -> LookupEntry:
    """Free-function form of `DisentanglerTable.best_gate`."""
    return table.best_gate(t, cm, bond)


def build_table(samples: int, n_qubits: int, rng: np.random.Generator,
                table: DisentanglerTable | None = None,
                gates_per_sample: int = 4) -> DisentanglerTable:
    """Populate a table by querying random bonds of a random circuit walk.

    Each sample applies `gates_per_sample` uniformly random gates at random
    bonds, re-clips, and queries `best_gate` at one random bond.
    """
    if samples < 0:
        raise ValueError("samples must be nonnegative")
    from .clipping import clip_inplace
    from .tableau import new_product_state

    if table is None:
        table = DisentanglerTable(track_hits=True)
    if samples == 0:
        return table
    t = new_product_state(n_qubits)
    cm = clip_inplace(t)
    for _ in range(samples):
        for _ in range(gates_per_sample):
            gi = int(rng.integers(len(table.gs)))
            b = int(rng.integers(n_qubits - 1))
            kernels.apply_gate(t.words, b, table.gs.luts[gi])
        cm = clip_inplace(t)
        table.best_gate(t, cm, int(rng.integers(n_qubits - 1)))
    return table


def save_table(table: DisentanglerTable, path) -> None:
    """Write the versioned line format: key hex, gate bits hex, gain, class."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(TABLE_FORMAT_HEADER + "\n")
        for key in sorted(table.entries):
            e = table.entries[key]
            bits = np.packbits(table.gs.matrices[e.gate_index].reshape(-1))
            gate_hex = f"{int(bits[0]) << 8 | int(bits[1]):04x}"
            fh.write(f"{key.hex()} {gate_hex} {e.delta_n} {e.class_label}\n")


def load_table(path, gs: GateSet | None = None,
               special_case: bool = False) -> DisentanglerTable:
    table = DisentanglerTable(gs, special_case=special_case)
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != TABLE_FORMAT_HEADER:
            raise LookupFormatError(
                f"expected header {TABLE_FORMAT_HEADER!r}, found {header!r}; "
                "rebuild the lookup table")
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if len(parts) != 4:
                raise LookupFormatError(f"line {lineno}: expected 4 fields")
            key_hex, gate_hex, delta_s, label = parts
            try:
                key = bytes.fromhex(key_hex)
                gate_bits = int(gate_hex, 16)
                delta = int(delta_s)
            except ValueError as exc:
                raise LookupFormatError(f"line {lineno}: {exc}") from exc
            matrix = ((gate_bits >> (15 - np.arange(16))) & 1).astype(
                np.uint8).reshape(4, 4)
            if not table.gs.contains(matrix):
                raise LookupFormatError(f"line {lineno}: not a valid gate")
            if not 0 <= delta <= 2:
                raise LookupFormatError(f"line {lineno}: gain out of range")
            table.entries[key] = LookupEntry(
                table.gs.index_of(CliffordGate2(matrix)), delta, label)
    return table
