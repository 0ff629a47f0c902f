"""Phaseless stabilizer tableaus and the two-qubit Clifford gate set.

A state on N qubits is an N x 2N binary matrix: row i is generator i, site j
owns the column pair (x_ij, z_ij). Pauli encoding per site: I=(0,0), Z=(0,1),
X=(1,0), Y=(1,1). Rows are stored packed into uint64 words (see `backend`);
`to_bits` / `from_bits` convert to the flat 0/1 picture.

Two-qubit gates are 4x4 binary symplectic matrices whose rows are the images
of the local generators, ordered (X1, X2, Z1, Z2). Applying a gate at bond a
maps each row's local vector (x_a, x_{a+1}, z_a, z_{a+1}) through the matrix
mod 2.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .backend import kernels

# symplectic form in the (X1, X2, Z1, Z2) basis
_J = np.array(
    [[0, 0, 1, 0],
     [0, 0, 0, 1],
     [1, 0, 0, 0],
     [0, 1, 0, 0]], dtype=np.uint8)


class TableauError(ValueError):
    """Invalid tableau construction or state."""


class RankDeficientError(TableauError):
    """Generator rows are linearly dependent over GF(2)."""


class Tableau:
    """Packed phaseless stabilizer tableau."""

    __slots__ = ("n_qubits", "words")

    def __init__(self, n_qubits: int, words: np.ndarray):
        self.n_qubits = n_qubits
        self.words = words

    def copy(self) -> "Tableau":
        return Tableau(self.n_qubits, self.words.copy())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Tableau)
            and self.n_qubits == other.n_qubits
            and bool(np.array_equal(self.words, other.words))
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Tableau(n_qubits={self.n_qubits})"

    def to_bits(self) -> np.ndarray:
        """Unpack to an (N, 2N) uint8 matrix of 0/1 entries."""
        n = self.n_qubits
        raw = np.unpackbits(
            self.words.view(np.uint8), axis=1, bitorder="little")
        return raw[:, : 2 * n]

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "Tableau":
        bits = np.asarray(bits, dtype=np.uint8)
        n, cols = bits.shape
        if cols != 2 * n:
            raise TableauError(f"expected shape (N, 2N), got {bits.shape}")
        w = kernels.n_words(n)
        padded = np.zeros((n, w * 8), dtype=np.uint8)
        packed = np.packbits(bits, axis=1, bitorder="little")
        padded[:, : packed.shape[1]] = packed
        return cls(n, np.ascontiguousarray(padded.view(np.uint64)))

    def validate(self) -> None:
        """Check the structural invariants; raise TableauError on violation."""
        n = self.n_qubits
        bits = self.to_bits()
        if not bits.any(axis=1).all():
            raise TableauError("all-zero generator row")
        x = bits[:, 0::2].astype(np.int64)
        z = bits[:, 1::2].astype(np.int64)
        sp = (x @ z.T + z @ x.T) % 2
        if sp.any():
            raise TableauError("generators do not all commute")
        if kernels.rank_prefix(self.words, 2 * n) != n:
            raise RankDeficientError("generator rows not independent")


class CliffordGate2:
    """Two-qubit gate as a 4x4 binary symplectic matrix (rows = images)."""

    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray):
        m = np.ascontiguousarray(np.asarray(matrix, dtype=np.uint8) & 1)
        if m.shape != (4, 4):
            raise ValueError(f"gate matrix must be 4x4, got {m.shape}")
        if not np.array_equal((m @ _J @ m.T) % 2, _J):
            raise ValueError("matrix does not preserve the symplectic form")
        m.setflags(write=False)
        self.matrix = m

    def __eq__(self, other) -> bool:
        return isinstance(other, CliffordGate2) and bool(
            np.array_equal(self.matrix, other.matrix))

    def __hash__(self) -> int:
        return hash(self.matrix.tobytes())

    def __repr__(self) -> str:
        return f"CliffordGate2({self.matrix.tolist()})"

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(4, dtype=np.uint8)))

    def inverse(self) -> "CliffordGate2":
        # symplectic inverse: J M^T J (J is its own inverse over GF(2))
        return CliffordGate2((_J @ self.matrix.T @ _J) % 2)

    def compose(self, other: "CliffordGate2") -> "CliffordGate2":
        """Gate equal to applying `self` first, then `other`."""
        return CliffordGate2((self.matrix @ other.matrix) % 2)

    def lut(self) -> np.ndarray:
        """16-entry nibble map in the packed (x_a, z_a, x_a1, z_a1) layout."""
        return matrix_to_lut(self.matrix)


def matrix_to_lut(matrix: np.ndarray) -> np.ndarray:
    lut = np.zeros(16, dtype=np.uint64)
    for nib in range(16):
        v = np.array(
            [nib & 1, (nib >> 2) & 1, (nib >> 1) & 1, (nib >> 3) & 1],
            dtype=np.uint8)
        nv = (v @ matrix) % 2
        lut[nib] = int(nv[0]) | int(nv[2]) << 1 | int(nv[1]) << 2 | int(nv[3]) << 3
    return lut


class GateSet:
    """All distinct two-qubit symplectic gates; index 0 is the identity."""

    __slots__ = ("matrices", "luts", "_index")

    def __init__(self, matrices: np.ndarray):
        self.matrices = np.ascontiguousarray(matrices, dtype=np.uint8)
        if len(self.matrices):
            self.luts = np.ascontiguousarray(
                np.stack([matrix_to_lut(m) for m in self.matrices]))
        else:
            self.luts = np.zeros((0, 16), dtype=np.uint64)
        self._index = {m.tobytes(): i for i, m in enumerate(self.matrices)}

    def __len__(self) -> int:
        return len(self.matrices)

    def __getitem__(self, i: int) -> CliffordGate2:
        return CliffordGate2(self.matrices[i])

    def index_of(self, gate: CliffordGate2) -> int:
        key = np.ascontiguousarray(gate.matrix).tobytes()
        if key not in self._index:
            raise KeyError("gate not in set")
        return self._index[key]

    def contains(self, matrix: np.ndarray) -> bool:
        m = np.ascontiguousarray(np.asarray(matrix, dtype=np.uint8))
        return m.tobytes() in self._index


@lru_cache(maxsize=1)
def enumerate_clifford_gates() -> GateSet:
    """Enumerate every 4x4 binary symplectic matrix.

    Brute force over all 2^16 binary matrices, keeping those with
    M J M^T = J. Ordering is lexicographic in the row-major bit string,
    except that the identity is moved to index 0.
    """
    idx = np.arange(1 << 16, dtype=np.uint32)
    bits = ((idx[:, None] >> (15 - np.arange(16))) & 1).astype(np.uint8)
    mats = bits.reshape(-1, 4, 4).astype(np.int64)
    t = np.einsum("nij,jk->nik", mats, _J.astype(np.int64)) % 2
    t = np.einsum("nik,nlk->nil", t, mats) % 2
    keep = (t == _J).all(axis=(1, 2))
    sympl = mats[keep].astype(np.uint8)
    eye = np.eye(4, dtype=np.uint8)
    id_pos = int(np.nonzero((sympl == eye).all(axis=(1, 2)))[0][0])
    order = [id_pos] + [i for i in range(len(sympl)) if i != id_pos]
    return GateSet(sympl[order])


def identity_gate() -> CliffordGate2:
    return CliffordGate2(np.eye(4, dtype=np.uint8))


def cnot_gate() -> CliffordGate2:
    """CNOT, control on the left site: X1->X1X2, X2->X2, Z1->Z1, Z2->Z1Z2."""
    return CliffordGate2(np.array(
        [[1, 1, 0, 0],
         [0, 1, 0, 0],
         [0, 0, 1, 0],
         [0, 0, 1, 1]], dtype=np.uint8))


def new_product_state(n_qubits: int) -> Tableau:
    """Tableau of |0...0>: row i is the single-site Z on site i."""
    if n_qubits < 2:
        raise TableauError(f"need at least 2 qubits, got {n_qubits}")
    words = np.zeros((n_qubits, kernels.n_words(n_qubits)), dtype=np.uint64)
    for i in range(n_qubits):
        c = 2 * i + 1
        words[i, c >> 6] = np.uint64(1) << np.uint64(c & 63)
    return Tableau(n_qubits, words)


def apply_gate(t: Tableau, g: CliffordGate2, bond: int) -> Tableau:
    """Apply `g` at `bond` (sites bond, bond+1); returns a new Tableau."""
    if not 0 <= bond <= t.n_qubits - 2:
        raise IndexError(f"bond {bond} out of range for N={t.n_qubits}")
    out = t.copy()
    kernels.apply_gate(out.words, bond, g.lut())
    return out


def apply_gate_inplace(t: Tableau, lut: np.ndarray, bond: int) -> None:
    kernels.apply_gate(t.words, bond, lut)


def sample_random_gate(gs: GateSet, rng: np.random.Generator) -> CliffordGate2:
    """Uniform draw from the gate set."""
    if len(gs) == 0:
        raise ValueError("empty gate set")
    return gs[int(rng.integers(len(gs)))]


def symplectic_product(row_a, row_b) -> int:
    """0 iff the two Pauli rows commute (site-major x,z bit layout)."""
    a = np.asarray(row_a, dtype=np.int64)
    b = np.asarray(row_b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("row length mismatch")
    return int((a[0::2] @ b[1::2] + a[1::2] @ b[0::2]) % 2)
