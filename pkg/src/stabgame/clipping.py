"""Canonical endpoint gauge and per-bond entanglement bookkeeping.

In the clipped gauge every site carries exactly two generator endpoints, and
the entanglement across bond a (the cut between sites a and a+1) is half the
number of generators whose support crosses the cut, in units of ln 2. The
independent check `oracle_entanglement` computes the same quantity from the
GF(2) rank of the left-restricted tableau and is used by tests only.
"""

from __future__ import annotations

import numpy as np

from .backend import kernels
from .tableau import RankDeficientError, Tableau


class GaugeError(RuntimeError):
    """Internal inconsistency in endpoint bookkeeping."""


class ClipMap:
    """Per-row leftmost (`l`) and rightmost (`r`) nontrivial sites."""

    __slots__ = ("l", "r")

    def __init__(self, l: np.ndarray, r: np.ndarray):
        self.l = l
        self.r = r

    def copy(self) -> "ClipMap":
        return ClipMap(self.l.copy(), self.r.copy())

    def endpoint_counts(self, n_qubits: int) -> np.ndarray:
        """Endpoints per site; exactly two everywhere in the clipped gauge."""
        counts = np.bincount(self.l, minlength=n_qubits)
        counts += np.bincount(self.r, minlength=n_qubits)
        return counts


def clip(t: Tableau) -> tuple[Tableau, ClipMap, np.ndarray]:
    """Clip a copy of `t`; returns (clipped tableau, clip map, profile).

    The output generates the same group (rows are GF(2) combinations of the
    input rows). Raises RankDeficientError if the rows are dependent.
    """
    out = t.copy()
    cm = clip_inplace(out)
    return out, cm, profile_from_clipmap(cm, t.n_qubits)


def clip_inplace(t: Tableau) -> ClipMap:
    n = t.n_qubits
    l = np.empty(n, dtype=np.int32)
    r = np.empty(n, dtype=np.int32)
    if kernels.clip(t.words, l, r) != 0:
        raise RankDeficientError("cannot clip a rank-deficient tableau")
    return ClipMap(l, r)


def profile_from_clipmap(cm: ClipMap, n_qubits: int) -> np.ndarray:
    """Entanglement profile n(a) = half the cut-crossing count, per bond.

    crossings(a) = #{rows with l <= a} - #{rows with r <= a}; an odd count
    means the map is not in the clipped gauge.
    """
    starts = np.cumsum(np.bincount(cm.l, minlength=n_qubits))
    ends = np.cumsum(np.bincount(cm.r, minlength=n_qubits))
    crossings = (starts - ends)[: n_qubits - 1]
    if (crossings & 1).any():
        raise GaugeError("odd crossing count; clip map is not a valid gauge")
    return (crossings // 2).astype(np.int32)


def max_profile(n_qubits: int) -> np.ndarray:
    """Upper bound min(a+1, N-1-a) on n(a), set by the bipartition sizes."""
    a = np.arange(n_qubits - 1)
    return np.minimum(a + 1, n_qubits - 1 - a).astype(np.int32)


def max_total_entanglement(n_bonds: int) -> int:
    """Area of the maximal profile over `n_bonds` bonds.

    floor(x/2)*(floor(x/2)+1) for even x, (floor(x/2)+1)^2 for odd x.
    """
    half = n_bonds // 2
    if n_bonds % 2 == 0:
        return half * (half + 1)
    return (half + 1) * (half + 1)


def oracle_entanglement(t: Tableau, bond: int) -> int:
    """Rank-based entanglement at `bond`: rank of sites 0..bond minus bond+1.

    Independent of the clipping path; test oracle.
    """
    if not 0 <= bond <= t.n_qubits - 2:
        raise IndexError(f"bond {bond} out of range for N={t.n_qubits}")
    n_cols = 2 * (bond + 1)
    return kernels.rank_prefix(t.words, n_cols) - (bond + 1)


def oracle_profile(t: Tableau) -> np.ndarray:
    return np.array(
        [oracle_entanglement(t, a) for a in range(t.n_qubits - 1)],
        dtype=np.int32)
