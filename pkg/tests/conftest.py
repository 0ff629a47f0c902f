import numpy as np
import pytest

from stabgame.clipping import clip
from stabgame.disentangler import DisentanglerTable
from stabgame.tableau import (apply_gate_inplace, enumerate_clifford_gates,
                              new_product_state, sample_random_gate)


@pytest.fixture(scope="session")
def gate_set():
    return enumerate_clifford_gates()


@pytest.fixture(scope="session")
def table(gate_set):
    return DisentanglerTable(gate_set)


def make_random_state(n, n_gates, rng, gs=None):
    """Product state scrambled by uniformly random two-qubit gates."""
    gs = gs or enumerate_clifford_gates()
    t = new_product_state(n)
    for _ in range(n_gates):
        g = sample_random_gate(gs, rng)
        apply_gate_inplace(t, g.lut(), int(rng.integers(n - 1)))
    return t


def make_clipped_state(n, n_gates, rng, gs=None):
    t = make_random_state(n, n_gates, rng, gs)
    return clip(t)


def bell_pair_state(n, bond):
    """Product chain with an XX/ZZ-stabilized pair on (bond, bond+1)."""
    bits = np.zeros((n, 2 * n), dtype=np.uint8)
    for i in range(n):
        if i == bond:
            bits[i, 2 * bond] = 1
            bits[i, 2 * (bond + 1)] = 1
        elif i == bond + 1:
            bits[i, 2 * bond + 1] = 1
            bits[i, 2 * (bond + 1) + 1] = 1
        else:
            bits[i, 2 * i + 1] = 1
    from stabgame.tableau import Tableau
    return Tableau.from_bits(bits)
