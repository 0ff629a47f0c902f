"""Stabilizer-circuit game: stochastic Clifford dynamics vs. disentangling
control strategies, with clipped-gauge entanglement bookkeeping, steady-state
analysis, and a wire protocol for external (learned) policies."""

from .backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
