"""Turn-based control loop: disentangling action, stochastic gate burst,
reward, termination, and the partial-information observation channel.

One turn: apply the optimal disentangling gate at the chosen bond, score the
resulting total entanglement as reward = -S_tot / norm (in [-1, 0], 0 iff the
profile is identically zero), then let the stochastic dynamics fire a
geometric burst of uniformly random gates at uniformly random bonds --
P(n_random = k) = p (1-p)^k -- re-clip, and emit an observation in which each
tableau row survives independently with probability q (survivors encoded
+1/-1 per bit, dropped rows all-zero).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .clipping import (ClipMap, GaugeError, clip_inplace,
                       max_total_entanglement, profile_from_clipmap)
from .disentangler import DisentanglerTable, record_key
from .tableau import (GateSet, RankDeficientError, Tableau,
                      enumerate_clifford_gates, new_product_state)


class ConfigError(ValueError):
    """Invalid environment or sweep configuration."""


@dataclass
class EnvConfig:
    n_qubits: int
    p: float
    q: float = 1.0
    episode_length: int | None = None
    init_mode: str = "product"  # "product" | "random"
    init_depth: int = 0
    seed: int = 0
    # Skip materializing observations (mask is still drawn, so the random
    # stream is identical); used by state-based strategies in sweeps.
    emit_observations: bool = True

    def validate(self) -> None:
        if self.n_qubits < 2:
            raise ConfigError(f"n_qubits must be >= 2, got {self.n_qubits}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"p must lie in [0, 1], got {self.p}")
        if not 0.0 <= self.q <= 1.0:
            raise ConfigError(f"q must lie in [0, 1], got {self.q}")
        if self.init_mode not in ("product", "random"):
            raise ConfigError(f"unknown init_mode {self.init_mode!r}")
        if self.init_depth < 0:
            raise ConfigError("init_depth must be nonnegative")
        if self.episode_length is not None and self.episode_length <= 0:
            raise ConfigError("episode_length must be positive")


@dataclass
class EnvState:
    """Clipped tableau plus bookkeeping; `profile` always matches `tableau`."""

    tableau: Tableau
    clipmap: ClipMap
    profile: np.ndarray
    turn: int
    rng: np.random.Generator
    total: int = 0

    def copy(self) -> "EnvState":
        return EnvState(
            self.tableau.copy(), self.clipmap.copy(), self.profile.copy(),
            self.turn, copy.deepcopy(self.rng), self.total)

    @property
    def s_tot(self) -> int:
        return self.total


@dataclass
class StepOutcome:
    observation: np.ndarray | None
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def observe(t: Tableau, q: float, rng: np.random.Generator) -> np.ndarray:
    """Ternary observation: rows kept with probability q as +1/-1, else 0."""
    mask = rng.random(t.n_qubits) < q
    return materialize_observation(t, mask)


def materialize_observation(t: Tableau, mask: np.ndarray) -> np.ndarray:
    obs = t.to_bits().astype(np.int8)
    obs = obs * 2 - 1
    obs[~mask] = 0
    return obs


class CircuitGameEnv:
    """Environment owning one trajectory; `reset` then repeated `step`.

    The gate set and disentangler table may be shared across instances
    (read-mostly); each instance owns its state and random stream
    (counter-based, keyed by cfg.seed).
    """

    def __init__(self, cfg: EnvConfig, gates: GateSet | None = None,
                 table: DisentanglerTable | None = None):
        cfg.validate()
        self.cfg = cfg
        self.gs = gates if gates is not None else enumerate_clifford_gates()
        self.table = table if table is not None else DisentanglerTable(self.gs)
        self.norm = max_total_entanglement(cfg.n_qubits - 1)
        self.state: EnvState | None = None
        self._log1m_p = math.log1p(-cfg.p) if cfg.p < 1.0 else None
        self._rec = np.empty((cfg.n_qubits - 1, 6), dtype=np.uint8)

    def reset(self) -> tuple[EnvState, np.ndarray | None]:
        cfg = self.cfg
        rng = np.random.Generator(np.random.Philox(cfg.seed))
        t = new_product_state(cfg.n_qubits)
        if cfg.init_mode == "random" and cfg.init_depth > 0:
            gidx = rng.integers(0, len(self.gs), size=cfg.init_depth)
            bonds = rng.integers(0, cfg.n_qubits - 1, size=cfg.init_depth)
            kernels.apply_gate_sequence(t.words, self.gs.luts, gidx, bonds)
        cm = clip_inplace(t)
        profile = profile_from_clipmap(cm, cfg.n_qubits)
        self.state = EnvState(t, cm, profile, 0, rng, int(profile.sum()))
        obs = self._emit_observation()
        return self.state, obs

    def set_state(self, state: EnvState) -> None:
        self.state = state

    def scan_entries(self):
        """Lookup entries for every bond of the current (clipped) state."""
        st = self.state
        return self.table.scan_bonds(st.tableau, st.clipmap, self._rec)

    def step(self, action: int) -> tuple[EnvState, StepOutcome]:
        """One turn. Also runs the stochastic burst when already done,
        matching the uniform turn semantics; callers reset on `done`."""
        cfg = self.cfg
        st = self.state
        if st is None:
            raise RuntimeError("call reset() before step()")
        n = cfg.n_qubits
        if not 0 <= action <= n - 2:
            raise IndexError(f"action {action} out of range for N={n}")

        if kernels.window_records(st.tableau.words, st.clipmap.l,
                                  st.clipmap.r, self._rec) != 0:
            raise GaugeError("window with more than four endpoint rows")
        key = record_key(self._rec[action].tobytes(), 0)
        entry = self.table.entry_for_key(key, st.tableau, action)
        kernels.apply_gate(st.tableau.words, action, self.gs.luts[entry.gate_index])
        st.profile[action] -= entry.delta_n
        st.total -= entry.delta_n

        reward = -st.total / self.norm
        done_zero = st.total == 0

        n_random = self._draw_burst_length(st.rng)
        if n_random:
            gidx = st.rng.integers(0, len(self.gs), size=n_random)
            bonds = st.rng.integers(0, n - 1, size=n_random)
            kernels.apply_gate_sequence(st.tableau.words, self.gs.luts, gidx, bonds)

        if kernels.clip(st.tableau.words, st.clipmap.l, st.clipmap.r) != 0:
            raise RankDeficientError("state lost rank during a turn")
        total = kernels.profile_from_lr(st.clipmap.l, st.clipmap.r, st.profile)
        if total < 0:
            raise GaugeError("odd crossing count after re-clip")
        st.total = int(total)
        st.turn += 1

        done_limit = (cfg.episode_length is not None
                      and st.turn >= cfg.episode_length)
        obs = self._emit_observation()
        outcome = StepOutcome(
            observation=obs,
            reward=reward,
            done=done_zero or done_limit,
            info={
                "n_random_gates": int(n_random),
                "delta_n": entry.delta_n,
                "action": action,
                "reason": ("zero_profile" if done_zero
                           else "turn_limit" if done_limit else None),
            },
        )
        return st, outcome

    def _draw_burst_length(self, rng: np.random.Generator) -> int:
        # inverse-transform geometric: P(k) = p (1-p)^k, k = 0, 1, 2, ...
        u = 1.0 - rng.random()
        if self._log1m_p is None:
            return 0
        if self.cfg.p == 0.0:
            raise ConfigError("p = 0 never terminates the gate burst")
        return int(math.log(u) / self._log1m_p)

    def _emit_observation(self) -> np.ndarray | None:
        st = self.state
        mask = st.rng.random(self.cfg.n_qubits) < self.cfg.q
        if not self.cfg.emit_observations:
            return None
        return materialize_observation(st.tableau, mask)
