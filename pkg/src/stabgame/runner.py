"""Single-trajectory driving loops shared by analysis, sweeps, and frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import CircuitGameEnv, EnvConfig
from .tableau import GateSet
from .disentangler import DisentanglerTable, load_table

# Per-process shared lookup tables (read-mostly; entries are deterministic,
# so sharing never changes results, only skips recomputation).
_SHARED_TABLES: dict = {}


def shared_table(lookup_path=None) -> DisentanglerTable:
    key = str(lookup_path) if lookup_path else None
    table = _SHARED_TABLES.get(key)
    if table is None:
        table = load_table(lookup_path) if lookup_path else DisentanglerTable()
        _SHARED_TABLES[key] = table
    return table


@dataclass
class TurnRecord:
    turn: int
    action: int
    profile: np.ndarray
    s_tot: int
    observation: np.ndarray | None


def _deliver(strategy, obs) -> None:
    observe = getattr(strategy, "observe", None)
    if observe is not None:
        observe(obs)


def run_turns(env: CircuitGameEnv, strategy, n_turns: int,
              record: bool = False) -> list[TurnRecord]:
    """Advance `n_turns` turns; optionally keep per-turn records."""
    records: list[TurnRecord] = []
    if env.state is None:
        _, obs = env.reset()
        _deliver(strategy, obs)
    for _ in range(n_turns):
        action = strategy.select_action(env)
        st, outcome = env.step(action)
        _deliver(strategy, outcome.observation)
        if record:
            records.append(TurnRecord(
                st.turn, action, st.profile.copy(), st.s_tot,
                outcome.observation))
    return records


def run_sampling_trajectory(cfg: EnvConfig, strategy, transient: int,
                            spacing: int, n_samples: int,
                            gates: GateSet | None = None,
                            table: DisentanglerTable | None = None,
                            lookup_path=None) -> np.ndarray:
    """Burn `transient` turns, then record S_tot every `spacing` turns."""
    if table is None:
        table = shared_table(lookup_path)
    env = CircuitGameEnv(cfg, gates, table)
    _, obs = env.reset()
    _deliver(strategy, obs)
    run_turns(env, strategy, transient)
    out = np.empty(n_samples, dtype=np.int64)
    for k in range(n_samples):
        run_turns(env, strategy, spacing)
        out[k] = env.state.s_tot
    return out
