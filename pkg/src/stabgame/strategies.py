"""Action-selection strategies: random, greedy, pyramid, and external.

A strategy picks the bond that receives the next disentangling gate. The
random strategy is state-blind and uniform over the N-1 bonds; greedy takes
the leftmost bond with the largest immediate entanglement reduction; pyramid
guards a fixed set of equidistant bottleneck bonds (plus neighbors, three
bonds per bottleneck); external forwards observations to a separate policy
process over a line-delimited JSON protocol (stdio).

Wire protocol (one JSON object per line, newline-terminated):
  handshake  ->  {"hello": {"n": <int>, "protocol": 1}}
             <-  {"ready": true}
  request    ->  {"turn": t, "n": N, "p": p, "q": q, "obs": [[...], ...]}
  response   <-  {"action": <int>}  or  {"dist": [<float>, ...]}
`dist` must have length N-1, nonnegative entries, and sum to 1 within 1e-6;
a reply violating the protocol (or arriving after the timeout) raises
StrategyError, which marks the trajectory failed.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import subprocess
import time
from dataclasses import dataclass, field

import numpy as np


class StrategyError(RuntimeError):
    """External policy misbehaved (timeout, malformed or invalid reply)."""


def random_policy(n_qubits: int) -> np.ndarray:
    """Uniform probability over the N-1 bonds."""
    if n_qubits < 2:
        raise ValueError("need at least 2 qubits")
    return np.full(n_qubits - 1, 1.0 / (n_qubits - 1))


def sample_distribution(dist: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(dist)
    return int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))


class RandomStrategy:
    """State-blind uniform placement (drawn from the trajectory stream)."""

    name = "random"
    transient_kind = "random"

    def select_action(self, env) -> int:
        return int(env.state.rng.integers(env.cfg.n_qubits - 1))


def greedy_action(env) -> int:
    """Leftmost bond whose best gate yields the maximal reduction."""
    entries = env.scan_entries()
    best_a = 0
    best_delta = entries[0].delta_n
    for a in range(1, len(entries)):
        if entries[a].delta_n > best_delta:
            best_delta = entries[a].delta_n
            best_a = a
    return best_a


class GreedyStrategy:
    name = "greedy"
    transient_kind = "greedy"

    def select_action(self, env) -> int:
        return greedy_action(env)


@dataclass
class PyramidConfig:
    """Equidistant bottleneck bonds; each guards itself plus both neighbors."""

    n_bottlenecks: int
    n_qubits: int
    bonds: tuple = field(init=False)
    window_bonds: tuple = field(init=False)

    def __post_init__(self):
        if self.n_bottlenecks < 1:
            raise ValueError("need at least one bottleneck")
        n, nb = self.n_qubits, self.n_bottlenecks
        # round-half-up keeps placement platform-independent
        bonds = tuple(
            int((k + 1) * (n - 1) / (nb + 1) + 0.5) for k in range(nb))
        if len(set(bonds)) != nb or any(
                not 0 <= b <= n - 2 for b in bonds) or list(bonds) != sorted(bonds):
            raise ValueError(
                f"{nb} bottlenecks do not fit on {n - 1} bonds: {bonds}")
        window = set()
        for b in bonds:
            window.update(a for a in (b - 1, b, b + 1) if 0 <= a <= n - 2)
        self.bonds = bonds
        self.window_bonds = tuple(sorted(window))


def pyramid_action(env, cfg: PyramidConfig) -> int:
    """Best reducible window bond (max gain, leftmost); else bottleneck 0."""
    entries = env.scan_entries()
    best_a = -1
    best_delta = 0
    for a in cfg.window_bonds:
        if entries[a].delta_n > best_delta:
            best_delta = entries[a].delta_n
            best_a = a
    action = best_a if best_a >= 0 else cfg.bonds[0]
    assert action in cfg.window_bonds
    return action


class PyramidStrategy:
    name = "pyramid"
    transient_kind = "greedy"

    def __init__(self, cfg: PyramidConfig):
        self.cfg = cfg

    def select_action(self, env) -> int:
        return pyramid_action(env, self.cfg)


class PolicySession:
    """One external policy process speaking the line-JSON protocol."""

    def __init__(self, cmd: str, n_qubits: int, p: float, q: float,
                 timeout_ms: int = 1000):
        self.n_qubits = n_qubits
        self.p = p
        self.q = q
        self.timeout_s = timeout_ms / 1000.0
        self._buf = b""
        self.proc = subprocess.Popen(
            shlex.split(cmd),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        self._send({"hello": {"n": n_qubits, "protocol": 1}})
        reply = self._recv()
        if reply.get("ready") is not True:
            self.close()
            raise StrategyError(f"bad handshake reply: {reply!r}")

    def _send(self, payload: dict) -> None:
        try:
            self.proc.stdin.write(json.dumps(payload).encode() + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise StrategyError(f"policy process not writable: {exc}") from exc

    def _recv(self) -> dict:
        fd = self.proc.stdout.fileno()
        deadline = time.monotonic() + self.timeout_s
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise StrategyError("policy reply timed out")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise StrategyError("policy reply timed out")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise StrategyError("policy closed its output pipe")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StrategyError(f"malformed policy reply: {line[:80]!r}") from exc
        if not isinstance(reply, dict):
            raise StrategyError("policy reply is not a JSON object")
        return reply

    def request(self, turn: int, obs: np.ndarray) -> dict:
        self._send({
            "turn": turn,
            "n": self.n_qubits,
            "p": self.p,
            "q": self.q,
            "obs": obs.tolist(),
        })
        return self._recv()

    def close(self) -> None:
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_policy_action(obs: np.ndarray, session: PolicySession, turn: int,
                           rng: np.random.Generator) -> int:
    """Query the policy; validate an explicit action or sample a distribution."""
    n_bonds = session.n_qubits - 1
    reply = session.request(turn, obs)
    if "action" in reply:
        action = reply["action"]
        if not isinstance(action, int) or not 0 <= action <= n_bonds - 1:
            raise StrategyError(f"action out of range: {action!r}")
        return action
    if "dist" in reply:
        dist = reply["dist"]
        if not isinstance(dist, list) or len(dist) != n_bonds:
            raise StrategyError(f"dist must have length {n_bonds}")
        arr = np.asarray(dist, dtype=float)
        if (arr < 0).any() or not np.isfinite(arr).all():
            raise StrategyError("dist entries must be finite and nonnegative")
        if abs(arr.sum() - 1.0) > 1e-6:
            raise StrategyError(f"dist sums to {arr.sum()}, not 1")
        return sample_distribution(arr, rng)
    raise StrategyError(f"reply carries neither action nor dist: {reply!r}")


class ExternalPolicyStrategy:
    """Strategy backed by a live PolicySession; owns exactly one trajectory."""

    name = "external"
    transient_kind = "external"

    def __init__(self, session: PolicySession):
        self.session = session
        self._last_obs = None

    def observe(self, obs: np.ndarray | None) -> None:
        self._last_obs = obs

    def select_action(self, env) -> int:
        if self._last_obs is None:
            raise StrategyError("no observation delivered to external policy")
        return external_policy_action(
            self._last_obs, self.session, env.state.turn, env.state.rng)


def make_strategy(kind: str, n_qubits: int, n_bottlenecks: int = 1,
                  policy_cmd: str | None = None, p: float = 0.0,
                  q: float = 1.0, timeout_ms: int = 1000):
    if kind == "random":
        return RandomStrategy()
    if kind == "greedy":
        return GreedyStrategy()
    if kind == "pyramid":
        return PyramidStrategy(PyramidConfig(n_bottlenecks, n_qubits))
    if kind == "external":
        if not policy_cmd:
            raise ValueError("external strategy needs policy_cmd")
        session = PolicySession(policy_cmd, n_qubits, p, q, timeout_ms)
        return ExternalPolicyStrategy(session)
    raise ValueError(f"unknown strategy kind {kind!r}")
