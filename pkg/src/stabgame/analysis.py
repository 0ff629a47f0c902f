"""Steady-state estimation, Binder cumulants, bottleneck-model reference
curves, and Bell-pair targeting statistics."""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .clipping import max_total_entanglement
from .environment import EnvConfig
from .runner import TurnRecord, run_sampling_trajectory
from .strategies import make_strategy

_TRANSIENT_COEFF = {"random": 0.2, "greedy": 0.04, "pyramid": 0.04,
                    "external": 0.04}


def transient_turns_default(kind: str, n_qubits: int) -> int:
    """Turns to discard before sampling: 0.2 N^3 for the random strategy,
    0.04 N^3 for informed ones (0.02 N^3 at N = 128)."""
    if kind not in _TRANSIENT_COEFF:
        raise ValueError(f"unknown strategy kind {kind!r}")
    coeff = _TRANSIENT_COEFF[kind]
    if kind != "random" and n_qubits == 128:
        coeff = 0.02
    return math.ceil(coeff * n_qubits**3)


def detect_steady_state(series, window: int) -> int:
    """First turn where the windowed relative deviation stops decreasing.

    Criterion c(t) = mean(series[t : t+window]) / series[t] - 1; returns the
    first index attaining the global minimum of c (no later value is lower).
    Diagnostic helper; production sweeps use the fixed transient formulas.
    """
    s = np.asarray(series, dtype=float)
    if len(s) <= window:
        raise ValueError("series must be longer than the window")
    m = len(s) - window
    csum = np.concatenate(([0.0], np.cumsum(s)))
    means = (csum[window:window + m] - csum[:m]) / window
    with np.errstate(divide="ignore", invalid="ignore"):
        crit = means / s[:m] - 1.0
    crit[(s[:m] == 0) & (means == 0)] = 0.0
    crit[(s[:m] == 0) & (means != 0)] = np.inf
    return int(np.argmin(crit))


@dataclass
class EnsembleSpec:
    n_realizations: int = 2000
    samples_per_realization: int = 10
    sample_spacing: int | None = None   # default 10 * N
    transient_turns: int | None = None  # default per-strategy formula

    def validate(self) -> None:
        if self.n_realizations <= 0 or self.samples_per_realization <= 0:
            raise ValueError("realizations and samples must be positive")
        if self.sample_spacing is not None and self.sample_spacing <= 0:
            raise ValueError("sample_spacing must be positive")
        if self.transient_turns is not None and self.transient_turns < 0:
            raise ValueError("transient_turns must be nonnegative")


@dataclass
class SteadyStateEstimate:
    mean: float
    stderr: float
    samples: np.ndarray          # normalized S_tot, one entry per sample
    s_tot_samples: np.ndarray    # raw integer S_tot
    seeds: list = field(default_factory=list)


def summarize_samples(s_tot_samples: np.ndarray, norm: int,
                      seeds=None) -> SteadyStateEstimate:
    """Mean and standard error from integer sums (schedule-independent)."""
    s = np.asarray(s_tot_samples, dtype=np.int64)
    cnt = len(s)
    tot = int(s.sum())
    tot2 = int((s.astype(object) ** 2).sum())
    mean = tot / (cnt * norm)
    if cnt > 1:
        var_int = (tot2 - tot * tot / cnt) / (cnt - 1)
        stderr = math.sqrt(max(var_int, 0.0) / cnt) / norm
    else:
        stderr = float("nan")
    return SteadyStateEstimate(
        mean=mean, stderr=stderr, samples=s / norm, s_tot_samples=s,
        seeds=list(seeds) if seeds is not None else [])


def _realization_args(cfg: EnvConfig, strategy_spec: dict, spec: EnsembleSpec):
    kind = strategy_spec["kind"]
    transient = (spec.transient_turns if spec.transient_turns is not None
                 else transient_turns_default(kind, cfg.n_qubits))
    spacing = (spec.sample_spacing if spec.sample_spacing is not None
               else 10 * cfg.n_qubits)
    for i in range(spec.n_realizations):
        seed = cfg.seed ^ i
        yield (cfg, strategy_spec, seed, transient, spacing,
               spec.samples_per_realization)


def _run_realization(args):
    cfg, strategy_spec, seed, transient, spacing, n_samples = args
    run_cfg = EnvConfig(
        n_qubits=cfg.n_qubits, p=cfg.p, q=cfg.q,
        episode_length=None, init_mode=cfg.init_mode,
        init_depth=cfg.init_depth, seed=seed,
        emit_observations=strategy_spec["kind"] == "external")
    strategy = make_strategy(
        strategy_spec["kind"], cfg.n_qubits,
        n_bottlenecks=strategy_spec.get("n_bottlenecks", 1),
        policy_cmd=strategy_spec.get("policy_cmd"),
        p=cfg.p, q=cfg.q,
        timeout_ms=strategy_spec.get("timeout_ms", 1000))
    try:
        samples = run_sampling_trajectory(
            run_cfg, strategy, transient, spacing, n_samples)
    finally:
        close = getattr(getattr(strategy, "session", None), "close", None)
        if close is not None:
            close()
    return seed, samples


def ensemble_estimate(cfg: EnvConfig, strategy, spec: EnsembleSpec,
                      workers: int = 1) -> SteadyStateEstimate:
    """Independent trajectories -> steady-state mean of normalized S_tot.

    `strategy` is a kind string ("random", "greedy", "pyramid", "external")
    or a spec dict with that kind plus options. Realization i runs with seed
    cfg.seed ^ i; samples are S_tot values `sample_spacing` turns apart after
    the transient.
    """
    cfg.validate()
    spec.validate()
    strategy_spec = {"kind": strategy} if isinstance(strategy, str) else dict(strategy)
    args = list(_realization_args(cfg, strategy_spec, spec))
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_run_realization, args, chunksize=1)
    else:
        results = [_run_realization(a) for a in args]
    seeds = [seed for seed, _ in results]
    samples = np.concatenate([s for _, s in results])
    return summarize_samples(
        samples, max_total_entanglement(cfg.n_qubits - 1), seeds)


def binder_cumulant(samples) -> float:
    """U = 1 - <x^4> / (3 <x^2>^2) with plain raw sample moments."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples")
    m2 = float(np.mean(x**2))
    m4 = float(np.mean(x**4))
    if m2 == 0.0:
        return float("nan")
    return 1.0 - m4 / (3.0 * m2 * m2)


@dataclass
class CrossingEstimate:
    p: float
    n_crossings: int
    multiple: bool   # warning flag: more than one sign change


def binder_crossing(p_grid, curve_a, curve_b) -> CrossingEstimate:
    """Leftmost zero of curve_a - curve_b by linear interpolation."""
    p = np.asarray(p_grid, dtype=float)
    d = np.asarray(curve_a, dtype=float) - np.asarray(curve_b, dtype=float)
    if len(p) != len(d) or len(p) < 2:
        raise ValueError("curves must share a p grid of length >= 2")
    if not d.any():
        raise ValueError("identical curves: no unique crossing")
    crossings = []
    for i in range(len(p) - 1):
        if d[i] == 0.0:
            crossings.append(float(p[i]))
        elif d[i] * d[i + 1] < 0.0:
            crossings.append(
                float(p[i] - d[i] * (p[i + 1] - p[i]) / (d[i + 1] - d[i])))
    if d[-1] == 0.0:
        crossings.append(float(p[-1]))
    if not crossings:
        raise ValueError("curves do not cross on the given grid")
    return CrossingEstimate(crossings[0], len(crossings), len(crossings) > 1)


def bottleneck_model(p: float, n_qubits: int) -> tuple[float, float]:
    """(sustainable bottleneck count p N / (1-p), predicted S_tot / norm)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    n_b = p * n_qubits / (1.0 - p)
    return n_b, 1.0 / (n_b + 1.0)


@dataclass
class BellPairStats:
    observed: np.ndarray   # per-bond count of observed isolated pairs
    targeted: np.ndarray   # per-bond count of pairs acted on when observed
    ratio: np.ndarray      # targeted / observed (nan where never observed)

    @property
    def total_ratio(self) -> float:
        tot = self.observed.sum()
        return float(self.targeted.sum() / tot) if tot else float("nan")


def bell_like_bonds(profile) -> list[int]:
    """Bonds with an isolated unit of entanglement: n(a)=1, neighbors 0."""
    nb = len(profile)
    out = []
    for a in range(nb):
        if profile[a] != 1:
            continue
        if a > 0 and profile[a - 1] != 0:
            continue
        if a < nb - 1 and profile[a + 1] != 0:
            continue
        out.append(a)
    return out


def bell_pair_stats(records: list[TurnRecord], n_qubits: int) -> BellPairStats:
    """Per-bond counts of observed and targeted isolated pairs.

    A pair at bond a counts as observed on a turn when at least one surviving
    observation row is supported exactly on sites {a, a+1}; it counts as
    targeted when, in addition, that turn's action was a.
    """
    nb = n_qubits - 1
    observed = np.zeros(nb, dtype=np.int64)
    targeted = np.zeros(nb, dtype=np.int64)
    for rec in records:
        bonds = bell_like_bonds(rec.profile)
        if not bonds or rec.observation is None:
            continue
        rows = rec.observation
        kept = rows.any(axis=1)
        if not kept.any():
            continue
        support = (rows[kept].reshape(kept.sum(), n_qubits, 2) == 1).any(axis=2)
        n_sites = support.sum(axis=1)
        for a in bonds:
            pair_rows = support[:, a] & support[:, a + 1] & (n_sites == 2)
            if pair_rows.any():
                observed[a] += 1
                if rec.action == a:
                    targeted[a] += 1
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(observed > 0, targeted / observed, np.nan)
    return BellPairStats(observed, targeted, ratio)
