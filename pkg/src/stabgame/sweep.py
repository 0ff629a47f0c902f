"""Sweep configuration, parallel cell execution, and result persistence.

A sweep covers the grid (p, N, q) for one strategy. Each grid cell produces
one CSV of sample rows plus an entry in ``manifest.json``; completed cells
are skipped on re-run, so interrupted sweeps resume cleanly. With a fixed
base seed every output byte except the wall-time column is reproducible:
trajectory i of cell c runs with seed = base_seed XOR (c * realizations + i).

Config file: YAML, key/value plus lists, with ``config_version: 1``. Keys:
p, n_qubits, q (scalars or lists); strategy; realizations; and optional
samples_per_realization, sample_spacing, transient_turns, n_bottlenecks,
policy_cmd, policy_timeout_ms, init_mode, init_depth, seed, workers, out_dir.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import multiprocessing
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import transient_turns_default
from .clipping import max_total_entanglement
from .environment import ConfigError, EnvConfig
from .runner import run_sampling_trajectory
from .strategies import StrategyError, make_strategy
from .tableau import enumerate_clifford_gates

CONFIG_VERSION = 1
MANIFEST_NAME = "manifest.json"
CSV_COLUMNS = ("p", "n_qubits", "q", "strategy", "seed", "sample_turn",
               "s_tot", "s_tot_normalized", "wall_time_s")


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class SweepConfig:
    p_grid: list
    n_grid: list
    q_grid: list
    strategy: str
    realizations: int
    samples_per_realization: int = 10
    sample_spacing: int | None = None
    transient_turns: int | None = None
    n_bottlenecks: int = 1
    policy_cmd: str | None = None
    policy_timeout_ms: int = 1000
    init_mode: str = "product"
    init_depth: int = 0
    seed: int = 0
    workers: int = 1
    out_dir: str = "results"
    # warm-start cache only; results never depend on it
    lookup_path: str | None = None

    def validate(self) -> None:
        if not self.p_grid or not self.n_grid or not self.q_grid:
            raise ConfigError("p, n_qubits, and q grids must be nonempty")
        for p in self.p_grid:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"p={p} outside [0, 1]")
        for q in self.q_grid:
            if not 0.0 <= q <= 1.0:
                raise ConfigError(f"q={q} outside [0, 1]")
        for n in self.n_grid:
            if n < 4 or n % 2:
                raise ConfigError(
                    f"n_qubits={n}: sweeps need even N >= 4 (odd bond count)")
        if self.strategy not in ("random", "greedy", "pyramid", "external"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "external" and not self.policy_cmd:
            raise ConfigError("external strategy requires policy_cmd")
        if self.realizations <= 0 or self.samples_per_realization <= 0:
            raise ConfigError("realizations and samples must be positive")

    @classmethod
    def from_file(cls, path) -> "SweepConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        version = raw.pop("config_version", None)
        if version != CONFIG_VERSION:
            raise ConfigError(
                f"config_version must be {CONFIG_VERSION}, got {version!r}")
        known = {
            "p": ("p_grid", _as_list), "n_qubits": ("n_grid", _as_list),
            "q": ("q_grid", _as_list), "strategy": ("strategy", str),
            "realizations": ("realizations", int),
            "samples_per_realization": ("samples_per_realization", int),
            "sample_spacing": ("sample_spacing", lambda v: v),
            "transient_turns": ("transient_turns", lambda v: v),
            "n_bottlenecks": ("n_bottlenecks", int),
            "policy_cmd": ("policy_cmd", lambda v: v),
            "policy_timeout_ms": ("policy_timeout_ms", int),
            "init_mode": ("init_mode", str),
            "init_depth": ("init_depth", int),
            "seed": ("seed", int), "workers": ("workers", int),
            "out_dir": ("out_dir", str),
            "lookup_path": ("lookup_path", lambda v: v),
        }
        kwargs = {}
        for key, value in raw.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            name, conv = known[key]
            kwargs[name] = conv(value)
        for required in ("p_grid", "n_grid", "q_grid", "strategy", "realizations"):
            if required not in kwargs:
                raise ConfigError(f"missing config key for {required}")
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def canonical(self) -> dict:
        """Seed- and grid-defining content (what the config hash covers)."""
        return {
            "config_version": CONFIG_VERSION,
            "p": [float(p) for p in self.p_grid],
            "n_qubits": [int(n) for n in self.n_grid],
            "q": [float(q) for q in self.q_grid],
            "strategy": self.strategy,
            "realizations": self.realizations,
            "samples_per_realization": self.samples_per_realization,
            "sample_spacing": self.sample_spacing,
            "transient_turns": self.transient_turns,
            "n_bottlenecks": self.n_bottlenecks,
            "policy_cmd": self.policy_cmd,
            "init_mode": self.init_mode,
            "init_depth": self.init_depth,
            "seed": self.seed,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def cells(self) -> list[tuple[float, int, float]]:
        return list(itertools.product(
            [float(p) for p in self.p_grid],
            [int(n) for n in self.n_grid],
            [float(q) for q in self.q_grid]))


def cell_id(p: float, n: int, q: float, strategy: str) -> str:
    return f"p{p:.4f}_N{n}_q{q:.4f}_{strategy}"


def _run_cell_trajectory(args):
    (p, n, q, strategy_spec, seed, transient, spacing, n_samples,
     init_mode, init_depth, lookup_path) = args
    cfg = EnvConfig(
        n_qubits=n, p=p, q=q, episode_length=None, init_mode=init_mode,
        init_depth=init_depth, seed=seed,
        emit_observations=strategy_spec["kind"] == "external")
    strategy = make_strategy(
        strategy_spec["kind"], n,
        n_bottlenecks=strategy_spec.get("n_bottlenecks", 1),
        policy_cmd=strategy_spec.get("policy_cmd"),
        p=p, q=q, timeout_ms=strategy_spec.get("timeout_ms", 1000))
    t0 = time.perf_counter()
    try:
        samples = run_sampling_trajectory(cfg, strategy, transient, spacing,
                                          n_samples, lookup_path=lookup_path)
    finally:
        close = getattr(getattr(strategy, "session", None), "close", None)
        if close is not None:
            close()
    return seed, samples, time.perf_counter() - t0


def _format_float(x: float) -> str:
    return repr(float(x))


class SweepRunner:
    def __init__(self, config: SweepConfig):
        config.validate()
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.manifest_path = self.out_dir / MANIFEST_NAME

    def _strategy_spec(self) -> dict:
        return {
            "kind": self.config.strategy,
            "n_bottlenecks": self.config.n_bottlenecks,
            "policy_cmd": self.config.policy_cmd,
            "timeout_ms": self.config.policy_timeout_ms,
        }

    def _load_manifest(self) -> dict:
        if self.manifest_path.exists():
            with open(self.manifest_path, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
            if manifest.get("config_hash") != self.config.config_hash():
                raise ConfigError(
                    f"{self.manifest_path} belongs to a different config; "
                    "use a fresh output directory")
            return manifest
        return {
            "format": 1,
            "config_hash": self.config.config_hash(),
            "code_version": __version__,
            "base_seed": self.config.seed,
            "config": self.config.canonical(),
            "cells": {},
        }

    def _write_manifest(self, manifest: dict) -> None:
        tmp = self.manifest_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.manifest_path)

    def run(self, log=print) -> dict:
        cfg = self.config
        self.out_dir.mkdir(parents=True, exist_ok=True)
        manifest = self._load_manifest()
        # built once in the parent; forked workers inherit both
        enumerate_clifford_gates()
        from .runner import shared_table
        shared_table(cfg.lookup_path)
        cells = cfg.cells()
        for cell_index, (p, n, q) in enumerate(cells):
            cid = cell_id(p, n, q, cfg.strategy)
            entry = manifest["cells"].get(cid)
            if entry is not None and entry.get("status") == "done":
                log(f"[skip] {cid} already complete")
                continue
            log(f"[run ] {cid}")
            try:
                rows = self._run_cell(cell_index, p, n, q)
            except StrategyError as exc:
                manifest["cells"][cid] = {"status": "failed", "error": str(exc)}
                self._write_manifest(manifest)
                log(f"[fail] {cid}: {exc}")
                continue
            csv_path = self.out_dir / f"{cid}.csv"
            tmp = csv_path.with_suffix(".tmp")
            with open(tmp, "w", encoding="ascii", newline="\n") as fh:
                fh.write(",".join(CSV_COLUMNS) + "\n")
                for row in rows:
                    fh.write(",".join(row) + "\n")
            os.replace(tmp, csv_path)
            manifest["cells"][cid] = {
                "status": "done",
                "file": csv_path.name,
                "n_rows": len(rows),
                "seeds": [cfg.seed ^ (cell_index * cfg.realizations + i)
                          for i in range(cfg.realizations)],
            }
            self._write_manifest(manifest)
        return manifest

    def _run_cell(self, cell_index: int, p: float, n: int, q: float) -> list:
        cfg = self.config
        spec = self._strategy_spec()
        transient = (cfg.transient_turns if cfg.transient_turns is not None
                     else transient_turns_default(cfg.strategy, n))
        spacing = (cfg.sample_spacing if cfg.sample_spacing is not None
                   else 10 * n)
        args = []
        for i in range(cfg.realizations):
            seed = cfg.seed ^ (cell_index * cfg.realizations + i)
            args.append((p, n, q, spec, seed, transient, spacing,
                         cfg.samples_per_realization, cfg.init_mode,
                         cfg.init_depth, cfg.lookup_path))
        if cfg.workers > 1 and cfg.strategy != "external":
            with multiprocessing.Pool(cfg.workers) as pool:
                results = pool.map(_run_cell_trajectory, args, chunksize=1)
        else:
            results = [_run_cell_trajectory(a) for a in args]
        norm = max_total_entanglement(n - 1)
        rows = []
        for (seed, samples, wall) in results:  # already realization-ordered
            for k, s_tot in enumerate(samples):
                turn = transient + (k + 1) * spacing
                rows.append((
                    _format_float(p), str(n), _format_float(q), cfg.strategy,
                    str(seed), str(turn), str(int(s_tot)),
                    _format_float(int(s_tot) / norm), f"{wall:.3f}"))
        return rows


def read_cell_csv(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected CSV header")
        for line in fh:
            vals = line.strip().split(",")
            rows.append(dict(zip(CSV_COLUMNS, vals)))
    return rows


def analyze_results(results_dir, log=print) -> tuple[list[dict], dict]:
    """Summarize a sweep directory: per-cell means, Binder cumulants, and the
    bottleneck-model overlay. Pure function of the stored CSVs."""
    from .analysis import binder_cumulant, bottleneck_model, summarize_samples

    results_dir = Path(results_dir)
    manifest_path = results_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise ConfigError(f"no {MANIFEST_NAME} in {results_dir}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    summary = []
    done = {cid: e for cid, e in manifest.get("cells", {}).items()
            if e.get("status") == "done"}
    if not done:
        log("warning: no completed cells to analyze")
    for cid in sorted(done):
        rows = read_cell_csv(results_dir / done[cid]["file"])
        if not rows:
            continue
        p = float(rows[0]["p"])
        n = int(rows[0]["n_qubits"])
        q = float(rows[0]["q"])
        s = np.array([int(r["s_tot"]) for r in rows], dtype=np.int64)
        norm = max_total_entanglement(n - 1)
        est = summarize_samples(s, norm)
        u = binder_cumulant(s / norm) if len(s) >= 2 else float("nan")
        overlay = bottleneck_model(p, n)[1] if 0.0 < p < 1.0 else float("nan")
        summary.append({
            "cell": cid, "p": p, "n_qubits": n, "q": q,
            "strategy": rows[0]["strategy"], "n_samples": len(s),
            "mean_normalized": est.mean, "stderr_normalized": est.stderr,
            "binder_u": u, "bottleneck_prediction": overlay,
        })
    return summary, manifest


def write_summary(summary: list[dict], out_dir) -> list[Path]:
    """summary.csv plus per-(strategy, N, q) plot files with p/mean/err."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    cols = ("cell", "p", "n_qubits", "q", "strategy", "n_samples",
            "mean_normalized", "stderr_normalized", "binder_u",
            "bottleneck_prediction")
    path = out_dir / "summary.csv"
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in summary:
            fh.write(",".join(str(row[c]) for c in cols) + "\n")
    paths.append(path)
    groups: dict = {}
    for row in summary:
        groups.setdefault(
            (row["strategy"], row["n_qubits"], row["q"]), []).append(row)
    for (strategy, n, q), rows in sorted(groups.items()):
        rows.sort(key=lambda r: r["p"])
        gpath = out_dir / f"plot_{strategy}_N{n}_q{q:.4f}.csv"
        with open(gpath, "w", encoding="ascii", newline="\n") as fh:
            fh.write("p,mean_normalized,stderr_normalized\n")
            for r in rows:
                fh.write(f"{r['p']},{r['mean_normalized']},"
                         f"{r['stderr_normalized']}\n")
        paths.append(gpath)
    return paths
