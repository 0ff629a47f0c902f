"""Command-line driver.

Subcommands: run (sweep from a YAML config), analyze (summarize a results
directory), frames (per-turn profile export for animations), lookup-build
(precompute a disentangling-gate table), selftest (quick self-checks).

Every flag can also be set through an environment variable with the
``STABGAME_`` prefix (e.g. ``STABGAME_SEED``, ``STABGAME_WORKERS``,
``STABGAME_OUT``, ``STABGAME_LOOKUP``, ``STABGAME_POLICY_CMD``,
``STABGAME_CONFIG``); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np


def _env_default(name: str, fallback=None):
    return os.environ.get("STABGAME_" + name, fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stabgame",
        description="Stabilizer-circuit game: disentangling strategies vs. "
                    "stochastic Clifford dynamics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a sweep config")
    p_run.add_argument("--config", default=_env_default("CONFIG"),
                       required=_env_default("CONFIG") is None,
                       help="YAML sweep config")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config base seed")
    p_run.add_argument("--workers", type=int, default=None,
                       help="override the config worker count")
    p_run.add_argument("--out", default=None, help="override output directory")
    p_run.add_argument("--lookup", default=None,
                       help="preload a lookup-table file")
    p_run.add_argument("--policy-cmd", default=None,
                       help="override the external policy command")

    p_an = sub.add_parser("analyze", help="summarize sweep results")
    p_an.add_argument("results_dir", nargs="?", default=_env_default("OUT"))
    p_an.add_argument("--out", default=None,
                      help="summary output directory (default: results dir)")

    p_fr = sub.add_parser("frames", help="export per-turn profile frames")
    p_fr.add_argument("--n-qubits", type=int, required=True)
    p_fr.add_argument("--p", type=float, required=True)
    p_fr.add_argument("--q", type=float, default=1.0)
    p_fr.add_argument("--strategy", default="greedy",
                      choices=["random", "greedy", "pyramid", "external"])
    p_fr.add_argument("--n-bottlenecks", type=int, default=1)
    p_fr.add_argument("--policy-cmd", default=_env_default("POLICY_CMD"))
    p_fr.add_argument("--turns", type=int, required=True)
    p_fr.add_argument("--stride", type=int, default=1)
    p_fr.add_argument("--seed", type=int,
                      default=int(_env_default("SEED", 0)))
    p_fr.add_argument("--out", default=_env_default("OUT", "frames.jsonl"))

    p_lb = sub.add_parser("lookup-build", help="precompute disentangling gates")
    p_lb.add_argument("--samples", type=int, required=True)
    p_lb.add_argument("--n-qubits", type=int, required=True)
    p_lb.add_argument("--seed", type=int, default=int(_env_default("SEED", 0)))
    p_lb.add_argument("--out", default=_env_default("OUT", "lookup.txt"))

    sub.add_parser("selftest", help="quick built-in checks")
    return parser


def cmd_run(args) -> int:
    from .environment import ConfigError
    from .sweep import SweepConfig, SweepRunner

    try:
        config = SweepConfig.from_file(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.workers is not None:
            config.workers = args.workers
        if args.out is not None:
            config.out_dir = args.out
        lookup = args.lookup or _env_default("LOOKUP")
        if lookup is not None:
            config.lookup_path = lookup
        if args.policy_cmd is not None:
            config.policy_cmd = args.policy_cmd
        env_workers = _env_default("WORKERS")
        if args.workers is None and env_workers is not None:
            config.workers = int(env_workers)
        config.validate()
        manifest = SweepRunner(config).run()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    n_done = sum(1 for e in manifest["cells"].values()
                 if e.get("status") == "done")
    n_fail = sum(1 for e in manifest["cells"].values()
                 if e.get("status") == "failed")
    print(f"sweep complete: {n_done} cells done, {n_fail} failed")
    return 0 if n_fail == 0 else 1


def cmd_analyze(args) -> int:
    from .environment import ConfigError
    from .sweep import analyze_results, write_summary

    if not args.results_dir:
        print("error: no results directory given", file=sys.stderr)
        return 2
    try:
        summary, _ = analyze_results(args.results_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out or args.results_dir
    paths = write_summary(summary, out)
    print(f"wrote {len(paths)} summary files to {out}")
    return 0


def cmd_frames(args) -> int:
    from .environment import CircuitGameEnv, EnvConfig
    from .runner import run_turns, shared_table
    from .strategies import make_strategy

    cfg = EnvConfig(n_qubits=args.n_qubits, p=args.p, q=args.q,
                    seed=args.seed)
    strategy = make_strategy(args.strategy, args.n_qubits,
                             n_bottlenecks=args.n_bottlenecks,
                             policy_cmd=args.policy_cmd, p=args.p, q=args.q)
    env = CircuitGameEnv(cfg, table=shared_table())
    _, obs = env.reset()
    observe = getattr(strategy, "observe", None)
    if observe is not None:
        observe(obs)
    out_path = Path(args.out)
    total = 0
    count = 0
    with open(out_path, "w", encoding="ascii") as fh:
        for turn in range(args.turns):
            records = run_turns(env, strategy, 1, record=True)
            rec = records[0]
            total += rec.s_tot
            count += 1
            if turn % args.stride:
                continue
            fh.write(json.dumps({
                "turn": rec.turn,
                "action": rec.action,
                "profile": rec.profile.tolist(),
                "s_tot": rec.s_tot,
                "running_mean": total / count,
            }) + "\n")
    print(f"wrote frames for {count} turns to {out_path}")
    return 0


def cmd_lookup_build(args) -> int:
    from .disentangler import build_table, save_table

    rng = np.random.Generator(np.random.Philox(args.seed))
    table = build_table(args.samples, args.n_qubits, rng)
    save_table(table, args.out)
    print(f"wrote {len(table)} entries to {args.out}")
    return 0


def cmd_selftest(args) -> int:
    from . import BACKEND
    from .clipping import clip, oracle_profile
    from .environment import CircuitGameEnv, EnvConfig
    from .tableau import (apply_gate_inplace, enumerate_clifford_gates,
                          new_product_state, sample_random_gate)

    ok = True

    def check(name, cond):
        nonlocal ok
        print(f"[{'PASS' if cond else 'FAIL'}] {name}")
        ok = ok and cond

    print(f"backend: {BACKEND}")
    gs = enumerate_clifford_gates()
    check("gate set has 720 elements", len(gs) == 720)
    check("identity at index 0", gs[0].is_identity)

    rng = np.random.default_rng(2024)
    agree = True
    for _ in range(25):
        n = int(rng.integers(4, 13))
        t = new_product_state(n)
        for _ in range(200):
            g = sample_random_gate(gs, rng)
            apply_gate_inplace(t, g.lut(), int(rng.integers(n - 1)))
        _, cm, prof = clip(t)
        agree = agree and np.array_equal(prof, oracle_profile(t))
        agree = agree and (cm.endpoint_counts(n) == 2).all()
    check("clip profile matches rank oracle (25 random states)", agree)

    env = CircuitGameEnv(EnvConfig(n_qubits=8, p=0.5, seed=11))
    env.reset()
    rewards_ok = True
    bursts = []
    for _ in range(2000):
        _, out = env.step(int(rng.integers(7)))
        rewards_ok = rewards_ok and -1.0 <= out.reward <= 0.0
        bursts.append(out.info["n_random_gates"])
    check("rewards stay in [-1, 0]", rewards_ok)
    mean_burst = float(np.mean(bursts))
    check("burst mean near (1-p)/p", abs(mean_burst - 1.0) < 0.15)
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return {
        "run": cmd_run,
        "analyze": cmd_analyze,
        "frames": cmd_frames,
        "lookup-build": cmd_lookup_build,
        "selftest": cmd_selftest,
    }[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
