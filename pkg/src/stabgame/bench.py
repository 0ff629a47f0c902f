"""Backend benchmark: compiled kernels vs. the pure-Python reference.

Run as ``python -m stabgame.bench [--sizes 16,32,64,128] [--reps 200]``.
Times the three hot kernels (gate application, clipping, prefix rank) and an
end-to-end environment turn on volume-law states.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import _bitcore_py as pure_kernels
from .tableau import enumerate_clifford_gates, new_product_state

try:
    from . import _bitcore as compiled_kernels
except ImportError:
    compiled_kernels = None


def _volume_state(n, rng, gs):
    t = new_product_state(n)
    gidx = rng.integers(0, len(gs), size=20 * n)
    bonds = rng.integers(0, n - 1, size=20 * n)
    pure_kernels.apply_gate_sequence(t.words, gs.luts, gidx, bonds)
    return t


def _time(fn, reps) -> float:
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_kernels(n: int, reps: int, rng) -> dict:
    gs = enumerate_clifford_gates()
    t = _volume_state(n, rng, gs)
    lut = gs.luts[37]
    rows = {}
    backends = [("python", pure_kernels)]
    if compiled_kernels is not None:
        backends.append(("compiled", compiled_kernels))
    for name, k in backends:
        words = t.words.copy()
        rows[name, "apply_gate"] = _time(
            lambda: k.apply_gate(words, n // 2, lut), reps * 10)
        l = np.empty(n, np.int32)
        r = np.empty(n, np.int32)

        def clip_once():
            w = t.words.copy()
            k.clip(w, l, r)

        rows[name, "clip"] = _time(clip_once, reps)
        rows[name, "rank_prefix"] = _time(
            lambda: k.rank_prefix(t.words, n), reps)
    return rows


def bench_turn(n: int, reps: int, seed: int, backend: str) -> float:
    import importlib
    import os
    import subprocess
    import sys

    # per-turn timing must run under the chosen backend, so spawn a child
    code = (
        "import time, numpy as np\n"
        "from stabgame.environment import CircuitGameEnv, EnvConfig\n"
        f"env = CircuitGameEnv(EnvConfig(n_qubits={n}, p=0.3, seed={seed}))\n"
        "env.reset()\n"
        "rng = np.random.default_rng(0)\n"
        f"acts = rng.integers(0, {n - 1}, size={reps})\n"
        "for a in acts[:50]:\n"
        "    env.step(int(a))\n"
        "t0 = time.perf_counter()\n"
        "for a in acts:\n"
        "    env.step(int(a))\n"
        f"print((time.perf_counter() - t0) / {reps})\n"
    )
    env = dict(os.environ, STABGAME_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="16,32,64,128")
    parser.add_argument("--reps", type=int, default=200)
    parser.add_argument("--skip-turn", action="store_true",
                        help="only benchmark raw kernels")
    args = parser.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)

    print(f"{'N':>4} {'kernel':<12} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for n in sizes:
        rows = bench_kernels(n, args.reps, rng)
        for kernel in ("apply_gate", "clip", "rank_prefix"):
            py = rows["python", kernel]
            if ("compiled", kernel) in rows:
                cc = rows["compiled", kernel]
                print(f"{n:>4} {kernel:<12} {py * 1e6:>10.2f}us "
                      f"{cc * 1e6:>10.2f}us {py / cc:>8.1f}x")
            else:
                print(f"{n:>4} {kernel:<12} {py * 1e6:>10.2f}us "
                      f"{'n/a':>12} {'':>9}")

    if not args.skip_turn and compiled_kernels is not None:
        print()
        print(f"{'N':>4} {'end-to-end':<12} {'python':>12} {'compiled':>12} "
              f"{'speedup':>9}")
        for n in sizes:
            reps = max(50, min(args.reps, 2000 // max(1, n // 16)))
            py = bench_turn(n, reps, 1, "python")
            cc = bench_turn(n, reps, 1, "compiled")
            print(f"{n:>4} {'env turn':<12} {py * 1e6:>10.1f}us "
                  f"{cc * 1e6:>10.1f}us {py / cc:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
