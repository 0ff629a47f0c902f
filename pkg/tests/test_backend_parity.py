"""Bit-for-bit equivalence of the compiled and pure-Python kernels."""

import subprocess
import sys

import numpy as np
import pytest

from stabgame import _bitcore_py as pk
from stabgame.tableau import enumerate_clifford_gates, new_product_state

ck = pytest.importorskip("stabgame._bitcore")


def random_tableau_words(n, rng, gs, n_gates=150):
    t = new_product_state(n)
    gidx = rng.integers(0, len(gs), size=n_gates)
    bonds = rng.integers(0, n - 1, size=n_gates)
    pk.apply_gate_sequence(t.words, gs.luts, gidx, bonds)
    return t.words


class TestParity:
    def test_backend_names(self):
        assert pk.BACKEND_NAME == "python"
        assert ck.BACKEND_NAME == "compiled"

    def test_apply_gate(self, gate_set):
        rng = np.random.default_rng(0)
        for n in (2, 5, 31, 32, 33, 64, 100):
            words = random_tableau_words(n, rng, gate_set)
            for _ in range(20):
                gi = int(rng.integers(720))
                bond = int(rng.integers(n - 1))
                a, b = words.copy(), words.copy()
                ck.apply_gate(a, bond, gate_set.luts[gi])
                pk.apply_gate(b, bond, gate_set.luts[gi])
                assert np.array_equal(a, b)
                words = a

    def test_word_straddling_bond(self, gate_set):
        # bond 31 of N=33 owns bits 62..65: crosses the first word boundary
        rng = np.random.default_rng(1)
        words = random_tableau_words(33, rng, gate_set)
        for gi in range(0, 720, 97):
            a, b = words.copy(), words.copy()
            ck.apply_gate(a, 31, gate_set.luts[gi])
            pk.apply_gate(b, 31, gate_set.luts[gi])
            assert np.array_equal(a, b)

    def test_clip_and_profile(self, gate_set):
        rng = np.random.default_rng(2)
        for n in (2, 3, 8, 17, 32, 33, 65):
            words = random_tableau_words(n, rng, gate_set)
            wa, wb = words.copy(), words.copy()
            la, ra = np.empty(n, np.int32), np.empty(n, np.int32)
            lb, rb = np.empty(n, np.int32), np.empty(n, np.int32)
            assert ck.clip(wa, la, ra) == pk.clip(wb, lb, rb) == 0
            assert np.array_equal(wa, wb)
            assert np.array_equal(la, lb) and np.array_equal(ra, rb)
            pa = np.empty(n - 1, np.int32)
            pb = np.empty(n - 1, np.int32)
            assert ck.profile_from_lr(la, ra, pa) == pk.profile_from_lr(lb, rb, pb)
            assert np.array_equal(pa, pb)

    def test_rank_prefix(self, gate_set):
        rng = np.random.default_rng(3)
        for n in (2, 9, 33, 64):
            words = random_tableau_words(n, rng, gate_set)
            for cols in range(1, 2 * n + 1, 5):
                assert ck.rank_prefix(words, cols) == pk.rank_prefix(words, cols)

    def test_window_records(self, gate_set):
        rng = np.random.default_rng(4)
        for n in (2, 7, 32, 33, 50):
            words = random_tableau_words(n, rng, gate_set)
            l, r = np.empty(n, np.int32), np.empty(n, np.int32)
            ck.clip(words, l, r)
            ra = np.empty((n - 1, 6), np.uint8)
            rb = np.empty((n - 1, 6), np.uint8)
            assert ck.window_records(words, l, r, ra) == 0
            assert pk.window_records(words, l, r, rb) == 0
            assert np.array_equal(ra, rb)

    def test_left_block_residuals(self, gate_set):
        rng = np.random.default_rng(5)
        for n in (2, 9, 32, 33, 48):
            words = random_tableau_words(n, rng, gate_set)
            for bond in range(0, n - 1, 3):
                assert ck.left_block_residuals(words, bond) == \
                    pk.left_block_residuals(words, bond)

    def test_rank_deficient_status(self):
        words = np.zeros((3, 1), dtype=np.uint64)
        words[0, 0] = 0b10
        words[1, 0] = 0b1000
        words[2, 0] = 0b10  # duplicate row
        l, r = np.empty(3, np.int32), np.empty(3, np.int32)
        assert ck.clip(words.copy(), l, r) == 1
        assert pk.clip(words.copy(), l, r) == 1


class TestWholeEnvironmentCrossBackend:
    def test_trajectory_digest_matches(self, tmp_path):
        # run the same trajectory under each backend in subprocesses
        code = (
            "import numpy as np\n"
            "from stabgame.backend import BACKEND\n"
            "from stabgame.environment import CircuitGameEnv, EnvConfig\n"
            "env = CircuitGameEnv(EnvConfig(n_qubits=10, p=0.4, seed=99))\n"
            "env.reset()\n"
            "acc = []\n"
            "for k in range(300):\n"
            "    st, out = env.step(k % 9)\n"
            "    acc.append(st.s_tot)\n"
            "print(BACKEND, sum(a * (i + 1) for i, a in enumerate(acc)))\n"
        )
        outs = {}
        for backend in ("python", "compiled"):
            import os
            env = dict(os.environ, STABGAME_BACKEND=backend)
            res = subprocess.run([sys.executable, "-c", code], env=env,
                                 capture_output=True, text=True, check=True)
            name, digest = res.stdout.split()
            outs[name] = digest
        assert outs["python"] == outs["compiled"]
