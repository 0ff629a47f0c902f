import json
import sys
from pathlib import Path

import numpy as np
import pytest

from stabgame import cli
from stabgame.clipping import max_total_entanglement
from stabgame.sweep import (CSV_COLUMNS, SweepConfig, analyze_results,
                            cell_id, read_cell_csv)

POLICY_DIR = Path(__file__).parent / "policies"


def write_config(path, **overrides):
    base = {
        "config_version": 1,
        "p": [0.5],
        "n_qubits": [4],
        "q": [1.0],
        "strategy": "random",
        "realizations": 2,
        "samples_per_realization": 10,
        "sample_spacing": 2,
        "transient_turns": 3,
        "seed": 314,
        "workers": 1,
        "out_dir": str(path.parent / "results"),
    }
    base.update(overrides)
    import yaml
    path.write_text(yaml.safe_dump(base))
    return base


def strip_wall(csv_text: str) -> str:
    lines = csv_text.strip().split("\n")
    return "\n".join(",".join(line.split(",")[:-1]) for line in lines)


class TestRun:
    def test_minimal_config_row_count(self, tmp_path):
        cfg_path = tmp_path / "sweep.yaml"
        base = write_config(cfg_path)
        assert cli.main(["run", "--config", str(cfg_path)]) == 0
        out = Path(base["out_dir"])
        csv = out / (cell_id(0.5, 4, 1.0, "random") + ".csv")
        rows = read_cell_csv(csv)
        assert len(rows) == 20  # 2 realizations x 10 samples
        norm = max_total_entanglement(3)
        for row in rows:
            assert row["strategy"] == "random"
            assert float(row["s_tot_normalized"]) == int(row["s_tot"]) / norm
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["cells"][cell_id(0.5, 4, 1.0, "random")][
            "status"] == "done"

    def test_rerun_skips_completed(self, tmp_path):
        cfg_path = tmp_path / "sweep.yaml"
        base = write_config(cfg_path)
        cli.main(["run", "--config", str(cfg_path)])
        out = Path(base["out_dir"])
        csv = out / (cell_id(0.5, 4, 1.0, "random") + ".csv")
        first = csv.read_text()
        first_manifest = (out / "manifest.json").read_text()
        assert cli.main(["run", "--config", str(cfg_path)]) == 0
        assert csv.read_text() == first  # wall times included: not recomputed
        assert (out / "manifest.json").read_text() == first_manifest

    def test_same_seed_byte_identical(self, tmp_path):
        texts = []
        for name in ("a", "b"):
            cfg_path = tmp_path / f"{name}.yaml"
            base = write_config(cfg_path, out_dir=str(tmp_path / name))
            cli.main(["run", "--config", str(cfg_path)])
            csv = Path(base["out_dir"]) / (cell_id(0.5, 4, 1.0, "random") + ".csv")
            texts.append(csv.read_text())
        assert strip_wall(texts[0]) == strip_wall(texts[1])

    def test_crash_resume_equals_clean_run(self, tmp_path):
        cfg_a = tmp_path / "a.yaml"
        write_config(cfg_a, p=[0.4, 0.6], out_dir=str(tmp_path / "a"))
        cli.main(["run", "--config", str(cfg_a)])

        cfg_b = tmp_path / "b.yaml"
        write_config(cfg_b, p=[0.4, 0.6], out_dir=str(tmp_path / "b"))
        cli.main(["run", "--config", str(cfg_b)])
        # simulate a crash after the first cell: drop the second everywhere
        cid = cell_id(0.6, 4, 1.0, "random")
        (tmp_path / "b" / f"{cid}.csv").unlink()
        manifest_path = tmp_path / "b" / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        del manifest["cells"][cid]
        manifest_path.write_text(json.dumps(manifest))
        cli.main(["run", "--config", str(cfg_b)])

        for p in (0.4, 0.6):
            cid = cell_id(p, 4, 1.0, "random")
            a = (tmp_path / "a" / f"{cid}.csv").read_text()
            b = (tmp_path / "b" / f"{cid}.csv").read_text()
            assert strip_wall(a) == strip_wall(b)

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        cfg_path = tmp_path / "bad.yaml"
        write_config(cfg_path, n_qubits=[5])  # odd N rejected in sweeps
        assert cli.main(["run", "--config", str(cfg_path)]) == 2
        assert "error" in capsys.readouterr().err

    def test_mismatched_output_dir_rejected(self, tmp_path):
        cfg1 = tmp_path / "one.yaml"
        write_config(cfg1, seed=1)
        cli.main(["run", "--config", str(cfg1)])
        cfg2 = tmp_path / "two.yaml"
        write_config(cfg2, seed=2)  # different hash, same out_dir
        assert cli.main(["run", "--config", str(cfg2)]) == 2

    def test_failed_external_cell_marked_and_run_continues(self, tmp_path):
        cmd = f"{sys.executable} {POLICY_DIR / 'misbehaving.py'} malformed"
        cfg_path = tmp_path / "sweep.yaml"
        base = write_config(cfg_path, strategy="external", policy_cmd=cmd,
                            p=[0.4, 0.6], realizations=1,
                            samples_per_realization=2, transient_turns=2)
        assert cli.main(["run", "--config", str(cfg_path)]) == 1
        manifest = json.loads(
            (Path(base["out_dir"]) / "manifest.json").read_text())
        for p in (0.4, 0.6):
            entry = manifest["cells"][cell_id(p, 4, 1.0, "external")]
            assert entry["status"] == "failed"
            assert "error" in entry

    def test_env_var_override(self, tmp_path, monkeypatch):
        cfg_path = tmp_path / "sweep.yaml"
        base = write_config(cfg_path, workers=1)
        monkeypatch.setenv("STABGAME_WORKERS", "2")
        assert cli.main(["run", "--config", str(cfg_path)]) == 0
        assert (Path(base["out_dir"]) / "manifest.json").exists()


class TestAnalyze:
    def test_summary_matches_hand_computation(self, tmp_path):
        cfg_path = tmp_path / "sweep.yaml"
        base = write_config(cfg_path, p=[0.3, 0.7])
        cli.main(["run", "--config", str(cfg_path)])
        out = Path(base["out_dir"])
        assert cli.main(["analyze", str(out)]) == 0
        summary_lines = (out / "summary.csv").read_text().strip().split("\n")
        header = summary_lines[0].split(",")
        norm = max_total_entanglement(3)
        rows = [dict(zip(header, line.split(","))) for line in summary_lines[1:]]
        assert len(rows) == 2
        for row in rows:
            cid = row["cell"]
            cell_rows = read_cell_csv(out / f"{cid}.csv")
            s = [int(r["s_tot"]) for r in cell_rows]
            hand_mean = sum(s) / (len(s) * norm)
            assert float(row["mean_normalized"]) == hand_mean
            from stabgame.analysis import bottleneck_model
            assert float(row["bottleneck_prediction"]) == \
                bottleneck_model(float(row["p"]), 4)[1]
        plot = out / "plot_random_N4_q1.0000.csv"
        assert plot.exists()
        assert len(plot.read_text().strip().split("\n")) == 3  # header + 2 p

    def test_empty_results_warns(self, tmp_path, capsys):
        out = tmp_path / "results"
        out.mkdir()
        (out / "manifest.json").write_text(json.dumps({"cells": {}}))
        assert cli.main(["analyze", str(out)]) == 0
        assert (out / "summary.csv").read_text().strip().count("\n") == 0

    def test_missing_manifest_is_error(self, tmp_path, capsys):
        assert cli.main(["analyze", str(tmp_path)]) == 2
        assert "manifest" in capsys.readouterr().err


class TestFrames:
    def test_zero_turns_no_frames(self, tmp_path):
        out = tmp_path / "frames.jsonl"
        assert cli.main(["frames", "--n-qubits", "6", "--p", "1.0",
                         "--turns", "0", "--out", str(out)]) == 0
        assert out.read_text() == ""

    def test_product_p1_greedy_all_zero(self, tmp_path):
        out = tmp_path / "frames.jsonl"
        cli.main(["frames", "--n-qubits", "6", "--p", "1.0", "--strategy",
                  "greedy", "--turns", "5", "--out", str(out)])
        frames = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(frames) == 5
        for f in frames:
            assert not any(f["profile"])
            assert f["s_tot"] == 0

    def test_frame_totals_consistent(self, tmp_path):
        out = tmp_path / "frames.jsonl"
        cli.main(["frames", "--n-qubits", "8", "--p", "0.3", "--strategy",
                  "random", "--turns", "40", "--stride", "3", "--seed", "7",
                  "--out", str(out)])
        frames = [json.loads(line) for line in out.read_text().splitlines()]
        assert frames  # stride thinning
        for f in frames:
            assert sum(f["profile"]) == f["s_tot"]
            assert 0 <= f["action"] <= 6


class TestLookupBuild:
    def test_build_then_load_round_trip(self, tmp_path):
        out = tmp_path / "lookup.txt"
        assert cli.main(["lookup-build", "--samples", "200", "--n-qubits",
                         "8", "--seed", "3", "--out", str(out)]) == 0
        from stabgame.disentangler import build_table, load_table
        loaded = load_table(out)
        rebuilt = build_table(200, 8, np.random.Generator(np.random.Philox(3)))
        assert loaded.entries.keys() == rebuilt.entries.keys()
        for key, e in rebuilt.entries.items():
            o = loaded.entries[key]
            assert (e.gate_index, e.delta_n, e.class_label) == \
                (o.gate_index, o.delta_n, o.class_label)

    def test_different_seeds_agree_on_shared_keys(self, tmp_path):
        from stabgame.disentangler import build_table
        t1 = build_table(300, 8, np.random.Generator(np.random.Philox(1)))
        t2 = build_table(300, 8, np.random.Generator(np.random.Philox(2)))
        shared = t1.entries.keys() & t2.entries.keys()
        assert shared, "expected overlapping keys between builds"
        for key in shared:
            assert t1.entries[key].gate_index == t2.entries[key].gate_index
            assert t1.entries[key].delta_n == t2.entries[key].delta_n


class TestSelftest:
    def test_passes(self, capsys):
        assert cli.main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
