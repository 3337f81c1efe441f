import csv
import io
import json
import subprocess
import sys

import pytest

from bsnoise.cli import bench_permanent, growth_within_model, main
from bsnoise.network import InterferometerNetwork


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestUsage:
    def test_n_ge_m(self, capsys):
        assert main(["run", "--n", "6", "--m", "5"]) == 2
        assert "n must be < m" in capsys.readouterr().err

    def test_unknown_flag(self):
        assert main(["run", "--bogus"]) == 2

    def test_no_command(self):
        assert main([]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_bad_config_value(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("trials = lots\n")
        assert main(["run", "--config", str(cfg)]) == 2

    def test_bad_choice(self):
        assert main(["run", "--placement", "middle"]) == 2

    def test_module_entry(self):
        out = subprocess.run([sys.executable, "-m", "bsnoise", "run", "--n", "6", "--m", "5"],
                             capture_output=True, text=True)
        assert out.returncode == 2 and "n must be < m" in out.stderr


class TestRun:
    def test_flags_override_file(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("n = 2\nm = 5\ntrials = 50\nepsilon = 0.02\n")
        out = tmp_path / "r.jsonl"
        assert main(["run", "--config", str(cfg), "--trials", "3", "--output", str(out)]) == 0
        text = capsys.readouterr().out
        assert "trials=3" in text and '"m": 5' in text
        meta = json.loads(out.read_text().splitlines()[0])
        assert meta["config"]["trials"] == 3 and meta["config"]["n"] == 2
        assert (tmp_path / "r.summary.json").exists()

    def test_multiple_epsilon_files(self, tmp_path):
        out = tmp_path / "r.jsonl"
        assert main(["run", "--n", "2", "--m", "5", "--trials", "2", "--epsilon", "0.01,0.02",
                     "--output", str(out), "--with-kn"]) == 0
        assert (tmp_path / "r_eps0.01.jsonl").exists() and (tmp_path / "r_eps0.02.jsonl").exists()


class TestSweep:
    def test_sweep_outputs(self, tmp_path, capsys):
        out, table = tmp_path / "s.json", tmp_path / "s.csv"
        assert main(["sweep", "--epsilon", "0.002,0.005,0.01,0.02", "--trials", "40",
                     "--output", str(out), "--csv", str(table)]) == 0
        assert "fitted exponent" in capsys.readouterr().out
        rows = _csv(table.read_text())
        assert list(rows[0]) == ["epsilon", "mean_distance", "stderr", "bound", "n", "m", "trials"]
        assert len(rows) == 4
        doc = json.loads(out.read_text())
        assert doc["metadata"]["schema_version"] == 1 and len(doc["sweep"]["table"]) == 4

    def test_sweep_needs_three(self):
        assert main(["sweep", "--epsilon", "0.01,0.02", "--trials", "2"]) == 2


class TestEmit:
    def test_f_curve(self, capsys):
        assert main(["emit-plot-data", "--f-curve"]) == 0
        rows = _csv(capsys.readouterr().out)
        assert [int(r["n"]) for r in rows] == list(range(11, 101))
        vals = [float(r["f"]) for r in rows]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_from_run_summaries(self, tmp_path, capsys):
        for eps in ("0.01", "0.02"):
            main(["run", "--n", "2", "--m", "5", "--trials", "3", "--epsilon", eps,
                  "--output", str(tmp_path / f"r{eps}.jsonl")])
        capsys.readouterr()
        files = sorted(str(p) for p in tmp_path.glob("*.summary.json"))
        assert main(["emit-plot-data", *files]) == 0
        rows = _csv(capsys.readouterr().out)
        assert list(rows[0]) == ["epsilon", "mean_distance", "stderr", "bound"]
        assert [float(r["epsilon"]) for r in rows] == [0.01, 0.02]

    def test_empty_input(self):
        assert main(["emit-plot-data"]) == 2

    def test_schema_mismatch(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"metadata": {"schema_version": 99}, "stats": {}}))
        assert main(["emit-plot-data", str(bad)]) == 2

    def test_unreadable(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["emit-plot-data", str(bad)]) == 2


class TestOther:
    def test_decompose(self, tmp_path):
        out = tmp_path / "net.json"
        assert main(["decompose", "--n", "3", "--m", "9", "--seed", "4", "--output", str(out)]) == 0
        net = InterferometerNetwork.from_json(out.read_text())
        assert (net.n, net.m, len(net)) == (3, 9, 21)

    def test_full_dist(self, capsys):
        assert main(["full-dist", "--n", "2", "--m", "5", "--epsilon", "0.05", "--trials", "3"]) == 0
        assert "pass" in capsys.readouterr().out

    def test_verify_exit_code(self, monkeypatch):
        import bsnoise.verification as ver

        monkeypatch.setattr(ver, "verify_suite", lambda cfg, quick=False: [ver.CheckResult("x", ver.FAIL)])
        assert main(["verify"]) == 1
        monkeypatch.setattr(ver, "verify_suite", lambda cfg, quick=False: [ver.CheckResult("x", ver.PASS)])
        assert main(["verify"]) == 0


class TestBench:
    def test_agreement_and_growth(self):
        rows = bench_permanent([10, 12, 14, 16], repetitions=3)
        assert all(r["rel_diff"] <= 1e-10 for r in rows)
        assert rows[0]["ryser_seconds"] < 1e-3
        assert growth_within_model(rows)

    def test_growth_model(self):
        rows = [{"n": 10, "ryser_seconds": 0.01}, {"n": 12, "ryser_seconds": 0.048}]
        assert growth_within_model(rows)
        rows[1]["ryser_seconds"] = 1.0
        assert not growth_within_model(rows)

    def test_cap(self):
        assert main(["bench-permanent", "--sizes", "31"]) == 2
        assert main(["bench-permanent", "--sizes", "x"]) == 2

    @pytest.mark.slow
    def test_cli_bench(self, capsys):
        assert main(["bench-permanent", "--sizes", "10,12,14,16,18,20", "--repetitions", "2"]) == 0
