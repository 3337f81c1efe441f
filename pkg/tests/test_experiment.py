import json
import math

import numpy as np
import pytest

from bsnoise.errors import ConfigError
from bsnoise.experiment import (
    ExperimentConfig,
    determinism_hash,
    distance_bound_check,
    epsilon_sweep,
    fit_power_law,
    mean_stderr,
    run_experiment,
    run_full_distribution_experiment,
    run_roundtrip_trial,
    run_trials,
    summary_path,
)
from bsnoise.linalg import RngStream
from bsnoise.network import haar_network
from bsnoise.noise import NoiseModel, build_roundtrip_circuit
from bsnoise.permanent import permanent_naive


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert (cfg.n, cfg.m, cfg.epsilon) == (4, 16, (0.01,))

    @pytest.mark.parametrize("kwargs", [
        {"n": 6, "m": 5}, {"trials": 0}, {"epsilon": -0.1}, {"epsilon": ()}, {"network_mode": "x"},
        {"noise_placement": "x"}, {"workers": 0}, {"n": 10, "m": 40, "full_distribution": True},
        {"master_seed": -1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kwargs)

    def test_n_ge_m_message(self):
        with pytest.raises(ConfigError, match="n must be < m"):
            ExperimentConfig(n=6, m=5)

    def test_file_with_overrides(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("# desk run\nn = 3\nm = 9   # nine modes\nepsilon = 0.01, 0.02\nseed = 5\nwith_kn = yes\n\n")
        cfg = ExperimentConfig.from_file(path, {"m": 10})
        assert (cfg.n, cfg.m, cfg.epsilon, cfg.master_seed, cfg.compute_kn) == (3, 10, (0.01, 0.02), 5, True)

    def test_file_errors(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("n 3\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(bad)
        bad.write_text("colour = blue\n")
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_file(bad)
        bad.write_text("n = three\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(bad)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "missing.cfg")

    def test_dict_round_trip(self):
        cfg = ExperimentConfig(n=3, m=9, epsilon=(0.1, 0.2), compute_kn=True)
        assert ExperimentConfig.from_mapping(cfg.to_dict()) == cfg


class TestTrial:
    def test_zero_noise(self):
        rec = run_roundtrip_trial(ExperimentConfig(epsilon=0.0), 0)
        assert rec.error is None
        assert rec.p1_tilde == 1.0 and rec.distance == 0.0
        # H_N and X do not depend on eps; the defects do
        assert rec.X > 0 and rec.defect_H == 0.0

    def test_bit_identical(self):
        cfg = ExperimentConfig(compute_kn=True)
        a, b = run_roundtrip_trial(cfg, 3).to_dict(), run_roundtrip_trial(cfg, 3).to_dict()
        a.pop("wall_time")
        b.pop("wall_time")
        assert a == b

    def test_matches_independent_path(self):
        # rebuild the trial from its streams and take the permanent by brute force
        cfg = ExperimentConfig(n=3, m=9, epsilon=0.02)
        rec = run_roundtrip_trial(cfg, 7)
        stream = RngStream(cfg.master_seed, 7)
        net = haar_network(3, 9, stream.generator(0))
        w = build_roundtrip_circuit(net, NoiseModel(0.02), stream.generator(1)).W
        p1 = abs(permanent_naive(w[:3, :3])) ** 2
        assert rec.p1_tilde == pytest.approx(p1, rel=1e-12)
        assert rec.distance == pytest.approx(2 * (1 - p1), rel=1e-9)

    def test_ranges(self):
        for rec in run_trials(ExperimentConfig(epsilon=0.05, trials=20, diagnostics=False)):
            assert 0 <= rec.p1_tilde <= 1 + 1e-9 and 0 <= rec.distance <= 2
            assert math.isnan(rec.X)

    def test_error_captured(self, monkeypatch):
        import bsnoise.experiment as ex

        def boom(*args, **kwargs):
            raise FloatingPointError("boom")

        monkeypatch.setattr(ex, "permanent_ryser", boom)
        recs = run_trials(ExperimentConfig(trials=3))
        assert all(r.error == "FloatingPointError: boom" for r in recs)
        summary = ex.summarize(ExperimentConfig(trials=3), 0.01, recs)
        assert summary.errors == 3

    def test_direct_sample_mode(self):
        rec = run_roundtrip_trial(ExperimentConfig(network_mode="direct-sample"), 0)
        assert rec.error is None and rec.distance > 0


class TestSummary:
    def test_single_trial(self):
        s = run_experiment(ExperimentConfig(trials=1), write=False)
        rec = run_roundtrip_trial(ExperimentConfig(trials=1), 0)
        assert s.stat("distance").mean == rec.distance
        assert math.isnan(s.stat("distance").stderr)
        assert s.to_dict()["stats"]["distance"]["stderr"] is None

    def test_stderr_halving(self):
        a = run_experiment(ExperimentConfig(trials=200, diagnostics=False), write=False).stat("distance").stderr
        b = run_experiment(ExperimentConfig(trials=800, diagnostics=False), write=False).stat("distance").stderr
        assert 0.8 <= (a / b) / 2 <= 1.2

    def test_mean_stderr(self):
        s = mean_stderr([1.0, 2.0, 3.0, math.nan, None])
        assert s.mean == 2.0 and s.count == 3 and s.stderr == pytest.approx(1 / math.sqrt(3))
        assert math.isnan(mean_stderr([]).mean)

    def test_files(self, tmp_path):
        out = tmp_path / "run.jsonl"
        cfg = ExperimentConfig(trials=5, output_path=str(out))
        s = run_experiment(cfg)
        lines = out.read_text().splitlines()
        meta = json.loads(lines[0])
        assert meta["type"] == "metadata" and meta["schema_version"] == 1 and meta["config"]["trials"] == 5
        assert meta["rng_algorithm"]
        assert len(lines) == 6 and json.loads(lines[1])["trial_index"] == 0
        doc = json.loads((tmp_path / "run.summary.json").read_text())
        assert doc["determinism_hash"] == s.determinism_hash
        assert summary_path(str(out)).endswith("run.summary.json")

    def test_repeat_same_file_bytes(self, tmp_path):
        cfg = ExperimentConfig(trials=4)
        texts = []
        for name in ("a.jsonl", "b.jsonl"):
            run_experiment(cfg.replace(output_path=str(tmp_path / name)))
            rows = [json.loads(x) for x in (tmp_path / name).read_text().splitlines()[1:]]
            for r in rows:
                r.pop("wall_time")
            texts.append(rows)
        assert texts[0] == texts[1]

    def test_parallel_matches_serial(self):
        cfg = ExperimentConfig(trials=9, compute_kn=True)
        assert determinism_hash(run_trials(cfg)) == determinism_hash(run_trials(cfg.replace(workers=3)))

    def test_hash_sensitive_to_seed(self):
        cfg = ExperimentConfig(trials=3)
        assert determinism_hash(run_trials(cfg)) != determinism_hash(run_trials(cfg.replace(master_seed=1)))


class TestSweep:
    def test_fit_exact_power(self):
        x = np.array([1e-3, 2e-3, 5e-3])
        fit = fit_power_law(x, 3 * x**2)
        assert fit.exponent == pytest.approx(2) and fit.coefficient == pytest.approx(3) and fit.r_squared == pytest.approx(1)

    def test_fit_degenerate(self):
        assert fit_power_law([1e-3], [1.0]).degenerate

    def test_rejects(self):
        with pytest.raises(ConfigError):
            epsilon_sweep(ExperimentConfig(epsilon=(0.0, 0.0, 0.0)))
        with pytest.raises(ConfigError):
            epsilon_sweep(ExperimentConfig(epsilon=(0.01, 0.02)))
        with pytest.raises(ConfigError):
            epsilon_sweep(ExperimentConfig(epsilon=(0.01, 0.02, 0.05)))

    def test_quadratic(self):
        cfg = ExperimentConfig(epsilon=(2e-3, 5e-3, 1e-2, 2e-2), trials=100, diagnostics=False)
        res = epsilon_sweep(cfg)
        assert abs(res.fit.exponent - 2) <= 0.2 and res.monotone
        table = res.table()
        assert [r["epsilon"] for r in table] == [2e-3, 5e-3, 1e-2, 2e-2]
        assert set(table[0]) == {"epsilon", "mean_distance", "stderr", "bound", "n", "m", "trials"}
        doc = res.to_dict()
        assert doc["bound_coefficient"] is None and doc["heuristic_coefficient"] == pytest.approx(54 * 4 / 16)

    def test_non_vacuous_bound(self):
        res = distance_bound_check(ExperimentConfig(n=10, m=100, trials=20, diagnostics=False), 0.003)
        assert res["passed"] and not res["vacuous"]


class TestFullDistribution:
    def test_identity(self):
        res = run_full_distribution_experiment(ExperimentConfig(n=3, m=9, epsilon=0.05, trials=10, diagnostics=False))
        assert res.passed and res.max_mass_error <= 1e-9 and res.max_identity_error <= 1e-9

    def test_zero_noise_point_mass(self):
        res = run_full_distribution_experiment(ExperimentConfig(n=2, m=5, epsilon=0.0, trials=2))
        for r in res.records:
            assert r.p1_tilde == 1.0 and r.l1_enumerated == pytest.approx(0.0, abs=1e-12)
