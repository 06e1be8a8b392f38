import json
import subprocess
import sys

import jsonschema
import pytest

from dpslide import harness
from dpslide.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_OK, main, read_config_file
from dpslide.harness import (
    RunConfig, dumps, load_stream, run_continual, run_experiment, run_oneshot, run_oracle,
    score_report, validate_document,
)
from dpslide.oracle import exact_lp, exact_window_freqs
from dpslide.streams import write_stream

L2_FAST = dict(mode="oneshot-l2", alpha=0.2, window=3000, n=500, m=5000, kappa=2e4,
               kappa_w=0, gap=0.2, ams_rows=16, ams_reps=5, cs_rows=5, cs_buckets=256)


def l2_run(**kw):
    base = dict(L2_FAST, generator="planted:item=9,rho=0.06")
    base.update(kw)
    return RunConfig(**base)


class TestRunConfig:
    @pytest.mark.parametrize("kw", [
        dict(mode="bogus"), dict(alpha=1.0), dict(epsilon=0), dict(window=0), dict(trials=0),
        dict(m=None), dict(window=6000), dict(input="x.txt"), dict(generator=None),
        dict(noise_scale="other"), dict(kappa=0), dict(generator="zipf:q=1"),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            l2_run(**kw).validate()

    def test_validation_precedes_reading(self, tmp_path, monkeypatch):
        calls = []
        monkeypatch.setattr(harness, "parse_stream", lambda *a: calls.append(a))
        with pytest.raises(ValueError):
            run_oneshot(RunConfig(mode="oneshot-l1", alpha=2.0, input=str(tmp_path / "s")))
        assert calls == []


class TestOneShot:
    def test_planted_item_noise_off(self):
        cfg = l2_run(noise=False)
        doc = run_oneshot(cfg)
        validate_document(doc, "report")
        stream = load_stream(cfg)
        freqs = exact_window_freqs(stream, len(stream), cfg.window)
        l2 = exact_lp(freqs, 2)
        est = {e["item"]: e["noisy_freq"] for e in doc["report"]["entries"]}
        assert 9 in est
        assert abs(est[9] - freqs[9]) <= cfg.alpha / 4 * l2
        assert doc["config"] == cfg.as_dict()
        assert doc["space"]["live_slots"] >= 1 and "released_norm" in doc["report"]

    def test_identical_seeds_identical_bytes(self):
        a = dumps(run_oneshot(l2_run(timing=False)))
        b = dumps(run_oneshot(l2_run(timing=False)))
        assert a == b and "wall_time" not in a
        c = run_oneshot(l2_run())
        c.pop("timing")
        c["config"]["timing"] = False
        assert dumps(c) == a

    def test_l1_mode_and_window_check(self):
        cfg = RunConfig(mode="oneshot-l1", alpha=0.1, window=2000, m=3000,
                        generator="planted:item=4,rho=0.3")
        doc = run_oneshot(cfg)
        validate_document(doc, "report")
        assert doc["report"]["entries"][0]["item"] == 4
        with pytest.raises(ValueError):
            run_oneshot(RunConfig(mode="oneshot-l1", window=10, input="-"), stream=[1, 2])

    def test_rejects_non_oneshot_mode(self):
        with pytest.raises(ValueError):
            run_oneshot(RunConfig(mode="continual", m=10, window=5, generator="uniform"))

    def test_single_read_per_run(self, tmp_path, monkeypatch):
        path = tmp_path / "s.txt"
        write_stream(str(path), [1, 2, 1, 1] * 50)
        reads = []
        real = harness.parse_stream
        monkeypatch.setattr(harness, "parse_stream", lambda *a: reads.append(a) or real(*a))
        run_experiment(RunConfig(mode="oneshot-l1", alpha=0.3, window=100, n=2, trials=3,
                                 input=str(path)))
        assert len(reads) == 1


class TestContinual:
    def test_line_per_position(self):
        cfg = RunConfig(mode="continual", alpha=0.5, window=64, n=4, m=150, generator="uniform")
        lines = list(run_continual(cfg))
        assert len(lines) == 150
        assert lines[0]["config"] == cfg.as_dict()
        assert all("config" not in ln for ln in lines[1:])
        for ln in lines:
            validate_document(ln, "continual")
        assert [ln["t"] for ln in lines] == list(range(1, 151))

    def test_constant_stream(self):
        w = 256
        cfg = RunConfig(mode="continual", alpha=0.5, window=w, n=3, m=600,
                        generator="planted:item=2,rho=1.0")
        lines = list(run_continual(cfg))[w - 1:]
        hit = sum(any(e["item"] == 2 for e in ln["entries"]) for ln in lines)
        assert hit / len(lines) >= 0.95

    def test_all_distinct_stream(self):
        cfg = RunConfig(mode="continual", alpha=0.5, window=1024, n=3000, m=1500,
                        generator="all-distinct")
        lines = list(run_continual(cfg))
        assert sum(not ln["entries"] for ln in lines) / len(lines) >= 0.95


class TestExperiment:
    def test_noise_off_metrics(self):
        doc = run_experiment(l2_run(noise=False, trials=5))
        validate_document(doc, "metrics")
        assert doc["recall"] == 1.0 and doc["violations"] == 0
        assert doc["target_failure_rate"] == pytest.approx(1 / 5000)
        assert len(doc["per_trial"]) == 5
        assert len({t["seed"] for t in doc["per_trial"]}) == 5

    def test_reproducible_without_timing(self):
        a = dumps(run_experiment(l2_run(trials=2, timing=False)))
        assert a == dumps(run_experiment(l2_run(trials=2, timing=False)))

    def test_continual_metrics(self):
        cfg = RunConfig(mode="continual", alpha=0.5, window=256, n=10, m=400, trials=2,
                        generator="planted:item=3,rho=0.5")
        doc = run_experiment(cfg)
        validate_document(doc, "metrics")
        assert doc["error_normalizer"] == "W"
        assert doc["recall"] >= 0.95

    def test_schema_rejects_bad_documents(self):
        doc = run_experiment(l2_run(noise=False, trials=1))
        doc["recall"] = 2.0
        with pytest.raises(jsonschema.ValidationError):
            validate_document(doc, "metrics")
        with pytest.raises(jsonschema.ValidationError):
            validate_document({"t": 0, "entries": []}, "continual")

    def test_score_report(self):
        freqs = {1: 10, 2: 1, 3: 1}
        s = score_report([(1, 9.0), (2, 1.0), (7, 0.5)], freqs, 0.5, 1)
        assert s["recall"] == 1.0 and s["violations"] == 2 and s["reported"] == 3
        assert s["max_error"] == pytest.approx(1 / 12)


def test_oracle_mode():
    cfg = RunConfig(mode="oracle", window=500, m=1000, n=100, generator="zipf:s=1.4")
    doc = run_oracle(cfg)
    validate_document(doc, "oracle")
    assert doc["oracle"]["l1"]["norm"] == 500
    assert doc["oracle"]["l2"]["must_report"][0]["item"] == 1


class TestCli:
    def run(self, argv, capsys):
        code = main(argv)
        out = capsys.readouterr()
        return code, out.out, out.err

    def test_oneshot_to_stdout(self, capsys):
        code, out, _ = self.run(["--mode", "oneshot-l1", "--generator", "planted:item=3,rho=0.4",
                                 "--m", "3000", "--window", "2000", "--alpha", "0.1"], capsys)
        assert code == EXIT_OK
        doc = json.loads(out)
        validate_document(doc, "report")
        assert doc["report"]["entries"][0]["item"] == 3

    def test_config_file_and_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# demo\nmode = oneshot-l1\nalpha=0.1\nwindow = 2000\nm = 3000\n"
                       "generator = planted:item=3,rho=0.4\nkappa-w = 0\n")
        assert read_config_file(str(cfg))["kappa_w"] == 0.0
        code, out, _ = self.run(["--config", str(cfg), "--alpha", "0.2", "--timing", "false"], capsys)
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["config"]["alpha"] == 0.2 and doc["config"]["window"] == 2000
        assert "timing" not in doc

    def test_continual_output_file(self, tmp_path, capsys):
        stream = tmp_path / "s.txt"
        write_stream(str(stream), [1, 1, 2, 1, 1, 3])
        out = tmp_path / "o.jsonl"
        code, _, _ = self.run(["--mode", "continual", "--input", str(stream), "--window", "4",
                               "--n", "3", "--alpha", "0.5", "--noise", "false",
                               "--output", str(out)], capsys)
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 6 and json.loads(lines[0])["config"]["window"] == 4

    def test_trials_emit_metrics(self, capsys):
        code, out, _ = self.run(["--mode", "oneshot-l1", "--generator", "uniform", "--m", "500",
                                 "--window", "300", "--n", "50", "--trials", "3"], capsys)
        assert code == EXIT_OK
        validate_document(json.loads(out), "metrics")

    @pytest.mark.parametrize("argv", [
        ["--mode", "oneshot-l1", "--generator", "uniform", "--m", "100", "--window", "200"],
        ["--mode", "oneshot-l1", "--alpha", "2", "--input", "/nonexistent"],
        ["--mode", "oneshot-l1"],
        ["--bogus"],
        ["--config", "/nonexistent.cfg"],
        ["--mode", "oneshot-l2", "--generator", "zipf", "--m", "1000", "--window", "100"],
    ])
    def test_config_errors_exit_2(self, argv, capsys):
        assert self.run(argv, capsys)[0] == EXIT_CONFIG

    def test_input_errors_exit_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("1\nx\n")
        assert self.run(["--mode", "oracle", "--input", str(bad), "--window", "1"], capsys)[0] == EXIT_INPUT
        assert self.run(["--mode", "oracle", "--input", str(tmp_path / "no"), "--window", "1"],
                        capsys)[0] == EXIT_INPUT
        big = tmp_path / "big.txt"
        big.write_text("5\n")
        code, _, err = self.run(["--mode", "oracle", "--input", str(big), "--window", "1",
                                 "--n", "3"], capsys)
        assert code == EXIT_INPUT and "outside" in err

    def test_window_longer_than_file_is_config_error(self, tmp_path, capsys):
        path = tmp_path / "s.txt"
        write_stream(str(path), [1, 2])
        assert self.run(["--mode", "oracle", "--input", str(path), "--window", "5"],
                        capsys)[0] == EXIT_CONFIG

    def test_module_entry_point(self, tmp_path):
        path = tmp_path / "s.txt"
        write_stream(str(path), [1, 2, 2])
        proc = subprocess.run([sys.executable, "-m", "dpslide", "--mode", "oracle",
                               "--input", str(path), "--window", "3", "--n", "2"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["oracle"]["l1"]["norm"] == 3
