#!/usr/bin/env python3
"""
Test the run harness: determinism across worker counts, checkpoints,
resumption, ledger replay and the report renderers.
"""

import sys
import json
import tempfile
import pytest
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from config import ConfigError, config_from_values
from experiments import CSV_FIELDS, StatRecord, calibration_id, plan_chunks
from harness import (
    CHECKPOINT_MAGIC,
    CheckpointError,
    ConfigMismatchError,
    HarnessError,
    ReportFormatError,
    RunResult,
    calibrated_config,
    canonical_json,
    load_result,
    read_checkpoint,
    render_csv,
    render_plotdata,
    replay_ledger,
    report,
    resume,
    run,
    write_checkpoint,
)


def zero_prob_config(out=None, **extra):
    values = {"experiment": "zero-prob", "n": 15, "p": 0.15, "trials": 40, "chunk_size": 8, "seed": 11}
    values.update(extra)
    if out:
        values["out"] = out
    return config_from_values(values)


class TestRun:
    """Test complete runs"""

    def test_run_writes_result_and_sidecar(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            out = str(Path(temp_dir) / "zero.json")
            result = run(zero_prob_config(out), progress=False)
            assert result.status == "complete"
            assert result.completed_chunks == result.total_chunks == 5
            assert load_result(out).to_json() == result.to_json()
            timing = json.loads(Path(out + ".timing.json").read_text())
            assert timing["trials_run"] == 40
            assert Path(out + ".ckpt").exists()

    def test_result_is_independent_of_worker_count(self):
        single = run(zero_prob_config(workers=1), progress=False)
        pooled = run(zero_prob_config(workers=2), progress=False)
        assert single.to_json() == pooled.to_json()

    def test_result_excludes_execution_settings(self):
        result = run(zero_prob_config(workers=1, checkpoint_every=3), progress=False)
        assert "workers" not in result.config
        assert "checkpoint_every" not in result.config

    def test_ledger_lists_every_chunk(self):
        result = run(zero_prob_config(), progress=False)
        chunks = result.ledger["chunks"]
        assert [c["index"] for c in chunks] == list(range(5))
        assert chunks[-1]["trials"] == [32, 40]
        assert result.ledger["seed"] == 11
        assert replay_ledger(result) == []

    def test_tampered_ledger_is_detected(self):
        result = run(zero_prob_config(), progress=False)
        result.ledger["chunks"][2]["digest"] = "0" * 64
        assert replay_ledger(result) == [2]

    def test_seed_changes_ledger(self):
        a = run(zero_prob_config(seed=1), progress=False)
        b = run(zero_prob_config(seed=2), progress=False)
        assert a.ledger["chunks"][0]["digest"] != b.ledger["chunks"][0]["digest"]


class TestCheckpoints:
    """Test checkpoint framing and verification"""

    def test_round_trip(self):
        cfg = zero_prob_config()
        partials = {0: {"index": 0, "trials": [0, 8], "tally": {"sums": {"x": 1}}, "digest": "ab"}}
        with tempfile.TemporaryDirectory() as temp_dir:
            path = str(Path(temp_dir) / "run.ckpt")
            write_checkpoint(path, cfg, partials, 5)
            header, restored = read_checkpoint(path)
            assert header["total_chunks"] == 5
            assert header["config"] == cfg.to_dict()
            assert restored == partials

    def test_missing(self):
        with pytest.raises(CheckpointError, match="not found"):
            read_checkpoint("/nonexistent/run.ckpt")

    def test_not_a_checkpoint(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.ckpt"
            path.write_bytes(b"PK" + bytes(64))
            with pytest.raises(CheckpointError, match="not a spectra checkpoint"):
                read_checkpoint(str(path))

    def test_corruption_fails_checksum(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.ckpt"
            write_checkpoint(str(path), zero_prob_config(), {}, 5)
            data = bytearray(path.read_bytes())
            data[10] ^= 0xFF
            path.write_bytes(bytes(data))
            with pytest.raises(CheckpointError, match="checksum"):
                read_checkpoint(str(path))

    def test_truncation_fails_checksum(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.ckpt"
            write_checkpoint(str(path), zero_prob_config(), {}, 5)
            path.write_bytes(path.read_bytes()[:-5])
            with pytest.raises(CheckpointError):
                read_checkpoint(str(path))

    def test_magic(self):
        assert CHECKPOINT_MAGIC == b"SPCK"


class TestResume:
    """Resumed runs equal uninterrupted runs"""

    def test_resume_from_partial_checkpoint(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            out = str(Path(temp_dir) / "full.json")
            full = run(zero_prob_config(out), progress=False)
            header, partials = read_checkpoint(out + ".ckpt")

            cfg = zero_prob_config(str(Path(temp_dir) / "resumed.json"))
            checkpoint = str(Path(temp_dir) / "resumed.json.ckpt")
            write_checkpoint(checkpoint, cfg, {i: partials[i] for i in (0, 3)}, len(partials))
            resumed = resume(checkpoint, progress=False)
            assert resumed.to_json() == full.to_json()

    def test_resume_complete_checkpoint(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            out = str(Path(temp_dir) / "done.json")
            full = run(zero_prob_config(out), progress=False)
            again = resume(out + ".ckpt", progress=False)
            assert again.to_json() == full.to_json()

    def test_resume_accepts_other_worker_count(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            out = str(Path(temp_dir) / "done.json")
            full = run(zero_prob_config(out), progress=False)
            invocation = zero_prob_config(out, workers=3)
            assert resume(out + ".ckpt", invocation, progress=False).to_json() == full.to_json()

    def test_resume_rejects_changed_configuration(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            out = str(Path(temp_dir) / "done.json")
            run(zero_prob_config(out), progress=False)
            with pytest.raises(ConfigMismatchError, match="trials"):
                resume(out + ".ckpt", zero_prob_config(out, trials=41), progress=False)


class TestReports:
    """Test csv, json and plotdata rendering"""

    def tail_result(self) -> RunResult:
        cfg = config_from_values({
            "experiment": "smin-tail", "n": 5, "p": 0.5, "trials": 3, "fixed_input": "identity",
            "t_grid": (0.5, 2.0),
        })
        return run(cfg, progress=False)

    def test_csv(self):
        text = render_csv(self.tail_result())
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_FIELDS)
        assert lines[1].startswith("smin_tail[t=0.5],5,0.5,1,0.0,")
        assert any(line.endswith(",true") for line in lines[1:])

    def test_plotdata(self):
        lines = render_plotdata(self.tail_result()).splitlines()
        assert lines[0] == "x,y,yerr"
        assert lines[1].startswith("0.5,0.0,")
        assert lines[2].startswith("2.0,1.0,")
        assert len(lines) == 3

    def test_plotdata_needs_tail_records(self):
        with pytest.raises(HarnessError, match="plotdata"):
            render_plotdata(run(zero_prob_config(), progress=False))

    def test_report_from_file(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            out = str(Path(temp_dir) / "zero.json")
            result = run(zero_prob_config(out), progress=False)
            assert report(out, "json") == result.to_json()
            assert report(out, "csv") == render_csv(result)
            with pytest.raises(HarnessError, match="format"):
                report(out, "xlsx")

    def test_report_format_errors(self):
        result = run(zero_prob_config(), progress=False)
        with tempfile.TemporaryDirectory() as temp_dir:
            out = str(Path(temp_dir) / "zero.json")
            Path(out).write_text(result.to_json())
            with pytest.raises(ReportFormatError, match="format"):
                report(out, "xlsx")
            # zero-prob has no t grid to plot
            with pytest.raises(ReportFormatError):
                report(out, "plotdata")

    def test_report_rejects_non_results(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "list.json"
            path.write_text("[1, 2]")
            with pytest.raises(HarnessError):
                report(str(path), "csv")
            path.write_text("{broken")
            with pytest.raises(HarnessError):
                report(str(path), "csv")

    def test_report_missing_file(self):
        with pytest.raises(OSError):
            report("/nonexistent/result.json", "csv")

    def test_passed_ignores_unchecked_records(self):
        records = [
            StatRecord("a", 5, 0.5, 1, 0.1, 0.0),
            StatRecord("b", 5, 0.5, 1, 0.1, 0.0, passed=True),
        ]
        result = RunResult(config={}, records=records, ledger={})
        assert result.passed
        result.records.append(StatRecord("c", 5, 0.5, 1, 0.1, 0.0, passed=False))
        assert not result.passed
        assert [r.name for r in result.failures] == ["c"]

    def test_canonical_json_sorts_keys(self):
        assert canonical_json({"b": 1, "a": 2}) == canonical_json({"a": 2, "b": 1})


class TestCalibration:
    """Test taking c_norm from a norm-calibration result"""

    def calibration_run(self, **extra):
        values = {"experiment": "norm-calibration", "n": 40, "p": 0.15, "trials": 12, "chunk_size": 4, "seed": 3}
        values.update(extra)
        return run(config_from_values(values), progress=False)

    def test_calibrated_constant_and_provenance(self):
        calibration = self.calibration_run()
        value = next(r.empirical for r in calibration.records if r.name == "c_norm_calibrated")
        config = calibrated_config(zero_prob_config(), calibration)
        assert config.constants.c_norm == value
        provenance = config.constants.provenance["c_norm"]
        assert provenance == "calibrated:" + calibration_id(calibration.config)
        assert provenance.startswith("calibrated:norm-calibration-")
        assert config.constants.provenance["c_hg"] == "assumed"

    def test_calibration_reaches_the_result(self):
        calibration = self.calibration_run()
        result = run(calibrated_config(zero_prob_config(), calibration), progress=False)
        stored = result.config["constants"]["provenance"]["c_norm"]
        assert stored == "calibrated:" + calibration_id(calibration.config)

    def test_rejects_other_experiments(self):
        with pytest.raises(ConfigError, match="norm-calibration"):
            calibrated_config(zero_prob_config(), run(zero_prob_config(), progress=False))

    def test_rejects_missing_record(self):
        calibration = self.calibration_run()
        calibration.records = [r for r in calibration.records if r.name != "c_norm_calibrated"]
        with pytest.raises(ConfigError, match="c_norm_calibrated"):
            calibrated_config(zero_prob_config(), calibration)
