"""Command-line interface: exit codes, outputs, determinism, batch mode."""

import json
import os

import numpy as np
import pytest

from barriergrasp.cli import main

SHORT = ["--override", "duration=0.015"]


def run_cli(argv):
    return main(argv)


class TestValidate:
    def test_preset_passes(self, capsys):
        code = run_cli(["validate", "--scenario", "cube_twist"])
        out = capsys.readouterr().out
        assert code == 0
        assert "all audits passed" in out
        assert out.count("PASS") == 4

    def test_json_output(self, capsys):
        code = run_cli(["validate", "--scenario", "cube_twist", "--json"])
        doc = json.loads(capsys.readouterr().out)
        assert code == 0
        assert doc["passed"] is True
        assert {a["name"] for a in doc["audits"]} == {
            "joint_count", "chart_orthogonality", "chart_domains",
            "grasp_map_rank"}

    def test_unknown_scenario_is_bad_input(self, capsys):
        code = run_cli(["validate", "--scenario", "missing_scenario"])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_bad_override_is_bad_input(self, capsys):
        code = run_cli(["validate", "--scenario", "cube_twist",
                        "--override", "no.such=1"])
        assert code == 2

    def test_audit_failure_exit_code(self, capsys):
        # an unreachable object makes the initial-grasp audits fail
        code = run_cli(["validate", "--scenario", "cube_twist",
                        "--override", "object_pose.position.2=5.0"])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out


class TestRun:
    def test_outputs_written(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        code = run_cli(["run", "--scenario", "cube_twist", *SHORT,
                        "--out", out, "--json"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["status"] == "completed"
        assert doc["samples"] == 5
        assert os.path.exists(os.path.join(out, "trace.csv"))
        assert os.path.exists(os.path.join(out, "summary.json"))
        with open(os.path.join(out, "summary.json")) as fh:
            assert json.load(fh) == doc

    def test_trace_bytes_stable(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = str(tmp_path / sub)
            assert run_cli(["run", "--scenario", "cube_twist", *SHORT,
                            "--out", out, "--json"]) == 0
            with open(os.path.join(out, "trace.csv"), "rb") as fh:
                outs.append(fh.read())
        assert outs[0] == outs[1]

    def test_plot_renders_figures(self, tmp_path):
        out = str(tmp_path / "p")
        code = run_cli(["run", "--scenario", "cube_twist", *SHORT,
                        "--out", out, "--plot", "--json"])
        assert code == 0
        pngs = [f for f in os.listdir(out) if f.endswith(".png")]
        assert "torques.png" in pngs
        assert "margins_friction.png" in pngs
        assert len(pngs) >= 5

    def test_filter_disable_override(self, tmp_path, capsys):
        out = str(tmp_path / "nf")
        code = run_cli(["run", "--scenario", "cube_twist", *SHORT,
                        "--override", "filter_enabled=false",
                        "--out", out, "--json"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["filter_enabled"] is False


class TestEnvelope:
    def test_csv_written(self, tmp_path, capsys):
        out = str(tmp_path / "env")
        code = run_cli(["envelope", "--out", out, "--json"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["points"] == 400
        path = os.path.join(out, "envelope.csv")
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert data.dtype.names == ("q", "v_lo_linear", "v_hi_linear",
                                    "v_lo_cubic", "v_hi_cubic",
                                    "v_lo_arctan", "v_hi_arctan")
        assert data["v_lo_linear"][0] == 0.0
        assert data["v_hi_linear"][-1] == 0.0

    def test_plot_figure(self, tmp_path):
        out = str(tmp_path / "envp")
        assert run_cli(["envelope", "--out", out, "--plot"]) == 0
        assert os.path.exists(os.path.join(out, "envelope.png"))

    def test_bytes_stable(self, tmp_path):
        blobs = []
        for sub in ("a", "b"):
            out = str(tmp_path / sub)
            assert run_cli(["envelope", "--out", out]) == 0
            with open(os.path.join(out, "envelope.csv"), "rb") as fh:
                blobs.append(fh.read())
        assert blobs[0] == blobs[1]


class TestBatch:
    def manifest(self, tmp_path):
        doc = {"runs": [
            {"name": "on", "scenario": "cube_twist",
             "overrides": ["duration=0.009"]},
            {"name": "off", "scenario": "cube_twist",
             "overrides": ["duration=0.009", "filter_enabled=false"]},
        ]}
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(doc))
        return str(path)

    def test_serial_batch(self, tmp_path, capsys):
        out = str(tmp_path / "batch")
        code = run_cli(["batch", "--manifest", self.manifest(tmp_path),
                        "--out", out, "--json"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["n_failed"] == 0
        assert {r["name"] for r in report["runs"]} == {"on", "off"}
        for name in ("on", "off"):
            assert os.path.exists(os.path.join(out, name, "trace.csv"))
        assert os.path.exists(os.path.join(out, "batch_report.json"))

    def test_parallel_matches_serial(self, tmp_path):
        man = self.manifest(tmp_path)
        blobs = {}
        for label, parallel in (("s", "1"), ("p", "2")):
            out = str(tmp_path / label)
            assert run_cli(["batch", "--manifest", man, "--out", out,
                            "--parallel", parallel, "--json"]) == 0
            for name in ("on", "off"):
                with open(os.path.join(out, name, "trace.csv"), "rb") as fh:
                    blobs[(label, name)] = fh.read()
        assert blobs[("s", "on")] == blobs[("p", "on")]
        assert blobs[("s", "off")] == blobs[("p", "off")]

    def test_bad_entry_does_not_sink_batch(self, tmp_path, capsys):
        doc = {"runs": [
            {"name": "good", "scenario": "cube_twist",
             "overrides": ["duration=0.009"]},
            {"name": "bad", "scenario": "missing_scenario"},
        ]}
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        out = str(tmp_path / "b")
        code = run_cli(["batch", "--manifest", str(path), "--out", out, "--json"])
        assert code == 1
        report = json.loads(capsys.readouterr().out)
        assert report["n_failed"] == 1
        assert os.path.exists(os.path.join(out, "good", "summary.json"))

    def test_missing_manifest_is_bad_input(self, tmp_path):
        assert run_cli(["batch", "--manifest", str(tmp_path / "nope.json"),
                        "--out", str(tmp_path / "o")]) == 2
