import json

import numpy as np
import pytest

from nsp_lab.cli import main
from nsp_lab.measures import SparsenessMeasure
from nsp_lab.subspaces import write_matrix_csv
from nsp_lab.suite import run_suite


@pytest.fixture
def null_111_matrix(tmp_path):
    g = np.array([1.0, 1.0, 1.0]) / np.sqrt(3)
    q, _ = np.linalg.qr(np.column_stack([g, np.eye(3)[:, :2]]))
    path = tmp_path / "A.csv"
    write_matrix_csv(path, q[:, 1:].T)
    return path


class TestCommands:
    def test_nsc(self, null_111_matrix, tmp_path, capsys):
        out = tmp_path / "nsc.json"
        code = main(["nsc", "--matrix", str(null_111_matrix), "--measure", "l1",
                     "--k", "1", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert float(payload["theta"]) == pytest.approx(0.5, abs=1e-12)
        assert payload["method"] == "exact_1d"

    def test_probe(self, null_111_matrix, tmp_path):
        out = tmp_path / "probe.json"
        code = main(["probe", "--matrix", str(null_111_matrix), "--measure", "l1",
                     "--k", "1", "--d", "0.05", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["outcome"] == "passed_at_resolution"

    def test_recover(self, null_111_matrix, tmp_path):
        a = np.loadtxt(null_111_matrix, delimiter=",", skiprows=1)
        x_bar = np.array([5.0, 0.0, 0.0])
        y_path = tmp_path / "y.csv"
        write_matrix_csv(y_path, (a @ x_bar).reshape(1, -1))
        out = tmp_path / "recover.json"
        code = main(["recover", "--matrix", str(null_111_matrix), "--y", str(y_path),
                     "--measure", "lp(p=1)", "--k", "1", "--method", "enumerate",
                     "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert np.allclose(payload["x_hat"], x_bar, atol=1e-8)

    def test_width(self, tmp_path):
        out = tmp_path / "width.json"
        code = main(["width", "--measure", "lp(p=1)", "--n", "4", "--k", "4",
                     "--draws", "2000", "--seed", "1", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["inner_search"] == "whole_sphere"
        assert 1.5 < float(payload["mean"]) < 2.2

    def test_width_with_extension(self, tmp_path):
        out = tmp_path / "width.json"
        code = main(["width", "--measure", "l1", "--n", "4", "--k", "1",
                     "--draws", "1000", "--d", "0.1", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert float(payload["extended_mean"]) >= float(payload["mean"])

    def test_tradeoff_sweep_csv(self, tmp_path):
        out = tmp_path / "tradeoff.csv"
        code = main(["tradeoff", "--beta", "100", "--gamma-sweep", "63:79:2",
                     "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].split(",")[:3] == ["gamma", "delta", "C"]
        cs = [float(ln.split(",")[2]) for ln in lines[1:]]
        assert all(a > b for a, b in zip(cs, cs[1:]))

    def test_mc_deterministic_bytes(self, tmp_path):
        args = ["mc", "--n", "4", "--m", "2", "--k", "1", "--trials", "40",
                "--seed", "9", "--d-grid", "0.001"]
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_boundary(self, tmp_path):
        out = tmp_path / "region.csv"
        code = main(["boundary", "--measure", "mcp_zap(alpha=2)", "--grid", "8x8",
                     "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# nsp-lab boundary_map")
        assert len([ln for ln in lines if not ln.startswith("#")]) == 64

    def test_ce1(self, tmp_path):
        out = tmp_path / "ce1.json"
        code = main(["ce1", "--d-list", "0.1,0.01", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert all(entry["found"] for entry in payload)

    def test_config_file_with_flag_override(self, null_111_matrix, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("measure=l1\nk=1\nseed=3\n")
        code = main(["nsc", "--matrix", str(null_111_matrix), "--config", str(cfg),
                     "--measure", "lp(p=0.5)"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        # flag wins over config: worst split of the half power is 1/2
        assert float(payload["theta"]) == pytest.approx(0.5, abs=1e-9)


class TestExitCodes:
    def test_usage_error_unknown_command(self):
        assert main(["frobnicate"]) == 2

    def test_usage_error_missing_required(self, capsys):
        assert main(["nsc", "--measure", "l1"]) == 2
        assert "missing required" in capsys.readouterr().err

    def test_usage_error_bad_measure(self, null_111_matrix):
        assert main(["nsc", "--matrix", str(null_111_matrix), "--measure", "zap!",
                     "--k", "1"]) == 2

    def test_suite_unknown_name_is_usage_error(self):
        assert main(["suite", "--name", "everything"]) == 2


class TestSuiteRuns:
    def test_quick_suite_passes(self, tmp_path, capsys):
        out = tmp_path / "bundle.json"
        code = main(["suite", "--name", "quick", "--out", str(out)])
        assert code == 0
        bundle = json.loads(out.read_text())
        assert bundle["passed"] is True
        names = [c["name"] for c in bundle["criteria"]]
        assert "counterexample" in names
        text = capsys.readouterr().out
        assert text.count("[PASS]") == len(names)

    def test_corrupted_mcp_fails_comparison_rules(self, tmp_path):
        # mutation test: flipping the sign of the knee parameter destroys
        # the positive slope limit at zero, and the suite must notice
        def corrupted(t, _a=-2.0):
            u = _a * t
            return np.where(u < 1.0, u * (2.0 - u), 1.0)

        bad = SparsenessMeasure("mcp_zap", fn=corrupted, params={"alpha": -2.0},
                                non_decreasing=True, subadditive=True)
        out = tmp_path / "bundle.json"
        report = run_suite("quick", seed=0, out_path=out,
                           overrides={"mcp_zap": bad}, verbose=False)
        assert report.exit_status == 1
        failed = [r.name for r in report.results if not r.passed]
        assert "comparison_rules" in failed
