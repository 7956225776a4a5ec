import csv
import io
import json
import subprocess
import sys

import jsonschema
import pytest

from treegff import acceptance, cli
from treegff.serialize import CSV_HEADERS, load_schema, manifest_path


def run(capsys, *argv):
    rc = cli.main(list(argv))
    return rc, capsys.readouterr().out


def rows_of(text):
    assert "\r\n" in text
    return list(csv.DictReader(io.StringIO(text, newline="")))


class TestParsers:
    def test_int_list(self):
        assert cli.parse_int_list("2") == [2]
        assert cli.parse_int_list("2,3,5") == [2, 3, 5]
        assert cli.parse_int_list("2:10") == list(range(2, 11))

    def test_negative_values_attach(self):
        assert cli._attach_negative_values(["--h-range", "-2:2:0.5", "--h", "-0.5,0", "--d", "2"]) == \
            ["--h-range=-2:2:0.5", "--h=-0.5,0", "--d", "2"]

    def test_range(self):
        assert cli.parse_range("-2:2:0.5") == [-2 + 0.5 * k for k in range(9)]

    @pytest.mark.parametrize("text", ["a:b", "2:1", "1,x"])
    def test_int_list_bad(self, text):
        with pytest.raises(cli.UsageError):
            cli.parse_int_list(text)

    @pytest.mark.parametrize("text", ["0:1", "1:0:0.1", "0:1:-1", "0:1:0"])
    def test_range_bad(self, text):
        with pytest.raises(cli.UsageError):
            cli.parse_range(text)


class TestLambda:
    def test_single(self, capsys):
        rc, out = run(capsys, "lambda", "--d", "2", "--h", "0")
        rows = rows_of(out)
        assert rc == 0 and len(rows) == 1
        assert list(rows[0]) == CSV_HEADERS["lambda"]
        assert 1 < float(rows[0]["lambda_h"]) < 2

    def test_range_decreasing(self, capsys):
        rc, out = run(capsys, "lambda", "--d", "2", "--h-range", "-2:2:0.5", "--nodes", "200")
        lam = [float(r["lambda_h"]) for r in rows_of(out)]
        assert len(lam) == 9
        assert all(b < a for a, b in zip(lam, lam[1:]))

    def test_json_schema(self, capsys):
        _, out = run(capsys, "lambda", "--d", "3", "--h", "0,0.5", "--format", "json", "--nodes", "200")
        doc = json.loads(out)
        jsonschema.validate(doc, load_schema("lambda_table"))
        assert len(doc["rows"]) == 2

    @pytest.mark.parametrize("argv", [["--d", "1", "--h", "0"], ["--d", "2"], ["--h", "0"],
                                      ["--d", "2", "--h", "x"], ["--d", "2,3", "--h", "0"],
                                      ["--d", "2", "--h", "0", "--nodes", "1"]])
    def test_usage_errors(self, capsys, argv):
        with pytest.raises(SystemExit) as exc:
            cli.main(["lambda", *argv])
        assert exc.value.code == 2

    def test_solver_failure_exit(self, capsys):
        rc = cli.main(["lambda", "--d", "2", "--h", "0", "--tol", "1e-300", "--nodes", "50"])
        assert rc == 3
        assert "solver failure" in capsys.readouterr().err

    def test_out_with_manifest_and_gnuplot(self, tmp_path):
        out = tmp_path / "lam.csv"
        assert cli.main(["lambda", "--d", "2", "--h", "0,1", "--nodes", "200", "--out", str(out),
                         "--gnuplot"]) == 0
        assert out.exists() and out.with_suffix(".gp").exists()
        assert "lam.csv" in out.with_suffix(".gp").read_text()
        man = json.loads(manifest_path(out).read_text())
        jsonschema.validate(man, load_schema("manifest"))
        assert man["command"] == "lambda" and str(out) in man["outputs"]


class TestCritical:
    def test_bounds_d_range(self, capsys):
        rc, out = run(capsys, "bounds", "--d", "2:10")
        rows = rows_of(out)
        assert rc == 0 and len(rows) == 9
        assert all(r["chain_ok"] == "true" for r in rows)
        assert list(rows[0]) == CSV_HEADERS["critical"]

    def test_hstar_json(self, capsys):
        rc, out = run(capsys, "hstar", "--d-range", "2:3", "--format", "json", "--nodes", "200")
        doc = json.loads(out)
        jsonschema.validate(doc, load_schema("critical_report"))
        assert [r["d"] for r in doc["reports"]] == [2, 3]
        assert doc["reports"][0]["h_star"] == pytest.approx(0.5886120654747565, abs=1e-6)


class TestSpectrum:
    def test_ladder(self, capsys):
        rc, out = run(capsys, "spectrum", "--d", "2", "--top", "4")
        ev = [float(r["eigenvalue"]) for r in rows_of(out)]
        assert rc == 0
        assert ev == pytest.approx([2, 1, 0.5, 0.25], abs=1e-6)

    def test_json(self, capsys):
        _, out = run(capsys, "spectrum", "--d", "3", "--format", "json", "--nodes", "200")
        jsonschema.validate(json.loads(out), load_schema("spectrum"))


class TestSimulate:
    def test_arcsine_exact_column(self, tmp_path):
        stem = tmp_path / "arc"
        assert cli.main(["simulate", "arcsine", "--d", "2", "--n", "1", "--replicas", "1000000",
                         "--seed", "7", "--out", str(stem)]) == 0
        rows = rows_of((tmp_path / "arc.csv").read_bytes().decode())
        assert float(rows[0]["exact"]) == pytest.approx(1 / 3, rel=1e-15)
        assert abs(float(rows[0]["z_score"])) < 4.5
        doc = json.loads((tmp_path / "arc.json").read_text())
        jsonschema.validate(doc, load_schema("simulation_summary"))

    @pytest.mark.parametrize("kind", ["front", "martingale"])
    def test_front_and_martingale(self, tmp_path, kind):
        stem = tmp_path / kind
        assert cli.main(["simulate", kind, "--d", "2", "--h", "0", "--depth", "4", "--replicas", "500",
                         "--nodes", "200", "--out", str(stem)]) == 0
        doc = json.loads((tmp_path / f"{kind}.json").read_text())
        jsonschema.validate(doc, load_schema("simulation_summary"))
        rows = rows_of((tmp_path / f"{kind}.csv").read_bytes().decode())
        assert list(rows[0]) == CSV_HEADERS["front_run"]
        assert len(rows) == 500 * 5
        man = json.loads(manifest_path(tmp_path / f"{kind}.csv").read_text())
        assert man["seed"] == acceptance.DEFAULT_SEED

    def test_summary_only(self, tmp_path):
        stem = tmp_path / "s"
        cli.main(["simulate", "front", "--depth", "2", "--replicas", "10", "--nodes", "200",
                  "--out", str(stem), "--summary-only"])
        assert not (tmp_path / "s.csv").exists() and (tmp_path / "s.json").exists()

    def test_martingale_subcritical_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["simulate", "martingale", "--h", "1.0", "--depth", "2", "--replicas", "5",
                      "--nodes", "200"])
        assert exc.value.code == 2

    def test_byte_reproducible(self, tmp_path):
        args = ["simulate", "front", "--h", "0.2", "--depth", "5", "--replicas", "300", "--seed", "3",
                "--nodes", "200", "--out"]
        cli.main(args + [str(tmp_path / "a")])
        cli.main(args + [str(tmp_path / "b")])
        for ext in (".csv", ".json"):
            assert (tmp_path / f"a{ext}").read_bytes() == (tmp_path / f"b{ext}").read_bytes()

    def test_bad_config_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["simulate", "front", "--replicas", "0"])
        assert exc.value.code == 2


class TestVerify:
    def test_acceptance_failure_exit(self, tmp_path, monkeypatch):
        monkeypatch.setattr(acceptance, "run_suite",
                            lambda *a, **k: [acceptance.Criterion(1, "x", False)])
        rc = cli.main(["verify", "--out", str(tmp_path), "--no-repro-check", "--quiet"])
        assert rc == 4
        doc = json.loads((tmp_path / "verify.json").read_text())
        jsonschema.validate(doc, load_schema("verify_summary"))
        assert doc["all_passed"] is False

    def test_help_lists_defaults(self):
        proc = subprocess.run([sys.executable, "-m", "treegff", "lambda", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "default 400" in proc.stdout and "1e-9" in proc.stdout
