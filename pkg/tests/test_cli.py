import json
from fractions import Fraction

import pytest

from freewalk import freeprod as fp
from freewalk.cli import EXIT_OK, EXIT_VALIDATION, run
from freewalk.lattice import lazy_srw
from freewalk.series import green_series_freeprod


def preset(d2):
    return fp.make_config(lazy_srw(3), lazy_srw(d2), "1/2")


def _lines(capsys):
    return [json.loads(line) for line in capsys.readouterr().err.splitlines() if line.strip()]


class TestExitCodes:
    def test_asymmetric_factor(self, tmp_path, capsys):
        f = tmp_path / "bad.json"
        f.write_text(json.dumps({"dimension": 1, "atoms": [{"x": [1], "w": 1}]}))
        assert run(["inspect-factor", "--factor", str(f), "--out", str(tmp_path)]) == EXIT_VALIDATION
        assert any(d.get("kind") == "NotSymmetric" for d in _lines(capsys))

    def test_unknown_tolerance(self, tmp_path):
        assert run(["classify", "--tol", "bogus=1", "--out", str(tmp_path)]) == EXIT_VALIDATION

    def test_config_and_preset_exclusive(self, tmp_path):
        assert run(["classify", "--config", "x.json", "--preset", "3-5", "--out", str(tmp_path)]) == EXIT_VALIDATION

    def test_bad_subcommand(self):
        assert run(["frobnicate"]) == EXIT_VALIDATION


class TestArtifacts:
    def test_alpha_star(self, tmp_path):
        assert run(["alpha-star", "--preset", "3-5", "--out", str(tmp_path)]) == EXIT_OK
        doc = json.loads((tmp_path / "alpha_star.json").read_text())
        assert doc["tool_version"] and doc["config_hash"]
        assert doc["solution"]["degenerate_along"] == [2]
        assert abs(doc["alpha_star"] - 0.5476102439554291) < 1e-9

    def test_green_series_csv(self, tmp_path):
        assert run(["green-series", "--preset", "3-5", "--N", "50", "--out", str(tmp_path)]) == EXIT_OK
        lines = (tmp_path / "series.csv").read_text().splitlines()
        assert lines[0] == "n,c_n,q_tilde_n"
        assert len(lines) == 52
        assert json.loads((tmp_path / "series.meta.json").read_text())["config_hash"]

    def test_green_series_rational(self, tmp_path):
        rc = run(["green-series", "--precision", "rational", "--N", "6", "--out", str(tmp_path)])
        assert rc == EXIT_OK
        cells = [row.split(",")[1] for row in (tmp_path / "series.csv").read_text().splitlines()[1:]]
        exact = green_series_freeprod(preset(5), 6, exact=True).coefficients
        assert [Fraction(c) for c in cells] == list(exact)
        assert cells[2] == "4/15"

    @pytest.mark.parametrize("threads", ["1", "2"])
    def test_simulate_byte_identical(self, tmp_path, threads):
        outs = []
        for tag in ("a", "b"):
            d = tmp_path / tag
            argv = ["simulate", "--seed", "42", "--n", "4", "6", "--trials", "100000",
                    "--threads", threads, "--out", str(d)]
            assert run(argv) == EXIT_OK
            outs.append((d / "simulate.json").read_bytes())
        assert outs[0] == outs[1]
