import json
import math
from pathlib import Path

import numpy as np
import pytest

from filaments.cli import main, parse_filter, parse_grid
from filaments.errors import InvalidInputError
from filaments.io import format_float, read_point_cloud, svg_scatter, write_csv, write_json
from filaments.synthetic import KINDS, make_points


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def galaxies(tmp_path):
    return write(tmp_path / "g.csv", "ra,dec,z\n150,10,0.046\n151,11,0.060\n152,12,0.049\n153,13,0.044\n")


class TestReader:
    def test_slice(self, galaxies):
        pc = read_point_cloud(galaxies, ["ra", "dec"], [("z", 0.045, 0.050)])
        assert pc.points.tolist() == [[150, 10], [152, 12]]
        assert pc.columns == ("ra", "dec")
        assert pc.meta["rows_read"] == 4 and pc.meta["dropped"] == {"z:0.045:0.05": 2}

    def test_no_filters(self, galaxies):
        assert read_point_cloud(galaxies).points.shape == (4, 3)

    def test_index_columns(self, galaxies):
        assert read_point_cloud(galaxies, ["1", "0"]).points[0].tolist() == [10, 150]

    def test_everything_filtered(self, galaxies):
        with pytest.raises(InvalidInputError, match="no rows"):
            read_point_cloud(galaxies, filters=[("z", 1, 2)])

    def test_missing_column(self, galaxies):
        with pytest.raises(InvalidInputError, match="'mag'"):
            read_point_cloud(galaxies, ["ra", "mag"])

    def test_non_numeric_row(self, tmp_path):
        p = write(tmp_path / "bad.csv", "x,y\n1,2\n3,oops\n")
        with pytest.raises(InvalidInputError, match="row 3"):
            read_point_cloud(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_point_cloud(tmp_path / "nope.csv")


class TestWriters:
    def test_csv_format(self, tmp_path):
        write_csv(tmp_path / "o.csv", ["a", "k"], [np.array([0.1, 1e-20]), np.array([3, 4])])
        raw = (tmp_path / "o.csv").read_bytes()
        assert raw == b"a,k\n0.1,3\n1e-20,4\n"

    def test_float_round_trip(self, rng):
        for v in rng.normal(size=50) * 10.0 ** rng.integers(-30, 30, 50):
            assert float(format_float(v)) == v
        assert format_float(math.nan) == "nan"

    def test_json_sorted(self, tmp_path):
        write_json(tmp_path / "o.json", {"b": np.float64(1.5), "a": np.arange(2)})
        assert json.loads((tmp_path / "o.json").read_text()) == {"a": [0, 1], "b": 1.5}
        assert (tmp_path / "o.json").read_text().index('"a"') < (tmp_path / "o.json").read_text().index('"b"')

    def test_svg(self, tmp_path):
        svg_scatter(tmp_path / "s.svg", np.zeros((3, 2)) + [[0, 0], [1, 1], [2, 0]], np.array([[1.0, 0.5]]),
                    values=[1.0], radii=[0.2])
        text = (tmp_path / "s.svg").read_text()
        assert text.startswith("<svg") and text.count("<circle") == 5


class TestSynthetic:
    def test_noiseless_circle(self):
        X = make_points("circle", 500, 0.0, seed=1)
        assert np.allclose(np.linalg.norm(X, axis=1), 1, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("kind", KINDS)
    def test_kinds(self, kind):
        X = make_points(kind, 100, 0.05, seed=2)
        assert X.shape == (100, 2) and np.all(np.isfinite(X))

    def test_cross_arms(self):
        X = make_points("cross", 400, 0.0, seed=2)
        assert np.all(np.min(np.abs(X), axis=1) == 0)

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            make_points("torus", 100)
        with pytest.raises(InvalidInputError):
            make_points("circle", 5)

    def test_synth_command_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["synth", "--kind", "spiral", "--n", "200", "--seed", "4", "--out", str(a)]) == 0
        assert main(["synth", "--kind", "spiral", "--n", "200", "--seed", "4", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().splitlines()[0] == "x,y"


class TestParsing:
    def test_filter(self):
        assert parse_filter("z:0.045:0.050") == ["z", 0.045, 0.05]
        assert parse_filter("a:b:-1:2") == ["a:b", -1.0, 2.0]
        with pytest.raises(InvalidInputError):
            parse_filter("z:0.1")
        with pytest.raises(InvalidInputError):
            parse_filter("z:lo:hi")

    def test_grid(self):
        assert parse_grid("50x50") == [50, 50]
        with pytest.raises(InvalidInputError):
            parse_grid("fifty")


@pytest.fixture(scope="module")
def circle_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    p = d / "circle.csv"
    assert main(["synth", "--kind", "circle", "--n", "1000", "--seed", "3", "--out", str(p)]) == 0
    return p


def strip_timings(path):
    m = json.loads(Path(path).read_text())
    m.pop("timings", None)
    m["config"].pop("out", None)
    return m


class TestCommands:
    def test_estimate(self, circle_csv, tmp_path):
        assert main(["estimate", "--input", str(circle_csv), "--out", str(tmp_path / "a")]) == 0
        rows = np.genfromtxt(tmp_path / "a" / "ridge.csv", delimiter=",", names=True)
        assert rows.size > 20
        assert np.all(rows["lambda2"] < 0) and np.all(rows["curve_id"] >= 0)
        man = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert man["resolved"]["h"] > 0 and man["counts"]["ridge_points"] == rows.size
        assert (tmp_path / "a" / "ridge.svg").exists()

    def test_estimate_repeatable(self, circle_csv, tmp_path):
        for name in ("a", "b"):
            assert main(["estimate", "--input", str(circle_csv), "--seed", "11", "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a" / "ridge.csv").read_bytes() == (tmp_path / "b" / "ridge.csv").read_bytes()
        assert strip_timings(tmp_path / "a" / "manifest.json") == strip_timings(tmp_path / "b" / "manifest.json")

    def test_config_file_and_override(self, circle_csv, tmp_path):
        cfg = write(tmp_path / "c.json", json.dumps({"input": str(circle_csv), "tau": 0.5, "bandwidth-multiplier": 0.7}))
        out = tmp_path / "o"
        assert main(["estimate", "--config", str(cfg), "--tau", "0.2", "--out", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["config"]["tau"] == 0.2 and man["config"]["bandwidth_multiplier"] == 0.7
        assert man["resolved"]["bandwidth_rule"] == "auto x 0.7"

    def test_manifest_reproduces(self, circle_csv, tmp_path):
        assert main(["estimate", "--input", str(circle_csv), "--tau", "0.2", "--out", str(tmp_path / "a")]) == 0
        echoed = json.loads((tmp_path / "a" / "manifest.json").read_text())["config"]
        echoed["out"] = str(tmp_path / "b")
        cfg = write(tmp_path / "echo.json", json.dumps(echoed))
        assert main(["estimate", "--config", str(cfg)]) == 0
        assert (tmp_path / "a" / "ridge.csv").read_bytes() == (tmp_path / "b" / "ridge.csv").read_bytes()

    def test_empty_ridge_warning(self, tmp_path):
        t = np.linspace(-1, 1, 5)
        X = np.array([(a, b) for a in t for b in t])
        p = tmp_path / "lattice.csv"
        write_csv(p, ["x", "y"], [X[:, 0], X[:, 1]])
        out = tmp_path / "o"
        assert main(["estimate", "--input", str(p), "--tau", "0.999", "--grid", "3x3", "--out", str(out)]) == 3
        man = json.loads((out / "manifest.json").read_text())
        assert man["status"] == "warning" and man["warnings"] == ["empty ridge"]
        assert (out / "ridge.csv").read_text().count("\n") == 1

    def test_uncertainty(self, circle_csv, tmp_path):
        out = tmp_path / "u"
        assert main(["uncertainty", "--input", str(circle_csv), "--B", "7", "--alpha", "0.2", "--seeding", "base",
                     "--out", str(out)]) == 0
        unc = np.genfromtxt(out / "uncertainty.csv", delimiter=",", names=True)
        conf = np.genfromtxt(out / "confidence.csv", delimiter=",", names=True)
        D = np.genfromtxt(out / "distances.csv", delimiter=",", skip_header=1)[:, 1:]
        assert np.all(unc["B_effective"] == 7)
        assert np.all(conf["radius"] >= 0)
        k = math.ceil(0.8 * 7)
        assert np.array_equal(conf["radius"], np.sort(D, axis=1)[:, k - 1])
        assert np.allclose(unc["rho2_hat"], (D ** 2).mean(axis=1), rtol=1e-12)
        assert (out / "uncertainty.svg").exists()

    def test_validate_mode_conditions(self, tmp_path):
        status = main(["validate", "--suite", "lemma3", "--out", str(tmp_path)])
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["suite"] == "lemma3" and rep["cases"] == 1000
        assert status in (0, 3) and (tmp_path / "example.svg").exists()

    def test_validate_derivatives(self, tmp_path):
        assert main(["validate", "--suite", "derivatives", "--out", str(tmp_path)]) == 0
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["passed"] and all(c["value"] < 1e-5 for c in rep["checks"])

    @pytest.mark.parametrize("argv", [
        ["validate", "--suite", "nope"],
        ["validate", "--suite", "coverage", "--repetitions", "0"],
        ["estimate", "--tau", "1.5", "--input", "x.csv"],
        ["estimate", "--input", "missing.csv"],
        ["estimate", "--tau", "abc"],
    ])
    def test_user_errors(self, argv, tmp_path, capsys):
        try:
            status = main(argv + ["--out", str(tmp_path)])
        except SystemExit as exc:
            status = exc.code
        assert status == 1
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["status"] == 1 and record["message"]

    def test_error_record_file(self, tmp_path):
        assert main(["estimate", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 1
        rec = json.loads((tmp_path / "error.json").read_text())
        assert rec["error"] == "InvalidInputError"

    def test_unknown_suite_lists_suites(self, tmp_path, capsys):
        main(["validate", "--suite", "nope", "--out", str(tmp_path)])
        msg = json.loads(capsys.readouterr().err.strip())["message"]
        for s in ("derivatives", "spectral", "lemma3", "clt", "rates", "coverage"):
            assert s in msg
