import json
import math
import subprocess
import sys

import pytest

from poincare_gap import __version__
from poincare_gap.geometry import rectangle, save_polygon
from poincare_gap.harness import experiments as X
from poincare_gap.harness.cli import main
from poincare_gap.harness.report import dumps, samples_csv
from poincare_gap.harness.svg import scatter_svg
from poincare_gap.logvalue import LogValue
from poincare_gap.weights import Weight


@pytest.fixture
def square_file(tmp_path):
    path = tmp_path / "square.json"
    save_polygon(rectangle(1.0, 1.0), path)
    return path


# -- exit codes -------------------------------------------------------------------
def test_pip_ok(capsys):
    assert main(["pip", "--p", "2"]) == 0
    assert "3.14159265358979" in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    assert main(["frobnicate"]) == 2
    assert main(["pip"]) == 2  # --p is required
    assert main(["constants"]) == 2
    assert main(["eig2d", "--polygon", str(tmp_path / "missing.json"), "--p", "2"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"vertices": [[0, 0], [2, 0], [1, 0.3], [2, 2], [0, 2]]}))
    assert main(["eig2d", "--polygon", str(bad), "--p", "2"]) == 2
    assert main(["eig1d", "--p", "0.5"]) == 2
    assert main(["eig1d", "--p", "2", "--weight", '{"kind": "nope"}']) == 2


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "poincare_gap", "pip", "--p", "3"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "pi_p" in r.stdout


# -- JSON contracts ---------------------------------------------------------------
def test_constants_json(tmp_path):
    assert main(["constants", "--p", "2", "--m", "1", "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "constants.json").read_text())
    assert {"k0", "k1", "k2", "k3", "eta0", "checks"} <= set(d)
    assert main(["constants", "--grid", "--out", str(tmp_path / "grid.json")]) == 0
    g = json.loads((tmp_path / "grid.json").read_text())
    assert g["schema"] == "1" and len(g["reports"]) == 15


def test_eig1d_json(tmp_path):
    assert main(["eig1d", "--p", "2", "--weight", "x", "--out", str(tmp_path / "e.json")]) == 0
    d = json.loads((tmp_path / "e.json").read_text())
    assert d["result"]["mu"] == pytest.approx(14.681970642123893, rel=1e-8)
    assert "profile" not in d["result"]


def test_eig2d_and_verify(tmp_path, square_file):
    assert main(["eig2d", "--polygon", str(square_file), "--p", "2", "--h", "0.1",
                 "--out", str(tmp_path / "e2.json")]) == 0
    d = json.loads((tmp_path / "e2.json").read_text())
    assert d["result"]["mu"] == pytest.approx(math.pi**2, rel=1e-2)
    assert d["checks"]["rigidity_holds"] and d["checks"]["linf"]["holds"]
    assert main(["verify", "--polygon", str(square_file), "--p", "2", "--h", "0.1",
                 "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "verify.json").read_text())["sample"]
    assert s["ratio"] == pytest.approx(8 * math.pi**2, rel=3e-2)


def test_report_json_special_values():
    text = dumps({"a": math.inf, "b": math.nan, "c": LogValue.from_value(2.0)})
    d = json.loads(text)
    assert d["a"] == "inf" and d["b"] == "nan"
    assert float(d["c"]["ln"]) == pytest.approx(math.log(2.0), rel=1e-15)  # decimal string keeps precision


# -- Blaschke outputs ---------------------------------------------------------------
def _blaschke(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["blaschke", "--count", "4", "--seed", "3", "--h", "0.1", "--out", str(out), *extra])
    return code, out


def test_blaschke_files_and_determinism(tmp_path):
    code, out = _blaschke(tmp_path, "a")
    assert code in (0, 1)  # the band check decides; the files must exist either way
    for name in ("samples.csv", "diagram.svg", "report.json"):
        assert (out / name).is_file()
    header = (out / "samples.csv").read_text().splitlines()[0]
    assert header == "seed,p,D,a1,a2,width,mu,deficit,ratio,residual,status"
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema"] == "1" and rep["version"] == __version__
    assert {"constants", "tolerances", "fitted", "checks", "parameters", "runtime"} <= set(rep)
    assert rep["checks"]["floor_all"]
    svg = (out / "diagram.svg").read_text()
    assert svg.startswith("<svg") and "http" not in svg.replace("http://www.w3.org/2000/svg", "")
    assert len(svg.encode()) < 1_000_000
    _, again = _blaschke(tmp_path, "b", "--threads", "3")
    assert (again / "samples.csv").read_bytes() == (out / "samples.csv").read_bytes()


def test_sample_seeds_are_reproducible():
    assert X.sample_seeds(7, 5) == X.sample_seeds(7, 5)
    assert X.sample_seeds(7, 5) != X.sample_seeds(8, 5)
    assert X.polygon_points_for(13) == 6


def test_threads_env(monkeypatch):
    monkeypatch.delenv(X.THREADS_ENV, raising=False)
    assert X.worker_count(None) <= 1  # serial
    monkeypatch.setenv(X.THREADS_ENV, "3")
    assert X.worker_count(None) == 3
    assert X.worker_count(2) == 2


def test_samples_csv_formatting():
    rep, samples = X.blaschke_sample(2.0, 2, 5, h=0.1, include_square=False)
    text = samples_csv(samples)
    assert text.count("\n") == 3
    assert "\r" not in text


# -- small experiment runs ---------------------------------------------------------
def test_sharpness_small(tmp_path):
    code = main(["sharpness", "--eps", "0.2,0.14,0.1,0.07,0.05", "--no-refine", "--out", str(tmp_path)])
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["name"] == "sharpness"
    assert abs(rep["fitted"]["slope"]["value"] - 2) < 0.1
    assert code in (0, 1)


def test_collapse_small():
    rep = X.collapse_study(2.0, Weight.constant(), [0.1, 0.05], check_eps=0.05, refine=False)
    at = [s for s in rep.samples if s["eps"] == 0.05][0]
    assert at["rel_error"] < 1e-2


def test_svg_helper():
    svg = scatter_svg([0.1, 0.2, 0.3], [10, 20, 15], title="t", xlabel="x", ylabel="y", log_y=True,
                      highlight=[True, False, False], hline=10.0, note="n")
    assert svg.count("<circle") == 3
    assert "<title" in svg or "t</text>" in svg
