import json
import subprocess
import sys

import pytest

from dwrls.cli import main
from dwrls.distributed import ServerBoundWarning
from dwrls.geometry import load_points
from dwrls.quadrature import load_rule
from dwrls.solver import load_labeled


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def kernel_file(tmp_path):
    p = tmp_path / "k.json"
    p.write_text(json.dumps({"family": "sobolev", "gamma": 3}))
    return p


def test_gen_points(tmp_path, capsys):
    code, _, _ = run(["gen-points", "--kind", "fibonacci", "--n", 100,
                      "--out", tmp_path / "p.csv"], capsys)
    assert code == 0
    assert len(load_points(tmp_path / "p.csv")) == 100


def test_gen_labeled_points_with_noise(tmp_path, capsys):
    argv = ["gen-points", "--kind", "spiral", "--n", 50, "--target", "franke",
            "--noise-sigma", 0.1, "--seed", 3, "--out"]
    run(argv + [tmp_path / "a.csv"], capsys)
    run(argv + [tmp_path / "b.csv"], capsys)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert len(load_labeled(tmp_path / "a.csv")) == 50


def test_quadrature_build_and_verify(tmp_path, capsys):
    run(["gen-points", "--kind", "fibonacci", "--n", 100, "--out", tmp_path / "p.csv"], capsys)
    code, out, _ = run(["quadrature", "build", "--points", tmp_path / "p.csv", "--degree", 6,
                        "--out", tmp_path / "r.csv"], capsys)
    assert code == 0 and json.loads(out)["residual"] < 1e-8
    assert load_rule(tmp_path / "r.csv").degree == 6
    code, out, _ = run(["quadrature", "verify", "--rule", tmp_path / "r.csv", "--degree", 6],
                       capsys)
    assert code == 0 and json.loads(out)["exact"] is True
    code, out, _ = run(["quadrature", "verify", "--rule", tmp_path / "r.csv", "--degree", 14],
                       capsys)
    assert code == 0 and json.loads(out)["exact"] is False


def test_unbuildable_degree_exits_2(tmp_path, capsys):
    run(["gen-points", "--kind", "fibonacci", "--n", 100, "--out", tmp_path / "p.csv"], capsys)
    code, _, err = run(["quadrature", "build", "--points", tmp_path / "p.csv",
                        "--degree", 200, "--out", tmp_path / "r.csv"], capsys)
    assert code == 2
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["code"] == "no_positive_rule"
    assert set(payload) == {"code", "module", "message", "context"}
    assert not (tmp_path / "r.csv").exists()


def test_fit_and_eval(tmp_path, capsys, kernel_file):
    run(["gen-points", "--kind", "fibonacci", "--n", 200, "--target", "wendland",
         "--out", tmp_path / "d.csv"], capsys)
    code, _, _ = run(["fit", "--data", tmp_path / "d.csv", "--rule", "equal", "--lambda",
                      1e-6, "--kernel", kernel_file, "--out", tmp_path / "est.json"], capsys)
    assert code == 0
    est = json.loads((tmp_path / "est.json").read_text())
    assert est["sample_count"] == 200
    code, out, _ = run(["eval", "--estimator", tmp_path / "est.json", "--points",
                        tmp_path / "d.csv", "--out", tmp_path / "pred.csv"], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["n"] == 200 and res["rmse"] < 0.05
    assert (tmp_path / "pred.csv").read_text().splitlines()[0] == "x0,x1,x2,pred"


def test_fit_with_rule_file(tmp_path, capsys, kernel_file):
    run(["gen-points", "--kind", "fibonacci", "--n", 150, "--target", "franke",
         "--out", tmp_path / "d.csv"], capsys)
    pts = load_labeled(tmp_path / "d.csv").inputs
    from dwrls.geometry import save_points
    save_points(pts, tmp_path / "p.csv")
    run(["quadrature", "build", "--points", tmp_path / "p.csv", "--degree", 8,
         "--out", tmp_path / "r.csv"], capsys)
    code, _, err = run(["fit", "--data", tmp_path / "d.csv", "--rule", tmp_path / "r.csv",
                        "--lambda", 1e-4, "--kernel", kernel_file,
                        "--out", tmp_path / "e.json"], capsys)
    assert code == 0, err


def test_bad_lambda_exits_1(tmp_path, capsys, kernel_file):
    run(["gen-points", "--kind", "fibonacci", "--n", 30, "--target", "franke",
         "--out", tmp_path / "d.csv"], capsys)
    code, _, err = run(["fit", "--data", tmp_path / "d.csv", "--rule", "equal",
                        "--lambda", -1, "--kernel", kernel_file, "--out",
                        tmp_path / "e.json"], capsys)
    assert code == 1
    assert json.loads(err)["code"] == "invalid_input"


@pytest.mark.parametrize("argv", [["nope"], ["gen-points", "--kind", "cube", "--n", "3",
                                             "--out", "x.csv"],
                                  ["gen-points", "--kind", "fibonacci", "--n", "-3",
                                   "--out", "x.csv"],
                                  ["fit", "--unknown-flag"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1


def test_missing_file_exits_1(tmp_path, capsys):
    code, _, _ = run(["quadrature", "verify", "--rule", tmp_path / "none.csv",
                      "--degree", 2], capsys)
    assert code == 1


def test_dry_run_writes_nothing(tmp_path, capsys):
    code, out, _ = run(["gen-points", "--kind", "fibonacci", "--n", 10, "--dry-run",
                        "--out", tmp_path / "p.csv"], capsys)
    assert code == 0
    plan = json.loads(out)["plan"]
    assert plan["n"] == 10 and plan["kind"] == "fibonacci"
    assert not (tmp_path / "p.csv").exists()


def test_config_file_defaults_and_override(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"kind": "spiral", "n": 12, "out": str(tmp_path / "c.csv")}))
    code, out, _ = run(["gen-points", "--config", conf, "--dry-run"], capsys)
    assert code == 0 and json.loads(out)["plan"]["kind"] == "spiral"
    code, out, _ = run(["gen-points", "--config", conf, "--n", 20, "--dry-run"], capsys)
    assert json.loads(out)["plan"]["n"] == 20
    conf.write_text(json.dumps({"colour": "red"}))
    assert main(["gen-points", "--config", str(conf), "--dry-run"]) == 1


def test_dfit_theoretical(tmp_path, capsys, kernel_file):
    paths = []
    for j in range(10):
        p = tmp_path / f"g{j}.csv"
        run(["gen-points", "--kind", "spiral", "--n", 60 + j, "--target", "wendland",
             "--seed", j, "--noise-sigma", 0.1, "--out", p], capsys)
        paths.append(p)
    code, _, err = run(["dfit", "--groups", *paths, "--servers", 10, "--gamma", 3,
                        "--kernel", kernel_file, "--jobs", 1, "--out", tmp_path / "g.json"],
                       capsys)
    assert code == 0, err
    glob = json.loads((tmp_path / "g.json").read_text())
    assert glob["total_samples"] == sum(60 + j for j in range(10))
    assert len(glob["components"]) == 10
    with pytest.warns(ServerBoundWarning):
        code, _, err = run(["dfit", "--groups", *paths, "--servers", 40, "--gamma", 3,
                            "--kernel", kernel_file, "--out", tmp_path / "h.json"], capsys)
    assert code == 2 and json.loads(err.strip().splitlines()[-1])["code"] == "no_positive_rule"


def test_simulate_rows(tmp_path, capsys):
    code, out, err = run(["simulate", "--target", "franke", "--m", "1,10", "--seeds", 1,
                          "--n-base", 40, "--n-test", 200, "--no-timing", "--jobs", 1,
                          "--out", tmp_path / "res"], capsys)
    assert code == 0, err
    rows = (tmp_path / "res" / "rmse.csv").read_text().splitlines()
    assert len(rows) == 3
    assert (tmp_path / "res" / "config.json").exists()
    assert "m=   1" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dwrls", "--version"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0 and "dwrls" in proc.stdout
