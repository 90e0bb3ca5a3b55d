import csv
import io
import json

import numpy as np
import pytest

from spectral_krr.cli import main
from spectral_krr.kernels import Splits, write_kernel_file, write_splits_file


def run(argv):
    buf = io.StringIO()
    code = main(argv, out=buf)
    return code, buf.getvalue()


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    config = json.loads(lines[0][len("# config: "):])
    return config, list(csv.DictReader(lines[1:]))


def write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


SMALL_SIM = {"domain_size": 256, "n": 256, "lambda_count": 64, "replicates": 2}


def test_reproduce_sim_small(tmp_path):
    cfg = write_config(tmp_path, SMALL_SIM)
    code, text = run(["reproduce-sim", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", "3"])
    assert code == 0
    assert "krr: median mu-MSE" in text and "kpcr: median mu-MSE" in text
    config, rows = read_csv(tmp_path / "o" / "reproduce_sim_replicates.csv")
    assert config["seed"] == 3 and config["n"] == 256 and config["replicates"] == 2
    assert len(rows) == 4
    assert set(rows[0]) == {"seed", "method", "lambda_selected", "validation_mse", "mu_mse", "bias_part",
                            "variance_part"}
    # shortest round-trip floats
    v = rows[0]["mu_mse"]
    assert repr(float(v)) == v
    _, summary = read_csv(tmp_path / "o" / "reproduce_sim_summary.csv")
    assert {r["method"] for r in summary} == {"krr", "kpcr"}


def test_reproduce_sim_byte_stable(tmp_path):
    cfg = write_config(tmp_path, SMALL_SIM)
    out = str(tmp_path / "o")
    run(["reproduce-sim", "--config", cfg, "--out", out, "--seed", "9"])
    first = (tmp_path / "o" / "reproduce_sim_replicates.csv").read_bytes()
    run(["reproduce-sim", "--config", cfg, "--out", out, "--seed", "9"])
    assert (tmp_path / "o" / "reproduce_sim_replicates.csv").read_bytes() == first
    # the thread count is echoed in the header but never changes the data rows
    run(["reproduce-sim", "--config", cfg, "--out", out, "--seed", "9", "--threads", "2"])
    threaded = (tmp_path / "o" / "reproduce_sim_replicates.csv").read_bytes()
    assert threaded.split(b"\n", 1)[1] == first.split(b"\n", 1)[1]


def test_n_override_sets_domain_and_sample(tmp_path):
    cfg = write_config(tmp_path, {"lambda_count": 16, "replicates": 1})
    code, _ = run(["reproduce-sim", "--config", cfg, "--n-override", "128", "--out", str(tmp_path)])
    assert code == 0
    config, _ = read_csv(tmp_path / "reproduce_sim_replicates.csv")
    assert config["n"] == 128 and config["domain_size"] == 128


def test_zero_replicates_rejected(capsys):
    code, _ = run(["reproduce-sim", "--replicates", "0"])
    assert code == 2
    assert "replicates" in capsys.readouterr().err


@pytest.mark.parametrize(
    "data",
    [{"bogus": 1}, {"lambda_min": 0.5, "lambda_max": 0.1}, {"methods": ["svm"]}, {"noise_var": -1}],
)
def test_config_validation_exit_code(tmp_path, data, capsys):
    code, _ = run(["reproduce-sim", "--config", write_config(tmp_path, data)])
    assert code == 2
    field = next(iter(data))
    assert field.split("_")[0] in capsys.readouterr().err


def test_missing_config_file_is_io_error(tmp_path):
    code, _ = run(["reproduce-sim", "--config", str(tmp_path / "nope.json")])
    assert code == 3


def test_rates_single_point_ladder(capsys):
    code, _ = run(["rates", "--ladder", "256"])
    assert code == 2
    assert "need ≥ 3 ladder points" in capsys.readouterr().err


def test_rates_polynomial_small(tmp_path):
    cfg = write_config(tmp_path, {"domain_size": 256, "ladder": [64, 128, 256], "replicates": 3})
    code, text = run(["rates", "--config", cfg, "--out", str(tmp_path)])
    assert code == 0 and "fitted slope" in text and "window holds for n >=" in text
    _, rows = read_csv(tmp_path / "rates.csv")
    assert len(rows) == 6
    assert len({r["slope"] for r in rows if r["method"] == "krr"}) == 1


def test_rates_finite_rank_small(tmp_path):
    cfg = write_config(tmp_path, {"domain_size": 128, "ladder": [64, 128, 256], "replicates": 2,
                                  "ridge_scales": [0.25, 1.0]})
    code, _ = run(["rates", "--config", cfg, "--mode", "finite-rank", "--out", str(tmp_path)])
    assert code == 0
    _, rows = read_csv(tmp_path / "rates.csv")
    kpcr = [r for r in rows if r["method"] == "kpcr"]
    assert len({r["lambda"] for r in kpcr}) == 1
    assert "zeta=1" in next(r for r in rows if r["method"] == "krr")["schedule"]


def test_rates_validation_mode(tmp_path):
    cfg = write_config(tmp_path, {"domain_size": 64, "ladder": [32, 64, 128], "replicates": 2,
                                  "lambda_count": 16, "methods": ["kpcr"]})
    code, _ = run(["rates", "--config", cfg, "--lambda-mode", "validation", "--out", str(tmp_path)])
    assert code == 0
    _, rows = read_csv(tmp_path / "rates.csv")
    assert all(r["schedule"] == "validation" for r in rows)


def test_bounds_window_gate(tmp_path):
    cfg = write_config(tmp_path, {"domain_sizes": [64], "exponents": [1.0], "noise_vars": [0.0, 0.25],
                                  "lambdas": [1e-4, 0.3], "methods": ["krr"], "replicates": 10})
    code, text = run(["bounds", "--config", cfg, "--out", str(tmp_path)])
    assert code == 0
    _, rows = read_csv(tmp_path / "bounds.csv")
    failing = [r for r in rows if r["lambda"] == "0.0001"]
    assert failing and all(r["window"] == "fail" and r["dominated"] == "" and r["total"] == "" for r in failing)
    passing = [r for r in rows if r["window"] == "pass"]
    assert passing and all(r["dominated"] == "true" for r in passing)
    zero = [r for r in passing if r["noise_var"] == "0.0"]
    assert all(float(r["term2"]) == 0.0 for r in zero)
    assert "outside the window" in text


def test_concentration_command(tmp_path):
    cases = [{"domain_size": 4, "exponent": 0.0, "n": 10**6, "lambda": 0.1, "r": 0.05},
             {"domain_size": 8, "exponent": 1.0, "n": 50, "lambda": 0.1, "r": 0.01},
             {"domain_size": 8, "exponent": 1.0, "n": 400, "lambda": 0.05}]
    cfg = write_config(tmp_path, {"cases": cases, "replicates": 200})
    code, text = run(["concentration", "--config", cfg, "--out", str(tmp_path)])
    assert code == 0
    _, rows = read_csv(tmp_path / "concentration.csv")
    assert rows[0]["status"] == "ok" and float(rows[0]["tail_prob"]) == 0.0
    assert rows[0]["moment_ok"] == "true"
    assert rows[1]["status"].startswith("precondition: fail")
    assert rows[2]["status"] == "ok" and float(rows[2]["tail_bound"]) == pytest.approx(0.5)


def _precomputed_files(tmp_path, M, y, split):
    kp, lp, sp = tmp_path / "k.txt", tmp_path / "y.txt", tmp_path / "s.txt"
    write_kernel_file(kp, M)
    lp.write_text("\n".join(repr(float(v)) for v in y) + "\n")
    write_splits_file(sp, split)
    return ["--kernel", str(kp), "--labels", str(lp), "--splits", str(sp)]


def test_fit_precomputed_identity_zero_labels(tmp_path):
    n = 30
    idx = np.arange(n)
    args = _precomputed_files(tmp_path, np.eye(n), np.zeros(n), Splits(idx[:10], idx[10:20], idx[20:]))
    code, text = run(["fit-precomputed", *args, "--out", str(tmp_path)])
    assert code == 0
    _, rows = read_csv(tmp_path / "fit_precomputed.csv")
    assert {r["method"] for r in rows} == {"krr", "kpcr"}
    for r in rows:
        assert float(r["test_mse"]) == 0.0
        assert np.isfinite(float(r["effective_dimension"]))
        assert r["n_train"] == "10" and r["n_test"] == "10"


def test_fit_precomputed_rank_one_recovers_labels(tmp_path):
    rng = np.random.default_rng(0)
    n = 40
    v = rng.uniform(0.5, 1.5, n)
    idx = rng.permutation(n)
    args = _precomputed_files(tmp_path, np.outer(v, v), 2.5 * v, Splits(idx[:15], idx[15:25], idx[25:]))
    code, _ = run(["fit-precomputed", *args, "--out", str(tmp_path)])
    assert code == 0
    _, rows = read_csv(tmp_path / "fit_precomputed.csv")
    kpcr = next(r for r in rows if r["method"] == "kpcr")
    assert float(kpcr["test_mse"]) <= 1e-20
    assert float(kpcr["effective_dimension"]) < 1


def test_fit_precomputed_errors(tmp_path):
    code, _ = run(["fit-precomputed"])
    assert code == 2
    (tmp_path / "k.txt").write_text("n=2\n1,0\n")
    (tmp_path / "y.txt").write_text("0\n0\n")
    (tmp_path / "s.txt").write_text("train:0\nvalidation:1\ntest:\n")
    code, _ = run(["fit-precomputed", "--kernel", str(tmp_path / "k.txt"), "--labels", str(tmp_path / "y.txt"),
                   "--splits", str(tmp_path / "s.txt")])
    assert code == 3


def test_filters_verify_default(tmp_path):
    code, text = run(["filters-verify", "--out", str(tmp_path)])
    assert code == 0
    lines = text.splitlines()
    def status(kind, xi):
        line = next(ln for ln in lines if ln.startswith(kind) and f"xi={xi} " in ln)
        return line.split()[2]
    assert status("ridge", 1) == "PASS" and status("ridge", 2) == "FAIL"
    for xi in (1, 2, 4, 8):
        assert status("cutoff", xi) == "PASS"
    assert "bound attained" in text
    assert (tmp_path / "filters_verify.txt").read_text().startswith("# config: ")


def test_filters_verify_custom_slack(tmp_path):
    code, text = run(["filters-verify", "--landweber-slack", "6", "--out", str(tmp_path)])
    assert code == 0
    assert "landweber xi=4     PASS  slack=6" in text


def test_filters_verify_empty_grid(tmp_path, capsys):
    cfg = write_config(tmp_path, {"grid_size": 0})
    assert run(["filters-verify", "--config", cfg])[0] == 2
    cfg = write_config(tmp_path, {"xis": []})
    assert run(["filters-verify", "--config", cfg])[0] == 2
    assert "xis" in capsys.readouterr().err
