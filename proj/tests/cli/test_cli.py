import json
import os
import subprocess
from pathlib import Path

import jsonschema
import pytest

BIN = os.environ.get("MSM_AIPW_BIN", "msm-aipw")
SCHEMAS = Path(__file__).resolve().parents[2] / "schemas"


def run(*args, check=False):
    res = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True)
    if check:
        assert res.returncode == 0, res.stderr
    return res


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


@pytest.fixture(scope="module")
def scenario_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "s1.csv"
    run("generate", "--family", "main", "--scenario", "1", "--n", 400, "--seed", 3, "--output", path, check=True)
    return path


def fit(path, *flags):
    out = run("fit", "--tau", 1, *flags, path, check=True).stdout
    report = json.loads(out)
    jsonschema.validate(report, schema("fit"))
    return report


def test_fit_aipw(scenario_csv):
    r = fit(scenario_csv, "--estimator", "aipw", "--folds", 5)
    assert r["beta_hat"] == pytest.approx(r["beta_hat"])
    assert abs(r["u_residual"]) <= 1e-8
    assert r["ci"][0] < r["beta_hat"] < r["ci"][1]


def test_identity_weights_match_naive(scenario_csv):
    naive = fit(scenario_csv, "--estimator", "naive")
    ipw = fit(scenario_csv, "--estimator", "ipw", "--identity-weights")
    assert ipw["beta_hat"] == pytest.approx(naive["beta_hat"], abs=1e-6)


def test_bootstrap_and_risk(scenario_csv):
    r = fit(scenario_csv, "--estimator", "ipw", "--bootstrap", 20, "--seed", 5, "--risk-times", "0.5,1")
    assert r["bootstrap"]["requested"] == 20
    assert r["se_boot"] > 0
    assert [c["t"] for c in r["risk_contrasts"]] == [0.5, 1.0]


def test_missing_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,treatment,z1\n0.5,1,0.2\n0.7,0,0.1\n")
    res = run("fit", "--tau", 1, bad)
    assert res.returncode == 3
    assert "event" in res.stderr


def test_conflicting_flags(scenario_csv):
    assert run("fit", "--tau", 1, "--estimator", "aipw", "--identity-weights", scenario_csv).returncode == 2
    assert run("fit", "--estimator", "aipw", scenario_csv).returncode == 2


def test_simulate_deterministic(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        run("simulate", "--family", "main", "--scenario", 1, "--n", 200, "--reps", 4, "--seed", 7, "--output", p,
            check=True)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    report = json.loads(paths[0].read_text())
    jsonschema.validate(report, schema("simulate"))
    assert report["replications"] == 4


def test_simulate_table():
    out = run("simulate", "--family", "main", "--scenario", 1, "--n", 200, "--reps", 2, check=True).stdout
    for column in ("Bias", "SD", "SE Model/Boot", "Cov Model/Boot"):
        assert column in out


def test_simulate_zero_reps():
    assert run("simulate", "--family", "main", "--scenario", 1, "--reps", 0).returncode == 2


def test_oracle_ph():
    out = run("oracle", "--law", '{"family": "ph_exponential", "log_hr": -1}', "--tau", 1, check=True).stdout
    r = json.loads(out)
    jsonschema.validate(r, schema("oracle"))
    assert abs(r["beta_star"] + 1) <= 1e-10
    assert all(abs(b + 1) <= 1e-10 for _, b in r["beta_of_t"])


def test_oracle_law_file(tmp_path):
    law = tmp_path / "law.json"
    law.write_text(json.dumps({"family": "transformation", "gamma": 1, "rho": 0}))
    r = json.loads(run("oracle", "--law", law, "--tau", 30, "--log-mesh", check=True).stdout)
    assert r["beta_star"] == pytest.approx(-1, abs=1e-3)


def test_oracle_invalid_law():
    assert run("oracle", "--law", '{"family": "ph_exponential", "rate": -1, "log_hr": 0}', "--tau", 1).returncode == 2
    assert run("oracle", "--law", "{not json", "--tau", 1).returncode == 2


@pytest.mark.parametrize("sub", [None, "fit", "simulate", "oracle", "generate"])
def test_help(sub):
    res = run(*([sub] if sub else []), "--help")
    assert res.returncode == 0
    assert "--" in res.stdout
