import json
import math
import subprocess
import sys

import pytest
import yaml
from scipy.special import gamma

from sndrawdown.cli import (EXIT_CONFIG, EXIT_FAILED, EXIT_NUMERICAL, EXIT_OK, THREADS_ENV, ConfigError,
                            RunConfig, default_threads, load_config, main)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    assert code == EXIT_OK, err
    return json.loads(out)


def test_scale_fn_examples(capsys):
    doc = run_json(capsys, "scale-fn", "--model", "bm", "--mu", "0", "--sigma2", "1", "--q", "0", "--x", "1")
    assert doc["results"][0]["W"] == pytest.approx(2.0)
    doc = run_json(capsys, "scale-fn", "--model", "stable", "--alpha", "1.5", "--sigma", "1", "--q", "0", "--x", "4")
    assert doc["results"][0]["W"] == pytest.approx(2 / gamma(1.5), rel=1e-12)


def test_scale_fn_backends_report_difference(capsys):
    doc = run_json(capsys, "scale-fn", "--model", "stable-drift", "--mu", "0.1", "--sigma", "0.3",
                   "--stable-alpha", "1.5", "--q", "0", "0.2", "--grid", "0.2", "2", "5", "--backend", "inversion")
    rows = doc["results"]
    assert len(rows) == 10
    assert all(r["backend"] == "inversion" for r in rows)
    assert max(abs(r["diff"]) for r in rows) < 1e-6


def test_scale_fn_csv(capsys):
    code, out, _ = run(capsys, "scale-fn", "--model", "bm", "--mu", "0", "--sigma2", "1", "--q", "0.5", "--x", "1")
    assert code == EXIT_OK
    header, row = out.strip().splitlines()[:2]
    assert header.split(",")[:4] == ["kind", "backend", "x", "q"]
    assert float(row.split(",")[4]) == pytest.approx(2 * math.sinh(1))


def test_risk_examples(capsys):
    doc = run_json(capsys, "risk", "dd-before-rally", "--alpha", "0.2", "--beta", "0.25", "--model", "bm",
                   "--mu", "0", "--sigma2", "1")
    assert doc["results"][0]["value"] == pytest.approx(0.5)
    doc = run_json(capsys, "risk", "carr-wu-sym", "--alpha", "0.3", "--model", "stable-drift", "--mu", "0.1",
                   "--sigma", "0.3", "--index", "1.5")
    assert doc["results"][0]["value"] == pytest.approx(0.2642064208241094, rel=1e-12)


def test_risk_validate_mode(capsys):
    doc = run_json(capsys, "risk", "expected-dd", "--alpha", "0.1", "--horizon", "1", "--model", "bm",
                   "--mu", "0.05", "--sigma2", "0.04", "--S0", "100", "--validate", "--validate-paths", "20000")
    row = doc["results"][0]
    assert row["error_estimate"] >= 0
    assert row["details"]["mc_paths"] == 20000
    assert row["details"]["mc_gap_in_se"] < 4


def test_risk_sweep_expands_queries(capsys):
    doc = run_json(capsys, "risk", "new-max", "--beta", "0.1", "0.2", "--horizon", "1", "2", "--model", "bm",
                   "--mu", "0.3", "--sigma2", "1")
    assert len(doc["results"]) == 4


def test_exit_codes(capsys):
    assert run(capsys, "risk", "dd-before-rally", "--alpha", "0.1", "--beta", "0.5", "--model", "bm")[0] == EXIT_CONFIG
    assert run(capsys, "scale-fn", "--model", "bm", "--mu", "1", "--sigma2", "0")[0] == EXIT_CONFIG
    assert run(capsys, "scale-fn", "--model", "bm", "--backend", "series", "--x", "1")[0] == EXIT_CONFIG
    assert run(capsys, "run", "/nonexistent/config.yaml")[0] == EXIT_CONFIG
    # a Carr-Wu series far beyond its cancellation budget
    code, _, err = run(capsys, "scale-fn", "--model", "stable-drift", "--mu", "0.1", "--sigma", "0.3",
                       "--stable-alpha", "1.5", "--q", "0.5", "--x", "40")
    assert code == EXIT_NUMERICAL and "numerical" in err


def test_config_rejects_unknown_keys():
    base = {"model": {"family": "brownian_drift", "mu": 0.0, "sigma2": 1.0}}
    RunConfig.from_dict(base)
    for bad in ({**base, "extra": 1},
                {"model": {**base["model"], "colour": "red"}},
                {**base, "queries": [{"kind": "new-min", "alpha": 0.1, "beta": 0.2}]},
                {**base, "queries": [{"kind": "nope"}]},
                {**base, "output": {"format": "xml"}}):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(bad)


def test_json_output_round_trips_through_schema(capsys, tmp_path):
    cfg = {"model": {"family": "jump_diffusion_exp", "mu": 0.2, "sigma2": 1.0, "lambda": 1.0, "eta": 2.0,
                     "S0": 50.0},
           "queries": [{"kind": "dd-before-rally", "alpha": 0.3, "beta": 0.25},
                       {"kind": "scale-fn", "q": [0.0], "x": [1.0]}],
           "seed": 11}
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    doc = run_json(capsys, "run", str(path))
    again = RunConfig.from_dict(doc["config"])
    assert again.to_dict() == doc["config"]
    # only the output block differs: --format overrides the file
    original = load_config(path).to_dict()
    assert {k: v for k, v in original.items() if k != "output"} == \
        {k: v for k, v in doc["config"].items() if k != "output"}
    assert doc["config"]["output"]["format"] == "json"


def test_deterministic_output(capsys, tmp_path):
    args = ("risk", "dd-before-rally", "--alpha", "0.3", "--beta", "0.2", "--horizon", "0.5", "--paths", "3000",
            "--model", "jd", "--mu", "0.2", "--sigma2", "1", "--lambda", "1", "--eta", "2", "--seed", "5")
    first = run(capsys, *args)
    second = run(capsys, *args)
    assert first[0] == EXIT_OK and first[1] == second[1]


def test_output_file_and_threads(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert default_threads() == 3
    out = tmp_path / "o.csv"
    code, stdout, _ = run(capsys, "risk", "new-min", "--alpha", "0.1", "0.2", "--model", "bm", "--mu", "0.1",
                          "--sigma2", "1", "--output", str(out), "--threads", "2")
    assert code == EXIT_OK
    assert out.read_text().splitlines()[0].startswith("kind,alpha")
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(ConfigError):
        default_threads()


def test_validate_quick_passes(capsys):
    code, out, _ = run(capsys, "validate", "--quick")
    assert code == EXIT_OK
    assert out.strip().splitlines()[-1].endswith("PASS")


def test_validate_mutation_fails(capsys):
    code, out, _ = run(capsys, "validate", "--quick", "--criteria", "1", "2", "--mutate")
    assert code == EXIT_FAILED
    assert "FAIL" in out


def test_validate_rejects_unknown_criterion(capsys):
    assert run(capsys, "validate", "--criteria", "13")[0] == EXIT_CONFIG


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sndrawdown", "scale-fn", "--model", "bm", "--mu", "0",
                           "--sigma2", "1", "--x", "1", "--format", "json"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"][0]["W"] == pytest.approx(2.0)


def test_validated_csv_has_plain_numbers(capsys):
    code, out, _ = run(capsys, "risk", "new-min", "--alpha", "0.1", "--model", "bm", "--mu", "0.1",
                       "--sigma2", "1", "--validate", "--validate-paths", "2000")
    assert code == EXIT_OK
    assert "np." not in out
    float(out.splitlines()[1].split(",")[4])
