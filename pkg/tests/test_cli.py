import json
import os
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from stopping_lab.cli import main


def schema(name):
    return json.loads(resources.files("stopping_lab").joinpath("schemas", f"{name}.json").read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


CASES = {
    "bound": ["bound"],
    "gamma": ["gamma", "--j-max", "20", "--truncated", "3", "5"],
    "thresholds": ["thresholds", "--j-max", "4"],
    "verify": ["verify", "--max-window", "5"],
    "simulate": ["simulate", "--n", "30", "--trials", "500", "--trace", "2"],
    "adversarial-exact": ["adversarial-exact", "--instance", "[[10, 5], [9, 1]]"],
    "last-success": ["last-success", "--n", "200", "--trials", "300"],
    "superstars": ["superstars", "--family", "uniform", "--n", "20", "--trials", "500"],
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_json_output_validates(capsys, name):
    code, out, _ = run(capsys, *CASES[name], "--json", "--seed", "3")
    assert code == 0
    jsonschema.validate(json.loads(out), schema(name))


@pytest.mark.parametrize("name", sorted(CASES))
def test_same_seed_same_bytes(capsys, name):
    first = run(capsys, *CASES[name], "--json", "--seed", "5")[1]
    second = run(capsys, *CASES[name], "--json", "--seed", "5")[1]
    assert first == second


@pytest.mark.parametrize("name", sorted(CASES))
def test_text_and_csv_output(capsys, name):
    code, out, _ = run(capsys, *CASES[name])
    assert code == 0 and out.strip()
    code, out, _ = run(capsys, *CASES[name], "--csv")
    assert code == 0 and len(out.splitlines()) >= 2


def test_simulate_csv_columns(capsys):
    _, out, _ = run(capsys, "simulate", "--n", "10", "--trials", "100", "--csv")
    assert out.splitlines()[0] == "policy,family,n,trials,estimate,lo,hi,seed"


def test_simulate_exact_cases(capsys):
    code, out, _ = run(capsys, "simulate", "--policy", "adversarial", "--instance", "[[10,5],[9,1]]", "--exact", "--json")
    assert code == 0 and json.loads(out)["exact"] == "1/4"
    _, out, _ = run(capsys, "adversarial-exact", "--instance", '{"cards": [[10, 9], [5, 1]]}', "--json")
    assert json.loads(out)["exact"] == "1/2"


def test_instance_from_file_and_out(capsys, tmp_path):
    inst = tmp_path / "inst.json"
    inst.write_text('{"cards": [[10, 5], [9, 1]]}')
    target = tmp_path / "result.json"
    code, out, _ = run(capsys, "adversarial-exact", "--instance", str(inst), "--json", "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["exact"] == "1/4"


def test_bound_assertion_exit_codes(capsys):
    assert run(capsys, "bound", "--c1", "0.9", "--c2", "0.9", "--c3", "0.9")[0] == 2
    assert run(capsys, "bound", "--c1", "0.9", "--c2", "0.9", "--c3", "0.9", "--no-assert")[0] == 0
    assert run(capsys, "bound", "--c1", "0.5", "--c2", "0.9", "--c3", "0.3")[0] == 1


def test_bound_json_has_twelve_digits(capsys):
    _, out, _ = run(capsys, "bound", "--json")
    data = json.loads(out)
    assert len(repr(data["total"]).replace("0.", "", 1)) >= 11
    assert data["checks"]["total_ok"] and data["checks"]["gamma_ok"]


def test_usage_errors(capsys):
    assert run(capsys, "verify", "--max-window", "14")[0] == 1
    assert run(capsys, "adversarial-exact", "--instance", "[[1, 1]]")[0] == 1
    assert run(capsys, "simulate", "--family", "uniform", "--trials", "10")[0] == 1
    assert run(capsys, "simulate", "--n", "5")[0] == 1
    assert run(capsys, "last-success", "--p", "1.5")[0] == 1
    for argv in (["bogus"], ["bound", "--unknown"], ["bound", "--json", "--csv"], []):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1


def test_verify_default_window_passes(capsys):
    code, out, _ = run(capsys, "verify", "--max-window", "9", "--json")
    assert code == 0 and json.loads(out)["passed"]


def test_thread_env_is_honoured_and_validated():
    env = dict(os.environ, STOPPING_LAB_THREADS="1")
    cmd = [sys.executable, "-m", "stopping_lab", "simulate", "--n", "20", "--trials", "200", "--json"]
    one = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True).stdout
    env["STOPPING_LAB_THREADS"] = "3"
    three = subprocess.run(cmd + ["--threads", "3"], env=env, capture_output=True, text=True, check=True).stdout
    assert one == three
    env["STOPPING_LAB_THREADS"] = "0"
    bad = subprocess.run(cmd, env=env, capture_output=True, text=True)
    assert bad.returncode == 1
