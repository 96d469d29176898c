import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from dqms import cli, zoo
from dqms.channels import from_json, to_json
from dqms.cli import InputError
from dqms.exceptions import SolverError


def run(argv, capsys):
    code = cli.main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def rows_of(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_analyze_shift_dephase(capsys):
    code, out, _ = run(["analyze", "--zoo", "shift-dephase-3"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["K"] == 3 and doc["d"] == [1, 1, 1]
    assert doc["pi_cycle_type"] == [3] and doc["pi_non_unique"]
    assert doc["action_residual"] <= 1e-7


def test_analyze_identity_and_csv(capsys):
    code, out, _ = run(["analyze", "--zoo", "identity", "--dim", "2"], capsys)
    doc = json.loads(out)
    assert (doc["K"], doc["d"], doc["dim_h0"]) == (1, [2], 0)
    code, out, _ = run(["analyze", "--zoo", "pinching-2-1", "--format", "csv"], capsys)
    rows = rows_of(out)
    assert sorted(int(r["d"]) for r in rows) == [1, 2]


def test_analyze_json_file(tmp_path, capsys):
    path = tmp_path / "channel.json"
    path.write_text(to_json(zoo.transient_qutrit()))
    code, out, _ = run(["analyze", str(path)], capsys)
    assert code == 0 and json.loads(out)["dim_h0"] == 1


def test_bounds_identity_tight(capsys):
    code, out, _ = run(["bounds", "--zoo", "identity-2", "--epsilon", "0", "--n-range", "1..4"], capsys)
    rows = rows_of(out)
    assert code == 0 and len(rows) == 16
    assert all(r["lower"] == r["upper"] for r in rows)


def test_bounds_fixed_delta(capsys):
    code, out, _ = run(["bounds", "--zoo", "pinching-2-1", "--epsilon", "0.1", "--delta", "0.05", "--n-range", "1"], capsys)
    ea = [r for r in rows_of(out) if r["kind"] == "Cea"][0]
    assert abs(float(ea["upper"]) - (math.log2(5) + math.log2(1 / 0.85))) < 1e-12


def test_bounds_amplitude_damping_decreasing(capsys):
    code, out, _ = run(["bounds", "--zoo", "ad-0.75", "--epsilon", "0.1"], capsys)
    rows = [r for r in rows_of(out) if r["kind"] == "C"]
    assert [int(r["n"]) for r in rows] == list(range(1, 21))
    ups = [float(r["upper"]) for r in rows]
    assert all(b <= a for a, b in zip(ups, ups[1:]))
    assert abs(ups[-1] - math.log2(1 / 0.9)) < 1e-5
    assert {r["delta_source"] for r in rows} == {"sdp"}


def test_bounds_undefined_rows_are_empty(capsys):
    code, out, _ = run(["bounds", "--zoo", "ad-0.75", "--epsilon", "0.5", "--n-range", "1"], capsys)
    assert all(r["upper"] == "" for r in rows_of(out))


def test_bounds_deterministic_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert cli.main(["bounds", "--zoo", "random-block-4", "--n-range", "1..3", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()


def test_verify(tmp_path, capsys):
    bundle = tmp_path / "codes.json"
    code, out, _ = run(["verify", "--zoo", "pinching-2-1", "--bundle", str(bundle)], capsys)
    assert code == 0
    rows = rows_of(out)
    assert len(rows) == 12 and all(r["passed"] == "True" for r in rows)
    assert json.loads(bundle.read_text())["n"] == 25
    code, out, err = run(["verify", "--zoo", "pinching-2-1", "--sabotage-decoder"], capsys)
    assert code == cli.EXIT_CERT and "FAILED quantum" in err
    failed = {r["family"] for r in rows_of(out) if r["passed"] == "False"}
    assert failed == {"quantum"}


def test_verify_depolarizing_vacuous(capsys):
    code, out, _ = run(["verify", "--zoo", "depolarizing-2", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["passed"]
    assert {r["rate"] for r in doc["reports"]} == {0.0}


def test_convergence(capsys):
    code, out, _ = run(["convergence", "--zoo", "ad-0.75", "--format", "json"], capsys)
    doc = json.loads(out)
    assert abs(doc["slope"] / math.log(2) + 1) <= 0.02 and doc["slope_ok"]
    base = np.array([r[2] for r in doc["rows"]])
    code, out, _ = run(["convergence", "--zoo", "ad-0.75", "--format", "json", "--iid", "m=8"], capsys)
    doc8 = json.loads(out)
    assert np.abs(np.array([r[2] for r in doc8["rows"]]) - 8 * base).max() < 1e-15
    assert doc8["copies"] == 8
    code, out, _ = run(["convergence", "--zoo", "identity-2"], capsys)
    assert code == 0
    assert all(float(r["delta_n"]) == 0 for r in rows_of(out))
    assert "# exact_convergence=True" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["analyze", "--zoo", "no-such-channel"],
        ["analyze"],
        ["bounds", "--zoo", "ad-0.75", "--epsilon", "1.5"],
        ["bounds", "--zoo", "ad-0.75", "--n-range", "5..2"],
        ["convergence", "--zoo", "ad-0.75", "--iid", "k=3"],
        ["frobnicate"],
    ],
)
def test_input_errors(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == cli.EXIT_INPUT and out == ""


def test_malformed_and_invalid_files(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["analyze", str(bad)], capsys)[0] == cli.EXIT_INPUT
    doc = json.loads(to_json(zoo.amplitude_damping(0.5)))
    doc["kraus"][0][0][0] = [2.0, 0.0]
    bad.write_text(json.dumps(doc))
    assert run(["analyze", str(bad)], capsys)[0] == cli.EXIT_INPUT


def test_numerical_failure_exit_code(monkeypatch, capsys):
    def boom(*a, **k):
        raise SolverError("stalled")

    monkeypatch.setattr(cli.spectral, "fit_kappa", boom)
    code, _, err = run(["convergence", "--zoo", "ad-0.75"], capsys)
    assert code == cli.EXIT_NUMERIC and "numerical failure" in err


def test_parsers():
    assert cli.parse_n_range("2..4") == [2, 3, 4]
    assert cli.parse_n_range("1,5,25") == [1, 5, 25]
    assert cli.parse_epsilons("0, 0.1") == [0.0, 0.1]
    assert cli.parse_iid("m=8") == 8
    for f, x in ((cli.parse_n_range, "0..3"), (cli.parse_epsilons, "1"), (cli.parse_iid, "m=0")):
        with pytest.raises(InputError):
            f(x)


def test_json_round_trip():
    for name in ("ad-0.75", "random-block-2", "pinching-2-1"):
        phi = zoo.make(name)
        again = from_json(to_json(phi))
        assert np.abs(again.superop - phi.superop).max() < 1e-12


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "dqms", "analyze", "--zoo", "identity-2"], capture_output=True, text=True
    )
    assert res.returncode == 0 and json.loads(res.stdout)["K"] == 1
