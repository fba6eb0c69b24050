import csv
import io
import json
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from relayqkd import cli

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def schema(name):
    return json.loads(resources.files("relayqkd").joinpath(f"schemas/{name}.schema.json").read_text())


def strip_timing(report):
    report = json.loads(json.dumps(report))
    report["manifest"].pop("timing")
    return report


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_ideal(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["run", str(SCENARIOS / "ideal_swap.yaml"), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    jsonschema.validate(report, schema("rate_report"))
    assert report["R_star"] == pytest.approx(1.0, abs=1e-6)
    assert report["theorem_ok"] is True
    assert len(report["config_hash"]) == 64
    assert report["tolerances"]["psd"] == 1e-9


def test_run_dos(capsys):
    code, out, _ = run(["run", str(SCENARIOS / "denial_of_service.yaml")], capsys)
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, schema("rate_report"))
    assert report["R_star"] == pytest.approx(0.0, abs=1e-6)


def test_manifest_hash_matches_file(tmp_path):
    out = tmp_path / "r.json"
    cli.main(["--seed", "4", "run", str(SCENARIOS / "leaky_relay.yaml"), "--out", str(out)])
    manifest = json.loads(out.read_text())["manifest"]
    import hashlib
    assert manifest["config_sha256"] == hashlib.sha256((SCENARIOS / "leaky_relay.yaml").read_bytes()).hexdigest()
    assert manifest["seed"] == 4


@pytest.mark.parametrize("name", ["ideal_swap", "leaky_relay", "werner_leak"])
def test_reports_identical_apart_from_timing(tmp_path, name):
    out = tmp_path / "r.json"
    texts = []
    for _ in range(2):
        cli.main(["run", str(SCENARIOS / f"{name}.yaml"), "--seed", "11", "--out", str(out)])
        texts.append(json.loads(out.read_text()))
    assert strip_timing(texts[0]) == strip_timing(texts[1])
    a, b = (json.dumps(strip_timing(t), indent=2) for t in texts)
    assert a == b


def test_tolerance_overrides_recorded(capsys):
    code, out, _ = run(["run", str(SCENARIOS / "ideal_swap.yaml"), "--tol-scale", "10", "--dmax", "128"], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["tolerances"]["herm"] == pytest.approx(1e-8)
    assert report["tolerances"]["dmax"] == 128
    assert report["manifest"]["tolerance_overrides"] == {"tol_scale": 10.0, "dmax": 128}


def test_dmax_too_small_is_config_error(capsys):
    code, _, err = run(["run", str(SCENARIOS / "ideal_swap.yaml"), "--dmax", "8"], capsys)
    assert code == 2 and "error" in err


def test_missing_config(capsys):
    code, _, err = run(["run", "does/not/exist.yaml"], capsys)
    assert code == 2 and "not found" in err


def test_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("metadata: {name: x}\nstates: [\n")
    code, _, err = run(["run", str(bad)], capsys)
    assert code == 2 and "bad.yaml" in err


def test_usage_errors(capsys):
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["run"]) == 2
    assert cli.main(["--jobs", "0", "check"]) == 2
    capsys.readouterr()


def test_theorem_violation_exits_one(monkeypatch, capsys):
    from relayqkd.protocol import theorem_certificate as real

    def broken(cfg):
        rep = real(cfg)
        rep.theorem_ok = False
        return rep

    monkeypatch.setattr(cli, "theorem_certificate", broken)
    code, _, _ = run(["run", str(SCENARIOS / "ideal_swap.yaml")], capsys)
    assert code == 1


def sweep_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_two_points(capsys):
    code, out, _ = run(["sweep", str(SCENARIOS / "werner_leak.yaml"),
                        "--axis", "states.alice.p+states.bob.p=0,1", "--axis", "cheating.eps=0"], capsys)
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert header == ["index", "states.alice.p+states.bob.p", "cheating.eps", *cli.SWEEP_COLUMNS]
    rows = sweep_rows(out)
    assert len(rows) == 2
    assert float(rows[1]["R_star"]) == pytest.approx(1.0, abs=1e-9)


def test_sweep_grid_size_order_and_manifest(tmp_path):
    out = tmp_path / "s.csv"
    argv = ["sweep", str(SCENARIOS / "werner_leak.yaml"), "--axis", "states.alice.p=0.5,0.75,1",
            "--axis", "cheating.eps=0,0.25", "--out", str(out)]
    assert cli.main(argv) == 0
    rows = sweep_rows(out.read_text())
    assert len(rows) == 3 * 2
    assert [(r["states.alice.p"], r["cheating.eps"]) for r in rows] == [
        ("0.5", "0"), ("0.5", "0.25"), ("0.75", "0"), ("0.75", "0.25"), ("1", "0"), ("1", "0.25")]
    manifest = json.loads((tmp_path / "s.csv.manifest.json").read_text())
    assert manifest["manifest"]["command"] == "sweep"
    serial = out.read_text()
    assert cli.main(argv + ["--jobs", "3"]) == 0
    assert out.read_text() == serial


def test_sweep_r_star_along_eps(capsys):
    # observed property for the ideal relay with trivial E; reported, not asserted
    code, out, _ = run(["sweep", str(SCENARIOS / "werner_leak.yaml"),
                        "--axis", "states.alice.p+states.bob.p=1", "--axis", "cheating.eps=0,0.2,0.4,0.6,0.8,1"], capsys)
    values = [float(r["R_star"]) for r in sweep_rows(out)]
    print("R* along eps:", values)
    assert code == 0 and len(values) == 6


def test_sweep_unreadable_axis_value(capsys):
    code, _, err = run(["sweep", str(SCENARIOS / "werner_leak.yaml"), "--axis", "cheating.eps=[0"], capsys)
    assert code == 2 and "unreadable" in err


def test_sweep_unknown_path(capsys):
    code, _, err = run(["sweep", str(SCENARIOS / "ideal_swap.yaml"), "--axis", "states.alice.q=1"], capsys)
    assert code == 2 and "unknown parameter path" in err


def test_search_output(tmp_path):
    out = tmp_path / "s.json"
    assert cli.main(["search", "--budget", "10", "--seed", "3", "--out", str(out)]) == 0
    first = json.loads(out.read_text())
    jsonschema.validate(first, schema("search_result"))
    assert cli.main(["search", "--budget", "10", "--seed", "3", "--out", str(out), "--jobs", "2"]) == 0
    second = json.loads(out.read_text())
    assert strip_timing(first) == strip_timing(second)


def test_search_trivial_e(capsys):
    code, out, _ = run(["search", "--budget", "10", "--e-max", "1"], capsys)
    result = json.loads(out)
    assert code == 0 and result["witness"] is False and result["Delta"] == 0


def test_check_passes(tmp_path):
    out = tmp_path / "c.json"
    assert cli.main(["check", "--out", str(out)]) == 0
    summary = json.loads(out.read_text())
    jsonschema.validate(summary, schema("self_check"))
    names = {r["name"] for r in summary["results"]}
    assert {"strong_subadditivity", "chain_rule", "holevo_invariance", "data_processing",
            "dual_path_holevo", "gamma_nonnegative", "theorem_inequality"} <= names
    assert all("max_violation" in r for r in summary["results"])


def test_check_failure_exit_code(monkeypatch, capsys):
    from relayqkd import selfcheck
    from relayqkd.infotheory import entropy

    monkeypatch.setattr(cli, "self_check",
                        lambda seed, counts: selfcheck.self_check(seed, counts, entropy_fn=lambda m: -entropy(m)))
    code, _, err = run(["check", "--scenarios", "2"], capsys)
    assert code == 1
    assert "FAIL  strong_subadditivity" in err
