import csv
import json
import math

import jsonschema
import pytest

from coinbilliard import cli
from coinbilliard.config import RunConfig
from coinbilliard.horseshoe import rules_matrix


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def validate(command, path):
    with open(path) as fh:
        jsonschema.validate(json.load(fh), cli.load_schema(command))


def test_config_round_trip():
    cfg = RunConfig(energy=2.5e4, grid_n=128, seed=9, format="json")
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_config_comments_and_dashes():
    cfg = RunConfig.from_text("# header\ngrid-n = 256  # finer\nenergy = 1e5\n\n")
    assert cfg.grid_n == 256 and cfg.energy == 1e5


@pytest.mark.parametrize(
    "text",
    ["grid_n = 32", "corner_tol = 0", "match_tol = -1e-8", "format = xml", "nonsense = 1", "energy"],
)
def test_config_rejects_bad_values(text):
    with pytest.raises(ValueError):
        RunConfig.from_text(text)


def test_flags_override_the_config_file(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("energy = 1e3\nformat = csv\n")
    code, out, _ = run(capsys, "solve-k", "--config", str(conf), "--energy", "1e6", "--format", "json")
    assert code == cli.EXIT_OK
    assert json.loads(out)["E"] == 1e6


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("COINBILLIARD_OUT", str(tmp_path))
    assert RunConfig().output_dir == str(tmp_path)
    assert RunConfig(out_dir="elsewhere").output_dir == "elsewhere"


def test_solve_k_text(capsys):
    code, out, _ = run(capsys, "solve-k", "-E", "1e6")
    assert code == cli.EXIT_OK
    k = float(out.splitlines()[0].split("=")[1])
    assert k == pytest.approx(math.pi / 4, abs=2e-6)


def test_solve_k_json(capsys):
    code, out, _ = run(capsys, "solve-k", "-E", "1e6", "--format", "json")
    d = json.loads(out)
    assert code == cli.EXIT_OK
    assert abs(d["A"]) < 1e-10
    assert d["bracket"] == pytest.approx([math.pi / 8, math.pi / 2])


def test_solve_k_with_heavier_gravity(capsys):
    code, out, _ = run(capsys, "solve-k", "-E", "1e6", "--gravity", "2", "--format", "json")
    assert code == cli.EXIT_OK
    assert json.loads(out)["k"] == pytest.approx(math.pi / 2, rel=1e-5)


def test_solve_k_without_bracket(capsys):
    code, _, err = run(capsys, "solve-k", "-E", "0.5")
    assert code == cli.EXIT_NO_BRACKET
    assert "no bracket" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["simulate"],
        ["simulate", "--theta", "x"],
        ["realize", "--word", "LRX", "--out", "."],
        ["bifurcation", "--factors", "0.9,abc"],
        ["simulate", "--theta", "1.0", "-E", "0.5"],
    ],
)
def test_usage_errors(argv, capsys):
    code, _, _ = run(capsys, *argv)
    assert code == cli.EXIT_USAGE


def test_simulate_corner_start(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--theta", str(math.pi), "--out", str(tmp_path))
    assert code == cli.EXIT_DYNAMICS
    assert "collision 0" in err


def test_simulate_csv_is_reproducible(tmp_path, capsys):
    outs = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        code, _, _ = run(capsys, "simulate", "--theta", "1.2", "--theta-dot", "0.3", "-n", "1000", "--out", str(d))
        assert code == cli.EXIT_OK
        outs.append((d / "simulate.csv").read_bytes())
    assert outs[0] == outs[1]
    with open(tmp_path / "a" / "simulate.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == cli.SIMULATE_COLUMNS
    assert len(rows) == 1001
    E = float(rows[0]["energy"])
    assert max(abs(float(r["energy"]) - E) for r in rows) / E < 1e-7
    assert all(r["coarse_label"] in ("L", "R") for r in rows)


def test_simulate_json_matches_schema(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--theta", repr(math.pi / 2), "-n", "5", "--format", "json", "--out", str(tmp_path))
    assert code == cli.EXIT_OK
    validate("simulate", tmp_path / "simulate.json")
    rows = json.loads((tmp_path / "simulate.json").read_text())["rows"]
    assert rows[0]["fine_label"] == "L2"
    assert out.startswith("L")


def test_strips_summary(tmp_path, capsys):
    code, _, _ = run(capsys, "strips", "--out", str(tmp_path))
    assert code == cli.EXIT_OK
    validate("strips", tmp_path / "summary.json")
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["strip_count"] == 6 and s["vertical_strip_count"] == 6
    assert s["adjacency"] == rules_matrix().astype(int).tolist()
    assert s["cm1"]["value"] < 1e-2
    assert s["rules_match"]
    for tag in "HV":
        for lab in s["labels"]:
            assert (tmp_path / f"strip_{tag}_{lab}.csv").exists()
    for side in "LR":
        for edge in ("top", "bottom", "left", "right"):
            assert (tmp_path / f"image_D{side}_{edge}.csv").exists()


def test_strips_without_bracket(tmp_path, capsys):
    code, _, err = run(capsys, "strips", "-E", "1.5", "--out", str(tmp_path))
    assert code == cli.EXIT_NO_BRACKET
    assert "no bracket" in err


def test_bifurcation_outputs(tmp_path, capsys):
    code, out, _ = run(capsys, "bifurcation", "--factors", "1.0,1.05", "--format", "json", "--out", str(tmp_path))
    assert code == cli.EXIT_OK
    validate("bifurcation", tmp_path / "bifurcation.json")
    rows = json.loads((tmp_path / "bifurcation.json").read_text())["rows"]
    assert [r["summary"] for r in rows] == ["6 full", "6 full"]
    code, _, _ = run(capsys, "bifurcation", "--factors", "1.0", "--out", str(tmp_path))
    assert (tmp_path / "bifurcation.csv").read_text().splitlines()[0] == "factor,K,full,corner,summary"


def test_realize_success(tmp_path, capsys):
    code, out, _ = run(capsys, "realize", "--word", "LRLRLRLRLR", "--out", str(tmp_path))
    assert code == cli.EXIT_OK
    d = json.loads(out)
    assert d["verified"] and d["itinerary"]["coarse"] == "LRLRLRLRLR"
    validate("realize", tmp_path / "realization.json")


def test_realize_budget_exhausted(tmp_path, capsys):
    code, out, _ = run(capsys, "realize", "--word", "LRLRLRLRLR", "--budget", "3", "--out", str(tmp_path))
    assert code == cli.EXIT_NOT_FOUND
    assert json.loads(out)["longest_prefix"] == 3


def test_realize_precision_exhausted(tmp_path, capsys):
    code, out, _ = run(capsys, "realize", "--word", "LRLRLRLRLR", "--dps", "20", "--out", str(tmp_path))
    assert code == cli.EXIT_RESOLUTION
    assert json.loads(out)["error"] == "resolution exceeded"


def test_crosscheck_command(tmp_path, capsys):
    code, out, _ = run(capsys, "crosscheck", "-n", "10", "--samples", "2", "--length", "1", "--out", str(tmp_path))
    assert code == cli.EXIT_OK
    validate("crosscheck", tmp_path / "crosscheck.json")
    d = json.loads(out)
    assert d["pass"] and d["l"] == 1.0
