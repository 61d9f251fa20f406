import csv
import json
from pathlib import Path

import pytest

from roundtrip.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def summary(out):
    with open(out / "summary.csv") as fh:
        return list(csv.DictReader(fh))


def test_list_systems(capsys):
    assert main(["list-systems"]) == 0
    text = capsys.readouterr().out
    assert "magnetic  (non-reversible)" in text
    assert text.count("seed x0") >= 3


def test_list_systems_json(capsys):
    assert main(["list-systems", "--json"]) == 0
    cat = json.loads(capsys.readouterr().out)
    names = {e["name"] for e in cat}
    assert len(cat) >= 3 and "magnetic" in names
    assert all("params" in e and "recommended_seed" in e for e in cat)


def test_validate_reports_every_problem(tmp_path, capsys):
    cfg = write(tmp_path, "name: x\nbogus: 1\ntasks:\n  - task: Nope\n  - task: Flow\n    system: moon\n")
    assert main(["validate", "--config", cfg]) == 1
    err = capsys.readouterr().err
    assert "bogus" in err and "Nope" in err and "moon" in err


def test_validate_accepts_shipped_configs(capsys):
    for p in sorted(CONFIGS.glob("*.yaml")):
        assert main(["validate", "--config", str(p)]) == 0, p


def test_empty_task_list_writes_nothing(tmp_path):
    cfg = write(tmp_path, "name: empty\ntasks: []\n")
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 1
    assert not out.exists()


def test_matrix_lab_fraction(tmp_path):
    cfg = write(tmp_path, "seed: 4\ntasks:\n  - task: MatrixLab\n    options: {d: 1, samples: 1000}\n")
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    row = next(r for r in summary(out) if r["quantity"] == "upsilon_fraction")
    assert float(row["value"]) <= 0.01 and row["tolerance"]


def test_double_well_reversibility_end_to_end(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(CONFIGS / "double_well_reversibility.yaml"),
                 "--out", str(out)]) == 0
    rows = {r["quantity"]: r for r in summary(out)}
    assert float(rows["identity_residual"]["value"]) <= 1e-5
    assert rows["identity_residual"]["pass"] == "1"
    assert all(r["tolerance"] != "" for r in rows.values() if r["pass"] != "")
    report = json.loads((out / "report.json").read_text())
    assert report["exit_code"] == 0 and "wall_clock_s" in report


def test_inconclusive_exit_code(tmp_path):
    # a neat orbit has no turning points, so the reversibility verdict cannot be formed
    cfg = write(tmp_path, "system: magnetic\ntasks:\n  - task: CheckReversibility\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 2


def test_error_exit_code(tmp_path):
    cfg = write(tmp_path, "system: double_well\ntasks:\n  - task: ClassifyOrbit\n"
                          "    options: {method: guess}\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 1


@pytest.mark.parametrize("jobs", ["1", "2"])
def test_runs_are_deterministic(tmp_path, jobs):
    cfg = write(tmp_path, "seed: 9\ntasks:\n  - task: MatrixLab\n    options: {d: 2, samples: 50}\n"
                          "  - task: LinsysCheck\n    options: {pairs: 1, bumps: 5, violators: false}\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a), "--jobs", jobs]) == 0
    assert main(["run", "--config", cfg, "--out", str(b), "--jobs", jobs]) == 0
    files = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    assert files and files == sorted(p.relative_to(b) for p in b.rglob("*.csv"))
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_seed_override_changes_samples(tmp_path):
    cfg = write(tmp_path, "seed: 1\ntasks:\n  - task: MatrixLab\n    options: {samples: 20}\n")
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", cfg, "--out", str(a)])
    main(["run", "--config", cfg, "--out", str(b), "--seed", "2"])
    f = "00_MatrixLab/upsilon.csv"
    assert (a / f).read_bytes() != (b / f).read_bytes()


def test_svg_plots(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = write(tmp_path, "system: double_well\ntasks:\n  - task: Flow\n    options: {samples: 50}\n")
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out), "--plots", "svg"]) == 0
    svgs = list(out.rglob("*.svg"))
    assert svgs and all(p.read_text().lstrip().startswith("<?xml") for p in svgs)
