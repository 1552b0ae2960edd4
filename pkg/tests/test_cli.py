import csv
import json
import subprocess
import sys

import pytest

from riskscout.cli import main
from riskscout.oracle import Oracle


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_version_and_help(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "riskscout" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "riskscout", "validate", "--schema", "mini_8"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "mini_8" in out.stdout


def test_run_writes_archives(tmp_path, capsys):
    assert main(["run", "--solver", "random", "--seed", "0,1", "--budget", "100", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "random" / "manifest.json").exists()
    for s in (0, 1):
        assert len((tmp_path / "random" / f"seed_{s}.jsonl").read_text().splitlines()) == 100
    assert "max risk" in capsys.readouterr().out


def test_run_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--solver", "ga-exploit", "--budget", "200", "--out", str(tmp_path / d)]) == 0
    for name in ("seed_0.jsonl", "manifest.json"):
        assert (tmp_path / "a" / "ga-exploit" / name).read_bytes() == (tmp_path / "b" / "ga-exploit" / name).read_bytes()


def test_param_override_in_manifest(tmp_path):
    assert main(["run", "--solver", "sa", "--budget", "100", "--param", "T0=5.0", "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "sa" / "manifest.json").read_text())
    assert manifest["solver"]["params"]["T0"] == 5.0


@pytest.mark.parametrize("argv", [
    ["run", "--solver", "hill-climb", "--budget", "100"],
    ["run", "--solver", "random", "--budget", "75"],
    ["run", "--solver", "tpe", "--budget", "50"],
    ["run", "--solver", "sa", "--param", "bogus=1"],
    ["run", "--solver", "random", "--schema", "no_such_schema"],
    ["run", "--solver", "random", "--profile", "no_such_profile"],
    ["enumerate", "--schema", "single_page_24"],
])
def test_config_errors_exit_2(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_argument_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--solver", "random", "--seed", "x"])
    assert exc.value.code == 2


def test_runtime_failure_exits_3(tmp_path, monkeypatch):
    def broken(self, z, render_seed):
        raise RuntimeError("renderer offline")

    monkeypatch.setattr(Oracle, "evaluate", broken)
    assert main(["run", "--solver", "random", "--budget", "100", "--out", str(tmp_path)]) == 3
    assert main(["suite", "--solvers", "random", "--seeds", "0", "--budget", "100", "--out", str(tmp_path / "s")]) == 3


@pytest.fixture(scope="module")
def suite_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("suite")
    code = main(["suite", "--solvers", "random,sa,qaoa-corr,reinforce", "--seeds", "0,1",
                 "--budget", "200", "--qaoa-m", "6", "--out", str(out)])
    assert code == 0
    return out


def test_suite_outputs(suite_dir):
    table = rows(suite_dir / "summary.csv")
    assert table[0][:3] == ["solver", "seeds", "max"]
    assert [r[0] for r in table[1:]] == ["random", "sa", "reinforce", "qaoa-corr"]
    assert all(r[1] == "2" for r in table[1:])


def test_analyze_all(suite_dir, tmp_path):
    assert main(["analyze", "--archives", str(suite_dir), "--out", str(tmp_path)]) == 0
    for name in ("summary.csv", "exclusivity.csv", "overlap.csv", "modes_matrix.csv",
                 "modes_winrates.csv", "modes_census.csv", "signature_census.csv", "report.md"):
        assert (tmp_path / name).exists(), name
    ov = rows(tmp_path / "overlap.csv")
    assert ov[0] == ["seed", "snapshot", "t", "exclusive_qaoa-corr", "common", "exclusive_reinforce"]
    excl = rows(tmp_path / "exclusivity.csv")
    assert len(excl) == 1 + 4 * 4
    mm = rows(tmp_path / "modes_matrix.csv")
    assert len(mm) == 1 + 4 * 3
    assert "## Summary" in (tmp_path / "report.md").read_text()


def test_analyze_is_deterministic(suite_dir, tmp_path):
    for d in ("x", "y"):
        assert main(["analyze", "--archives", str(suite_dir), "--out", str(tmp_path / d)]) == 0
    for name in ("summary.csv", "exclusivity.csv", "modes_matrix.csv", "report.md"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


def test_analyze_overlap_missing_pair(suite_dir, tmp_path):
    assert main(["analyze", "--kind", "overlap", "--fix", "tpe", "--archives", str(suite_dir),
                 "--out", str(tmp_path)]) == 2


def test_predict(suite_dir, tmp_path, capsys):
    assert main(["predict", "--archives", str(suite_dir), "--out", str(tmp_path), "--trees", "10",
                 "--n-train", "100"]) == 0
    table = rows(tmp_path / "prediction_report.csv")
    assert [r[1] for r in table[1:]] == ["full", "portfolio_random", "portfolio_early",
                                         "random", "sa", "reinforce", "qaoa-corr"]
    assert "Upper Bound" in capsys.readouterr().out
    assert main(["predict", "--archives", str(suite_dir), "--out", str(tmp_path)]) == 2


def test_validate_archives(suite_dir, capsys):
    assert main(["validate", "--archives", str(suite_dir)]) == 0
    assert "8 archives" in capsys.readouterr().out


def test_mixed_schema_exit_2(tmp_path):
    assert main(["run", "--solver", "random", "--budget", "100", "--out", str(tmp_path)]) == 0
    assert main(["run", "--solver", "sa", "--budget", "100", "--schema", "multi_page_27",
                 "--out", str(tmp_path)]) == 0
    assert main(["analyze", "--archives", str(tmp_path)]) == 2


def test_missing_archives_exit_2(tmp_path):
    assert main(["analyze", "--archives", str(tmp_path / "nope")]) == 2
    assert main(["predict", "--archives", str(tmp_path)]) == 2


def test_enumerate_mini(tmp_path, capsys):
    assert main(["enumerate", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "enumerate" / "seed_0.jsonl").read_text().splitlines()) == 256
    assert "global max risk" in capsys.readouterr().out
