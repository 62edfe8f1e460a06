import json

import pytest

import tlcpy as tlc
import tlcpy.main
from tlcpy.artifacts import read_csv
from tlcpy.main import EXIT_INCONSISTENT, EXIT_INVALID, EXIT_OK, main


def test_transfer_grid(tmp_path, capsys):
    args = ["transfer-grid", "--set", "points=3", "--set", "generator=1/3", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("# transfer-grid: ")
    assert "1/3: 9 transfer points" in out

    path = tmp_path / "transfer-grid.csv"
    header, rows = read_csv(path)
    assert header == ["y1", "y2", "f1", "f2"]
    assert len(rows) == 9
    assert [float(v) for v in rows[0]] == pytest.approx([0.0, 0.0, 0.0, 0.0], abs=1e-12)

    text = path.read_text(encoding="utf-8")
    assert "# ensemble.generator=\"1/3\"\n" in text
    assert "# analysis.points=3\n" in text

    first = path.read_bytes()
    assert main(args) == EXIT_OK
    assert path.read_bytes() == first


def test_threshold_bp(tmp_path, capsys):
    args = ["threshold-bp", "--set", "bp_tol=1e-2", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    assert "PCC unified: eps_BP = " in capsys.readouterr().out

    data = json.loads((tmp_path / "threshold-bp.json").read_text(encoding="utf-8"))
    assert data["config"]["analysis"]["bp_tol"] == 1e-2
    assert data["config"]["ensemble"]["rho2"] is None
    assert data["rate"] == "1/3"
    result = data["result"]
    assert result["method"] == "bp"
    assert result["lo"] <= result["threshold"] <= result["hi"]


def test_de_trace(tmp_path, capsys):
    args = ["de-trace", "--set", "epsilon=0.2 0.9", "--set", "de_max_iter=200", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    out = capsys.readouterr().out
    assert "eps=0.2: converged" in out
    assert "eps=0.9: stuck" in out

    header, rows = read_csv(tmp_path / "de-trace-0.2.csv")
    assert header == ["iteration", "x1", "x2", "p_a"]
    assert [int(r[0]) for r in rows] == list(range(1, len(rows) + 1))
    assert float(rows[-1][3]) < float(rows[0][3])


def test_simulate(tmp_path, capsys):
    args = [
        "simulate", "--set", "epsilon=0.3,0.95", "--set", "N=50", "--set", "frames=4",
        "--seed", "12", "--out", str(tmp_path),
    ]
    assert main(args) == EXIT_OK
    assert "N=50 eps=0.3: ber=" in capsys.readouterr().out

    lines = (tmp_path / "simulate.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    records = [json.loads(line) for line in lines]
    assert [r["epsilon"] for r in records] == [0.3, 0.95]
    assert all(r["config"]["run"]["seed"] == 12 for r in records)
    assert all(r["seed"] == 12 for r in records)
    assert "wall_time" not in records[0]
    assert records[1]["fer"] == 1.0


def test_exit_curve(tmp_path, mocker):
    curve = mocker.patch("tlcpy.graph_exit_curve", return_value=[(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)])
    args = ["exit-curve", "--set", "class=SCC", "--set", "form=original", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    (graph,), _ = curve.call_args
    assert graph.name == "original-SCC"
    header, rows = read_csv(tmp_path / "exit-curve.csv")
    assert header == ["epsilon", "h"]
    assert rows == [["0.0", "0.0"], ["0.5", "0.25"], ["1.0", "1.0"]]


def test_table2(tmp_path, mocker, capsys):
    result = tlc.ThresholdResult(0.5, 0.5, 0.5, 1e-5, 1)
    for name in ("bp_threshold", "map_threshold", "graph_bp_threshold", "graph_map_threshold"):
        mocker.patch(f"tlcpy.{name}", return_value=result)
    assert main(["table2", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "HCC  original  R=1/5" in out

    header, rows = read_csv(tmp_path / "table2.csv")
    assert header == ["ensemble", "form", "rate", "eps_bp", "eps_map"]
    assert [(r[0], r[1]) for r in rows[:2]] == [("PCC", "unified"), ("PCC", "original")]
    assert len(rows) == 8
    data = json.loads((tmp_path / "table2.json").read_text(encoding="utf-8"))
    assert len(data["rows"]) == 8
    assert data["rows"][7] == {
        "ensemble": "BCC", "form": "original", "rate": "1/3", "eps_bp": 0.5, "eps_map": 0.5,
    }


def test_invalid_config(capsys):
    assert main(["threshold-bp", "--set", "ensemble.class=LDPC"]) == EXIT_INVALID
    assert "error: 'LDPC' is not a valid ensemble class" in capsys.readouterr().err

    assert main([]) == EXIT_INVALID
    assert "not a valid operation" in capsys.readouterr().err

    with pytest.raises(SystemExit) as exc_info:
        main(["decode"])
    assert exc_info.value.code == 2


def test_unwritable_out(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    args = ["transfer-grid", "--set", "points=2", "--out", str(blocker / "sub")]
    assert main(args) == EXIT_INVALID
    assert "cannot write" in capsys.readouterr().err


def test_inconsistency_exit_code(mocker, capsys):
    handler = mocker.Mock(side_effect=tlc.InconsistencyError("bit 4 received both 0 and 1", bit=4))
    mocker.patch.dict(tlcpy.main.OPERATION_HANDLERS, {"simulate": handler})
    assert main(["simulate", "--set", "epsilon=0.5"]) == EXIT_INCONSISTENT
    assert "internal inconsistency: bit 4 received both 0 and 1" in capsys.readouterr().err


class TestChildProcess:
    def test_version(self, child_cli):
        res = child_cli.run(["--version"])
        assert res.returncode == 0
        assert res.stdout.startswith(f"TurboLike.py {tlc.__version__}, Python ")

    def test_config_file(self, child_cli, tmp_path):
        config = child_cli.write_config(tmp_path / "grid.ini", f"""\
            [run]
            operation = transfer-grid
            out = {tmp_path}

            [analysis]
            points = 2
            """)
        res = child_cli.run(["--config", config, "-q"])
        assert res.returncode == 0, res.stderr
        assert "5/7: 4 transfer points" in res.stdout
        assert (tmp_path / "transfer-grid.csv").exists()

    def test_error(self, child_cli):
        res = child_cli.run(["threshold-bp", "--set", "generator=8/7"])
        assert res.returncode == EXIT_INVALID
        assert res.stdout == ""
        assert "not a valid octal" in res.stderr
