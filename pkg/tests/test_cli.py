import csv
import io
import math
import subprocess
import sys

import pytest

from pyramid_mining.cli import main


def table(text: str):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def run(argv, tmp_path, name="out.csv"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, (out.read_text() if out.exists() else "")


def test_solve_rows_sum_to_one(tmp_path):
    code, text = run(["solve"], tmp_path)
    rows = table(text)
    assert code == 0 and rows[0] == {"level": "0", "lead": "0", "probability": repr(0.0228937510343142)}
    assert math.fsum(float(r["probability"]) for r in rows) == pytest.approx(1.0, abs=1e-10)
    assert "# gamma = 5.0" in text


def test_dump_blocks(tmp_path):
    dump = tmp_path / "blocks.csv"
    code, _ = run(["solve", "--levels", "2", "--dump-blocks", str(dump)], tmp_path)
    rows = table(dump.read_text())
    assert code == 0 and {"block": "q_root_root", "row": "0", "col": "0", "value": "-45.5"} in rows


def test_metrics_row(tmp_path):
    code, text = run(["metrics"], tmp_path)
    (row,) = table(text)
    assert code == 0 and row["status"] == "ok" and float(row["p_h"]) == pytest.approx(0.47840668755316)


def test_rewards_row_marks_undefined_ratio(tmp_path):
    code, text = run(["rewards"], tmp_path)
    (row,) = table(text)
    assert code == 0 and row["ratio_im"] == "nan" and row["status"] == "undefined: HonestProfitZero"
    assert list(row)[-7:-1] == ["r_honest", "r_dishonest", "threshold_v", "ratio_im", "ratio_tau", "constant_c"]


def test_sweep_rewards_trends(tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("sweep = gamma 5 8.5 10\nsweep2 = efficiency_ratio 0.5 0.9 3\nworkers = 3\n")
    code, text = run(["sweep", "rewards", "--config", str(cfg)], tmp_path)
    rows = table(text)
    assert code == 0 and len(rows) == 30
    assert [int(r["point"]) for r in rows] == list(range(30))
    for ratio in ("0.5", "0.7", "0.9"):
        tau = [float(r["ratio_tau"]) for r in rows if r["efficiency_ratio"] == ratio]
        assert all(b > a for a, b in zip(tau, tau[1:]))


def test_sweep_skips_invalid_points(tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("sweep = gamma 8 10 3\n")
    code, text = run(["sweep", "metrics", "--config", str(cfg)], tmp_path)
    rows = table(text)
    assert code == 0 and rows[0]["status"] == "ok"
    assert [r["status"].split(":")[0] for r in rows[1:]] == ["warning", "warning"]
    assert "GammaOutOfRange" in rows[2]["status"] and rows[2]["p_h"] == "nan"


def test_invalid_point_fails_single_command(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("gamma = 9.5\n")
    code, _ = run(["rewards", "--config", str(cfg)], tmp_path)
    err = capsys.readouterr().err.strip()
    assert code == 2 and err.startswith("error: GammaOutOfRange: ") and "gamma=9.5" in err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("gamma_rate = 1\n")
    code, _ = run(["metrics", "--config", str(cfg)], tmp_path)
    assert code == 2 and capsys.readouterr().err.startswith("error: ConfigParseError")


@pytest.mark.parametrize("variant", ["e0", "e1", "e2", "nolatency", "nolatency-p2"])
def test_approx(tmp_path, variant):
    code, text = run(["approx", "--variant", variant], tmp_path)
    rows = table(text)
    psi = [float(r["value"]) for r in rows if r["kind"] == "psi"]
    assert code == 0 and math.fsum(psi) == pytest.approx(1.0, abs=1e-14)
    assert {r["name"] for r in rows if r["kind"] == "profit"} >= {"r_h_rel", "r_d_rel", "ratio", "status"}


def test_transient(tmp_path):
    code, text = run(["transient", "--pool", "dishonest", "--times", "0,1,10"], tmp_path)
    rows = table(text)
    assert code == 0 and [r["t"] for r in rows] == ["0.0", "1.0", "10.0"]
    assert float(rows[0]["expected_renewals"]) == 0.0


def test_simulate_is_byte_identical(tmp_path):
    argv = ["simulate", "--seed", "42", "--episodes", "20000", "--replications", "2"]
    first = run(argv, tmp_path)[1]
    second = run(argv, tmp_path)[1]
    assert first == second and "seed = 42" in first


def test_compare_identical_and_perturbed(tmp_path):
    _, text = run(["metrics"], tmp_path, "a.csv")
    code, report = run(["compare", str(tmp_path / "a.csv"), str(tmp_path / "a.csv")], tmp_path, "r.csv")
    rows = table(report)
    assert code == 0 and all(float(r["z"]) == 0 and float(r["rel_error"]) == 0 for r in rows)

    (row,) = table(text)
    row["l_m"] = repr(float(row["l_m"]) * 1.1)
    perturbed = tmp_path / "b.csv"
    with perturbed.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(row))
        w.writeheader()
        w.writerow(row)
    code, report = run(["compare", str(tmp_path / "a.csv"), str(perturbed)], tmp_path, "r2.csv")
    status = {r["name"]: r["status"] for r in table(report)}
    assert code == 1 and status["l_m"] == "fail" and status["p_h"] == "ok"


def test_compare_against_simulation(tmp_path):
    run(["metrics"], tmp_path, "a.csv")
    run(["simulate", "--seed", "3", "--episodes", "300000"], tmp_path, "s.csv")
    code, report = run(["compare", str(tmp_path / "a.csv"), str(tmp_path / "s.csv")], tmp_path, "r.csv")
    rows = table(report)
    assert code == 0 and len(rows) >= 10 and max(abs(float(r["z"])) for r in rows) <= 4


def test_compare_schema_mismatch(tmp_path, capsys):
    run(["metrics"], tmp_path, "a.csv")
    run(["solve", "--levels", "1"], tmp_path, "b.csv")
    code, _ = run(["compare", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")], tmp_path, "r.csv")
    assert code == 2 and "SchemaMismatch" in capsys.readouterr().err


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "pyramid_mining", "metrics"], capture_output=True, text=True, check=True
    ).stdout
    assert table(out)[0]["status"] == "ok"
