import csv
import json
from pathlib import Path

import pytest

from relayblock.cli import main

CONFIGS = Path(__file__).parent.parent / "configs"


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SMALL = "traffic.lambda = 5, 40, 80\n"


def test_analyze_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["analyze", "--config", write(tmp_path, SMALL), "--out", str(out)]) == 0
    for link in ("bs_ms", "bs_rs", "rs_ms"):
        rows = read_csv(out / f"class_distribution_{link}.csv")
        assert list(rows[0]) == ["class", "demand", "probability"]
        assert rows[0]["class"] == "1"
    sweep = read_csv(out / "blocking_sweep.csv")
    assert [float(r["lambda"]) for r in sweep] == [5.0, 40.0, 80.0]
    p = [float(r["p_b_overall"]) for r in sweep]
    assert p == sorted(p)
    body = json.loads((out / "reports" / "report_lambda_40.json").read_text())
    assert body["p_b_overall"] == pytest.approx(p[1], rel=0, abs=0)
    assert "radio.k_bs = 480" in body["config"]


def test_numbers_round_trip_exactly(tmp_path):
    out = tmp_path / "out"
    main(["analyze", "--config", write(tmp_path, SMALL), "--out", str(out)])
    sweep = read_csv(out / "blocking_sweep.csv")
    body = json.loads((out / "reports" / "report_lambda_80.json").read_text())
    # '.17g' text parses back to the identical double
    assert float(sweep[2]["p_b_h"]) == body["p_b_h"]
    digits = sweep[2]["p_b_h"].lstrip("0.").replace(".", "").split("e")[0]
    assert len(digits) >= 12


def test_echo_reproduces_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["analyze", "--config", write(tmp_path, SMALL), "--out", str(a)])
    main(["analyze", "--config", str(a / "effective_config.txt"), "--out", str(b)])
    for f in sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file()):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_threads_do_not_change_results(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = write(tmp_path, SMALL)
    main(["analyze", "--config", cfg, "--out", str(a)])
    main(["analyze", "--config", cfg, "--out", str(b), "--threads", "3"])
    assert (a / "blocking_sweep.csv").read_bytes() == (b / "blocking_sweep.csv").read_bytes()


def test_env_var_sets_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv("RELAYBLOCK_OUT", str(tmp_path / "env"))
    assert main(["analyze", "--config", write(tmp_path, "traffic.lambda = 1\n")]) == 0
    assert (tmp_path / "env" / "blocking_sweep.csv").exists()


def test_no_temp_files_left(tmp_path):
    out = tmp_path / "out"
    main(["analyze", "--config", write(tmp_path, SMALL), "--out", str(out)])
    assert not [p for p in out.rglob(".*.tmp")]


def test_bad_config_line_anchored(tmp_path, capsys):
    cfg = write(tmp_path, "radio.rate = 64e3\nradio.nope = 1\n")
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert f"{cfg}:2:" in err and "unknown key" in err
    assert not (tmp_path / "o").exists()


def test_budget_violation_named(tmp_path, capsys):
    cfg = write(tmp_path, "radio.k_rs = 40\n")
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "subcarrier-budget" in capsys.readouterr().err


def test_simulate_validation_error(tmp_path, capsys):
    cfg = write(tmp_path, "simulation.replications = 1\nsimulation.horizon = 5\nsimulation.warmup = 10\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


SIM = """
traffic.lambda = 4
radio.k_bs = 12
radio.k_rs = 3
traffic.relay_count = 2
classes.bs_ms_pmf = 1:0.5, 2:0.5
classes.bs_rs_pmf = 1:1
classes.rs_ms_pmf = 1:0.7, 2:0.3
simulation.horizon = 200
simulation.warmup = 10
simulation.replications = 4
"""


def test_simulate_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = write(tmp_path, SIM)
    assert main(["simulate", "--config", cfg, "--out", str(a), "--seed", "9"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b), "--seed", "9"]) == 0
    for name in ("sim_replications.csv", "sim_estimates.csv", "comparison.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    reps = read_csv(a / "sim_replications.csv")
    assert list(reps[0]) == ["mode", "lambda", "replication", "stream", "offered", "blocked", "fraction"]
    assert {r["mode"] for r in reps} == {"coupled", "decoupled"}
    cmp_rows = read_csv(a / "comparison.csv")
    assert {r["stream"] for r in cmp_rows} == {"direct", "hopped", "hopped_bs_rs", "hopped_rs_ms", "overall"}
    assert "gap_analytic_minus_coupled" in cmp_rows[0]
    assert "simulation.seed = 9" in (a / "effective_config.txt").read_text()


def test_simulate_seed_changes_draws(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = write(tmp_path, SIM)
    main(["simulate", "--config", cfg, "--out", str(a), "--seed", "1", "--mode", "decoupled"])
    main(["simulate", "--config", cfg, "--out", str(b), "--seed", "2", "--mode", "decoupled"])
    assert (a / "sim_replications.csv").read_bytes() != (b / "sim_replications.csv").read_bytes()


def test_example2_config_simulated_per_class(tmp_path):
    out = tmp_path / "e2"
    assert main(["simulate", "--config", str(CONFIGS / "example2_rs.cfg"), "--out", str(out), "--mode", "decoupled"]) == 0
    est = {(r["lambda"], r["stream"]): r for r in read_csv(out / "sim_estimates.csv")}
    main(["analyze", "--config", str(CONFIGS / "example2_rs.cfg"), "--out", str(out / "an")])
    body = json.loads((out / "an" / "reports" / "report_lambda_2.json").read_text())
    per = dict(zip(body["per_class"]["rs_ms"]["demands"], body["per_class"]["rs_ms"]["blocking"]))
    for d in (1, 2):
        e = est[("2", f"rs_ms:{d}")]
        se = float(e["half_width"]) / 2.09
        assert abs(float(e["mean"]) - per[d]) <= 3.3 * se


def test_fit_interference_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["fit-interference", "--out", str(a), "--samples", "20000"]) == 0
    main(["fit-interference", "--out", str(b), "--samples", "20000", "--seed", "77"])
    ra, rb = read_csv(a / "interference_models.csv"), read_csv(b / "interference_models.csv")
    assert list(ra[0]) == ["link", "m1", "m2", "mu_I", "sigma_I", "ks_distance_vs_exact_sampling"]
    assert [r["link"] for r in ra] == ["bs_ms", "bs_rs", "rs_ms"]
    for x, y in zip(ra, rb):
        assert [x[k] for k in ("m1", "m2", "mu_I", "sigma_I")] == [y[k] for k in ("m1", "m2", "mu_I", "sigma_I")]
        assert 0 < float(x["ks_distance_vs_exact_sampling"]) < 1


def test_fit_interference_zero_sigma_row(tmp_path):
    cfg = write(
        tmp_path,
        "".join(f"shadowing.{k} = 0\n" for k in ("bs_ms", "ibs_ms", "bs_rs", "ibs_rs", "rs_ms", "irs_ms")),
    )
    main(["fit-interference", "--config", cfg, "--out", str(tmp_path / "o"), "--samples", "100"])
    rows = {r["link"]: r for r in read_csv(tmp_path / "o" / "interference_models.csv")}
    assert float(rows["bs_rs"]["sigma_I"]) == 0.0


def test_shipped_configs_analyze(tmp_path):
    for cfg in sorted(CONFIGS.glob("*.cfg")):
        assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path / cfg.stem)]) == 0
