import json

import numpy as np
import pytest

from dnpnv.cli import main


def write_config(tmp_path, name, tree):
    path = tmp_path / name
    path.write_text(json.dumps(tree))
    return str(path)


def model_block(**kw):
    block = {"levels": "five", "pump_rate_mhz": 0.2, "gamma_dep_per_s": 1.0}
    block.update(kw)
    return block


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def test_rates_schema_and_byte_determinism(tmp_path):
    cfg = write_config(tmp_path, "rates.json", {
        "model": model_block(),
        "field": {"start_mt": 102.2, "stop_mt": 102.6, "points": 5},
        "nuclei": {"dipolar": {"r_a": 20.0, "theta_deg": 0.0}},
        "methods": ["golden", "resolvent"],
    })
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(["rates", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["rates", "--config", cfg, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    header, rows = read_csv(out1)
    assert header == ["B_mT", "Delta_MHz", "Delta_N_MHz", "Gamma_MHz",
                      "W_plus_per_s_golden", "W_minus_per_s_golden",
                      "p_ss_golden", "W_plus_per_s_resolvent",
                      "W_minus_per_s_resolvent", "p_ss_resolvent",
                      "rel_discrepancy"]
    assert len(rows) == 5
    assert float(rows[0][0]) == 102.2
    # the two tiers agree closely in this weak-pump regime
    assert all(float(r[-1]) < 1e-2 for r in rows)


def test_sweep_parallel_matches_serial(tmp_path):
    cfg = write_config(tmp_path, "sweep.json", {
        "model": model_block(),
        "field": {"start_mt": 102.0, "stop_mt": 102.8, "points": 12},
        "nuclei": {"dipolar": {"r_a": 15.0, "theta_deg": 30.0}},
        "method": "golden",
    })
    serial = tmp_path / "serial.csv"
    parallel = tmp_path / "parallel.csv"
    assert main(["sweep", "--config", cfg, "--out", str(serial)]) == 0
    assert main(["sweep", "--config", cfg, "--jobs", "2",
                 "--out", str(parallel)]) == 0
    assert serial.read_bytes() == parallel.read_bytes()
    header, rows = read_csv(serial)
    assert header == ["B_mT", "p_ss", "W_per_s", "W_plus_per_s",
                      "W_minus_per_s", "markovian_valid"]
    assert len(rows) == 12
    assert {r[-1] for r in rows} <= {"true", "false"}


def test_sweep_theta_map_adds_angle_column(tmp_path):
    cfg = write_config(tmp_path, "theta.json", {
        "model": model_block(),
        "field": {"start_mt": 102.37, "points": 1},
        "nuclei": {"dipolar": {"r_a": 20.0, "theta_deg": 0.0}},
        "method": "golden",
        "theta_map": {"start_deg": 0.0, "stop_deg": 90.0, "points": 7},
    })
    out = tmp_path / "theta.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header[:2] == ["B_mT", "theta_deg"]
    assert len(rows) == 7
    assert [float(r[1]) for r in rows] == pytest.approx(
        list(np.linspace(0.0, 90.0, 7)))


def test_evolve_lindblad_columns_and_overrides(tmp_path):
    cfg = write_config(tmp_path, "evolve.json", {
        "model": model_block(pump_rate_mhz=0.4),
        "field": {"start_mt": 100.07, "points": 1},
        "nuclei": "builtin:first_shell",
        "method": "lindblad",
        "evolve": {"t_max_us": 12.0, "steps": 121},
    })
    out = tmp_path / "evolve.csv"
    assert main(["evolve", "--config", cfg, "--out", str(out),
                 "--t-max", "2.0", "--steps", "13"]) == 0
    header, rows = read_csv(out)
    assert header == ["t_us", "p", "pop_0g", "pop_-1g", "pop_0e",
                      "pop_-1e", "pop_S"]
    assert len(rows) == 13
    assert float(rows[-1][0]) == 2.0
    assert float(rows[0][1]) == 0.0
    # populations stay normalized along the trajectory
    for r in rows:
        assert sum(float(v) for v in r[2:]) == pytest.approx(1.0, abs=1e-9)


def test_evolve_golden_trajectory(tmp_path):
    cfg = write_config(tmp_path, "evg.json", {
        "model": model_block(),
        "field": {"start_mt": 102.37, "points": 1},
        "nuclei": {"dipolar": {"r_a": 15.0, "theta_deg": 0.0}},
        "method": "golden",
        "evolve": {"t_max_us": 100.0, "steps": 11},
    })
    out = tmp_path / "evg.csv"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["t_us", "p"]
    p = [float(r[1]) for r in rows]
    assert p[0] == 0.0
    assert all(b >= a - 1e-12 for a, b in zip(p, p[1:]))


def test_multispin_csv_and_json_sidecar(tmp_path):
    cfg = write_config(tmp_path, "multi.json", {
        "model": model_block(),
        "field": {"start_mt": 102.3, "stop_mt": 102.5, "points": 5},
        "nuclei": {"lattice": {"seed": 30, "r_min_a": 3.0, "r_max_a": 13.0,
                               "abundance": 0.011}},
        "method": "meanfield",
        "report_fields_mt": [102.4],
    })
    out = tmp_path / "multi.csv"
    assert main(["multispin", "--config", cfg, "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["B_mT", "p_bar", "h_ss_MHz", "iterations", "residual"]
    assert len(rows) == 5
    sidecar = tmp_path / "multi.json"
    assert sidecar.exists()
    report = json.loads(sidecar.read_text())
    assert len(report) == 1
    point = report[0]
    assert point["B_mT"] == 102.4
    assert len(point["sites"]) == 8
    assert len(point["bin_mean_p"]) == len(point["bin_edges_a"]) - 1
    for rec in point["sites"]:
        assert set(rec) == {"x", "y", "z", "p"}


def test_multispin_exact_joint_site_cap_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, "big.json", {
        "model": model_block(),
        "field": {"start_mt": 102.4, "points": 1},
        "nuclei": {"lattice": {"seed": 3, "r_min_a": 3.0, "r_max_a": 12.0,
                               "abundance": 0.011}},
        "method": "exact_joint",
    })
    assert main(["multispin", "--config", cfg]) == 2
    assert "config error" in capsys.readouterr().err


def test_lattice_export_feeds_multispin(tmp_path):
    lat_cfg = write_config(tmp_path, "lat.json", {
        "model": model_block(),
        "field": {"start_mt": 102.4, "points": 1},
        "nuclei": {"lattice": {"seed": 30, "r_min_a": 3.0, "r_max_a": 13.0,
                               "abundance": 0.011}},
    })
    sites_path = tmp_path / "sites.json"
    assert main(["lattice", "--config", lat_cfg,
                 "--out", str(sites_path)]) == 0
    records = json.loads(sites_path.read_text())
    assert len(records) == 8
    multi_cfg = write_config(tmp_path, "multi.json", {
        "model": model_block(),
        "field": {"start_mt": 102.35, "stop_mt": 102.45, "points": 3},
        "nuclei": {"file": str(sites_path)},
        "method": "exact_joint",
    })
    out = tmp_path / "multi.csv"
    assert main(["multispin", "--config", multi_cfg,
                 "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert len(rows) == 3


def test_exit_code_two_on_config_errors(tmp_path, capsys):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    assert main(["rates", "--config", str(bad_json)]) == 2
    cfg = write_config(tmp_path, "badmethod.json", {
        "model": model_block(),
        "field": {"start_mt": 102.0, "points": 1},
        "nuclei": "builtin:first_shell",
        "method": "wavelet",
    })
    assert main(["sweep", "--config", cfg]) == 2
    empty = write_config(tmp_path, "empty.json", {
        "model": model_block(),
        "field": {"start_mt": 102.0, "points": 1},
        "nuclei": {"lattice": {"seed": 1, "r_min_a": 3.0, "r_max_a": 8.0,
                               "abundance": 0.0}},
        "method": "meanfield",
    })
    assert main(["multispin", "--config", empty]) == 2
    capsys.readouterr()


def test_exit_code_three_on_io_errors(tmp_path, capsys):
    assert main(["rates", "--config", str(tmp_path / "missing.json")]) == 3
    cfg = write_config(tmp_path, "ok.json", {
        "model": model_block(),
        "field": {"start_mt": 102.4, "points": 1},
        "nuclei": {"dipolar": {"r_a": 20.0, "theta_deg": 0.0}},
        "methods": ["golden"],
    })
    assert main(["rates", "--config", cfg,
                 "--out", str(tmp_path / "no" / "dir" / "x.csv")]) == 3
    capsys.readouterr()


def test_exit_code_four_on_numerical_failure(tmp_path, capsys):
    zero_tensor = [[0.0, 0.0, 0.0]] * 3
    cfg = write_config(tmp_path, "dead.json", {
        "model": model_block(gamma_dep_per_s=0.0),
        "field": {"start_mt": 102.4, "points": 1},
        "nuclei": {"sites": [{"x_a": 5.0, "y_a": 0.0, "z_a": 3.0,
                              "species": "13C",
                              "ground_tensor_mhz": zero_tensor}]},
        "method": "exact_joint",
    })
    assert main(["multispin", "--config", cfg]) == 4
    assert "numerical error" in capsys.readouterr().err


def test_stdout_when_no_out_path(tmp_path, capsys):
    cfg = write_config(tmp_path, "stdout.json", {
        "model": model_block(),
        "field": {"start_mt": 102.4, "points": 2, "stop_mt": 102.5},
        "nuclei": {"dipolar": {"r_a": 20.0, "theta_deg": 0.0}},
        "methods": ["golden"],
    })
    assert main(["rates", "--config", cfg]) == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("B_mT,")
    assert len(captured.out.splitlines()) == 3
