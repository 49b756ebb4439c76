import json

import pytest

from zenolimit import cli


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


SWEEP = {
    "kind": "sweep",
    "system": {"hamiltonian": "sigma_x", "coupling": "sigma_z"},
    "reservoir": {"frequencies": [0.7, 1.6], "couplings": [0.3, 0.2], "n_max": 1, "beta": "inf"},
    "state": "ket:0",
    "lambda": [0.5, 1.0, 2.0],
    "times": [0.5, 1.0],
}

DEPHASING = {
    "kind": "dephasing",
    "system": {"hamiltonian": "sigma_z", "coupling": "sigma_z"},
    "reservoir": {"frequencies": [0.5, 1.5], "couplings": [0.4, 0.3], "n_max": 16, "beta": "inf"},
    "state": {"vector": [1, 1]},
    "lambda": [1.0],
    "times": [0.0, 0.3, 1.0],
}


def read_csv(path):
    lines = open(path).read().splitlines()
    assert lines[0].startswith("# zenolimit")
    return lines[1].split(","), [line.split(",") for line in lines[2:]]


def test_sweep_columns_and_rows(tmp_path):
    out = tmp_path / "sweep.csv"
    assert cli.main(["sweep", "--config", write_config(tmp_path, SWEEP), "--out", str(out), "--quiet"]) == 0
    header, rows = read_csv(out)
    assert header == cli.COLUMNS["sweep"]
    assert len(rows) == 6
    assert [float(r[0]) for r in rows[:3]] == [0.5, 1.0, 2.0]
    assert all(r[6] in ("true", "false") for r in rows)


def test_sweep_reproducible_except_wall_time(tmp_path):
    path = write_config(tmp_path, SWEEP)
    bodies = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        assert cli.main(["sweep", "--config", path, "--out", str(out), "--quiet", "--threads", str(1 + k)]) == 0
        _, rows = read_csv(out)
        bodies.append([r[:-1] for r in rows])
    assert bodies[0] == bodies[1]


def test_dephasing_reproducible_bytes(tmp_path):
    path = write_config(tmp_path, DEPHASING)
    texts = []
    for k in range(2):
        out = tmp_path / f"d{k}.csv"
        assert cli.main(["dephasing", "--config", path, "--out", str(out), "--quiet"]) == 0
        texts.append(out.read_text().split("\n", 1)[1])
    assert texts[0] == texts[1]


def test_dephasing_analytic_matches_simulation(tmp_path):
    out = tmp_path / "d.csv"
    assert cli.main(["dephasing", "--config", write_config(tmp_path, DEPHASING), "--out", str(out), "--quiet"]) == 0
    header, rows = read_csv(out)
    assert header == cli.COLUMNS["dephasing"]
    assert all(float(r[5]) < 1e-8 for r in rows)
    assert float(rows[0][6]) == 1.0
    mags = [float(r[6]) for r in rows]
    assert 0 < mags[-1] < 1


def test_floats_round_trip(tmp_path):
    out = tmp_path / "d.csv"
    cli.main(["dephasing", "--config", write_config(tmp_path, DEPHASING), "--out", str(out), "--quiet"])
    _, rows = read_csv(out)
    for cell in rows[1][1:]:
        assert "%.17g" % float(cell) == cell


def test_malformed_config_exit_2_no_output(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    out = tmp_path / "out.csv"
    assert cli.main(["sweep", "--config", str(path), "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_config_file_exit_2(tmp_path):
    assert cli.main(["sweep", "--config", str(tmp_path / "nope.json")]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep"])
    assert exc.value.code == 2


@pytest.mark.parametrize(
    "patch",
    [
        {"lambda": []},
        {"lambda": [2.0, 1.0]},
        {"times": [-1.0]},
        {"system": {"hamiltonian": "sigma_q", "coupling": "sigma_z"}},
        {"system": {"hamiltonian": [[0, 1], [0, 0]], "coupling": "sigma_z"}},
        {"state": "ket:01"},
        {"reservoir": {"frequencies": [1.0], "couplings": [0.1], "n_max": 1, "beta": -2}},
        {"kind": "collision"},
    ],
)
def test_validation_errors_exit_3(tmp_path, patch):
    out = tmp_path / "out.csv"
    assert cli.main(["sweep", "--config", write_config(tmp_path, {**SWEEP, **patch}), "--out", str(out)]) == 3
    assert not out.exists()


def test_validate_subcommand(tmp_path, capsys):
    assert cli.main(["validate", "--config", write_config(tmp_path, SWEEP)]) == 0
    assert cli.main(["validate", "--config", write_config(tmp_path, {**SWEEP, "kind": "nope"})]) == 3


def test_truncation_flag_is_warning(tmp_path, capsys):
    cfg = {**SWEEP, "lambda": [6.0], "times": [1.0], "truncation": {"dim_cap": 16}}
    out = tmp_path / "out.csv"
    assert cli.main(["sweep", "--config", write_config(tmp_path, cfg), "--out", str(out), "--quiet"]) == 0
    assert "warning: truncation" in capsys.readouterr().err
    _, rows = read_csv(out)
    assert rows[0][6] == "false"


def test_noncommuting_dephasing_exit_4(tmp_path):
    cfg = {**DEPHASING, "system": {"hamiltonian": "sigma_x", "coupling": "sigma_z"}}
    assert cli.main(["dephasing", "--config", write_config(tmp_path, cfg), "--quiet"]) == 4


def test_entanglement_seeded(tmp_path):
    cfg = {
        "system": {
            "hamiltonian": {"sum": ["sigma_x_1", "sigma_x_2"]},
            "coupling": {"composite": {"operators": ["sigma_z", "sigma_z"], "combine": "sum", "mu": 0.1}},
        },
        "times": [1.0],
        "samples": 5,
    }
    path = write_config(tmp_path, cfg)
    outs = []
    for seed in (3, 3, 4):
        out = tmp_path / f"e{len(outs)}.csv"
        assert cli.main(["entanglement", "--config", path, "--out", str(out), "--seed", str(seed), "--quiet"]) == 0
        outs.append(read_csv(out)[1])
    assert outs[0] == outs[1] != outs[2]
    assert all(float(r[2]) < 1e-12 and r[5] == "true" for r in outs[0])


def test_collision_stdout(tmp_path, capsys):
    cfg = {"system": {"hamiltonian": "zero2"}, "state": "ket:0", "measurements": ["sigma_z", "sigma_x"]}
    assert cli.main(["collision", "--config", write_config(tmp_path, cfg), "--quiet"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == ",".join(cli.COLUMNS["collision"])
    last = lines[-1].split(",")
    assert float(last[1]) == pytest.approx(0.5, abs=1e-15)
    assert float(last[3]) == pytest.approx(0.0, abs=1e-15)


def test_multires_rank_one_sector_frozen(tmp_path, capsys):
    cfg = {
        "system": {"hamiltonian": "sigma_z_1", "coupling": "sigma_z_1", "coupling2": "zz_sum"},
        "reservoir": {"frequencies": [0.7, 1.3], "couplings": [0.3, 0.2], "n_max": 4},
        "state": "ket:00",
        "lambda": [0.5],
        "times": [0.0, 1.0, 2.5],
    }
    assert cli.main(["multires", "--config", write_config(tmp_path, cfg), "--quiet"]) == 0
    rows = [line.split(",") for line in capsys.readouterr().out.splitlines()[2:]]
    assert len(rows) == 3 * 16
    for r in rows:
        expected = 1.0 if (r[1], r[2]) == ("0", "0") else 0.0
        assert abs(float(r[3]) - expected) < 1e-10 and abs(float(r[4])) < 1e-10


def test_help_documents_columns(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    text = capsys.readouterr().out
    for cols in cli.COLUMNS.values():
        assert ",".join(cols[:2]) in text.replace("\n", "")


@pytest.mark.parametrize("name", ["sweep", "dephasing", "entanglement", "collision", "multires"])
def test_shipped_configs_validate(name):
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / f"{name}.json"
    assert cli.main(["validate", "--config", str(path), "--quiet"]) == 0
