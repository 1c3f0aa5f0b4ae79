import json
import shutil

import pytest

from ray_trpca import cli, io
from ray_trpca.cli import (EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_NUMERICAL,
                           EXIT_OK, build_parser, main)
from ray_trpca.norms import SWEEP_COLUMNS, SWEEP_METRICS

TINY = {
    "seed": 3,
    "radar": {
        "slow_count": 64,
        "fast_window_s": [-4e-7, 4e-7]
    },
    "scene": {
        "stationary": [{
            "position_m": [0.0, 0.0, 0.0]
        }, {
            "position_m": [6.0, -4.0, 0.0],
            "reflectivity": 0.8
        }],
        "movers": [{
            "position_m": [10.0, 5.0, 0.0],
            "speed_m_s": 5.0,
            "heading_rad": 0.785398,
            "reflectivity": 0.5
        }]
    },
    "tensor": {
        "s_sub_fraction": 0.25,
        "overlap": 0.5
    },
    "solver": {
        "max_iters": 150
    },
    "sweep": {
        "s_sub_fractions": [0.25],
        "overlaps": [0.5],
        "alphas_rad": [0.0]
    },
    "imaging": {
        "center_m": [10.0, 5.0, 0.0],
        "half_width_m": 16.0,
        "spacing_m": 2.0
    },
    "motion": {
        "seed_position_m": [10.0, 5.0, 0.0],
        "n_speeds": 2,
        "n_angles": 3
    }
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY))
    return path


def _run(command, config_path, out, *extra):
    return main([command, "--config", str(config_path), "--out", str(out),
                 "--log-level", "WARNING", *extra])


def test_pipeline(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    assert _run("simulate", config_path, out) == EXIT_OK
    assert "65x161 samples" in capsys.readouterr().out
    for name in ("D.srt", "D_L.srt", "D_S.srt"):
        assert (out / name).exists()
        assert (out / (name + ".json")).exists()

    assert _run("separate", config_path, out) in (EXIT_OK,
                                                   EXIT_NOT_CONVERGED)
    report = io.read_json(out / "separation_report.json")
    assert report["method"] == "tensor"
    assert report["eta_mode"] == "oracle"
    assert report["eta"] > 0
    assert report["norms"]["plan"]["rows_per_panel"] == 17
    assert {"low_rank_error", "sparse_error"} <= set(report)
    norms = report["norms"]["input"]
    assert norms["lower_bound"] <= norms["nuclear_fourier"] * (1 + 1e-9)
    L = io.load_data_matrix(out / "L.srt")
    assert L.shape == (65, 161)

    assert _run("image", config_path, out) == EXIT_OK
    summary = io.read_json(out / "image.json")
    assert summary["velocity_m_s"] == [0.0, 0.0, 0.0]
    assert summary["peak_magnitude"] > 0
    frame = io.read_csv(out / "image.csv")
    assert len(frame) == 17 * 17
    assert (out / "image.pgm").read_bytes().startswith(b"P5\n")

    code = _run("estimate", config_path, out)
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
    motion = io.read_json(out / "motion.json")
    assert motion["seed_position_m"] == [10.0, 5.0, 0.0]
    assert motion["converged"] == (code == EXIT_OK)
    assert motion["header"]["seed"] == 3


def test_simulate_is_reproducible(tmp_path, config_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert _run("simulate", config_path, first) == EXIT_OK
    assert _run("simulate", config_path, second) == EXIT_OK
    for name in ("D.srt", "D_L.srt", "D_S.srt"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_headers_carry_provenance(tmp_path, config_path):
    out = tmp_path / "out"
    _run("simulate", config_path, out)
    meta = io.read_json(out / "D.srt.json")
    assert meta["header"]["seed"] == 3
    assert len(meta["header"]["config_hash"]) == 16
    _run("simulate", config_path, out, "--seed", "4")
    changed = io.read_json(out / "D.srt.json")["header"]
    assert changed["seed"] == 4
    assert changed["config_hash"] != meta["header"]["config_hash"]


def test_explicit_eta_matrix_separation(tmp_path, config_path):
    out = tmp_path / "out"
    _run("simulate", config_path, out)
    code = _run("separate", config_path, out, "--method", "matrix",
                "--eta-mode", "explicit", "--eta", "0.05")
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
    report = io.read_json(out / "separation_report.json")
    assert report["method"] == "matrix"
    assert report["eta"] == pytest.approx(0.05)
    assert report["norms"] == {}


def test_oracle_needs_ground_truth(tmp_path, config_path):
    out = tmp_path / "out"
    _run("simulate", config_path, out)
    alone = tmp_path / "alone"
    alone.mkdir()
    for name in ("D.srt", "D.srt.json"):
        shutil.copy(out / name, alone / name)
    assert _run("separate", config_path, out, "--input",
                str(alone / "D.srt")) == EXIT_CONFIG
    assert _run("separate", config_path, out, "--input",
                str(alone / "D.srt"), "--eta-mode", "default") in (
                    EXIT_OK, EXIT_NOT_CONVERGED)


def test_single_cell_sweep(tmp_path, config_path):
    out = tmp_path / "out"
    assert _run("sweep", config_path, out) == EXIT_OK
    frame = io.read_csv(out / "sweep.csv")
    assert list(frame.columns) == SWEEP_COLUMNS
    assert len(frame) == 1
    assert frame.loc[0, "status"] == "ok"
    assert len(list(out.glob("sweep_*.pgm"))) == len(SWEEP_METRICS)
    first_line = (out / "sweep.csv").read_text().splitlines()[0]
    assert first_line.startswith("# config_hash: ")


def test_invalid_config_exits_2(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert _run("simulate", broken, tmp_path / "out") == EXIT_CONFIG
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps(dict(TINY, scene={"stationary": []})))
    assert _run("simulate", empty, tmp_path / "out") == EXIT_CONFIG
    assert _run("simulate", tmp_path / "missing.json",
                tmp_path / "out") == EXIT_CONFIG


def test_missing_input_exits_2(tmp_path, config_path):
    assert _run("separate", config_path, tmp_path / "nothing") == EXIT_CONFIG


def test_parser():
    args = build_parser().parse_args(
        ["image", "--config", "c.json", "--velocity", "1,2,0"])
    assert args.velocity == (1.0, 2.0, 0.0)
    with pytest.raises(SystemExit):
        build_parser().parse_args(
            ["image", "--config", "c.json", "--velocity", "1,2"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["separate", "--config", "c.json",
                                   "--method", "svd"])


def test_out_of_memory_exits_3(tmp_path, config_path, monkeypatch):
    def exhausted(cfg, args):
        raise MemoryError("cannot allocate 10 GiB")

    monkeypatch.setitem(cli.COMMANDS, "simulate", exhausted)
    assert _run("simulate", config_path, tmp_path / "out") == EXIT_NUMERICAL
