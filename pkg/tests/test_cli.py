from __future__ import annotations

from opinionshape.cli import main


def write_config(tmp_path, **overrides):
    base = {
        "network": "karate",
        "s_size": 3,
        "s1_size": 28,
        "s0_size": 3,
        "alpha": 0.6,
        "budget": 5.0,
        "scheme": "sas",
        "n_iters": 50,
        "n_runs": 2,
        "seed": 0,
    }
    base.update(overrides)
    path = tmp_path / "run.cfg"
    path.write_text("\n".join(f"{k} = {v}" for k, v in base.items()) + "\n")
    return path


def test_run_success(tmp_path, capsys):
    cfg = write_config(tmp_path, out_dir=tmp_path / "out")
    code = main(["run", "--config", str(cfg)])
    assert code == 0
    out = capsys.readouterr().out
    assert "summary" in out
    assert (tmp_path / "out" / "sas_summary.csv").exists()


def test_run_flag_overrides(tmp_path, capsys):
    cfg = write_config(tmp_path, out_dir=tmp_path / "out2")
    code = main(["run", "--config", str(cfg), "--scheme", "sgd1", "--iters", "20", "--runs", "1"])
    assert code == 0
    assert (tmp_path / "out2" / "sgd1_seed0.csv").exists()


def test_gd_subcommand(tmp_path):
    cfg = write_config(tmp_path, out_dir=tmp_path / "gd_out")
    code = main(["gd", "--config", str(cfg), "--iters", "4000"])
    assert code == 0
    assert (tmp_path / "gd_out" / "gd_seed0.csv").exists()


def test_missing_config_is_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "none.cfg")]) == 2


def test_bad_key_is_exit_2(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("nonsense = true\n")
    assert main(["run", "--config", str(path)]) == 2


def test_infeasible_instance_is_exit_3(tmp_path):
    # every agent controlled with zero influence: singular stationary system
    cfg = write_config(tmp_path, s_size=34, s1_size=0, s0_size=0, alpha=0.0, out_dir=tmp_path / "x")
    assert main(["run", "--config", str(cfg)]) == 3


def test_timing_subcommand(tmp_path, capsys):
    cfg = write_config(tmp_path, out_dir=tmp_path / "t")
    code = main(["timing", "--config", str(cfg), "--schemes", "sas", "--timing-iters", "10"])
    assert code == 0
    assert "sas:" in capsys.readouterr().out


def test_timing_empty_schemes_is_exit_2(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["timing", "--config", str(cfg), "--schemes", ""]) == 2
