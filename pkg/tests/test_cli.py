"""Tests for the command-line interface."""

import csv
import glob
import os
import shutil
import subprocess
import sys

import pytest

from amcontrast import cli
from amcontrast.reference import oracle_mean_std


@pytest.fixture()
def runs_root(tmp_path, monkeypatch):
    root = tmp_path / "runs"
    monkeypatch.setenv(cli.RUNS_ENV, str(root))
    return root


def synth_args(out, seed=3):
    return ["synth", "--out", str(out), "--schemes", "BPSK,QPSK",
            "--snrs", "10", "--per-cell", "12", "--instance-len", "64",
            "--seed", str(seed)]


TINY = ["--set", "pretrain_epochs=1", "--set", "probe_epochs=2",
        "--set", "finetune_epochs=1", "--set", "batch_size=8",
        "--set", "label_budget=4"]


def test_synth_deterministic(tmp_path, runs_root):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.main(synth_args(a)) == 0
    assert cli.main(synth_args(b)) == 0
    assert cli.main(synth_args(c, seed=4)) == 0
    for name in ("manifest.txt", "samples.f32", "labels.i32", "snr.i16"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "samples.f32").read_bytes() != (c / "samples.f32").read_bytes()


def test_pretrain_probe_report_flow(tmp_path, runs_root, capsys):
    data = tmp_path / "data"
    assert cli.main(synth_args(data)) == 0
    assert cli.main(["pretrain", "--data", str(data), "--seeds", "0,1"] + TINY) == 0
    run_dirs = sorted(glob.glob(str(runs_root / "segment-contrast-*")))
    assert len(run_dirs) == 2
    accs = []
    for run_dir in run_dirs:
        info = cli.read_run_manifest(run_dir)
        assert info["kind"] == "pretrain"
        for artifact in info["artifacts"]:
            assert os.path.exists(os.path.join(run_dir, artifact))
        ckpt = os.path.join(run_dir, "checkpoint_final.ckpt")
        assert cli.main(["probe", "--data", str(data), "--seed", info["seed"],
                         "--checkpoint", ckpt] + TINY) == 0
    probe_dirs = sorted(glob.glob(str(runs_root / "probe-*")))
    assert len(probe_dirs) == 2
    accs = [cli.read_run_manifest(d)["results"]["acc_overall"]
            for d in probe_dirs]
    capsys.readouterr()
    assert cli.main(["report"] + probe_dirs) == 0
    out = capsys.readouterr().out
    mean, std = oracle_mean_std(accs)
    assert f"acc_overall mean={mean:.6f} std={std:.6f} n=2" in out


def test_report_refuses_mixed_configs(tmp_path, runs_root, capsys):
    from amcontrast.config import ExperimentConfig

    dirs = []
    for i, tau in enumerate((0.07, 0.2)):
        d = tmp_path / f"run{i}"
        d.mkdir()
        (d / "metrics.csv").write_text("stub\n")
        cli.write_run_manifest(str(d), "pretrain", ExperimentConfig(tau=tau),
                               seed=i, data_path="x", artifacts=["metrics.csv"],
                               results={"final_l_total": 1.0})
        dirs.append(str(d))
    assert cli.main(["report"] + dirs) == 1
    err = capsys.readouterr().err
    assert "tau" in err and "refusing" in err


def test_report_ignores_seed_list_differences(tmp_path, runs_root, capsys):
    from amcontrast.config import ExperimentConfig

    dirs = []
    for i, seeds in enumerate(((0,), (1,))):
        d = tmp_path / f"run{i}"
        d.mkdir()
        (d / "metrics.csv").write_text("stub\n")
        cli.write_run_manifest(str(d), "pretrain", ExperimentConfig(seeds=seeds),
                               seed=i, data_path="x", artifacts=["metrics.csv"],
                               results={"final_l_total": float(i)})
        dirs.append(str(d))
    assert cli.main(["report"] + dirs) == 0
    assert "final_l_total mean=0.500000" in capsys.readouterr().out


def test_run_manifest_requires_artifacts(tmp_path):
    from amcontrast.config import ExperimentConfig

    with pytest.raises(RuntimeError, match="missing"):
        cli.write_run_manifest(str(tmp_path), "pretrain", ExperimentConfig(),
                               seed=0, data_path="x",
                               artifacts=["not_there.csv"], results={})


def test_config_validation_lists_every_problem(tmp_path, runs_root, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("tau=-1\nmethod=bogus\nmystery_key=3\nbatch_size=0\n")
    data = tmp_path / "data"
    assert cli.main(synth_args(data)) == 0
    assert cli.main(["pretrain", "--config", str(cfg), "--data", str(data),
                     "--seed", "0"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("amcontrast: error: ConfigError:")
    for token in ("tau", "method", "mystery_key", "batch_size"):
        assert token in err
    assert len(err.strip().splitlines()) == 1  # one machine-parseable line


def test_ablate_loss_components_default_grid(tmp_path, runs_root):
    data = tmp_path / "data"
    assert cli.main(synth_args(data)) == 0
    assert cli.main(["ablate", "--data", str(data), "--seed", "0",
                     "--axis", "loss-components"] + TINY) == 0
    csv_path = glob.glob(str(runs_root / "ablate-*" / "ablate.csv"))[0]
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 7
    assert {r["value"] for r in rows} == {
        "ac", "sc", "jc", "ac+sc", "ac+jc", "sc+jc", "ac+sc+jc"}
    assert all(r["axis"] == "loss-components" for r in rows)


def test_mi_check_reports_bits(runs_root, capsys):
    assert cli.main(["mi-check", "--models", "3", "--maps", "2"]) == 0
    out = capsys.readouterr().out
    assert "segment_bits=1.000000000000" in out
    assert "instance_bits=2.000000000000" in out
    assert "failures=0" in out


def test_probe_flag_validation(tmp_path, runs_root, capsys):
    data = tmp_path / "data"
    assert cli.main(synth_args(data)) == 0
    assert cli.main(["probe", "--data", str(data), "--seed", "0"] + TINY) == 1
    assert "exactly one of" in capsys.readouterr().err


def test_corrupt_sweep_csv(tmp_path, runs_root):
    data = tmp_path / "data"
    assert cli.main(synth_args(data)) == 0
    assert cli.main(["corrupt-sweep", "--data", str(data), "--seed", "0",
                     "--modes", "random", "--p-grid", "0.0,1.0"] + TINY) == 0
    csv_path = glob.glob(str(runs_root / "corrupt-sweep-*" / "sweep.csv"))[0]
    with open(csv_path) as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == ["mode", "p", "seed", "acc_overall"]
        assert len(list(reader)) == 2


def test_console_script_installed():
    exe = shutil.which("amcontrast")
    assert exe is not None, "console script not on PATH"
    out = subprocess.run([exe, "--version"], capture_output=True, text=True)
    assert out.returncode == 0


def test_module_entry_help():
    out = subprocess.run([sys.executable, "-m", "amcontrast.cli", "--help"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    for command in ("synth", "pretrain", "probe", "finetune", "baseline",
                    "corrupt-sweep", "mi-check", "ablate", "report", "convert"):
        assert command in out.stdout
