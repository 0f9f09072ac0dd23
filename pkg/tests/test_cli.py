import json

import numpy as np
import pytest
from click.testing import CliRunner

from neuralik.cli import cli
from neuralik.kinematics import preset_chain
from neuralik.model import IkModel, ModelConfig
from neuralik.training import load_dataset


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def tiny_ckpt(tmp_path):
    chain = preset_chain("planar2")
    cfg = ModelConfig.for_chain(chain, "desk", n_components=3,
                                hyper_width=16, primary_hidden=8)
    model = IkModel(cfg, np.random.default_rng(0))
    path = tmp_path / "tiny.ckpt"
    model.save(path)
    return str(path)


def test_gen_data_and_load(runner, tmp_path):
    out = tmp_path / "d.ds"
    res = runner.invoke(cli, ["gen-data", "--chain", "planar2", "--count", "10",
                              "--seed", "3", "--out", str(out)])
    assert res.exit_code == 0, res.output
    ds = load_dataset(out)
    assert len(ds) == 10 and ds.chain_name == "planar2"


def test_gen_data_from_chain_file(runner, tmp_path):
    chain = preset_chain("planar2")
    spec = tmp_path / "chain.json"
    spec.write_text(json.dumps(chain.to_dict()))
    out = tmp_path / "d.ds"
    res = runner.invoke(cli, ["gen-data", "--chain", str(spec), "--count", "5",
                              "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert load_dataset(out).X.shape == (5, 3)


def test_train_eval_round_trip(runner, tmp_path):
    data = tmp_path / "d.ds"
    runner.invoke(cli, ["gen-data", "--chain", "planar2", "--count", "64",
                        "--out", str(data)])
    ckpt = tmp_path / "m.ckpt"
    hist = tmp_path / "loss.csv"
    res = runner.invoke(cli, ["train", "--chain", "planar2", "--data", str(data),
                              "--epochs", "1", "--batch-size", "32",
                              "--out", str(ckpt), "--history", str(hist)])
    assert res.exit_code == 0, res.output
    assert "best validation NLL" in res.output
    assert hist.read_text().startswith("epoch,train_nll,val_nll")
    # the saved checkpoint loads, but a tiny desk model would be slow to
    # train here, so evaluation reuses it directly
    res = runner.invoke(cli, ["eval", "--checkpoint", str(ckpt),
                              "--chain", "planar2", "--data", str(data),
                              "--samples", "2", "--out", str(tmp_path / "ev")])
    assert res.exit_code == 0, res.output
    report = json.loads((tmp_path / "ev" / "report.json").read_text())
    assert report["method"] == "iknet"
    assert (tmp_path / "ev" / "per_sample_iknet.csv").exists()


def test_sample_command(runner, tiny_ckpt, tmp_path):
    out = tmp_path / "sols.csv"
    res = runner.invoke(cli, ["sample", "--checkpoint", tiny_ckpt,
                              "--target", "0.5", "0.5", "0.0",
                              "--samples", "12", "--out", str(out)])
    assert res.exit_code == 0, res.output
    sols = np.loadtxt(out, delimiter=",")
    assert sols.shape == (12, 2)
    assert "12 total" in res.output


def test_baseline_dls(runner, tmp_path):
    data = tmp_path / "d.ds"
    runner.invoke(cli, ["gen-data", "--chain", "planar2", "--count", "4",
                        "--out", str(data)])
    res = runner.invoke(cli, ["baseline", "dls", "--chain", "planar2",
                              "--test-data", str(data), "--restarts", "4",
                              "--out", str(tmp_path / "b")])
    assert res.exit_code == 0, res.output
    report = json.loads((tmp_path / "b" / "report_dls.json").read_text())
    assert report["method"] == "dls"
    assert report["mean_distance_cm"] < 0.1


def test_baseline_mlp_requires_train_data(runner, tmp_path):
    data = tmp_path / "d.ds"
    runner.invoke(cli, ["gen-data", "--chain", "planar2", "--count", "4",
                        "--out", str(data)])
    res = runner.invoke(cli, ["baseline", "mlp", "--chain", "planar2",
                              "--test-data", str(data)])
    assert res.exit_code != 0
    assert "required" in res.output.lower() or isinstance(res.exception, SystemExit)


def test_follow_path_command(runner, tiny_ckpt, tmp_path):
    out = tmp_path / "traj.csv"
    res = runner.invoke(cli, ["follow-path", "--checkpoint", tiny_ckpt,
                              "--chain", "planar2", "--steps", "6",
                              "--best-of", "2", "--out", str(out)])
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert lines[0].startswith("t,x,y,z,joint0")
    assert len(lines) == 7


def test_embed_command(runner, tiny_ckpt, tmp_path):
    data = tmp_path / "d.ds"
    runner.invoke(cli, ["gen-data", "--chain", "planar2", "--count", "3",
                        "--out", str(data)])
    out = tmp_path / "emb.csv"
    res = runner.invoke(cli, ["embed", "--checkpoint", tiny_ckpt,
                              "--data", str(data), "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert np.loadtxt(out, delimiter=",").shape == (3, 16)


def test_check_report_matches_eval(runner, tiny_ckpt, tmp_path):
    data = tmp_path / "d.ds"
    runner.invoke(cli, ["gen-data", "--chain", "planar2", "--count", "4",
                        "--out", str(data)])
    runner.invoke(cli, ["eval", "--checkpoint", tiny_ckpt, "--chain", "planar2",
                        "--data", str(data), "--samples", "3",
                        "--out", str(tmp_path / "ev")])
    report = json.loads((tmp_path / "ev" / "report.json").read_text())
    res = runner.invoke(cli, ["check-report",
                              str(tmp_path / "ev" / "per_sample_iknet.csv"),
                              "--threshold-cm", str(report["threshold_cm"])])
    assert res.exit_code == 0, res.output
    redo = json.loads(res.output)
    assert abs(redo["mean_distance_cm"] - report["mean_distance_cm"]) < 1e-12
    assert redo["accuracy"] == report["accuracy"]


def test_experiment_rejects_unknown_preset(tmp_path):
    import subprocess
    proc = subprocess.run(
        ["python3", "-m", "neuralik.cli"], input="", capture_output=True, text=True)
    # bare invocation prints usage and exits via the group
    proc2 = subprocess.run(
        ["python3", "-c",
         "from neuralik.cli import main; import sys; "
         "sys.argv = ['neuralik', 'experiment', 'bogus', '--out', '/tmp/x']; main()"],
        capture_output=True, text=True)
    assert proc2.returncode == 2
    assert "unknown preset" in proc2.stderr


def test_missing_file_exits_2():
    import subprocess
    proc = subprocess.run(
        ["python3", "-c",
         "from neuralik.cli import main; import sys; "
         "sys.argv = ['neuralik', 'eval', '--checkpoint', '/no/such.ckpt', "
         "'--chain', 'planar2', '--data', '/no/such.ds']; main()"],
        capture_output=True, text=True)
    assert proc.returncode == 2
