import numpy as np
import pytest

from avfusion.cli import main
from avfusion.core import read_tensor_array, write_tensor_array
from avfusion.fusion import read_decisions


def run(*argv):
    return main([str(a) for a in argv])


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        run("lbptop")  # missing required flags
    assert exc.value.code == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 2


def test_lbptop_stage(tmp_path):
    rng = np.random.default_rng(0)
    vol = rng.integers(0, 256, size=(5, 12, 12)).astype(float)
    write_tensor_array(tmp_path / "clip.fvt", vol)
    assert run("lbptop", "--in", tmp_path / "clip.fvt", "--out", tmp_path / "d.fvt") == 0
    desc = read_tensor_array(tmp_path / "d.fvt")
    assert desc.shape == (2832,)


def test_lbptop_data_error_exits_1(tmp_path, capsys):
    write_tensor_array(tmp_path / "flat.fvt", np.zeros((4, 4)))
    assert run("lbptop", "--in", tmp_path / "flat.fvt", "--out", tmp_path / "d.fvt") == 1
    assert "error" in capsys.readouterr().err


def test_pca_fit_apply(tmp_path):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 8))
    write_tensor_array(tmp_path / "X.fvt", X)
    assert run("pca", "fit", "--in", tmp_path / "X.fvt", "--q", 3,
               "--out", tmp_path / "pca.json") == 0
    write_tensor_array(tmp_path / "x.fvt", X[0])
    assert run("pca", "apply", "--model", tmp_path / "pca.json",
               "--in", tmp_path / "x.fvt", "--out", tmp_path / "y.fvt") == 0
    assert read_tensor_array(tmp_path / "y.fvt").shape == (3,)


def test_pool_stage(tmp_path):
    rng = np.random.default_rng(2)
    write_tensor_array(tmp_path / "scores.fvt", rng.random((16, 7)))
    assert run("pool", "--in", tmp_path / "scores.fvt", "--out", tmp_path / "p.fvt") == 0
    assert read_tensor_array(tmp_path / "p.fvt").shape == (49,)


@pytest.fixture(scope="module")
def synth_dirs(tmp_path_factory):
    base = tmp_path_factory.mktemp("pipeline")
    train = base / "train"
    test = base / "test"
    assert main(["synth", "--out", str(train), "--n-clips", "140", "--seed", "0",
                 "--informativeness", "0.9,0.9,0.9,0.9"]) == 0
    assert main(["synth", "--out", str(test), "--n-clips", "70", "--seed", "1",
                 "--informativeness", "0.9,0.9,0.9,0.9"]) == 0
    return base, train / "manifest.csv", test / "manifest.csv"


def test_full_pipeline(synth_dirs):
    base, train_manifest, test_manifest = synth_dirs
    decision_files = []
    for channel in ("audio", "cnn"):
        model = base / f"{channel}.json"
        assert run("train-svm", "--manifest", train_manifest, "--channel", channel,
                   "--epochs", 15, "--out", model) == 0
        dec = base / f"{channel}_train_dec.csv"
        assert run("predict-svm", "--manifest", train_manifest, "--channel", channel,
                   "--model", model, "--out", dec) == 0
        decision_files.append(dec)

    # model-level fusion
    bn_model = base / "bn.json"
    assert run("fuse-bn", "fit", "--manifest", train_manifest,
               "--decisions", *decision_files, "--out", bn_model) == 0
    test_decisions = []
    for channel in ("audio", "cnn"):
        dec = base / f"{channel}_test_dec.csv"
        assert run("predict-svm", "--manifest", test_manifest, "--channel", channel,
                   "--model", base / f"{channel}.json", "--out", dec) == 0
        test_decisions.append(dec)
    fused = base / "fused.csv"
    assert run("fuse-bn", "infer", "--model", bn_model,
               "--decisions", *test_decisions, "--out", fused) == 0
    rows = read_decisions(fused)
    assert len(rows) == 70
    assert all(ch == "bn" for _, ch, _ in rows)

    # feature-level fusion
    assert run("fuse-feat", "train", "--manifest", train_manifest, "--epochs", 15,
               "--out-norm", base / "norm.json", "--out-svm", base / "joint.json") == 0
    joint_dec = base / "joint_dec.csv"
    assert run("fuse-feat", "predict", "--manifest", test_manifest,
               "--norm", base / "norm.json", "--svm", base / "joint.json",
               "--out", joint_dec) == 0

    # evaluation
    report = base / "report.csv"
    assert run("evaluate", "--pred", joint_dec, "--manifest", test_manifest,
               "--out", report) == 0
    lines = report.read_text().splitlines()
    overall = float(lines[0].split(",")[1])
    assert overall > 0.5  # highly informative channels
    counts = [int(v) for line in lines[2:] for v in line.split(",")[2:]]
    assert sum(counts) == 70


def test_fuse_bn_infer_unknown_channel_exits_1(synth_dirs, tmp_path, capsys):
    base, train_manifest, _ = synth_dirs
    dec = base / "audio_train_dec.csv"
    bn_audio_only = tmp_path / "bn_audio.json"
    assert run("fuse-bn", "fit", "--manifest", train_manifest,
               "--decisions", dec, "--out", bn_audio_only) == 0
    cnn_dec = base / "cnn_train_dec.csv"
    assert run("fuse-bn", "infer", "--model", bn_audio_only,
               "--decisions", cnn_dec, "--out", tmp_path / "f.csv") == 1
    assert "UnknownChannel" in capsys.readouterr().err


def test_island_demo(tmp_path, capsys):
    assert run("island-demo", "--epochs", 60, "--n-per-class", 10,
               "--out", tmp_path / "trace.csv") == 0
    out = capsys.readouterr().out
    assert "baseline" in out and "island" in out
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "epoch,baseline_loss,island_loss"
    assert len(lines) == 61


def test_stage_determinism(tmp_path):
    """Rerunning stages with identical flags yields byte-identical files."""
    for tag in ("a", "b"):
        d = tmp_path / tag
        assert run("synth", "--out", d, "--n-clips", 21, "--seed", 5) == 0
        assert run("train-svm", "--manifest", d / "manifest.csv", "--channel", "blstm",
                   "--epochs", 5, "--out", d / "m.json") == 0
        assert run("predict-svm", "--manifest", d / "manifest.csv", "--channel", "blstm",
                   "--model", d / "m.json", "--out", d / "dec.csv") == 0
    for name in ("manifest.csv", "clip_00000.blstm.fvt", "m.json", "m.weights.fvt",
                 "m.bias.fvt", "dec.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
