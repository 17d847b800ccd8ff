import json
from pathlib import Path

import pytest

from adslice.cli import main, make_parser, resolve
from adslice.preprocess import MANIFEST_NAME


def outputs(path):
    return json.loads((Path(path) / "run_manifest.json").read_text())["outputs"]


@pytest.fixture(scope="module")
def phantoms(tmp_path_factory):
    d = tmp_path_factory.mktemp("ph")
    assert main(["synth", "--per-class", "3", "--seed", "5", "--shape", "32,32,24", "--out", str(d), "-q"]) == 0
    return d


@pytest.fixture(scope="module")
def corpus(phantoms, tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    assert main(["preprocess", "--input", str(phantoms), "--out", str(d), "--target", "32",
                 "--planes", "axial", "--selection", "center_band:0.5", "-q"]) == 0
    return d


@pytest.fixture(scope="module")
def trained(corpus, tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    code = main(["train", "--corpus", str(corpus), "--out", str(d), "--epochs", "2", "--batch-size", "8",
                 "--lr", "1e-3", "--emit-plot-data", "-q"])
    assert code == 0
    return d


# -- synth -----------------------------------------------------------------------

def test_synth_counts_and_rerun(tmp_path):
    assert main(["synth", "--per-class", "5", "--seed", "7", "--out", str(tmp_path / "a"), "-q"]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert sum(f.endswith(".nii") for f in files) == 15
    assert "subjects.tsv" in files and "run_manifest.json" in files
    assert main(["synth", "--per-class", "5", "--seed", "7", "--out", str(tmp_path / "b"), "-q"]) == 0
    assert outputs(tmp_path / "a") == outputs(tmp_path / "b")


def test_synth_rejects_zero_per_class(tmp_path, capsys):
    assert main(["synth", "--per-class", "0", "--out", str(tmp_path)]) == 2
    assert "--per-class" in capsys.readouterr().err


def test_bad_flag_value_is_usage_error(tmp_path, capsys):
    assert main(["synth", "--per-class", "many", "--out", str(tmp_path)]) == 2
    assert "--per-class" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["synth", "--no-such-flag"])
    assert info.value.code == 2


def test_config_file_merging(tmp_path):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text("# phantoms\nper-class = 2\nseed = 3\nshape = 16,16,16\n")
    out = tmp_path / "out"
    assert main(["synth", "--config", str(cfg), "--seed", "4", "--out", str(out), "-q"]) == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["config"]["per_class"] == 2
    assert manifest["config"]["seed"] == 4
    assert manifest["seed"] == 4
    bad = tmp_path / "bad.cfg"
    bad.write_text("epochs = 3\n")
    assert main(["synth", "--config", str(bad), "--out", str(out)]) == 2


def test_train_defaults_follow_protocol():
    args = make_parser().parse_args(["train", "--corpus", "c", "--out", "o"])
    s = resolve("train", args)
    assert (s["epochs"], s["batch_size"], s["lr"]) == (70, 100, 1e-4)
    assert s["split_ratios"] == "0.6,0.2,0.2"


# -- preprocess ------------------------------------------------------------------

def test_preprocess_conservation(corpus, capsys):
    lines = (corpus / MANIFEST_NAME).read_text().splitlines()
    labels = [json.loads(line)["label"] for line in lines]
    # center_band:0.5 of 24 axial slices is 12 per subject
    assert len(labels) == 9 * 12
    assert {lab: labels.count(lab) for lab in set(labels)} == {"NC": 36, "MCI": 36, "AD": 36}
    assert outputs(corpus)[MANIFEST_NAME]


def test_preprocess_table_and_top_k(tmp_path, capsys):
    src = tmp_path / "ph"
    assert main(["synth", "--per-class", "1", "--out", str(src), "-q"]) == 0
    capsys.readouterr()
    out = tmp_path / "c"
    assert main(["preprocess", "--input", str(src), "--out", str(out), "--target", "16",
                 "--selection", "variance_top_k:8", "--planes", "axial", "-q"]) == 0
    table = capsys.readouterr().out
    assert "Total" in table and "24" in table
    rows = [json.loads(line) for line in (out / MANIFEST_NAME).read_text().splitlines()]
    for subject in {r["subject_id"] for r in rows}:
        assert sum(r["subject_id"] == subject for r in rows) == 8


def test_preprocess_missing_input(tmp_path, capsys):
    assert main(["preprocess", "--input", str(tmp_path / "none"), "--out", str(tmp_path / "c")]) == 2
    assert "--input" in capsys.readouterr().err


def test_preprocess_corrupted_volume(tmp_path, capsys):
    src = tmp_path / "ph"
    assert main(["synth", "--per-class", "1", "--shape", "16,16,16", "--out", str(src), "-q"]) == 0
    victim = src / "MCI_000.nii"
    data = bytearray(victim.read_bytes())
    data[344:348] = b"junk"
    victim.write_bytes(bytes(data))
    code = main(["preprocess", "--input", str(src), "--out", str(tmp_path / "c"), "--target", "16"])
    assert code != 0
    assert "MCI_000.nii" in capsys.readouterr().err


# -- train / evaluate ------------------------------------------------------------

def test_train_run_directory(trained):
    names = {p.name for p in trained.iterdir()}
    assert {"config.txt", "metrics.tsv", "report.json", "curves.tsv", "roc.tsv",
            "run_manifest.json", "checkpoints"} <= names
    manifest = json.loads((trained / "run_manifest.json").read_text())
    assert manifest["config"]["batch_size"] == 8 and manifest["config"]["epochs"] == 2
    assert manifest["inputs"]["corpus_manifest"]
    assert "checkpoints/last/checkpoint.json" in manifest["outputs"]
    report = json.loads((trained / "report.json").read_text())
    assert len(report["curves"]["train_loss"]) == 2


def test_train_rerun_is_bit_identical(corpus, trained, tmp_path):
    code = main(["train", "--corpus", str(corpus), "--out", str(tmp_path), "--epochs", "2", "--batch-size", "8",
                 "--lr", "1e-3", "--emit-plot-data", "-q"])
    assert code == 0
    a, b = outputs(trained), outputs(tmp_path)
    a.pop("config.txt"), b.pop("config.txt")  # records the output path
    assert a == b


def test_evaluate(corpus, trained, tmp_path):
    ckpt = trained / "checkpoints" / "last"
    assert main(["evaluate", "--checkpoint", str(ckpt), "--corpus", str(corpus), "--out", str(tmp_path),
                 "--emit-plot-data", "-q"]) == 0
    here = json.loads((tmp_path / "report.json").read_text())
    there = json.loads((trained / "report.json").read_text())
    assert here["confusion"] == there["confusion"]
    assert (tmp_path / "roc.tsv").exists()


def test_evaluate_mismatch(corpus, trained, tmp_path):
    ckpt = str(trained / "checkpoints" / "last")
    assert main(["evaluate", "--checkpoint", ckpt, "--corpus", str(corpus), "--arch", "vgg16",
                 "--out", str(tmp_path)]) == 3
    assert main(["evaluate", "--checkpoint", str(tmp_path), "--corpus", str(corpus),
                 "--out", str(tmp_path)]) == 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_divergence_exit_code(corpus, tmp_path, capsys):
    code = main(["train", "--corpus", str(corpus), "--out", str(tmp_path), "--epochs", "3",
                 "--batch-size", "8", "--lr", "1e200", "-q"])
    assert code == 4
    assert "epoch" in capsys.readouterr().err


# -- gradcheck -------------------------------------------------------------------

def test_gradcheck(tmp_path, capsys):
    assert main(["gradcheck", "--arch", "deepconvnet", "--scale", "desk", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "layer00.weights" in out and "ok" in out
    rows = (tmp_path / "gradcheck.tsv").read_text().splitlines()[1:]
    assert all(float(r.split("\t")[2]) < 1e-3 for r in rows)
    assert main(["gradcheck", "--arch", "deepconvnet", "--scale", "desk", "--tol", "0",
                 "--out", str(tmp_path), "-q"]) == 1
