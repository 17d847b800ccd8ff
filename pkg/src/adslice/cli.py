"""Command-line entry point: ``adslice {synth,preprocess,train,evaluate,gradcheck}``.

Settings come from three layers, later ones winning: built-in defaults, a flat
``key = value`` file given with ``--config``, and explicit flags.  Every
command writes ``run_manifest.json`` into its output directory.

Exit codes: 0 success, 1 gradient check failed, 2 usage or input error,
3 checkpoint/spec mismatch, 4 numerical divergence.
"""
import argparse
import hashlib
import json
import logging
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import dump_kv, load_kv
from .errors import CheckpointMismatchError, NiftiFormatError, TrainingDivergenceError
from .network import build, gradient_check, load_checkpoint, save_checkpoint
from .nifti import load as load_volume
from .preprocess import (
    LABELS_NAME,
    PreprocessConfig,
    build_dataset,
    class_table,
    manifest_digest,
    read_corpus,
    read_label_manifest,
    split_dataset,
    write_corpus,
)
from .synth import PhantomConfig, write_phantoms
from .training import TrainConfig, evaluate, export_curves, train

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_MISMATCH, EXIT_DIVERGED = 0, 1, 2, 3, 4
SPLITS = ("train", "val", "test")

log = logging.getLogger("adslice")


class UsageError(Exception):
    pass


def _ratios(text):
    parts = [float(p) for p in str(text).split(",")]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated ratios")
    return ",".join(f"{p:g}" for p in parts)


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key: (type, default, help); None default means required unless noted
SHARED_TRAIN = {
    "arch": (str, "deepconvnet", "deepconvnet | alexnet | vgg16"),
    "scale": (str, "desk", "paper | desk"),
    "divisor": (int, 8, "width divisor for the baselines at desk scale"),
    "fc_stack": (str, "canonical", "dense stack of the deep ConvNet: canonical | wide"),
}
SPLIT_OPTS = {
    "split_ratios": (_ratios, "0.6,0.2,0.2", "train,val,test fractions"),
    "split_seed": (int, 0, "seed of the stratified split"),
    "group_by_subject": (_bool, False, "keep each subject in a single partition"),
}
OPTIONS = {
    "synth": {
        "out": (str, None, "output directory"),
        "per_class": (int, 10, "subjects per class"),
        "seed": (int, 0, "generator seed"),
        "difficulty": (float, 0.0, "0 (easy) .. 1 (hard)"),
        "shape": (str, "64,64,48", "volume extents X,Y,Z"),
    },
    "preprocess": {
        "input": (str, None, f"directory holding volumes and {LABELS_NAME}"),
        "out": (str, None, "corpus output directory"),
        "target": (str, "300", "slice size N or HxW"),
        "planes": (str, "axial,coronal,sagittal", "comma-separated planes"),
        "selection": (str, "variance_top_k:64", "all | variance_top_k:K | center_band:F"),
        "normalization": (str, "minmax_unit", "minmax_unit | zscore_clip:SIGMA"),
        "interpolation": (str, "bilinear", "bilinear | nearest"),
        "jobs": (int, 1, "worker processes"),
    },
    "train": {
        "corpus": (str, None, "slice corpus directory"),
        "out": (str, None, "run directory"),
        **SHARED_TRAIN,
        "epochs": (int, 70, "training epochs"),
        "batch_size": (int, 100, "mini-batch size"),
        "lr": (float, 1e-4, "RMSProp learning rate"),
        "rho": (float, 0.9, "RMSProp decay"),
        "eps": (float, 1e-8, "RMSProp epsilon"),
        "class_weighting": (str, "none", "none | inverse_frequency"),
        "seed": (int, 0, "initialisation and shuffling seed"),
        "deterministic": (_bool, True, "single-threaded BLAS for bit-reproducible runs"),
        **SPLIT_OPTS,
        "emit_plot_data": (_bool, False, "write curves.tsv and roc.tsv"),
    },
    "evaluate": {
        "checkpoint": (str, None, "checkpoint directory"),
        "corpus": (str, None, "slice corpus directory"),
        "out": (str, ".", "output directory"),
        "split": (str, "test", "train | val | test"),
        "arch": (str, "", "expected architecture (optional)"),
        "scale": (str, "desk", "scale of --arch"),
        "divisor": (int, 8, "width divisor of --arch"),
        "fc_stack": (str, "canonical", "dense stack of --arch"),
        **SPLIT_OPTS,
        "emit_plot_data": (_bool, False, "write roc.tsv"),
    },
    "gradcheck": {
        "out": (str, ".", "output directory"),
        **SHARED_TRAIN,
        "seed": (int, 0, "seed for weights, inputs and coordinates"),
        "coords": (int, 5, "coordinates per tensor"),
        "batch": (int, 2, "samples in the probe batch"),
        "tol": (float, 1e-3, "maximum relative error"),
    },
}
BOOL_KEYS = {k for opts in OPTIONS.values() for k, (t, _, _) in opts.items() if t is _bool}


def make_parser():
    parser = argparse.ArgumentParser(prog="adslice", description="Slice-based MRI classification pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file; flags take precedence")
        p.add_argument("-q", "--quiet", action="store_true")
        for key, (typ, default, text) in opts.items():
            flag = "--" + key.replace("_", "-")
            shown = "" if default is None else f" (default {default})"
            if typ is _bool:
                p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None,
                               help=text + shown)
            else:
                p.add_argument(flag, dest=key, default=None, help=text + shown)
    return parser


def resolve(command, args):
    """Merge defaults, the ``--config`` file and explicit flags into typed settings."""
    opts = OPTIONS[command]
    raw = {k: d for k, (_, d, _) in opts.items()}
    if args.config:
        try:
            from_file = load_kv(args.config)
        except OSError as exc:
            raise UsageError(f"--config: cannot read {args.config}: {exc.strerror}") from None
        except ValueError as exc:
            raise UsageError(f"--config {args.config}: {exc}") from None
        unknown = sorted(set(from_file) - set(opts))
        if unknown:
            raise UsageError(f"--config {args.config}: unknown key(s) for {command}: {', '.join(unknown)}")
        raw.update(from_file)
    for key in opts:
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    out = {}
    for key, (typ, _, _) in opts.items():
        if raw[key] is None:
            raise UsageError(f"--{key.replace('_', '-')} is required")
        try:
            out[key] = typ(raw[key])
        except ValueError as exc:
            raise UsageError(f"--{key.replace('_', '-')}: invalid value {raw[key]!r} ({exc})") from None
    return out


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _hash_tree(root, skip=("run_manifest.json",)):
    root = Path(root)
    return {str(p.relative_to(root)): sha256_file(p)
            for p in sorted(root.rglob("*")) if p.is_file() and p.name not in skip}


def write_run_manifest(out_dir, command, argv, settings, inputs, started, outputs_root=None):
    """Record what ran, with which settings and inputs, and what it produced."""
    out_dir = Path(out_dir)
    manifest = {
        "tool": "adslice",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "config": settings,
        "seed": settings.get("seed"),
        "inputs": inputs,
        "outputs": _hash_tree(outputs_root or out_dir),
        "started": started,
        "finished": _now(),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# -- commands --------------------------------------------------------------------

def cmd_synth(s):
    if s["per_class"] < 1:
        raise UsageError("--per-class must be at least 1")
    try:
        shape = tuple(int(v) for v in s["shape"].split(","))
        cfg = PhantomConfig(shape, s["per_class"], s["seed"], s["difficulty"])
    except ValueError as exc:
        raise UsageError(f"synth: {exc}") from None
    paths = write_phantoms(cfg, s["out"])
    print(f"wrote {len(paths)} volumes and {LABELS_NAME} to {s['out']}")
    return {}


def _read_volumes(input_dir):
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise UsageError(f"--input: {input_dir} is not a directory")
    labels = input_dir / LABELS_NAME
    if not labels.exists():
        raise UsageError(f"--input: {input_dir} has no {LABELS_NAME}")
    volumes, inputs = [], {LABELS_NAME: sha256_file(labels)}
    for subject_id, label, rel in read_label_manifest(labels):
        path = input_dir / rel
        try:
            volumes.append((subject_id, label, load_volume(path)))
        except (NiftiFormatError, OSError) as exc:
            raise UsageError(f"{path}: {exc}") from None
        inputs[rel] = sha256_file(path)
    return volumes, inputs


def cmd_preprocess(s):
    try:
        cfg = PreprocessConfig.from_mapping(s)
    except ValueError as exc:
        raise UsageError(f"preprocess: {exc}") from None
    if s["jobs"] < 1:
        raise UsageError("--jobs must be at least 1")
    volumes, inputs = _read_volumes(s["input"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dataset = build_dataset(volumes, cfg, jobs=s["jobs"])
    for message in sorted({str(w.message) for w in caught}):
        log.warning("%s", message)
    write_corpus(dataset, s["out"], cfg)
    print(class_table(dataset))
    return inputs


def _load_splits(s):
    corpus = Path(s["corpus"])
    try:
        dataset = read_corpus(corpus)
    except FileNotFoundError as exc:
        raise UsageError(f"--corpus: {exc}") from None
    if len(dataset) == 0:
        raise UsageError(f"--corpus: {corpus} is empty")
    ratios = tuple(float(r) for r in s["split_ratios"].split(","))
    splits = split_dataset(dataset, ratios, seed=s["split_seed"], group_by_subject=s["group_by_subject"])
    return dataset, splits, {"corpus_manifest": manifest_digest(corpus)}


def _spec(s, input_shape):
    try:
        return build(s["arch"], s["scale"], input_shape=input_shape, divisor=s["divisor"],
                     fc_stack=s["fc_stack"])
    except (KeyError, ValueError) as exc:
        raise UsageError(f"cannot build {s['arch']} at {s['scale']} scale for input {input_shape}: {exc}") from None


def cmd_train(s):
    try:
        cfg = TrainConfig.from_mapping(s)
    except ValueError as exc:
        raise UsageError(f"train: {exc}") from None
    dataset, splits, inputs = _load_splits(s)
    input_shape = dataset.images().shape[1:]
    spec = _spec(s, input_shape)
    run = Path(s["out"])
    run.mkdir(parents=True, exist_ok=True)
    (run / "config.txt").write_text(dump_kv(s))
    log.info("%s: %d parameters; split sizes %s", spec.name, spec.param_count(), [len(p) for p in splits])
    _, report = train(spec, splits, cfg, run_dir=run)
    (run / "report.json").write_text(report.to_json())
    if s["emit_plot_data"]:
        export_curves(report, run)
    print(report.summary())
    return inputs


def cmd_evaluate(s):
    if s["split"] not in SPLITS:
        raise UsageError(f"--split must be one of {', '.join(SPLITS)}")
    expected = None
    dataset, splits, inputs = _load_splits(s)
    input_shape = dataset.images().shape[1:]
    if s["arch"]:
        expected = _spec(s, input_shape)
    network, manifest = load_checkpoint(s["checkpoint"], spec=expected)
    if network.spec.input_shape != tuple(input_shape):
        raise CheckpointMismatchError(
            f"checkpoint expects inputs {network.spec.input_shape}, corpus has {tuple(input_shape)}")
    inputs["checkpoint"] = sha256_file(Path(s["checkpoint"]) / "checkpoint.json")
    report = evaluate(network, splits[SPLITS.index(s["split"])])
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    if s["emit_plot_data"]:
        export_curves(report, out)
    print(report.summary())
    return inputs


def cmd_gradcheck(s):
    spec = _spec(s, None)
    if s["coords"] < 1 or s["batch"] < 1:
        raise UsageError("--coords and --batch must be at least 1")
    from .network import Network

    net = Network.initialize(spec, s["seed"])
    rng = np.random.default_rng([s["seed"], 2])
    x = rng.uniform(size=(s["batch"], *spec.input_shape))
    labels = rng.integers(0, spec.num_classes, size=s["batch"])
    results = gradient_check(net, x, labels, coords_per_tensor=s["coords"], seed=s["seed"])
    worst = 0.0
    lines = ["tensor\tcoords\tmax_rel_err"]
    for r in results:
        lines.append(f"{r.name}\t{len(r.coords)}\t{r.max_rel_err:.3e}")
        worst = max(worst, r.max_rel_err)
        print(f"{r.name:<20} {len(r.coords):>3} coords  max rel err {r.max_rel_err:.3e}")
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "gradcheck.tsv").write_text("\n".join(lines) + "\n")
    ok = worst < s["tol"]
    print(f"{spec.name}: worst {worst:.3e}, tolerance {s['tol']:g}: {'ok' if ok else 'FAILED'}")
    return {}, (EXIT_OK if ok else EXIT_CHECK_FAILED)


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    started = _now()
    try:
        settings = resolve(args.command, args)
        result = COMMANDS[args.command](settings)
        inputs, code = result if isinstance(result, tuple) else (result, EXIT_OK)
        write_run_manifest(settings["out"], args.command, argv, settings, inputs, started)
        return code
    except UsageError as exc:
        print(f"adslice {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointMismatchError as exc:
        print(f"adslice {args.command}: checkpoint mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except TrainingDivergenceError as exc:
        print(f"adslice {args.command}: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, OSError) as exc:
        print(f"adslice {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
