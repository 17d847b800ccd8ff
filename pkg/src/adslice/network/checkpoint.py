"""Checkpoint directories: ``checkpoint.json`` plus one tensor blob per array."""
import hashlib
import json
from pathlib import Path

from ..errors import CheckpointMismatchError
from ..tensor import io as tensor_io
from .model import LayerState, Network
from .spec import NetworkSpec

FORMAT = "adslice-checkpoint/1"
MANIFEST = "checkpoint.json"


def save_checkpoint(path, network, step=0, seed=None, extra=None):
    """Write ``network`` to directory ``path``; returns the manifest dict.

    The manifest contains no timestamps, so identical states give identical bytes.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    tensors = []
    for name, st in network.named_states():
        for key, array in st.tensors().items():
            fname = f"{name}.{key}.f64"
            digest = tensor_io.save(path / fname, array)
            tensors.append({"name": f"{name}.{key}", "file": fname,
                            "shape": list(array.shape), "sha256": digest})
    manifest = {
        "format": FORMAT,
        "spec": network.spec.to_dict(),
        "step": int(step),
        "seed": seed,
        "extra": extra or {},
        "tensors": tensors,
    }
    (path / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def read_manifest(path):
    f = Path(path) / MANIFEST
    if not f.exists():
        raise CheckpointMismatchError(f"{path} is not a checkpoint (no {MANIFEST})")
    manifest = json.loads(f.read_text())
    if manifest.get("format") != FORMAT:
        raise CheckpointMismatchError(f"unknown checkpoint format {manifest.get('format')!r}")
    return manifest


def load_checkpoint(path, spec=None):
    """Load a checkpoint; returns ``(network, manifest)``.

    Raises CheckpointMismatchError when ``spec`` is given and differs from the
    stored one, when a blob's hash or shape is wrong, or when tensors are missing.
    """
    path = Path(path)
    manifest = read_manifest(path)
    stored = NetworkSpec.from_dict(manifest["spec"])
    if spec is not None and spec.to_dict() != stored.to_dict():
        raise CheckpointMismatchError(
            f"checkpoint holds {stored.name} {stored.input_shape}, expected {spec.name} {spec.input_shape}"
        )
    blobs = {}
    for entry in manifest["tensors"]:
        data = (path / entry["file"]).read_bytes()
        if hashlib.sha256(data).hexdigest() != entry["sha256"]:
            raise CheckpointMismatchError(f"content hash mismatch for {entry['file']}")
        blobs[entry["name"]] = tensor_io.loads(data)
    states = {}
    for index, wshape, bshape in stored.param_shapes():
        name = f"layer{index:02d}"
        try:
            arrays = {k: blobs[f"{name}.{k}"] for k in ("weights", "bias", "cache_weights", "cache_bias")}
        except KeyError as exc:
            raise CheckpointMismatchError(f"checkpoint is missing tensor {exc.args[0]}") from None
        if arrays["weights"].shape != wshape or arrays["bias"].shape != bshape:
            raise CheckpointMismatchError(
                f"{name}: stored shapes {arrays['weights'].shape}/{arrays['bias'].shape} "
                f"do not match spec {wshape}/{bshape}"
            )
        try:
            states[index] = LayerState(arrays["weights"], arrays["bias"],
                                       cache_weights=arrays["cache_weights"],
                                       cache_bias=arrays["cache_bias"])
        except ValueError as exc:
            raise CheckpointMismatchError(f"{name}: {exc}") from None
    return Network(stored, states), manifest
