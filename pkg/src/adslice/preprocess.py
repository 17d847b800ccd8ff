"""From 3D volumes to a labelled corpus of normalised 2D slices."""
import hashlib
import itertools
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import CLASS_NAMES
from .errors import DataError, DuplicateSubjectError, InfeasibleSplitError, LabelError
from .nifti import PLANE_AXIS, NiftiVolume, Plane, extract_plane, with_voxels
from .tensor import io as tensor_io

MANIFEST_NAME = "manifest.jsonl"
LABELS_NAME = "subjects.tsv"


# -- configuration -------------------------------------------------------------

@dataclass(frozen=True)
class Selection:
    """How slices are picked along a plane: ``all``, ``variance_top_k:K`` or ``center_band:F``."""

    kind: str = "all"
    param: float = 0

    def __post_init__(self):
        if self.kind not in ("all", "variance_top_k", "center_band"):
            raise ValueError(f"unknown slice selection {self.kind!r}")
        if self.kind == "variance_top_k" and (self.param < 1 or int(self.param) != self.param):
            raise ValueError(f"variance_top_k needs a positive integer k, got {self.param}")
        if self.kind == "center_band" and not 0 < self.param <= 1:
            raise ValueError(f"center_band fraction must be in (0, 1], got {self.param}")

    @classmethod
    def parse(cls, text):
        kind, _, arg = str(text).partition(":")
        kind = kind.strip()
        if kind == "all":
            return cls("all", 0)
        if not arg:
            raise ValueError(f"selection {kind!r} needs a parameter, e.g. {kind}:8")
        value = float(arg)
        if kind == "variance_top_k":
            if value != int(value):
                raise ValueError(f"variance_top_k needs a positive integer k, got {arg}")
            value = int(value)
        return cls(kind, value)

    def __str__(self):
        return "all" if self.kind == "all" else f"{self.kind}:{self.param:g}"


@dataclass(frozen=True)
class Normalization:
    """``minmax_unit`` or ``zscore_clip:SIGMA``."""

    kind: str = "minmax_unit"
    sigma: float = 3.0

    def __post_init__(self):
        if self.kind not in ("minmax_unit", "zscore_clip"):
            raise ValueError(f"unknown normalization {self.kind!r}")
        if self.sigma <= 0:
            raise ValueError(f"zscore_clip sigma must be positive, got {self.sigma}")

    @classmethod
    def parse(cls, text):
        kind, _, arg = str(text).partition(":")
        if kind == "zscore_clip":
            return cls(kind, float(arg) if arg else 3.0)
        return cls(kind.strip())

    def __str__(self):
        return self.kind if self.kind == "minmax_unit" else f"zscore_clip:{self.sigma:g}"


@dataclass(frozen=True)
class PreprocessConfig:
    target_size: tuple = (300, 300)
    planes: tuple = (Plane.AXIAL, Plane.CORONAL, Plane.SAGITTAL)
    selection: Selection = field(default_factory=lambda: Selection("variance_top_k", 64))
    normalization: Normalization = field(default_factory=Normalization)
    interpolation: str = "bilinear"

    def __post_init__(self):
        h, w = self.target_size
        if h < 8 or w < 8:
            raise ValueError(f"target size must be at least 8x8, got {h}x{w}")
        if not self.planes:
            raise ValueError("at least one plane is required")
        object.__setattr__(self, "planes", tuple(Plane(p) for p in self.planes))
        if self.interpolation not in ("bilinear", "nearest"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")

    @classmethod
    def from_mapping(cls, m):
        """Build from string values as found in a key-value file or on the command line."""
        kwargs = {}
        if "target" in m or "target_size" in m:
            t = str(m.get("target_size", m.get("target")))
            parts = [int(p) for p in t.replace("x", ",").split(",")]
            kwargs["target_size"] = (parts[0], parts[-1])
        if "planes" in m:
            kwargs["planes"] = tuple(p.strip() for p in str(m["planes"]).split(",") if p.strip())
        if "selection" in m:
            kwargs["selection"] = Selection.parse(m["selection"])
        if "normalization" in m:
            kwargs["normalization"] = Normalization.parse(m["normalization"])
        if "interpolation" in m:
            kwargs["interpolation"] = str(m["interpolation"])
        return cls(**kwargs)

    def as_dict(self):
        return {
            "target_size": f"{self.target_size[0]}x{self.target_size[1]}",
            "planes": ",".join(p.value for p in self.planes),
            "selection": str(self.selection),
            "normalization": str(self.normalization),
            "interpolation": self.interpolation,
        }


# -- records -------------------------------------------------------------------

@dataclass
class SliceRecord:
    subject_id: str
    class_label: str
    plane: Plane
    slice_index: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.class_label not in CLASS_NAMES:
            raise LabelError(f"label must be one of {CLASS_NAMES}, got {self.class_label!r}")
        self.plane = Plane(self.plane)

    @property
    def label_index(self):
        return CLASS_NAMES.index(self.class_label)


@dataclass
class SliceDataset:
    records: list

    @property
    def class_counts(self):
        counts = {name: 0 for name in CLASS_NAMES}
        for r in self.records:
            counts[r.class_label] += 1
        return counts

    @property
    def subject_ids(self):
        return sorted({r.subject_id for r in self.records})

    def __len__(self):
        return len(self.records)

    def images(self):
        """All slices stacked as an (N, 1, H, W) float64 array."""
        if not self.records:
            return np.zeros((0, 1, 0, 0))
        return np.stack([r.pixels for r in self.records])[:, None, :, :]

    def labels(self):
        return np.array([r.label_index for r in self.records], dtype=np.int64)

    def subset(self, indices):
        return SliceDataset([self.records[i] for i in indices])


# -- operations ----------------------------------------------------------------

def normalize_intensity(volume, mode=Normalization()):
    """Map voxel intensities into [0, 1].

    ``minmax_unit`` is the affine map of [min, max] onto [0, 1] (constant
    input gives zeros).  ``zscore_clip`` standardises, clips at ±sigma and
    maps [-sigma, sigma] onto [0, 1].  Accepts a NiftiVolume or an array and
    returns the same kind.
    """
    if isinstance(mode, str):
        mode = Normalization.parse(mode)
    is_volume = isinstance(volume, NiftiVolume)
    v = np.asarray(volume.voxels if is_volume else volume, dtype=np.float64)
    if v.size == 0:
        raise DataError("cannot normalise an empty volume")
    if not np.all(np.isfinite(v)):
        raise DataError("volume contains non-finite values")
    lo, hi = v.min(), v.max()
    if hi == lo:
        out = np.zeros_like(v)
    elif mode.kind == "minmax_unit":
        out = (v - lo) / (hi - lo)
    else:
        z = np.clip((v - v.mean()) / v.std(), -mode.sigma, mode.sigma)
        out = (z + mode.sigma) / (2 * mode.sigma)
    return with_voxels(volume, out) if is_volume else out


def _source_coords(out_size, in_size):
    # align-corners=False: centre of output pixel mapped back, clamped to the edge
    scale = in_size / out_size
    src = (np.arange(out_size) + 0.5) * scale - 0.5
    return np.clip(src, 0.0, in_size - 1)


def resize_slice(image, target, interpolation="bilinear"):
    """Resample a 2D image to ``target`` = (H', W')."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    th, tw = target
    if th < 1 or tw < 1:
        raise ValueError(f"target must be at least 1x1, got {th}x{tw}")
    if interpolation == "nearest":
        rows = np.minimum(np.floor((np.arange(th) + 0.5) * (h / th)).astype(int), h - 1)
        cols = np.minimum(np.floor((np.arange(tw) + 0.5) * (w / tw)).astype(int), w - 1)
        return image[np.ix_(rows, cols)]
    if interpolation != "bilinear":
        raise ValueError(f"unknown interpolation {interpolation!r}")
    sy, sx = _source_coords(th, h), _source_coords(tw, w)
    y0 = np.floor(sy).astype(int)
    x0 = np.floor(sx).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (sy - y0)[:, None]
    wx = (sx - x0)[None, :]
    top = image[np.ix_(y0, x0)] * (1 - wx) + image[np.ix_(y0, x1)] * wx
    bottom = image[np.ix_(y1, x0)] * (1 - wx) + image[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bottom * wy


def _voxels(volume):
    return volume.voxels if isinstance(volume, NiftiVolume) else np.asarray(volume, dtype=np.float64)


def slice_variances(volume, plane):
    vox = _voxels(volume)
    axis = PLANE_AXIS[Plane(plane)]
    other = tuple(a for a in range(3) if a != axis)
    return vox.var(axis=other)


def select_slices(volume, plane, selection):
    """Indices along ``plane`` chosen by ``selection``, ascending."""
    if isinstance(selection, str):
        selection = Selection.parse(selection)
    extent = _voxels(volume).shape[PLANE_AXIS[Plane(plane)]]
    if extent < 1:
        raise ValueError("plane has no slices")
    if selection.kind == "all":
        return list(range(extent))
    if selection.kind == "center_band":
        count = max(1, int(round(selection.param * extent)))
        start = (extent - count) // 2
        return list(range(start, start + count))
    k = int(selection.param)
    if k > extent:
        warnings.warn(f"variance_top_k:{k} exceeds the {extent} available slices; using all",
                      stacklevel=2)
        k = extent
    var = slice_variances(volume, plane)
    # stable sort on -variance: ties keep the lower index first
    order = np.argsort(-var, kind="stable")
    return sorted(int(i) for i in order[:k])


def planned_slice_count(volume_shape, config):
    """Slices one subject contributes, computed from the grid shape alone."""
    total = 0
    for plane in config.planes:
        extent = volume_shape[PLANE_AXIS[plane]]
        sel = config.selection
        if sel.kind == "all":
            total += extent
        elif sel.kind == "center_band":
            total += max(1, int(round(sel.param * extent)))
        else:
            total += min(int(sel.param), extent)
    return total


def process_volume(subject_id, label, volume, config):
    """Records for one subject, ordered by (plane, index)."""
    norm = normalize_intensity(volume, config.normalization)
    records = []
    for plane in config.planes:
        for index in select_slices(norm, plane, config.selection):
            pixels = resize_slice(extract_plane(norm, plane, index), config.target_size,
                                  config.interpolation)
            pixels = np.clip(pixels, 0.0, 1.0)
            records.append(SliceRecord(subject_id, label, plane, index, pixels))
    return records


def _process_item(args):
    return process_volume(*args)


def build_dataset(volumes, config, jobs=1):
    """Preprocess ``(subject_id, label, NiftiVolume)`` triples into a SliceDataset.

    Subjects must be unique (one volume per subject).  Records are ordered by
    subject id, then by the configured plane order, then by slice index.
    """
    seen = set()
    for subject_id, label, _ in volumes:
        if subject_id in seen:
            raise DuplicateSubjectError(subject_id)
        if label not in CLASS_NAMES:
            raise LabelError(f"subject {subject_id!r}: unknown label {label!r}")
        seen.add(subject_id)
    items = sorted(((s, l, v, config) for s, l, v in volumes), key=lambda t: t[0])
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_process_item, items))
    else:
        chunks = [_process_item(it) for it in items]
    return SliceDataset([r for chunk in chunks for r in chunk])


# -- splitting -----------------------------------------------------------------

def _exact_share(n, r):
    e = n * r
    # snap float noise such as 0.6 * 5 = 3.0000000000000004
    return float(round(e)) if abs(e - round(e)) < 1e-9 else e


def _largest_remainder(total, ratios):
    exact = [_exact_share(total, r) for r in ratios]
    base = [math.floor(e) for e in exact]
    left = total - sum(base)
    order = sorted(range(len(ratios)), key=lambda p: (-(exact[p] - base[p]), p))
    for p in order[:left]:
        base[p] += 1
    return base


def apportion(class_sizes, ratios):
    """Split each class's count across partitions.

    Every class gets the floor or ceiling of its exact share in each
    partition, and each partition total is the floor or ceiling of its exact
    share of the grand total (the largest-remainder totals when reachable).
    Returns ``{class: [count per partition]}``.
    """
    classes = list(class_sizes)
    n_parts = len(ratios)
    total = sum(class_sizes.values())
    targets = _largest_remainder(total, ratios)
    bounds = [(math.floor(_exact_share(total, r)), math.ceil(_exact_share(total, r)))
              for r in ratios]
    base, options = {}, {}
    for c in classes:
        exact = [_exact_share(class_sizes[c], r) for r in ratios]
        base[c] = [math.floor(e) for e in exact]
        extra = class_sizes[c] - sum(base[c])
        eligible = sorted((p for p in range(n_parts) if exact[p] > base[c][p]),
                          key=lambda p: (-(exact[p] - base[c][p]), p))
        options[c] = [set(combo) for combo in itertools.combinations(eligible, extra)]

    start = [sum(base[c][p] for c in classes) for p in range(n_parts)]
    best = None
    for choice in itertools.product(*(options[c] for c in classes)):
        totals = list(start)
        for chosen in choice:
            for p in chosen:
                totals[p] += 1
        if totals == targets:
            best = choice
            break
        if best is None and all(lo <= t <= hi for t, (lo, hi) in zip(totals, bounds)):
            best = choice
    if best is None:
        raise InfeasibleSplitError(f"could not apportion {class_sizes} over ratios {ratios}")
    alloc = {c: list(base[c]) for c in classes}
    for c, chosen in zip(classes, best):
        for p in chosen:
            alloc[c][p] += 1
    return alloc


def split_dataset(dataset, ratios=(0.6, 0.2, 0.2), seed=0, group_by_subject=False):
    """Stratified, seeded (train, val, test) split.

    In per-slice mode records of one class are shuffled and dealt out; with
    ``group_by_subject`` whole subjects are dealt out instead so no subject
    appears in two partitions.
    """
    ratios = tuple(float(r) for r in ratios)
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be positive and sum to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    n_parts = len(ratios)

    if group_by_subject:
        subject_label = {}
        for r in dataset.records:
            prev = subject_label.setdefault(r.subject_id, r.class_label)
            if prev != r.class_label:
                raise LabelError(f"subject {r.subject_id!r} has slices with two labels")
        units = {}
        for s in sorted(subject_label):
            units.setdefault(subject_label[s], []).append(s)
        for label, subjects in units.items():
            if len(subjects) < n_parts:
                raise InfeasibleSplitError(
                    f"class {label} has {len(subjects)} subjects; grouped split into "
                    f"{n_parts} partitions needs at least {n_parts}"
                )
    else:
        units = {}
        for i, r in enumerate(dataset.records):
            units.setdefault(r.class_label, []).append(i)

    labels = [c for c in CLASS_NAMES if c in units]
    alloc = apportion({c: len(units[c]) for c in labels}, ratios)
    assignment = {}
    for c in labels:
        shuffled = [units[c][j] for j in rng.permutation(len(units[c]))]
        start = 0
        for p, n in enumerate(alloc[c]):
            for u in shuffled[start:start + n]:
                assignment[u] = p
            start += n

    parts = [[] for _ in range(n_parts)]
    for i, r in enumerate(dataset.records):
        key = r.subject_id if group_by_subject else i
        parts[assignment[key]].append(i)
    return tuple(dataset.subset(idx) for idx in parts)


# -- on-disk corpus ------------------------------------------------------------

def record_filename(record):
    return f"{record.subject_id}_{record.plane.value}_{record.slice_index:04d}.f64"


def write_corpus(dataset, out_dir, config=None):
    """Write one tensor blob per record plus ``manifest.jsonl``; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "slices").mkdir(parents=True, exist_ok=True)
    lines = []
    for r in dataset.records:
        rel = f"slices/{record_filename(r)}"
        digest = tensor_io.save(out_dir / rel, r.pixels)
        lines.append(json.dumps({
            "subject_id": r.subject_id,
            "label": r.class_label,
            "plane": r.plane.value,
            "index": r.slice_index,
            "path": rel,
            "sha256": digest,
        }, sort_keys=True))
    manifest = out_dir / MANIFEST_NAME
    manifest.write_text("".join(line + "\n" for line in lines))
    if config is not None:
        (out_dir / "preprocess_config.json").write_text(
            json.dumps(config.as_dict(), indent=2, sort_keys=True) + "\n"
        )
    return manifest


def read_corpus(corpus_dir, verify=True):
    corpus_dir = Path(corpus_dir)
    manifest = corpus_dir / MANIFEST_NAME
    if not manifest.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {corpus_dir}")
    records = []
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        blob = (corpus_dir / entry["path"]).read_bytes()
        if verify and hashlib.sha256(blob).hexdigest() != entry["sha256"]:
            raise DataError(f"content hash mismatch for {entry['path']}")
        records.append(SliceRecord(entry["subject_id"], entry["label"], entry["plane"],
                                   int(entry["index"]), tensor_io.loads(blob)))
    return SliceDataset(records)


def manifest_digest(corpus_dir):
    return hashlib.sha256((Path(corpus_dir) / MANIFEST_NAME).read_bytes()).hexdigest()


def write_label_manifest(path, entries):
    """``entries``: iterable of (subject_id, label, relative volume path)."""
    rows = ["subject_id\tlabel\tpath"] + [f"{s}\t{l}\t{p}" for s, l, p in entries]
    Path(path).write_text("\n".join(rows) + "\n")


def read_label_manifest(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split("\t") != ["subject_id", "label", "path"]:
        raise DataError(f"{path}: expected header 'subject_id<TAB>label<TAB>path'")
    out = []
    for line in lines[1:]:
        if line.strip():
            s, l, p = line.split("\t")
            out.append((s, l, p))
    return out


def class_table(dataset):
    """Per-class subject and slice counts, one row per class plus a total."""
    rows = []
    subjects = {c: set() for c in CLASS_NAMES}
    for r in dataset.records:
        subjects[r.class_label].add(r.subject_id)
    counts = dataset.class_counts
    for c in CLASS_NAMES:
        rows.append((c, len(subjects[c]), counts[c]))
    rows.append(("Total", sum(len(s) for s in subjects.values()), len(dataset)))
    width = max(len(str(r[2])) for r in rows) + 2
    out = [f"{'Class':<8}{'Volumes':>9}{'Slices':>{width + 2}}"]
    out += [f"{c:<8}{v:>9}{s:>{width + 2}}" for c, v, s in rows]
    return "\n".join(out)
