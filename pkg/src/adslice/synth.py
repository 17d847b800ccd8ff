"""Synthetic three-class phantom volumes.

Each phantom is an ellipsoidal "brain" (intensity 0.4) holding an inner
ellipsoid (0.8) and a dark central void (0.05).  The classes differ by inner
ellipsoid size and void radius:

    NC   inner x1.00   void x1
    MCI  inner x0.85   void x2
    AD   inner x0.70   void x4

These magnitudes are arbitrary choices that make the classes easy to tell
apart at difficulty 0.  ``difficulty`` in [0, 1] raises three nuisance
terms together: per-subject morphology jitter wide enough to blur the class
boundaries, position jitter and additive Gaussian noise.  Values are clipped
to [0, 1].
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import CLASS_NAMES
from .nifti import NiftiVolume, save
from .preprocess import LABELS_NAME, write_label_manifest

INNER_SCALE = {"NC": 1.0, "MCI": 0.85, "AD": 0.7}
VOID_SCALE = {"NC": 1.0, "MCI": 2.0, "AD": 4.0}

BRAIN, INNER, VOID = 0.4, 0.8, 0.05
OUTER_AXES = (0.42, 0.46, 0.40)   # fraction of each extent
INNER_FRACTION = 0.75             # inner semi-axes relative to outer, before class scaling
VOID_FRACTION = 0.045             # base void radius relative to the smallest in-plane extent
NOISE_SIGMA = 0.25                # at difficulty 1
SHIFT = 0.08                      # max centre shift at difficulty 1, fraction of extent


@dataclass(frozen=True)
class PhantomConfig:
    volume_shape: tuple = (64, 64, 48)
    subjects_per_class: int = 10
    seed: int = 0
    difficulty: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "volume_shape", tuple(int(d) for d in self.volume_shape))
        if len(self.volume_shape) != 3 or min(self.volume_shape) < 16:
            raise ValueError(f"volume_shape must be 3 extents of at least 16, got {self.volume_shape}")
        if self.subjects_per_class < 1:
            raise ValueError(f"subjects_per_class must be >= 1, got {self.subjects_per_class}")
        if not 0.0 <= self.difficulty <= 1.0:
            raise ValueError(f"difficulty must be in [0, 1], got {self.difficulty}")


def _ellipsoid(grid, centre, axes):
    return sum(((g - c) / a) ** 2 for g, c, a in zip(grid, centre, axes)) <= 1.0


def phantom(label, shape, rng, difficulty=0.0):
    """One phantom volume of class ``label`` drawn from ``rng``."""
    d = difficulty
    shape = np.array(shape, dtype=np.float64)
    grid = np.meshgrid(*(np.arange(n) + 0.5 for n in shape.astype(int)), indexing="ij")
    centre = shape / 2 + d * SHIFT * shape * rng.uniform(-1, 1, size=3)
    # mild anatomical variation at every difficulty
    outer = np.array(OUTER_AXES) * shape * rng.uniform(0.96, 1.04, size=3)
    inner_scale = INNER_SCALE[label] + d * rng.uniform(-0.3, 0.3)
    void_scale = VOID_SCALE[label] * 2.0 ** (d * rng.uniform(-2, 2))
    inner = outer * INNER_FRACTION * inner_scale * rng.uniform(0.98, 1.02, size=3)
    void_r = VOID_FRACTION * min(shape[:2]) * void_scale
    void_r = min(void_r, 0.9 * inner.min())

    vol = np.zeros(tuple(shape.astype(int)))
    vol[_ellipsoid(grid, centre, outer)] = BRAIN
    vol[_ellipsoid(grid, centre, inner)] = INNER
    vol[_ellipsoid(grid, centre, (void_r,) * 3)] = VOID
    if d > 0:
        vol += rng.normal(0.0, NOISE_SIGMA * d, size=vol.shape)
    return np.clip(vol, 0.0, 1.0)


def generate_phantoms(config):
    """``[(subject_id, label, NiftiVolume), ...]``, classes in NC, MCI, AD order.

    Every subject gets its own generator derived from (seed, class, index), so
    the output does not depend on generation order.
    """
    out = []
    for c, label in enumerate(CLASS_NAMES):
        for k in range(config.subjects_per_class):
            rng = np.random.default_rng([config.seed, c, k])
            vox = phantom(label, config.volume_shape, rng, config.difficulty)
            out.append((f"{label}_{k:03d}", label, NiftiVolume.from_array(vox)))
    return out


def write_phantoms(config, out_dir):
    """Write one ``<subject>.nii`` per phantom plus the label manifest; returns the file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries, paths = [], []
    for subject_id, label, volume in generate_phantoms(config):
        name = f"{subject_id}.nii"
        save(out_dir / name, volume)
        entries.append((subject_id, label, name))
        paths.append(out_dir / name)
    write_label_manifest(out_dir / LABELS_NAME, entries)
    return paths
