import numpy as np
import pytest

from adslice import CLASS_NAMES
from adslice.nifti import load, read_nifti, write_nifti
from adslice.preprocess import LABELS_NAME, read_label_manifest
from adslice.synth import PhantomConfig, generate_phantoms, write_phantoms


def centre_void_area(volume):
    x, y, z = volume.shape
    crop = volume.voxels[x // 4: 3 * x // 4, y // 4: 3 * y // 4, z // 2]
    return int((crop < 0.2).sum())


def test_config_validation():
    for bad in ({"volume_shape": (8, 64, 64)}, {"subjects_per_class": 0}, {"difficulty": 1.5}):
        with pytest.raises(ValueError):
            PhantomConfig(**bad)


def test_ids_labels_and_range():
    ph = generate_phantoms(PhantomConfig(subjects_per_class=4, difficulty=0.7, seed=2))
    assert len(ph) == 12
    assert len({s for s, _, _ in ph}) == 12
    assert [l for _, l, _ in ph] == [c for c in CLASS_NAMES for _ in range(4)]
    for _, _, v in ph:
        assert v.shape == (64, 64, 48)
        assert np.isfinite(v.voxels).all()
        assert v.voxels.min() >= 0.0 and v.voxels.max() <= 1.0


def test_void_area_grows_with_class():
    ph = generate_phantoms(PhantomConfig(subjects_per_class=5, seed=0))
    area = {c: [centre_void_area(v) for _, l, v in ph if l == c] for c in CLASS_NAMES}
    assert min(area["AD"]) >= 3 * max(area["NC"])
    assert min(area["MCI"]) > max(area["NC"])


def test_same_seed_same_bytes():
    cfg = PhantomConfig(subjects_per_class=2, seed=11, difficulty=0.5)
    a = [write_nifti(v) for _, _, v in generate_phantoms(cfg)]
    b = [write_nifti(v) for _, _, v in generate_phantoms(cfg)]
    assert a == b
    c = [write_nifti(v) for _, _, v in generate_phantoms(PhantomConfig(subjects_per_class=2, seed=12, difficulty=0.5))]
    assert a != c


def test_nifti_round_trip():
    for _, _, v in generate_phantoms(PhantomConfig(subjects_per_class=1, difficulty=0.3)):
        back = read_nifti(write_nifti(v))
        np.testing.assert_array_equal(back.voxels, v.voxels)


def test_write_phantoms(tmp_path):
    paths = write_phantoms(PhantomConfig(subjects_per_class=2, volume_shape=(16, 20, 24)), tmp_path)
    assert len(paths) == 6
    entries = read_label_manifest(tmp_path / LABELS_NAME)
    assert [(s, l) for s, l, _ in entries] == [(f"{c}_{k:03d}", c) for c in CLASS_NAMES for k in range(2)]
    assert load(tmp_path / entries[0][2]).shape == (16, 20, 24)


def nearest_centroid_accuracy(difficulty):
    def centre_slices(seed):
        ph = generate_phantoms(PhantomConfig(subjects_per_class=20, seed=seed, difficulty=difficulty))
        x = np.array([v.voxels[:, :, v.shape[2] // 2].ravel() for _, _, v in ph])
        return x, np.array([CLASS_NAMES.index(l) for _, l, _ in ph])

    x_fit, y_fit = centre_slices(100)
    x_test, y_test = centre_slices(200)
    centroids = np.stack([x_fit[y_fit == c].mean(axis=0) for c in range(3)])
    d = ((x_test[:, None, :] - centroids[None]) ** 2).sum(axis=2)
    return float(np.mean(d.argmin(axis=1) == y_test))


def test_separability_degrades_with_difficulty():
    acc = [nearest_centroid_accuracy(d) for d in (0.0, 0.5, 1.0)]
    assert acc[0] >= 0.95
    assert acc[0] >= acc[1] >= acc[2]
    assert acc[2] < acc[0]
