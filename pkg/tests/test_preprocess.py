import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adslice.errors import DataError, DuplicateSubjectError, InfeasibleSplitError
from adslice.nifti import NiftiVolume, Plane
from adslice.preprocess import (
    Normalization,
    PreprocessConfig,
    Selection,
    SliceDataset,
    SliceRecord,
    apportion,
    build_dataset,
    class_table,
    normalize_intensity,
    planned_slice_count,
    read_corpus,
    resize_slice,
    select_slices,
    split_dataset,
    write_corpus,
)


def ramp(shape):
    return np.arange(np.prod(shape), dtype=np.float64).reshape(shape)


# -- normalisation -------------------------------------------------------------

def test_minmax_maps_onto_unit_interval():
    v = np.arange(11.0).reshape(11, 1, 1)
    out = normalize_intensity(v, "minmax_unit")
    np.testing.assert_allclose(out.ravel(), np.arange(11) / 10, rtol=0, atol=1e-15)
    assert out.max() == 1.0 and out.min() == 0.0


def test_constant_volume_gives_zeros():
    for mode in ("minmax_unit", "zscore_clip:3"):
        out = normalize_intensity(np.full((3, 3, 3), 4.2), mode)
        assert not out.any()


def _zscore_clip_scalar(values, sigma):
    n = len(values)
    mean = sum(values) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / n)
    out = []
    for v in values:
        z = (v - mean) / std
        z = max(-sigma, min(sigma, z))
        out.append((z + sigma) / (2 * sigma))
    return out


def test_zscore_clip_matches_scalar_reference():
    v = ramp((4, 5, 6)) ** 1.5  # skewed, so some values clip at sigma = 1.5
    out = normalize_intensity(v, Normalization("zscore_clip", 1.5))
    ref = np.array(_zscore_clip_scalar(list(v.ravel()), 1.5)).reshape(v.shape)
    np.testing.assert_allclose(out, ref, rtol=0, atol=1e-12)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_zscore_clip_3_on_ramp():
    v = ramp((3, 4, 5))
    ref = np.array(_zscore_clip_scalar(list(v.ravel()), 3.0)).reshape(v.shape)
    np.testing.assert_allclose(normalize_intensity(v, "zscore_clip:3"), ref, rtol=0, atol=1e-12)


def test_normalize_rejects_non_finite_and_empty():
    v = np.ones((2, 2, 2))
    v[0, 0, 0] = np.inf
    with pytest.raises(DataError):
        normalize_intensity(v)
    with pytest.raises(DataError):
        normalize_intensity(np.zeros((0, 2, 2)))


def test_normalize_volume_keeps_type():
    vol = NiftiVolume.from_array(ramp((2, 3, 4)), spacing=(1.0, 2.0, 3.0))
    out = normalize_intensity(vol)
    assert isinstance(out, NiftiVolume)
    assert out.spacing == (1.0, 2.0, 3.0)
    assert out.voxels.max() == 1.0


# -- resizing ------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["bilinear", "nearest"])
def test_resize_same_size_is_identity(mode):
    img = np.random.default_rng(0).normal(size=(7, 5))
    np.testing.assert_array_equal(resize_slice(img, (7, 5), mode), img)


@pytest.mark.parametrize("mode", ["bilinear", "nearest"])
@pytest.mark.parametrize("target", [(1, 1), (3, 9), (16, 16), (300, 300)])
def test_resize_constant_stays_constant(mode, target):
    out = resize_slice(np.full((4, 6), 0.37), target, mode)
    assert out.shape == target
    np.testing.assert_allclose(out, 0.37, rtol=0, atol=1e-15)


def _bilinear_at(img, dy, dx, out_h, out_w):
    h, w = len(img), len(img[0])
    sy = min(max((dy + 0.5) * h / out_h - 0.5, 0.0), h - 1)
    sx = min(max((dx + 0.5) * w / out_w - 0.5, 0.0), w - 1)
    y0, x0 = int(math.floor(sy)), int(math.floor(sx))
    y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
    fy, fx = sy - y0, sx - x0
    return ((1 - fy) * ((1 - fx) * img[y0][x0] + fx * img[y0][x1])
            + fy * ((1 - fx) * img[y1][x0] + fx * img[y1][x1]))


def test_bilinear_2x2_to_4x4_hand_oracle():
    img = [[0.0, 0.0], [2.0, 2.0]]
    expected = np.array([[_bilinear_at(img, y, x, 4, 4) for x in range(4)] for y in range(4)])
    # source rows -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped to 1)
    np.testing.assert_array_equal(expected[:, 0], [0.0, 0.5, 1.5, 2.0])
    out = resize_slice(np.array(img), (4, 4), "bilinear")
    np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)
    assert np.all(out == out[:, :1])


def test_bilinear_random_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    img = rng.normal(size=(5, 8))
    out = resize_slice(img, (11, 3), "bilinear")
    ref = np.array([[_bilinear_at(img.tolist(), y, x, 11, 3) for x in range(3)] for y in range(11)])
    np.testing.assert_allclose(out, ref, rtol=0, atol=1e-14)


def test_nearest_upsample_exact_values():
    img = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = resize_slice(img, (4, 4), "nearest")
    np.testing.assert_array_equal(out, np.kron(img, np.ones((2, 2))))


# -- slice selection -------------------------------------------------------------

def test_select_all():
    assert select_slices(np.zeros((2, 2, 5)), "axial", Selection.parse("all")) == [0, 1, 2, 3, 4]


def test_variance_top_k_picks_highest_variance():
    pattern = np.array([[1.0, -1.0], [-1.0, 1.0]])
    vox = np.stack([math.sqrt(z) * pattern for z in range(5)], axis=2)
    var = [vox[:, :, z].var() for z in range(5)]
    assert var == sorted(var)  # variance grows with z
    assert select_slices(vox, Plane.AXIAL, "variance_top_k:2") == [3, 4]


def test_variance_ties_prefer_lower_index():
    vox = np.zeros((2, 2, 4))
    vox[0, 0, 1] = vox[0, 0, 2] = vox[0, 0, 3] = 1.0
    assert select_slices(vox, "axial", "variance_top_k:2") == [1, 2]


def test_variance_top_k_clamped_with_warning():
    with pytest.warns(UserWarning):
        assert select_slices(np.zeros((2, 2, 3)), "axial", "variance_top_k:10") == [0, 1, 2]


def test_center_band():
    assert select_slices(np.zeros((1, 1, 8)), "axial", "center_band:0.5") == [2, 3, 4, 5]


def test_selection_validation():
    for bad in ("variance_top_k:0", "variance_top_k:1.5", "center_band:0", "center_band:1.5",
                "variance_top_k", "bogus:1"):
        with pytest.raises(ValueError):
            Selection.parse(bad)


def test_config_validation():
    with pytest.raises(ValueError):
        PreprocessConfig(target_size=(4, 4))
    with pytest.raises(ValueError):
        PreprocessConfig(interpolation="cubic")
    cfg = PreprocessConfig.from_mapping({"target": "64", "planes": "axial", "selection": "all"})
    assert cfg.target_size == (64, 64) and cfg.planes == (Plane.AXIAL,)
    assert PreprocessConfig().target_size == (300, 300)
    assert PreprocessConfig().planes == (Plane.AXIAL, Plane.CORONAL, Plane.SAGITTAL)


# -- dataset building ------------------------------------------------------------

def _volumes(n_per_class=1, shape=(6, 7, 10), seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for label in ("NC", "MCI", "AD"):
        for i in range(n_per_class):
            out.append((f"{label}{i:02d}", label, NiftiVolume.from_array(rng.uniform(0, 5, size=shape))))
    return out


def test_build_counts_records():
    cfg = PreprocessConfig(target_size=(8, 8), planes=("axial",), selection=Selection("all"))
    ds = build_dataset(_volumes(), cfg)
    assert len(ds) == 30
    assert ds.class_counts == {"NC": 10, "MCI": 10, "AD": 10}
    assert [r.subject_id for r in ds.records[:10]] == ["AD00"] * 10  # ordered by subject id
    assert [r.slice_index for r in ds.records[:10]] == list(range(10))
    for r in ds.records:
        assert r.pixels.shape == (8, 8)
        assert np.all(np.isfinite(r.pixels)) and r.pixels.min() >= 0 and r.pixels.max() <= 1


def test_build_rejects_duplicate_subject():
    vols = _volumes()
    vols.append(("NC00", "AD", vols[0][2]))
    with pytest.raises(DuplicateSubjectError, match="NC00"):
        build_dataset(vols, PreprocessConfig(target_size=(8, 8)))


def test_build_parallel_matches_serial():
    cfg = PreprocessConfig(target_size=(9, 9), selection=Selection("variance_top_k", 3))
    a = build_dataset(_volumes(2), cfg, jobs=1)
    b = build_dataset(_volumes(2), cfg, jobs=2)
    assert [(r.subject_id, r.plane, r.slice_index) for r in a.records] == \
        [(r.subject_id, r.plane, r.slice_index) for r in b.records]
    assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a.records, b.records))


def test_full_scale_slice_count_order_of_magnitude():
    # 160 subjects with 65,677 used slices in total: ~410 per subject
    per_subject_reported = 65677 / 160
    cfg = PreprocessConfig(selection=Selection("all"))
    planned = planned_slice_count((256, 256, 166), cfg)
    assert planned == 256 + 256 + 166
    assert 0.1 < planned / per_subject_reported < 10
    assert 0.1 < 160 * planned / 65677 < 10


def test_corpus_roundtrip(tmp_path):
    cfg = PreprocessConfig(target_size=(8, 8), selection=Selection("variance_top_k", 2))
    ds = build_dataset(_volumes(), cfg)
    manifest = write_corpus(ds, tmp_path, cfg)
    lines = manifest.read_text().splitlines()
    assert len(lines) == len(ds)
    back = read_corpus(tmp_path)
    assert back.class_counts == ds.class_counts
    for a, b in zip(ds.records, back.records):
        assert (a.subject_id, a.class_label, a.plane, a.slice_index) == \
            (b.subject_id, b.class_label, b.plane, b.slice_index)
        assert np.array_equal(a.pixels, b.pixels)


def test_corpus_deterministic_bytes(tmp_path):
    cfg = PreprocessConfig(target_size=(8, 8), selection=Selection("variance_top_k", 2))
    write_corpus(build_dataset(_volumes(seed=4), cfg), tmp_path / "a", cfg)
    write_corpus(build_dataset(_volumes(seed=4), cfg), tmp_path / "b", cfg)
    assert (tmp_path / "a/manifest.jsonl").read_bytes() == (tmp_path / "b/manifest.jsonl").read_bytes()


def test_corpus_hash_mismatch_detected(tmp_path):
    cfg = PreprocessConfig(target_size=(8, 8), selection=Selection("all"), planes=("axial",))
    write_corpus(build_dataset(_volumes(), cfg), tmp_path)
    blob = next((tmp_path / "slices").iterdir())
    data = bytearray(blob.read_bytes())
    data[-1] ^= 0xFF
    blob.write_bytes(bytes(data))
    with pytest.raises(DataError, match="hash"):
        read_corpus(tmp_path)


def test_class_table_lists_every_class():
    cfg = PreprocessConfig(target_size=(8, 8), selection=Selection("all"), planes=("axial",))
    table = class_table(build_dataset(_volumes(), cfg))
    assert "NC" in table and "MCI" in table and "AD" in table and "Total" in table
    assert table.splitlines()[-1].split() == ["Total", "3", "30"]


# -- splitting -------------------------------------------------------------------

def _flat_dataset(counts, slices_per_subject=1):
    recs = []
    for label, n in counts.items():
        for i in range(n):
            for j in range(slices_per_subject):
                recs.append(SliceRecord(f"{label}-{i // 1:03d}", label, "axial", j, np.zeros((2, 2))))
    return SliceDataset(recs)


def test_split_sizes_100_records():
    ds = _flat_dataset({"NC": 34, "MCI": 33, "AD": 33}, 1)
    # one record per "subject" id, but per-slice mode ignores subjects
    train, val, test = split_dataset(ds, (0.6, 0.2, 0.2), seed=1)
    assert (len(train), len(val), len(test)) == (60, 20, 20)


def test_split_stratified_within_one(tmp_path):
    counts = {"NC": 20972 // 100, "MCI": 26192 // 100, "AD": 18513 // 100}
    ds = _flat_dataset(counts)
    parts = split_dataset(ds, (0.6, 0.2, 0.2), seed=3)
    for part, r in zip(parts, (0.6, 0.2, 0.2)):
        for label, n in counts.items():
            assert abs(part.class_counts[label] - n * r) <= 1


def test_split_deterministic():
    ds = _flat_dataset({"NC": 13, "MCI": 17, "AD": 11})
    a = split_dataset(ds, seed=9)
    b = split_dataset(ds, seed=9)
    c = split_dataset(ds, seed=10)
    key = lambda parts: [[(r.subject_id, r.slice_index) for r in p.records] for p in parts]  # noqa: E731
    assert key(a) == key(b)
    assert key(a) != key(c)


def test_grouped_split_has_no_leakage():
    ds = _flat_dataset({"NC": 7, "MCI": 6, "AD": 5}, slices_per_subject=4)
    parts = split_dataset(ds, seed=2, group_by_subject=True)
    subjects = [set(p.subject_ids) for p in parts]
    assert not (subjects[0] & subjects[1]) and not (subjects[0] & subjects[2]) and not (subjects[1] & subjects[2])
    assert sum(len(p) for p in parts) == len(ds)
    for p in parts:
        assert all(v > 0 for v in p.class_counts.values())


def test_grouped_split_infeasible():
    ds = _flat_dataset({"NC": 5, "MCI": 2, "AD": 5}, slices_per_subject=3)
    with pytest.raises(InfeasibleSplitError, match="MCI"):
        split_dataset(ds, group_by_subject=True)


def test_split_ratio_validation():
    ds = _flat_dataset({"NC": 5})
    with pytest.raises(ValueError):
        split_dataset(ds, (0.5, 0.3, 0.3))
    with pytest.raises(ValueError):
        split_dataset(ds, (1.0, 0.0, 0.0))


@settings(max_examples=200, deadline=None)
@given(
    sizes=st.lists(st.integers(0, 400), min_size=1, max_size=4),
    ratios=st.sampled_from([(0.6, 0.2, 0.2), (0.7, 0.15, 0.15), (0.5, 0.5), (0.34, 0.33, 0.33),
                            (0.1, 0.2, 0.3, 0.4)]),
)
def test_apportion_properties(sizes, ratios):
    class_sizes = {f"c{i}": n for i, n in enumerate(sizes)}
    alloc = apportion(class_sizes, ratios)
    total = sum(sizes)
    for c, n in class_sizes.items():
        assert sum(alloc[c]) == n
        for p, r in enumerate(ratios):
            assert math.floor(n * r) <= alloc[c][p] <= math.ceil(n * r)
    for p, r in enumerate(ratios):
        assert abs(sum(alloc[c][p] for c in class_sizes) - total * r) < 1
