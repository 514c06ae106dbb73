import struct

import numpy as np
import pytest

from dualse.datasets import (
    DataSet,
    load_csv,
    load_idx,
    normalize_features,
    subsample_per_class,
    synthesize_subspaces,
)
from dualse.errors import (
    ArgumentError,
    CardinalityError,
    ConsistencyError,
    FormatError,
    LengthError,
    ParseError,
)


def encode_idx_images(images):
    # images: list of 2-D uint8 arrays, all the same shape
    rows, cols = images[0].shape
    blob = struct.pack(">iiii", 0x00000803, len(images), rows, cols)
    for img in images:
        blob += img.astype(np.uint8).tobytes()
    return blob


def encode_idx_labels(labels):
    return struct.pack(">ii", 0x00000801, len(labels)) + bytes(labels)


@pytest.fixture
def idx_pair(tmp_path):
    def write(images, labels):
        img_path = tmp_path / "images.idx"
        lab_path = tmp_path / "labels.idx"
        img_path.write_bytes(encode_idx_images(images))
        lab_path.write_bytes(encode_idx_labels(labels))
        return str(img_path), str(lab_path)

    return write


class TestLoadIdx:
    def test_hand_built_blob(self, idx_pair):
        first = np.array([[0, 255], [0, 0]], dtype=np.uint8)
        second = np.full((2, 2), 255, dtype=np.uint8)
        img_path, lab_path = idx_pair([first, second], [0, 1])
        ds = load_idx(img_path, lab_path)
        assert ds.features.shape == (4, 2)
        assert np.array_equal(ds.features[:, 0], [0.0, 1.0, 0.0, 0.0])
        assert np.array_equal(ds.features[:, 1], [1.0, 1.0, 1.0, 1.0])
        assert np.array_equal(ds.labels, [0, 1])
        assert ds.k == 2

    def test_roundtrip_bytes(self, idx_pair):
        rng = np.random.default_rng(0)
        images = [rng.integers(0, 256, (3, 4)).astype(np.uint8) for _ in range(5)]
        labels = [1, 0, 2, 1, 0]
        img_path, lab_path = idx_pair(images, labels)
        ds = load_idx(img_path, lab_path)
        # re-serialize from the loaded dataset
        pixels = np.round(ds.features * 255.0).astype(np.uint8)
        re_images = [pixels[:, j].reshape(3, 4) for j in range(pixels.shape[1])]
        assert encode_idx_images(re_images) == encode_idx_images(images)
        assert encode_idx_labels(list(ds.labels)) == encode_idx_labels(labels)

    def test_wrong_magic_in_labels(self, tmp_path, idx_pair):
        img_path, _ = idx_pair([np.zeros((2, 2), dtype=np.uint8)], [0])
        bad = tmp_path / "bad_labels.idx"
        bad.write_bytes(struct.pack(">ii", 0x00000803, 1) + b"\x00")
        with pytest.raises(FormatError, match="0x00000803"):
            load_idx(img_path, str(bad))

    def test_empty_image_file(self, tmp_path, idx_pair):
        _, lab_path = idx_pair([np.zeros((2, 2), dtype=np.uint8)], [0])
        empty = tmp_path / "empty.idx"
        empty.write_bytes(b"")
        with pytest.raises(LengthError):
            load_idx(str(empty), lab_path)

    def test_truncated_payload(self, tmp_path, idx_pair):
        img_path, lab_path = idx_pair([np.zeros((2, 2), dtype=np.uint8)], [0])
        blob = open(img_path, "rb").read()
        trunc = tmp_path / "trunc.idx"
        trunc.write_bytes(blob[:-2])
        with pytest.raises(LengthError):
            load_idx(str(trunc), lab_path)

    def test_count_mismatch(self, tmp_path, idx_pair):
        img_path, _ = idx_pair([np.zeros((2, 2), dtype=np.uint8)] * 2, [0, 1])
        lab = tmp_path / "short_labels.idx"
        lab.write_bytes(encode_idx_labels([0]))
        with pytest.raises(ConsistencyError):
            load_idx(img_path, str(lab))


class TestLoadCsv:
    def write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_two_samples_with_labels(self, tmp_path):
        ds = load_csv(self.write(tmp_path, "1,2,0\n3,4,1\n"), labels_column=2)
        assert np.array_equal(ds.features, [[1.0, 3.0], [2.0, 4.0]])
        assert np.array_equal(ds.labels, [0, 1])
        assert ds.k == 2

    def test_ragged_row(self, tmp_path):
        with pytest.raises(FormatError, match="row 2"):
            load_csv(self.write(tmp_path, "1,2\n3\n"))

    def test_non_numeric_cell(self, tmp_path):
        with pytest.raises(ParseError, match="row 2.*column 1"):
            load_csv(self.write(tmp_path, "1,2\n3,x\n"))

    def test_relabel_first_appearance(self, tmp_path):
        ds = load_csv(self.write(tmp_path, "0,5\n0,9\n0,5\n"), labels_column=1)
        assert np.array_equal(ds.labels, [0, 1, 0])
        assert ds.k == 2

    def test_header_detected(self, tmp_path):
        ds = load_csv(self.write(tmp_path, "f1,f2,label\n1,2,7\n3,4,8\n"), labels_column=-1)
        assert np.array_equal(ds.features, [[1.0, 3.0], [2.0, 4.0]])
        assert np.array_equal(ds.labels, [0, 1])

    def test_unlabeled(self, tmp_path):
        ds = load_csv(self.write(tmp_path, "1,2\n3,4\n"))
        assert ds.labels is None and ds.k == 0
        assert ds.features.shape == (2, 2)

    def test_non_integer_label(self, tmp_path):
        with pytest.raises(ParseError):
            load_csv(self.write(tmp_path, "1,0.5\n2,1\n"), labels_column=1)


class TestSubsamplePerClass:
    def test_first_per_class(self):
        ds = DataSet(np.arange(8, dtype=float).reshape(2, 4), np.array([0, 0, 1, 1]), 2)
        out = subsample_per_class(ds, 1)
        assert np.array_equal(out.features, ds.features[:, [0, 2]])
        assert np.array_equal(out.labels, [0, 1])

    def test_full_class_size_is_identity(self):
        ds = DataSet(np.arange(8, dtype=float).reshape(2, 4), np.array([0, 1, 0, 1]), 2)
        out = subsample_per_class(ds, 2)
        assert np.array_equal(out.features, ds.features)
        assert np.array_equal(out.labels, ds.labels)

    def test_order_and_values_preserved(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 3, 30)
        labels[:3] = [0, 1, 2]  # every class non-empty
        ds = DataSet(rng.standard_normal((4, 30)), labels, 3)
        out = subsample_per_class(ds, 3)
        assert out.n_samples == 9
        # relative order: labels sequence appears in original order
        kept = [i for i in range(30) if any(np.array_equal(ds.features[:, i], out.features[:, j]) for j in range(9))]
        assert kept == sorted(kept)

    def test_class_too_small(self):
        ds = DataSet(np.zeros((2, 3)), np.array([0, 0, 1]), 2)
        with pytest.raises(CardinalityError, match="class 1"):
            subsample_per_class(ds, 2)


class TestSynthesizeSubspaces:
    def test_noiseless_membership(self):
        ds = synthesize_subspaces(3, 2, 10, 5, 0.0, seed=0)
        assert ds.features.shape == (10, 15)
        # each cluster's points lie in a 2-D subspace: residual after
        # projection onto the top-2 principal directions is ~0
        for c in range(3):
            block = ds.features[:, ds.labels == c]
            u, s, _ = np.linalg.svd(block, full_matrices=False)
            proj = u[:, :2] @ (u[:, :2].T @ block)
            assert np.abs(block - proj).max() <= 1e-10

    def test_single_cluster_labels(self):
        ds = synthesize_subspaces(1, 2, 5, 4, 0.1, seed=1)
        assert np.array_equal(ds.labels, np.zeros(4, dtype=np.int64))

    def test_cross_cluster_cosines_follow_bases(self):
        # replicate the documented construction (QR of seeded gaussian draws)
        # to obtain the two 1-D bases; with noise 0 every cross-cluster
        # cosine equals the basis cosine exactly
        seed, ambient = 2, 12
        ds = synthesize_subspaces(2, 1, ambient, 6, 0.0, seed=seed)
        rng = np.random.default_rng(seed)
        bases = []
        for _ in range(2):
            q, _ = np.linalg.qr(rng.standard_normal((ambient, 1)))
            rng.standard_normal((1, 6))
            rng.standard_normal((ambient, 6))
            bases.append(q[:, 0])
        base_cos = abs(float(bases[0] @ bases[1]))
        a = ds.features[:, ds.labels == 0]
        b = ds.features[:, ds.labels == 1]
        a = a / np.linalg.norm(a, axis=0)
        b = b / np.linalg.norm(b, axis=0)
        cross = np.abs(a.T @ b)
        assert np.abs(cross - base_cos).max() <= 1e-10

    def test_seed_reproducible(self):
        a = synthesize_subspaces(2, 2, 8, 5, 0.05, seed=7)
        b = synthesize_subspaces(2, 2, 8, 5, 0.05, seed=7)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_bad_dims(self):
        with pytest.raises(ArgumentError):
            synthesize_subspaces(2, 5, 5, 6, 0.0, seed=0)


def test_normalize_features_range():
    rng = np.random.default_rng(3)
    ds = DataSet(rng.standard_normal((4, 9)) * 10 + 3, None, 0)
    out = normalize_features(ds)
    assert out.features.min() >= 0.0 and out.features.max() <= 1.0
    assert np.allclose(out.features.min(axis=1), 0.0)
    assert np.allclose(out.features.max(axis=1), 1.0)


def test_normalize_constant_row():
    ds = DataSet(np.vstack([np.full(5, 2.0), np.arange(5.0)]), None, 0)
    out = normalize_features(ds)
    assert np.array_equal(out.features[0], np.zeros(5))
