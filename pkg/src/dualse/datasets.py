"""Dataset loading (IDX binary, CSV), per-class subsampling, and synthetic
union-of-subspaces generation.

Feature matrices are laid out feature-by-sample (d x n): one column per
sample.
"""

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArgumentError,
    CardinalityError,
    ConsistencyError,
    FormatError,
    LengthError,
    ParseError,
)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class DataSet:
    """A feature matrix (d x n), optional integer labels, and class count.

    Labels, when present, are contiguous in [0, k) with every class
    non-empty. Treat instances as immutable.
    """

    features: np.ndarray
    labels: np.ndarray | None
    k: int

    @property
    def n_samples(self):
        return self.features.shape[1]

    @property
    def n_features(self):
        return self.features.shape[0]


def _check_labels(labels, k):
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ConsistencyError("labels outside [0, k)")
    if np.unique(labels).size != k:
        raise ConsistencyError("some class in [0, k) is empty")


def _read_exact(buf, offset, count, path, what):
    if offset + count > len(buf):
        raise LengthError(
            f"{path}: truncated {what} (need {count} bytes at offset {offset}, "
            f"have {len(buf) - offset})"
        )
    return buf[offset:offset + count], offset + count


def _read_idx_header(buf, path, expected_magic, n_dims):
    raw, offset = _read_exact(buf, 0, 4 * (1 + n_dims), path, "header")
    fields = struct.unpack(f">{1 + n_dims}i", raw)
    if fields[0] != expected_magic:
        raise FormatError(
            f"{path}: bad magic 0x{fields[0] & 0xffffffff:08x}, "
            f"expected 0x{expected_magic:08x}"
        )
    return fields[1:], offset


def load_idx(images_path, labels_path):
    """Load an IDX image/label file pair into a DataSet.

    Pixels are scaled by 1/255 and each image becomes one feature column,
    flattened in IDX byte order. Label values are remapped to contiguous
    ids in sorted order.
    """
    with open(images_path, "rb") as f:
        img_buf = f.read()
    with open(labels_path, "rb") as f:
        lab_buf = f.read()

    (count, rows, cols), offset = _read_idx_header(img_buf, images_path, IDX_IMAGE_MAGIC, 3)
    if count < 0 or rows < 0 or cols < 0:
        raise FormatError(f"{images_path}: negative dimension in header")
    payload, offset = _read_exact(img_buf, offset, count * rows * cols, images_path, "pixel data")
    if offset != len(img_buf):
        raise LengthError(f"{images_path}: {len(img_buf) - offset} trailing bytes")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows * cols)

    (lab_count,), offset = _read_idx_header(lab_buf, labels_path, IDX_LABEL_MAGIC, 1)
    lab_payload, offset = _read_exact(lab_buf, offset, lab_count, labels_path, "label data")
    if offset != len(lab_buf):
        raise LengthError(f"{labels_path}: {len(lab_buf) - offset} trailing bytes")
    raw_labels = np.frombuffer(lab_payload, dtype=np.uint8)

    if count != lab_count:
        raise ConsistencyError(
            f"image count {count} != label count {lab_count} "
            f"({images_path} vs {labels_path})"
        )

    features = pixels.T.astype(np.float64) / 255.0
    classes, labels = np.unique(raw_labels, return_inverse=True)
    k = int(classes.size)
    labels = labels.astype(np.int64)
    _check_labels(labels, k)
    return DataSet(features=features, labels=labels, k=k)


def _relabel_first_appearance(values):
    mapping = {}
    out = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        if v not in mapping:
            mapping[v] = len(mapping)
        out[i] = mapping[v]
    return out, len(mapping)


def load_csv(path, labels_column=None):
    """Load a rectangular numeric CSV, one sample per row.

    An optional header row is detected by a non-numeric first row. If
    ``labels_column`` is given (0-based, negative indices allowed), that
    column is extracted and relabeled to contiguous ids in order of first
    appearance.
    """
    with open(path, newline="", encoding="utf-8") as f:
        raw_rows = [(lineno, row) for lineno, row in enumerate(csv.reader(f), start=1) if row]
    if not raw_rows:
        raise FormatError(f"{path}: no data rows")

    def parse_row(lineno, row):
        out = []
        for col, cell in enumerate(row):
            try:
                out.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric value {cell.strip()!r} at row {lineno}, column {col}"
                ) from None
        return out

    width = len(raw_rows[0][1])
    start = 0
    try:
        first = parse_row(*raw_rows[0])
    except ParseError:
        start = 1  # header row
        if len(raw_rows) == 1:
            raise FormatError(f"{path}: header only, no data rows") from None
        width = len(raw_rows[start][1])
        first = None

    data = []
    for lineno, row in raw_rows[start:]:
        if len(row) != width:
            raise FormatError(f"{path}: row {lineno} has {len(row)} fields, expected {width}")
        if first is not None:
            data.append(first)
            first = None
        else:
            data.append(parse_row(lineno, row))

    table = np.asarray(data, dtype=np.float64)
    if labels_column is None:
        return DataSet(features=table.T.copy(), labels=None, k=0)

    if not -width <= labels_column < width:
        raise ArgumentError(f"labels_column {labels_column} out of range for {width} columns")
    col = labels_column % width
    raw_labels = table[:, col]
    if not np.all(raw_labels == np.round(raw_labels)):
        bad = int(np.flatnonzero(raw_labels != np.round(raw_labels))[0])
        raise ParseError(
            f"{path}: non-integer label {raw_labels[bad]!r} at data row {bad}, column {col}"
        )
    labels, k = _relabel_first_appearance([int(v) for v in raw_labels])
    features = np.delete(table, col, axis=1).T.copy()
    _check_labels(labels, k)
    return DataSet(features=features, labels=labels, k=k)


def subsample_per_class(d, m):
    """Keep the first ``m`` samples of each class, in original order."""
    if d.labels is None:
        raise ArgumentError("subsample_per_class requires labels")
    if m < 1:
        raise ArgumentError(f"m must be >= 1, got {m}")
    keep = []
    for cls in range(d.k):
        idx = np.flatnonzero(d.labels == cls)
        if idx.size < m:
            raise CardinalityError(f"class {cls} has {idx.size} samples, need {m}")
        keep.append(idx[:m])
    keep = np.sort(np.concatenate(keep))
    return DataSet(
        features=d.features[:, keep].copy(),
        labels=d.labels[keep].copy(),
        k=d.k,
    )


def synthesize_subspaces(k, sub_dim, ambient_dim, per_cluster, noise_sigma, seed):
    """Sample points from a union of k random linear subspaces.

    Per cluster, in rng order: an orthonormal basis from the QR
    factorization of an (ambient_dim x sub_dim) standard-normal draw, then
    standard-normal coordinates (sub_dim x per_cluster), then an isotropic
    noise draw scaled by ``noise_sigma``.
    """
    if sub_dim >= ambient_dim:
        raise ArgumentError(f"sub_dim {sub_dim} must be < ambient_dim {ambient_dim}")
    if k < 1 or sub_dim < 1:
        raise ArgumentError(f"k and sub_dim must be >= 1, got k={k}, sub_dim={sub_dim}")
    if per_cluster < sub_dim:
        raise ArgumentError(f"per_cluster {per_cluster} must be >= sub_dim {sub_dim}")
    if noise_sigma < 0:
        raise ArgumentError(f"noise_sigma must be >= 0, got {noise_sigma}")

    rng = np.random.default_rng(seed)
    blocks = []
    for _ in range(k):
        basis, _ = np.linalg.qr(rng.standard_normal((ambient_dim, sub_dim)))
        coords = rng.standard_normal((sub_dim, per_cluster))
        noise = rng.standard_normal((ambient_dim, per_cluster))
        blocks.append(basis @ coords + noise_sigma * noise)
    features = np.hstack(blocks)
    labels = np.repeat(np.arange(k, dtype=np.int64), per_cluster)
    return DataSet(features=features, labels=labels, k=k)


def normalize_features(d):
    """Min-max scale each feature row to [0, 1]; constant rows map to 0."""
    lo = d.features.min(axis=1, keepdims=True)
    hi = d.features.max(axis=1, keepdims=True)
    span = hi - lo
    span[span == 0.0] = 1.0
    feats = (d.features - lo) / span
    return DataSet(features=feats, labels=d.labels, k=d.k)
