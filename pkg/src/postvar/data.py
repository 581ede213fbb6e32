"""Datasets: IDX image files, max-pool preprocessing, synthetic kinds and CSV export.

All feature vectors handed to the quantum pipeline are angles in ``[0, 2*pi)``.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DimensionError, IDXParseError, RangeError

TWO_PI = 2 * np.pi
IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
POOL = 7
DATA_DIR_ENV = "POSTVAR_DATA_DIR"
SYNTH_KINDS = ("blobs", "parity", "linear")

FASHION_CLASSES = {"tshirt": 0, "trouser": 1, "pullover": 2, "dress": 3, "coat": 4,
                   "sandal": 5, "shirt": 6, "sneaker": 7, "bag": 8, "boot": 9}


@dataclass
class Dataset:
    """Feature rows with labels, ids and a split tag per row."""

    features: np.ndarray
    labels: np.ndarray
    ids: list | None = None
    split: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise DimensionError(f"features must be 2-D, got shape {self.features.shape}")
        self.labels = np.asarray(self.labels)
        d = self.features.shape[0]
        if self.labels.shape[0] != d:
            raise DimensionError(f"{d} feature rows but {self.labels.shape[0]} labels")
        if self.ids is None:
            self.ids = list(range(d))
        if len(self.ids) != d:
            raise DimensionError(f"{d} feature rows but {len(self.ids)} ids")
        if self.split is None:
            self.split = np.full(d, "train", dtype=object)
        self.split = np.asarray(self.split, dtype=object)
        if self.split.shape[0] != d:
            raise DimensionError(f"{d} feature rows but {self.split.shape[0]} split tags")

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, mask_or_idx) -> "Dataset":
        idx = np.asarray(mask_or_idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return Dataset(self.features[idx], self.labels[idx], [self.ids[i] for i in idx],
                       self.split[idx], dict(self.meta))

    def part(self, tag: str) -> "Dataset":
        """Rows whose split tag equals ``tag``."""
        return self.subset(self.split == tag)

    def to_csv(self, path=None, meta: dict | None = None) -> str:
        """``id,label,split,f0..f{l-1}`` with a leading ``#`` JSON metadata line."""
        info = dict(self.meta)
        if meta:
            info.update(meta)
        buf = io.StringIO()
        buf.write("# " + json.dumps(info, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "label", "split"] + [f"f{j}" for j in range(self.n_features)])
        for rid, lab, tag, row in zip(self.ids, self.labels, self.split, self.features):
            lab = lab.item() if hasattr(lab, "item") else lab
            lab = repr(float(lab)) if isinstance(lab, float) else str(lab)
            w.writerow([rid, lab, tag] + [repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        meta, lines = {}, []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.startswith("#"):
                meta.update(json.loads(line[1:]))
            elif line.strip():
                lines.append(line)
        reader = csv.reader(lines)
        header = next(reader)
        if header[:2] != ["id", "label"]:
            raise ValueError(f"dataset CSV must start with id,label; got {header[:2]}")
        has_split = len(header) > 2 and header[2] == "split"
        start = 3 if has_split else 2
        ids, labels, split, rows = [], [], [], []
        for rec in reader:
            ids.append(int(rec[0]) if rec[0].lstrip("-").isdigit() else rec[0])
            labels.append(rec[1])
            split.append(rec[2] if has_split else "train")
            rows.append([float(v) for v in rec[start:]])
        try:
            lab = np.array([int(v) for v in labels])
        except ValueError:
            lab = np.array([float(v) for v in labels])
        feats = np.array(rows, dtype=float).reshape(len(ids), len(header) - start)
        return cls(feats, lab, ids, np.array(split, dtype=object), meta)


# --- IDX files ---------------------------------------------------------------


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def parse_idx(raw: bytes, expected_magic: int | None = None) -> np.ndarray:
    """Decode an unsigned-byte IDX container into an array.

    Raises
    ------
    IDXParseError
        On a bad magic number, a truncated header or a short payload; the
        error carries the byte offset where parsing stopped.
    """
    if len(raw) < 4:
        raise IDXParseError(f"file too short for the magic number ({len(raw)} bytes)", offset=len(raw))
    (magic,) = struct.unpack(">I", raw[:4])
    if expected_magic is not None and magic != expected_magic:
        raise IDXParseError(f"bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}", offset=0)
    if magic >> 8 != 0x08:
        raise IDXParseError(f"bad magic 0x{magic:08x}: only unsigned-byte IDX is supported", offset=0)
    ndim = magic & 0xFF
    end = 4 + 4 * ndim
    if len(raw) < end:
        raise IDXParseError(f"truncated header: {ndim} dimensions need {end} bytes", offset=len(raw))
    dims = struct.unpack(f">{ndim}I", raw[4:end])
    size = int(np.prod(dims)) if ndim else 1
    if len(raw) - end < size:
        raise IDXParseError(
            f"truncated payload: expected {size} bytes after header, found {len(raw) - end}",
            offset=len(raw),
        )
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=end).reshape(dims).copy()


def load_idx(path, expected_magic: int | None = None) -> np.ndarray:
    """Read a (optionally gzipped) unsigned-byte IDX file."""
    return parse_idx(_read_bytes(path), expected_magic)


def idx_bytes(array) -> bytes:
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255):
            raise RangeError("IDX unsigned-byte payload must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    header = struct.pack(">I", 0x0800 | arr.ndim) + struct.pack(f">{arr.ndim}I", *arr.shape)
    return header + arr.tobytes()


def write_idx(path, array, compress: bool | None = None) -> None:
    """Write an unsigned-byte IDX file; gzip when ``compress`` or the name ends in ``.gz``."""
    data = idx_bytes(array)
    if compress or (compress is None and str(path).endswith(".gz")):
        data = gzip.compress(data, mtime=0)
    Path(path).write_bytes(data)


def load_idx_images(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Images ``(N, rows, cols)`` with pixel values 0-255 and their ``(N,)`` labels."""
    images = load_idx(images_path, IMAGE_MAGIC)
    labels = load_idx(labels_path, LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IDXParseError(
            f"{images.shape[0]} images but {labels.shape[0]} labels", offset=4
        )
    return images, labels


# --- preprocessing ------------------------------------------------------------


def preprocess(image) -> np.ndarray:
    """Max-pool a 28x28 image over disjoint 7x7 patches and map pixels to angles.

    Returns the 16 patch maxima, row-major, scaled by ``2*pi/256`` so the
    result stays strictly below ``2*pi``.
    """
    img = np.asarray(image)
    if img.shape != (28, 28):
        raise DimensionError(f"expected a 28x28 image, got shape {img.shape}")
    return preprocess_batch(img[None])[0]


def preprocess_batch(images) -> np.ndarray:
    imgs = np.asarray(images, dtype=float)
    if imgs.ndim != 3 or imgs.shape[1:] != (28, 28):
        raise DimensionError(f"expected (N, 28, 28) images, got shape {imgs.shape}")
    if imgs.size and (imgs.min() < 0 or imgs.max() > 255):
        raise RangeError("pixel values must lie in [0, 255]")
    g = 28 // POOL
    pooled = imgs.reshape(-1, g, POOL, g, POOL).max(axis=(2, 4))
    return pooled.reshape(-1, g * g) * (TWO_PI / 256.0)


# --- Fashion-MNIST -----------------------------------------------------------


def _find(root: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
        if (root / name).exists():
            return root / name
    raise FileNotFoundError(f"no {stem}[.gz] under {root}")


def data_root(root=None) -> Path:
    """Directory holding the IDX files: ``root``, else ``$POSTVAR_DATA_DIR``, else ``./data``."""
    if root is not None:
        return Path(root)
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def fashion_mnist_available(root=None) -> bool:
    base = data_root(root)
    try:
        for stem in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                     "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"):
            _find(base, stem)
    except FileNotFoundError:
        return False
    return True


def _sample_classes(labels, classes, per_class, rng):
    chosen = []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if idx.shape[0] < per_class:
            raise RangeError(f"class {c} has {idx.shape[0]} samples, need {per_class}")
        chosen.append(idx[rng.permutation(idx.shape[0])[:per_class]])
    return np.concatenate(chosen)


def load_fashion_binary(
    root=None,
    classes=("coat", "shirt"),
    n_train: int = 200,
    n_test: int = 50,
    seed: int = 0,
) -> Dataset:
    """Two-class Fashion-MNIST subset, preprocessed to 16 angles.

    ``n_train`` per class come from the training file and ``n_test`` per class
    from the test file, each chosen by a seeded shuffle of that class's
    indices.  The first class is relabelled 0, the second 1.
    """
    base = data_root(root)
    codes = [FASHION_CLASSES[c] if isinstance(c, str) else int(c) for c in classes]
    rng = np.random.default_rng(seed)
    parts = []
    for tag, prefix, per_class in (("train", "train", n_train), ("test", "t10k", n_test)):
        images, labels = load_idx_images(_find(base, f"{prefix}-images-idx3-ubyte"),
                                         _find(base, f"{prefix}-labels-idx1-ubyte"))
        idx = _sample_classes(labels, codes, per_class, rng)
        y = (labels[idx] == codes[1]).astype(int)
        parts.append((preprocess_batch(images[idx]), y, [f"{tag}{i}" for i in idx],
                      np.full(idx.shape[0], tag, dtype=object)))
    feats, y, ids, split = (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                            parts[0][2] + parts[1][2], np.concatenate([p[3] for p in parts]))
    return Dataset(feats, y, ids, split, {"source": "fashion-mnist", "classes": list(classes),
                                          "n_train": n_train, "n_test": n_test, "seed": seed})


# --- synthetic kinds ---------------------------------------------------------------


def _balanced_labels(d: int, rng) -> np.ndarray:
    return rng.permutation(np.arange(d) % 2)


def synth_blobs(d: int = 100, n_features: int = 16, spread: float = 1.0, noise: float = 0.1,
                pair=(4, 5), rng=None) -> Dataset:
    """XOR-style two-class blobs with identical class means.

    Two centers per class differ only on the feature pair ``pair``: class 0
    sits at ``(c - s, c - s)`` and ``(c + s, c + s)``, class 1 at
    ``(c - s, c + s)`` and ``(c + s, c - s)`` with ``c = pi/2``.  Equal class
    means leave a linear model on raw features at chance, while products of
    cosines (a two-body Pauli feature) separate the classes.  Other features
    are zero.  Gaussian noise is added and the result wrapped into ``[0, 2*pi)``.
    """
    rng = np.random.default_rng(rng)
    i, j = pair
    if not (0 <= i < n_features and 0 <= j < n_features and i != j):
        raise RangeError(f"invalid informative pair {pair} for {n_features} features")
    if noise < 0 or not 0 < spread < np.pi / 2:
        raise RangeError("need noise >= 0 and 0 < spread < pi/2")
    y = _balanced_labels(d, rng)
    side = rng.permutation(np.arange(d) // 2 % 2)  # which of the two centers, balanced
    a = np.where(side == 0, -spread, spread)
    b = np.where(y == 0, a, -a)
    X = np.zeros((d, n_features))
    X[:, i] = np.pi / 2 + a
    X[:, j] = np.pi / 2 + b
    if noise > 0:
        X = X + rng.normal(scale=noise, size=X.shape)
    X = np.mod(X, TWO_PI)
    X[X >= TWO_PI] = 0.0
    return Dataset(X, y, meta={"kind": "blobs", "spread": spread, "noise": noise, "pair": list(pair)})


def synth_parity(d: int = 100, n_features: int = 16, bits=(4, 5, 6), rng=None) -> Dataset:
    """Angles in {0, pi} on ``bits`` with label equal to their parity; other features uniform."""
    rng = np.random.default_rng(rng)
    bits = list(bits)
    if not bits or any(not 0 <= b < n_features for b in bits):
        raise RangeError(f"invalid parity positions {bits} for {n_features} features")
    y = _balanced_labels(d, rng)
    B = rng.integers(0, 2, size=(d, len(bits)))
    B[:, -1] = (y + B[:, :-1].sum(axis=1)) % 2
    X = rng.uniform(0, TWO_PI, size=(d, n_features))
    X[:, bits] = np.pi * B
    return Dataset(X, y, meta={"kind": "parity", "bits": bits})


def synth_linear(d: int = 100, n_features: int = 16, weights=None, feature_map=None,
                 noise: float = 0.0, rng=None) -> Dataset:
    """Regression targets ``y = <w, phi(x)>`` for uniform angles ``x``.

    ``phi`` defaults to the identity.  Passing a feature map (for instance an
    exact post-variational transform) plants the weights in that feature space.
    """
    rng = np.random.default_rng(rng)
    X = rng.uniform(0, TWO_PI, size=(d, n_features))
    Phi = X if feature_map is None else np.asarray(feature_map(X), dtype=float)
    if weights is None:
        weights = rng.normal(size=Phi.shape[1])
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (Phi.shape[1],):
        raise DimensionError(f"weights must have length {Phi.shape[1]}, got {weights.shape}")
    y = Phi @ weights
    if noise > 0:
        y = y + rng.normal(scale=noise, size=d)
    return Dataset(X, y, meta={"kind": "linear", "weights": weights.tolist(), "noise": noise})


def synth_dataset(kind: str, params: dict | None = None, rng=None) -> Dataset:
    """Dispatch to :func:`synth_blobs`, :func:`synth_parity` or :func:`synth_linear`."""
    params = dict(params or {})
    makers = {"blobs": synth_blobs, "parity": synth_parity, "linear": synth_linear}
    if kind not in makers:
        raise ValueError(f"kind must be one of {SYNTH_KINDS}, got {kind!r}")
    if params.get("d", 1) < 1:
        raise RangeError(f"d must be >= 1, got {params['d']}")
    return makers[kind](rng=rng, **params)


def train_test_split_tags(d: int, test_fraction: float, rng) -> np.ndarray:
    """Split tags with ``round(d * test_fraction)`` test rows chosen at random."""
    rng = np.random.default_rng(rng)
    tags = np.full(d, "train", dtype=object)
    tags[rng.permutation(d)[: int(round(d * test_fraction))]] = "test"
    return tags
