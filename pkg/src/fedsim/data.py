"""Datasets, IDX file ingestion, synthetic data, and non-IID client partitions.

Everything here is a pure function over immutable inputs.  Randomized
operations take an explicit integer seed and build their own generator,
so repeated calls with the same arguments are bit-identical and calls
from multiple threads never share state.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

GZIP_MAGIC = b"\x1f\x8b"


class IdxFormatError(ValueError):
    """Raised when an IDX file has a bad magic number, is truncated, or
    when the image and label files disagree on the sample count."""


class ClassExhaustedError(ValueError):
    """Raised when a partition draw asks for more samples of a class than
    the dataset has left."""

    def __init__(self, label: int, requested: int, available: int):
        self.label = label
        self.requested = requested
        self.available = available
        super().__init__(
            f"class {label} exhausted: requested {requested} samples, "
            f"only {available} remain"
        )


@dataclass(frozen=True)
class Dataset:
    """A labeled feature matrix.

    Attributes:
        features: float array of shape [num_samples, dim].
        labels: int array of shape [num_samples], values in [0, num_classes).
        num_classes: number of distinct class ids the labels may take.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError("features must be a non-empty [n, dim] matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must be a vector matching the sample count")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def select(self, indices: np.ndarray) -> "Dataset":
        """Materialize the subset at `indices` as a new Dataset."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class Partition:
    """Disjoint per-client index sets into one Dataset."""

    shards: list = field(default_factory=list)  # list of int index arrays
    seed: int = 0

    def __post_init__(self):
        seen: set[int] = set()
        for i, shard in enumerate(self.shards):
            if len(shard) == 0:
                raise ValueError(f"shard {i} is empty")
            ids = set(int(v) for v in shard)
            if seen & ids:
                raise ValueError(f"shard {i} overlaps an earlier shard")
            seen |= ids

    @property
    def num_clients(self) -> int:
        return len(self.shards)

    def sizes(self) -> list[int]:
        return [len(s) for s in self.shards]


def _open_maybe_gzip(path):
    """Open a file raw, or through gzip when it starts with the gzip magic."""
    with open(path, "rb") as f:
        head = f.read(2)
    if head == GZIP_MAGIC:
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n: int, path, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise IdxFormatError(f"{path}: truncated file while reading {what}")
    return buf


def load_idx(images_path, labels_path) -> Dataset:
    """Load an IDX image/label file pair (gzipped files are detected).

    Images: big-endian magic 0x00000803, count, rows, cols, then unsigned
    bytes row-major.  Labels: magic 0x00000801, count, then unsigned byte
    labels.  Pixels are scaled to [0, 1]; each image becomes one flat
    feature row of length rows*cols.
    """
    with _open_maybe_gzip(images_path) as f:
        magic, count, rows, cols = struct.unpack(
            ">IIII", _read_exact(f, 16, images_path, "image header")
        )
        if magic != IDX_IMAGES_MAGIC:
            raise IdxFormatError(
                f"{images_path}: bad magic 0x{magic:08x}, "
                f"expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        raw = _read_exact(f, count * rows * cols, images_path, "pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)

    with _open_maybe_gzip(labels_path) as f:
        magic, label_count = struct.unpack(
            ">II", _read_exact(f, 8, labels_path, "label header")
        )
        if magic != IDX_LABELS_MAGIC:
            raise IdxFormatError(
                f"{labels_path}: bad magic 0x{magic:08x}, "
                f"expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        raw = _read_exact(f, label_count, labels_path, "label data")
    labels = np.frombuffer(raw, dtype=np.uint8)

    if label_count != count:
        raise IdxFormatError(
            f"count mismatch: {images_path} has {count} images but "
            f"{labels_path} has {label_count} labels"
        )

    features = pixels.astype(np.float64) / 255.0
    num_classes = int(labels.max()) + 1
    return Dataset(features, labels.astype(np.int64), num_classes)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path):
    """Write uint8 images [n, rows, cols] and labels [n] as an IDX pair.

    Paths ending in .gz are written gzip-compressed.  Inverse of
    `load_idx` up to the [0, 1] pixel scaling.
    """
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError("images must have shape [n, rows, cols]")
    if labels.shape != (images.shape[0],):
        raise ValueError("labels must match the image count")
    n, rows, cols = images.shape

    def _writer(path):
        if str(path).endswith(".gz"):
            # mtime pinned so rewrites are byte-identical
            return gzip.GzipFile(path, "wb", mtime=0)
        return open(path, "wb")

    with _writer(images_path) as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        f.write(images.tobytes())
    with _writer(labels_path) as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        f.write(labels.tobytes())


def generate_synthetic(
    C: int, dim: int, per_class: int, spread: float, seed: int
) -> Dataset:
    """Gaussian class blobs around well-separated class means.

    Class means are drawn uniformly in [-3, 3]^dim and samples are
    normal around them with standard deviation `spread`, so class
    separability is directly controlled by `spread`.  Samples are laid
    out in class blocks: all of class 0 first, then class 1, and so on.
    Deterministic given `seed`.
    """
    if C < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("need at least 1 sample per class")
    if spread <= 0:
        raise ValueError("spread must be positive")
    rng = np.random.default_rng(seed)
    means = rng.uniform(-3.0, 3.0, size=(C, dim))
    features = np.concatenate(
        [means[c] + spread * rng.standard_normal((per_class, dim)) for c in range(C)]
    )
    labels = np.repeat(np.arange(C, dtype=np.int64), per_class)
    return Dataset(features, labels, C)


def partition_non_iid(
    ds: Dataset,
    N: int,
    classes_range: tuple[int, int],
    samples_range: tuple[int, int],
    seed: int,
) -> Partition:
    """Assign each client a random number of classes and samples per class.

    Client i draws k_i ~ Uniform{c_min..c_max} distinct classes, then for
    each assigned class draws Uniform{s_min..s_max} samples without
    replacement from that class's remaining pool, so shards are disjoint.
    Deterministic given `seed`.

    Raises ClassExhaustedError when a class pool cannot cover a draw.
    """
    c_min, c_max = classes_range
    s_min, s_max = samples_range
    if not (1 <= c_min <= c_max <= ds.num_classes):
        raise ValueError(
            f"classes_range must satisfy 1 <= c_min <= c_max <= {ds.num_classes}"
        )
    if s_min < 1 or s_min > s_max:
        raise ValueError("samples_range must satisfy 1 <= s_min <= s_max")
    if N < 1:
        raise ValueError("need at least one client")

    rng = np.random.default_rng(seed)
    pools = {
        c: list(np.flatnonzero(ds.labels == c)) for c in range(ds.num_classes)
    }
    for c in pools:
        rng.shuffle(pools[c])

    shards = []
    for _ in range(N):
        k = int(rng.integers(c_min, c_max + 1))
        classes = rng.choice(ds.num_classes, size=k, replace=False)
        taken: list[int] = []
        for c in sorted(int(c) for c in classes):
            m = int(rng.integers(s_min, s_max + 1))
            pool = pools[c]
            if m > len(pool):
                raise ClassExhaustedError(c, m, len(pool))
            taken.extend(pool[:m])
            del pool[:m]
        shards.append(np.array(sorted(taken), dtype=np.intp))
    return Partition(shards=shards, seed=seed)


def stratified_holdout(
    ds: Dataset, fractions: tuple[float, ...], seed: int
) -> list[np.ndarray]:
    """Carve stratified index sets off a dataset, plus the remainder.

    For each fraction f, every class contributes max(1, floor(f * count))
    samples.  Returns len(fractions)+1 disjoint index arrays; the last
    one holds all remaining indices.  Deterministic given `seed`.
    """
    if any(f < 0 for f in fractions) or sum(fractions) >= 1.0:
        raise ValueError("fractions must be nonnegative and sum to < 1")
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(len(fractions) + 1)]
    for c in range(ds.num_classes):
        pool = np.flatnonzero(ds.labels == c)
        rng.shuffle(pool)
        start = 0
        for b, f in enumerate(fractions):
            n = max(1, int(f * len(pool))) if f > 0 else 0
            buckets[b].extend(pool[start : start + n])
            start += n
        buckets[-1].extend(pool[start:])
    return [np.array(sorted(b), dtype=np.intp) for b in buckets]


def stratified_subset(ds: Dataset, size: int, seed: int) -> Dataset:
    """A random subset of `size` samples keeping class proportions.

    Per-class quotas are the proportional shares rounded down, with the
    leftover seats handed to the classes with the largest fractional
    remainders (ties broken by class id).  Deterministic given `seed`.
    """
    if not 1 <= size <= ds.num_samples:
        raise ValueError(
            f"subset size must lie in [1, {ds.num_samples}], got {size}"
        )
    counts = np.bincount(ds.labels, minlength=ds.num_classes)
    exact = size * counts / ds.num_samples
    quota = np.floor(exact).astype(np.intp)
    leftover = size - int(quota.sum())
    for c in np.argsort(quota - exact, kind="stable")[:leftover]:
        quota[c] += 1
    rng = np.random.default_rng(seed)
    picked: list[int] = []
    for c in range(ds.num_classes):
        pool = np.flatnonzero(ds.labels == c)
        rng.shuffle(pool)
        picked.extend(pool[: quota[c]])
    return ds.select(np.array(sorted(picked), dtype=np.intp))
