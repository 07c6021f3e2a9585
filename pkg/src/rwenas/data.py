"""CIFAR-10 binary archives: loading, normalization, stratified splits.

The on-disk format is fixed 3073-byte records: one label byte (0..9)
followed by 3072 pixel bytes as three 1024-byte channel planes (red,
green, blue), each row-major 32x32.  An archive directory holds five
training batch files and one test batch file.

A synthetic generator can fabricate a full archive in the same binary
format: class-dependent oriented gratings with per-class color casts,
random phase, and pixel noise.  It exists so the full pipeline (loader
included) can run in environments where the real dataset is absent.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    CorruptRecord,
    DegenerateInput,
    EmptyValidation,
    InvalidStats,
    MissingFile,
    TooFewSamples,
)

RECORD_BYTES = 3073
IMAGE_SHAPE = (3, 32, 32)
NUM_CLASSES = 10
TRAIN_BATCH_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_BATCH_FILE = "test_batch.bin"


@dataclass(frozen=True)
class LabeledImageSet:
    """Images in (n, channels, height, width) layout with integer labels.

    Arrays are marked read-only; `images` is uint8 raw pixels straight
    from disk or float32 after normalization.
    """

    images: np.ndarray
    labels: np.ndarray
    provenance: str

    def __post_init__(self):
        if self.images.ndim != 4 or len(self.images) != len(self.labels):
            raise DegenerateInput(
                f"images {self.images.shape} inconsistent with labels {self.labels.shape}"
            )
        for arr in (self.images, self.labels):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class SplitData:
    train: LabeledImageSet
    validation: LabeledImageSet


def parse_records(raw: bytes, file: str) -> tuple[np.ndarray, np.ndarray]:
    """Decode concatenated 3073-byte records into (images, labels)."""
    if len(raw) == 0 or len(raw) % RECORD_BYTES:
        offset = (len(raw) // RECORD_BYTES) * RECORD_BYTES
        raise CorruptRecord(
            file, offset, f"file size {len(raw)} is not a multiple of {RECORD_BYTES}"
        )
    flat = np.frombuffer(raw, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = flat[:, 0].astype(np.int64)
    bad = np.nonzero(labels >= NUM_CLASSES)[0]
    if bad.size:
        first = int(bad[0])
        raise CorruptRecord(
            file, first * RECORD_BYTES, f"label byte {int(labels[first])} exceeds 9"
        )
    images = flat[:, 1:].reshape(-1, *IMAGE_SHAPE)
    return images, labels


def serialize_records(images: np.ndarray, labels: np.ndarray) -> bytes:
    """Inverse of parse_records: emit concatenated 3073-byte records."""
    if images.dtype != np.uint8 or images.shape[1:] != IMAGE_SHAPE:
        raise DegenerateInput(f"images must be uint8 (n, 3, 32, 32), got {images.shape}")
    n = len(images)
    out = np.empty((n, RECORD_BYTES), dtype=np.uint8)
    out[:, 0] = labels
    out[:, 1:] = images.reshape(n, -1)
    return out.tobytes()


def _archive_root(path: str) -> str:
    # accept either the archive directory itself or its parent
    nested = os.path.join(path, "cifar-10-batches-bin")
    if os.path.isfile(os.path.join(nested, TRAIN_BATCH_FILES[0])):
        return nested
    return path


def load_cifar10(path: str, split: str = "train") -> LabeledImageSet:
    """Load the train or test side of a CIFAR-10 binary archive.

    `path` is the archive directory (or its parent).  All six batch
    files must exist; only the requested split is decoded.
    """
    if split not in ("train", "test"):
        raise DegenerateInput(f"split must be 'train' or 'test', got {split!r}")
    if not os.path.isdir(path):
        raise MissingFile(path)
    root = _archive_root(path)
    all_files = (*TRAIN_BATCH_FILES, TEST_BATCH_FILE)
    for name in all_files:
        if not os.path.isfile(os.path.join(root, name)):
            raise MissingFile(os.path.join(root, name))
    wanted = TRAIN_BATCH_FILES if split == "train" else (TEST_BATCH_FILE,)
    image_parts, label_parts = [], []
    for name in wanted:
        full = os.path.join(root, name)
        with open(full, "rb") as fh:
            images, labels = parse_records(fh.read(), full)
        image_parts.append(images)
        label_parts.append(labels)
    return LabeledImageSet(
        images=np.concatenate(image_parts),
        labels=np.concatenate(label_parts),
        provenance=f"cifar10[{split}]:{root}",
    )


def channel_stats(dataset: LabeledImageSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel (mean, std) of pixels scaled to [0, 1].

    Computed in float64 over every pixel of the set; std is the
    population standard deviation.
    """
    scaled = dataset.images.astype(np.float64) / 255.0
    mean = scaled.mean(axis=(0, 2, 3))
    std = scaled.std(axis=(0, 2, 3))
    return mean, std


def normalize(
    dataset: LabeledImageSet, mean: np.ndarray, std: np.ndarray
) -> LabeledImageSet:
    """Map uint8 pixels to float32 (x/255 - mean) / std per channel."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if mean.shape != (3,) or std.shape != (3,):
        raise InvalidStats(f"stats must be per-channel triples, got {mean.shape}, {std.shape}")
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
        raise InvalidStats("normalization stats must be finite")
    if np.any(std <= 0):
        raise InvalidStats("std must be strictly positive")
    scaled = dataset.images.astype(np.float32) / np.float32(255.0)
    out = (scaled - mean[:, None, None].astype(np.float32)) / std[:, None, None].astype(
        np.float32
    )
    return LabeledImageSet(
        images=out.astype(np.float32),
        labels=dataset.labels.copy(),
        provenance=f"{dataset.provenance}|normalized",
    )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    subsample: tuple[int, int] | None = None  # (train, validation) targets
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DegenerateInput("train_fraction must lie strictly between 0 and 1")
        if self.subsample is not None:
            if len(self.subsample) != 2 or any(s < 1 for s in self.subsample):
                raise DegenerateInput("subsample must be two positive counts")
            object.__setattr__(self, "subsample", tuple(int(s) for s in self.subsample))


def _per_class_quota(total: int, num_classes: int) -> list[int]:
    base, extra = divmod(total, num_classes)
    return [base + (1 if c < extra else 0) for c in range(num_classes)]


def split(dataset: LabeledImageSet, spec: SplitSpec) -> SplitData:
    """Stratified train/validation split, optionally subsampled.

    Per class: shuffle, put round(train_fraction * count) samples on the
    train side, the rest on validation; subsampling then keeps a fixed
    per-class quota from each side.  Final index order is shuffled so a
    sequential reader does not see class-blocked batches.
    """
    rng = np.random.default_rng(spec.seed)
    labels = dataset.labels
    classes = np.unique(labels)
    quotas = None
    if spec.subsample is not None:
        quotas = (
            _per_class_quota(spec.subsample[0], len(classes)),
            _per_class_quota(spec.subsample[1], len(classes)),
        )
    train_parts, val_parts = [], []
    for slot, cls in enumerate(classes):
        members = np.nonzero(labels == cls)[0]
        perm = members[rng.permutation(len(members))]
        n_train = int(np.floor(spec.train_fraction * len(members) + 0.5))
        pools = (perm[:n_train], perm[n_train:])
        for side, (pool, parts) in enumerate(
            zip(pools, (train_parts, val_parts))
        ):
            if quotas is not None:
                need = quotas[side][slot]
                if len(pool) < need:
                    raise TooFewSamples(
                        f"class {int(cls)} has {len(pool)} samples on side {side}, need {need}"
                    )
                pool = pool[:need]
            parts.append(pool)
    train_idx = np.concatenate(train_parts) if train_parts else np.array([], dtype=np.int64)
    val_idx = np.concatenate(val_parts) if val_parts else np.array([], dtype=np.int64)
    train_idx = train_idx[rng.permutation(len(train_idx))]
    val_idx = val_idx[rng.permutation(len(val_idx))]
    if len(val_idx) == 0:
        raise EmptyValidation()
    if len(train_idx) == 0:
        raise TooFewSamples("train side of the split is empty")
    tag = f"split(frac={spec.train_fraction},sub={spec.subsample},seed={spec.seed})"
    return SplitData(
        train=LabeledImageSet(
            images=dataset.images[train_idx],
            labels=labels[train_idx],
            provenance=f"{dataset.provenance}|{tag}[train]",
        ),
        validation=LabeledImageSet(
            images=dataset.images[val_idx],
            labels=labels[val_idx],
            provenance=f"{dataset.provenance}|{tag}[validation]",
        ),
    )


# ---------------------------------------------------------------------------
# synthetic archive generation

_PALETTE = np.array(
    [
        [0.95, 0.30, 0.30],
        [0.30, 0.95, 0.30],
        [0.30, 0.30, 0.95],
        [0.90, 0.90, 0.25],
        [0.90, 0.25, 0.90],
        [0.25, 0.90, 0.90],
        [0.95, 0.60, 0.20],
        [0.20, 0.60, 0.95],
        [0.75, 0.75, 0.75],
        [0.55, 0.95, 0.55],
    ]
)

_SHIFT = np.array(
    [
        [0.10, -0.06, -0.06],
        [-0.06, 0.10, -0.06],
        [-0.06, -0.06, 0.10],
        [0.08, 0.08, -0.08],
        [0.08, -0.08, 0.08],
        [-0.08, 0.08, 0.08],
        [0.10, 0.02, -0.10],
        [-0.10, 0.02, 0.10],
        [0.00, 0.00, 0.00],
        [-0.04, 0.10, -0.04],
    ]
)


def synthetic_image_set(n: int, seed: int, provenance: str = "synthetic") -> LabeledImageSet:
    """Fabricated 10-class image set with learnable class structure.

    Class c renders a sinusoidal grating at orientation c*pi/10 with a
    class-specific frequency and per-channel contrast, a small constant
    color shift, random phase and amplitude, plus pixel noise.  Pixels
    are quantized to uint8.
    """
    if n < 1:
        raise DegenerateInput("n must be >= 1")
    rng = np.random.default_rng(seed)
    labels = np.arange(n, dtype=np.int64) % NUM_CLASSES
    labels = labels[rng.permutation(n)]
    coords = np.linspace(-1.0, 1.0, IMAGE_SHAPE[1])
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    images = np.empty((n, *IMAGE_SHAPE), dtype=np.float64)
    for cls in range(NUM_CLASSES):
        rows = np.nonzero(labels == cls)[0]
        if rows.size == 0:
            continue
        theta = np.pi * cls / NUM_CLASSES
        freq = 1.5 + 0.6 * (cls % 4)
        proj = xx * np.cos(theta) + yy * np.sin(theta)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=rows.size)
        amp = rng.uniform(0.45, 1.0, size=rows.size)
        grating = np.sin(
            2.0 * np.pi * freq * proj[None, :, :] + phase[:, None, None]
        ) * amp[:, None, None]
        tint = _PALETTE[cls][None, :, None, None]
        shift = _SHIFT[cls][None, :, None, None]
        base = 0.5 + 0.55 * shift + 0.24 * tint * grating[:, None, :, :]
        noise = rng.normal(0.0, 0.20, size=(rows.size, *IMAGE_SHAPE))
        images[rows] = np.clip(base + noise, 0.0, 1.0)
    quantized = np.round(images * 255.0).astype(np.uint8)
    return LabeledImageSet(images=quantized, labels=labels, provenance=provenance)


def write_archive(
    directory: str, train: LabeledImageSet, test: LabeledImageSet
) -> str:
    """Write the six standard batch files; train must split into 5 evenly."""
    if len(train) % len(TRAIN_BATCH_FILES):
        raise DegenerateInput(
            f"train size {len(train)} not divisible by {len(TRAIN_BATCH_FILES)}"
        )
    os.makedirs(directory, exist_ok=True)
    per_batch = len(train) // len(TRAIN_BATCH_FILES)
    for i, name in enumerate(TRAIN_BATCH_FILES):
        lo, hi = i * per_batch, (i + 1) * per_batch
        with open(os.path.join(directory, name), "wb") as fh:
            fh.write(serialize_records(train.images[lo:hi], train.labels[lo:hi]))
    with open(os.path.join(directory, TEST_BATCH_FILE), "wb") as fh:
        fh.write(serialize_records(test.images, test.labels))
    return directory


def make_synthetic_archive(
    directory: str, n_train: int = 50000, n_test: int = 10000, seed: int = 0
) -> str:
    """Fabricate a complete archive on disk in the standard binary format."""
    train = synthetic_image_set(n_train, seed=seed, provenance="synthetic[train]")
    test = synthetic_image_set(n_test, seed=seed + 1, provenance="synthetic[test]")
    return write_archive(directory, train, test)
