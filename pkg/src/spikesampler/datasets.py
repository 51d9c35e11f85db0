"""Training data: oriented bars, handwritten digits, imbalanced subsets.

Images are flat binary pixel vectors (row-major, uint8).  The bars generator
produces three stroke classes whose pixel sets either all cross a shared
central region ("easy") or live in pairwise disjoint zones ("hard"); the
disjoint/overlapping distinction is guaranteed by construction, including
under the per-image +-1 position jitter.
"""

import struct
from dataclasses import dataclass

import numpy as np


@dataclass
class ImageDataset:
    width: int
    height: int
    pixels: np.ndarray           # (n_items, width*height) uint8 in {0, 1}
    labels: np.ndarray | None    # (n_items,) int64 or None

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.ndim != 2 or px.shape[1] != self.width * self.height:
            raise ValueError(
                f"pixels must be (n, {self.width * self.height}), got {px.shape}"
            )
        if np.any(px > 1):
            raise ValueError("pixels must be binary")
        self.pixels = px
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (px.shape[0],):
                raise ValueError("labels must match the number of items")
            self.labels = lab

    def __len__(self):
        return self.pixels.shape[0]

    @property
    def n_pixels(self):
        return self.width * self.height

    def class_counts(self) -> dict:
        if self.labels is None:
            return {}
        vals, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}

    def images(self):
        return self.pixels.reshape(-1, self.height, self.width)


@dataclass(frozen=True)
class ClampMask:
    """Per-visible-unit entry: 1 = clamp on, 0 = clamp off, -1 = free."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int64)
        if v.ndim != 1 or np.any((v < -1) | (v > 1)):
            raise ValueError("mask entries must be -1 (free), 0 or 1")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def as_optionals(self):
        return [None if v == -1 else int(v) for v in self.values]


# ---------------------------------------------------------------------------
# Oriented bars


def _bar_pixels(side, cls, jitter, mode):
    """Pixel index set of one stroke.  Strokes are 2 pixels wide.

    easy: full-length horizontal/vertical/diagonal strokes crossing the
    image center, so every pair of classes shares pixels.
    hard: strokes of comparable extent confined to pairwise disjoint
    quadrants (horizontal top-right, vertical bottom-left, anti-diagonal
    bottom-right); disjointness holds for every jitter in {-1, 0, 1}.
    """
    img = np.zeros((side, side), dtype=np.uint8)
    m = side // 2
    if mode == "easy":
        if cls == 0:
            img[m - 1 + jitter : m + 1 + jitter, :] = 1
        elif cls == 1:
            img[:, m - 1 + jitter : m + 1 + jitter] = 1
        else:
            for i in range(side):
                for d in (0, 1):
                    j = i + jitter + d - 1
                    if 0 <= j < side:
                        img[i, j] = 1
    else:
        if cls == 0:
            r = 1 + jitter
            img[r : r + 2, 4:side] = 1
        elif cls == 1:
            c = 1 + jitter
            img[4:side, c : c + 2] = 1
        else:
            for i in range(side - 4):
                r = 4 + i
                c = side - 1 - i - jitter
                for d in (0, 1):
                    if 4 <= c - d < side:
                        img[r, c - d] = 1
    return img.reshape(-1)


def bar_templates(side, mode) -> np.ndarray:
    """Canonical (zero-jitter) stroke of each class, shape (3, side*side)."""
    if mode not in ("easy", "hard"):
        raise ValueError(f"mode must be 'easy' or 'hard', got {mode!r}")
    if side < 6:
        raise ValueError("side must be at least 6 for disjoint placement")
    return np.stack([_bar_pixels(side, c, 0, mode) for c in range(3)])


def generate_bars(side, mode, n_per_class, rng) -> ImageDataset:
    """Three classes of width-2 strokes with per-image +-1 position jitter."""
    bar_templates(side, mode)  # validates side and mode
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    pixels, labels = [], []
    for cls in range(3):
        for _ in range(n_per_class):
            jitter = int(rng.integers(-1, 2))
            pixels.append(_bar_pixels(side, cls, jitter, mode))
            labels.append(cls)
    order = rng.permutation(len(labels))
    return ImageDataset(side, side, np.stack(pixels)[order], np.asarray(labels)[order])


# ---------------------------------------------------------------------------
# IDX (MNIST container) ingestion


class IdxFormatError(ValueError):
    pass


def _read_idx(path, magic_expected, n_dims):
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 * (1 + n_dims):
        raise IdxFormatError(f"{path}: truncated header")
    magic = struct.unpack(">i", data[:4])[0]
    if magic != magic_expected:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{magic_expected:08x}"
        )
    dims = struct.unpack(f">{n_dims}i", data[4 : 4 + 4 * n_dims])
    total = int(np.prod(dims))
    body = np.frombuffer(data, dtype=np.uint8, offset=4 + 4 * n_dims)
    if body.shape[0] != total:
        raise IdxFormatError(
            f"{path}: payload has {body.shape[0]} bytes, header promises {total}"
        )
    return body.reshape(dims)


def load_mnist_idx(images_path, labels_path) -> ImageDataset:
    """Read big-endian IDX image/label files; binarize at half max intensity."""
    raw = _read_idx(images_path, 0x00000803, 3)
    labels = _read_idx(labels_path, 0x00000801, 1)
    if raw.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image count {raw.shape[0]} does not match label count {labels.shape[0]}"
        )
    n, h, w = raw.shape
    thresh = raw.max() / 2.0
    pixels = (raw.reshape(n, h * w) > thresh).astype(np.uint8)
    return ImageDataset(w, h, pixels, labels.astype(np.int64))


# ---------------------------------------------------------------------------
# Subsetting and clamping


def make_imbalanced(dataset: ImageDataset, class_counts: dict, rng) -> ImageDataset:
    """Class-stratified random subset without replacement, shuffled."""
    if dataset.labels is None:
        raise ValueError("dataset has no labels to stratify on")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    chosen = []
    for cls, count in class_counts.items():
        pool = np.flatnonzero(dataset.labels == cls)
        if pool.shape[0] < count:
            raise ValueError(
                f"class {cls}: requested {count} items, only {pool.shape[0]} available"
            )
        chosen.append(rng.choice(pool, size=count, replace=False))
    idx = np.concatenate(chosen)
    idx = idx[rng.permutation(idx.shape[0])]
    return ImageDataset(dataset.width, dataset.height,
                        dataset.pixels[idx], dataset.labels[idx])


def half_clamp_mask(width, height, half, reference) -> ClampMask:
    """Clamp the chosen image half to the reference image's pixel values.

    'lower' is the bottom of the image (larger row indices).
    """
    ref = np.asarray(reference, dtype=np.int64).reshape(-1)
    if ref.shape[0] != width * height:
        raise ValueError("reference image size does not match width*height")
    if half not in ("lower", "upper"):
        raise ValueError("half must be 'lower' or 'upper'")
    rows = np.arange(height)
    clamp_rows = rows >= height // 2 if half == "lower" else rows < height // 2
    mask = np.full(width * height, -1, dtype=np.int64)
    sel = np.repeat(clamp_rows, width)
    mask[sel] = ref[sel]
    return ClampMask(mask)


def train_test_split(dataset: ImageDataset, n_test, rng) -> tuple:
    """Seeded shuffle-and-slice split into (train, test)."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if not 0 < n_test < len(dataset):
        raise ValueError("n_test must be between 1 and the dataset size")
    order = rng.permutation(len(dataset))
    test, train = order[:n_test], order[n_test:]
    lab = dataset.labels
    return (
        ImageDataset(dataset.width, dataset.height, dataset.pixels[train],
                     None if lab is None else lab[train]),
        ImageDataset(dataset.width, dataset.height, dataset.pixels[test],
                     None if lab is None else lab[test]),
    )


def to_training_vectors(dataset: ImageDataset, n_label=0) -> np.ndarray:
    """Rows [pixels | one-hot label] for the trainer; n_label = 0 drops labels."""
    if n_label == 0:
        return dataset.pixels.astype(np.float64)
    if dataset.labels is None:
        raise ValueError("dataset has no labels")
    classes = np.unique(dataset.labels)
    if classes.shape[0] > n_label:
        raise ValueError(f"{classes.shape[0]} classes do not fit {n_label} label units")
    onehot = np.zeros((len(dataset), n_label))
    for j, cls in enumerate(classes):
        onehot[dataset.labels == cls, j] = 1.0
    return np.concatenate([dataset.pixels.astype(np.float64), onehot], axis=1)


def label_classes(dataset: ImageDataset) -> np.ndarray:
    """Sorted class values, index = label-unit position in training vectors."""
    if dataset.labels is None:
        raise ValueError("dataset has no labels")
    return np.unique(dataset.labels)


# ---------------------------------------------------------------------------
# Bundled handwritten-digit corpus (desk-scale stand-in when no IDX files
# are available): the 8x8 digits shipped with scikit-learn, upsampled 3x to
# 24x24, padded to 28x28, binarized at half max intensity, and expanded with
# integer shifts.


def upsampled_digits(classes=None, shifts=(-2, 0, 2), rng=None) -> ImageDataset:
    from sklearn.datasets import load_digits

    raw = load_digits()
    images = raw.images  # (n, 8, 8), intensities 0..16
    labels = raw.target.astype(np.int64)
    if classes is not None:
        keep = np.isin(labels, list(classes))
        images, labels = images[keep], labels[keep]

    big = np.kron(images, np.ones((1, 3, 3)))      # (n, 24, 24)
    big = np.pad(big, ((0, 0), (2, 2), (2, 2)))    # (n, 28, 28)
    binary = (big > big.max() / 2.0).astype(np.uint8)

    out_px, out_lab = [], []
    for dy in shifts:
        for dx in shifts:
            out_px.append(np.roll(binary, (dy, dx), axis=(1, 2)))
            out_lab.append(labels)
    pixels = np.concatenate(out_px).reshape(-1, 28 * 28)
    labs = np.concatenate(out_lab)
    if rng is not None:
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        order = rng.permutation(pixels.shape[0])
        pixels, labs = pixels[order], labs[order]
    return ImageDataset(28, 28, pixels, labs)


def digit_corpus(classes, rng, mnist_dir=None) -> ImageDataset:
    """28x28 handwritten digits: real MNIST IDX files when available
    (mnist_dir or $MNIST_DIR), else the bundled upsampled corpus."""
    import os

    directory = mnist_dir or os.environ.get("MNIST_DIR")
    if directory:
        images = os.path.join(directory, "train-images-idx3-ubyte")
        labels = os.path.join(directory, "train-labels-idx1-ubyte")
        if os.path.exists(images) and os.path.exists(labels):
            ds = load_mnist_idx(images, labels)
            keep = np.isin(ds.labels, list(classes))
            return ImageDataset(ds.width, ds.height, ds.pixels[keep], ds.labels[keep])
    return upsampled_digits(classes, rng=rng)
