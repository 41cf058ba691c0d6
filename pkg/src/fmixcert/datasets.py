"""Labeled image sets: synthetic shapes, CIFAR binary records, IMGF1 directories."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidParameterError
from .imageio import read_imgf, write_imgf
from .numerics import Rng

SHAPE_NAMES = ("disk", "square", "cross", "stripes")
CIFAR_RECORD = 3073
INDEX_HEADER = ["id", "label", "path"]
GRAIN = 0.04


@dataclass
class LabeledDataset:
    images: np.ndarray          # (N, H, W, C) float64 in [0, 1]
    labels: np.ndarray          # (N,) int64
    num_classes: int
    split: str = ""
    ids: list[str] | None = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("label outside [0, num_classes)")
        if self.ids is None:
            self.ids = [f"{i:05d}" for i in range(len(self.labels))]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.images[idx], self.labels[idx], self.num_classes, self.split,
                              [self.ids[i] for i in idx])

    def shuffled(self, rng: Rng) -> "LabeledDataset":
        return self.subset(rng.permutation(len(self)))


def _render_shape(kind: int, d: int, rng: Rng) -> np.ndarray:
    rr, cc = np.meshgrid(np.arange(d) + 0.5, np.arange(d) + 0.5, indexing="ij")
    cy, cx = d / 2 + rng.uniform(-0.1, 0.1, 2) * d
    if kind == 0:
        radius = rng.uniform(0.2, 0.3) * d
        return (rr - cy) ** 2 + (cc - cx) ** 2 <= radius ** 2
    if kind == 1:
        half = rng.uniform(0.25, 0.35) * d
        return (np.abs(rr - cy) <= half) & (np.abs(cc - cx) <= half)
    if kind == 2:
        arm = rng.uniform(0.3, 0.4) * d
        width = rng.uniform(0.06, 0.1) * d
        horiz = (np.abs(rr - cy) <= width) & (np.abs(cc - cx) <= arm)
        vert = (np.abs(cc - cx) <= width) & (np.abs(rr - cy) <= arm)
        return horiz | vert
    period = int(rng.integers(2)) + 2
    offset = int(rng.integers(period))
    axis = rr if rng.uniform() < 0.5 else cc
    return ((np.floor(axis).astype(int) + offset) // max(period // 2, 1)) % 2 == 0


def synth_shapes(n_per_class: int, d: int, num_classes: int, rng: Rng,
                 channels: int = 3, split: str = "train") -> LabeledDataset:
    """Procedural primitives: disk (0), square (1), cross (2), stripes (3).

    Each image has a dark random background, a bright random colour and a
    little per-pixel grain (so the spectrum is broadband, never a handful of
    isolated lines); shapes get position and size jitter.  Image ``t`` draws
    from ``rng.derive(t)``.
    """
    if not 1 <= num_classes <= len(SHAPE_NAMES):
        raise InvalidParameterError(f"num_classes must be in 1..{len(SHAPE_NAMES)}")
    if d < 8:
        raise InvalidParameterError("synthetic images need d >= 8")
    n = n_per_class * num_classes
    images = np.empty((n, d, d, channels))
    labels = np.repeat(np.arange(num_classes), n_per_class)
    for t in range(n):
        r = rng.derive(t)
        bg = r.uniform(0.0, 0.15, channels)
        fg = r.uniform(0.6, 1.0, channels)
        mask = _render_shape(int(labels[t]), d, r)[:, :, None]
        grain = r.uniform(-GRAIN, GRAIN, (d, d, channels))
        images[t] = np.clip(np.where(mask, fg, bg) + grain, 0.0, 1.0)
    return LabeledDataset(images, labels, num_classes, split)


def load_cifar_binary(path, split: str = "test", num_classes: int = 10) -> LabeledDataset:
    """CIFAR binary batches: 1 label byte + 3072 channel-planar pixel bytes per record."""
    data = Path(path).read_bytes()
    if len(data) == 0 or len(data) % CIFAR_RECORD:
        raise FormatError(f"{path}: size {len(data)} is not a positive multiple of {CIFAR_RECORD}")
    rec = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    if labels.max() >= num_classes:
        raise FormatError(f"{path}: label {labels.max()} outside [0, {num_classes})")
    pix = rec[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return LabeledDataset(pix / 255.0, labels, num_classes, split)


def write_index(path, ids, labels, paths) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(INDEX_HEADER)
        for ident, y, p in zip(ids, labels, paths):
            w.writerow([ident, int(y), p])


def save_imgf_dir(ds: LabeledDataset, out_dir) -> None:
    """Write every image as ``<id>.imgf`` plus ``index.csv`` (id,label,path)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [f"{ident}.imgf" for ident in ds.ids]
    for img, name in zip(ds.images, names):
        write_imgf(out / name, img)
    write_index(out / "index.csv", ds.ids, ds.labels, names)


def load_imgf_dir(path, num_classes: int | None = None, split: str = "",
                  index_name: str = "index.csv") -> LabeledDataset:
    """Inverse of :func:`save_imgf_dir`; ``path`` may also name an index CSV directly."""
    root = Path(path)
    if root.is_file():
        root, index_name = root.parent, root.name
    index = root / index_name
    if not index.exists():
        raise FileNotFoundError(f"{index} not found")
    with open(index, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != INDEX_HEADER:
            raise FormatError(f"{index}: expected header {','.join(INDEX_HEADER)}")
        rows = list(reader)
    if not rows:
        raise FormatError(f"{index}: no entries")
    try:
        labels = [int(r["label"]) for r in rows]
    except ValueError as exc:
        raise FormatError(f"{index}: bad label ({exc})") from None
    images = [read_imgf(root / r["path"]) for r in rows]
    if len({im.shape for im in images}) != 1:
        raise FormatError(f"{root}: images do not share one shape")
    k = num_classes if num_classes is not None else max(labels) + 1
    return LabeledDataset(np.stack(images), labels, k, split, [r["id"] for r in rows])
