"""Two-layer ReLU softmax classifier with hand-written backward pass.

Checkpoint format MLPC1 (little-endian)::

    b"MLPC"  u8 version=1  u32 input_dim  u32 hidden_dim  u32 num_classes
    W1 (input_dim x hidden_dim), b1 (hidden_dim), W2 (hidden_dim x num_classes),
    b2 (num_classes), all float32, row-major

Parameters live in float64 but are kept float32-representable, so a
save/load round trip is bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointVersionError, CorruptCheckpointError
from .numerics import Rng

CKPT_MAGIC = b"MLPC"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sB3I")


def snap_f32(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(a * a) for a in self.arrays())))


@dataclass
class MlpClassifier:
    """flatten -> dense(hidden) -> ReLU -> dense(classes) -> softmax."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        d, h = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape[0] != h or self.b2.shape != (self.w2.shape[1],):
            raise ValueError("inconsistent parameter shapes")

    @classmethod
    def init(cls, input_dim: int, num_classes: int, hidden_dim: int = 128,
             rng: Rng | None = None) -> "MlpClassifier":
        """Glorot-uniform weights, zero biases."""
        rng = rng or Rng(0)
        lim1 = np.sqrt(6.0 / (input_dim + hidden_dim))
        lim2 = np.sqrt(6.0 / (hidden_dim + num_classes))
        return cls(
            snap_f32(rng.uniform(-lim1, lim1, (input_dim, hidden_dim))),
            np.zeros(hidden_dim),
            snap_f32(rng.uniform(-lim2, lim2, (hidden_dim, num_classes))),
            np.zeros(num_classes),
        )

    @classmethod
    def zeros(cls, input_dim: int, num_classes: int, hidden_dim: int = 128) -> "MlpClassifier":
        return cls(np.zeros((input_dim, hidden_dim)), np.zeros(hidden_dim),
                   np.zeros((hidden_dim, num_classes)), np.zeros(num_classes))

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w2.shape[1]

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "MlpClassifier":
        return MlpClassifier(*(p.copy() for p in self.params()))

    def _flatten(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.size == self.input_dim:
            return x.reshape(1, -1)
        flat = x.reshape(x.shape[0], -1) if x.ndim >= 2 else x.reshape(1, -1)
        if flat.shape[1] != self.input_dim:
            raise ValueError(f"input has {flat.shape[1]} features, model expects {self.input_dim}")
        return flat

    def logits_batch(self, x) -> np.ndarray:
        flat = self._flatten(x)
        hidden = np.maximum(flat @ self.w1 + self.b1, 0.0)
        return hidden @ self.w2 + self.b2

    def forward(self, img) -> tuple[np.ndarray, np.ndarray]:
        """Logits and probabilities for a single image."""
        z = self.logits_batch(img)[0]
        return z, softmax(z)

    def forward_batch(self, x) -> tuple[np.ndarray, np.ndarray]:
        z = self.logits_batch(x)
        return z, softmax(z)

    def predict_class(self, img) -> int:
        # first maximum wins ties
        return int(np.argmax(self.forward(img)[1]))

    def predict_batch(self, x) -> np.ndarray:
        return np.argmax(softmax(self.logits_batch(x)), axis=1)

    def backward(self, x, dlogits: np.ndarray) -> Gradients:
        """Parameter gradients given d(loss)/d(logits) for every row of ``x``."""
        flat = self._flatten(x)
        dlogits = np.asarray(dlogits, dtype=np.float64).reshape(flat.shape[0], -1)
        if dlogits.shape[1] != self.num_classes:
            raise ValueError("dlogits width does not match num_classes")
        pre = flat @ self.w1 + self.b1
        hidden = np.maximum(pre, 0.0)
        dhidden = (dlogits @ self.w2.T) * (pre > 0.0)
        return Gradients(
            w1=flat.T @ dhidden,
            b1=dhidden.sum(axis=0),
            w2=hidden.T @ dlogits,
            b2=dlogits.sum(axis=0),
        )


def save_checkpoint(model: MlpClassifier, path) -> None:
    head = _CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, model.input_dim, model.hidden_dim,
                             model.num_classes)
    body = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in model.params())
    Path(path).write_bytes(head + body)


def load_checkpoint(path) -> MlpClassifier:
    data = Path(path).read_bytes()
    if len(data) < _CKPT_HEADER.size:
        raise CorruptCheckpointError("checkpoint shorter than its header")
    magic, version, d, h, c = _CKPT_HEADER.unpack_from(data)
    if magic != CKPT_MAGIC:
        raise CorruptCheckpointError(f"bad checkpoint magic {magic!r}")
    if version != CKPT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    shapes = [(d, h), (h,), (h, c), (c,)]
    sizes = [int(np.prod(s)) for s in shapes]
    if len(data) != _CKPT_HEADER.size + 4 * sum(sizes):
        raise CorruptCheckpointError(
            f"checkpoint body is {len(data) - _CKPT_HEADER.size} bytes, header implies {4 * sum(sizes)}")
    arrays, off = [], _CKPT_HEADER.size
    for shape, n in zip(shapes, sizes):
        arrays.append(np.frombuffer(data, dtype="<f4", count=n, offset=off)
                      .astype(np.float64).reshape(shape))
        off += 4 * n
    return MlpClassifier(*arrays)
