"""Hierarchical consistency regularization and the SGD training loop.

For one training image x0 the loss looks at (k + 1) views: x0 itself and k
FourierMix copies.  Each view gets s Gaussian draws, giving an array of
probabilities p[j, i].  With q_j = mean_i p[j, i] and r = mean_j q_j:

    L_G(j) = mean_i KL(p[j, i] || q_j)
    L_HCR  = mean_j [ lam * KL(q_j || r) + eta * L_G(j) ]
    L      = mean_i CE(p[0, i], y) + L_HCR

Gradients flow through every occurrence of p, including inside q and r.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .augment import FourierMixConfig, fouriermix
from .errors import InvalidParameterError
from .model import MlpClassifier, snap_f32, softmax
from .numerics import Rng, as_image

KL_EPS = 1e-12
MODES = ("none", "jsd-gaussian", "hcr")

# child-stream slots under a per-example Rng
_FMIX_STREAM = 0
_NOISE_STREAM = 1


def kl_divergence(p, q) -> float | np.ndarray:
    """KL(p || q) along the last axis, both arguments clamped below at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape[-1] != q.shape[-1]:
        raise ValueError(f"dimension mismatch: {p.shape[-1]} vs {q.shape[-1]}")
    pc = np.maximum(p, KL_EPS)
    qc = np.maximum(q, KL_EPS)
    out = np.sum(pc * (np.log(pc) - np.log(qc)), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class HcrConfig:
    k: int = 2
    s: int = 2
    lam: float = 40.0
    eta: float = 10.0
    sigma: float = 0.25

    def __post_init__(self):
        if self.k < 0 or self.s < 1:
            raise InvalidParameterError("HCR needs k >= 0 copies and s >= 1 draws")
        if self.lam < 0 or self.eta < 0:
            raise InvalidParameterError("HCR weights must be non-negative")
        if not self.sigma > 0:
            raise InvalidParameterError("sigma must be positive")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    mode: str = "hcr"
    threads: int = 1
    fouriermix: FourierMixConfig = field(default_factory=FourierMixConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0 or not 0 <= self.momentum < 1:
            raise InvalidParameterError("invalid training hyperparameters")
        if self.threads < 1:
            raise InvalidParameterError("threads must be >= 1")


def mode_config(mode: str, hcr: HcrConfig) -> HcrConfig:
    """The HCR setting that realizes a training mode.

    ``none`` is plain Gaussian augmentation (noisy CE only); ``jsd-gaussian``
    keeps the first-level consistency over Gaussian draws of x0 alone.
    """
    if mode == "none":
        return HcrConfig(k=0, s=hcr.s, lam=0.0, eta=0.0, sigma=hcr.sigma)
    if mode == "jsd-gaussian":
        return HcrConfig(k=0, s=hcr.s, lam=hcr.lam, eta=hcr.eta, sigma=hcr.sigma)
    return hcr


class LossEval(NamedTuple):
    total: float
    ce: float
    hcr: float
    inputs: np.ndarray    # ((k+1)*s, H, W, C) noisy views, row j*s + i
    dlogits: np.ndarray   # ((k+1)*s, num_classes)


def make_views(x0, cfg: HcrConfig, rng: Rng,
               fmix: FourierMixConfig | None = None) -> np.ndarray:
    """Noisy views x_j + delta_i, shape (k+1, s, H, W, C); j = 0 is x0."""
    x0 = as_image(x0)
    fmix = fmix or FourierMixConfig()
    copies = [x0]
    frng = rng.derive(_FMIX_STREAM)
    for j in range(1, cfg.k + 1):
        copies.append(fouriermix(x0, fmix, frng.derive(j)))
    nrng = rng.derive(_NOISE_STREAM)
    views = np.empty((cfg.k + 1, cfg.s) + x0.shape)
    for j, xj in enumerate(copies):
        views[j] = xj + cfg.sigma * nrng.derive(j).standard_normal((cfg.s,) + x0.shape)
    return views


def _softmax_backward(p: np.ndarray, dp: np.ndarray) -> np.ndarray:
    return p * (dp - np.sum(dp * p, axis=-1, keepdims=True))


def hcr_value_and_grad(p: np.ndarray, lam: float, eta: float) -> tuple[float, np.ndarray]:
    """L_HCR for probabilities ``p`` of shape (J, s, C) and dL/dp."""
    n_views, s, _ = p.shape
    q = p.mean(axis=1)
    r = q.mean(axis=0)
    lp = np.log(np.maximum(p, KL_EPS))
    lq = np.log(np.maximum(q, KL_EPS))
    lr = np.log(np.maximum(r, KL_EPS))

    top = np.sum(q * (lq - lr), axis=-1)
    gauss = np.sum(p * (lp - lq[:, None, :]), axis=-1).mean(axis=1)
    loss = float((lam * top.sum() + eta * gauss.sum()) / n_views)

    dq = (lam / n_views) * (lq - lr + 1.0)
    dr = -(lam / n_views) * np.sum(q / np.maximum(r, KL_EPS), axis=0)
    dp = (eta / (n_views * s)) * (lp - lq[:, None, :] + 1.0)
    dq -= (eta / (n_views * s)) * np.sum(p / np.maximum(q, KL_EPS)[:, None, :], axis=1)
    dq += dr[None, :] / n_views
    dp += dq[:, None, :] / s
    return loss, dp


def evaluate_views(model: MlpClassifier, views: np.ndarray, label: int | None,
                   cfg: HcrConfig) -> LossEval:
    n_views, s = views.shape[:2]
    flat = views.reshape((n_views * s,) + views.shape[2:])
    logits = model.logits_batch(flat)
    p = softmax(logits).reshape(n_views, s, -1)
    hcr, dp = hcr_value_and_grad(p, cfg.lam, cfg.eta)
    dlog = _softmax_backward(p, dp).reshape(n_views * s, -1)
    ce = 0.0
    if label is not None:
        z0 = logits[:s]
        zmax = z0.max(axis=1, keepdims=True)
        logz = (zmax + np.log(np.sum(np.exp(z0 - zmax), axis=1, keepdims=True)))[:, 0]
        ce = float(np.mean(logz - z0[:, label]))
        onehot = np.zeros_like(p[0])
        onehot[:, label] = 1.0
        dlog[:s] += (p[0] - onehot) / s
    return LossEval(ce + hcr, ce, hcr, flat, dlog)


def hcr_loss(model: MlpClassifier, x0, cfg: HcrConfig, rng: Rng,
             fmix: FourierMixConfig | None = None) -> LossEval:
    """L_HCR alone (``ce`` is 0) with gradients wrt all (k+1)*s logits."""
    return evaluate_views(model, make_views(x0, cfg, rng, fmix), None, cfg)


def total_loss(model: MlpClassifier, x0, label: int, cfg: HcrConfig, rng: Rng,
               fmix: FourierMixConfig | None = None) -> LossEval:
    """Noisy cross-entropy on x0 plus L_HCR, sharing the same Gaussian draws."""
    if not 0 <= label < model.num_classes:
        raise ValueError(f"label {label} outside [0, {model.num_classes})")
    return evaluate_views(model, make_views(x0, cfg, rng, fmix), int(label), cfg)


@dataclass
class EpochLog:
    epoch: int
    mean_ce: float
    mean_hcr: float
    total: float


def train(model: MlpClassifier, images: np.ndarray, labels: np.ndarray, tcfg: TrainConfig,
          hcfg: HcrConfig | None = None, progress=None) -> tuple[MlpClassifier, list[EpochLog]]:
    """SGD with momentum over shuffled mini-batches.  Returns a new model."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(images)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    cfg = mode_config(tcfg.mode, hcfg or HcrConfig())
    model = model.copy()
    velocity = [np.zeros_like(p) for p in model.params()]
    root = Rng(tcfg.seed)
    log = []
    pool = ThreadPoolExecutor(tcfg.threads) if tcfg.threads > 1 else None
    try:
        for epoch in range(tcfg.epochs):
            erng = root.derive(epoch)
            order = erng.derive(0).permutation(n)
            ex_rng = erng.derive(1)
            sums = np.zeros(3)
            for start in range(0, n, tcfg.batch_size):
                idx = order[start:start + tcfg.batch_size]

                def view_of(i):
                    return make_views(images[i], cfg, ex_rng.derive(int(i)), tcfg.fouriermix)

                views = list(pool.map(view_of, idx)) if pool else [view_of(i) for i in idx]
                evals = [evaluate_views(model, v, int(labels[i]), cfg) for v, i in zip(views, idx)]
                inputs = np.concatenate([e.inputs for e in evals])
                dlogits = np.concatenate([e.dlogits for e in evals]) / len(idx)
                grads = model.backward(inputs, dlogits)
                for p, v, g in zip(model.params(), velocity, grads.arrays()):
                    if tcfg.lr == 0:
                        break
                    v *= tcfg.momentum
                    v -= tcfg.lr * g
                    p += v
                    p[...] = snap_f32(p)
                sums += [sum(e.ce for e in evals), sum(e.hcr for e in evals),
                         sum(e.total for e in evals)]
            row = EpochLog(epoch, *(sums / n))
            log.append(row)
            if progress:
                progress(row)
    finally:
        if pool:
            pool.shutdown()
    return model, log


def write_loss_log(path, log: list[EpochLog]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "mean_ce", "mean_hcr", "total"])
        for row in log:
            w.writerow([row.epoch, f"{row.mean_ce:.6g}", f"{row.mean_hcr:.6g}", f"{row.total:.6g}"])
