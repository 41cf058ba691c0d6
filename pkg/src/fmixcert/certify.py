"""Randomized-smoothing prediction/certification and the ACR metrics.

Noise for sample ``t`` of an image comes from chunk ``t // NOISE_CHUNK`` of a
stream derived from the image's own Rng, so counts do not depend on the
evaluation batch size or on how images are spread over threads.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, FormatError, InvalidParameterError
from .numerics import Rng, clopper_pearson_lower, std_normal_inv_cdf

ABSTAIN = -1
NOISE_CHUNK = 256

_SELECT_STREAM = 0
_ESTIMATE_STREAM = 1


@dataclass(frozen=True)
class CertConfig:
    sigma: float = 0.25
    n0: int = 100
    n: int = 100_000
    alpha: float = 0.001
    batch_size: int = 1024

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameterError("sigma must be positive")
        if self.n0 < 1 or self.n < 1:
            raise InvalidParameterError("n0 and n must be >= 1")
        if not 0 < self.alpha < 1:
            raise InvalidParameterError("alpha must lie in (0, 1)")
        if self.batch_size < 1:
            raise InvalidParameterError("batch_size must be >= 1")


@dataclass(frozen=True)
class CertResult:
    prediction: int
    radius: float
    p_lower: float
    count: int = 0
    n: int = 0

    @property
    def abstained(self) -> bool:
        return self.prediction == ABSTAIN


def certified_radius(sigma: float, p_a: float, p_b: float) -> float:
    """sigma/2 * (Phi^-1(p_a) - Phi^-1(p_b))."""
    for p in (p_a, p_b):
        if not 0.0 < p < 1.0:
            raise DomainError(f"probabilities must lie in (0, 1), got {p}")
    return 0.5 * sigma * (std_normal_inv_cdf(p_a) - std_normal_inv_cdf(p_b))


def radius_from_lower_bound(sigma: float, p_lower: float) -> float:
    """Collapsed form used once p_B is bounded by 1 - p_lower."""
    return sigma * std_normal_inv_cdf(p_lower)


def as_classifier(model) -> Callable[[np.ndarray], np.ndarray]:
    """Batch -> integer labels; accepts objects with ``predict_batch`` or callables."""
    fn = getattr(model, "predict_batch", None)
    return fn if fn is not None else model


def sample_counts(model, img: np.ndarray, num: int, sigma: float, rng: Rng,
                  batch_size: int = 1024) -> np.ndarray:
    """Class histogram of the base classifier on ``num`` noisy copies of ``img``."""
    classify = as_classifier(model)
    img = np.asarray(img, dtype=np.float64)
    counts = np.zeros(0, dtype=np.int64)
    n_chunks = -(-num // NOISE_CHUNK)
    per_batch = max(1, batch_size // NOISE_CHUNK)
    for first in range(0, n_chunks, per_batch):
        parts = []
        for c in range(first, min(first + per_batch, n_chunks)):
            size = min(NOISE_CHUNK, num - c * NOISE_CHUNK)
            parts.append(rng.derive(c).standard_normal((size,) + img.shape))
        noise = np.concatenate(parts)
        labels = np.asarray(classify(img + sigma * noise), dtype=np.int64)
        hist = np.bincount(labels)
        if len(hist) > len(counts):
            counts = np.pad(counts, (0, len(hist) - len(counts)))
        counts[: len(hist)] += hist
    return counts


def smoothed_certify(model, img, cfg: CertConfig, rng: Rng) -> CertResult:
    """Select the top class on n0 draws, then lower-bound its probability on n fresh draws."""
    img = np.asarray(img, dtype=np.float64)
    sel = sample_counts(model, img, cfg.n0, cfg.sigma, rng.derive(_SELECT_STREAM), cfg.batch_size)
    top = int(np.argmax(sel))
    est = sample_counts(model, img, cfg.n, cfg.sigma, rng.derive(_ESTIMATE_STREAM), cfg.batch_size)
    hits = int(est[top]) if top < len(est) else 0
    p_lower = clopper_pearson_lower(hits, cfg.n, cfg.alpha)
    if p_lower > 0.5:
        return CertResult(top, radius_from_lower_bound(cfg.sigma, p_lower), p_lower, hits, cfg.n)
    return CertResult(ABSTAIN, 0.0, p_lower, hits, cfg.n)


def certify_dataset(model, images: Sequence[np.ndarray], cfg: CertConfig, rng: Rng,
                    threads: int = 1, indices: Sequence[int] | None = None) -> list[CertResult]:
    """Certify every image; image ``i`` uses stream ``rng.derive(indices[i])``."""
    ids = list(range(len(images))) if indices is None else [int(i) for i in indices]

    def one(pos):
        return smoothed_certify(model, images[pos], cfg, rng.derive(ids[pos]))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, range(len(images))))
    return [one(pos) for pos in range(len(images))]


def acr_from_results(results: Sequence[CertResult], labels: Sequence[int]) -> float:
    if len(results) == 0:
        raise ValueError("ACR of an empty dataset is undefined")
    total = sum(r.radius for r, y in zip(results, labels) if r.prediction == int(y))
    return total / len(results)


def acr(model, images, labels, cfg: CertConfig, rng: Rng, threads: int = 1) -> float:
    """Average certified radius; wrong and abstained predictions count as 0."""
    if len(images) == 0:
        raise ValueError("ACR of an empty dataset is undefined")
    return acr_from_results(certify_dataset(model, images, cfg, rng, threads), labels)


def macr(acrs: Sequence[float]) -> float:
    if len(acrs) == 0:
        raise ValueError("mACR needs at least one ACR value")
    return float(sum(acrs) / len(acrs))


CERT_HEADER = ["index", "label", "prediction", "p_lower", "radius", "correct"]


def write_cert_csv(path, indices, labels, results: Sequence[CertResult]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CERT_HEADER)
        for i, y, r in zip(indices, labels, results):
            w.writerow([int(i), int(y), r.prediction, f"{r.p_lower:.6g}", f"{r.radius:.6g}",
                        int(r.prediction == int(y))])


def read_cert_csv(path) -> list[dict]:
    """Rows of a certification CSV with numeric fields parsed."""
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != CERT_HEADER:
            raise FormatError(f"{path}: expected header {','.join(CERT_HEADER)}")
        for line, raw in enumerate(reader, start=2):
            try:
                rows.append({
                    "index": int(raw["index"]), "label": int(raw["label"]),
                    "prediction": int(raw["prediction"]), "p_lower": float(raw["p_lower"]),
                    "radius": float(raw["radius"]), "correct": int(raw["correct"]),
                })
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{line}: malformed row ({exc})") from None
    return rows


def acr_from_csv_rows(rows: list[dict]) -> float:
    if not rows:
        raise ValueError("empty certification file")
    return sum(r["radius"] for r in rows if r["correct"]) / len(rows)
