"""Fourier-basis sensitivity heatmaps and radial amplitude profiles.

Frequency coordinates here are centre-origin: for side d they run over
[-d//2, (d-1)//2], and (i, j) maps to array index (i % d, j % d).
"""

from __future__ import annotations

import csv
import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .certify import CertConfig, acr_from_results, certify_dataset
from .imageio import minmax_scale, write_ppm
from .numerics import Rng, Spectrum, as_image, canonical_mask, fft2, ifft2

_CERT_STREAM = 0
_SIGN_STREAM = 1


class Band(str, enum.Enum):
    LOW = "LOW"
    MID = "MID"
    HIGH = "HIGH"


def centered_freqs(n: int) -> np.ndarray:
    """Centre-origin frequency of each array index 0..n-1."""
    return (np.arange(n) + n // 2) % n - n // 2


def _check_coord(i: int, d: int) -> None:
    if not -(d // 2) <= i <= (d - 1) // 2:
        raise ValueError(f"frequency {i} outside [{-(d // 2)}, {(d - 1) // 2}] for side {d}")


@dataclass(frozen=True)
class FourierBasisImage:
    i: int
    j: int
    d: int
    pixels: np.ndarray


def fourier_basis(i: int, j: int, d: int) -> FourierBasisImage:
    """Unit-L2-norm real image whose spectrum lives on {(i, j), (-i, -j)}."""
    _check_coord(i, d)
    _check_coord(j, d)
    coeffs = np.zeros((d, d, 1), dtype=np.complex128)
    coeffs[i % d, j % d, 0] = 1.0
    coeffs[(-i) % d, (-j) % d, 0] = 1.0
    pix = ifft2(Spectrum(coeffs, hermitian=True))[:, :, 0]
    return FourierBasisImage(i, j, d, pix / np.linalg.norm(pix))


@dataclass
class SensitivityHeatmap:
    """ACR per basis frequency; ``grid[i + d//2, j + d//2]`` holds cell (i, j)."""

    grid: np.ndarray
    eps: float
    sigma: float
    n: int
    clean_acr: float | None = None
    dataset_id: str = ""

    @property
    def d(self) -> int:
        return self.grid.shape[0]

    def value(self, i: int, j: int) -> float:
        return float(self.grid[i + self.d // 2, j + self.d // 2])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            for row in self.grid:
                w.writerow([f"{v:.6g}" for v in row])

    def write_ppm(self, path) -> None:
        write_ppm(path, minmax_scale(self.grid))


def perturb_with_basis(images: np.ndarray, basis: np.ndarray, eps: float,
                       signs: np.ndarray) -> np.ndarray:
    """x + r * eps * U channel by channel; ``signs`` has shape (N, C).  Not clamped."""
    return images + eps * signs[:, None, None, :] * basis[None, :, :, None]


def sensitivity_heatmap(model, images, labels, eps: float, cfg: CertConfig, rng: Rng,
                        threads: int = 1, dataset_id: str = "") -> SensitivityHeatmap:
    """ACR of the perturbed set x + r*eps*U_ij for every basis frequency (i, j).

    All cells share one certification noise stream, so ``eps = 0`` reproduces
    the clean ACR in every cell.  Each conjugate pair is evaluated once.
    """
    images = np.asarray(images, dtype=np.float64)
    if len(images) == 0:
        raise ValueError("heatmap needs a non-empty dataset")
    n_img, d, d2, ch = images.shape
    if d != d2:
        raise ValueError("heatmaps need square images")
    cert_rng = rng.derive(_CERT_STREAM)
    sign_rng = rng.derive(_SIGN_STREAM)
    canon = canonical_mask(d, d)
    cells = [(u, v) for u in range(d) for v in range(d) if canon[u, v]]

    def cell_acr(cell):
        u, v = cell
        i, j = int(centered_freqs(d)[u]), int(centered_freqs(d)[v])
        basis = fourier_basis(i, j, d).pixels
        srng = sign_rng.derive(u * d + v)
        signs = np.where(srng.uniform(0.0, 1.0, (n_img, ch)) < 0.5, -1.0, 1.0)
        pert = perturb_with_basis(images, basis, eps, signs)
        return acr_from_results(certify_dataset(model, pert, cfg, cert_rng), labels)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(cell_acr, cells))
    else:
        values = [cell_acr(c) for c in cells]

    grid = np.zeros((d, d))
    shift = d // 2
    fr = centered_freqs(d)
    for (u, v), val in zip(cells, values):
        for uu, vv in ((u, v), ((-u) % d, (-v) % d)):
            grid[fr[uu] + shift, fr[vv] + shift] = val
    clean = acr_from_results(certify_dataset(model, images, cfg, cert_rng), labels)
    return SensitivityHeatmap(grid, float(eps), cfg.sigma, cfg.n, clean, dataset_id)


# ------------------------------------------------------------ radial profiles


@dataclass(frozen=True)
class RadialProfile:
    """Mean amplitude per integer azimuthal frequency f = 0 .. len(values)-1."""

    values: np.ndarray
    d: int

    @property
    def nyquist(self) -> int:
        return self.d // 2

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(len(self.values), dtype=np.float64)

    def at(self, f):
        """Linear interpolation between integer bins (clamped at the ends)."""
        return np.interp(f, self.freqs, self.values)


def radial_bins(h: int, w: int) -> np.ndarray:
    fu = centered_freqs(h)[:, None]
    fv = centered_freqs(w)[None, :]
    return np.rint(np.sqrt(fu * fu + fv * fv)).astype(np.int64)


def radial_profile(amplitude: np.ndarray) -> RadialProfile:
    """Radially bin a (H, W) amplitude map by nearest-integer azimuthal frequency."""
    h, w = amplitude.shape
    bins = radial_bins(h, w).ravel()
    sums = np.bincount(bins, weights=amplitude.ravel())
    counts = np.bincount(bins)
    return RadialProfile(sums / counts, min(h, w))


def amplitude_profile(img) -> RadialProfile:
    """Radial profile of |fft2(img)| averaged over channels."""
    return radial_profile(fft2(as_image(img)).amplitude.mean(axis=2))


def corruption_spectrum(clean, corrupted) -> RadialProfile:
    """Radial profile of E|fft2(corrupted - clean)| over pairs and channels."""
    clean = np.asarray(clean, dtype=np.float64)
    corrupted = np.asarray(corrupted, dtype=np.float64)
    if clean.shape != corrupted.shape:
        raise ValueError(f"paired sets differ in shape: {clean.shape} vs {corrupted.shape}")
    if clean.ndim == 3:
        clean, corrupted = clean[None], corrupted[None]
    if len(clean) == 0:
        raise ValueError("corruption_spectrum needs at least one pair")
    acc = np.zeros(clean.shape[1:3])
    for a, b in zip(clean, corrupted):
        acc += fft2(b - a).amplitude.mean(axis=2)
    return radial_profile(acc / len(clean))


def band_centroid(profile: RadialProfile) -> float:
    """Energy-weighted mean frequency, scaled so the highest bin maps to 1."""
    e = np.asarray(profile.values, dtype=np.float64)
    total = e.sum()
    if not total > 0:
        raise ValueError("cannot classify an all-zero profile")
    top = max(len(e) - 1, 1)
    return float((profile.freqs * e).sum() / total / top)


def classify_band(profile: RadialProfile, low: float = 1 / 3, high: float = 2 / 3) -> Band:
    c = band_centroid(profile)
    if c < low:
        return Band.LOW
    if c < high:
        return Band.MID
    return Band.HIGH
