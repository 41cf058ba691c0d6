"""Power-law spectral corruption benchmark (CIFAR-F style).

Each corrupted image is x + gamma * IFFT(delta), where delta has amplitude

    P(f) / (|f - f_c| + 1)^alpha * U(1 - b, 1 + b),   P(f) = clip(A_clean(f), a_lo, a_hi)

and uniform random phase, and gamma rescales the noise to L2 norm eps.
A_clean is the image's own radial amplitude profile; a_lo / a_hi are
percentiles of that profile.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateNoiseError, InvalidParameterError
from .imageio import write_imgf, write_ppm
from .numerics import (Rng, Spectrum, as_image, finalize_image, hermitian_fill,
                       ifft2_with_residual, self_conjugate_mask)
from .spectral import RadialProfile, amplitude_profile, centered_freqs

DEFAULT_EPS = (8.0, 10.0, 12.0)
DEFAULT_ALPHAS = (0.5, 1.0, 2.0, 3.0)
DEFAULT_FCS = tuple(range(1, 17))
MAX_RETRIES = 8
MANIFEST_HEADER = ["id", "fc", "alpha", "eps", "b", "path", "achieved_norm"]


@dataclass(frozen=True)
class BenchmarkSpec:
    f_c: int
    alpha: float
    eps: float
    b: float = 0.2
    clip_lo_pct: float = 25.0
    clip_hi_pct: float = 75.0

    def __post_init__(self):
        if self.f_c < 1:
            raise InvalidParameterError("f_c must be >= 1")
        if not self.alpha > 0:
            raise InvalidParameterError("power-law alpha must be positive")
        if not self.eps > 0:
            raise InvalidParameterError("eps must be positive")
        if not 0 <= self.b < 1:
            raise InvalidParameterError("b must lie in [0, 1)")
        if not 0 <= self.clip_lo_pct < self.clip_hi_pct <= 100:
            raise InvalidParameterError("need 0 <= clip_lo_pct < clip_hi_pct <= 100")

    @property
    def tag(self) -> str:
        return f"fc{self.f_c}_a{self.alpha:g}_e{self.eps:g}"


def default_grid(eps=DEFAULT_EPS, alphas=DEFAULT_ALPHAS, fcs=DEFAULT_FCS, b: float = 0.2,
                 clip_lo_pct: float = 25.0, clip_hi_pct: float = 75.0) -> list[BenchmarkSpec]:
    return [BenchmarkSpec(int(fc), float(a), float(e), b, clip_lo_pct, clip_hi_pct)
            for e, a, fc in itertools.product(eps, alphas, fcs)]


def clip_bounds(profile: RadialProfile, spec: BenchmarkSpec) -> tuple[float, float]:
    lo, hi = np.percentile(profile.values, [spec.clip_lo_pct, spec.clip_hi_pct])
    return float(lo), float(hi)


def powerlaw_amplitude(profile: RadialProfile, spec: BenchmarkSpec, coord: tuple[int, int],
                       rng: Rng, bounds: tuple[float, float] | None = None) -> float:
    """Noise amplitude at centre-origin frequency ``coord`` = (u, v)."""
    lo, hi = bounds or clip_bounds(profile, spec)
    u, v = coord
    f = math.hypot(u, v)
    level = min(max(float(profile.at(f)), lo), hi)
    jitter = float(rng.uniform(1.0 - spec.b, 1.0 + spec.b))
    return level / (abs(f - spec.f_c) + 1.0) ** spec.alpha * jitter


def powerlaw_amplitude_grid(profile: RadialProfile, spec: BenchmarkSpec, shape, rng: Rng,
                            bounds: tuple[float, float] | None = None) -> np.ndarray:
    """Vectorized :func:`powerlaw_amplitude` over an (H, W, C) spectrum."""
    h, w, c = shape
    lo, hi = bounds or clip_bounds(profile, spec)
    fu = centered_freqs(h)[:, None]
    fv = centered_freqs(w)[None, :]
    f = np.sqrt(fu * fu + fv * fv)
    level = np.clip(profile.at(f), lo, hi)
    envelope = level / (np.abs(f - spec.f_c) + 1.0) ** spec.alpha
    return envelope[:, :, None] * rng.uniform(1.0 - spec.b, 1.0 + spec.b, (h, w, c))


def noise_spectrum(clean, spec: BenchmarkSpec, rng: Rng) -> Spectrum:
    """Hermitian delta: mirrored amplitudes, negated phases, real self-conjugate terms."""
    x = as_image(clean)
    h, w, c = x.shape
    nyq = min(h, w) // 2
    if spec.f_c > max(nyq, 1):
        raise InvalidParameterError(f"f_c={spec.f_c} exceeds the Nyquist bin {nyq}")
    profile = amplitude_profile(x)
    amp = powerlaw_amplitude_grid(profile, spec, x.shape, rng, clip_bounds(profile, spec))
    phase = rng.uniform(0.0, 2.0 * np.pi, x.shape)
    coeffs = amp * np.exp(1j * phase)
    selfc = self_conjugate_mask(h, w)
    coeffs[selfc] = amp[selfc] * np.where(phase[selfc] < np.pi, 1.0, -1.0)
    return Spectrum(hermitian_fill(coeffs), hermitian=True)


def generate_f_image(clean, spec: BenchmarkSpec, rng: Rng) -> tuple[np.ndarray, float]:
    """Corrupted image (clamped to [0, 1]) and the pre-clamp noise L2 norm."""
    x = as_image(clean)
    for attempt in range(MAX_RETRIES):
        noise, _ = ifft2_with_residual(noise_spectrum(x, spec, rng.derive(attempt)))
        norm = float(np.linalg.norm(noise))
        if norm > 0 and np.isfinite(norm):
            break
    else:
        raise DegenerateNoiseError(f"noise had zero energy after {MAX_RETRIES} attempts")
    injected = (spec.eps / norm) * noise
    return finalize_image(x + injected), float(np.linalg.norm(injected))


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    spec: BenchmarkSpec
    path: str
    achieved_norm: float


def generate_f_suite(images: Sequence[np.ndarray], ids: Sequence[str],
                     specs: Sequence[BenchmarkSpec], out_dir, rng: Rng, threads: int = 1,
                     ppm: bool = False) -> list[ManifestEntry]:
    """One corrupted copy of every image per spec; writes files and manifest.csv."""
    if len(images) == 0:
        raise ValueError("benchmark generation needs a non-empty dataset")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(ci, ii) for ci in range(len(specs)) for ii in range(len(images))]

    def run(job):
        ci, ii = job
        spec = specs[ci]
        img, achieved = generate_f_image(images[ii], spec, rng.derive(ci).derive(ii))
        name = f"{ids[ii]}_{spec.tag}.imgf"
        write_imgf(out / name, img)
        if ppm:
            write_ppm(out / (name[:-5] + ".ppm"), img)
        return ManifestEntry(str(ids[ii]), spec, name, achieved)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            entries = list(pool.map(run, jobs))
    else:
        entries = [run(j) for j in jobs]
    write_manifest(out / "manifest.csv", entries)
    return entries


def write_manifest(path, entries: Sequence[ManifestEntry]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(MANIFEST_HEADER)
        for e in entries:
            w.writerow([e.image_id, e.spec.f_c, f"{e.spec.alpha:g}", f"{e.spec.eps:g}",
                        f"{e.spec.b:g}", e.path, f"{e.achieved_norm:.6g}"])


def read_manifest(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
