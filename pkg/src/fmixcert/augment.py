"""FourierMix augmentation: spectral amplitude/phase jitter mixed with affine views."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidParameterError
from .numerics import (Rng, Spectrum, as_image, fft2, finalize_image, hermitian_fill, ifft2,
                       self_conjugate_mask)

AMP_SEVERITIES = (0.2, 0.3, 0.4, 0.5, 0.6)
PHASE_SEVERITIES = (math.pi / 12, math.pi / 10, math.pi / 8, math.pi / 6, math.pi / 4)


@dataclass(frozen=True)
class FourierMixConfig:
    k: int = 3
    dirichlet_alpha: float = 1.0
    amp_severities: tuple[float, ...] = AMP_SEVERITIES
    phase_severities: tuple[float, ...] = PHASE_SEVERITIES
    phase_sigma: float = 5.0
    # affine ranges: +-rotation, +-translate (fraction of size), scale interval, +-shear
    rotation: float = math.radians(15.0)
    translate: float = 0.1
    scale: tuple[float, float] = (0.9, 1.1)
    shear: float = math.radians(10.0)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParameterError("FourierMix needs k >= 1 chains")
        if not self.dirichlet_alpha > 0:
            raise InvalidParameterError("dirichlet_alpha must be positive")
        if not self.phase_sigma > 0:
            raise InvalidParameterError("phase_sigma must be positive")
        for name in ("amp_severities", "phase_severities"):
            levels = tuple(float(v) for v in getattr(self, name))
            if not levels or any(v <= 0 for v in levels):
                raise InvalidParameterError(f"{name} must be non-empty and strictly positive")
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise InvalidParameterError(f"{name} must be sorted ascending")
            object.__setattr__(self, name, levels)
        if max(self.amp_severities) > 1:
            raise InvalidParameterError("amplitude severities must be <= 1")
        if self.rotation < 0 or self.translate < 0 or self.shear < 0:
            raise InvalidParameterError("affine ranges must be non-negative")
        lo, hi = self.scale
        if not 0 < lo <= hi:
            raise InvalidParameterError("scale range must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class AffineParams:
    rotation: float = 0.0
    translate_x: float = 0.0
    translate_y: float = 0.0
    scale: float = 1.0
    shear: float = 0.0

    @property
    def is_identity(self) -> bool:
        return (self.rotation == 0.0 and self.translate_x == 0.0 and self.translate_y == 0.0
                and self.scale == 1.0 and self.shear == 0.0)

    def matrix(self) -> np.ndarray:
        """Linear part in (x, y) = (col, row) coordinates: rotate . shear . scale."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        rot = np.array([[c, -s], [s, c]])
        sh = np.array([[1.0, math.tan(self.shear)], [0.0, 1.0]])
        return rot @ sh @ np.diag([self.scale, self.scale])


def sample_affine(rng: Rng, cfg: FourierMixConfig) -> AffineParams:
    return AffineParams(
        rotation=float(rng.uniform(-cfg.rotation, cfg.rotation)),
        translate_x=float(rng.uniform(-cfg.translate, cfg.translate)),
        translate_y=float(rng.uniform(-cfg.translate, cfg.translate)),
        scale=float(rng.uniform(cfg.scale[0], cfg.scale[1])),
        shear=float(rng.uniform(-cfg.shear, cfg.shear)),
    )


def apply_affine(img, params: AffineParams) -> np.ndarray:
    """Bilinear warp about the image centre with mirror padding."""
    x = as_image(img)
    if params.is_identity:
        return x.copy()
    h, w, _ = x.shape
    inv_xy = np.linalg.inv(params.matrix())
    # kernel works in (row, col); swap axes of the (x, y) inverse
    inv_rc = inv_xy[::-1, ::-1]
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    shift = np.array([params.translate_y * h, params.translate_x * w])
    return _kernels.warp_bilinear(x, inv_rc, center, shift)


def _require_hermitian(spec: Spectrum) -> None:
    if not spec.hermitian:
        raise ValueError("spectral perturbations expect a Hermitian spectrum (fft2 of a real image)")


def perturb_amplitude(spec: Spectrum, s_amp: float, rng: Rng) -> Spectrum:
    """Scale every amplitude by an independent U(1 - s, 1 + s) factor.

    Conjugate partners share one factor so the spectrum stays Hermitian.
    """
    _require_hermitian(spec)
    if not 0 < s_amp <= 1:
        raise InvalidParameterError(f"amplitude severity must lie in (0, 1], got {s_amp}")
    factors = rng.uniform(1.0 - s_amp, 1.0 + s_amp, spec.coeffs.shape)
    return Spectrum(hermitian_fill(spec.coeffs * factors), hermitian=True)


def perturb_phase(spec: Spectrum, s_phase: float, phase_sigma: float, rng: Rng) -> Spectrum:
    """Shift every phase by a truncated-normal draw in [-s_phase, s_phase].

    The conjugate partner receives the negated shift; DC and Nyquist
    coefficients (self-conjugate, hence real) are left alone.
    """
    _require_hermitian(spec)
    h, w, _ = spec.coeffs.shape
    shifts = rng.truncated_normal(phase_sigma, s_phase, spec.coeffs.shape)
    shifts[self_conjugate_mask(h, w)] = 0.0
    return Spectrum(hermitian_fill(spec.coeffs * np.exp(1j * shifts)), hermitian=True)


def fouriermix(img, cfg: FourierMixConfig, rng: Rng, *, t: float | None = None,
               m: float | None = None, info: dict | None = None) -> np.ndarray:
    """One FourierMix sample of ``img``; result clamped to [0, 1].

    ``t`` / ``m`` pin the per-chain and final Beta blend weights (sampled when
    None).  If ``info`` is a dict it receives the draws that were used.
    """
    x = as_image(img)
    alpha = cfg.dirichlet_alpha
    weights = rng.dirichlet(cfg.k, alpha)
    base = fft2(x)
    acc = np.zeros_like(x)
    chains = []
    for i in range(cfg.k):
        affine = sample_affine(rng, cfg)
        s_amp = cfg.amp_severities[int(rng.integers(len(cfg.amp_severities)))]
        s_phase = cfg.phase_severities[int(rng.integers(len(cfg.phase_severities)))]
        spec = perturb_amplitude(base, s_amp, rng)
        spec = perturb_phase(spec, s_phase, cfg.phase_sigma, rng)
        x_f = ifft2(spec)
        t_i = rng.beta(alpha, alpha) if t is None else float(t)
        acc += weights[i] * (t_i * x_f + (1.0 - t_i) * apply_affine(x, affine))
        chains.append({"affine": affine, "s_amp": s_amp, "s_phase": s_phase, "t": t_i})
    m_final = rng.beta(alpha, alpha) if m is None else float(m)
    if info is not None:
        info.update(weights=weights, chains=chains, m=m_final)
    return finalize_image(m_final * x + (1.0 - m_final) * acc)


def gaussian_augment(img, sigma: float, rng: Rng) -> np.ndarray:
    """Add i.i.d. N(0, sigma^2) pixel noise.  Not clamped."""
    x = as_image(img)
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return x.copy()
    return x + sigma * rng.standard_normal(x.shape)
