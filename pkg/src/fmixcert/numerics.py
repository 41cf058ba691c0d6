"""Random streams, 2D DFT, spectra and the special functions used everywhere.

Images are plain float64 arrays of shape (H, W, C).  Spectra keep the
frequency origin at index (0, 0); coordinates are read modulo the array
dimensions, so the conjugate partner of (u, v) is (-u % H, -v % W).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _kernels
from .errors import DomainError, InvalidParameterError

MASK64 = (1 << 64) - 1


# --------------------------------------------------------------------- Rng


def _mix64(z: int) -> int:
    # splitmix64 finalizer; a bijection on 64-bit words
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class Rng:
    """Philox4x64-10 stream keyed by ``(seed, stream)``.

    Equal keys give identical draws.  Child streams come from
    :meth:`derive`, which is injective in its index for a fixed parent, so
    work split across threads can draw from per-item streams and stay
    reproducible regardless of scheduling.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & MASK64
        self.stream = int(stream) & MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, stream={self.stream:#x})"

    def derive(self, index: int) -> "Rng":
        if index < 0:
            raise InvalidParameterError("stream index must be non-negative")
        base = _mix64(self.stream ^ 0xD1B54A32D192ED03)
        return Rng(self.seed, _mix64((base + int(index) + 1) & MASK64))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, lo: float = 0.0, hi: float = 1.0, size=None):
        if not hi >= lo:
            raise InvalidParameterError(f"uniform needs lo <= hi, got [{lo}, {hi}]")
        return self._gen.uniform(lo, hi, size)

    def normal(self, mu: float = 0.0, sigma: float = 1.0, size=None):
        if not sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {sigma}")
        return mu + sigma * self._gen.standard_normal(size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def truncated_normal(self, sigma: float, bound: float, size=None):
        """N(0, sigma^2) conditioned on [-bound, bound], by inverse CDF.

        Each sample uses exactly two uniforms: one picks the sign, the other
        the magnitude through the lower half of the truncated CDF, which keeps
        the tail arithmetic away from 1 - eps.
        """
        if not sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {sigma}")
        if not bound > 0:
            raise InvalidParameterError(f"bound must be positive, got {bound}")
        lo = std_normal_cdf(-bound / sigma)
        u = self._gen.random(size)
        sign = np.where(self._gen.random(size) < 0.5, -1.0, 1.0)
        p = lo + u * (0.5 - lo)
        p = np.clip(p, np.nextafter(0.0, 1.0), 0.5)
        x = sigma * std_normal_inv_cdf(p)
        out = np.clip(sign * x, -bound, bound)
        return float(out) if size is None else out

    def dirichlet(self, k: int, alpha: float) -> np.ndarray:
        if k < 1:
            raise InvalidParameterError("dirichlet needs k >= 1")
        if not alpha > 0:
            raise InvalidParameterError(f"alpha must be positive, got {alpha}")
        return self._gen.dirichlet(np.full(k, float(alpha)))

    def beta(self, a: float, b: float) -> float:
        if not (a > 0 and b > 0):
            raise InvalidParameterError(f"beta parameters must be positive, got {a}, {b}")
        return float(self._gen.beta(a, b))

    def integers(self, high: int, size=None):
        return self._gen.integers(0, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


# ------------------------------------------------------------------ images


def as_image(x) -> np.ndarray:
    """Return ``x`` as a float64 (H, W, C) array; 2D input gains C=1."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or min(a.shape) < 1:
        raise ValueError(f"expected an (H, W, C) image, got shape {a.shape}")
    return a


def finalize_image(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


# ---------------------------------------------------------------- spectra


def conjugate_indices(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    return (-np.arange(h)) % h, (-np.arange(w)) % w


def canonical_mask(h: int, w: int) -> np.ndarray:
    """True where (u, v) is the representative of its conjugate pair."""
    cu, cv = conjugate_indices(h, w)
    flat = np.arange(h)[:, None] * w + np.arange(w)[None, :]
    flat_conj = cu[:, None] * w + cv[None, :]
    return flat <= flat_conj


def self_conjugate_mask(h: int, w: int) -> np.ndarray:
    cu, cv = conjugate_indices(h, w)
    return (np.arange(h) == cu)[:, None] & (np.arange(w) == cv)[None, :]


def conjugate_view(coeffs: np.ndarray) -> np.ndarray:
    """coeffs[(-u) % H, (-v) % W] for every (u, v)."""
    cu, cv = conjugate_indices(coeffs.shape[0], coeffs.shape[1])
    return coeffs[cu][:, cv]


def hermitian_fill(coeffs: np.ndarray) -> np.ndarray:
    """Overwrite each non-canonical coefficient with the conjugate of its partner.

    Self-conjugate coefficients keep only their real part.
    """
    h, w = coeffs.shape[:2]
    mask = canonical_mask(h, w)[:, :, None]
    out = np.where(mask, coeffs, np.conj(conjugate_view(coeffs)))
    selfc = self_conjugate_mask(h, w)
    out[selfc] = out[selfc].real
    return out


def hermitian_residual(coeffs: np.ndarray) -> float:
    return float(np.max(np.abs(coeffs - np.conj(conjugate_view(coeffs)))))


@dataclass(frozen=True)
class Spectrum:
    """Per-channel 2D spectrum, shape (H, W, C), origin at index (0, 0)."""

    coeffs: np.ndarray
    hermitian: bool = False

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.coeffs.shape

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.coeffs)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.coeffs)

    @classmethod
    def from_polar(cls, amplitude, phase, hermitian: bool = False) -> "Spectrum":
        return cls(np.asarray(amplitude) * np.exp(1j * np.asarray(phase)), hermitian)


def _dft2(a: np.ndarray, inverse: bool) -> np.ndarray:
    h, w, c = a.shape
    rows = np.ascontiguousarray(a.transpose(2, 0, 1)).reshape(c * h, w)
    rows = _kernels.fft_rows(rows, inverse)
    cols = np.ascontiguousarray(rows.reshape(c, h, w).transpose(0, 2, 1)).reshape(c * w, h)
    cols = _kernels.fft_rows(cols, inverse)
    return cols.reshape(c, w, h).transpose(2, 1, 0)


def fft2(img) -> Spectrum:
    """Unnormalized forward 2D DFT of each channel of a real image.

    The result is made exactly conjugate-symmetric (averaging each pair), so
    downstream spectral edits can rely on bitwise pair equality.
    """
    x = as_image(img)
    coeffs = _dft2(x.astype(np.complex128), inverse=False)
    sym = 0.5 * (coeffs + np.conj(conjugate_view(coeffs)))
    return Spectrum(np.ascontiguousarray(sym), hermitian=True)


def ifft2_with_residual(spec: Spectrum) -> tuple[np.ndarray, float]:
    """Inverse DFT (1/(H*W) scaling); returns the real part and max |imag|."""
    coeffs = np.asarray(spec.coeffs, dtype=np.complex128)
    h, w = coeffs.shape[:2]
    out = _dft2(coeffs, inverse=True) / (h * w)
    return np.ascontiguousarray(out.real), float(np.max(np.abs(out.imag)))


def ifft2(spec: Spectrum) -> np.ndarray:
    return ifft2_with_residual(spec)[0]


# --------------------------------------------------------- normal CDF etc.

# Acklam's rational approximation to the normal quantile (|rel err| < 1.15e-9)
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def std_normal_cdf(x):
    r = 0.5 * special.erfc(-np.asarray(x, dtype=np.float64) / _SQRT2)
    return float(r) if np.ndim(r) == 0 else r


def std_normal_pdf(x):
    x = np.asarray(x, dtype=np.float64)
    r = np.exp(-0.5 * x * x) / _SQRT2PI
    return float(r) if np.ndim(r) == 0 else r


def _acklam(p: np.ndarray) -> np.ndarray:
    x = np.empty_like(p)
    low = p < _P_LOW
    high = p > 1.0 - _P_LOW
    mid = ~(low | high)

    q = np.sqrt(-2.0 * np.log(p[low]))
    x[low] = ((((( _C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
        ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)

    q = np.sqrt(-2.0 * np.log1p(-p[high]))
    x[high] = -((((( _C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
        ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)

    q = p[mid] - 0.5
    r = q * q
    x[mid] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    return x


def std_normal_inv_cdf(p):
    """Standard normal quantile: rational approximation plus one Newton step."""
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError("inverse normal CDF is defined on the open interval (0, 1)")
    flat = arr.reshape(-1)
    x = _acklam(flat)
    # work in the tail nearest the argument so the residual keeps precision
    upper = flat > 0.5
    resid = np.where(upper,
                     (1.0 - flat) - 0.5 * special.erfc(x / _SQRT2),
                     0.5 * special.erfc(-x / _SQRT2) - flat)
    x = x - resid / std_normal_pdf(x)
    x = x.reshape(arr.shape)
    return float(x) if x.ndim == 0 else x


# -------------------------------------------------------- Clopper-Pearson


def clopper_pearson_lower(k: int, n: int, alpha: float) -> float:
    """One-sided (1 - alpha) lower confidence bound on a binomial proportion.

    Solves P(X >= k | p) = alpha, i.e. I_p(k, n - k + 1) = alpha, by bisection.
    """
    if n < 1:
        raise DomainError(f"need n >= 1 trials, got {n}")
    if not 0 <= k <= n:
        raise DomainError(f"successes k={k} outside [0, {n}]")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if k == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if special.betainc(k, n - k + 1, mid) < alpha:
            lo = mid
        else:
            hi = mid
    return lo
