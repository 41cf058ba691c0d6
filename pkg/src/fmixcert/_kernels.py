"""Hot inner loops, each in a numba and a pure-numpy flavour.

The numba path is used when numba imports cleanly and the environment
variable ``FMIXCERT_DISABLE_NUMBA`` is unset (or ``0``).  Both flavours are
always importable under the ``*_nb`` / ``*_np`` names so they can be
cross-checked and benchmarked against each other.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = HAVE_NUMBA and os.environ.get("FMIXCERT_DISABLE_NUMBA", "0") in ("", "0")


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=64)
def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=64)
def twiddles(n: int, inverse: bool) -> np.ndarray:
    """exp(-+2 pi i k / n) for k < n/2 (forward sign negative)."""
    sign = 1.0 if inverse else -1.0
    k = np.arange(max(n // 2, 1))
    ang = sign * 2.0 * np.pi * k / n
    tw = np.cos(ang) + 1j * np.sin(ang)
    tw.flags.writeable = False
    return tw


@lru_cache(maxsize=64)
def dft_matrix(n: int, inverse: bool) -> np.ndarray:
    sign = 1.0 if inverse else -1.0
    k = np.arange(n)
    # reduce nk mod n before scaling so large products keep full precision
    ang = sign * 2.0 * np.pi * (np.outer(k, k) % n) / n
    m = np.cos(ang) + 1j * np.sin(ang)
    m.flags.writeable = False
    return m


# ---------------------------------------------------------------- radix-2 FFT


def fft_rows_radix2_np(x: np.ndarray, tw: np.ndarray) -> np.ndarray:
    """Unnormalized radix-2 DIT transform of every row of ``x`` (B, N)."""
    b, n = x.shape
    y = x[:, _bitrev(n)]
    h = 1
    while h < n:
        blocks = y.reshape(b, n // (2 * h), 2, h)
        w = tw[:: n // (2 * h)][:h]
        lo = blocks[:, :, 0, :]
        hi = w * blocks[:, :, 1, :]
        y = np.stack((lo + hi, lo - hi), axis=2).reshape(b, n)
        h *= 2
    return y


@njit(cache=True, nogil=True)
def _fft_rows_radix2_nb(x, tw, rev):
    b, n = x.shape
    out = np.empty_like(x)
    for r in range(b):
        for i in range(n):
            out[r, i] = x[r, rev[i]]
        h = 1
        while h < n:
            stride = n // (2 * h)
            for start in range(0, n, 2 * h):
                for k in range(h):
                    w = tw[k * stride]
                    lo = out[r, start + k]
                    hi = w * out[r, start + k + h]
                    out[r, start + k] = lo + hi
                    out[r, start + k + h] = lo - hi
            h *= 2
    return out


def fft_rows_radix2_nb(x: np.ndarray, tw: np.ndarray) -> np.ndarray:
    return _fft_rows_radix2_nb(np.ascontiguousarray(x), tw, _bitrev(x.shape[1]))


# ------------------------------------------------------------- direct O(N^2)


def dft_rows_np(x: np.ndarray, mat: np.ndarray) -> np.ndarray:
    return x @ mat.T


@njit(cache=True, nogil=True)
def _dft_rows_nb(x, mat):
    b, n = x.shape
    out = np.zeros((b, n), dtype=np.complex128)
    for r in range(b):
        for k in range(n):
            acc = 0j
            for j in range(n):
                acc += mat[k, j] * x[r, j]
            out[r, k] = acc
    return out


def dft_rows_nb(x: np.ndarray, mat: np.ndarray) -> np.ndarray:
    return _dft_rows_nb(np.ascontiguousarray(x), mat)


def fft_rows(x: np.ndarray, inverse: bool = False, use_numba: bool | None = None) -> np.ndarray:
    """Unnormalized 1D DFT of every row; radix-2 when possible, direct otherwise."""
    if use_numba is None:
        use_numba = USE_NUMBA
    x = np.ascontiguousarray(x, dtype=np.complex128)
    n = x.shape[1]
    if n == 1:
        return x.copy()
    if is_power_of_two(n):
        tw = twiddles(n, inverse)
        return fft_rows_radix2_nb(x, tw) if use_numba else fft_rows_radix2_np(x, tw)
    mat = dft_matrix(n, inverse)
    return dft_rows_nb(x, mat) if use_numba else dft_rows_np(x, mat)


# ------------------------------------------------------ bilinear affine warp


def _reflect_np(t: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros_like(t)
    period = 2.0 * (n - 1)
    t = np.mod(t, period)
    return np.where(t > n - 1, period - t, t)


def warp_bilinear_np(img: np.ndarray, inv: np.ndarray, center: np.ndarray,
                     shift: np.ndarray) -> np.ndarray:
    """Sample ``img`` (H, W, C) at ``inv @ (p - center - shift) + center``.

    Coordinates are (row, col); out-of-range samples are mirror-reflected
    about the edge pixel centres.
    """
    h, w, _ = img.shape
    rr, cc = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    dr = rr - center[0] - shift[0]
    dc = cc - center[1] - shift[1]
    sr = _reflect_np(inv[0, 0] * dr + inv[0, 1] * dc + center[0], h)
    sc = _reflect_np(inv[1, 0] * dr + inv[1, 1] * dc + center[1], w)
    r0 = np.floor(sr).astype(np.int64)
    c0 = np.floor(sc).astype(np.int64)
    fr = (sr - r0)[..., None]
    fc = (sc - c0)[..., None]
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    top = img[r0, c0] * (1.0 - fc) + img[r0, c1] * fc
    bot = img[r1, c0] * (1.0 - fc) + img[r1, c1] * fc
    return top * (1.0 - fr) + bot * fr


@njit(cache=True, nogil=True)
def _reflect_nb(t, n):
    if n == 1:
        return 0.0
    period = 2.0 * (n - 1)
    t = t - period * np.floor(t / period)
    if t > n - 1:
        t = period - t
    return t


@njit(cache=True, nogil=True)
def warp_bilinear_nb(img, inv, center, shift):
    h, w, ch = img.shape
    out = np.empty((h, w, ch), dtype=np.float64)
    for r in range(h):
        dr = r - center[0] - shift[0]
        for c in range(w):
            dc = c - center[1] - shift[1]
            sr = _reflect_nb(inv[0, 0] * dr + inv[0, 1] * dc + center[0], h)
            sc = _reflect_nb(inv[1, 0] * dr + inv[1, 1] * dc + center[1], w)
            r0 = int(np.floor(sr))
            c0 = int(np.floor(sc))
            fr = sr - r0
            fc = sc - c0
            r1 = min(r0 + 1, h - 1)
            c1 = min(c0 + 1, w - 1)
            for k in range(ch):
                top = img[r0, c0, k] * (1.0 - fc) + img[r0, c1, k] * fc
                bot = img[r1, c0, k] * (1.0 - fc) + img[r1, c1, k] * fc
                out[r, c, k] = top * (1.0 - fr) + bot * fr
    return out


def warp_bilinear(img, inv, center, shift, use_numba: bool | None = None):
    if use_numba is None:
        use_numba = USE_NUMBA
    img = np.ascontiguousarray(img, dtype=np.float64)
    inv = np.ascontiguousarray(inv, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    shift = np.asarray(shift, dtype=np.float64)
    if use_numba:
        return warp_bilinear_nb(img, inv, center, shift)
    return warp_bilinear_np(img, inv, center, shift)
