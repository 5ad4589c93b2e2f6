"""Iterative radix-2 FFT, vectorized over leading axes.

The transform runs along the last axis. Lengths must be powers of two.
"""

from functools import lru_cache

import numpy as np


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@lru_cache(maxsize=None)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(m: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.arange(m // 2) / m)


def fft(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"FFT length must be a power of two, got {n}")
    lead = x.shape[:-1]
    y = x[..., _bit_reverse(n)]
    m = 2
    while m <= n:
        half = m // 2
        blocks = y.reshape(*lead, n // m, m)
        even = blocks[..., :half]
        odd = blocks[..., half:] * _twiddles(m)
        y = np.concatenate([even + odd, even - odd], axis=-1).reshape(*lead, n)
        m *= 2
    return y


def ifft(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.complex128)
    return np.conj(fft(np.conj(X))) / X.shape[-1]


def rfft(x) -> np.ndarray:
    """Real-input FFT returning the n/2 + 1 non-negative frequency bins.

    Packs even/odd samples into one complex sequence of half length, so the
    cost is a single n/2-point transform plus an O(n) untangling pass.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"FFT length must be a power of two, got {n}")
    if n == 1:
        return x.astype(np.complex128)
    h = n // 2
    Z = fft(x[..., 0::2] + 1j * x[..., 1::2])
    # Z[h] wraps to Z[0]
    Zr = np.conj(np.concatenate([Z[..., :1], Z[..., :0:-1]], axis=-1))
    even = 0.5 * (Z + Zr)
    odd = -0.5j * (Z - Zr)
    w = np.exp(-2j * np.pi * np.arange(h) / n)
    out = np.empty(x.shape[:-1] + (h + 1,), dtype=np.complex128)
    out[..., :h] = even + w * odd
    out[..., h] = (even[..., 0] - odd[..., 0])
    return out
