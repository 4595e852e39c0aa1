"""Fixed wavelet filter banks and non-local bases.

Two banks are used by the network: Haar (two taps, stride 2) and
Daubechies-4 (four taps, stride 4).  Both are exposed as 1-D analysis
filters plus a separable 2-D form with four subbands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError, ShapeError, UnknownWaveletError

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)

SUBBAND_NAMES = ("LL", "LH", "HL", "HH")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Two-channel orthonormal analysis bank with a fixed decimation stride."""

    name: str
    low: np.ndarray
    high: np.ndarray
    stride: int

    @property
    def length(self) -> int:
        return len(self.low)

    @property
    def code(self) -> str:
        """Single-digit identifier used in stage config strings."""
        return str(self.stride)


@dataclass(frozen=True, eq=False)
class FilterBank2D:
    """Separable 2-D bank: ``subbands[k]`` is the outer product for ``SUBBAND_NAMES[k]``."""

    base: FilterBank
    subbands: np.ndarray  # (4, L, L)
    stride: int


@dataclass(frozen=True, eq=False)
class NonLocalBasis:
    """Orthogonal n x n matrix whose columns are the non-local basis vectors."""

    matrix: np.ndarray
    kind: str

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _alternating_flip(low: np.ndarray) -> np.ndarray:
    # high[k] = (-1)^k * low[L-1-k]
    signs = np.where(np.arange(len(low)) % 2 == 0, 1.0, -1.0)
    return signs * low[::-1]


def haar_bank() -> FilterBank:
    low = _frozen([1.0 / SQRT2, 1.0 / SQRT2])
    high = _frozen([1.0 / SQRT2, -1.0 / SQRT2])
    return FilterBank("haar", low, high, stride=2)


def d4_bank() -> FilterBank:
    """Daubechies-4 scaling/wavelet pair (``db2``), decimated by 4.

    The stride matches the tap count so every output sample sees a disjoint
    block of four inputs; no boundary extension is ever needed.
    """
    low = np.array([1 + SQRT3, 3 + SQRT3, 3 - SQRT3, 1 - SQRT3]) / (4 * SQRT2)
    return FilterBank("d4", _frozen(low), _frozen(_alternating_flip(low)), stride=4)


_BANKS = {"2": haar_bank, "4": d4_bank}


def bank_from_digit(digit: str) -> FilterBank:
    try:
        return _BANKS[digit]()
    except KeyError:
        raise UnknownWaveletError(f"unknown wavelet code {digit!r}; expected '2' or '4'") from None


def to_2d(bank: FilterBank) -> FilterBank2D:
    lo, hi = bank.low, bank.high
    subbands = np.stack([np.outer(lo, lo), np.outer(lo, hi), np.outer(hi, lo), np.outer(hi, hi)])
    subbands.setflags(write=False)
    return FilterBank2D(bank, subbands, bank.stride)


def analysis_1d(bank: FilterBank, x) -> tuple[np.ndarray, np.ndarray]:
    """Strided valid correlation of ``x`` with the low and high taps."""
    x = np.asarray(x, dtype=np.float64)
    s, length = bank.stride, bank.length
    if x.ndim != 1 or len(x) < length or (len(x) - length) % s:
        raise ShapeError(f"signal of length {x.shape} does not tile with stride {s}, length {length}")
    windows = np.lib.stride_tricks.sliding_window_view(x, length)[::s]
    return windows @ bank.low, windows @ bank.high


def synthesis_1d(bank: FilterBank, low, high) -> np.ndarray:
    """Transposed strided convolution; the adjoint of :func:`analysis_1d`."""
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    if low.shape != high.shape or low.ndim != 1:
        raise ShapeError("low and high bands must be 1-D with equal length")
    s, length = bank.stride, bank.length
    out = np.zeros(s * (len(low) - 1) + length)
    for k in range(length):
        out[k : k + s * len(low) : s] += low * bank.low[k] + high * bank.high[k]
    return out


def dct_basis(n: int) -> NonLocalBasis:
    """Orthonormal DCT-II basis; column k is the k-th cosine."""
    if n < 1:
        raise InvalidDimensionError(f"DCT size must be positive, got {n}")
    k = np.arange(n)[None, :]
    m = np.arange(n)[:, None]
    mat = np.cos(np.pi * (2 * m + 1) * k / (2 * n))
    mat *= np.where(k == 0, math.sqrt(1.0 / n), math.sqrt(2.0 / n))
    return NonLocalBasis(mat, "dct")


def haar_block_basis(n: int) -> NonLocalBasis:
    """``[Phi_low  Phi_high]`` with one Haar pair per disjoint block of two samples."""
    if n < 2 or n % 2:
        raise InvalidDimensionError(f"Haar block basis needs an even size, got {n}")
    half = n // 2
    mat = np.zeros((n, n))
    cols = np.arange(half)
    mat[2 * cols, cols] = 1.0 / SQRT2
    mat[2 * cols + 1, cols] = 1.0 / SQRT2
    mat[2 * cols, half + cols] = 1.0 / SQRT2
    mat[2 * cols + 1, half + cols] = -1.0 / SQRT2
    return NonLocalBasis(mat, "haar-block")


def identity_basis(n: int) -> NonLocalBasis:
    if n < 1:
        raise InvalidDimensionError(f"basis size must be positive, got {n}")
    return NonLocalBasis(np.eye(n), "identity")
