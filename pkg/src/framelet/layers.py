"""Array-level primitives for the network: convolution and wavelet (un)pooling.

Feature maps are laid out ``(..., C, H, W)``; convolution additionally
expects a leading batch axis.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError
from .wavelets import FilterBank2D


def conv_windows(x: np.ndarray, k: int) -> np.ndarray:
    """Zero-padded k x k neighbourhoods, shape ``(N, C, H, W, k, k)``."""
    pad = k // 2
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    return sliding_window_view(x, (k, k), axis=(2, 3))


def conv2d(x: np.ndarray, weight: np.ndarray, windows: np.ndarray | None = None) -> np.ndarray:
    """Same-size cross-correlation of ``x`` (N, C, H, W) with ``weight`` (O, C, k, k)."""
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"cannot convolve input {x.shape} with weight {weight.shape}")
    k = weight.shape[-1]
    if windows is None:
        windows = conv_windows(x, k)
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))  # (N, H, W, O)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_grads(
    grad_out: np.ndarray, weight: np.ndarray, windows: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Input and weight gradients of :func:`conv2d`."""
    grad_w = np.tensordot(grad_out, windows, axes=([0, 2, 3], [0, 2, 3]))
    flipped = np.ascontiguousarray(weight.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    grad_x = conv2d(grad_out, flipped)
    return grad_x, grad_w


def _check_divisible(h: int, w: int, s: int) -> None:
    if h % s or w % s:
        raise ShapeError(f"feature map {h}x{w} is not divisible by wavelet stride {s}")


def pool_wavelet(feat: np.ndarray, bank: FilterBank2D) -> tuple[np.ndarray, np.ndarray]:
    """Split every channel into its LL band and the stacked LH/HL/HH bands.

    Taps and stride coincide for both banks, so the strided correlation acts
    on disjoint s x s blocks.  ``highs`` holds the LH channels first, then HL,
    then HH.
    """
    s = bank.stride
    *lead, c, h, w = feat.shape
    _check_divisible(h, w, s)
    hs, ws = h // s, w // s
    blocks = feat.reshape(*lead, c, hs, s, ws, s)
    blocks = np.moveaxis(blocks, -3, -2).reshape(*lead, c, hs, ws, s * s)
    filters = bank.subbands.reshape(4, s * s).astype(feat.dtype, copy=False)
    bands = blocks @ filters.T  # (..., C, hs, ws, 4)
    bands = np.moveaxis(bands, -1, -4)  # (..., 4, C, hs, ws)
    low = np.ascontiguousarray(bands[..., 0, :, :, :])
    highs = np.ascontiguousarray(bands[..., 1:, :, :, :]).reshape(*lead, 3 * c, hs, ws)
    return low, highs


def unpool_wavelet(low: np.ndarray, highs: np.ndarray, bank: FilterBank2D) -> np.ndarray:
    """Adjoint of :func:`pool_wavelet` (its exact inverse for Haar)."""
    *lead, c, hs, ws = low.shape
    if highs.shape != (*lead, 3 * c, hs, ws):
        raise ShapeError(f"high bands {highs.shape} do not match low band {low.shape}")
    s = bank.stride
    dtype = np.result_type(low, highs)
    bands = np.concatenate([low[..., None, :, :, :], highs.reshape(*lead, 3, c, hs, ws)], axis=-4)
    bands = np.moveaxis(bands, -4, -1)  # (..., C, hs, ws, 4)
    filters = bank.subbands.reshape(4, s * s).astype(dtype, copy=False)
    blocks = (bands @ filters).reshape(*lead, c, hs, ws, s, s)
    blocks = np.moveaxis(blocks, -2, -3)  # (..., C, hs, s, ws, s)
    return np.ascontiguousarray(blocks).reshape(*lead, c, hs * s, ws * s)
