"""Circular Hankel lifting, its SVD, and the convolution framelet expansion.

A signal ``f`` of length n is lifted to the n x d matrix whose row i is the
window ``f[i], f[i+1], ..., f[i+d-1]`` taken modulo n.  Multiplying the lift by
a local filter is circular cross-correlation; sandwiching it between a
non-local basis and a local basis gives the framelet coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidPatchError, NumericInputError, ReconstructionError, ShapeError
from .wavelets import NonLocalBasis


@dataclass(frozen=True, eq=False)
class HankelLift:
    source_length: int
    patch_size: int
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class HankelSvd:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.S)

    def truncate(self, k: int) -> np.ndarray:
        """Best rank-k approximation of the lifted matrix."""
        k = min(k, self.rank)
        return (self.U[:, :k] * self.S[:k]) @ self.V[:, :k].T


@dataclass(frozen=True, eq=False)
class FrameletDecomposition:
    phi: NonLocalBasis
    psi: np.ndarray
    coeffs: np.ndarray
    patch_size: int


def _lift_indices(n: int, d: int) -> np.ndarray:
    return (np.arange(n)[:, None] + np.arange(d)[None, :]) % n


def hankel_lift(f, d: int) -> HankelLift:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1:
        raise ShapeError(f"expected a 1-D signal, got shape {f.shape}")
    n = len(f)
    if d < 1 or d > n:
        raise InvalidPatchError(f"patch size must satisfy 1 <= d <= {n}, got {d}")
    mat = f[_lift_indices(n, d)]
    mat.setflags(write=False)
    return HankelLift(n, d, mat)


def hankel_unlift(mat, n: int | None = None) -> np.ndarray:
    """Average each circular anti-diagonal of an n x d matrix back onto n samples.

    This is the pseudo-inverse of :func:`hankel_lift` viewed as a linear map,
    i.e. ``(1/d)`` times its adjoint.
    """
    mat = np.asarray(mat, dtype=np.float64)
    rows, d = mat.shape
    n = rows if n is None else n
    if rows != n:
        raise ShapeError(f"expected {n} rows, got {rows}")
    out = np.zeros(n)
    np.add.at(out, _lift_indices(n, d).ravel(), mat.ravel())
    return out / d


def hankel_svd(H: HankelLift | np.ndarray, rank_tol: float = 1e-10) -> HankelSvd:
    """Thin SVD with singular values below ``rank_tol * S[0]`` dropped."""
    mat = H.matrix if isinstance(H, HankelLift) else np.asarray(H, dtype=np.float64)
    if rank_tol < 0:
        raise ValueError("rank_tol must be non-negative")
    if not np.all(np.isfinite(mat)):
        raise NumericInputError("Hankel matrix contains non-finite entries")
    U, S, Vt = np.linalg.svd(mat, full_matrices=False)
    keep = S > rank_tol * S[0] if S.size and S[0] > 0 else np.zeros(S.shape, dtype=bool)
    r = int(np.count_nonzero(keep))
    return HankelSvd(U[:, :r], S[:r], Vt[:r].T)


def svd_basis(H: HankelLift | np.ndarray) -> NonLocalBasis:
    """Complete n x n non-local basis from the left singular vectors."""
    mat = H.matrix if isinstance(H, HankelLift) else np.asarray(H, dtype=np.float64)
    if not np.all(np.isfinite(mat)):
        raise NumericInputError("Hankel matrix contains non-finite entries")
    U, _, _ = np.linalg.svd(mat, full_matrices=True)
    return NonLocalBasis(U, "svd-derived")


def _as_basis(phi) -> NonLocalBasis:
    if isinstance(phi, NonLocalBasis):
        return phi
    return NonLocalBasis(np.asarray(phi, dtype=np.float64), "custom")


def framelet_coeffs(f, phi, psi) -> FrameletDecomposition:
    """Coefficients ``C = Phi^T H_d(f) Psi`` for a d x d local basis ``Psi``."""
    f = np.asarray(f, dtype=np.float64)
    phi = _as_basis(phi)
    psi = np.asarray(psi, dtype=np.float64)
    n = len(f)
    if phi.matrix.shape != (n, n):
        raise ShapeError(f"non-local basis must be {n}x{n}, got {phi.matrix.shape}")
    if psi.ndim != 2 or psi.shape[0] != psi.shape[1]:
        raise ShapeError(f"local basis must be square, got {psi.shape}")
    d = psi.shape[0]
    if d > n:
        raise ShapeError(f"local basis size {d} exceeds signal length {n}")
    lift = hankel_lift(f, d)
    return FrameletDecomposition(phi, psi, phi.matrix.T @ lift.matrix @ psi, d)


def framelet_reconstruct(dec: FrameletDecomposition) -> np.ndarray:
    """Invert the framelet coefficients back to the signal.

    The lifted matrix is recovered as ``Phi C Psi^{-1}`` (``Psi^{-1} = Psi^T``
    for an orthogonal local basis) and collapsed by anti-diagonal averaging.
    """
    psi = dec.psi
    if np.linalg.cond(psi) > 1.0 / np.finfo(np.float64).eps:
        raise ReconstructionError("local basis is singular; expansion cannot be inverted")
    lifted = dec.phi.matrix @ dec.coeffs
    # lifted @ inv(psi) via solve on the transposed system
    lifted = np.linalg.solve(psi.T, lifted.T).T
    return hankel_unlift(lifted)


def patch_lift_2d(img, p: int) -> np.ndarray:
    """Circular 2-D analogue of the Hankel lift.

    Row ``y * W + x`` holds the p x p patch anchored at pixel (y, x), wrapped
    around the image borders and flattened row-major.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got shape {img.shape}")
    if p < 1:
        raise InvalidPatchError(f"patch side must be positive, got {p}")
    h, w = img.shape
    rows = (np.arange(h)[:, None] + np.arange(p)[None, :]) % h
    cols = (np.arange(w)[:, None] + np.arange(p)[None, :]) % w
    patches = img[rows[:, None, :, None], cols[None, :, None, :]]  # (h, w, p, p)
    return patches.reshape(h * w, p * p)


def patch_unlift_2d(mat, shape: tuple[int, int], p: int) -> np.ndarray:
    """Average every lifted copy of each pixel back onto an image of ``shape``."""
    mat = np.asarray(mat, dtype=np.float64)
    h, w = shape
    if mat.shape != (h * w, p * p):
        raise ShapeError(f"expected lifted matrix of shape {(h * w, p * p)}, got {mat.shape}")
    rows = (np.arange(h)[:, None] + np.arange(p)[None, :]) % h
    cols = (np.arange(w)[:, None] + np.arange(p)[None, :]) % w
    flat = (rows[:, None, :, None] * w + cols[None, :, None, :]).ravel()
    out = np.zeros(h * w)
    np.add.at(out, flat, mat.reshape(h, w, p, p).ravel())
    return out.reshape(h, w) / (p * p)


def singular_energy(svd: HankelSvd) -> np.ndarray:
    """Fraction of total squared Frobenius energy carried by each singular value."""
    sq = svd.S**2
    total = sq.sum()
    return sq / total if total > 0 else sq
