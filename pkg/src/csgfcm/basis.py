"""Hierarchic 1D shape functions and their tensor-product 3D extension.

The 1D family on [-1, 1] consists of the two linear nodal modes plus
higher "bubble" modes built from integrals of Legendre polynomials:

    N_1 = (1 - x) / 2
    N_2 = (1 + x) / 2
    N_k = (P_{k-1} - P_{k-3}) / sqrt(2 (2k - 3)),   k >= 3

The bubbles vanish at both ends (which makes inter-cell continuity a pure
bookkeeping matter) and their derivatives are orthonormal:
N_k' = sqrt((2k - 3) / 2) P_{k-2}.
"""

from __future__ import annotations

import numpy as np

from .errors import CsgFcmError

__all__ = [
    "integrated_legendre_1d",
    "integrated_legendre_1d_deriv",
    "eval_modes_1d",
    "TensorBasis",
]


def _legendre_all(nmax: int, x: np.ndarray) -> np.ndarray:
    """Legendre polynomials P_0..P_nmax at x, shape (len(x), nmax + 1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (nmax + 1,))
    out[..., 0] = 1.0
    if nmax >= 1:
        out[..., 1] = x
    for n in range(1, nmax):
        out[..., n + 1] = ((2 * n + 1) * x * out[..., n] - n * out[..., n - 1]) / (n + 1)
    return out


def eval_modes_1d(p: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of all p + 1 modes at x.

    Returns two arrays of shape (len(x), p + 1); column k - 1 holds mode k.
    """
    if p < 1:
        raise CsgFcmError("polynomial degree must be >= 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    vals = np.empty((x.size, p + 1))
    ders = np.empty((x.size, p + 1))
    vals[:, 0] = 0.5 * (1.0 - x)
    vals[:, 1] = 0.5 * (1.0 + x)
    ders[:, 0] = -0.5
    ders[:, 1] = 0.5
    if p >= 2:
        leg = _legendre_all(p, x)
        for k in range(3, p + 2):
            scale = 1.0 / np.sqrt(2.0 * (2 * k - 3))
            vals[:, k - 1] = (leg[:, k - 1] - leg[:, k - 3]) * scale
            ders[:, k - 1] = np.sqrt((2 * k - 3) / 2.0) * leg[:, k - 2]
    return vals, ders


def integrated_legendre_1d(k: int, x) -> np.ndarray | float:
    """Value of the k-th 1D mode (1-based, k <= p + 1) at x in [-1, 1]."""
    vals, _ = eval_modes_1d(max(k - 1, 1), x)
    out = vals[:, k - 1]
    return float(out[0]) if np.asarray(x).ndim == 0 else out


def integrated_legendre_1d_deriv(k: int, x) -> np.ndarray | float:
    """Derivative of the k-th 1D mode at x."""
    _, ders = eval_modes_1d(max(k - 1, 1), x)
    out = ders[:, k - 1]
    return float(out[0]) if np.asarray(x).ndim == 0 else out


class TensorBasis:
    """Full tensor-product basis on the reference cell [-1, 1]^3.

    Scalar mode (i, j, k) (1-based per direction) is N_i(x) N_j(y) N_k(z);
    modes are flattened in lexicographic order with k fastest.
    """

    def __init__(self, degree: int):
        if degree < 1:
            raise CsgFcmError("polynomial degree must be >= 1")
        self.degree = int(degree)
        self.n1d = self.degree + 1
        self.n_modes = self.n1d**3

    def mode_tuple(self, flat: int) -> tuple[int, int, int]:
        """Flat mode index -> 1-based (i, j, k)."""
        n = self.n1d
        i, rem = divmod(flat, n * n)
        j, k = divmod(rem, n)
        return i + 1, j + 1, k + 1

    def eval(self, local_points) -> tuple[np.ndarray, np.ndarray]:
        """Values (n, m) and reference gradients (n, m, 3) of all modes."""
        pts = np.atleast_2d(np.asarray(local_points, dtype=float))
        vx, dx = eval_modes_1d(self.degree, pts[:, 0])
        vy, dy = eval_modes_1d(self.degree, pts[:, 1])
        vz, dz = eval_modes_1d(self.degree, pts[:, 2])
        n = pts.shape[0]
        vals = np.einsum("ni,nj,nk->nijk", vx, vy, vz).reshape(n, self.n_modes)
        grads = np.empty((n, self.n_modes, 3))
        grads[:, :, 0] = np.einsum("ni,nj,nk->nijk", dx, vy, vz).reshape(n, self.n_modes)
        grads[:, :, 1] = np.einsum("ni,nj,nk->nijk", vx, dy, vz).reshape(n, self.n_modes)
        grads[:, :, 2] = np.einsum("ni,nj,nk->nijk", vx, vy, dz).reshape(n, self.n_modes)
        return vals, grads

    def eval_global(self, local_points, cell_extents) -> tuple[np.ndarray, np.ndarray]:
        """Like :meth:`eval` but with gradients mapped by the cell Jacobian.

        ``cell_extents`` are the physical cell sizes (hx, hy, hz); the cell
        mapping is axis-aligned, so the Jacobian is diagonal with entries h/2.
        """
        vals, grads = self.eval(local_points)
        scale = 2.0 / np.asarray(cell_extents, dtype=float).reshape(3)
        return vals, grads * scale
