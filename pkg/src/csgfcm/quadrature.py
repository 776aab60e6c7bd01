"""Adaptive octree quadrature for cut cells.

A cell is recursively partitioned: a leaf whose 8 corner samples and center
sample disagree on membership is "cut" and split into octants until the
maximum depth is reached.  Every leaf then carries a tensor Gauss rule whose
points are weighted by the indicator alpha (1 in the physical domain,
10^-q in the fictitious part).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CsgFcmError
from .geometry import Aabb, Solid

__all__ = ["QuadratureConfig", "OctreeQuadrature", "gauss_1d", "gauss_tensor", "octree_leaves"]


@dataclass(frozen=True)
class QuadratureConfig:
    """Octree depth, Gauss order per leaf per direction, alpha exponent."""

    depth: int = 4
    gauss: int = 2
    alpha_exponent: float = 8.0

    def __post_init__(self):
        if self.depth < 0:
            raise CsgFcmError("octree depth must be >= 0")
        if self.gauss < 1:
            raise CsgFcmError("Gauss order must be >= 1")
        if self.alpha_exponent <= 0.0:
            raise CsgFcmError("alpha exponent must be positive")

    @property
    def alpha_fict(self) -> float:
        return 10.0 ** (-self.alpha_exponent)


@dataclass
class OctreeQuadrature:
    """Quadrature data for one cell.

    ``weights`` carry the full physical measure (leaf scaling times cell
    Jacobian) but not alpha, which is stored per point in ``alpha``.
    ``local`` holds the points in cell-reference coordinates [-1, 1]^3.
    """

    leaf_boxes: np.ndarray  # (L, 2, 3) global lo/hi corners
    points: np.ndarray  # (P, 3) global
    local: np.ndarray  # (P, 3)
    weights: np.ndarray  # (P,)
    alpha: np.ndarray  # (P,)

    @property
    def n_leaves(self) -> int:
        return self.leaf_boxes.shape[0]


@lru_cache(maxsize=32)
def gauss_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=32)
def gauss_tensor(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on [-1, 1]^3: points (n^3, 3), weights (n^3,)."""
    x, w = gauss_1d(n)
    px, py, pz = np.meshgrid(x, x, x, indexing="ij")
    pts = np.column_stack([px.ravel(), py.ravel(), pz.ravel()])
    wx, wy, wz = np.meshgrid(w, w, w, indexing="ij")
    return pts, (wx * wy * wz).ravel()


# Unit-box sample offsets for cut detection: 8 corners plus the center.
_CUT_SAMPLES = np.array(
    [[i, j, k] for i in (0.0, 1.0) for j in (0.0, 1.0) for k in (0.0, 1.0)] + [[0.5, 0.5, 0.5]]
)


def octree_leaves(cell: Aabb, solid: Solid, config: QuadratureConfig) -> OctreeQuadrature:
    """Partition a cell and return its alpha-weighted Gauss points."""
    cell_lo = cell.lo
    cell_ext = cell.extents
    if np.any(cell_ext <= 0.0):
        raise CsgFcmError("cell has non-positive extent")

    def to_global(local):
        return cell_lo + 0.5 * (local + 1.0) * cell_ext

    # Level sweep over leaf candidates in cell-local coordinates.
    lo = np.array([[-1.0, -1.0, -1.0]])
    hi = np.array([[1.0, 1.0, 1.0]])
    leaves_lo, leaves_hi = [], []
    for level in range(config.depth + 1):
        if lo.shape[0] == 0:
            break
        if level == config.depth:
            leaves_lo.append(lo)
            leaves_hi.append(hi)
            break
        samples = lo[:, None, :] + _CUT_SAMPLES[None, :, :] * (hi - lo)[:, None, :]
        inside = solid.contains(to_global(samples.reshape(-1, 3))).reshape(lo.shape[0], 9)
        cut = np.any(inside != inside[:, :1], axis=1)
        leaves_lo.append(lo[~cut])
        leaves_hi.append(hi[~cut])
        if not cut.any():
            lo = lo[:0]
            break
        # Split each cut box into its 8 octants.
        clo, chi = lo[cut], hi[cut]
        mid = 0.5 * (clo + chi)
        corners = _CUT_SAMPLES[:8]
        lo = (clo[:, None, :] * (1.0 - corners) + mid[:, None, :] * corners).reshape(-1, 3)
        hi = (mid[:, None, :] * (1.0 - corners) + chi[:, None, :] * corners).reshape(-1, 3)

    lo = np.concatenate(leaves_lo) if leaves_lo else np.zeros((0, 3))
    hi = np.concatenate(leaves_hi) if leaves_hi else np.zeros((0, 3))

    nodes, wts = gauss_tensor(config.gauss)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    local = (mid[:, None, :] + half[:, None, :] * nodes[None, :, :]).reshape(-1, 3)
    leaf_scale = np.prod(half, axis=1)
    cell_jac = float(np.prod(cell_ext)) / 8.0
    weights = (wts[None, :] * leaf_scale[:, None]).reshape(-1) * cell_jac
    points = to_global(local)
    inside = solid.contains(points)
    alpha = np.where(inside, 1.0, config.alpha_fict)

    boxes = np.stack([to_global(lo), to_global(hi)], axis=1)
    return OctreeQuadrature(boxes, points, local, weights, alpha)
