"""Cartesian cell grid, dof bookkeeping, element integration and assembly.

The embedding domain is covered by an axis-aligned grid of high-order cells.
Cells that contain no part of the physical domain carry no dofs; the
remaining "active" cells are integrated with the octree quadrature and
assembled into a global sparse system.

Dof identification exploits that the grid is Cartesian and the basis is a
full tensor product: the global scalar space is the tensor product of three
1D spaces (grid-node modes plus per-interval bubbles), so modes shared
across faces, edges and vertices match up by construction and no
orientation bookkeeping is needed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import TensorBasis
from .errors import CsgFcmError, EmptyModelError
from .geometry import Aabb, Solid
from .quadrature import OctreeQuadrature, QuadratureConfig, octree_leaves

__all__ = [
    "Material",
    "BodyLoad",
    "CellGrid",
    "active_cells",
    "DofMap",
    "element_matrices",
    "GlobalSystem",
    "assemble",
]


@dataclass(frozen=True)
class Material:
    """Isotropic linear-elastic material."""

    youngs_modulus: float
    poisson_ratio: float

    def __post_init__(self):
        if not (np.isfinite(self.youngs_modulus) and self.youngs_modulus > 0.0):
            raise CsgFcmError("Young's modulus must be positive")
        if not (-1.0 < self.poisson_ratio < 0.5):
            raise CsgFcmError("Poisson ratio must lie in (-1, 0.5)")

    @property
    def lame_lambda(self) -> float:
        e, nu = self.youngs_modulus, self.poisson_ratio
        return e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @property
    def lame_mu(self) -> float:
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))

    def elasticity_matrix(self) -> np.ndarray:
        """6x6 Voigt form, strain order (xx, yy, zz, yz, zx, xy)."""
        lam, mu = self.lame_lambda, self.lame_mu
        c = np.zeros((6, 6))
        c[:3, :3] = lam
        c[np.arange(3), np.arange(3)] += 2.0 * mu
        c[np.arange(3, 6), np.arange(3, 6)] = mu
        return c


@dataclass(frozen=True)
class BodyLoad:
    """Constant body force per unit volume."""

    b: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.b, dtype=float).reshape(3)
        if not np.all(np.isfinite(vec)):
            raise CsgFcmError("body load must be finite")
        object.__setattr__(self, "b", vec)

    @staticmethod
    def zero() -> "BodyLoad":
        return BodyLoad(np.zeros(3))


class CellGrid:
    """Axis-aligned Cartesian grid of cells over the embedding domain."""

    def __init__(self, bbox: Aabb, counts):
        counts = tuple(int(c) for c in counts)
        if len(counts) != 3 or any(c < 1 for c in counts):
            raise CsgFcmError("cell counts must be three integers >= 1")
        if bbox.is_empty or np.any(bbox.extents <= 0.0):
            raise CsgFcmError("grid bounding box must have positive volume")
        self.bbox = bbox
        self.counts = counts
        self.cell_extents = bbox.extents / np.asarray(counts, dtype=float)

    @staticmethod
    def from_solid(solid: Solid, counts, margin: float = 1e-6) -> "CellGrid":
        """Auto-size the grid so it strictly contains the model bounds."""
        box = solid.bounding_box()
        if box.is_empty:
            raise EmptyModelError("empty model")
        pad = margin * float(np.max(box.extents))
        if pad <= 0.0:
            pad = margin
        return CellGrid(box.inflated(pad), counts)

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.counts
        return nx * ny * nz

    def cells(self):
        nx, ny, nz = self.counts
        for cx in range(nx):
            for cy in range(ny):
                for cz in range(nz):
                    yield (cx, cy, cz)

    def cell_box(self, cell) -> Aabb:
        idx = np.asarray(cell, dtype=float)
        lo = self.bbox.lo + idx * self.cell_extents
        return Aabb(lo, lo + self.cell_extents)

    def locate(self, points) -> np.ndarray:
        """Cell index triples containing each point (clamped to the grid)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (pts - self.bbox.lo) / self.cell_extents
        idx = np.floor(rel).astype(int)
        return np.clip(idx, 0, np.asarray(self.counts) - 1)

    def local_coords(self, points, cells) -> np.ndarray:
        """Map global points into [-1, 1]^3 of their containing cells."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = self.bbox.lo + np.asarray(cells, dtype=float) * self.cell_extents
        return 2.0 * (pts - lo) / self.cell_extents - 1.0


def active_cells(grid: CellGrid, solid: Solid, samples_per_axis: int = 5) -> list[tuple[int, int, int]]:
    """Cells containing any physical material, by uniform lattice sampling.

    Each cell is probed on a samples^3 lattice including its faces; a single
    inside sample activates the cell.
    """
    if samples_per_axis < 2:
        raise CsgFcmError("need at least 2 membership samples per axis")
    s = samples_per_axis
    nx, ny, nz = grid.counts
    frac = np.linspace(0.0, 1.0, s)

    def axis_coords(lo, h, n):
        return (lo + (np.arange(n)[:, None] + frac[None, :]) * h).ravel()

    xs = axis_coords(grid.bbox.lo[0], grid.cell_extents[0], nx)
    ys = axis_coords(grid.bbox.lo[1], grid.cell_extents[1], ny)
    zs = axis_coords(grid.bbox.lo[2], grid.cell_extents[2], nz)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    inside = solid.contains(pts).reshape(nx, s, ny, s, nz, s)
    hit = np.any(inside, axis=(1, 3, 5))
    return [tuple(idx) for idx in np.argwhere(hit)]


class DofMap:
    """Global numbering of tensor-product modes on the active cells.

    Per direction with n cells the 1D space has n + 1 grid-node modes plus
    (p - 1) bubbles per interval.  A cell's local mode m in one direction
    maps to: m = 0 -> left node, m = 1 -> right node, m >= 2 -> interval
    bubble m.  Scalar 3D modes are the tensor triples; each carries three
    displacement components.
    """

    def __init__(self, grid: CellGrid, degree: int, active: list[tuple[int, int, int]]):
        if degree < 1:
            raise CsgFcmError("polynomial degree must be >= 1")
        if not active:
            raise EmptyModelError("empty model")
        self.grid = grid
        self.degree = int(degree)
        self.active = sorted(active)
        self._m1d = tuple(n + 1 + n * (degree - 1) for n in grid.counts)

        structured = np.array(
            [self._cell_structured_modes(cell) for cell in self.active], dtype=np.int64
        )
        unique, inverse = np.unique(structured.ravel(), return_inverse=True)
        self.n_scalar_modes = int(unique.size)
        self._cell_modes = inverse.reshape(structured.shape).astype(np.int64)
        self._cell_index = {cell: i for i, cell in enumerate(self.active)}

    def _axis_mode_ids(self, c: int, n: int) -> np.ndarray:
        p = self.degree
        ids = np.empty(p + 1, dtype=np.int64)
        ids[0] = c
        ids[1] = c + 1
        if p >= 2:
            ids[2:] = (n + 1) + c * (p - 1) + np.arange(p - 1)
        return ids

    def _cell_structured_modes(self, cell) -> np.ndarray:
        nx, ny, nz = self.grid.counts
        mx, my, mz = self._m1d
        gx = self._axis_mode_ids(cell[0], nx)
        gy = self._axis_mode_ids(cell[1], ny)
        gz = self._axis_mode_ids(cell[2], nz)
        # Flattening matches TensorBasis mode order (k fastest).
        return ((gx[:, None, None] * my + gy[None, :, None]) * mz + gz[None, None, :]).ravel()

    @property
    def n_dofs(self) -> int:
        return 3 * self.n_scalar_modes

    def full_grid_n_dofs(self) -> int:
        """Dof count the same grid would have with every cell active."""
        return 3 * int(np.prod(self._m1d))

    def is_active(self, cell) -> bool:
        return tuple(cell) in self._cell_index

    def cell_scalar_modes(self, cell) -> np.ndarray:
        return self._cell_modes[self._cell_index[tuple(cell)]]

    def cell_dofs(self, cell) -> np.ndarray:
        """Global dof indices in local order (mode-major, component-minor)."""
        scalar = self.cell_scalar_modes(cell)
        return (3 * scalar[:, None] + np.arange(3)[None, :]).ravel()


_CHUNK = 4096


def element_matrices(
    cell: Aabb,
    solid: Solid,
    material: Material,
    basis: TensorBasis,
    config: QuadratureConfig,
    body: BodyLoad | None = None,
    quad: OctreeQuadrature | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Element stiffness and body-load vector from octree quadrature.

    The stiffness is accumulated through the nine gradient cross-moment
    matrices S_ab = sum_p w_p alpha_p dN_i/dx_a dN_j/dx_b, from which the
    isotropic elasticity kernel follows in index form.
    """
    if quad is None:
        quad = octree_leaves(cell, solid, config)
    m = basis.n_modes
    s_mats = [[np.zeros((m, m)) for _ in range(3)] for _ in range(3)]
    nsum = np.zeros(m)
    ext = cell.extents
    for start in range(0, quad.points.shape[0], _CHUNK):
        sl = slice(start, start + _CHUNK)
        vals, grads = basis.eval_global(quad.local[sl], ext)
        w = quad.weights[sl] * quad.alpha[sl]
        # Contiguous per-direction copies keep the cross moments on the
        # fast matrix-product path.
        g = [np.ascontiguousarray(grads[:, :, a]) for a in range(3)]
        for a in range(3):
            gw = g[a] * w[:, None]
            for b in range(a, 3):
                s_mats[a][b] += gw.T @ g[b]
        nsum += w @ vals
    for a in range(3):
        for b in range(a):
            s_mats[a][b] = s_mats[b][a].T
        s_mats[a][a] = 0.5 * (s_mats[a][a] + s_mats[a][a].T)

    lam, mu = material.lame_lambda, material.lame_mu
    trace = s_mats[0][0] + s_mats[1][1] + s_mats[2][2]
    ke = np.empty((3 * m, 3 * m))
    for a in range(3):
        for b in range(3):
            block = lam * s_mats[a][b] + mu * s_mats[a][b].T
            if a == b:
                block = block + mu * trace
            ke[a::3, b::3] = block
    ke = 0.5 * (ke + ke.T)

    fe = np.zeros(3 * m)
    if body is not None and np.any(body.b != 0.0):
        for a in range(3):
            fe[a::3] = body.b[a] * nsum
    return ke, fe


@dataclass
class GlobalSystem:
    """Assembled sparse stiffness, load vector and dof bookkeeping."""

    stiffness: sp.csr_matrix
    load: np.ndarray
    dof_map: DofMap
    basis: TensorBasis
    material: Material
    config: QuadratureConfig
    solid: Solid

    @property
    def n_dofs(self) -> int:
        return self.dof_map.n_dofs


def assemble(
    grid: CellGrid,
    solid: Solid,
    material: Material,
    degree: int,
    config: QuadratureConfig,
    body: BodyLoad | None = None,
    active: list[tuple[int, int, int]] | None = None,
    threads: int = 1,
) -> GlobalSystem:
    """Integrate all active cells and assemble the global system."""
    if active is None:
        active = active_cells(grid, solid)
    if not active:
        raise EmptyModelError("empty model")
    dof_map = DofMap(grid, degree, active)
    basis = TensorBasis(degree)

    def one_cell(cell):
        ke, fe = element_matrices(grid.cell_box(cell), solid, material, basis, config, body)
        return cell, ke, fe

    n = dof_map.n_dofs
    load = np.zeros(n)
    k = sp.csr_matrix((n, n))
    # Stream cells in fixed-size batches: bounds the triplet workspace and
    # keeps assembly deterministic (cells merge in grid order).
    nd_cell = (3 * basis.n_modes) ** 2
    batch_size = max(1, 8_000_000 // nd_cell)
    cells = dof_map.active
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for start in range(0, len(cells), batch_size):
            batch = cells[start : start + batch_size]
            results = list(pool.map(one_cell, batch)) if pool else [one_cell(c) for c in batch]
            rows, cols, vals = [], [], []
            for cell, ke, fe in results:
                dofs = dof_map.cell_dofs(cell).astype(np.int32)
                nd = dofs.size
                rows.append(np.repeat(dofs, nd))
                cols.append(np.tile(dofs, nd))
                vals.append(ke.ravel())
                np.add.at(load, dofs, fe)
            kb = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n, n),
            ).tocsr()
            k = k + kb
    finally:
        if pool:
            pool.shutdown()
    return GlobalSystem(k, load, dof_map, basis, material, config, solid)
