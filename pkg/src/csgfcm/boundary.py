"""Boundary conditions on explicit analytic surface patches.

The embedded discretization has no boundary faces, so Neumann tractions and
penalty Dirichlet data are integrated over explicitly described patches
(planar rectangles, disks, or raw triangle lists) lying on the physical
boundary.  Each triangle is integrated with the 3-point edge-midpoint rule,
which is exact for quadratics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import BoundaryConditionError, GeometryError
from .geometry import Frame
from .discretization import GlobalSystem

__all__ = [
    "RectPatch",
    "DiskPatch",
    "TrianglePatch",
    "Triangulation",
    "triangulate_patch",
    "NeumannSpec",
    "DirichletSpec",
    "neumann_load",
    "apply_penalty_dirichlet",
    "default_penalty",
]


@dataclass(frozen=True)
class Triangulation:
    vertices: np.ndarray  # (v, 3)
    faces: np.ndarray  # (t, 3) int

    @property
    def corners(self) -> np.ndarray:
        """Triangle corner coordinates, shape (t, 3, 3)."""
        return self.vertices[self.faces]

    def areas(self) -> np.ndarray:
        c = self.corners
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    def normals(self) -> np.ndarray:
        c = self.corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return n / np.linalg.norm(n, axis=1)[:, None]

    def total_area(self) -> float:
        return float(self.areas().sum())


@dataclass(frozen=True)
class RectPatch:
    """Planar rectangle centered at the frame origin.

    Spans [-a/2, a/2] x [-b/2, b/2] along the first two frame axes;
    triangulated into 2 m^2 triangles with normals along the third axis.
    """

    frame: Frame
    extents: tuple[float, float]
    resolution: int = 8

    def __post_init__(self):
        a, b = self.extents
        if a <= 0.0 or b <= 0.0:
            raise GeometryError("rectangle extents must be positive")
        if self.resolution < 1:
            raise GeometryError("patch resolution must be >= 1")


@dataclass(frozen=True)
class DiskPatch:
    """Planar disk centered at the frame origin in the frame's 1-2 plane."""

    frame: Frame
    radius: float
    resolution: int = 32

    def __post_init__(self):
        if self.radius <= 0.0:
            raise GeometryError("disk radius must be positive")
        if self.resolution < 3:
            raise GeometryError("disk resolution must be >= 3")


@dataclass(frozen=True)
class TrianglePatch:
    """Escape hatch: a raw (possibly non-watertight) triangle list."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        faces = np.asarray(self.faces, dtype=int)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise GeometryError("triangle patch vertices must have shape (v, 3)")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise GeometryError("triangle patch faces must have shape (t, 3)")
        if faces.size and (faces.min() < 0 or faces.max() >= verts.shape[0]):
            raise GeometryError("triangle patch face index out of range")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)


def triangulate_patch(patch) -> Triangulation:
    """Triangulate a patch into global-coordinate triangles."""
    if isinstance(patch, TrianglePatch):
        return Triangulation(patch.vertices, patch.faces)
    if isinstance(patch, RectPatch):
        m = patch.resolution
        a, b = patch.extents
        u = np.linspace(-0.5 * a, 0.5 * a, m + 1)
        v = np.linspace(-0.5 * b, 0.5 * b, m + 1)
        uu, vv = np.meshgrid(u, v, indexing="ij")
        plane = np.column_stack([uu.ravel(), vv.ravel(), np.zeros(uu.size)])
        verts = patch.frame.to_global(plane)
        faces = []
        for i in range(m):
            for j in range(m):
                v00 = i * (m + 1) + j
                v10 = (i + 1) * (m + 1) + j
                # CCW in the frame plane: triangle normals equal the 3rd axis.
                faces.append([v00, v10, v10 + 1])
                faces.append([v00, v10 + 1, v00 + 1])
        return Triangulation(verts, np.asarray(faces, dtype=int))
    if isinstance(patch, DiskPatch):
        sectors = patch.resolution
        rings = max(1, patch.resolution // 8)
        ang = np.linspace(0.0, 2.0 * np.pi, sectors, endpoint=False)
        verts = [np.zeros((1, 3))]
        for i in range(1, rings + 1):
            r = patch.radius * i / rings
            verts.append(np.column_stack([r * np.cos(ang), r * np.sin(ang), np.zeros(sectors)]))
        plane = np.concatenate(verts)
        faces = []
        ring_start = lambda i: 1 + (i - 1) * sectors
        for s in range(sectors):
            faces.append([0, ring_start(1) + s, ring_start(1) + (s + 1) % sectors])
        for i in range(1, rings):
            inner, outer = ring_start(i), ring_start(i + 1)
            for s in range(sectors):
                sn = (s + 1) % sectors
                faces.append([inner + s, outer + s, outer + sn])
                faces.append([inner + s, outer + sn, inner + sn])
        return Triangulation(patch.frame.to_global(plane), np.asarray(faces, dtype=int))
    raise GeometryError(f"unknown patch type: {type(patch).__name__}")


@dataclass(frozen=True)
class NeumannSpec:
    """Prescribed traction (force per area) on a surface patch."""

    patch: object
    traction: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.traction, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise GeometryError("traction must be finite")
        object.__setattr__(self, "traction", t)


@dataclass(frozen=True)
class DirichletSpec:
    """Penalty-enforced displacement on a surface patch.

    ``displacement`` holds one optional value per component; unconstrained
    components are None.  ``penalty`` of None selects the default scaling
    beta = 1e8 E / h_min.
    """

    patch: object
    displacement: tuple[float | None, float | None, float | None]
    penalty: float | None = None

    def __post_init__(self):
        disp = tuple(None if d is None else float(d) for d in self.displacement)
        if len(disp) != 3:
            raise GeometryError("displacement needs three (optional) components")
        if all(d is None for d in disp):
            raise GeometryError("Dirichlet spec constrains no component")
        if self.penalty is not None and self.penalty <= 0.0:
            raise GeometryError("penalty must be positive")
        object.__setattr__(self, "displacement", disp)


def default_penalty(system: GlobalSystem) -> float:
    h_min = float(np.min(system.dof_map.grid.cell_extents))
    return 1e8 * system.material.youngs_modulus / h_min


def _duffy_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed tensor Gauss rule on the unit triangle, exact to ``degree``.

    Returns reference coordinates (n, 2) and weights summing to 1/2.
    """
    n = (degree + 3) // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu) * uu  # Duffy Jacobian
    pts = np.column_stack([(uu * (1.0 - vv)).ravel(), (uu * vv).ravel()])
    return pts, ww.ravel()


def _patch_quadrature(patch, degree: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature points (n, 3) and weights (n,) over a patch triangulation.

    ``degree`` 2 selects the 3-point edge-midpoint rule; higher degrees use
    a collapsed Gauss rule per triangle.
    """
    tri = triangulate_patch(patch)
    c = tri.corners
    if degree <= 2:
        pts = np.stack(
            [0.5 * (c[:, 0] + c[:, 1]), 0.5 * (c[:, 1] + c[:, 2]), 0.5 * (c[:, 2] + c[:, 0])],
            axis=1,
        )
        w = np.repeat(tri.areas() / 3.0, 3)
        return pts.reshape(-1, 3), w
    ref, wref = _duffy_rule(degree)
    e1 = c[:, 1] - c[:, 0]
    e2 = c[:, 2] - c[:, 0]
    pts = c[:, None, 0, :] + ref[None, :, 0, None] * e1[:, None, :] + ref[None, :, 1, None] * e2[:, None, :]
    w = (2.0 * tri.areas())[:, None] * wref[None, :]
    return pts.reshape(-1, 3), w.ravel()


def _active_groups(system: GlobalSystem, points: np.ndarray, weights: np.ndarray):
    """Split quadrature points by containing active cell.

    Yields (cell, point indices).  Points outside the grid or in inactive
    cells are dropped; if nothing remains the patch misses the model.
    """
    grid = system.dof_map.grid
    in_box = grid.bbox.contains_points(points)
    cells = grid.locate(points)
    groups = []
    if np.any(in_box):
        idx = np.nonzero(in_box)[0]
        keys = cells[idx]
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        for g, cell in enumerate(uniq):
            cell = tuple(int(v) for v in cell)
            if system.dof_map.is_active(cell):
                groups.append((cell, idx[inv == g]))
    if not groups:
        raise BoundaryConditionError("boundary patch lies outside the active model")
    return groups


def neumann_load(spec: NeumannSpec, system: GlobalSystem) -> None:
    """Accumulate the consistent load of a traction patch into system.load."""
    points, weights = _patch_quadrature(spec.patch)
    grid = system.dof_map.grid
    for cell, idx in _active_groups(system, points, weights):
        local = grid.local_coords(points[idx], np.broadcast_to(cell, (idx.size, 3)))
        vals, _ = system.basis.eval(local)
        contrib = weights[idx] @ vals  # (modes,)
        scalar = system.dof_map.cell_scalar_modes(cell)
        for comp in range(3):
            if spec.traction[comp] != 0.0:
                np.add.at(system.load, 3 * scalar + comp, spec.traction[comp] * contrib)


def apply_penalty_dirichlet(spec: DirichletSpec, system: GlobalSystem) -> None:
    """Add beta-scaled boundary mass and load for constrained components."""
    beta = spec.penalty if spec.penalty is not None else default_penalty(system)
    # Boundary mass products of degree-p tensor modes restricted to an
    # oblique plane reach total degree 6p; integrate them exactly.
    points, weights = _patch_quadrature(spec.patch, degree=6 * system.basis.degree)
    grid = system.dof_map.grid
    n = system.n_dofs
    rows, cols, vals = [], [], []
    for cell, idx in _active_groups(system, points, weights):
        local = grid.local_coords(points[idx], np.broadcast_to(cell, (idx.size, 3)))
        nvals, _ = system.basis.eval(local)
        w = weights[idx]
        mass = nvals.T @ (w[:, None] * nvals)
        mass = 0.5 * (mass + mass.T)
        rhs = w @ nvals
        scalar = system.dof_map.cell_scalar_modes(cell)
        for comp, value in enumerate(spec.displacement):
            if value is None:
                continue
            dofs = 3 * scalar + comp
            m = dofs.size
            rows.append(np.repeat(dofs, m))
            cols.append(np.tile(dofs, m))
            vals.append(beta * mass.ravel())
            np.add.at(system.load, dofs, beta * value * rhs)
    kb = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    system.stiffness = system.stiffness + kb
