"""Surface extraction from the implicit model and result export.

The classification field is two-valued, so marching cubes runs on a binary
lattice with the isovalue midway between the states. Midpoint vertices on a
binary field carry a resolution-independent faceting bias (a sphere's area
comes out ~9% high), so each vertex is slid along its lattice edge onto the
membership boundary by bisection; the mesh topology is untouched. Results
are written as legacy ASCII visualization files plus a plain-text run
summary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from skimage.measure import marching_cubes as _sk_marching_cubes

from .errors import CsgFcmError, GeometryError
from .geometry import Aabb, Solid
from .solution import SolutionField, von_mises

__all__ = [
    "TriMesh",
    "marching_cubes",
    "is_watertight",
    "evaluate_on_mesh",
    "write_vtk",
    "read_vtk",
    "write_summary",
    "read_summary",
]

log = logging.getLogger(__name__)


@dataclass
class TriMesh:
    vertices: np.ndarray  # (v, 3)
    faces: np.ndarray  # (t, 3) int
    point_data: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=int).reshape(-1, 3)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise CsgFcmError("face index out of range")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def area(self) -> float:
        c = self.vertices[self.faces]
        return float(0.5 * np.sum(np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)))


def marching_cubes(solid: Solid, box: Aabb, resolution: int) -> TriMesh:
    """Extract the model surface from membership samples on a lattice.

    ``resolution`` is the number of lattice cells per axis; membership is
    sampled at the (resolution + 1)^3 lattice nodes (inside = 1, outside = 0)
    and contoured at 0.5. Each vertex is then moved along its lattice edge
    onto the membership boundary by bisection, which removes the constant
    area bias of pure midpoint placement while keeping the connectivity
    (and hence watertightness) of the binary-field mesh.
    """
    if resolution < 2:
        raise GeometryError("marching cubes resolution must be >= 2")
    if box.is_empty or np.any(box.extents <= 0.0):
        raise GeometryError("sampling box must have positive volume")
    n = resolution + 1
    axes = [np.linspace(box.lo[i], box.hi[i], n) for i in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    inside = solid.contains(pts).reshape(n, n, n)
    if not inside.any() or inside.all():
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
    verts, faces, _, _ = _sk_marching_cubes(inside.astype(np.float32), level=0.5)
    verts = _snap_to_boundary(verts, inside, solid, box, resolution)
    return TriMesh(verts, faces.astype(int))


def _snap_to_boundary(verts, inside, solid, box, resolution, n_bisect=30):
    """Slide midpoint vertices along their lattice edges onto the boundary.

    ``verts`` is in lattice-index units: on a binary field every vertex sits
    at the midpoint of an edge between an inside node and an outside node.
    Bisecting membership along that edge places the vertex on the model
    boundary to within ``2**-n_bisect`` edge lengths.
    """
    spacing = box.extents / resolution
    frac = verts - np.floor(verts)
    axis = np.argmax(np.abs(frac - 0.5) < 0.25, axis=1)
    base = np.floor(verts).astype(int)
    other = base.copy()
    other[np.arange(len(verts)), axis] += 1
    base_inside = inside[base[:, 0], base[:, 1], base[:, 2]]
    lo_pts = box.lo + base * spacing
    hi_pts = box.lo + other * spacing
    p_in = np.where(base_inside[:, None], lo_pts, hi_pts)
    p_out = np.where(base_inside[:, None], hi_pts, lo_pts)
    for _ in range(n_bisect):
        mid = 0.5 * (p_in + p_out)
        member = solid.contains(mid)
        p_in = np.where(member[:, None], mid, p_in)
        p_out = np.where(member[:, None], p_out, mid)
    return 0.5 * (p_in + p_out)


def is_watertight(mesh: TriMesh) -> bool:
    """True if every edge is shared by exactly two triangles."""
    if mesh.n_faces == 0:
        return False
    edges = np.concatenate(
        [mesh.faces[:, [0, 1]], mesh.faces[:, [1, 2]], mesh.faces[:, [2, 0]]]
    )
    edges = np.sort(edges, axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return bool(np.all(counts == 2))


def evaluate_on_mesh(sol: SolutionField, mesh: TriMesh) -> dict:
    """Per-vertex displacement and von Mises stress, batched by cell.

    Vertices falling into inactive cells (or outside the grid) get
    zero-filled data; a warning reports how many.
    """
    system = sol.system
    grid = system.dof_map.grid
    verts = mesh.vertices
    disp = np.zeros((mesh.n_vertices, 3))
    vm = np.zeros(mesh.n_vertices)
    if mesh.n_vertices == 0:
        return {"displacement": disp, "von_mises": vm}

    in_box = grid.bbox.contains_points(verts)
    cells = grid.locate(verts)
    lam = system.material.lame_lambda
    mu = system.material.lame_mu
    skipped = int(np.count_nonzero(~in_box))
    idx_in = np.nonzero(in_box)[0]
    if idx_in.size:
        uniq, inv = np.unique(cells[idx_in], axis=0, return_inverse=True)
        for g, cell_arr in enumerate(uniq):
            cell = tuple(int(v) for v in cell_arr)
            idx = idx_in[inv == g]
            if not system.dof_map.is_active(cell):
                skipped += idx.size
                continue
            local = grid.local_coords(verts[idx], np.broadcast_to(cell, (idx.size, 3)))
            vals, grads = system.basis.eval_global(local, grid.cell_extents)
            coeff = sol.coefficients[system.dof_map.cell_dofs(cell)].reshape(-1, 3)
            disp[idx] = vals @ coeff
            grad_u = np.einsum("mi,pmj->pij", coeff, grads)
            eps = 0.5 * (grad_u + np.transpose(grad_u, (0, 2, 1)))
            tr = np.trace(eps, axis1=1, axis2=2)
            sigma = lam * tr[:, None, None] * np.eye(3)[None] + 2.0 * mu * eps
            dev = sigma - np.trace(sigma, axis1=1, axis2=2)[:, None, None] / 3.0 * np.eye(3)[None]
            vm[idx] = np.sqrt(1.5 * np.sum(dev * dev, axis=(1, 2)))
    if skipped:
        log.warning("%d mesh vertices outside the active domain; data zero-filled", skipped)
    return {"displacement": disp, "von_mises": vm}


def write_vtk(path, mesh: TriMesh, title: str = "csgfcm results") -> None:
    """Legacy ASCII unstructured-grid file with per-vertex result fields."""
    disp = mesh.point_data.get("displacement", np.zeros((mesh.n_vertices, 3)))
    vm = mesh.point_data.get("von_mises", np.zeros(mesh.n_vertices))
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{title}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_vertices} double\n")
        for v in mesh.vertices:
            f.write(f"{v[0]:.12g} {v[1]:.12g} {v[2]:.12g}\n")
        f.write(f"CELLS {mesh.n_faces} {4 * mesh.n_faces}\n")
        for tri in mesh.faces:
            f.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")
        f.write(f"CELL_TYPES {mesh.n_faces}\n")
        for _ in range(mesh.n_faces):
            f.write("5\n")
        f.write(f"POINT_DATA {mesh.n_vertices}\n")
        f.write("VECTORS displacement double\n")
        for d in np.asarray(disp, dtype=float).reshape(-1, 3):
            f.write(f"{d[0]:.12g} {d[1]:.12g} {d[2]:.12g}\n")
        f.write("SCALARS von_mises double\n")
        f.write("LOOKUP_TABLE default\n")
        for s in np.asarray(vm, dtype=float).ravel():
            f.write(f"{s:.12g}\n")


def read_vtk(path) -> TriMesh:
    """Parse files produced by :func:`write_vtk` (round-trip support)."""
    with open(path) as f:
        tokens = f.read().split()
    pos = 0

    def expect(word):
        nonlocal pos
        if tokens[pos].upper() != word:
            raise CsgFcmError(f"unexpected token {tokens[pos]!r}, wanted {word}")
        pos += 1

    def take(n):
        nonlocal pos
        out = tokens[pos : pos + n]
        pos += n
        return out

    idx = [i for i, t in enumerate(tokens) if t.upper() == "POINTS"]
    if not idx:
        raise CsgFcmError("no POINTS block found")
    pos = idx[0]
    expect("POINTS")
    n_pts = int(take(1)[0])
    take(1)  # dtype
    verts = np.array(take(3 * n_pts), dtype=float).reshape(n_pts, 3)
    expect("CELLS")
    n_cells = int(take(1)[0])
    take(1)  # total size
    raw = np.array(take(4 * n_cells), dtype=int).reshape(-1, 4)
    if raw.size and np.any(raw[:, 0] != 3):
        raise CsgFcmError("only triangle cells supported")
    faces = raw[:, 1:] if raw.size else np.zeros((0, 3), dtype=int)
    expect("CELL_TYPES")
    take(1 + n_cells)
    data = {}
    expect("POINT_DATA")
    take(1)
    while pos < len(tokens):
        kind = tokens[pos].upper()
        if kind == "VECTORS":
            pos += 1
            name = take(1)[0]
            take(1)  # dtype
            data[name] = np.array(take(3 * n_pts), dtype=float).reshape(n_pts, 3)
        elif kind == "SCALARS":
            pos += 1
            name = take(1)[0]
            take(1)  # dtype
            expect("LOOKUP_TABLE")
            take(1)
            data[name] = np.array(take(n_pts), dtype=float)
        else:
            raise CsgFcmError(f"unsupported point-data block {tokens[pos]!r}")
    return TriMesh(verts, faces, data)


_SUMMARY_KEYS = ("dofs", "active_cells", "total_cells", "strain_energy", "solver_iterations", "residual")


def write_summary(path, values: dict) -> None:
    """Plain-text key-value run summary."""
    missing = [k for k in _SUMMARY_KEYS if k not in values]
    if missing:
        raise CsgFcmError(f"summary missing keys: {missing}")
    with open(path, "w") as f:
        for key in _SUMMARY_KEYS:
            val = values[key]
            if isinstance(val, float):
                f.write(f"{key} {val:.17g}\n")
            else:
                f.write(f"{key} {val}\n")


def read_summary(path) -> dict:
    out = {}
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            key, val = line.split(maxsplit=1)
            out[key] = val.strip()
    for key in ("dofs", "active_cells", "total_cells", "solver_iterations"):
        if key in out:
            out[key] = int(out[key])
    for key in ("strain_energy", "residual"):
        if key in out:
            out[key] = float(out[key])
    return out
