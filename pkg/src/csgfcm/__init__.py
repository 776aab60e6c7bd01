"""Design-through-analysis toolkit: 3D linear elasticity on CSG models.

Solids are modeled as trees of analytic primitives (including sweeps along
spline paths) and consumed exclusively through point membership tests; the
elasticity problem is discretized on a non-conforming Cartesian grid of
high-order cells with indicator-weighted octree quadrature.
"""

__version__ = "0.1.0"

from .errors import (
    BoundaryConditionError,
    CsgFcmError,
    DegenerateFrameError,
    EmptyModelError,
    GeometryError,
    SceneError,
    SolverError,
)
from .geometry import (
    Aabb,
    Classification,
    Cuboid,
    Cylinder,
    Difference,
    Frame,
    Intersection,
    Sphere,
    Union,
)
from .curves import BSplineCurve, Segment, closest_point
from .sweeps import FrenetRule, Profile2D, ReferenceParallelRule, SweepSolid, make_extrusion
from .discretization import BodyLoad, CellGrid, Material, active_cells, assemble
from .quadrature import QuadratureConfig, octree_leaves
from .boundary import DirichletSpec, DiskPatch, NeumannSpec, RectPatch, TrianglePatch
from .solution import SolutionField, solve, von_mises
from .postprocess import (
    TriMesh,
    evaluate_on_mesh,
    is_watertight,
    marching_cubes,
    read_summary,
    read_vtk,
    write_summary,
    write_vtk,
)
from .scene import Scene, parse_scene, scene_to_dict, write_scene
