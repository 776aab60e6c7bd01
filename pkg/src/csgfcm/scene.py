"""Scene documents: the JSON format describing a complete analysis run.

Parsing is strict: unknown keys are rejected and every violation is reported
with a path into the document (e.g. ``model.left.radius``), so typos in
numerical settings fail loudly instead of silently picking defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import boundary, curves, geometry, sweeps
from .discretization import BodyLoad, CellGrid, Material
from .errors import CsgFcmError, SceneError
from .quadrature import QuadratureConfig

__all__ = ["Scene", "PostConfig", "parse_scene", "parse_scene_dict", "scene_to_dict", "write_scene"]


@dataclass
class PostConfig:
    mc_resolution: int = 64
    mc_margin: float = 0.05
    volumetric: bool = False


@dataclass
class Scene:
    solid: geometry.Solid
    grid: CellGrid
    degree: int
    quadrature: QuadratureConfig
    material: Material
    body_load: BodyLoad = dc_field(default_factory=BodyLoad.zero)
    dirichlet: list = dc_field(default_factory=list)
    neumann: list = dc_field(default_factory=list)
    post: PostConfig = dc_field(default_factory=PostConfig)
    solver_rtol: float = 1e-10
    solver_max_iter: int | None = None


def _require_keys(node, path, required, optional=()):
    if not isinstance(node, dict):
        raise SceneError(path, f"expected an object, got {type(node).__name__}")
    unknown = set(node) - set(required) - set(optional)
    if unknown:
        raise SceneError(path, f"unknown keys: {sorted(unknown)}")
    missing = [k for k in required if k not in node]
    if missing:
        raise SceneError(path, f"missing keys: {missing}")


def _number(node, path):
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise SceneError(path, "expected a number")
    return float(node)


def _integer(node, path):
    if isinstance(node, bool) or not isinstance(node, int):
        raise SceneError(path, "expected an integer")
    return int(node)


def _vec(node, path, length):
    if not isinstance(node, list) or len(node) != length:
        raise SceneError(path, f"expected a list of {length} numbers")
    return np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(node)])


def _matrix(node, path, cols):
    if not isinstance(node, list) or not node:
        raise SceneError(path, "expected a non-empty list of rows")
    return np.array([_vec(row, f"{path}[{i}]", cols) for i, row in enumerate(node)])


def _wrap(path, builder):
    try:
        return builder()
    except SceneError:
        raise
    except CsgFcmError as exc:
        raise SceneError(path, str(exc)) from exc


def _parse_frame(node, path) -> geometry.Frame:
    _require_keys(node, path, ["origin", "axis"], ["x_axis"])
    origin = _vec(node["origin"], f"{path}.origin", 3)
    axis = _vec(node["axis"], f"{path}.axis", 3)
    in_plane = _vec(node["x_axis"], f"{path}.x_axis", 3) if "x_axis" in node else None
    return _wrap(path, lambda: geometry.Frame.from_axis(origin, axis, in_plane))


def _parse_curve(node, path):
    _require_keys(node, path, ["type"], ["a", "b", "degree", "knots", "control_points"])
    kind = node["type"]
    if kind == "segment":
        _require_keys(node, path, ["type", "a", "b"])
        return _wrap(path, lambda: curves.Segment(_vec(node["a"], f"{path}.a", 3), _vec(node["b"], f"{path}.b", 3)))
    if kind == "bspline":
        _require_keys(node, path, ["type", "degree", "knots", "control_points"])
        if not isinstance(node["knots"], list):
            raise SceneError(f"{path}.knots", "expected a list of numbers")
        return _wrap(
            path,
            lambda: curves.BSplineCurve(
                _integer(node["degree"], f"{path}.degree"),
                _vec(node["knots"], f"{path}.knots", len(node["knots"])),
                _matrix(node["control_points"], f"{path}.control_points", 3),
            ),
        )
    raise SceneError(f"{path}.type", f"unknown curve type {kind!r}")


def _parse_frame_rule(node, path):
    _require_keys(node, path, ["kind"], ["plane_normal"])
    kind = node["kind"]
    if kind == "frenet":
        return sweeps.FrenetRule()
    if kind == "reference_parallel":
        _require_keys(node, path, ["kind", "plane_normal"])
        return _wrap(path, lambda: sweeps.ReferenceParallelRule(_vec(node["plane_normal"], f"{path}.plane_normal", 3)))
    raise SceneError(f"{path}.kind", f"unknown frame rule {kind!r}")


_SOLID_KEYS = {
    "sphere": (["type", "center", "radius"], []),
    "cuboid": (["type", "p_start", "p_end"], []),
    "cylinder": (["type", "frame", "radius", "height"], []),
    "extrusion": (["type", "profile", "frame", "height"], []),
    "sweep": (["type", "profile", "path", "frame_rule"], ["seeds"]),
    "union": (["type", "left", "right"], []),
    "intersection": (["type", "left", "right"], []),
    "difference": (["type", "left", "right"], []),
}


def parse_solid(node, path="model") -> geometry.Solid:
    if not isinstance(node, dict) or "type" not in node:
        raise SceneError(path, "expected an object with a 'type' key")
    kind = node["type"]
    if kind not in _SOLID_KEYS:
        raise SceneError(f"{path}.type", f"unknown solid type {kind!r}")
    _require_keys(node, path, *_SOLID_KEYS[kind])
    if kind == "sphere":
        return _wrap(
            path,
            lambda: geometry.Sphere(_vec(node["center"], f"{path}.center", 3), _number(node["radius"], f"{path}.radius")),
        )
    if kind == "cuboid":
        return _wrap(
            path,
            lambda: geometry.Cuboid(_vec(node["p_start"], f"{path}.p_start", 3), _vec(node["p_end"], f"{path}.p_end", 3)),
        )
    if kind == "cylinder":
        frame = _parse_frame(node["frame"], f"{path}.frame")
        return _wrap(
            path,
            lambda: geometry.Cylinder(frame, _number(node["radius"], f"{path}.radius"), _number(node["height"], f"{path}.height")),
        )
    if kind == "extrusion":
        profile = _wrap(f"{path}.profile", lambda: sweeps.Profile2D(_matrix(node["profile"], f"{path}.profile", 2)))
        frame = _parse_frame(node["frame"], f"{path}.frame")
        return _wrap(path, lambda: sweeps.make_extrusion(profile, frame, _number(node["height"], f"{path}.height")))
    if kind == "sweep":
        profile = _wrap(f"{path}.profile", lambda: sweeps.Profile2D(_matrix(node["profile"], f"{path}.profile", 2)))
        curve = _parse_curve(node["path"], f"{path}.path")
        rule = _parse_frame_rule(node["frame_rule"], f"{path}.frame_rule")
        seeds = _integer(node.get("seeds", 8), f"{path}.seeds")
        return _wrap(path, lambda: sweeps.SweepSolid(curve, profile, rule, seeds=seeds))
    left = parse_solid(node["left"], f"{path}.left")
    right = parse_solid(node["right"], f"{path}.right")
    op = {"union": geometry.Union, "intersection": geometry.Intersection, "difference": geometry.Difference}[kind]
    return op(left, right)


def _parse_patch(node, path):
    _require_keys(node, path, ["type"], ["frame", "extents", "resolution", "radius", "vertices", "faces"])
    kind = node["type"]
    if kind == "rect":
        _require_keys(node, path, ["type", "frame", "extents"], ["resolution"])
        frame = _parse_frame(node["frame"], f"{path}.frame")
        ext = _vec(node["extents"], f"{path}.extents", 2)
        res = _integer(node.get("resolution", 8), f"{path}.resolution")
        return _wrap(path, lambda: boundary.RectPatch(frame, (ext[0], ext[1]), res))
    if kind == "disk":
        _require_keys(node, path, ["type", "frame", "radius"], ["resolution"])
        frame = _parse_frame(node["frame"], f"{path}.frame")
        res = _integer(node.get("resolution", 32), f"{path}.resolution")
        return _wrap(path, lambda: boundary.DiskPatch(frame, _number(node["radius"], f"{path}.radius"), res))
    if kind == "triangles":
        _require_keys(node, path, ["type", "vertices", "faces"])
        verts = _matrix(node["vertices"], f"{path}.vertices", 3)
        faces = np.array(
            [[_integer(i, f"{path}.faces[{r}][{c}]") for c, i in enumerate(row)] for r, row in enumerate(node["faces"])]
        )
        return _wrap(path, lambda: boundary.TrianglePatch(verts, faces))
    raise SceneError(f"{path}.type", f"unknown patch type {kind!r}")


def parse_scene_dict(doc: dict, path: str = "") -> Scene:
    root = path or "scene"
    _require_keys(
        doc,
        root,
        ["model", "grid", "basis", "quadrature", "material"],
        ["body_load", "dirichlet", "neumann", "post", "solver"],
    )
    solid = parse_solid(doc["model"], "model")

    gnode = doc["grid"]
    _require_keys(gnode, "grid", ["cells"], ["bbox"])
    cells_node = gnode["cells"]
    if not isinstance(cells_node, list) or len(cells_node) != 3:
        raise SceneError("grid.cells", "expected three integers")
    counts = [_integer(c, f"grid.cells[{i}]") for i, c in enumerate(cells_node)]
    if "bbox" in gnode:
        _require_keys(gnode["bbox"], "grid.bbox", ["min", "max"])
        lo = _vec(gnode["bbox"]["min"], "grid.bbox.min", 3)
        hi = _vec(gnode["bbox"]["max"], "grid.bbox.max", 3)
        grid = _wrap("grid", lambda: CellGrid(geometry.Aabb(lo, hi), counts))
    else:
        grid = _wrap("grid", lambda: CellGrid.from_solid(solid, counts))

    _require_keys(doc["basis"], "basis", ["degree"])
    degree = _integer(doc["basis"]["degree"], "basis.degree")
    if degree < 1:
        raise SceneError("basis.degree", "polynomial degree must be >= 1")

    qnode = doc["quadrature"]
    _require_keys(qnode, "quadrature", ["depth", "alpha_exponent"], ["gauss"])
    gauss = _integer(qnode.get("gauss", degree + 1), "quadrature.gauss")
    quad = _wrap(
        "quadrature",
        lambda: QuadratureConfig(
            _integer(qnode["depth"], "quadrature.depth"), gauss, _number(qnode["alpha_exponent"], "quadrature.alpha_exponent")
        ),
    )

    mnode = doc["material"]
    _require_keys(mnode, "material", ["youngs_modulus", "poisson_ratio"])
    material = _wrap(
        "material",
        lambda: Material(_number(mnode["youngs_modulus"], "material.youngs_modulus"), _number(mnode["poisson_ratio"], "material.poisson_ratio")),
    )

    body = BodyLoad.zero()
    if "body_load" in doc:
        body = _wrap("body_load", lambda: BodyLoad(_vec(doc["body_load"], "body_load", 3)))

    dirichlet = []
    for i, dnode in enumerate(doc.get("dirichlet", [])):
        dpath = f"dirichlet[{i}]"
        _require_keys(dnode, dpath, ["patch", "displacement"], ["penalty"])
        patch = _parse_patch(dnode["patch"], f"{dpath}.patch")
        disp_node = dnode["displacement"]
        if not isinstance(disp_node, list) or len(disp_node) != 3:
            raise SceneError(f"{dpath}.displacement", "expected three values (number or null)")
        disp = tuple(
            None if v is None else _number(v, f"{dpath}.displacement[{j}]") for j, v in enumerate(disp_node)
        )
        penalty = _number(dnode["penalty"], f"{dpath}.penalty") if "penalty" in dnode else None
        dirichlet.append(_wrap(dpath, lambda: boundary.DirichletSpec(patch, disp, penalty)))

    neumann = []
    for i, nnode in enumerate(doc.get("neumann", [])):
        npath = f"neumann[{i}]"
        _require_keys(nnode, npath, ["patch", "traction"])
        patch = _parse_patch(nnode["patch"], f"{npath}.patch")
        traction = _vec(nnode["traction"], f"{npath}.traction", 3)
        neumann.append(_wrap(npath, lambda: boundary.NeumannSpec(patch, traction)))

    post = PostConfig()
    if "post" in doc:
        pnode = doc["post"]
        _require_keys(pnode, "post", [], ["mc_resolution", "mc_margin", "volumetric"])
        if "mc_resolution" in pnode:
            post.mc_resolution = _integer(pnode["mc_resolution"], "post.mc_resolution")
            if post.mc_resolution < 2:
                raise SceneError("post.mc_resolution", "resolution must be >= 2")
        if "mc_margin" in pnode:
            post.mc_margin = _number(pnode["mc_margin"], "post.mc_margin")
        if "volumetric" in pnode:
            if not isinstance(pnode["volumetric"], bool):
                raise SceneError("post.volumetric", "expected a boolean")
            post.volumetric = pnode["volumetric"]

    rtol, max_iter = 1e-10, None
    if "solver" in doc:
        snode = doc["solver"]
        _require_keys(snode, "solver", [], ["rtol", "max_iter"])
        if "rtol" in snode:
            rtol = _number(snode["rtol"], "solver.rtol")
        if "max_iter" in snode:
            max_iter = _integer(snode["max_iter"], "solver.max_iter")

    return Scene(solid, grid, degree, quad, material, body, dirichlet, neumann, post, rtol, max_iter)


def parse_scene(path) -> Scene:
    """Load and validate a scene document from a JSON file."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as exc:
        raise SceneError(str(path), f"cannot read scene file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SceneError(str(path), f"invalid JSON: {exc}") from exc
    return parse_scene_dict(doc)


def _frame_dict(frame: geometry.Frame) -> dict:
    return {
        "origin": frame.origin.tolist(),
        "axis": frame.basis[:, 2].tolist(),
        "x_axis": frame.basis[:, 0].tolist(),
    }


def solid_to_dict(solid: geometry.Solid) -> dict:
    if isinstance(solid, geometry.Sphere):
        return {"type": "sphere", "center": solid.center.tolist(), "radius": solid.radius}
    if isinstance(solid, geometry.Cuboid):
        return {"type": "cuboid", "p_start": solid.p_start.tolist(), "p_end": solid.p_end.tolist()}
    if isinstance(solid, geometry.Cylinder):
        return {"type": "cylinder", "frame": _frame_dict(solid.frame), "radius": solid.radius, "height": solid.height}
    if isinstance(solid, sweeps.SweepSolid):
        if isinstance(solid.path, curves.Segment):
            path = {"type": "segment", "a": solid.path.a.tolist(), "b": solid.path.b.tolist()}
        else:
            path = {
                "type": "bspline",
                "degree": solid.path.degree,
                "knots": solid.path.knots.tolist(),
                "control_points": solid.path.control_points.tolist(),
            }
        if isinstance(solid.frame_rule, sweeps.FrenetRule):
            rule = {"kind": "frenet"}
        else:
            rule = {"kind": "reference_parallel", "plane_normal": solid.frame_rule.plane_normal.tolist()}
        return {
            "type": "sweep",
            "profile": solid.profile.vertices.tolist(),
            "path": path,
            "frame_rule": rule,
            "seeds": solid.seeds,
        }
    for kind, cls in (("union", geometry.Union), ("intersection", geometry.Intersection), ("difference", geometry.Difference)):
        if isinstance(solid, cls):
            return {"type": kind, "left": solid_to_dict(solid.left), "right": solid_to_dict(solid.right)}
    raise CsgFcmError(f"cannot serialize solid of type {type(solid).__name__}")


def _patch_dict(patch) -> dict:
    if isinstance(patch, boundary.RectPatch):
        return {
            "type": "rect",
            "frame": _frame_dict(patch.frame),
            "extents": [patch.extents[0], patch.extents[1]],
            "resolution": patch.resolution,
        }
    if isinstance(patch, boundary.DiskPatch):
        return {"type": "disk", "frame": _frame_dict(patch.frame), "radius": patch.radius, "resolution": patch.resolution}
    if isinstance(patch, boundary.TrianglePatch):
        return {"type": "triangles", "vertices": patch.vertices.tolist(), "faces": patch.faces.tolist()}
    raise CsgFcmError(f"cannot serialize patch of type {type(patch).__name__}")


def scene_to_dict(scene: Scene) -> dict:
    doc = {
        "model": solid_to_dict(scene.solid),
        "grid": {
            "bbox": {"min": scene.grid.bbox.lo.tolist(), "max": scene.grid.bbox.hi.tolist()},
            "cells": list(scene.grid.counts),
        },
        "basis": {"degree": scene.degree},
        "quadrature": {
            "depth": scene.quadrature.depth,
            "gauss": scene.quadrature.gauss,
            "alpha_exponent": scene.quadrature.alpha_exponent,
        },
        "material": {
            "youngs_modulus": scene.material.youngs_modulus,
            "poisson_ratio": scene.material.poisson_ratio,
        },
        "body_load": scene.body_load.b.tolist(),
        "dirichlet": [
            {
                "patch": _patch_dict(d.patch),
                "displacement": [v for v in d.displacement],
                **({"penalty": d.penalty} if d.penalty is not None else {}),
            }
            for d in scene.dirichlet
        ],
        "neumann": [{"patch": _patch_dict(nm.patch), "traction": nm.traction.tolist()} for nm in scene.neumann],
        "post": {
            "mc_resolution": scene.post.mc_resolution,
            "mc_margin": scene.post.mc_margin,
            "volumetric": scene.post.volumetric,
        },
        "solver": {"rtol": scene.solver_rtol, **({"max_iter": scene.solver_max_iter} if scene.solver_max_iter else {})},
    }
    return doc


def write_scene(scene: Scene, path) -> None:
    with open(path, "w") as f:
        json.dump(scene_to_dict(scene), f, indent=2)
        f.write("\n")
