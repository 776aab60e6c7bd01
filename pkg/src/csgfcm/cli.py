"""Command-line pipeline: scene file in, result files out.

Exit codes: 0 success, 1 usage or scene-parse error, 2 numerical failure
(solver non-convergence), 3 geometry error (empty model, degenerate frames,
patches missing the model).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .boundary import apply_penalty_dirichlet, neumann_load
from .discretization import active_cells, assemble, DofMap
from .errors import (
    BoundaryConditionError,
    CsgFcmError,
    EmptyModelError,
    GeometryError,
    SceneError,
    SolverError,
)
from .postprocess import TriMesh, evaluate_on_mesh, marching_cubes, write_summary, write_vtk
from .scene import Scene, parse_scene
from .solution import solve

log = logging.getLogger("csgfcm")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csgfcm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"csgfcm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute the full analysis pipeline on a scene file")
    run.add_argument("scene", help="path to the scene JSON document")
    run.add_argument("--out", default=".", help="output directory (default: current)")
    run.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker count for element integration")
    run.add_argument("--dry-run", action="store_true", help="stop after active-cell counting")
    run.add_argument("--classify-only", action="store_true", help="stop after membership benchmarking")
    run.add_argument("--mc-res", type=int, default=None, help="override marching-cubes resolution")
    return parser


def _classify_benchmark(scene: Scene, n_points: int = 100_000) -> float:
    """Membership throughput in points per second on grid-box samples."""
    rng = np.random.default_rng(0)
    box = scene.grid.bbox
    pts = rng.uniform(box.lo, box.hi, size=(n_points, 3))
    start = time.perf_counter()
    inside = scene.solid.contains(pts)
    elapsed = time.perf_counter() - start
    rate = n_points / max(elapsed, 1e-12)
    log.info("classified %d points (%d inside) at %.3g points/s", n_points, int(inside.sum()), rate)
    return rate


def run_pipeline(scene: Scene, out_dir: str = ".", threads: int = 1,
                 dry_run: bool = False, classify_only: bool = False,
                 mc_res: int | None = None) -> dict:
    """Execute classify -> grid -> assemble -> BCs -> solve -> post-process.

    Returns the run-summary values; with --dry-run / --classify-only only
    the applicable subset is filled in.
    """
    if classify_only:
        rate = _classify_benchmark(scene)
        print(f"classification throughput: {rate:.6g} points/s")
        return {"classification_rate": rate}

    active = active_cells(scene.grid, scene.solid)
    if not active:
        raise EmptyModelError("empty model")
    dof_map = DofMap(scene.grid, scene.degree, active)
    total_cells = scene.grid.n_cells
    log.info(
        "%d of %d cells active, %d dofs (full grid: %d)",
        len(active), total_cells, dof_map.n_dofs, dof_map.full_grid_n_dofs(),
    )
    if dry_run:
        print(f"total_cells {total_cells}")
        print(f"active_cells {len(active)}")
        print(f"dofs {dof_map.n_dofs}")
        print(f"full_grid_dofs {dof_map.full_grid_n_dofs()}")
        return {
            "total_cells": total_cells,
            "active_cells": len(active),
            "dofs": dof_map.n_dofs,
            "full_grid_dofs": dof_map.full_grid_n_dofs(),
        }

    t0 = time.perf_counter()
    system = assemble(
        scene.grid, scene.solid, scene.material, scene.degree, scene.quadrature,
        body=scene.body_load, active=active, threads=max(1, threads),
    )
    log.info("assembled %d dofs in %.2f s", system.n_dofs, time.perf_counter() - t0)
    for spec in scene.neumann:
        neumann_load(spec, system)
    for spec in scene.dirichlet:
        apply_penalty_dirichlet(spec, system)

    t0 = time.perf_counter()
    sol = solve(system, rtol=scene.solver_rtol, max_iter=scene.solver_max_iter)
    log.info(
        "solved in %d iterations (residual %.3g, %.2f s)",
        sol.stats.iterations, sol.stats.residual, time.perf_counter() - t0,
    )

    resolution = mc_res if mc_res is not None else scene.post.mc_resolution
    model_box = scene.solid.bounding_box()
    margin = scene.post.mc_margin * float(np.max(model_box.extents))
    mesh = marching_cubes(scene.solid, model_box.inflated(margin), resolution)
    mesh.point_data.update(evaluate_on_mesh(sol, mesh))

    os.makedirs(out_dir, exist_ok=True)
    vtk_path = os.path.join(out_dir, "results.vtk")
    summary_path = os.path.join(out_dir, "summary.txt")
    write_vtk(vtk_path, mesh)
    summary = {
        "dofs": system.n_dofs,
        "active_cells": len(active),
        "total_cells": total_cells,
        "strain_energy": sol.strain_energy,
        "solver_iterations": sol.stats.iterations,
        "residual": sol.stats.residual,
    }
    write_summary(summary_path, summary)
    if scene.post.volumetric:
        _write_volumetric(sol, scene, os.path.join(out_dir, "volume.vtk"))
    log.info("wrote %s and %s", vtk_path, summary_path)
    return summary


def _write_volumetric(sol, scene: Scene, path) -> None:
    """Lattice-sampled volumetric output (point cloud with result data)."""
    grid = scene.grid
    n = max(2, scene.post.mc_resolution // 2)
    axes = [np.linspace(grid.bbox.lo[i], grid.bbox.hi[i], n) for i in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    keep = scene.solid.contains(pts)
    cloud = TriMesh(pts[keep], np.zeros((0, 3), dtype=int))
    cloud.point_data.update(evaluate_on_mesh(sol, cloud))
    write_vtk(path, cloud, title="csgfcm volumetric samples")


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CSGFCM_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        scene = parse_scene(args.scene)
        run_pipeline(
            scene,
            out_dir=args.out,
            threads=args.threads,
            dry_run=args.dry_run,
            classify_only=args.classify_only,
            mc_res=args.mc_res,
        )
        return 0
    except SceneError as exc:
        print(f"scene error: {exc}", file=sys.stderr)
        return 1
    except (GeometryError, EmptyModelError, BoundaryConditionError) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    except CsgFcmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
