import copy
import json

import numpy as np
import pytest

from csgfcm import Cylinder, SceneError, Sphere
from csgfcm.cli import main, run_pipeline
from csgfcm.geometry import Difference
from csgfcm.scene import parse_scene, parse_scene_dict, scene_to_dict, write_scene


def minimal_doc():
    return {
        "model": {"type": "cuboid", "p_start": [0, 0, 0], "p_end": [1, 1, 1]},
        "grid": {"cells": [2, 2, 2], "bbox": {"min": [0, 0, 0], "max": [1, 1, 1]}},
        "basis": {"degree": 1},
        "quadrature": {"depth": 0, "alpha_exponent": 8.0},
        "material": {"youngs_modulus": 1.0, "poisson_ratio": 0.3},
        "neumann": [
            {
                "patch": {
                    "type": "rect",
                    "frame": {"origin": [0.5, 0.5, 1.0], "axis": [0, 0, 1]},
                    "extents": [1.0, 1.0],
                    "resolution": 4,
                },
                "traction": [0.0, 0.0, 1.0],
            }
        ],
        "dirichlet": [
            {
                "patch": {
                    "type": "rect",
                    "frame": {"origin": [0.5, 0.5, 0.0], "axis": [0, 0, 1]},
                    "extents": [1.0, 1.0],
                    "resolution": 4,
                },
                "displacement": [0.0, 0.0, 0.0],
            }
        ],
        "post": {"mc_resolution": 8},
        "solver": {"rtol": 1e-10},
    }


class TestParsing:
    def test_minimal_scene(self):
        scene = parse_scene_dict(minimal_doc())
        assert scene.degree == 1
        assert scene.grid.counts == (2, 2, 2)
        assert scene.quadrature.alpha_fict == pytest.approx(1e-8)
        assert len(scene.neumann) == 1 and len(scene.dirichlet) == 1
        assert scene.dirichlet[0].displacement == (0.0, 0.0, 0.0)

    def test_nested_model_tree(self):
        doc = minimal_doc()
        doc["model"] = {
            "type": "difference",
            "left": doc["model"],
            "right": {"type": "sphere", "center": [0.5, 0.5, 0.5], "radius": 0.25},
        }
        scene = parse_scene_dict(doc)
        assert isinstance(scene.solid, Difference)
        assert isinstance(scene.solid.right, Sphere)

    def test_grid_bbox_defaults_to_model_box(self):
        doc = minimal_doc()
        del doc["grid"]["bbox"]
        scene = parse_scene_dict(doc)
        assert scene.grid.bbox.contains_points(np.array([[0.5, 0.5, 0.5]]))[0]

    def test_negative_radius_reports_path(self):
        doc = minimal_doc()
        doc["model"] = {"type": "sphere", "center": [0, 0, 0], "radius": -1.0}
        with pytest.raises(SceneError, match="model"):
            parse_scene_dict(doc)

    def test_unknown_key_rejected_with_path(self):
        doc = minimal_doc()
        doc["material"]["shear_modulus"] = 1.0
        with pytest.raises(SceneError, match="material"):
            parse_scene_dict(doc)

    def test_missing_required_section(self):
        doc = minimal_doc()
        del doc["material"]
        with pytest.raises(SceneError, match="material"):
            parse_scene_dict(doc)

    def test_type_errors_name_the_field(self):
        doc = minimal_doc()
        doc["basis"]["degree"] = 1.5
        with pytest.raises(SceneError, match="basis.degree"):
            parse_scene_dict(doc)

    def test_partial_dirichlet_constraint(self):
        doc = minimal_doc()
        doc["dirichlet"][0]["displacement"] = [None, None, 0.0]
        scene = parse_scene_dict(doc)
        assert scene.dirichlet[0].displacement == (None, None, 0.0)

    def test_cylinder_and_sweep_round_trip(self, tmp_path):
        doc = minimal_doc()
        doc["model"] = {
            "type": "union",
            "left": {
                "type": "cylinder",
                "frame": {"origin": [0, 0, 0], "axis": [0, 0, 1]},
                "radius": 0.4,
                "height": 1.0,
            },
            "right": {
                "type": "sweep",
                "profile": [[-0.1, -0.1], [0.1, -0.1], [0.1, 0.1], [-0.1, 0.1]],
                "path": {
                    "type": "bspline",
                    "degree": 2,
                    "knots": [0, 0, 0, 1, 1, 1],
                    "control_points": [[0, 0, 0], [0.5, 0.5, 0.5], [1, 0, 1]],
                },
                "frame_rule": {"kind": "frenet"},
                "seeds": 6,
            },
        }
        scene = parse_scene_dict(doc)
        assert isinstance(scene.solid.left, Cylinder)
        path = tmp_path / "scene.json"
        write_scene(scene, path)
        again = parse_scene(path)
        rng = np.random.default_rng(91)
        pts = rng.uniform(-0.5, 1.5, size=(2000, 3))
        assert np.array_equal(scene.solid.contains(pts), again.solid.contains(pts))

    def test_dict_round_trip_is_stable(self):
        scene = parse_scene_dict(minimal_doc())
        doc = scene_to_dict(scene)
        assert scene_to_dict(parse_scene_dict(doc)) == doc

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(SceneError, match="invalid JSON"):
            parse_scene(path)


def write_doc(tmp_path, doc, name="scene.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestPipeline:
    def test_dry_run_reports_culling(self, capsys):
        doc = minimal_doc()
        doc["model"] = {"type": "sphere", "center": [0.5, 0.5, 0.5], "radius": 0.24}
        doc["grid"]["cells"] = [4, 4, 4]
        out = run_pipeline(parse_scene_dict(doc), dry_run=True)
        assert out["total_cells"] == 64
        assert out["active_cells"] < 64
        assert out["dofs"] < out["full_grid_dofs"]
        printed = capsys.readouterr().out
        assert "active_cells" in printed and "dofs" in printed

    def test_full_run_writes_outputs(self, tmp_path):
        scene = parse_scene_dict(minimal_doc())
        summary = run_pipeline(scene, out_dir=str(tmp_path))
        assert (tmp_path / "results.vtk").exists()
        assert (tmp_path / "summary.txt").exists()
        # Uniaxial pull on a unit cube of E=1: energy near 1/2 sigma^2/E
        # (the fully-clamped base stiffens the response a few percent).
        assert summary["strain_energy"] == pytest.approx(0.5, rel=0.1)
        assert summary["residual"] < 1e-10


class TestCli:
    def test_run_exit_zero_and_deterministic(self, tmp_path):
        scene_path = write_doc(tmp_path, minimal_doc())
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["run", scene_path, "--out", str(out_a), "--threads", "1"]) == 0
        assert main(["run", scene_path, "--out", str(out_b), "--threads", "1"]) == 0
        assert (out_a / "summary.txt").read_text() == (out_b / "summary.txt").read_text()
        assert (out_a / "results.vtk").read_text() == (out_b / "results.vtk").read_text()

    def test_classify_only(self, tmp_path, capsys):
        scene_path = write_doc(tmp_path, minimal_doc())
        assert main(["run", scene_path, "--classify-only"]) == 0
        assert "classification throughput" in capsys.readouterr().out

    def test_usage_error_exit_one(self, capsys):
        assert main([]) == 1
        assert main(["frobnicate"]) == 1
        capsys.readouterr()

    def test_scene_error_exit_one(self, tmp_path, capsys):
        bad = minimal_doc()
        bad["material"]["poisson_ratio"] = "a third"
        assert main(["run", write_doc(tmp_path, bad)]) == 1
        assert "scene error" in capsys.readouterr().err

    def test_missing_file_exit_one(self, capsys):
        assert main(["run", "/no/such/scene.json"]) == 1
        capsys.readouterr()

    def test_geometry_error_exit_three(self, tmp_path, capsys):
        doc = minimal_doc()
        # Model entirely outside the grid: no active cells.
        doc["model"] = {"type": "sphere", "center": [50, 50, 50], "radius": 1.0}
        assert main(["run", write_doc(tmp_path, doc), "--dry-run"]) == 3
        assert "geometry error" in capsys.readouterr().err
