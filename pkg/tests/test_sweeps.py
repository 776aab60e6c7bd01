import numpy as np
import pytest

from csgfcm import (
    BSplineCurve,
    Classification,
    Cuboid,
    DegenerateFrameError,
    Frame,
    FrenetRule,
    GeometryError,
    Profile2D,
    ReferenceParallelRule,
    Segment,
    SweepSolid,
    make_extrusion,
)
from csgfcm.sweeps import ray_cast_2d

UNIT_SQUARE = Profile2D([[0, 0], [1, 0], [1, 1], [0, 1]])


def winding_number(vertices, q):
    """Angle-sum winding oracle for a closed polygon."""
    v = np.asarray(vertices, dtype=float) - np.asarray(q, dtype=float)
    angles = np.arctan2(v[:, 1], v[:, 0])
    d = np.diff(np.append(angles, angles[0]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(d.sum() / (2 * np.pi)))


class TestProfile2D:
    def test_requires_three_vertices(self):
        with pytest.raises(GeometryError):
            Profile2D([[0, 0], [1, 0]])

    def test_rejects_repeated_consecutive_vertices(self):
        with pytest.raises(GeometryError):
            Profile2D([[0, 0], [0, 0], [1, 1]])

    def test_rejects_self_intersection(self):
        with pytest.raises(GeometryError):
            Profile2D([[0, 0], [1, 1], [1, 0], [0, 1]])  # bowtie

    def test_concave_profile_allowed(self):
        Profile2D([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]])


class TestRayCast:
    def test_inside_unit_square(self):
        assert ray_cast_2d(UNIT_SQUARE, [0.5, 0.5]) is Classification.INSIDE

    def test_outside_unit_square(self):
        assert ray_cast_2d(UNIT_SQUARE, [1.5, 0.5]) is Classification.OUTSIDE

    def test_l_shape_concave_corner(self):
        ell = Profile2D([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]])
        assert ray_cast_2d(ell, [1.5, 1.5]) is Classification.OUTSIDE
        assert ray_cast_2d(ell, [0.5, 1.5]) is Classification.INSIDE

    def test_agrees_with_winding_oracle(self):
        rng = np.random.default_rng(31)
        ell = Profile2D([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]])
        pts = rng.uniform(-0.5, 2.5, size=(2000, 2))
        got = ell.contains(pts)
        want = np.array([winding_number(ell.vertices, q) != 0 for q in pts])
        # Oracle is ill-defined on the outline itself; skip near-edge points.
        v = ell.vertices
        near = np.zeros(len(pts), dtype=bool)
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            e = b - a
            t = np.clip((pts - a) @ e / (e @ e), 0.0, 1.0)
            near |= np.linalg.norm(pts - (a + t[:, None] * e), axis=1) < 1e-9
        assert np.array_equal(got[~near], want[~near])

    def test_edge_points_inside(self):
        assert ray_cast_2d(UNIT_SQUARE, [0.5, 0.0]) is Classification.INSIDE
        assert ray_cast_2d(UNIT_SQUARE, [1.0, 1.0]) is Classification.INSIDE

    def test_parity_invariant_under_cyclic_relabeling(self):
        rng = np.random.default_rng(32)
        verts = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
        pts = rng.uniform(-0.5, 2.5, size=(500, 2))
        base = Profile2D(verts).contains(pts)
        for shift in range(1, len(verts)):
            rolled = Profile2D(np.roll(verts, shift, axis=0))
            assert np.array_equal(rolled.contains(pts), base)


class TestFrameRules:
    def arc(self):
        return BSplineCurve(2, [0, 0, 0, 1, 1, 1], [[0, 0, 0], [1, 2, 0], [2, 0, 0]])

    def test_reference_parallel_constant_along_straight_path(self):
        sweep = SweepSolid(
            Segment([0, 0, 0], [0, 0, 2]), UNIT_SQUARE, ReferenceParallelRule([1, 0, 0])
        )
        f0 = sweep.frame_at(0.0)
        for xi in (0.25, 0.5, 1.0):
            assert np.allclose(sweep.frame_at(xi).basis, f0.basis)
        assert np.allclose(f0.basis[:, 2], [0, 0, 1])

    def test_frenet_normal_points_to_concave_side(self):
        sweep = SweepSolid(self.arc(), UNIT_SQUARE, FrenetRule())
        f = sweep.frame_at(0.5)
        # Finite-difference tangents: the turn direction gives the concave side.
        c = self.arc()
        h = 1e-5
        t1 = c.point(0.5 + h) - c.point(0.5)
        t0 = c.point(0.5) - c.point(0.5 - h)
        turn = (t1 - t0) / h
        normal = f.basis[:, 0]
        assert normal @ turn > 0.0
        assert normal[1] < 0.0  # apex of the arch: concave side is downward

    def test_frame_orthonormal_at_random_parameters(self):
        rng = np.random.default_rng(33)
        sweeps = [
            SweepSolid(self.arc(), UNIT_SQUARE, FrenetRule()),
            SweepSolid(Segment([0, 0, 0], [1, 1, 1]), UNIT_SQUARE, ReferenceParallelRule([0, 0, 1])),
        ]
        for sweep in sweeps:
            for xi in rng.uniform(0.0, 1.0, 1000):
                b = sweep.frame_at(float(xi)).basis
                assert np.allclose(b.T @ b, np.eye(3), atol=1e-12)

    def test_frenet_rejects_straight_path(self):
        with pytest.raises(DegenerateFrameError):
            SweepSolid(Segment([0, 0, 0], [0, 0, 2]), UNIT_SQUARE, FrenetRule())

    def test_reference_parallel_rejects_parallel_tangent(self):
        with pytest.raises(DegenerateFrameError):
            SweepSolid(Segment([0, 0, 0], [0, 0, 2]), UNIT_SQUARE, ReferenceParallelRule([0, 0, 1]))


class TestExtrusion:
    def test_matches_cuboid(self):
        rng = np.random.default_rng(34)
        ext = make_extrusion(UNIT_SQUARE, Frame.identity(), 2.0)
        cub = Cuboid([0, 0, 0], [1, 1, 2])
        pts = rng.uniform(-0.5, 2.5, size=(20_000, 3))
        # Compare away from a thin boundary shell where the sweep's axial
        # tolerance makes the two differ by construction.
        lo, hi = np.array([0, 0, 0]), np.array([1, 1, 2])
        shell = np.any((np.abs(pts - lo) < 1e-8) | (np.abs(pts - hi) < 1e-8), axis=1)
        assert np.array_equal(ext.contains(pts[~shell]), cub.contains(pts[~shell]))

    def test_point_examples(self):
        ext = make_extrusion(UNIT_SQUARE, Frame.identity(), 2.0)
        assert ext.classify([0.5, 0.5, 1.0]) is Classification.INSIDE
        assert ext.classify([0.5, 0.5, 2.5]) is Classification.OUTSIDE
        assert ext.classify([1.5, 0.5, 1.0]) is Classification.OUTSIDE

    def test_rejects_non_positive_height(self):
        with pytest.raises(GeometryError):
            make_extrusion(UNIT_SQUARE, Frame.identity(), 0.0)


def slab_oracle(path, profile_half, n_slabs, points, rule):
    """Union of thin extruded slabs along the path: a brute-force stand-in
    for the exact sweep membership.  Returns (inside, slab thickness).

    Each slab's axial half-width covers half the chord to its neighbors plus
    the lever arm of the tangent rotation across the slab, so the union has
    no wedge gaps on the convex side of a curved path.
    """
    xis = np.linspace(0.0, 1.0, n_slabs + 1)
    centers = 0.5 * (xis[:-1] + xis[1:])
    sweep = SweepSolid(path, Profile2D(profile_half * np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]])), rule)
    tangents = np.atleast_2d(path.deriv1(xis))
    tangents = tangents / np.linalg.norm(tangents, axis=1)[:, None]
    r_prof = profile_half * np.sqrt(2.0)
    inside = np.zeros(points.shape[0], dtype=bool)
    thickness = 0.0
    for s, xi in enumerate(centers):
        f = sweep.frame_at(float(xi))
        step = np.linalg.norm(path.point(xis[s + 1]) - path.point(xis[s]))
        turn = np.arccos(np.clip(tangents[s] @ tangents[s + 1], -1.0, 1.0))
        half_w = 0.5 * step + r_prof * turn
        thickness = max(thickness, 2.0 * half_w)
        local = (points - f.origin) @ f.basis
        in_plane = np.all(np.abs(local[:, :2]) <= profile_half, axis=1)
        inside |= in_plane & (np.abs(local[:, 2]) <= half_w)
    return inside, thickness


class TestSweepMembership:
    def test_curved_sweep_against_slab_oracle(self):
        rng = np.random.default_rng(35)
        path = BSplineCurve(2, [0, 0, 0, 1, 1, 1], [[0, 0, 0], [1, 2, 0], [2, 0, 0]])
        half = 0.2
        profile = Profile2D(half * np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]))
        sweep = SweepSolid(path, profile, FrenetRule())
        box = sweep.bounding_box()
        pts = rng.uniform(box.lo, box.hi, size=(3000, 3))
        got = sweep.contains(pts)
        want, thickness = slab_oracle(path, half, 400, pts, FrenetRule())
        disagree = np.nonzero(got != want)[0]
        assert disagree.size <= 0.01 * pts.shape[0]
        # Disagreements must hug the exact boundary: within a ball of two
        # slab thicknesses the sweep classification must change sign.
        offsets = np.array([d for d in np.ndindex(3, 3, 3)]) - 1.0
        offsets = offsets[np.any(offsets != 0.0, axis=1)] * 2.0 * thickness
        for i in disagree:
            near = sweep.contains(pts[i] + offsets)
            assert near.any() and not near.all()

    def test_sweep_interior_axial_coordinate_vanishes(self):
        path = BSplineCurve(2, [0, 0, 0, 1, 1, 1], [[0, 0, 0], [1, 2, 0], [2, 0, 0]])
        sweep = SweepSolid(path, UNIT_SQUARE, FrenetRule())
        # Points generated on the path interior must classify inside when the
        # profile contains the sketch origin region around (0.5, 0.5).
        mid = path.point(0.5)
        assert sweep.classify(mid) is Classification.INSIDE
