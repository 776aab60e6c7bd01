"""Swept solids: closed 2D profiles moved along parametric paths.

Membership of a 3D point reduces to a 2D problem: project the point onto the
path (Newton closest point), build the moving frame there, map the point into
the frame, and ray-cast the in-plane coordinates against the closed profile.
The axial coordinate is checked against a small tolerance so points that
project past the capped ends of the path classify outside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import ParamCurve, Segment, closest_point_batch
from .errors import DegenerateFrameError, GeometryError
from .geometry import Aabb, Classification, Frame, Solid, as_points

__all__ = [
    "Profile2D",
    "FrenetRule",
    "ReferenceParallelRule",
    "SweepSolid",
    "make_extrusion",
    "ray_cast_2d",
]

_EDGE_SNAP = 1e-12
_CURVATURE_TOL = 1e-10


@dataclass(frozen=True)
class Profile2D:
    """Closed, non-self-intersecting polyline in the sketch plane."""

    vertices: np.ndarray

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise GeometryError("profile vertices must have shape (n, 2)")
        if verts.shape[0] < 3:
            raise GeometryError("profile needs at least 3 vertices")
        if not np.all(np.isfinite(verts)):
            raise GeometryError("profile vertices must be finite")
        closed = np.vstack([verts, verts[0]])
        if np.any(np.all(np.diff(closed, axis=0) == 0.0, axis=1)):
            raise GeometryError("consecutive profile vertices must be distinct")
        object.__setattr__(self, "vertices", verts)
        self._check_simple()

    def _check_simple(self):
        """Reject self-intersecting outlines by a segment-pair sweep."""
        v = self.vertices
        n = v.shape[0]
        segs = [(v[i], v[(i + 1) % n]) for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue  # shared endpoint with a neighbor
                if _segments_cross(*segs[i], *segs[j]):
                    raise GeometryError("profile outline is self-intersecting")

    @property
    def radius(self) -> float:
        """Largest vertex distance from the sketch origin."""
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def contains(self, points) -> np.ndarray:
        """Vectorized crossing-parity test; near-edge points count inside."""
        q = np.asarray(points, dtype=float).reshape(-1, 2)
        v = self.vertices
        v1 = v
        v2 = np.roll(v, -1, axis=0)
        qx = q[:, 0][:, None]
        qy = q[:, 1][:, None]
        y1, y2 = v1[:, 1][None, :], v2[:, 1][None, :]
        x1, x2 = v1[:, 0][None, :], v2[:, 0][None, :]
        # Half-open rule: an edge counts iff exactly one endpoint is strictly
        # above the ray, which handles rays grazing a vertex.
        straddles = (y1 > qy) != (y2 > qy)
        dy = np.where(straddles, y2 - y1, 1.0)
        x_cross = x1 + (qy - y1) * (x2 - x1) / dy
        crossings = np.sum(straddles & (x_cross > qx), axis=1)
        inside = (crossings % 2) == 1

        # Closed-body convention: points on (or numerically at) the outline.
        ex = x2 - x1
        ey = y2 - y1
        len2 = ex**2 + ey**2
        t = np.clip(((qx - x1) * ex + (qy - y1) * ey) / len2, 0.0, 1.0)
        dist2 = (qx - (x1 + t * ex)) ** 2 + (qy - (y1 + t * ey)) ** 2
        on_edge = np.any(dist2 <= _EDGE_SNAP**2, axis=1)
        return inside | on_edge


def ray_cast_2d(profile: Profile2D, q) -> Classification:
    """Classify a single 2D point against a closed profile."""
    return Classification.from_bool(bool(profile.contains(np.asarray(q, dtype=float)[None, :])[0]))


def _segments_cross(a, b, c, d) -> bool:
    """True if open segments ab and cd properly intersect."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0.0) and (o3 * o4 < 0.0)


class FrameRule:
    """Strategy choosing the in-plane axes of the moving frame."""

    def in_plane_axes(self, tangent: np.ndarray, accel: np.ndarray):
        raise NotImplementedError


@dataclass(frozen=True)
class FrenetRule(FrameRule):
    """First in-plane axis from the curvature direction.

    Fails loudly at straight segments and inflection points instead of
    silently patching the frame; use ReferenceParallelRule for such paths.
    """

    def in_plane_axes(self, tangent, accel):
        normal = accel - tangent * np.einsum("...k,...k->...", accel, tangent)[..., None]
        norm = np.linalg.norm(normal, axis=-1)
        if np.any(norm < _CURVATURE_TOL):
            raise DegenerateFrameError(
                "vanishing curvature: Frenet frame undefined; "
                "use a reference-parallel frame rule for this path"
            )
        a1 = normal / norm[..., None]
        a2 = np.cross(tangent, a1)
        return a1, a2


@dataclass(frozen=True)
class ReferenceParallelRule(FrameRule):
    """First in-plane axis kept parallel to a fixed reference plane."""

    plane_normal: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.plane_normal, dtype=float).reshape(3)
        norm = np.linalg.norm(n)
        if norm < 1e-14:
            raise GeometryError("reference plane normal must be nonzero")
        object.__setattr__(self, "plane_normal", n / norm)

    def in_plane_axes(self, tangent, accel):
        a1 = np.cross(np.broadcast_to(self.plane_normal, tangent.shape), tangent)
        norm = np.linalg.norm(a1, axis=-1)
        if np.any(norm < _CURVATURE_TOL):
            raise DegenerateFrameError("path tangent parallel to the reference plane normal")
        a1 = a1 / norm[..., None]
        a2 = np.cross(tangent, a1)
        return a1, a2


class SweepSolid(Solid):
    """Closed 2D profile moved along a path with a moving-frame rule."""

    def __init__(self, path: ParamCurve, profile: Profile2D, frame_rule: FrameRule,
                 seeds: int = 8, axial_tol: float | None = None):
        if not isinstance(profile, Profile2D):
            raise GeometryError("sweep profile must be a Profile2D")
        self.path = path
        self.profile = profile
        self.frame_rule = frame_rule
        self.seeds = int(seeds)
        length = path.arc_length()
        if length <= 0.0:
            raise GeometryError("sweep path has zero length")
        # End caps: a clamped projection leaves a nonzero axial offset, which
        # this tolerance rejects while keeping exact end faces inside.
        self.axial_tol = float(axial_tol) if axial_tol is not None else 1e-9 * length
        self.frame_at(0.0)  # fail fast on degenerate start frames

    def frame_at(self, xi: float) -> Frame:
        """Moving frame at parameter xi; third axis is the unit tangent."""
        xi_arr = np.atleast_1d(float(xi))
        origin = self.path.point(xi_arr)[0]
        basis = self._bases(xi_arr)[0]
        return Frame(origin, basis)

    def _bases(self, xi: np.ndarray) -> np.ndarray:
        """Stacked frame bases (n, 3, 3) with axes in columns."""
        d1 = np.atleast_2d(self.path.deriv1(xi))
        d2 = np.atleast_2d(self.path.deriv2(xi))
        norms = np.linalg.norm(d1, axis=1)
        if np.any(norms < 1e-14):
            raise DegenerateFrameError("path tangent vanishes")
        tangent = d1 / norms[:, None]
        a1, a2 = self.frame_rule.in_plane_axes(tangent, d2)
        return np.stack([a1, a2, tangent], axis=2)

    def contains(self, points) -> np.ndarray:
        pts = as_points(points)
        # The control-hull box is conservative, so points outside it skip
        # the per-point Newton projection entirely.
        near = self.bounding_box().contains_points(pts)
        out = np.zeros(pts.shape[0], dtype=bool)
        if near.any():
            out[near] = self._contains_near(pts[near])
        return out

    def _contains_near(self, pts: np.ndarray) -> np.ndarray:
        xi = closest_point_batch(self.path, pts, seeds=self.seeds)
        origins = np.atleast_2d(self.path.point(xi))
        bases = self._bases(xi)
        local = np.einsum("nk,nkj->nj", pts - origins, bases)
        in_profile = self.profile.contains(local[:, :2])
        return in_profile & (np.abs(local[:, 2]) <= self.axial_tol)

    def bounding_box(self) -> Aabb:
        hull = self.path.control_hull()
        r = self.profile.radius
        return Aabb(hull.min(axis=0) - r, hull.max(axis=0) + r)


def make_extrusion(profile: Profile2D, frame: Frame, height: float) -> SweepSolid:
    """Sweep along a straight segment orthogonal to the sketch plane.

    The sketch plane is the frame's 1-2 plane; the profile travels ``height``
    along the third frame axis with a constant frame.
    """
    if height <= 0.0:
        raise GeometryError("extrusion height must be positive")
    axis = frame.basis[:, 2]
    path = Segment(frame.origin, frame.origin + height * axis)
    # Reference normal = second frame axis reproduces the sketch frame:
    # a1 = a2 x a3, a2 = a3 x a1.
    rule = ReferenceParallelRule(frame.basis[:, 1])
    return SweepSolid(path, profile, rule)
