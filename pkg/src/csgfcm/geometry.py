"""Solid modeling kernel: primitives, Boolean trees, and membership tests.

A solid is represented implicitly as a tree of analytic primitives combined
by union, intersection and difference.  The only geometric query the rest of
the toolkit ever performs is point membership: ``Solid.contains`` classifies
batches of points, ``Solid.classify`` a single point.  All primitives are
closed bodies, so points on the analytic boundary classify as inside.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

__all__ = [
    "Classification",
    "Frame",
    "Aabb",
    "Solid",
    "Sphere",
    "Cuboid",
    "Cylinder",
    "Union",
    "Intersection",
    "Difference",
    "set_boundary_epsilon",
    "get_boundary_epsilon",
    "as_points",
]

_ORTHO_TOL = 1e-12

# Optional global comparison slack for membership tests.  Default 0: exact
# floating-point comparisons, boundary resolved inside through "<=".
_boundary_eps = 0.0


def set_boundary_epsilon(eps: float) -> None:
    global _boundary_eps
    if eps < 0.0:
        raise GeometryError("boundary epsilon must be non-negative")
    _boundary_eps = float(eps)


def get_boundary_epsilon() -> float:
    return _boundary_eps


class Classification(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"

    @staticmethod
    def from_bool(inside: bool) -> "Classification":
        return Classification.INSIDE if inside else Classification.OUTSIDE


def as_points(points) -> np.ndarray:
    """Coerce input to an (n, 3) float array, rejecting non-finite values."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise GeometryError(f"expected points of shape (n, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("points must have finite components")
    return pts


@dataclass(frozen=True)
class Frame:
    """Right-handed orthonormal local coordinate system.

    ``basis`` holds the local axes as columns.  Local coordinates of a global
    point p are ``basis.T @ (p - origin)``; a primitive attached to the frame
    lives at the frame origin with its axis along the third basis column.
    """

    origin: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        basis = np.asarray(self.basis, dtype=float).reshape(3, 3)
        if not (np.all(np.isfinite(origin)) and np.all(np.isfinite(basis))):
            raise GeometryError("frame entries must be finite")
        if not np.allclose(basis.T @ basis, np.eye(3), atol=_ORTHO_TOL, rtol=0.0):
            raise GeometryError("frame basis columns must be orthonormal")
        if np.linalg.det(basis) < 0.0:
            raise GeometryError("frame basis must be right-handed")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "basis", basis)

    @staticmethod
    def identity() -> "Frame":
        return Frame(np.zeros(3), np.eye(3))

    @staticmethod
    def from_axis(origin, axis, in_plane=None) -> "Frame":
        """Build a frame whose third basis vector is ``axis``.

        ``in_plane`` optionally fixes the first basis vector (projected onto
        the plane orthogonal to the axis); otherwise an arbitrary stable
        in-plane direction is chosen.
        """
        a3 = np.asarray(axis, dtype=float).reshape(3)
        norm = np.linalg.norm(a3)
        if norm < 1e-14:
            raise GeometryError("frame axis must be nonzero")
        a3 = a3 / norm
        if in_plane is None:
            helper = np.array([1.0, 0.0, 0.0])
            if abs(a3[0]) > 0.9:
                helper = np.array([0.0, 1.0, 0.0])
            in_plane = helper
        a1 = np.asarray(in_plane, dtype=float).reshape(3)
        a1 = a1 - a3 * (a1 @ a3)
        norm1 = np.linalg.norm(a1)
        if norm1 < 1e-14:
            raise GeometryError("in-plane direction parallel to frame axis")
        a1 = a1 / norm1
        a2 = np.cross(a3, a1)
        return Frame(origin, np.column_stack([a1, a2, a3]))

    def to_local(self, points) -> np.ndarray:
        """Map global points into frame coordinates."""
        pts = as_points(points)
        out = (pts - self.origin) @ self.basis
        return out[0] if np.asarray(points).ndim == 1 else out

    def to_global(self, points) -> np.ndarray:
        """Inverse of :meth:`to_local`."""
        pts = as_points(points)
        out = pts @ self.basis.T + self.origin
        return out[0] if np.asarray(points).ndim == 1 else out


_EMPTY_LO = np.full(3, np.inf)
_EMPTY_HI = np.full(3, -np.inf)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box; ``lo > hi`` in any direction means empty."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float).reshape(3))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float).reshape(3))

    @staticmethod
    def empty() -> "Aabb":
        return Aabb(_EMPTY_LO.copy(), _EMPTY_HI.copy())

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.lo > self.hi))

    @property
    def extents(self) -> np.ndarray:
        return np.maximum(self.hi - self.lo, 0.0)

    def union(self, other: "Aabb") -> "Aabb":
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        return Aabb(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def intersection(self, other: "Aabb") -> "Aabb":
        box = Aabb(np.maximum(self.lo, other.lo), np.minimum(self.hi, other.hi))
        return Aabb.empty() if box.is_empty else box

    def inflated(self, margin: float) -> "Aabb":
        if self.is_empty:
            return self
        return Aabb(self.lo - margin, self.hi + margin)

    def contains_points(self, points) -> np.ndarray:
        pts = as_points(points)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)


class Solid:
    """Base class for every node of a CSG tree."""

    def contains(self, points) -> np.ndarray:
        """Vectorized membership: (n, 3) points -> (n,) boolean array."""
        raise NotImplementedError

    def bounding_box(self) -> Aabb:
        """Conservative axis-aligned bounds of the solid."""
        raise NotImplementedError

    def classify(self, point) -> Classification:
        """Single-point membership with Boolean short-circuiting."""
        return Classification.from_bool(self._classify_scalar(np.asarray(point, dtype=float)))

    def _classify_scalar(self, point: np.ndarray) -> bool:
        return bool(self.contains(point[None, :])[0])

    # Convenience builders mirroring the three Boolean operations.
    def union(self, other: "Solid") -> "Union":
        return Union(self, other)

    def intersection(self, other: "Solid") -> "Intersection":
        return Intersection(self, other)

    def difference(self, other: "Solid") -> "Difference":
        return Difference(self, other)


@dataclass(frozen=True)
class Sphere(Solid):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(3)
        if not np.all(np.isfinite(center)):
            raise GeometryError("sphere center must be finite")
        if not (np.isfinite(self.radius) and self.radius > 0.0):
            raise GeometryError("sphere radius must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, points) -> np.ndarray:
        pts = as_points(points)
        d2 = np.sum((pts - self.center) ** 2, axis=1)
        return d2 <= (self.radius + _boundary_eps) ** 2

    def bounding_box(self) -> Aabb:
        return Aabb(self.center - self.radius, self.center + self.radius)


@dataclass(frozen=True)
class Cuboid(Solid):
    """Axis-aligned box given by two diagonal corner points."""

    p_start: np.ndarray
    p_end: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.p_start, dtype=float).reshape(3)
        hi = np.asarray(self.p_end, dtype=float).reshape(3)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise GeometryError("cuboid corners must be finite")
        if np.any(lo > hi):
            raise GeometryError("cuboid requires p_start <= p_end componentwise")
        object.__setattr__(self, "p_start", lo)
        object.__setattr__(self, "p_end", hi)

    def contains(self, points) -> np.ndarray:
        pts = as_points(points)
        eps = _boundary_eps
        return np.all((pts >= self.p_start - eps) & (pts <= self.p_end + eps), axis=1)

    def bounding_box(self) -> Aabb:
        return Aabb(self.p_start, self.p_end)


@dataclass(frozen=True)
class Cylinder(Solid):
    """Circular cylinder in a local frame.

    The base disk sits at the frame origin in the frame's 1-2 plane; the axis
    runs along the third basis vector over [0, height].
    """

    frame: Frame
    radius: float
    height: float

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0.0):
            raise GeometryError("cylinder radius must be positive")
        if not (np.isfinite(self.height) and self.height > 0.0):
            raise GeometryError("cylinder height must be positive")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "height", float(self.height))

    def contains(self, points) -> np.ndarray:
        local = self.frame.to_local(as_points(points))
        eps = _boundary_eps
        radial = local[:, 0] ** 2 + local[:, 1] ** 2 <= (self.radius + eps) ** 2
        axial = (local[:, 2] >= -eps) & (local[:, 2] <= self.height + eps)
        return radial & axial

    def bounding_box(self) -> Aabb:
        # Tight bounds of a capped cylinder with axis a: per coordinate the
        # lateral extent is r * sqrt(1 - a_i^2).
        axis = self.frame.basis[:, 2]
        base = self.frame.origin
        top = base + self.height * axis
        lateral = self.radius * np.sqrt(np.maximum(0.0, 1.0 - axis**2))
        return Aabb(np.minimum(base, top) - lateral, np.maximum(base, top) + lateral)


@dataclass(frozen=True)
class _BooleanNode(Solid):
    left: Solid
    right: Solid

    def __post_init__(self):
        if not isinstance(self.left, Solid) or not isinstance(self.right, Solid):
            raise GeometryError("Boolean operands must be solids")


class Union(_BooleanNode):
    def contains(self, points) -> np.ndarray:
        return self.left.contains(points) | self.right.contains(points)

    def _classify_scalar(self, point) -> bool:
        return self.left._classify_scalar(point) or self.right._classify_scalar(point)

    def bounding_box(self) -> Aabb:
        return self.left.bounding_box().union(self.right.bounding_box())


class Intersection(_BooleanNode):
    def contains(self, points) -> np.ndarray:
        return self.left.contains(points) & self.right.contains(points)

    def _classify_scalar(self, point) -> bool:
        return self.left._classify_scalar(point) and self.right._classify_scalar(point)

    def bounding_box(self) -> Aabb:
        return self.left.bounding_box().intersection(self.right.bounding_box())


class Difference(_BooleanNode):
    """Ordered difference: left minus right (non-regularized semantics)."""

    def contains(self, points) -> np.ndarray:
        return self.left.contains(points) & ~self.right.contains(points)

    def _classify_scalar(self, point) -> bool:
        return self.left._classify_scalar(point) and not self.right._classify_scalar(point)

    def bounding_box(self) -> Aabb:
        # Subtracting cannot grow the left operand.
        return self.left.bounding_box()
