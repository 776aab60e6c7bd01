"""Parametric sweep paths: line segments and clamped B-spline curves.

Curves are defined on the normalized parameter domain [0, 1] and provide the
point and the first two derivatives, which is all the closest-point Newton
iteration needs.  B-splines are evaluated with the de Boor knot-insertion
recurrence; derivatives come from the degree-reduced derivative curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

__all__ = ["Segment", "BSplineCurve", "closest_point", "closest_point_batch"]


class ParamCurve:
    """Interface: point(xi), deriv1(xi), deriv2(xi) on xi in [0, 1]."""

    def point(self, xi):
        raise NotImplementedError

    def deriv1(self, xi):
        raise NotImplementedError

    def deriv2(self, xi):
        raise NotImplementedError

    def arc_length(self, samples: int = 256) -> float:
        """Chord-length estimate used for tolerance scaling."""
        xi = np.linspace(0.0, 1.0, samples + 1)
        pts = self.point(xi)
        return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))

    def control_hull(self) -> np.ndarray:
        """Points whose hull bounds the curve (convex-hull property)."""
        raise NotImplementedError


def _check_param(xi) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if arr.size and (arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12):
        raise GeometryError("curve parameter outside [0, 1]")
    return np.clip(arr, 0.0, 1.0)


@dataclass(frozen=True)
class Segment(ParamCurve):
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(3)
        b = np.asarray(self.b, dtype=float).reshape(3)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise GeometryError("segment endpoints must be finite")
        if np.allclose(a, b):
            raise GeometryError("segment endpoints must be distinct")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def point(self, xi):
        t = _check_param(xi)
        out = self.a + t[:, None] * (self.b - self.a)
        return out[0] if np.isscalar(xi) or np.asarray(xi).ndim == 0 else out

    def deriv1(self, xi):
        t = _check_param(xi)
        out = np.broadcast_to(self.b - self.a, (t.size, 3)).copy()
        return out[0] if np.isscalar(xi) or np.asarray(xi).ndim == 0 else out

    def deriv2(self, xi):
        t = _check_param(xi)
        out = np.zeros((t.size, 3))
        return out[0] if np.isscalar(xi) or np.asarray(xi).ndim == 0 else out

    def control_hull(self) -> np.ndarray:
        return np.vstack([self.a, self.b])


class BSplineCurve(ParamCurve):
    """Clamped B-spline of degree >= 1 with a normalized knot vector."""

    def __init__(self, degree: int, knots, control_points):
        degree = int(degree)
        knots = np.asarray(knots, dtype=float).copy()
        ctrl = np.asarray(control_points, dtype=float)
        if degree < 1:
            raise GeometryError("B-spline degree must be >= 1")
        if ctrl.ndim != 2 or ctrl.shape[1] != 3:
            raise GeometryError("control points must have shape (n, 3)")
        if ctrl.shape[0] < degree + 1:
            raise GeometryError("need at least degree + 1 control points")
        if knots.size != ctrl.shape[0] + degree + 1:
            raise GeometryError("knot count must equal #control + degree + 1")
        if np.any(np.diff(knots) < 0.0):
            raise GeometryError("knot vector must be non-decreasing")
        if not (np.allclose(knots[: degree + 1], knots[0]) and np.allclose(knots[-degree - 1 :], knots[-1])):
            raise GeometryError("knot vector must be clamped (end multiplicity degree + 1)")
        span = knots[-1] - knots[0]
        if span <= 0.0:
            raise GeometryError("knot vector spans zero length")
        self.degree = degree
        self.knots = (knots - knots[0]) / span
        self.control_points = ctrl
        self._d1 = self._derivative_data(self.degree, self.knots, self.control_points)
        if degree >= 2:
            self._d2 = self._derivative_data(self.degree - 1, self._d1[1], self._d1[2])
        else:
            self._d2 = None

    @staticmethod
    def _derivative_data(p, knots, ctrl):
        """Degree-reduced derivative curve (degree, knots, control points)."""
        denom = knots[p + 1 : p + ctrl.shape[0]] - knots[1 : ctrl.shape[0]]
        safe = np.where(denom > 0.0, denom, 1.0)
        dctrl = p * (ctrl[1:] - ctrl[:-1]) / safe[:, None]
        dctrl[denom <= 0.0] = 0.0
        return p - 1, knots[1:-1], dctrl

    @staticmethod
    def _de_boor(p, knots, ctrl, xi):
        """Vectorized de Boor evaluation at parameters xi (1D array)."""
        n = ctrl.shape[0]
        if p == 0:
            k = np.clip(np.searchsorted(knots, xi, side="right") - 1, 0, n - 1)
            return ctrl[k]
        k = np.clip(np.searchsorted(knots, xi, side="right") - 1, p, n - 1)
        d = ctrl[k[:, None] - p + np.arange(p + 1)].astype(float)
        for r in range(1, p + 1):
            for j in range(p, r - 1, -1):
                i = k - p + j
                denom = knots[i + p - r + 1] - knots[i]
                safe = np.where(denom > 0.0, denom, 1.0)
                alpha = np.where(denom > 0.0, (xi - knots[i]) / safe, 0.0)
                d[:, j] = (1.0 - alpha)[:, None] * d[:, j - 1] + alpha[:, None] * d[:, j]
        return d[:, p]

    def _wrap(self, xi, out):
        return out[0] if np.isscalar(xi) or np.asarray(xi).ndim == 0 else out

    def point(self, xi):
        t = _check_param(xi)
        return self._wrap(xi, self._de_boor(self.degree, self.knots, self.control_points, t))

    def deriv1(self, xi):
        t = _check_param(xi)
        p1, k1, c1 = self._d1
        return self._wrap(xi, self._de_boor(p1, k1, c1, t))

    def deriv2(self, xi):
        t = _check_param(xi)
        if self._d2 is None:
            return self._wrap(xi, np.zeros((t.size, 3)))
        p2, k2, c2 = self._d2
        return self._wrap(xi, self._de_boor(p2, k2, c2, t))

    def control_hull(self) -> np.ndarray:
        return self.control_points


def closest_point_batch(curve: ParamCurve, points, seeds: int = 8,
                        tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Parameter of the closest curve point for each query point.

    Multi-start Newton on f(xi) = C'(xi) . (P - C(xi)): one seed at the
    midpoint of each of ``seeds`` uniform subintervals, iterates clamped to
    [0, 1].  Both endpoints always enter the candidate set, so a diverging
    seed is simply dropped.  Ties in distance resolve to the smallest xi.
    """
    if seeds < 1:
        raise GeometryError("need at least one Newton seed")
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = pts.shape[0]

    xi = np.tile((np.arange(seeds) + 0.5) / seeds, (n, 1))  # (n, seeds)
    active = np.ones_like(xi, dtype=bool)
    for _ in range(max_iter):
        flat = xi.ravel()
        c = curve.point(flat).reshape(n, seeds, 3)
        d1 = curve.deriv1(flat).reshape(n, seeds, 3)
        d2 = curve.deriv2(flat).reshape(n, seeds, 3)
        r = pts[:, None, :] - c
        f = np.einsum("nsk,nsk->ns", d1, r)
        fp = np.einsum("nsk,nsk->ns", d2, r) - np.einsum("nsk,nsk->ns", d1, d1)
        ok = active & (np.abs(fp) > 1e-300)
        step = np.zeros_like(xi)
        step[ok] = f[ok] / fp[ok]
        new_xi = np.clip(xi - step, 0.0, 1.0)
        moved = np.abs(new_xi - xi)
        xi = np.where(ok, new_xi, xi)
        active = ok & (moved >= tol)
        if not active.any():
            break

    ends = np.tile(np.array([0.0, 1.0]), (n, 1))
    candidates = np.concatenate([xi, ends], axis=1)
    candidates = np.sort(candidates, axis=1)  # argmin then favors smallest xi
    cpts = curve.point(candidates.ravel()).reshape(n, -1, 3)
    dist = np.linalg.norm(pts[:, None, :] - cpts, axis=2)
    best = np.argmin(dist, axis=1)
    return candidates[np.arange(n), best]


def closest_point(curve: ParamCurve, point, seeds: int = 8) -> float:
    """Single-point convenience wrapper around :func:`closest_point_batch`."""
    return float(closest_point_batch(curve, np.asarray(point, dtype=float)[None, :], seeds=seeds)[0])
