"""Linear solve and pointwise post-processing of the displacement field."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .discretization import GlobalSystem
from .errors import CsgFcmError, SolverError

__all__ = ["SolveStats", "SolutionField", "pcg", "solve", "von_mises"]


@dataclass
class SolveStats:
    iterations: int
    residual: float
    residual_history: list[float] = field(default_factory=list)


def pcg(a, b, rtol: float = 1e-10, max_iter: int | None = None, x0=None):
    """Conjugate gradients with Jacobi (diagonal) preconditioning.

    Returns (x, stats).  Convergence is measured on the true residual
    ||a x - b|| / ||b||; failure raises SolverError carrying the history.
    ``x0`` is an optional initial guess (for example a solution from a
    coarser, hierarchically nested discretization).
    """
    n = b.shape[0]
    if max_iter is None:
        max_iter = max(1000, 10 * n)
    diag = a.diagonal() if sp.issparse(a) else np.diag(a).copy()
    if np.any(diag <= 0.0):
        # Zero rows cannot appear for alpha > 0; guard against misuse.
        raise SolverError("stiffness diagonal is not positive")
    inv_diag = 1.0 / diag

    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros(n), SolveStats(0, 0.0, [0.0])

    if x0 is None:
        x = np.zeros(n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        if x.shape != b.shape:
            raise SolverError("initial guess length does not match the system")
        r = b - a @ x
    z = inv_diag * r
    p = z
    rz = r @ z
    history = [float(np.linalg.norm(r) / norm_b)]
    if history[0] < rtol:
        return x, SolveStats(0, history[0], history)
    for it in range(1, max_iter + 1):
        ap = a @ p
        denom = p @ ap
        if denom <= 0.0:
            raise SolverError("matrix is not positive definite", history)
        alpha = rz / denom
        x = x + alpha * p
        r = r - alpha * ap
        rel = np.linalg.norm(r) / norm_b
        history.append(float(rel))
        if rel < rtol:
            return x, SolveStats(it, float(rel), history)
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"PCG did not converge in {max_iter} iterations (residual {history[-1]:.3e})",
        history,
    )


def solve(system: GlobalSystem, rtol: float = 1e-10, max_iter: int | None = None, x0=None) -> "SolutionField":
    """Solve the assembled system for the displacement coefficients."""
    u, stats = pcg(system.stiffness, system.load, rtol=rtol, max_iter=max_iter, x0=x0)
    return SolutionField(system, u, stats)


def von_mises(sigma: np.ndarray) -> float:
    """Von Mises equivalent stress sqrt(3 J2) of a symmetric 3x3 tensor."""
    s = np.asarray(sigma, dtype=float)
    dev = s - np.trace(s) / 3.0 * np.eye(3)
    return float(np.sqrt(1.5 * np.sum(dev * dev)))


class SolutionField:
    """Displacement coefficients with pointwise field evaluation."""

    def __init__(self, system: GlobalSystem, coefficients: np.ndarray, stats: SolveStats | None = None):
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (system.n_dofs,):
            raise CsgFcmError("coefficient vector length does not match the system")
        self.system = system
        self.coefficients = coefficients
        self.stats = stats

    @property
    def strain_energy(self) -> float:
        u = self.coefficients
        return float(0.5 * u @ (self.system.stiffness @ u))

    def _locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        dof_map = self.system.dof_map
        grid = dof_map.grid
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not np.all(grid.bbox.contains_points(pts)):
            raise CsgFcmError("point outside computational domain")
        cells = grid.locate(pts)
        for cell in {tuple(int(v) for v in c) for c in cells}:
            if not dof_map.is_active(cell):
                raise CsgFcmError("point outside computational domain")
        return pts, cells

    def displacement(self, points) -> np.ndarray:
        """Displacement vectors at points inside active cells."""
        pts, cells = self._locate(points)
        out = np.empty_like(pts)
        grid = self.system.dof_map.grid
        for i in range(pts.shape[0]):
            cell = tuple(int(v) for v in cells[i])
            local = grid.local_coords(pts[i], np.asarray(cell, dtype=float))
            vals, _ = self.system.basis.eval(local)
            dofs = self.system.dof_map.cell_dofs(cell)
            coeff = self.coefficients[dofs].reshape(-1, 3)
            out[i] = vals[0] @ coeff
        return out[0] if np.asarray(points).ndim == 1 else out

    def displacement_gradient(self, point) -> np.ndarray:
        """3x3 gradient du_i/dx_j at a single point."""
        pts, cells = self._locate(point)
        cell = tuple(int(v) for v in cells[0])
        grid = self.system.dof_map.grid
        local = grid.local_coords(pts[0], np.asarray(cell, dtype=float))
        _, grads = self.system.basis.eval_global(local, grid.cell_extents)
        dofs = self.system.dof_map.cell_dofs(cell)
        coeff = self.coefficients[dofs].reshape(-1, 3)
        return np.einsum("mi,mj->ij", coeff, grads[0])

    def strain(self, point) -> np.ndarray:
        g = self.displacement_gradient(point)
        return 0.5 * (g + g.T)

    def stress(self, point) -> np.ndarray:
        eps = self.strain(point)
        lam = self.system.material.lame_lambda
        mu = self.system.material.lame_mu
        return lam * np.trace(eps) * np.eye(3) + 2.0 * mu * eps

    def von_mises(self, point) -> float:
        return von_mises(self.stress(point))
