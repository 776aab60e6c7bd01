"""End-to-end acceptance checks, one per shipped guarantee.

Each test prints a single pass/fail line (run with ``-s`` to see them all)
and asserts the stated tolerance. Oracles are independent of the library
code under test: flattened Boolean formulas, dense slab unions, dense
parameter scans, analytic volumes/areas/energies, and finite differences.
"""

import time

import numpy as np
import pytest

from csgfcm import (
    BSplineCurve,
    Cuboid,
    DirichletSpec,
    Frame,
    Material,
    NeumannSpec,
    QuadratureConfig,
    RectPatch,
    ReferenceParallelRule,
    Segment,
    Sphere,
    SweepSolid,
    assemble,
    closest_point,
    is_watertight,
    marching_cubes,
    solve,
)
from csgfcm.basis import TensorBasis
from csgfcm.boundary import apply_penalty_dirichlet, neumann_load
from csgfcm.cli import run_pipeline
from csgfcm.discretization import CellGrid
from csgfcm.geometry import Aabb
from csgfcm.quadrature import octree_leaves
from csgfcm.scene import parse_scene
from csgfcm.sweeps import FrenetRule, Profile2D

from test_geometry import _random_tree
from test_sweeps import slab_oracle


def report(num, name, ok, detail):
    print(f"\ncriterion {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")


def test_01_membership_matches_flattened_formula():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(50):
        tree, formula = _random_tree(rng, int(rng.integers(1, 7)))
        pts = rng.uniform(-2.5, 2.5, size=(100_000, 3))
        mismatches += int(np.count_nonzero(tree.contains(pts) != formula(pts)))
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10.0
    report(1, "membership oracle", ok, f"{mismatches} mismatches in 5M points, {elapsed:.1f}s")
    assert mismatches == 0
    assert elapsed < 10.0


def test_02_sweep_membership_matches_slab_oracle():
    rng = np.random.default_rng(102)
    square = Profile2D(0.2 * np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]))
    configs = [
        ("straight", Segment([0, 0, 0], [2, 0.5, 0.2]), ReferenceParallelRule([0, 0, 1])),
        ("planar", BSplineCurve(2, [0, 0, 0, 1, 1, 1], [[0, 0, 0], [1, 2, 0], [2, 0, 0]]), FrenetRule()),
        (
            "3d",
            BSplineCurve(2, [0, 0, 0, 0.5, 1, 1, 1], [[0, 0, 0], [1, 1, 1], [2, 0, 1], [2, 2, 2]]),
            ReferenceParallelRule([1, 0, 0]),
        ),
    ]
    start = time.perf_counter()
    worst = 1.0
    for label, path, rule in configs:
        sweep = SweepSolid(path, square, rule)
        box = sweep.bounding_box()
        pts = rng.uniform(box.lo, box.hi, size=(10_000, 3))
        got = sweep.contains(pts)
        want, thickness = slab_oracle(path, 0.2, 2000, pts, rule)
        agree = float(np.mean(got == want))
        worst = min(worst, agree)
        assert agree >= 0.999, f"{label}: only {agree:.4%} agreement"
        # Every disagreement must sit within the oracle's slab-thickness
        # distance of the membership boundary: classification changes sign
        # inside a surrounding offset ball.
        offsets = np.array(list(np.ndindex(3, 3, 3))) - 1.0
        offsets = offsets[np.any(offsets != 0.0, axis=1)] * 2.0 * thickness
        for i in np.nonzero(got != want)[0]:
            near = sweep.contains(pts[i] + offsets)
            assert near.any() and not near.all(), f"{label}: disagreement far from boundary"
    elapsed = time.perf_counter() - start
    ok = worst >= 0.999 and elapsed < 30.0
    report(2, "sweep vs slab oracle", ok, f"worst agreement {worst:.4%}, {elapsed:.1f}s")
    assert elapsed < 30.0


def test_03_newton_projection_matches_dense_scan():
    rng = np.random.default_rng(103)
    xs = np.linspace(0.0, 1.0, 1_000_001)
    worst = 0.0
    for _ in range(10):
        degree = int(rng.integers(2, 4))
        n_ctrl = degree + 1 + int(rng.integers(0, 3))
        interior = np.sort(rng.uniform(0.15, 0.85, size=n_ctrl - degree - 1))
        knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
        controls = rng.uniform(-1.0, 1.0, size=(n_ctrl, 3))
        curve = BSplineCurve(degree, knots, controls)
        samples = curve.point(xs)
        for _ in range(10):
            q = rng.uniform(-1.5, 1.5, size=3)
            xi = closest_point(curve, q, seeds=32)
            xi_scan = xs[int(np.argmin(np.sum((samples - q) ** 2, axis=1)))]
            worst = max(worst, abs(xi - xi_scan))
    ok = worst < 1e-6
    report(3, "closest-point projection", ok, f"max |dxi| {worst:.2e} over 100 pairs")
    assert worst < 1e-6


def sphere_volume_estimate(depth):
    cell = Aabb([-1.5, -1.5, -1.5], [1.5, 1.5, 1.5])
    quad = octree_leaves(cell, Sphere([0, 0, 0], 1.0), QuadratureConfig(depth, 3, 10.0))
    alpha_vol = float(np.sum(quad.weights * quad.alpha))
    fict = 1e-10
    return (alpha_vol - fict * 27.0) / (1.0 - fict)


def test_04_octree_alpha_volume():
    exact = 4.0 * np.pi / 3.0
    errors = [abs(sphere_volume_estimate(d) - exact) / exact for d in range(5)]
    decreasing = all(errors[i + 1] < errors[i] for i in range(4))
    ok = errors[4] < 0.005 and decreasing
    report(4, "octree quadrature", ok, f"depth-4 error {errors[4]:.3%}, strictly decreasing={decreasing}")
    assert errors[4] < 0.005
    assert decreasing


def test_05_patch_test():
    sigma, e_mod, nu = 1.5, 2.0, 0.3
    full = Cuboid([-1, -1, -1], [2, 2, 2])
    start = time.perf_counter()
    worst_sig = 0.0
    worst_energy = 0.0
    for degree in (1, 2):
        grid = CellGrid(Aabb([0, 0, 0], [1, 1, 1]), (2, 2, 2))
        system = assemble(grid, full, Material(e_mod, nu), degree, QuadratureConfig(0, degree + 1, 8.0))
        top = RectPatch(Frame.from_axis([0.5, 0.5, 1.0], [0, 0, 1]), (1.0, 1.0), 128)
        neumann_load(NeumannSpec(top, [0.0, 0.0, sigma]), system)
        # Symmetry constraints compatible with the exact uniaxial solution.
        for origin, axis, comp in (
            ([0.5, 0.5, 0.0], [0, 0, 1], 2),
            ([0.0, 0.5, 0.5], [1, 0, 0], 0),
            ([0.5, 0.0, 0.5], [0, 1, 0], 1),
        ):
            disp = [None, None, None]
            disp[comp] = 0.0
            patch = RectPatch(Frame.from_axis(origin, axis), (1.0, 1.0), 4)
            apply_penalty_dirichlet(DirichletSpec(patch, tuple(disp)), system)
        sol = solve(system, rtol=1e-12)
        exact_energy = sigma**2 / (2.0 * e_mod)
        worst_energy = max(worst_energy, abs(sol.strain_energy - exact_energy) / exact_energy)
        rng = np.random.default_rng(105)
        for p in rng.uniform(0.05, 0.95, size=(20, 3)):
            worst_sig = max(worst_sig, abs(sol.stress(p)[2, 2] - sigma) / sigma)
    elapsed = time.perf_counter() - start
    ok = worst_sig < 1e-6 and worst_energy < 1e-8 and elapsed < 5.0
    report(
        5,
        "patch test",
        ok,
        f"sigma_zz dev {worst_sig:.2e}, energy dev {worst_energy:.2e}, {elapsed:.1f}s",
    )
    assert worst_sig < 1e-6
    assert worst_energy < 1e-8
    assert elapsed < 5.0


def embedded_sphere_system(degree, alpha_exponent=8.0):
    model = Cuboid([0, 0, 0], [1, 1, 1]).difference(Sphere([0.5, 0.5, 0.5], 0.3))
    grid = CellGrid(Aabb([0, 0, 0], [1, 1, 1]), (8, 8, 8))
    # Fixed gauss order 5 keeps the quadrature (and hence the discrete
    # energy form) identical across p, so the hierarchic spaces are nested
    # and the energies are exactly comparable.
    system = assemble(grid, model, Material(1.0, 0.3), degree, QuadratureConfig(3, 5, alpha_exponent))
    top = RectPatch(Frame.from_axis([0.5, 0.5, 1.0], [0, 0, 1]), (1.0, 1.0), 16)
    bottom = RectPatch(Frame.from_axis([0.5, 0.5, 0.0], [0, 0, 1]), (1.0, 1.0), 16)
    neumann_load(NeumannSpec(top, [0.0, 0.0, 1.0]), system)
    apply_penalty_dirichlet(DirichletSpec(bottom, (0.0, 0.0, 0.0), penalty=1e8), system)
    return system


def embed_coefficients(coarse_sol, fine_system):
    """Exact hierarchic embedding of a lower-degree solution vector."""
    coarse = coarse_sol.system
    fine_index = {
        fine_system.basis.mode_tuple(m): m for m in range(fine_system.basis.n_modes)
    }
    x0 = np.zeros(fine_system.n_dofs)
    for cell in coarse.dof_map.active:
        sc = coarse.dof_map.cell_scalar_modes(cell)
        sf = fine_system.dof_map.cell_scalar_modes(cell)
        for m in range(coarse.basis.n_modes):
            mf = fine_index[coarse.basis.mode_tuple(m)]
            for c in range(3):
                x0[3 * sf[mf] + c] = coarse_sol.coefficients[3 * sc[m] + c]
    return x0


_SOLVER_SETTINGS = {1: (1e-8, 4000), 2: (1e-5, 4000), 3: (3e-3, 4000), 4: (4e-3, 4000)}


@pytest.fixture(scope="module")
def p_convergence_energies():
    start = time.perf_counter()
    energies = {}
    prev = None
    for degree in (1, 2, 3, 4):
        system = embedded_sphere_system(degree)
        rtol, max_iter = _SOLVER_SETTINGS[degree]
        x0 = embed_coefficients(prev, system) if prev is not None else None
        sol = solve(system, rtol=rtol, max_iter=max_iter, x0=x0)
        energies[degree] = sol.strain_energy
        prev = sol
    return energies, time.perf_counter() - start


def test_06_p_convergence_on_embedded_sphere(p_convergence_energies):
    energies, elapsed = p_convergence_energies
    seq = [energies[p] for p in (1, 2, 3, 4)]
    monotone = all(seq[i + 1] >= seq[i] for i in range(3))
    change = abs(seq[3] - seq[2]) / abs(seq[2])
    ok = monotone and change < 0.01 and elapsed < 300.0
    report(
        6,
        "p-convergence",
        ok,
        "energies "
        + ", ".join(f"p{p}={energies[p]:.7f}" for p in (1, 2, 3, 4))
        + f", p3->p4 change {change:.3%}, {elapsed:.0f}s",
    )
    assert monotone
    assert change < 0.01
    assert elapsed < 300.0


def test_07_alpha_insensitivity(p_convergence_energies):
    energies, _ = p_convergence_energies
    system = embedded_sphere_system(3, alpha_exponent=5.0)
    rtol, max_iter = _SOLVER_SETTINGS[3]
    sol = solve(system, rtol=rtol, max_iter=max_iter)
    diff = abs(sol.strain_energy - energies[3]) / energies[3]
    ok = diff < 1e-3
    report(7, "alpha insensitivity", ok, f"q=5 vs q=8 energy differs by {diff:.2e}")
    assert diff < 1e-3


def test_08_active_cell_culling_on_example_scene():
    scene = parse_scene("scenes/example.json")
    stats = run_pipeline(scene, dry_run=True)
    ratio = stats["dofs"] / stats["full_grid_dofs"]
    ok = ratio <= 0.40
    report(
        8,
        "active-cell culling",
        ok,
        f"{stats['dofs']} of {stats['full_grid_dofs']} full-grid dofs ({ratio:.1%})",
    )
    assert ratio <= 0.40


def test_09_marching_cubes_sphere():
    mesh = marching_cubes(Sphere([0, 0, 0], 1.0), Aabb([-1.5] * 3, [1.5] * 3), 128)
    watertight = is_watertight(mesh)
    err = abs(mesh.area() - 4.0 * np.pi) / (4.0 * np.pi)
    ok = watertight and err < 0.03
    report(9, "marching cubes", ok, f"watertight={watertight}, area error {err:.3%}")
    assert watertight
    assert err < 0.03


def test_10_shape_function_gradients():
    rng = np.random.default_rng(110)
    worst = 0.0
    h = 1e-6
    for degree in (1, 2, 3, 4):
        basis = TensorBasis(degree)
        pts = rng.uniform(-0.95, 0.95, size=(100, 3))
        _, grads = basis.eval(pts)
        for axis in range(3):
            dp = pts.copy()
            dm = pts.copy()
            dp[:, axis] += h
            dm[:, axis] -= h
            fd = (basis.eval(dp)[0] - basis.eval(dm)[0]) / (2 * h)
            scale = np.maximum(np.abs(grads[:, :, axis]), 1.0)
            worst = max(worst, float(np.max(np.abs(grads[:, :, axis] - fd) / scale)))
    ok = worst < 1e-6
    report(10, "shape-function gradients", ok, f"max relative deviation {worst:.2e}")
    assert worst < 1e-6
