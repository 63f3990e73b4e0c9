import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aniso_torsion import (
    BadParameter,
    DegenerateInput,
    EuclideanNorm,
    NoConvergence,
    OutsideBody,
    SolverOptions,
    UnsupportedDimension,
    WeightedLrNorm,
    exact_wulff_rigidity,
    exact_wulff_solution,
    make_rectangle,
    make_square,
    parse_norm,
    random_convex_body,
    rayleigh_lower_bound,
    refine,
    residual_check,
    rotate_norm,
    rotation_matrix,
    save_solution,
    solve_torsion,
    triangulate,
    wulff_shape,
)
from aniso_torsion.torsion import exact_wulff_max, with_field
from oracles import fd_square_torsion

NORMS = ["euclidean", "quad:q11=1,q12=0,q22=4", "lr:r=4,w=1,1", "rot:angle=0.6,base=quad:q11=1,q12=0,q22=3"]


def test_exact_solution_examples(euclid):
    assert exact_wulff_solution(euclid, 1.0, 2.0, (0.0, 0.0)) == pytest.approx(0.25)
    assert exact_wulff_solution(euclid, 1.0, 2.0, (0.0, 1.0)) == pytest.approx(0.0, abs=1e-15)
    assert exact_wulff_solution(euclid, 1.0, 2.0, (0.3, 0.4)) == pytest.approx(0.1875)
    assert exact_wulff_solution(euclid, 1.0, 2.0, (2.3, 0.4), x0=(2.0, 0.0)) == pytest.approx(0.1875)
    with pytest.raises(OutsideBody):
        exact_wulff_solution(euclid, 1.0, 2.0, (1.0, 0.1))
    assert exact_wulff_max(euclid, 1.0, 2.0) == pytest.approx(0.25)


def test_exact_rigidity_examples(euclid, quad):
    assert exact_wulff_rigidity(euclid, 1.0, 2.0, math.pi) == pytest.approx(math.pi / 8)
    assert exact_wulff_rigidity(quad, 1.0, 2.0, 2 * math.pi) == pytest.approx(math.pi / 4)
    for bad in [(0.0, 2.0, 1.0), (1.0, 1.0, 1.0), (1.0, 2.0, -1.0)]:
        with pytest.raises(BadParameter):
            exact_wulff_rigidity(euclid, *bad)


def test_disk_example(disk_solution):
    assert disk_solution.T == pytest.approx(math.pi / 8, rel=1e-2)
    assert disk_solution.M == pytest.approx(0.25, rel=1e-2)
    assert np.linalg.norm(disk_solution.x_max) < 0.05
    assert residual_check(disk_solution) <= 1e-6


@pytest.mark.parametrize("spec", NORMS)
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_wulff_oracle(spec, p):
    norm = parse_norm(spec)
    body = wulff_shape(norm, 1.0, n_vertices=720)
    sol = solve_torsion(triangulate(body, 0.05), norm, p)
    exact = exact_wulff_rigidity(norm, 1.0, p, body.area)
    assert sol.T == pytest.approx(exact, rel=2e-3)
    assert sol.T <= exact
    assert sol.M == pytest.approx(exact_wulff_max(norm, 1.0, p), rel=5e-3)
    assert sol.T_from_u == pytest.approx(sol.T_from_grad, rel=1e-6)
    # nodal error against the closed form
    u_exact = exact_wulff_solution(norm, 1.0, p, sol.mesh.nodes)
    assert np.max(np.abs(sol.u - u_exact)) <= 1e-2 * u_exact.max()


def test_quadratic_wulff_p3_example(quad):
    body = wulff_shape(quad, 1.0, n_vertices=720)
    sol = solve_torsion(triangulate(body, 0.05), quad, 3.0)
    assert sol.T == pytest.approx(exact_wulff_rigidity(quad, 1.0, 3.0, body.area), rel=2e-2)


def test_square_against_finite_differences(unit_square):
    T_fd, M_fd = fd_square_torsion(1023)
    mesh = triangulate(unit_square, 0.04)
    coarse = solve_torsion(mesh, EuclideanNorm(), 2.0).T
    fine = solve_torsion(refine(mesh), EuclideanNorm(), 2.0).T
    extrapolated = (4.0 * fine - coarse) / 3.0
    assert coarse < fine < T_fd * (1 + 1e-4)
    assert extrapolated == pytest.approx(T_fd, rel=1e-2)
    assert abs(extrapolated - T_fd) < abs(fine - T_fd)


def test_square_max(square_solution):
    _, M_fd = fd_square_torsion(1023)
    assert square_solution.M == pytest.approx(M_fd, rel=5e-3)
    assert square_solution.M == pytest.approx(0.0737, abs=5e-4)


def test_residual_detects_non_solutions(disk_solution):
    assert residual_check(with_field(disk_solution, 1.1 * disk_solution.u)) > 1e-3
    assert residual_check(with_field(disk_solution, np.zeros_like(disk_solution.u))) == pytest.approx(1.0)


def test_rayleigh_examples(disk_solution, disk, euclid):
    mesh = disk_solution.mesh
    u = disk_solution.u
    assert rayleigh_lower_bound(mesh, euclid, 2.0, u) == pytest.approx(disk_solution.T_from_u, rel=1e-7)
    assert rayleigh_lower_bound(mesh, euclid, 2.0, 7.0 * u) == pytest.approx(disk_solution.T, rel=1e-12)
    exact = exact_wulff_solution(euclid, 1.0, 2.0, mesh.nodes)
    assert rayleigh_lower_bound(mesh, euclid, 2.0, exact) == pytest.approx(math.pi / 8, rel=1e-2)
    with pytest.raises(DegenerateInput):
        rayleigh_lower_bound(mesh, euclid, 2.0, np.zeros(mesh.n_nodes))
    with pytest.raises(BadParameter):
        rayleigh_lower_bound(mesh, euclid, 2.0, np.ones(mesh.n_nodes))


def test_solver_errors(disk_solution):
    mesh = disk_solution.mesh
    for p in (1.0, 0.5, math.inf, math.nan):
        with pytest.raises(BadParameter):
            solve_torsion(mesh, EuclideanNorm(), p)
    with pytest.raises(UnsupportedDimension):
        solve_torsion(mesh, WeightedLrNorm(3.0, (1.0, 1.0, 1.0)), 2.0)
    with pytest.raises(NoConvergence) as info:
        solve_torsion(mesh, parse_norm("lr:r=4"), 3.0, SolverOptions(max_iters=2))
    assert "history" in info.value.diagnostics


def test_delta_halving_is_invisible():
    norm = parse_norm("quad:q11=1,q12=0,q22=4")
    mesh = triangulate(make_square(1.0), 0.1)
    for p in (1.5, 3.0):
        base = solve_torsion(mesh, norm, p)
        half = solve_torsion(mesh, norm, p, SolverOptions(delta=0.5 * base.diagnostics["delta"]))
        assert half.T == pytest.approx(base.T, rel=1e-3)


def test_refinement_increases_rigidity():
    norm = parse_norm("rot:angle=0.6,base=quad:q11=1,q12=0,q22=3")
    mesh = triangulate(random_convex_body(7), 0.15)
    ts = []
    for _ in range(3):
        ts.append(solve_torsion(mesh, norm, 3.0).T)
        mesh = refine(mesh)
    assert ts[0] < ts[1] < ts[2]


def test_domain_monotonicity(euclid):
    small = solve_torsion(triangulate(make_square(0.5), 0.05), euclid, 2.0)
    big = solve_torsion(triangulate(make_rectangle(0.6, 0.5), 0.05), euclid, 2.0)
    assert small.T < big.T
    assert small.M < big.M


def test_save_solution(tmp_path, disk_solution):
    stem = save_solution(disk_solution, tmp_path / "out" / "disk")
    table = np.loadtxt(stem.with_suffix(".txt"))
    assert table.shape == (disk_solution.mesh.n_nodes, 3)
    assert stem.with_suffix(".json").read_text().count('"T"') == 1


small_bodies = st.integers(0, 500).map(random_convex_body).filter(lambda b: b.area > 0.4)


@settings(max_examples=8, deadline=None)
@given(small_bodies, st.sampled_from(NORMS), st.sampled_from([1.5, 2.0, 3.0]), st.floats(0.3, 4.0))
def test_scaling_law(body, spec, p, t):
    norm = parse_norm(spec)
    mesh = triangulate(body, 0.15)
    q = p / (p - 1.0)
    a = solve_torsion(mesh, norm, p)
    b = solve_torsion(mesh.scaled(t), norm, p)
    assert b.T == pytest.approx(t ** (2 + q) * a.T, rel=1e-6)
    assert b.M == pytest.approx(t**q * a.M, rel=1e-6)


@settings(max_examples=8, deadline=None)
@given(small_bodies, st.sampled_from(NORMS), st.sampled_from([1.5, 2.0, 3.0]), st.floats(-3.0, 3.0))
def test_rotation_invariance(body, spec, p, angle):
    # T(AΩ) for the norm ξ ↦ F(Aᵀξ) equals T(Ω) for F
    norm = parse_norm(spec)
    A = rotation_matrix(angle)
    mesh = triangulate(body, 0.15)
    a = solve_torsion(mesh, norm, p)
    b = solve_torsion(mesh.transformed(A), rotate_norm(norm, A.T), p)
    assert b.T == pytest.approx(a.T, rel=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 0.3))
def test_discrete_solution_maximises_rayleigh(disk_solution, seed, size):
    mesh = disk_solution.mesh
    rng = np.random.default_rng(seed)
    bump = rng.normal(size=mesh.n_nodes) * size * disk_solution.M
    bump[mesh.boundary_mask] = 0.0
    psi = disk_solution.u + bump
    assert rayleigh_lower_bound(mesh, EuclideanNorm(), 2.0, psi) <= disk_solution.T * (1 + 1e-9)
