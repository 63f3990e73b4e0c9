import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aniso_torsion import (
    DegenerateInput,
    anisotropic_inradius,
    check_max_principle,
    curvature_identity_check,
    evaluate,
    gauge_lower_bound,
    make_square,
    max_torsion_bounds,
    p_function_field,
    parse_norm,
    phi_psi,
    random_convex_body,
    saint_venant_check,
    solve_torsion,
    triangulate,
    wulff_shape,
)
from aniso_torsion.estimates import phi_bounds, psi_bounds, summarise, write_reports_csv
from aniso_torsion.experiments import rectangle_mesh

BUILTIN = ["euclidean", "quad:q11=1,q12=0,q22=4", "lr:r=4,w=1,1", "rot:angle=0.6,base=quad:q11=1,q12=0,q22=3"]


@pytest.fixture(scope="module")
def thin_rect():
    body, mesh = rectangle_mesh(0.01, 1.0, 1 / 32)
    return body, solve_torsion(mesh, parse_norm("euclidean"), 2.0)


def test_constants_for_p2():
    assert phi_bounds(2.0) == pytest.approx((0.25, 2 / 3))
    assert psi_bounds(2.0) == pytest.approx((1 / 8, 1 / 3))
    assert psi_bounds(3.0)[1] == pytest.approx(0.4)


def test_disk_p_function(disk_solution):
    field = p_function_field(disk_solution)
    assert -1e-3 <= field.max_value <= 1e-3
    assert abs(field.nodal[disk_solution.argmax]) <= 1e-3
    assert check_max_principle(field, 1e-2).ok


def test_disk_p_function_closed_form(disk, euclid):
    # pointwise P1 gradients are first order, so the 1e-3 match needs a fine mesh
    sol = solve_torsion(triangulate(disk, 0.0075), euclid, 2.0)
    field = p_function_field(sol)
    r2 = (sol.mesh.nodes**2).sum(axis=1)
    assert np.max(np.abs(field.nodal + r2 / 8)) <= 1e-3
    rc2 = (sol.mesh.centroids**2).sum(axis=1)
    assert np.max(np.abs(field.triangle_values + rc2 / 8)) <= 1e-3


def test_square_max_principle(square_solution):
    assert check_max_principle(p_function_field(square_solution), 1e-2).ok


def test_p15_wulff_quadratic_max_principle(quad):
    body = wulff_shape(quad, 1.0, n_vertices=720)
    sol = solve_torsion(triangulate(body, 0.05), quad, 1.5)
    assert check_max_principle(p_function_field(sol), 2e-2).ok


def test_square_max_bounds(square_solution, unit_square, euclid):
    R_F, _ = anisotropic_inradius(unit_square, euclid)
    lo, hi = max_torsion_bounds(square_solution, R_F)
    assert lo.ok and hi.ok
    assert 0.03125 <= square_solution.M <= 0.125


def test_wulff_max_lower_bound_is_attained(disk_solution, disk, euclid):
    R_F, _ = anisotropic_inradius(disk, euclid)
    lo, _ = max_torsion_bounds(disk_solution, R_F)
    assert lo.ok
    assert disk_solution.M == pytest.approx(lo.bound, rel=1e-2)


def test_thin_rectangle_saturates_max_upper_bound(thin_rect):
    body, sol = thin_rect
    R_F, _ = anisotropic_inradius(body, sol.norm)
    assert R_F == pytest.approx(0.01)
    assert sol.M / (R_F**2 / 2) >= 0.95
    assert all(c.ok for c in max_torsion_bounds(sol, R_F))


def test_thin_rectangle_psi(thin_rect):
    body, sol = thin_rect
    rep = phi_psi(sol, body, 0.01)
    assert rep.Psi >= 0.31
    assert rep.ok


@pytest.mark.parametrize("spec", BUILTIN)
def test_wulff_equality_cases(spec):
    norm = parse_norm(spec)
    body = wulff_shape(norm, 1.0, n_vertices=720)
    sol = solve_torsion(triangulate(body, 0.05), norm, 2.0)
    R_F, _ = anisotropic_inradius(body, norm)
    rep = phi_psi(sol, body, R_F)
    assert rep.ok
    assert rep.Psi == pytest.approx(1 / 8, rel=1e-2)
    assert rep.Phi == pytest.approx(1 / 2, rel=1e-2)
    g = gauge_lower_bound(body, norm, 2.0, sol.mesh)
    assert g <= sol.T
    assert g == pytest.approx(sol.T, rel=1e-2)
    checks, extra = saint_venant_check(sol, norm, body)
    assert all(c.ok for c in checks)
    assert abs(extra["sv_gap"]) <= 1e-2 * extra["T_wulff"]


def test_gauge_bound_on_square(square_solution, unit_square, euclid):
    g = gauge_lower_bound(unit_square, euclid, 2.0, square_solution.mesh)
    R_F = 0.5
    assert 0 < g <= square_solution.T
    assert g >= unit_square.area * R_F**2 / 8 * (1 - 2e-2)


def test_gauge_bound_homogeneity(euclid):
    body = random_convex_body(3)
    mesh = triangulate(body, 0.1)
    for p in (1.5, 2.0, 3.0):
        q = p / (p - 1)
        a = gauge_lower_bound(body, euclid, p, mesh)
        b = gauge_lower_bound(body.scaled(2.0), euclid, p, mesh.scaled(2.0))
        assert b == pytest.approx(2 ** (2 + q) * a, rel=1e-2)


def test_saint_venant_square(square_solution, unit_square, euclid):
    checks, extra = saint_venant_check(square_solution, euclid, unit_square)
    assert all(c.ok for c in checks)
    assert extra["sv_gap"] > 0
    assert extra["T_wulff"] == pytest.approx(1 / (8 * math.pi), rel=1e-4)


def test_stability_along_thinning_rectangles(euclid):
    gaps = []
    for eps in (0.2, 0.1, 0.05):
        body, mesh = rectangle_mesh(eps, 1.0, 1 / 16)
        sol = solve_torsion(mesh, euclid, 2.0)
        checks, extra = saint_venant_check(sol, euclid, body)
        assert all(c.ok for c in checks)
        # relative gap grows as the rectangle thins
        gaps.append(extra["sv_gap"] / extra["T_wulff"])
    assert gaps[0] < gaps[1] < gaps[2]


def test_curvature_identity_examples(euclid, quad):
    assert curvature_identity_check(euclid, 1.0, 2.0, r=0.5) <= 1e-8
    assert curvature_identity_check(quad, 1.0, 3.0, r=0.3) <= 1e-6
    with pytest.raises(DegenerateInput):
        curvature_identity_check(euclid, 1.0, 2.0, r=0.0)


@pytest.mark.parametrize("spec", BUILTIN)
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_curvature_identity_all_norms(spec, p):
    for r in (0.1, 0.5, 0.9):
        assert curvature_identity_check(parse_norm(spec), 1.0, p, r=r) <= 1e-6


def test_scale_invariance_of_functionals():
    norm = parse_norm("quad:q11=1,q12=0,q22=4")
    body = random_convex_body(11)
    mesh = triangulate(body, 0.08)
    for p in (1.5, 3.0):
        a = evaluate(solve_torsion(mesh, norm, p), body)
        big = body.scaled(2.0)
        b = evaluate(solve_torsion(triangulate(big, 0.16), norm, p), big)
        assert b.Phi == pytest.approx(a.Phi, rel=1e-2)
        assert b.Psi == pytest.approx(a.Psi, rel=1e-2)


def test_report_serialisation(tmp_path, square_solution, unit_square):
    rep = evaluate(square_solution, unit_square)
    assert rep.ok, rep.failed()
    rec = rep.record()
    assert rec["ok"] is True
    path = write_reports_csv([rec, rec], tmp_path / "r.csv", comment="test")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# aniso_torsion table v1")
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 2 and float(rows[0]["Phi"]) == rep.Phi
    summary = summarise([rep])
    assert summary["ok"] and summary["rows"] == 1
    assert set(summary["min_margins"]) == set(rep.checks)


@settings(max_examples=6, deadline=None)
@given(
    st.integers(0, 1000).map(random_convex_body).filter(lambda b: b.area > 0.5),
    st.sampled_from(BUILTIN),
    st.sampled_from([1.5, 2.0, 3.0]),
)
def test_all_estimates_hold_on_random_bodies(body, spec, p):
    norm = parse_norm(spec)
    R_F, _ = anisotropic_inradius(body, norm)
    sol = solve_torsion(triangulate(body, 0.05 * R_F), norm, p)
    rep = evaluate(sol, body, R_F)
    assert rep.ok, rep.failed()
