import math

import numpy as np
import pytest

from wgdivcurl.mesh import MeshError, build_cube_hex_mesh, build_cube_tet_mesh
from wgdivcurl.polybasis import (CellBasis, FaceBasis, cell_quadrature,
                                 face_quadrature, l2_project_cell,
                                 l2_project_face, monomial_powers, n_monomials,
                                 simplex_rule)


def _exact_simplex_moment(powers, dim):
    # int over the unit simplex of prod x_i^{p_i} = prod p_i! / (dim + sum p)!
    return (math.prod(math.factorial(int(a)) for a in powers)
            / math.factorial(int(sum(powers)) + dim))


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4, 5, 7])
def test_simplex_rules_positive_and_exact(dim, degree):
    rule = simplex_rule(dim, degree)
    assert np.all(rule.weights > 0)
    for p in monomial_powers(dim, degree):
        exact = _exact_simplex_moment(p, dim)
        got = rule.weights @ np.prod(rule.points ** p, axis=1)
        assert got == pytest.approx(exact, rel=1e-13)


def test_unit_tet_volume():
    mesh = build_cube_tet_mesh(1)
    # all six Kuhn tets have volume 1/6
    for c in range(6):
        rule = cell_quadrature(mesh, c, 1)
        assert rule.weights.sum() == pytest.approx(1 / 6, rel=1e-14)


def test_unit_cube_cell_moments():
    mesh = build_cube_hex_mesh(1)
    rule = cell_quadrature(mesh, 0, 2)
    assert rule.weights @ rule.points[:, 0] == pytest.approx(0.5, rel=1e-13)
    assert rule.weights @ rule.points[:, 0] ** 2 == pytest.approx(1 / 3, rel=1e-13)
    rule4 = cell_quadrature(mesh, 0, 4)
    val = rule4.weights @ (rule4.points[:, 0] ** 2 * rule4.points[:, 1] ** 2)
    assert val == pytest.approx(1 / 9, rel=1e-13)


def test_cell_quadrature_rejects_nonstar():
    mesh = build_cube_tet_mesh(1)
    # nudging one centroid far outside makes a fan tetrahedron invert
    mesh.cell_centroids[0] = np.array([10.0, 10.0, 10.0])
    with pytest.raises(MeshError, match="cell 0"):
        cell_quadrature(mesh, 0, 2)


def test_face_quadrature_area():
    mesh = build_cube_hex_mesh(1)
    for f in range(mesh.n_faces):
        rule = face_quadrature(mesh, f, 3)
        assert rule.weights.sum() == pytest.approx(1.0, rel=1e-14)
        assert np.all(rule.weights > 0)


@pytest.mark.parametrize("k", [1, 2])
def test_cell_projection_reproduces_polynomials(k):
    mesh = build_cube_hex_mesh(1)
    quad = cell_quadrature(mesh, 0, 2 * k + 3)
    basis = CellBasis(k, mesh.cell_centroids[0], mesh.cell_diameters[0],
                      cell_quadrature(mesh, 0, 2 * k))
    f = lambda pts: pts[:, 0]  # linear field
    coeff = l2_project_cell(f, k, basis, quad)
    resid = basis.eval(quad.points)[:, :n_monomials(3, k)] @ coeff - f(quad.points)
    assert np.abs(resid).max() <= 1e-13


def test_cell_projection_constant_mean():
    # projecting x^2 onto constants gives its mean 1/3 on the unit cube
    mesh = build_cube_hex_mesh(1)
    quad = cell_quadrature(mesh, 0, 5)
    basis = CellBasis(1, mesh.cell_centroids[0], mesh.cell_diameters[0],
                      cell_quadrature(mesh, 0, 2))
    coeff = l2_project_cell(lambda pts: pts[:, 0] ** 2, 0, basis, quad)
    assert coeff[0] == pytest.approx(1 / 3, rel=1e-13)


def test_projection_idempotent_and_orthogonal():
    mesh = build_cube_tet_mesh(1)
    k = 2
    quad = cell_quadrature(mesh, 0, 2 * k + 3)
    basis = CellBasis(k, mesh.cell_centroids[0], mesh.cell_diameters[0],
                      cell_quadrature(mesh, 0, 2 * k))
    f = lambda pts: np.sin(np.pi * pts[:, 0]) * pts[:, 1]
    c1 = basis.project(f(quad.points), quad)
    proj_vals = basis.eval(quad.points) @ c1
    c2 = basis.project(proj_vals, quad)
    assert np.abs(c1 - c2).max() <= 1e-13 * max(1.0, np.abs(c1).max())
    # orthogonality of the residual to the basis
    resid = f(quad.points) - proj_vals
    V = basis.eval(quad.points)
    moments = (V * quad.weights[:, None]).T @ resid
    assert np.abs(moments).max() <= 1e-12 * max(1.0, np.abs(f(quad.points)).max())


def test_cell_mass_spd_and_conditioning_reported():
    mesh = build_cube_tet_mesh(2)
    for c in [0, 5]:
        basis = CellBasis(2, mesh.cell_centroids[c], mesh.cell_diameters[c],
                          cell_quadrature(mesh, c, 4))
        w = np.linalg.eigvalsh(basis.mass)
        assert w.min() > 0
        assert np.isfinite(basis.mass_cond)


def test_face_projection_values():
    mesh = build_cube_hex_mesh(1)
    f = 0
    quad = face_quadrature(mesh, f, 7)
    basis = FaceBasis(1, mesh.face_centroids[f], mesh.face_normals[f],
                      mesh.face_diameters[f], face_quadrature(mesh, f, 2))

    const = l2_project_face(lambda pts: np.full(len(pts), 4.2), basis, quad)
    vals = basis.eval(quad.points) @ const
    assert np.abs(vals - 4.2).max() <= 1e-13

    # linear-in-face-coordinates field is reproduced exactly at k = 1
    t1 = basis.frame[1]
    lin = lambda pts: (pts - mesh.face_centroids[f]) @ t1
    coeff = l2_project_face(lin, basis, quad)
    resid = basis.eval(quad.points) @ coeff - lin(quad.points)
    assert np.abs(resid).max() <= 1e-13

    # xi^2 on the unit square face projected onto constants: mean = 1/12
    basis0 = FaceBasis(0, mesh.face_centroids[f], mesh.face_normals[f],
                       mesh.face_diameters[f], face_quadrature(mesh, f, 0))
    sq = lambda pts: ((pts - mesh.face_centroids[f]) @ t1) ** 2
    coeff0 = l2_project_face(sq, basis0, quad)
    assert coeff0[0] == pytest.approx(1 / 12, rel=1e-13)


def test_face_frame_blocks_orthogonal():
    mesh = build_cube_tet_mesh(1)
    for f in range(mesh.n_faces):
        n, t1, t2 = mesh.face_frame(f)
        G = np.array([n, t1, t2])
        np.testing.assert_allclose(G @ G.T, np.eye(3), atol=1e-14)


def test_projection_rates_interior():
    # L2 projection error of a sine field decays at order k+1
    from wgdivcurl.space import WGSpace
    from wgdivcurl.analysis import convergence_rate, norm_interior_l2

    u = lambda pts: np.column_stack([np.sin(np.pi * pts[:, 0]),
                                     np.sin(np.pi * pts[:, 1]),
                                     np.sin(np.pi * pts[:, 2])])
    pairs = []
    for n in (1, 2, 4):
        mesh = build_cube_tet_mesh(n)
        space = WGSpace(mesh, 1)
        proj = space.project_field(u)
        err = 0.0
        for c in range(mesh.n_cells):
            quad = space.cell_quad_data[c]
            vals = space.cell_basis[c].eval(quad.points) @ proj.interior(c).T
            err += quad.weights @ ((vals - u(quad.points)) ** 2).sum(axis=1)
        pairs.append((mesh.h, np.sqrt(err)))
    rate = convergence_rate(pairs)
    assert 1.8 <= rate <= 2.2
