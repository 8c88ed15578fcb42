import numpy as np
import pytest
import scipy.sparse as sp

from wgdivcurl.assembly import assemble
from wgdivcurl.mesh import build_cube_hex_mesh, build_cube_tet_mesh
from wgdivcurl.solver import SolverError, solve, solve_linear
from wgdivcurl.space import WGSpace


def test_identity_system():
    M = sp.identity(5, format="csr")
    b = np.array([1.0, -2.0, 3.0, 0.5, 0.0])
    x, residual, method, _ = solve_linear(M, b)
    np.testing.assert_array_equal(x, b)
    assert residual <= 1e-15


def test_small_saddle_system():
    # [[2, 1], [1, 0]] x = [3, 1]  =>  x = (1, 1) by hand elimination
    M = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 0.0]]))
    b = np.array([3.0, 1.0])
    x, residual, _, _ = solve_linear(M, b)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-14)


def test_zero_rhs_contract():
    M = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 0.0]]))
    x, residual, _, _ = solve_linear(M, np.zeros(2))
    assert np.all(x == 0.0)


def test_singular_system_raises():
    M = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises((SolverError, RuntimeError)):
        solve_linear(M, np.array([1.0, 0.0]))


def test_homogeneous_wg_system_zero_solution():
    for mesh in (build_cube_tet_mesh(2),
                 build_cube_hex_mesh(3, cavity=((1, 1, 1), (2, 2, 2)))):
        space = WGSpace(mesh, 1)
        sol = solve(assemble(space))
        assert np.linalg.norm(sol.u.data) <= 1e-12
        assert np.linalg.norm(sol.p.data) <= 1e-12
        assert np.all(np.abs(sol.multipliers) <= 1e-12)


def test_deterministic_and_linear_in_rhs():
    mesh = build_cube_tet_mesh(1)
    space = WGSpace(mesh, 1)
    g = lambda pts: np.column_stack([np.sin(pts[:, 0]), pts[:, 1] ** 2,
                                     np.cos(pts[:, 2])])
    system = assemble(space, g=g)
    x1 = solve(system)
    x2 = solve(system)
    assert np.array_equal(x1.u.data, x2.u.data)
    assert np.array_equal(x1.p.data, x2.p.data)

    scaled = assemble(space, g=lambda pts: 3.0 * g(pts))
    x3 = solve(scaled)
    np.testing.assert_allclose(x3.u.data, 3.0 * x1.u.data,
                               rtol=1e-13, atol=1e-13 * np.abs(x1.u.data).max())


def test_minres_path_matches_direct():
    mesh = build_cube_tet_mesh(2)
    space = WGSpace(mesh, 1)
    g = lambda pts: np.column_stack([pts[:, 1], -pts[:, 0], pts[:, 2] ** 2])
    system = assemble(space, g=g)
    direct = solve(system, method="direct")
    krylov = solve(system, method="minres")
    assert krylov.residual <= 1e-10
    scale = np.abs(direct.u.data).max()
    assert np.abs(krylov.u.data - direct.u.data).max() <= 1e-8 * scale


def test_fixed_dofs_reinserted():
    space = WGSpace(build_cube_tet_mesh(1), 1)
    xi = lambda pts: np.column_stack([pts[:, 1], pts[:, 2], pts[:, 0]])
    system = assemble(space, xi=xi)
    sol = solve(system)
    f = space.mesh.boundary_faces()[0]
    quad = space.face_quad_data[f]
    vals = xi(quad.points)
    _, t1, t2 = space.face_basis[f].frame
    c1 = space.face_basis[f].project(vals @ t1, quad)
    np.testing.assert_allclose(sol.u.face(f)[1], c1, atol=1e-12)
