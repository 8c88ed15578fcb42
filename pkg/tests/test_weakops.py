import numpy as np
import pytest

from wgdivcurl import weakops
from wgdivcurl.mesh import build_cube_hex_mesh, build_cube_tet_mesh
from wgdivcurl.polybasis import cell_quadrature, face_quadrature, n_monomials
from wgdivcurl.space import WeakFunction, WGSpace
from wgdivcurl.verification import TriPoly, _poly_curl, _vec


def _random_spd(rng):
    R = rng.standard_normal((3, 3))
    return R @ R.T + 0.5 * np.eye(3)


def _poly_div_mu(u, mu):
    """Analytic div(mu u) for polynomial components u and constant mu."""
    out = TriPoly()
    for c in range(3):
        for b in range(3):
            d = u[b].diff(c)
            for e, co in d.terms.items():
                out.terms[e] = out.terms.get(e, 0.0) + mu[c, b] * co
    return out


def test_weak_divergence_of_position_field():
    space = WGSpace(build_cube_hex_mesh(1), 1)
    v = space.project_field(lambda pts: np.asarray(pts, dtype=float))
    d = weakops.weak_divergence(space.cell_ops[0], v.local(0))
    np.testing.assert_allclose(d, [3.0], atol=1e-12)
    c = weakops.weak_curl(space.cell_ops[0], v.local(0))
    assert np.abs(c).max() <= 1e-12


def test_weak_divergence_normal_face_data():
    # v_0 = 0, v_b = n on every face of the unit cube: (w, 1) = |dT| = 6
    space = WGSpace(build_cube_hex_mesh(1), 1)
    v = WeakFunction.zeros(space)
    for f in range(6):
        v.face(f)[0, 0] = 1.0
    d = weakops.weak_divergence(space.cell_ops[0], v.local(0))
    np.testing.assert_allclose(d, [6.0], atol=1e-12)


def test_weak_operators_vanish_on_constants():
    rng = np.random.default_rng(5)
    mu = _random_spd(rng)
    space = WGSpace(build_cube_tet_mesh(1), 1, mu=mu)
    c0 = np.array([0.3, -1.2, 0.7])
    v = space.project_field(lambda pts: np.tile(c0, (len(pts), 1)))
    for c in range(space.mesh.n_cells):
        ops = space.cell_ops[c]
        assert np.abs(weakops.weak_divergence(ops, v.local(c))).max() <= 1e-12
        assert np.abs(weakops.weak_curl(ops, v.local(c))).max() <= 1e-12


def test_weak_curl_single_tangential_face():
    # v_0 = 0, v_b = t1 on one face of the unit cube; oracle: assemble the
    # moment system by brute-force quadrature and dense-solve it
    space = WGSpace(build_cube_hex_mesh(1), 1)
    mesh = space.mesh
    f = 2
    v = WeakFunction.zeros(space)
    v.face(f)[1, 0] = 1.0  # constant along t1
    got = weakops.weak_curl(space.cell_ops[0], v.local(0))

    n, t1, t2 = space.face_basis[f].frame
    sign = 1  # single cell owns all faces
    for deg in (2, 4):
        quad = face_quadrature(mesh, f, deg)
        vol = mesh.cell_volumes[0]
        rhs = np.zeros(3)
        vxn = np.cross(t1, n)
        for a in range(3):
            rhs[a] = -sign * quad.weights.sum() * vxn[a]
        expect = rhs / vol  # P0 test space: coefficients are moments / |T|
        np.testing.assert_allclose(got[:, 0], expect, atol=1e-13)
    # hand value: t1 x n = -t2, so the curl is +t2
    np.testing.assert_allclose(got[:, 0], t2, atol=1e-13)


@pytest.mark.parametrize("k", [1, 2])
def test_moment_equations_hold(k):
    # rows of the operators satisfy their defining moment equations against
    # an independent quadrature evaluation
    rng = np.random.default_rng(11)
    mu = _random_spd(rng)
    mesh = build_cube_tet_mesh(1)
    space = WGSpace(mesh, k, mu=mu)
    c = 3
    ops = space.cell_ops[c]
    v = WeakFunction.random(space, rng)
    loc = v.local(c)
    d = ops.div_op @ loc
    w = ops.curl_op @ loc

    npb = n_monomials(3, k - 1)
    basis = space.cell_basis[c]
    quad = cell_quadrature(mesh, c, 2 * k + 2)
    V = basis.eval(quad.points)
    G = basis.grad(quad.points)[:, :npb]

    # interior field values
    v0 = V @ v.interior(c).T                      # (nq, 3)
    lhs_div = (V[:, :npb] * quad.weights[:, None]).T @ (V[:, :npb] @ d)
    rhs_div = -np.einsum("q,qc,qic->i", quad.weights, v0 @ mu, G)
    lhs_curl = np.einsum("q,qi,qa->ai", quad.weights, V[:, :npb],
                         V[:, :npb] @ w.T)
    rhs_curl = np.zeros((3, npb))
    eye = np.eye(3)
    for a in range(3):
        cr = np.cross(G, eye[a])
        rhs_curl[a] = np.einsum("q,qc,qic->i", quad.weights, v0, cr)

    for f, s in zip(mesh.cell_faces[c], mesh.cell_signs[c]):
        fq = face_quadrature(mesh, f, 2 * k + 2)
        n, t1, t2 = space.face_basis[f].frame
        F = space.face_basis[f].eval(fq.points)
        vb = F @ v.face(f).T                      # (nq, 3) frame components
        vb_vec = vb[:, 0:1] * n + vb[:, 1:2] * t1 + vb[:, 2:3] * t2
        phi = basis.eval(fq.points)[:, :npb]
        rhs_div += (phi * fq.weights[:, None]).T @ (s * vb[:, 0])
        vxn = np.cross(vb_vec, s * n)
        for a in range(3):
            rhs_curl[a] -= (phi * fq.weights[:, None]).T @ vxn[:, a]

    scale = max(1.0, np.abs(rhs_div).max())
    assert np.abs(lhs_div - rhs_div).max() <= 1e-12 * scale
    scale = max(1.0, np.abs(rhs_curl).max())
    assert np.abs(lhs_curl - rhs_curl).max() <= 1e-12 * scale


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("builder", [build_cube_tet_mesh, build_cube_hex_mesh])
def test_commutativity(builder, k):
    # weak operators applied to the projected field reproduce the projected
    # strong derivatives for polynomial fields of degree k+1
    rng = np.random.default_rng(100 * k)
    mesh = builder(1 if builder is build_cube_tet_mesh else 2)
    for trial in range(5):
        mu = _random_spd(rng)
        space = WGSpace(mesh, k, mu=mu)
        u = [TriPoly.random(k + 1, rng) for _ in range(3)]
        w = _poly_curl(u)
        dmu = _poly_div_mu(u, mu)
        proj = space.project_field(_vec(u))
        for c in range(mesh.n_cells):
            ops = space.cell_ops[c]
            quad = space.cell_quad_data[c]
            d = weakops.weak_divergence(ops, proj.local(c))
            d_ref = space.cell_basis[c].project(dmu(quad.points), quad,
                                                degree=k - 1)
            cc = weakops.weak_curl(ops, proj.local(c))
            c_ref = space.project_cell_vector(_vec(w), c)
            tol = 1e-11 * max(1.0, np.abs(d_ref).max())
            assert np.abs(d - d_ref).max() <= tol
            tol = 1e-11 * max(1.0, np.abs(c_ref).max())
            assert np.abs(cc - c_ref).max() <= tol


def test_linearity_and_locality():
    rng = np.random.default_rng(8)
    space = WGSpace(build_cube_tet_mesh(1), 1)
    ops = space.cell_ops[0]
    a = WeakFunction.random(space, rng)
    b = WeakFunction.random(space, rng)
    lhs = weakops.weak_divergence(ops, (a + 2.0 * b).local(0))
    rhs = (weakops.weak_divergence(ops, a.local(0))
           + 2.0 * weakops.weak_divergence(ops, b.local(0)))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-13, atol=1e-13)

    # changing a face not adjacent to cell 0 leaves its operators unchanged
    other_faces = set(range(space.mesh.n_faces)) - set(space.mesh.cell_faces[0])
    f_far = sorted(other_faces)[0]
    before_d = weakops.weak_divergence(ops, a.local(0))
    before_c = weakops.weak_curl(ops, a.local(0))
    a.face(f_far)[:] += 5.0
    assert np.array_equal(weakops.weak_divergence(ops, a.local(0)), before_d)
    assert np.array_equal(weakops.weak_curl(ops, a.local(0)), before_c)
