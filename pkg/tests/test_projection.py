"""Elliptic projection into the finite element space."""

import numpy as np
import pytest

from isaacsfem.assembly import galerkin_stiffness
from isaacsfem.errors import ProjectionError
from isaacsfem.mesh import generate_annulus_mesh, generate_triangle_mesh
from isaacsfem.problems import experiment1
from isaacsfem.projection import build_projection, piecewise_gradient, project


def affine(x, y):
    return 1.0 + 2.0 * x - y


def affine_grad(x, y):
    shape = np.broadcast(x, y).shape
    return np.broadcast_to(2.0, shape), np.broadcast_to(-1.0, shape)


def test_no_interior_nodes_degenerates_to_interpolation():
    m = generate_triangle_mesh(1)
    assert m.n_interior == 0
    op = build_projection(m)
    out = project(op, affine, affine_grad)
    np.testing.assert_allclose(
        out, affine(m.vertices[:, 0], m.vertices[:, 1]), atol=1e-14
    )


def test_interior_block_is_spd():
    m = generate_triangle_mesh(2)
    op = build_projection(m)
    ni = m.n_interior
    assert ni == 3
    block = op.stiffness[:ni, :ni].toarray()
    np.testing.assert_allclose(block, block.T, atol=1e-14)
    assert np.linalg.eigvalsh(block).min() > 0


def test_annulus_bookkeeping():
    m = generate_annulus_mesh(0.5, 2.0, 4, 20)
    op = build_projection(m)
    assert op.mesh.n_interior == m.n_interior
    assert op.stiffness.shape == (m.n_vertices, m.n_vertices)


@pytest.mark.parametrize(
    "mesh",
    [generate_triangle_mesh(3), generate_annulus_mesh(1.0, 2.0, 3, 16)],
    ids=["triangle", "annulus"],
)
def test_affine_functions_reproduce_exactly(mesh):
    op = build_projection(mesh)
    out = project(op, affine, affine_grad)
    np.testing.assert_allclose(
        out, affine(mesh.vertices[:, 0], mesh.vertices[:, 1]), atol=1e-10
    )


def test_projection_is_idempotent_on_members():
    m = generate_annulus_mesh(1.0, 2.0, 3, 16)
    op = build_projection(m)
    v = np.random.default_rng(2).standard_normal(m.n_vertices)
    np.testing.assert_allclose(project(op, v), v, atol=1e-10)


def test_boundary_override_is_taken_verbatim():
    m = generate_triangle_mesh(3)
    op = build_projection(m)
    gb = np.random.default_rng(4).standard_normal(m.n_vertices - m.n_interior)
    out = project(op, affine, affine_grad, boundary_values=gb)
    np.testing.assert_array_equal(out[m.n_interior :], gb)


def test_closure_without_gradient_rejected():
    op = build_projection(generate_triangle_mesh(2))
    with pytest.raises(ProjectionError):
        project(op, affine)


def test_wrong_length_boundary_data_rejected():
    m = generate_triangle_mesh(2)
    op = build_projection(m)
    with pytest.raises(ProjectionError):
        project(op, affine, affine_grad, boundary_values=np.zeros(5))


def test_galerkin_orthogonality_reassembled():
    p = experiment1()
    m = generate_triangle_mesh(3)
    op = build_projection(m)
    w = project(op, p.v_T, p.grad_v_T)

    # independent right side: same identity, assembled with a per-element loop
    rhs = np.zeros(m.n_vertices)
    mids = m.edge_midpoints()
    for k in range(m.n_triangles):
        gx, gy = p.grad_v_T(mids[k, :, 0], mids[k, :, 1])
        mean = np.array([np.mean(gx), np.mean(gy)])
        for loc in range(3):
            rhs[m.triangles[k, loc]] += (
                mean @ m.hat_gradients[k, loc] * m.element_areas[k]
            )
    gap = galerkin_stiffness(m) @ w - rhs
    assert np.abs(gap[: m.n_interior]).max() < 1e-10


def test_projection_is_linear():
    p = experiment1()
    m = generate_triangle_mesh(3)
    op = build_projection(m)
    w1 = project(op, affine, affine_grad)
    w2 = project(op, p.v_T, p.grad_v_T)

    def combo(x, y):
        return 0.7 * affine(x, y) - 1.3 * p.v_T(x, y)

    def combo_grad(x, y):
        ax, ay = affine_grad(x, y)
        bx, by = p.grad_v_T(x, y)
        return 0.7 * ax - 1.3 * bx, 0.7 * ay - 1.3 * by

    np.testing.assert_allclose(
        project(op, combo, combo_grad), 0.7 * w1 - 1.3 * w2, atol=1e-12
    )


def _interpolation_gap(mesh, values, fn):
    """Sup distance between the nodal vector and fn at nodes and centroids."""
    nodal = np.abs(values - fn(mesh.vertices[:, 0], mesh.vertices[:, 1])).max()
    at_c = values[mesh.triangles].mean(axis=1)
    cent = np.abs(at_c - fn(mesh.centroids[:, 0], mesh.centroids[:, 1])).max()
    return max(nodal, cent)


def test_terminal_data_projection_error_decays():
    p = experiment1()
    gaps = []
    for level in (2, 3, 4):
        m = generate_triangle_mesh(level)
        w = project(build_projection(m), p.v_T, p.grad_v_T)
        gaps.append(_interpolation_gap(m, w, p.v_T))
    assert gaps[0] > gaps[1] > gaps[2]


def _w1inf(mesh, values):
    grads = piecewise_gradient(mesh, values)
    return max(
        float(np.abs(values).max()), float(np.sqrt((grads**2).sum(-1)).max())
    )


def test_projection_stability_constant_stays_flat():
    p = experiment1()
    consts = []
    for level in (2, 3, 4):
        m = generate_triangle_mesh(level)
        w = project(build_projection(m), p.v_T, p.grad_v_T)
        xs = np.concatenate([m.vertices[:, 0], m.centroids[:, 0]])
        ys = np.concatenate([m.vertices[:, 1], m.centroids[:, 1]])
        gx, gy = p.grad_v_T(xs, ys)
        w_norm = max(
            float(np.abs(p.v_T(xs, ys)).max()),
            float(np.sqrt(gx**2 + gy**2).max()),
        )
        consts.append(_w1inf(m, w) / w_norm)
    assert consts[1] <= 1.1 * consts[0]
    assert consts[2] <= 1.1 * consts[1]


def test_piecewise_gradient_of_affine_nodal_data():
    m = generate_annulus_mesh(1.0, 2.0, 3, 12)
    v = affine(m.vertices[:, 0], m.vertices[:, 1])
    grads = piecewise_gradient(m, v)
    np.testing.assert_allclose(grads[:, 0], 2.0, atol=1e-13)
    np.testing.assert_allclose(grads[:, 1], -1.0, atol=1e-13)
