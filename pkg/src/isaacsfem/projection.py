"""Projection onto the finite element space.

Interior coefficients solve the Galerkin identity
<grad(P w), grad phi_l> = <grad w, grad phi_l> for every interior hat;
boundary coefficients are plain nodal interpolation (optionally of separate
boundary data, which is how time slices of the boundary condition enter the
scheme).  The right-hand side integrals use the three-edge-midpoint rule,
which is exact for quadratic integrands.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import galerkin_stiffness
from .errors import ProjectionError
from .mesh import Mesh

__all__ = ["ProjectionOperator", "build_projection", "project", "piecewise_gradient"]


@dataclass(frozen=True)
class ProjectionOperator:
    """Factorized interior stiffness block plus interior-boundary coupling."""

    mesh: Mesh
    stiffness: sp.csr_matrix
    _solve: Callable[[np.ndarray], np.ndarray] | None
    _coupling: sp.csr_matrix


def build_projection(mesh: Mesh) -> ProjectionOperator:
    A = galerkin_stiffness(mesh)
    ni = mesh.n_interior
    A_ii = A[:ni, :ni].tocsc()
    A_ib = A[:ni, ni:].tocsr()
    if ni == 0:
        return ProjectionOperator(mesh, A, None, A_ib)
    try:
        lu = spla.splu(A_ii)
    except RuntimeError as exc:
        raise ProjectionError(
            f"interior stiffness block is singular: {exc}"
        ) from exc
    diag = lu.U.diagonal()
    if (np.abs(diag) < 1e-14).any():
        raise ProjectionError("interior stiffness block is numerically singular")
    return ProjectionOperator(mesh, A, lu.solve, A_ib)


def _quadrature_rhs(mesh: Mesh, grad_w: Callable) -> np.ndarray:
    """<grad w, grad phi_l> by the edge-midpoint rule, all nodes."""
    mids = mesh.edge_midpoints()  # (nt, 3, 2)
    gx, gy = grad_w(mids[:, :, 0], mids[:, :, 1])
    gx = np.broadcast_to(gx, mids.shape[:2])
    gy = np.broadcast_to(gy, mids.shape[:2])
    mean = np.stack([gx.mean(axis=1), gy.mean(axis=1)], axis=-1)  # (nt, 2)
    contrib = (mean[:, None, :] * mesh.hat_gradients).sum(-1)  # (nt, 3)
    contrib = contrib * mesh.element_areas[:, None]
    rhs = np.zeros(mesh.n_vertices)
    np.add.at(rhs, mesh.triangles, contrib)
    return rhs


def _boundary_values(mesh: Mesh, w, boundary_values) -> np.ndarray:
    xb = mesh.vertices[mesh.n_interior :, 0]
    yb = mesh.vertices[mesh.n_interior :, 1]
    source = w if boundary_values is None else boundary_values
    if callable(source):
        return np.broadcast_to(np.asarray(source(xb, yb), dtype=float), xb.shape).copy()
    source = np.asarray(source, dtype=float)
    if source.shape == (mesh.n_vertices,):
        return source[mesh.n_interior :].copy()
    if source.shape == xb.shape:
        return source.copy()
    raise ProjectionError(
        f"boundary data has shape {source.shape}, expected ({mesh.n_vertices},) "
        f"or ({xb.shape[0]},)"
    )


def project(
    op: ProjectionOperator,
    w,
    grad_w: Callable | None = None,
    boundary_values=None,
) -> np.ndarray:
    """Project w into the finite element space; returns nodal values.

    w is either a nodal vector (a member of the space, projected exactly onto
    itself up to the boundary override) or a closure of (x, y); closures need
    grad_w returning (wx, wy).  boundary_values optionally replaces the
    boundary interpolation (closure of (x, y) or nodal array).
    """
    mesh = op.mesh
    ni = mesh.n_interior
    out = np.empty(mesh.n_vertices)
    out[ni:] = _boundary_values(mesh, w, boundary_values)
    if ni == 0:
        return out

    if callable(w):
        if grad_w is None:
            raise ProjectionError("projecting a closure needs its gradient closure")
        rhs = _quadrature_rhs(mesh, grad_w)[:ni]
    else:
        values = np.asarray(w, dtype=float)
        if values.shape != (mesh.n_vertices,):
            raise ProjectionError(
                f"nodal vector has shape {values.shape}, expected ({mesh.n_vertices},)"
            )
        rhs = (op.stiffness @ values)[:ni]
    out[:ni] = op._solve(rhs - op._coupling @ out[ni:])
    return out


def piecewise_gradient(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Constant per-element gradient of a nodal function: (nt, 2)."""
    v = np.asarray(values, dtype=float)[mesh.triangles]  # (nt, 3)
    return (v[:, :, None] * mesh.hat_gradients).sum(axis=1)
