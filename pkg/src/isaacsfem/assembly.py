"""Sparse discrete operators of the scheme.

For each control pair the scheme needs an explicit matrix E, an implicit
matrix I, and a load vector F, all row-normalized by the L1 norms of the hat
functions.  Interior rows discretize

    (E w)_l = a(y_l) <grad w, grad phihat_l> + <-b . grad w + c w, phihat_l>

with the diffusion coefficient sampled at the node y_l and b, c, f sampled at
element centroids (exact for constants).  Boundary rows are zero for E,
identity for I, and carry the projected boundary data in F.

All matrices of one family share a single CSR sparsity pattern (mesh
adjacency), so per-pair data is stored as stacked rows of one (n_pairs, nnz)
array; this makes the all-pairs residual evaluation of the inf-sup operator a
couple of dense numpy reductions.  Pairs are ordered beta-major:
pair = i_beta * n_alpha + i_alpha.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError
from .mesh import Mesh

__all__ = [
    "CoefficientField",
    "ControlGrid",
    "OperatorFamily",
    "Templates",
    "FamilyAssembler",
    "assemble_templates",
    "assemble_operator_pair",
    "evaluate_infsup_residual",
    "galerkin_stiffness",
]

_MASS_PATTERN = np.array(
    [1 / 6, 1 / 12, 1 / 12, 1 / 12, 1 / 6, 1 / 12, 1 / 12, 1 / 12, 1 / 6]
)


@dataclass(frozen=True)
class CoefficientField:
    """A coefficient given as a constant, a per-node array, or a closure of (x, y).

    Vector fields (advection) hold 2-component payloads: a pair, an (nv, 2)
    array, or a closure returning (bx, by).
    """

    kind: str
    payload: object
    vector: bool = False

    @classmethod
    def constant(cls, value) -> "CoefficientField":
        value = np.asarray(value, dtype=float)
        return cls("constant", value, vector=value.ndim == 1)

    @classmethod
    def per_node(cls, values: np.ndarray) -> "CoefficientField":
        values = np.asarray(values, dtype=float)
        return cls("per-node", values, vector=values.ndim == 2)

    @classmethod
    def from_closure(cls, fn: Callable, vector: bool = False) -> "CoefficientField":
        return cls("closure", fn, vector=vector)

    def _eval(self, x: np.ndarray, y: np.ndarray):
        if self.kind == "constant":
            if self.vector:
                return (
                    np.broadcast_to(self.payload[0], x.shape),
                    np.broadcast_to(self.payload[1], x.shape),
                )
            return np.broadcast_to(self.payload, x.shape)
        if self.kind == "closure":
            out = self.payload(x, y)
            if self.vector:
                bx, by = out
                return (np.broadcast_to(bx, x.shape), np.broadcast_to(by, x.shape))
            return np.broadcast_to(out, x.shape)
        raise AssemblyError("per-node coefficients cannot be sampled off the nodes")

    def at_nodes(self, mesh: Mesh):
        """Values at mesh nodes: (nv,) scalar or ((nv,), (nv,)) vector."""
        if self.kind == "per-node":
            values = self.payload
            if len(values) != mesh.n_vertices:
                raise AssemblyError(
                    f"per-node coefficient has length {len(values)}, "
                    f"mesh has {mesh.n_vertices} nodes"
                )
            if self.vector:
                return values[:, 0], values[:, 1]
            return values
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        return self._eval(x, y)

    def at_centroids(self, mesh: Mesh):
        """Values at element centroids: (nt,) scalar or ((nt,), (nt,)) vector."""
        if self.kind == "per-node":
            tri_vals = np.asarray(self.payload)[mesh.triangles]
            mean = tri_vals.mean(axis=1)
            if self.vector:
                return mean[:, 0], mean[:, 1]
            return mean
        c = mesh.centroids
        return self._eval(c[:, 0], c[:, 1])

    def element_samples(self, mesh: Mesh):
        """Values at the three vertices plus centroid of each element.

        Returns (4, nt) for scalars or a pair of (4, nt) for vectors; used for
        per-element sup-norm estimates.
        """
        p = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
        c = mesh.centroids
        xs = np.concatenate([p[:, :, 0].T, c[None, :, 0]])  # (4, nt)
        ys = np.concatenate([p[:, :, 1].T, c[None, :, 1]])
        if self.kind == "per-node":
            vals = np.asarray(self.payload)[mesh.triangles]  # (nt, 3[, 2])
            if self.vector:
                cx, cy = self.at_centroids(mesh)
                return (
                    np.concatenate([vals[:, :, 0].T, cx[None, :]]),
                    np.concatenate([vals[:, :, 1].T, cy[None, :]]),
                )
            cv = self.at_centroids(mesh)
            return np.concatenate([vals.T, cv[None, :]])
        return self._eval(xs, ys)


@dataclass(frozen=True)
class ControlGrid:
    """Finite grids discretizing the two compact control sets.

    alphas/betas are arrays whose rows are control points (scalars or
    vectors); labels are human-readable names per point.
    """

    alphas: np.ndarray
    betas: np.ndarray
    alpha_labels: tuple[str, ...]
    beta_labels: tuple[str, ...]

    def __post_init__(self):
        for name, pts in (("alpha", self.alphas), ("beta", self.betas)):
            pts = np.atleast_1d(np.asarray(pts, dtype=float))
            if pts.shape[0] == 0:
                raise AssemblyError(f"{name} control grid is empty")
            flat = pts.reshape(pts.shape[0], -1)
            dists = np.sqrt(
                ((flat[:, None, :] - flat[None, :, :]) ** 2).sum(-1)
            )
            np.fill_diagonal(dists, np.inf)
            if (dists < 1e-12).any():
                a, b = np.argwhere(dists < 1e-12)[0]
                raise AssemblyError(
                    f"duplicate {name} control points at indices {a} and {b}"
                )
            object.__setattr__(self, name + "s", pts)

    @property
    def n_alpha(self) -> int:
        return self.alphas.shape[0]

    @property
    def n_beta(self) -> int:
        return self.betas.shape[0]

    @property
    def labels(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        return (self.alpha_labels, self.beta_labels)

    @staticmethod
    def make(alphas, betas, alpha_fmt="alpha[{i}]={v}", beta_fmt="beta[{i}]={v}"):
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        betas = np.atleast_1d(np.asarray(betas, dtype=float))
        a_labels = tuple(alpha_fmt.format(i=i, v=np.round(v, 6)) for i, v in enumerate(alphas))
        b_labels = tuple(beta_fmt.format(i=i, v=np.round(v, 6)) for i, v in enumerate(betas))
        return ControlGrid(alphas, betas, a_labels, b_labels)


@dataclass(frozen=True)
class Templates:
    """Shared L1-row-normalized template matrices.

    S[l,j] = <grad phi_j, grad phihat_l>, B_x/B_y the advection components
    <d phi_j, phihat_l>, M[l,j] = <phi_j, phihat_l> (exact P1 mass).
    """

    S: sp.csr_matrix
    B_x: sp.csr_matrix
    B_y: sp.csr_matrix
    M: sp.csr_matrix


@dataclass(frozen=True)
class OperatorFamily:
    """E, I, F for every control pair on one shared sparsity pattern.

    data_E/data_I hold one row of CSR data per pair; F is (n_pairs, dim).
    Boundary rows (index >= n_interior) are zero in E, unit rows in I, and
    projected boundary data in F.
    """

    dim: int
    n_interior: int
    n_alpha: int
    n_beta: int
    indptr: np.ndarray
    indices: np.ndarray
    data_E: np.ndarray
    data_I: np.ndarray
    F: np.ndarray
    templates: Templates | None = None
    mesh: Mesh | None = None

    @property
    def n_pairs(self) -> int:
        return self.n_alpha * self.n_beta

    def pair_index(self, i_alpha: int, i_beta: int) -> int:
        return i_beta * self.n_alpha + i_alpha

    @cached_property
    def row_of_nnz(self) -> np.ndarray:
        return np.repeat(np.arange(self.dim), np.diff(self.indptr))

    @cached_property
    def diag_pos(self) -> np.ndarray:
        keys = self.row_of_nnz.astype(np.int64) * self.dim + self.indices
        want = np.arange(self.dim, dtype=np.int64) * (self.dim + 1)
        return np.searchsorted(keys, want)

    @cached_property
    def _nnz_range(self) -> np.ndarray:
        return np.arange(self.indices.size)

    def _csr(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix(
            (data.copy(), self.indices, self.indptr), shape=(self.dim, self.dim)
        )

    def E(self, i_alpha: int, i_beta: int) -> sp.csr_matrix:
        return self._csr(self.data_E[self.pair_index(i_alpha, i_beta)])

    def I(self, i_alpha: int, i_beta: int) -> sp.csr_matrix:
        return self._csr(self.data_I[self.pair_index(i_alpha, i_beta)])

    def F_vec(self, i_alpha: int, i_beta: int) -> np.ndarray:
        return self.F[self.pair_index(i_alpha, i_beta)].copy()

    def apply_all(self, data2d: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Matrix-vector products of every pair's matrix with x: (n_pairs, dim)."""
        prod = data2d * x[self.indices][None, :]
        return np.add.reduceat(prod, self.indptr[:-1], axis=1)

    def psi_all(self, u: np.ndarray, w: np.ndarray, h: float) -> np.ndarray:
        """Psi(u, w) = (hI + Id)u + (hE - Id)w - hF for every pair: (n_pairs, dim)."""
        if u.shape != (self.dim,) or w.shape != (self.dim,):
            raise ValueError(
                f"expected vectors of length {self.dim}, got {u.shape} and {w.shape}"
            )
        out = h * self.apply_all(self.data_I, u)
        out += h * self.apply_all(self.data_E, w)
        out += (u - w)[None, :]
        out -= h * self.F
        return out

    def psi_selected(
        self, u: np.ndarray, w: np.ndarray, h: float, pair_of_row: np.ndarray
    ) -> np.ndarray:
        """Psi(u, w) with a possibly different control pair in every row.

        pair_of_row has shape (m, dim); entry (j, l) picks the pair whose row l
        goes into variant j.  Returns (m, dim).  Equivalent to gathering
        psi_all(u, w, h) at those pairs, but only assembles the rows asked for,
        which is what the policy iteration needs when it scans one control
        while the other is held fixed per node.
        """
        pair_of_row = np.atleast_2d(pair_of_row)
        pr = pair_of_row[:, self.row_of_nnz]
        nnz_col = self._nnz_range
        ui = u[self.indices]
        wi = w[self.indices]
        out = np.add.reduceat(
            self.data_I[pr, nnz_col] * ui[None, :]
            + self.data_E[pr, nnz_col] * wi[None, :],
            self.indptr[:-1],
            axis=1,
        )
        out *= h
        out += (u - w)[None, :]
        out -= h * self.F[pair_of_row, np.arange(self.dim)[None, :]]
        return out

    @classmethod
    def from_matrices(
        cls,
        E_list: Sequence[np.ndarray],
        I_list: Sequence[np.ndarray],
        F_list: Sequence[np.ndarray],
        n_alpha: int,
        n_beta: int,
        n_interior: int | None = None,
    ) -> "OperatorFamily":
        """Build a family from dense per-pair matrices (beta-major pair order).

        Intended for small synthetic systems; the pattern is taken dense.
        """
        if len(E_list) != n_alpha * n_beta:
            raise ValueError("need one (E, I, F) triple per control pair")
        dim = np.asarray(E_list[0]).shape[0]
        indptr = np.arange(dim + 1) * dim
        indices = np.tile(np.arange(dim), dim)
        data_E = np.stack([np.asarray(E, dtype=float).ravel() for E in E_list])
        data_I = np.stack([np.asarray(I, dtype=float).ravel() for I in I_list])
        F = np.stack([np.asarray(f, dtype=float) for f in F_list])
        return cls(
            dim=dim,
            n_interior=dim if n_interior is None else n_interior,
            n_alpha=n_alpha,
            n_beta=n_beta,
            indptr=indptr,
            indices=indices,
            data_E=data_E,
            data_I=data_I,
            F=F,
        )


class FamilyAssembler:
    """Precomputed scatter structure for repeated multi-pair assembly on a mesh.

    Element contributions are mapped once to positions in the shared CSR
    pattern; per-pair assembly then reduces to sparse-times-dense products of
    fixed weight matrices with per-element coefficient values.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        tri = mesh.triangles
        nv, nt = mesh.n_vertices, mesh.n_triangles
        grads = mesh.hat_gradients
        vol = mesh.element_areas
        l1 = mesh.l1_norms

        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, 3).ravel()
        pattern = sp.csr_matrix(
            (np.ones(rows.shape[0]), (rows, cols)), shape=(nv, nv)
        )
        pattern.sum_duplicates()
        pattern.sort_indices()
        self.indptr = pattern.indptr.astype(np.int64)
        self.indices = pattern.indices.astype(np.int64)
        nnz = self.indices.shape[0]
        row_of_nnz = np.repeat(np.arange(nv, dtype=np.int64), np.diff(self.indptr))
        keys = row_of_nnz * nv + self.indices
        scatter = np.searchsorted(keys, rows.astype(np.int64) * nv + cols)
        element_of = np.repeat(np.arange(nt), 9)

        ga = grads[:, [0, 0, 0, 1, 1, 1, 2, 2, 2], :]  # test hat per contribution
        gb = grads[:, [0, 1, 2, 0, 1, 2, 0, 1, 2], :]  # trial hat
        inv_l1 = 1.0 / l1[rows].reshape(nt, 9)

        stiff9 = (ga * gb).sum(-1) * vol[:, None] * inv_l1
        s_data = np.zeros(nnz)
        np.add.at(s_data, scatter, stiff9.ravel())
        self.s_hat_data = s_data

        def weight_matrix(vals9: np.ndarray) -> sp.csr_matrix:
            return sp.csr_matrix(
                (vals9.ravel(), (scatter, element_of)), shape=(nnz, nt)
            )

        third = (vol / 3.0)[:, None]
        self.W_bx = weight_matrix(gb[:, :, 0] * third * inv_l1)
        self.W_by = weight_matrix(gb[:, :, 1] * third * inv_l1)
        self.W_m = weight_matrix(_MASS_PATTERN[None, :] * vol[:, None] * inv_l1)
        self.W_f = sp.csr_matrix(
            (
                (third / l1[tri]).ravel(),
                (tri.ravel(), np.repeat(np.arange(nt), 3)),
            ),
            shape=(nv, nt),
        )

        self.row_of_nnz = row_of_nnz
        self.diag_pos = np.searchsorted(
            keys, np.arange(nv, dtype=np.int64) * (nv + 1)
        )
        self.boundary_nnz = row_of_nnz >= mesh.n_interior
        self.boundary_diag_pos = self.diag_pos[mesh.n_interior :]

        ones = np.ones(nt)
        self.templates = Templates(
            S=sp.csr_matrix((self.s_hat_data.copy(), self.indices, self.indptr)),
            B_x=sp.csr_matrix((self.W_bx @ ones, self.indices, self.indptr)),
            B_y=sp.csr_matrix((self.W_by @ ones, self.indices, self.indptr)),
            M=sp.csr_matrix((self.W_m @ ones, self.indices, self.indptr)),
        )

    def _side_data(self, a_nodes, b_cent, c_cent) -> np.ndarray:
        """(n_pairs, nnz) CSR data for one side (explicit or implicit)."""
        if (c_cent < 0).any():
            raise AssemblyError("reaction coefficient c must be non-negative")
        data = a_nodes[:, self.row_of_nnz] * self.s_hat_data[None, :]
        data -= (self.W_bx @ b_cent[:, :, 0].T).T
        data -= (self.W_by @ b_cent[:, :, 1].T).T
        data += (self.W_m @ c_cent.T).T
        return data

    def assemble(
        self,
        splits: Sequence,
        g_boundary: np.ndarray,
        n_alpha: int,
        n_beta: int,
        g_boundary_next: np.ndarray | None = None,
        h: float | None = None,
    ) -> OperatorFamily:
        """Assemble the family from per-pair SplitCoefficients (beta-major order).

        g_boundary holds (P_i g) at the current time level; when the boundary
        data is time dependent, g_boundary_next and h turn the boundary load
        into ((1+h) g_now - g_next) / h so the boundary update lands exactly on
        g_now.
        """
        mesh = self.mesh
        n_pairs = len(splits)
        if n_pairs != n_alpha * n_beta:
            raise AssemblyError(
                f"got {n_pairs} splits for {n_alpha}x{n_beta} control pairs"
            )
        a_exp = np.stack([s.a_explicit for s in splits])
        a_imp = np.stack([s.a_implicit for s in splits])
        b_exp = np.stack([s.b_explicit for s in splits])
        b_imp = np.stack([s.b_implicit for s in splits])
        c_exp = np.stack([s.c_explicit for s in splits])
        c_imp = np.stack([s.c_implicit for s in splits])
        f_cent = np.stack([s.f for s in splits])

        data_E = self._side_data(a_exp, b_exp, c_exp)
        data_I = self._side_data(a_imp, b_imp, c_imp)
        data_E[:, self.boundary_nnz] = 0.0
        data_I[:, self.boundary_nnz] = 0.0
        data_I[:, self.boundary_diag_pos] = 1.0

        F = (self.W_f @ f_cent.T).T
        g_now = np.asarray(g_boundary, dtype=float)[mesh.n_interior :]
        if g_boundary_next is None:
            F[:, mesh.n_interior :] = g_now[None, :]
        else:
            if h is None:
                raise AssemblyError("time-dependent boundary data needs the step h")
            g_next = np.asarray(g_boundary_next, dtype=float)[mesh.n_interior :]
            F[:, mesh.n_interior :] = (((1.0 + h) * g_now - g_next) / h)[None, :]

        return OperatorFamily(
            dim=mesh.n_vertices,
            n_interior=mesh.n_interior,
            n_alpha=n_alpha,
            n_beta=n_beta,
            indptr=self.indptr,
            indices=self.indices,
            data_E=data_E,
            data_I=data_I,
            F=F,
            templates=self.templates,
            mesh=mesh,
        )


def assemble_templates(mesh: Mesh) -> Templates:
    """Shared template matrices S, B_x, B_y, M (L1-row-normalized)."""
    return FamilyAssembler(mesh).templates


def galerkin_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """Symmetric unnormalized stiffness <grad phi_j, grad phi_l>."""
    tri = mesh.triangles
    grads = mesh.hat_gradients
    vol = mesh.element_areas
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, 3).ravel()
    ga = grads[:, [0, 0, 0, 1, 1, 1, 2, 2, 2], :]
    gb = grads[:, [0, 1, 2, 0, 1, 2, 0, 1, 2], :]
    vals = (ga * gb).sum(-1) * vol[:, None]
    A = sp.csr_matrix(
        (vals.ravel(), (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices)
    )
    A.sum_duplicates()
    return A


def assemble_operator_pair(mesh: Mesh, split, g_proj: np.ndarray):
    """Directly assemble (E, I, F) for one control pair by element scatter.

    This is an independent (slower) path from FamilyAssembler.assemble, kept
    for one-off use and as a cross-check of the template factorization.
    """
    tri = mesh.triangles
    grads = mesh.hat_gradients
    vol = mesh.element_areas
    l1 = mesh.l1_norms
    nv = mesh.n_vertices
    ni = mesh.n_interior

    for c in (split.c_explicit, split.c_implicit):
        if (np.asarray(c) < 0).any():
            raise AssemblyError("reaction coefficient c must be non-negative")

    def side_matrix(a_nodes, b_cent, c_cent) -> sp.csr_matrix:
        rows_l, cols_l, vals_l = [], [], []
        for a in range(3):
            for b in range(3):
                ra = tri[:, a]
                stiff = a_nodes[ra] * (grads[:, b] * grads[:, a]).sum(-1) * vol
                adv = -(b_cent * grads[:, b]).sum(-1) * vol / 3.0
                mass = c_cent * vol * (1 / 6 if a == b else 1 / 12)
                vals = (stiff + adv + mass) / l1[ra]
                vals = np.where(ra < ni, vals, 0.0)  # boundary rows are special
                rows_l.append(ra)
                cols_l.append(tri[:, b])
                vals_l.append(vals)
        A = sp.csr_matrix(
            (np.concatenate(vals_l), (np.concatenate(rows_l), np.concatenate(cols_l))),
            shape=(nv, nv),
        )
        A.sum_duplicates()
        return A

    E = side_matrix(split.a_explicit, split.b_explicit, split.c_explicit)
    I = side_matrix(split.a_implicit, split.b_implicit, split.c_implicit)
    I += sp.csr_matrix(
        (np.ones(nv - ni), (np.arange(ni, nv), np.arange(ni, nv))), shape=(nv, nv)
    )

    F = np.zeros(nv)
    np.add.at(F, tri, (split.f * vol / 3.0)[:, None])
    F /= l1
    F[ni:] = np.asarray(g_proj, dtype=float)[ni:]
    return E, I, F


def evaluate_infsup_residual(
    family: OperatorFamily, w_now: np.ndarray, w_next: np.ndarray, h: float
):
    """Per-node min over beta of max over alpha of Psi(w_now, w_next).

    Returns (residual vector, argmin-beta per node, argmax-alpha per node),
    with lowest-index tie-breaking.  Boundary rows reduce to
    (1+h) w_now - w_next - h (P_i g) through the unit/zero boundary rows.
    """
    psi = family.psi_all(w_now, w_next, h)
    cube = psi.reshape(family.n_beta, family.n_alpha, family.dim)
    alpha_of_beta = cube.argmax(axis=1)  # (n_beta, dim)
    max_over_alpha = np.take_along_axis(cube, alpha_of_beta[:, None, :], axis=1)[
        :, 0, :
    ]
    beta_idx = max_over_alpha.argmin(axis=0)  # (dim,)
    nodes = np.arange(family.dim)
    residual = max_over_alpha[beta_idx, nodes]
    alpha_idx = alpha_of_beta[beta_idx, nodes]
    return residual, beta_idx, alpha_idx
