"""Artificial diffusion and explicit/implicit splitting.

On a strictly acute mesh, adding enough nodal diffusion makes the advection
and reaction parts of the discrete operators monotone: the off-diagonal
entry contributed by element K to the row of node l is

    a(y_l) <grad phi_m, grad phihat_l>_K + <-b . grad phi_m + c phi_m, phihat_l>_K

and acuteness bounds the first term by -a sin(theta) |grad phi_m| |grad phi_l|
vol(K) / ||phi_l||_{L1(K)}, so with ||phi_l||_{L1(K)} = vol(K)/3 the entry is
non-positive once

    nu_l = max over elements K at l of
           (|b|_K + dx_K ||c||_K) / (3 sin(theta) |grad phi_l|_K)

with |b|_K the componentwise-sup Euclidean norm of b over K and dx_K the
element diameter.  The splitting policies distribute the natural coefficients
and this artificial diffusion between the explicit and implicit matrices; the
policies guarantee a_explicit >= nu_explicit and a_implicit >= nu_implicit
nodewise, so every assembled pair is monotone for small enough time steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assembly import CoefficientField, OperatorFamily
from .errors import MonotonicityError, ParameterError, StabilizationError
from .mesh import Mesh

__all__ = [
    "SplitCoefficients",
    "MonotonicityReport",
    "compute_artificial_viscosity",
    "apply_splitting_policy",
    "max_stable_timestep",
    "verify_monotonicity",
    "operator_stability_norms",
    "SPLITTING_POLICIES",
]

SPLITTING_POLICIES = ("fully-implicit", "advection-explicit")


@dataclass(frozen=True)
class SplitCoefficients:
    """Explicit/implicit coefficient split for one control pair.

    Diffusion coefficients live at nodes (they scale stiffness rows); the
    advection/reaction/load fields live at element centroids.  nu_explicit and
    nu_implicit are the artificial-diffusion floors each side must dominate;
    artificial_topup records how much diffusion was added beyond the problem's
    own coefficient (the consistency gap).
    """

    a_explicit: np.ndarray
    b_explicit: np.ndarray
    c_explicit: np.ndarray
    a_implicit: np.ndarray
    b_implicit: np.ndarray
    c_implicit: np.ndarray
    f: np.ndarray
    nu_explicit: np.ndarray
    nu_implicit: np.ndarray
    artificial_topup: np.ndarray


@dataclass(frozen=True)
class MonotonicityReport:
    """Row-by-row monotonicity audit of an operator family at a time step h.

    margins[p, l] is the diagonal-dominance margin of row l of (hI + Id) for
    pair p; the explicit matrix check records how many entries of hE - Id on
    interior rows are positive and the worst offender.
    """

    h: float
    offdiag_violations_E: tuple[int, float]
    h_max: float | None
    is_I_mmatrix: bool
    dominance_margin: float
    margins: np.ndarray

    @property
    def is_monotone(self) -> bool:
        return self.offdiag_violations_E[0] == 0 and self.is_I_mmatrix

    def to_text(self) -> str:
        count, worst = self.offdiag_violations_E
        lines = [
            f"monotonicity audit at h = {self.h:.6g}",
            f"  explicit matrix hE - Id: {count} positive interior entries"
            + (f" (worst {worst:.3e})" if count else ""),
            f"  largest stable step h_max: "
            + ("unbounded" if self.h_max is None else f"{self.h_max:.6g}"),
            f"  implicit matrix hI + Id is a strictly dominant Z-matrix: "
            + ("yes" if self.is_I_mmatrix else "NO"),
            f"  smallest dominance margin: {self.dominance_margin:.6g}",
            f"  verdict: " + ("monotone" if self.is_monotone else "NOT MONOTONE"),
        ]
        return "\n".join(lines)

    def to_csv(self) -> str:
        rows = ["pair_id,row,margin"]
        n_pairs, dim = self.margins.shape
        for p in range(n_pairs):
            for l in range(dim):
                rows.append(f"{p},{l},{self.margins[p, l]:.9e}")
        return "\n".join(rows) + "\n"


def compute_artificial_viscosity(
    mesh: Mesh, b: CoefficientField, c: CoefficientField, theta: float
) -> np.ndarray:
    """Nodal diffusion floor nu making advection b and reaction c monotone.

    theta is the mesh acuteness angle; |b| per element is estimated by
    sampling at the three vertices and the centroid (componentwise sup, then
    Euclidean norm), ||c|| by the same samples.
    """
    if theta <= 0.0:
        raise StabilizationError(
            "artificial diffusion needs a strictly acute mesh (theta > 0)"
        )
    nt = mesh.n_triangles
    bx, by = b.element_samples(mesh)
    b_norm = np.sqrt(
        np.abs(bx).max(axis=0) ** 2 + np.abs(by).max(axis=0) ** 2
    )  # (nt,)
    c_norm = np.abs(c.element_samples(mesh)).max(axis=0)

    p = mesh.vertices[mesh.triangles]
    edge = p[:, [1, 2, 0], :] - p[:, [0, 1, 2], :]
    diam = np.sqrt((edge**2).sum(-1)).max(axis=1)

    grad_norm = np.sqrt((mesh.hat_gradients**2).sum(-1))  # (nt, 3)
    need = (b_norm + diam * c_norm)[:, None] / (3.0 * np.sin(theta) * grad_norm)

    nu = np.zeros(mesh.n_vertices)
    np.maximum.at(nu, mesh.triangles, need)
    return nu


def _as_field(value, vector: bool = False) -> CoefficientField:
    if isinstance(value, CoefficientField):
        return value
    if callable(value):
        return CoefficientField.from_closure(value, vector=vector)
    return CoefficientField.constant(value)


def apply_splitting_policy(
    problem,
    policy: str,
    mesh: Mesh,
    theta: float,
    t_implicit: float = 0.0,
    t_explicit: float = 0.0,
) -> list[SplitCoefficients]:
    """Per-pair coefficient splits (beta-major order) for one time step.

    The implicit side is sampled at t_implicit (the time level being solved),
    the explicit side at t_explicit (the previous, already-known level); the
    load f is sampled at t_implicit.

    fully-implicit: everything lands in I, E = 0, and the implicit diffusion
    is floored at its own nu.  advection-explicit: b and c go to E with
    explicit diffusion exactly nu_explicit, while I keeps the remaining
    natural diffusion max(a - nu_explicit, 0).
    """
    if policy not in SPLITTING_POLICIES:
        raise ParameterError(
            f"unknown splitting policy {policy!r}; expected one of {SPLITTING_POLICIES}"
        )
    controls = problem.controls
    nv, nt = mesh.n_vertices, mesh.n_triangles
    splits: list[SplitCoefficients] = []
    zeros_nodes = np.zeros(nv)
    zeros_cent = np.zeros(nt)
    zeros_b = np.zeros((nt, 2))

    for i_beta in range(controls.n_beta):
        beta = controls.betas[i_beta]
        for i_alpha in range(controls.n_alpha):
            alpha = controls.alphas[i_alpha]

            def fix(fn, t, vector=False, _a=alpha, _b=beta):
                return _as_field(
                    lambda x, y: fn(x, y, t, _a, _b), vector=vector
                )

            f_cent = fix(problem.f, t_implicit).at_centroids(mesh)

            if policy == "fully-implicit":
                a_nat = fix(problem.a, t_implicit).at_nodes(mesh)
                b_field = fix(problem.b, t_implicit, vector=True)
                c_field = fix(problem.c, t_implicit)
                nu = compute_artificial_viscosity(mesh, b_field, c_field, theta)
                a_imp = np.maximum(a_nat, nu)
                bx, by = b_field.at_centroids(mesh)
                splits.append(
                    SplitCoefficients(
                        a_explicit=zeros_nodes,
                        b_explicit=zeros_b,
                        c_explicit=zeros_cent,
                        a_implicit=a_imp,
                        b_implicit=np.column_stack([bx, by]),
                        c_implicit=c_field.at_centroids(mesh),
                        f=f_cent,
                        nu_explicit=zeros_nodes,
                        nu_implicit=nu,
                        artificial_topup=np.maximum(nu - a_nat, 0.0),
                    )
                )
            else:
                a_exp_nat = fix(problem.a, t_explicit).at_nodes(mesh)
                a_imp_nat = fix(problem.a, t_implicit).at_nodes(mesh)
                b_field = fix(problem.b, t_explicit, vector=True)
                c_field = fix(problem.c, t_explicit)
                nu = compute_artificial_viscosity(mesh, b_field, c_field, theta)
                bx, by = b_field.at_centroids(mesh)
                splits.append(
                    SplitCoefficients(
                        a_explicit=nu.copy(),
                        b_explicit=np.column_stack([bx, by]),
                        c_explicit=c_field.at_centroids(mesh),
                        a_implicit=np.maximum(a_imp_nat - nu, 0.0),
                        b_implicit=zeros_b,
                        c_implicit=zeros_cent,
                        f=f_cent,
                        nu_explicit=nu,
                        nu_implicit=zeros_nodes,
                        artificial_topup=np.maximum(nu - a_exp_nat, 0.0),
                    )
                )
    return splits


def max_stable_timestep(family: OperatorFamily) -> float | None:
    """Largest h keeping hE - Id nonpositive on interior rows.

    Requires nonpositive off-diagonal explicit entries (raises otherwise);
    returns None when every interior diagonal of E is nonpositive, in which
    case any h > 0 is stable.
    """
    row = family.row_of_nnz
    interior = row < family.n_interior
    offdiag = interior & (family.indices != row)
    bad = family.data_E[:, offdiag] > 0.0
    if bad.any():
        p, q = np.argwhere(bad)[0]
        pos = np.flatnonzero(offdiag)[q]
        raise MonotonicityError(
            f"positive off-diagonal explicit entry at pair {p}, "
            f"row {row[pos]}, column {family.indices[pos]}: "
            f"{family.data_E[p, pos]:.3e} (mesh not strictly acute or "
            f"artificial diffusion too small)"
        )
    diag_int = family.data_E[:, family.diag_pos[: family.n_interior]]
    positive = diag_int > 0.0
    if not positive.any():
        return None
    return float((1.0 / diag_int[positive]).min())


def verify_monotonicity(family: OperatorFamily, h: float) -> MonotonicityReport:
    """Audit hE - Id and hI + Id for the whole family at step h."""
    if h <= 0:
        raise ParameterError(f"time step must be positive, got {h}")
    row = family.row_of_nnz
    diag = family.indices == row
    interior = row < family.n_interior

    # hE - Id on interior rows: diagonal h*E_ll - 1, off-diagonal h*E_lj.
    expl = h * family.data_E[:, interior]
    expl_diag = diag[interior]
    expl = expl - np.where(expl_diag, 1.0, 0.0)[None, :]
    viol = expl > 0.0
    count = int(viol.sum())
    worst = float(expl.max()) if count else 0.0

    # hI + Id: Z-matrix with strict diagonal dominance.
    data = h * family.data_I
    diag_vals = 1.0 + data[:, family.diag_pos]  # (n_pairs, dim)
    off_abs = np.abs(np.where(diag[None, :], 0.0, data))
    off_sums = np.add.reduceat(off_abs, family.indptr[:-1], axis=1)
    margins = diag_vals - off_sums
    z_ok = bool((np.where(diag[None, :], 0.0, data) <= 0.0).all())
    is_mmatrix = z_ok and bool((diag_vals > 0).all()) and bool((margins > 0).all())

    try:
        h_max = max_stable_timestep(family)
    except MonotonicityError:
        h_max = 0.0  # a positive off-diagonal entry survives any h
        count = max(count, 1)
    return MonotonicityReport(
        h=h,
        offdiag_violations_E=(count, worst),
        h_max=h_max,
        is_I_mmatrix=is_mmatrix,
        dominance_margin=float(margins.min()),
        margins=margins,
    )


def operator_stability_norms(family: OperatorFamily, h: float) -> tuple[float, float]:
    """(max over pairs of ||(hI+Id)^-1||_inf, max of ||hE-Id||_inf).

    The inverse norm is evaluated exactly: for an M-matrix the inverse is
    nonnegative, so the row sums of the inverse are (hI+Id)^{-1} 1.  The
    explicit norm restricts columns to interior nodes (the operator maps
    V_i^0 to V_i^0).
    """
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    dim = family.dim
    ones = np.ones(dim)
    ident = sp.identity(dim, format="csr")
    inv_norm = 0.0
    exp_norm = 0.0
    interior_col = family.indices < family.n_interior
    row = family.row_of_nnz
    diag = family.indices == row
    for p in range(family.n_pairs):
        A = sp.csr_matrix(
            (h * family.data_I[p], family.indices, family.indptr), shape=(dim, dim)
        )
        A = (A + ident).tocsc()
        x = spla.splu(A).solve(ones)
        inv_norm = max(inv_norm, float(np.abs(x).max()))

        if family.n_interior == 0:
            continue
        vals = h * family.data_E[p] - np.where(diag, 1.0, 0.0)
        vals = np.abs(np.where(interior_col, vals, 0.0))
        rowsums = np.add.reduceat(vals, family.indptr[:-1])
        exp_norm = max(exp_norm, float(rowsums[: family.n_interior].max()))
    return inv_norm, exp_norm
