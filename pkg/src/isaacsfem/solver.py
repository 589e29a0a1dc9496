"""Backward-in-time stepping and policy iteration for the min-max scheme.

Each step solves the per-node saddle-point system

    min over beta, max over alpha of
    [(h I + Id) u + (h E - Id) w - h F]_l = 0

by Howard-style policy iteration.  The inner loop maximizes over alpha with
beta frozen: solve the linear system of the current policy, improve alpha by
per-node argmax, repeat.  The outer loop scans the full control grid at the
current iterate, terminates when the per-node min over beta of the max over
alpha of the residual is below the tolerance, and otherwise improves beta by
that re-maximized argmin.  (Minimizing beta at the frozen inner alpha, which
scores every candidate optimistically, can cycle between two policies without
converging.)

The step solves u = Phi(w) use a sparse direct factorization; every linear
solve is residual-checked.  solve_isaacs wraps the stepping with boundary
projection, stability-bound accounting, and per-step monotonicity checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import FamilyAssembler, OperatorFamily, evaluate_infsup_residual
from .errors import MonotonicityError, ParameterError, SolverError, StabilizationError
from .mesh import Mesh, check_strict_acuteness
from .projection import ProjectionOperator, build_projection, piecewise_gradient, project
from .stabilization import apply_splitting_policy, max_stable_timestep

__all__ = [
    "SchemeConfig",
    "HowardStats",
    "TimeSeries",
    "psi",
    "phi",
    "howard_solve_step",
    "solve_isaacs",
    "assemble_step_family",
    "resolve_time_step",
]


@dataclass(frozen=True)
class SchemeConfig:
    """Time step, horizon, and iteration controls.

    h = None picks the largest step that divides T evenly while respecting
    the monotonicity ceiling.  T = None inherits the problem horizon.
    eta_schedule optionally overrides eta per solved step
    (index 0 is the step next to the final time); linear solves are checked
    against linear_solver_tol (default eta / 100).  max_inner caps one
    maximization pass (per outer iteration), max_outer the minimization
    passes of a single time step.
    """

    h: float | None = None
    T: float | None = None
    eta: float = 1e-10
    eta_schedule: Sequence[float] | None = None
    max_inner: int = 200
    max_outer: int = 50
    linear_solver_tol: float | None = None
    warm_start_policy: bool = False

    def __post_init__(self):
        if self.eta <= 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if self.h is not None and self.h <= 0:
            raise ParameterError(f"time step must be positive, got {self.h}")
        if self.T is not None and self.T <= 0:
            raise ParameterError(f"horizon must be positive, got {self.T}")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ParameterError("iteration caps must be at least 1")
        if self.linear_solver_tol is not None and self.linear_solver_tol <= 0:
            raise ParameterError("linear_solver_tol must be positive")
        if self.eta_schedule is not None:
            sched = tuple(float(e) for e in self.eta_schedule)
            if not sched or any(e <= 0 for e in sched):
                raise ParameterError("eta_schedule must be a nonempty positive sequence")
            object.__setattr__(self, "eta_schedule", sched)

    @property
    def linear_tolerance(self) -> float:
        return self.linear_solver_tol if self.linear_solver_tol is not None else self.eta / 100.0

    def step_eta(self, step_ordinal: int) -> float:
        if self.eta_schedule is None:
            return self.eta
        if step_ordinal < len(self.eta_schedule):
            return self.eta_schedule[step_ordinal]
        return self.eta_schedule[-1]


@dataclass(frozen=True)
class HowardStats:
    """Iteration record of one time step."""

    inner_iterations: int
    outer_iterations: int
    residual: float
    converged: bool
    linear_solves: int


@dataclass
class TimeSeries:
    """Solution trajectory, newest-to-oldest in time (times[0] = T, times[-1] = 0)."""

    times: np.ndarray
    values: np.ndarray
    h: float
    howard_stats: list[HowardStats]
    controls: list[tuple[np.ndarray, np.ndarray]] | None
    stability_bound: float | None
    sup_norm: float
    mesh: Mesh
    non_converged_steps: tuple[int, ...] = ()

    @property
    def steps(self) -> list[tuple[float, np.ndarray]]:
        return [(float(t), self.values[i]) for i, t in enumerate(self.times)]

    @property
    def final(self) -> np.ndarray:
        """Values at time zero."""
        return self.values[-1]

    def at_time(self, t: float) -> tuple[float, np.ndarray]:
        i = int(np.argmin(np.abs(self.times - t)))
        return float(self.times[i]), self.values[i]


def psi(
    family: OperatorFamily,
    pair: tuple[int, int],
    u: np.ndarray,
    w: np.ndarray,
    h: float,
) -> np.ndarray:
    """(h I + Id) u + (h E - Id) w - h F for one control pair."""
    ia, ib = pair
    return (
        h * (family.I(ia, ib) @ u)
        + u
        + h * (family.E(ia, ib) @ w)
        - w
        - h * family.F_vec(ia, ib)
    )


def phi(
    family: OperatorFamily,
    pair: tuple[int, int],
    w: np.ndarray,
    h: float,
    linear_tol: float = 1e-12,
) -> np.ndarray:
    """Solve (h I + Id) u = (Id - h E) w + h F for one control pair."""
    ia, ib = pair
    A = (h * family.I(ia, ib) + sp.identity(family.dim, format="csr")).tocsc()
    rhs = w - h * (family.E(ia, ib) @ w) + h * family.F_vec(ia, ib)
    u = spla.splu(A).solve(rhs)
    res = float(np.abs(A @ u - rhs).max())
    if res > linear_tol * max(1.0, float(np.abs(rhs).max())):
        raise SolverError(
            f"linear solve residual {res:.3e} exceeds tolerance {linear_tol:.3e}"
        )
    return u


def howard_solve_step(
    family: OperatorFamily,
    w: np.ndarray,
    config: SchemeConfig,
    eta: float | None = None,
    initial_policy: tuple[np.ndarray, np.ndarray] | None = None,
    factor_cache: dict | None = None,
) -> tuple[np.ndarray, HowardStats, tuple[np.ndarray, np.ndarray]]:
    """One backward step from known values w by policy iteration.

    Returns (u, stats, (alpha_idx, beta_idx)) with the final per-node control
    policy.  Iteration caps flag the result non-converged instead of raising.
    factor_cache, if given, keeps LU factorizations keyed by policy; pass one
    only while the operator family stays the same (it is keyed by policy, not
    by coefficients).
    """
    h = config.h
    if h is None or h <= 0:
        raise ParameterError("howard_solve_step needs a resolved positive step h")
    w = np.asarray(w, dtype=float)
    if w.shape != (family.dim,):
        raise ParameterError(
            f"previous-level vector has shape {w.shape}, expected ({family.dim},)"
        )
    eta_val = config.eta if eta is None else float(eta)
    lin_tol = config.linear_tolerance
    dim = family.dim
    n_alpha, n_beta = family.n_alpha, family.n_beta
    nodes = np.arange(dim)
    row_pairs = family.row_of_nnz
    col = family.indices
    indptr = family.indptr
    nnz_idx = np.arange(col.shape[0])

    if initial_policy is None:
        alpha0 = np.zeros(dim, dtype=np.int64)
        beta = np.zeros(dim, dtype=np.int64)
    else:
        alpha0 = np.array(initial_policy[0], dtype=np.int64)
        beta = np.array(initial_policy[1], dtype=np.int64)
        if alpha0.shape != (dim,) or beta.shape != (dim,):
            raise ParameterError("initial policy vectors must have one entry per node")
    alpha = alpha0.copy()

    counters = {"inner": 0, "outer": 0, "solves": 0}
    cache: dict = {"key": None, "u": None}

    def solve_policy(alpha_vec: np.ndarray, beta_vec: np.ndarray) -> np.ndarray:
        key = (alpha_vec.tobytes(), beta_vec.tobytes())
        if key == cache["key"]:
            return cache["u"]
        pair_per_node = beta_vec * n_alpha + alpha_vec
        pair_per_row = pair_per_node[row_pairs]
        entry = factor_cache.get(key) if factor_cache is not None else None
        if entry is None:
            vals_I = h * family.data_I[pair_per_row, nnz_idx]
            vals_I[family.diag_pos] += 1.0
            A = sp.csr_matrix((vals_I, col, indptr), shape=(dim, dim)).tocsc()
            lu = spla.splu(A)
            if factor_cache is not None:
                if len(factor_cache) >= 256:
                    factor_cache.clear()
                factor_cache[key] = (lu, A)
        else:
            lu, A = entry
        vals_E = family.data_E[pair_per_row, nnz_idx]
        Ew = np.add.reduceat(vals_E * w[col], indptr[:-1])
        rhs = w - h * Ew + h * family.F[pair_per_node, nodes]
        u_new = lu.solve(rhs)
        counters["solves"] += 1
        res = float(np.abs(A @ u_new - rhs).max())
        if res > lin_tol * max(1.0, float(np.abs(rhs).max())):
            raise SolverError(
                f"policy linear solve residual {res:.3e} exceeds {lin_tol:.3e}"
            )
        cache["key"], cache["u"] = key, u_new
        return u_new

    alpha_scan = np.arange(n_alpha, dtype=np.int64)[:, None]
    # controls only switch on a strict improvement; machine-level ties would
    # otherwise flip-flop forever between policies that are equally optimal
    tie_tol = 0.1 * eta_val

    def psi_policy(u_vec: np.ndarray, a_vec: np.ndarray, b_vec: np.ndarray) -> float:
        rows = (b_vec * n_alpha + a_vec)[None, :]
        return float(np.abs(family.psi_selected(u_vec, w, h, rows)[0]).max())

    u = w.copy()
    converged = False
    final_residual = math.inf

    while True:
        # termination and the beta improvement both come from the
        # re-maximized scan: beta_star minimizes, node by node, the residual
        # at the best alpha response for each candidate beta.  Minimizing at
        # the frozen inner alpha instead admits period-2 policy cycles whose
        # residual stalls at O(h) on game data.
        psi_cube = family.psi_all(u, w, h).reshape(n_beta, n_alpha, dim)
        max_over_alpha = psi_cube.max(axis=1)  # (n_beta, dim)
        beta_star = max_over_alpha.argmin(axis=0)
        final_residual = float(np.abs(max_over_alpha[beta_star, nodes]).max())
        if final_residual < eta_val:
            converged = True
            break
        if counters["outer"] >= config.max_outer:
            break
        counters["outer"] += 1
        beta = beta_star

        alpha = alpha0.copy()
        inner_res = psi_policy(u, alpha, beta)
        inner_used = 0
        while inner_res >= eta_val and inner_used < config.max_inner:
            u = solve_policy(alpha, beta)
            counters["inner"] += 1
            inner_used += 1
            # scan every alpha against each node's current beta: (n_alpha, dim)
            psi_rows = family.psi_selected(u, w, h, beta[None, :] * n_alpha + alpha_scan)
            cand = psi_rows.argmax(axis=0)
            gain = psi_rows[cand, nodes] - psi_rows[alpha, nodes]
            alpha = np.where(gain > tie_tol, cand, alpha)
            inner_res = float(np.abs(psi_rows[alpha, nodes]).max())
        u = solve_policy(alpha, beta)

    stats = HowardStats(
        inner_iterations=counters["inner"],
        outer_iterations=counters["outer"],
        residual=final_residual,
        converged=converged,
        linear_solves=counters["solves"],
    )
    return u, stats, (alpha, beta)


def _nodal_g(problem, mesh: Mesh, t: float) -> np.ndarray:
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    return np.broadcast_to(np.asarray(problem.g(x, y, t), dtype=float), x.shape).copy()


def _project_g(problem, op: ProjectionOperator, t: float) -> np.ndarray:
    """Projection of the boundary-data extension (interpolation fallback)."""
    grad_g = getattr(problem, "grad_g", None)
    if grad_g is None:
        return _nodal_g(problem, op.mesh, t)
    return project(
        op,
        lambda x, y: problem.g(x, y, t),
        lambda x, y: grad_g(x, y, t),
    )


def assemble_step_family(
    problem,
    mesh: Mesh,
    theta: float,
    policy: str,
    t_implicit: float,
    t_explicit: float,
    assembler: FamilyAssembler | None = None,
    h: float | None = None,
) -> OperatorFamily:
    """Operator family for one step: implicit data at t_implicit, explicit at
    t_explicit, boundary loads from the boundary condition at those times."""
    if assembler is None:
        assembler = FamilyAssembler(mesh)
    splits = apply_splitting_policy(
        problem, policy, mesh, theta, t_implicit=t_implicit, t_explicit=t_explicit
    )
    n_alpha = problem.controls.n_alpha
    n_beta = problem.controls.n_beta
    if getattr(problem, "g_time_dependent", False):
        if h is None:
            raise ParameterError("time-dependent boundary data needs the step h")
        return assembler.assemble(
            splits,
            _nodal_g(problem, mesh, t_implicit),
            n_alpha,
            n_beta,
            g_boundary_next=_nodal_g(problem, mesh, t_explicit),
            h=h,
        )
    return assembler.assemble(splits, _nodal_g(problem, mesh, t_implicit), n_alpha, n_beta)


def _resolve_step(problem, mesh, theta, policy, config, T, assembler) -> float:
    """Pick or validate the time step against the monotonicity ceiling."""
    time_dependent = getattr(problem, "time_dependent", True)
    if time_dependent:
        sample_times = np.linspace(0.0, T, 9)
    else:
        sample_times = np.array([0.0])
    ceilings = []
    for t in sample_times:
        fam = assemble_step_family(
            problem, mesh, theta, policy, t_implicit=t, t_explicit=t, assembler=assembler,
            h=T,  # placeholder step; only E enters the ceiling
        )
        h_max = max_stable_timestep(fam)
        if h_max is not None:
            ceilings.append(h_max)
    ceiling = min(ceilings) if ceilings else math.inf

    if config.h is not None:
        n = round(T / config.h)
        if n < 1 or abs(T / config.h - n) > 1e-9 * max(1.0, n):
            raise ParameterError(
                f"time step {config.h} does not divide the horizon {T}"
            )
        if config.h > ceiling * (1 + 1e-12):
            raise MonotonicityError(
                f"time step {config.h:.6g} exceeds the monotone ceiling {ceiling:.6g}"
            )
        return T / n
    n = max(1, math.ceil(T / ceiling - 1e-12)) if math.isfinite(ceiling) else 1
    return T / n


def resolve_time_step(
    problem,
    mesh: Mesh,
    config: SchemeConfig | None = None,
    policy: str = "advection-explicit",
) -> float:
    """The step solve_isaacs would use for this problem and mesh.

    A configured h is validated against the horizon and the monotonicity
    ceiling; otherwise the largest stable step dividing the horizon evenly
    is returned.
    """
    cfg = config if config is not None else SchemeConfig()
    acuteness = check_strict_acuteness(mesh)
    if not acuteness.is_strictly_acute:
        raise StabilizationError("mesh is not strictly acute: " + acuteness.summary())
    T = cfg.T if cfg.T is not None else float(getattr(problem, "T", 1.0))
    return _resolve_step(
        problem, mesh, acuteness.theta, policy, cfg, T, FamilyAssembler(mesh)
    )


def _check_explicit_monotone(family: OperatorFamily, h: float, t: float):
    row = family.row_of_nnz
    interior = row < family.n_interior
    offdiag = interior & (family.indices != row)
    if (family.data_E[:, offdiag] > 0.0).any():
        raise MonotonicityError(
            f"positive off-diagonal explicit entry at time {t:.6g}"
        )
    diag_int = family.data_E[:, family.diag_pos[: family.n_interior]]
    if (h * diag_int > 1.0 + 1e-12).any():
        raise MonotonicityError(
            f"explicit diagonal exceeds 1/h at time {t:.6g}; "
            f"step {h:.6g} is too large for the sampled coefficients"
        )


class _BoundTracker:
    """Running terms of the sup-norm stability bound."""

    def __init__(self, n_pairs: int):
        self.a = np.zeros(n_pairs)
        self.b = np.zeros(n_pairs)
        self.c = np.zeros(n_pairs)
        self.f = np.zeros(n_pairs)

    def update(self, splits):
        for p, s in enumerate(splits):
            self.a[p] = max(
                self.a[p], float(s.a_explicit.max()) + float(s.a_implicit.max())
            )
            b_norm = max(
                float(np.sqrt((s.b_explicit**2).sum(-1)).max()),
                0.0,
            ) + float(np.sqrt((s.b_implicit**2).sum(-1)).max())
            self.b[p] = max(self.b[p], b_norm)
            self.c[p] = max(
                self.c[p], float(s.c_explicit.max()) + float(s.c_implicit.max())
            )
            self.f[p] = max(self.f[p], float(np.abs(s.f).max()))

    def bound(self, pv_T_inf, pg_inf, pg_w1inf, lap_g_inf, T) -> float | None:
        if lap_g_inf is None:
            return None
        bracket = self.a * lap_g_inf + self.b * pg_w1inf + self.c * pg_inf + self.f
        return float(pv_T_inf + 2.0 * pg_inf + T * bracket.max())


def _lap_g_norm(problem, mesh: Mesh, times) -> float | None:
    lap_g = getattr(problem, "lap_g", None)
    if lap_g is None:
        return None
    pts = np.vstack([mesh.vertices, mesh.centroids])
    worst = 0.0
    for t in times:
        vals = np.broadcast_to(
            np.asarray(lap_g(pts[:, 0], pts[:, 1], t), dtype=float), pts[:, 0].shape
        )
        worst = max(worst, float(np.abs(vals).max()))
    return worst


def solve_isaacs(
    problem,
    mesh: Mesh,
    config: SchemeConfig,
    policy: str = "advection-explicit",
) -> TimeSeries:
    """Solve the problem backward from its final condition on the given mesh.

    The mesh must be strictly acute.  The returned series runs from the
    projected final condition at t = T down to t = 0; each step's min-max
    residual is re-evaluated independently of the iteration that produced it,
    and the sup norm of the whole trajectory is checked against the explicit
    stability bound whenever the boundary extension's Laplacian is available.
    """
    acuteness = check_strict_acuteness(mesh)
    if not acuteness.is_strictly_acute:
        raise StabilizationError(
            "mesh is not strictly acute: " + acuteness.summary()
        )
    theta = acuteness.theta
    T = config.T if config.T is not None else float(getattr(problem, "T", 1.0))

    proj = build_projection(mesh)
    assembler = FamilyAssembler(mesh)
    h = _resolve_step(problem, mesh, theta, policy, config, T, assembler)
    resolved = replace(config, h=h, T=T)
    n_steps = round(T / h)

    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    grad_v_T = getattr(problem, "grad_v_T", None)
    g_at_T = _nodal_g(problem, mesh, T)
    if grad_v_T is None:
        # project the nodal interpolant when no gradient closure is available
        vT_vals = np.broadcast_to(
            np.asarray(problem.v_T(x, y), dtype=float), x.shape
        ).copy()
        v_init = project(proj, vT_vals, boundary_values=g_at_T)
    else:
        v_init = project(proj, problem.v_T, grad_v_T, boundary_values=g_at_T)

    time_dependent = getattr(problem, "time_dependent", True)
    g_time_dependent = getattr(problem, "g_time_dependent", False)

    pg = _project_g(problem, proj, 0.0 if not g_time_dependent else T)
    pg_inf = float(np.abs(pg).max())
    pg_w1 = max(pg_inf, float(np.sqrt((piecewise_gradient(mesh, pg) ** 2).sum(-1)).max()))

    tracker = _BoundTracker(problem.controls.n_alpha * problem.controls.n_beta)
    times = T - h * np.arange(n_steps + 1)
    times[-1] = 0.0
    values = np.empty((n_steps + 1, mesh.n_vertices))
    values[0] = v_init
    stats_list: list[HowardStats] = []
    controls_list: list[tuple[np.ndarray, np.ndarray]] = []
    non_converged: list[int] = []

    family = None
    prev_policy = None
    # factorizations stay valid across steps only when the family does
    factor_cache: dict | None = (
        {} if not (time_dependent or g_time_dependent) else None
    )
    for i in range(1, n_steps + 1):
        k = n_steps - i  # time level being solved: t = k h
        t_now, t_next = float(times[i]), float(times[i - 1])
        if family is None or time_dependent or g_time_dependent:
            splits = apply_splitting_policy(
                problem, policy, mesh, theta, t_implicit=t_now, t_explicit=t_next
            )
            if g_time_dependent:
                family = assembler.assemble(
                    splits,
                    _nodal_g(problem, mesh, t_now),
                    problem.controls.n_alpha,
                    problem.controls.n_beta,
                    g_boundary_next=_nodal_g(problem, mesh, t_next),
                    h=h,
                )
            else:
                family = assembler.assemble(
                    splits,
                    _nodal_g(problem, mesh, 0.0),
                    problem.controls.n_alpha,
                    problem.controls.n_beta,
                )
            _check_explicit_monotone(family, h, t_next)
            tracker.update(splits)
            if g_time_dependent:
                pg_t = _project_g(problem, proj, t_now)
                pg_inf = max(pg_inf, float(np.abs(pg_t).max()))
                pg_w1 = max(
                    pg_inf,
                    pg_w1,
                    float(np.sqrt((piecewise_gradient(mesh, pg_t) ** 2).sum(-1)).max()),
                )

        eta_k = resolved.step_eta(i - 1)
        initial = prev_policy if config.warm_start_policy else None
        u, stats, pol = howard_solve_step(
            family,
            values[i - 1],
            resolved,
            eta=eta_k,
            initial_policy=initial,
            factor_cache=factor_cache,
        )
        res_vec, _, _ = evaluate_infsup_residual(family, u, values[i - 1], h)
        recheck = float(np.abs(res_vec).max())
        if stats.converged and recheck > eta_k + 10.0 * resolved.linear_tolerance:
            raise SolverError(
                f"independent residual {recheck:.3e} at t = {t_now:.6g} exceeds "
                f"eta + 10 linear tolerances"
            )
        if not stats.converged:
            non_converged.append(k)
        values[i] = u
        stats_list.append(stats)
        controls_list.append(pol)
        prev_policy = pol

    sup_norm = float(np.abs(values).max())
    bound_times = times if (time_dependent or g_time_dependent) else [0.0]
    lap_inf = _lap_g_norm(problem, mesh, bound_times)
    bound = tracker.bound(
        float(np.abs(v_init).max()), pg_inf, pg_w1, lap_inf, T
    )
    if bound is not None and sup_norm > bound * (1 + 1e-9) + 1e-9:
        raise SolverError(
            f"trajectory sup norm {sup_norm:.6g} violates the stability bound "
            f"{bound:.6g}"
        )

    return TimeSeries(
        times=times,
        values=values,
        h=h,
        howard_stats=stats_list,
        controls=controls_list,
        stability_bound=bound,
        sup_norm=sup_norm,
        mesh=mesh,
        non_converged_steps=tuple(non_converged),
    )
