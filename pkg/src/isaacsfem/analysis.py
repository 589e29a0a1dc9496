"""Error norms, convergence tables, and a pointwise consistency diagnostic.

Errors against a known solution are measured at the nodes (sup norm) and by
the three-edge-midpoint rule per element (L2 norm and full H1 norm; the rule
is exact for quadratic integrands, so the P1 parts are integrated exactly).
Convergence studies re-run the solver over increasing refinement levels and
report log2 ratios between consecutive rows.  The consistency probe applies
the discrete min-max operator to the elliptic projection of a smooth function
and compares, at a fixed interior point, against the continuous min-max
residual; the gap should shrink under refinement.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .assembly import evaluate_infsup_residual
from .errors import ParameterError, StudyError
from .mesh import Mesh, check_strict_acuteness
from .problems import IsaacsProblem, build_domain_mesh, pde_residual
from .projection import build_projection, piecewise_gradient, project
from .solver import SchemeConfig, assemble_step_family, resolve_time_step, solve_isaacs

__all__ = [
    "ErrorRecord",
    "compute_errors",
    "convergence_study",
    "consistency_probe",
    "format_convergence_csv",
]

CSV_HEADER = "dx,h,dofs,err_inf,rate_inf,err_l2,rate_l2,err_h1,rate_h1,runtime_s"


@dataclass(frozen=True)
class ErrorRecord:
    """One row of a convergence table; rates are None on the first row."""

    dx: float
    h: float
    dofs: int
    err_inf: float
    err_l2: float
    err_h1: float
    rate_inf: float | None
    rate_l2: float | None
    rate_h1: float | None
    runtime_seconds: float
    non_converged_steps: int = 0


def _value_and_grad(exact) -> tuple[Callable, Callable]:
    if hasattr(exact, "value") and hasattr(exact, "grad"):
        return exact.value, exact.grad
    value, grad = exact
    return value, grad


def compute_errors(
    mesh: Mesh, v_h: np.ndarray, exact, t: float = 0.0
) -> tuple[float, float, float]:
    """(sup, L2, H1) errors of the nodal vector v_h against exact at time t.

    exact is either an object with value(x, y, t) and grad(x, y, t) closures
    or a (value, grad) pair.  The sup norm is nodal; L2 and H1 use the
    edge-midpoint rule element by element, and H1 includes the L2 part.
    """
    value, grad = _value_and_grad(exact)
    v_h = np.asarray(v_h, dtype=float)
    xs, ys = mesh.vertices[:, 0], mesh.vertices[:, 1]
    err_inf = float(np.abs(v_h - value(xs, ys, t)).max())

    mids = mesh.edge_midpoints()  # (nt, 3, 2)
    tri = mesh.triangles
    # P1 value at an edge midpoint is the mean of the two endpoint values
    vh_mid = 0.5 * (v_h[tri][:, [0, 1, 2]] + v_h[tri][:, [1, 2, 0]])
    v_mid = np.broadcast_to(value(mids[..., 0], mids[..., 1], t), vh_mid.shape)
    weights = (mesh.element_areas / 3.0)[:, None]
    sq_l2 = (weights * (vh_mid - v_mid) ** 2).sum()

    grad_h = piecewise_gradient(mesh, v_h)  # (nt, 2), constant per element
    gx, gy = grad(mids[..., 0], mids[..., 1], t)
    gx = np.broadcast_to(gx, vh_mid.shape)
    gy = np.broadcast_to(gy, vh_mid.shape)
    sq_semi = (
        weights * ((grad_h[:, None, 0] - gx) ** 2 + (grad_h[:, None, 1] - gy) ** 2)
    ).sum()
    return err_inf, float(math.sqrt(sq_l2)), float(math.sqrt(sq_l2 + sq_semi))


def _rate(previous: float, current: float) -> float | None:
    if previous > 0.0 and current > 0.0:
        return math.log2(previous / current)
    return None


def convergence_study(
    problem: IsaacsProblem,
    levels: Sequence[int],
    config: SchemeConfig | None = None,
    policy: str = "advection-explicit",
    threads: int = 1,
) -> list[ErrorRecord]:
    """Solve on each refinement level and tabulate errors at t = 0.

    The time step is taken from config; with config.h = None every level
    picks its own largest stable step, which scales like the mesh size for
    advection-dominated splittings.  threads > 1 runs the levels on a thread
    pool (they share nothing); rows and rates are assembled in level order
    either way.  A level that raises aborts the study with the completed
    earlier rows attached to the StudyError.
    """
    if problem.exact is None:
        raise StudyError(f"problem {problem.name} has no exact solution")
    if threads < 1:
        raise ParameterError(f"thread count must be at least 1, got {threads}")
    cfg = config if config is not None else SchemeConfig()

    def run_level(level: int):
        mesh = build_domain_mesh(problem.domain, level=level)
        start = time.perf_counter()
        series = solve_isaacs(problem, mesh, cfg, policy)
        runtime = time.perf_counter() - start
        errors = compute_errors(mesh, series.final, problem.exact, t=0.0)
        return mesh, series, errors, runtime

    outcomes: list = []
    if threads == 1 or len(levels) <= 1:
        for level in levels:
            try:
                outcomes.append(run_level(level))
            except Exception as exc:
                outcomes.append(exc)
                break
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for future in [pool.submit(run_level, lv) for lv in levels]:
                try:
                    outcomes.append(future.result())
                except Exception as exc:
                    outcomes.append(exc)

    records: list[ErrorRecord] = []
    prev: ErrorRecord | None = None
    for level, outcome in zip(levels, outcomes):
        if isinstance(outcome, Exception):
            raise StudyError(
                f"level {level} failed: {outcome}", records=records
            ) from outcome
        mesh, series, (err_inf, err_l2, err_h1), runtime = outcome
        record = ErrorRecord(
            dx=mesh.dx,
            h=series.h,
            dofs=mesh.n_vertices,
            err_inf=err_inf,
            err_l2=err_l2,
            err_h1=err_h1,
            rate_inf=_rate(prev.err_inf, err_inf) if prev else None,
            rate_l2=_rate(prev.err_l2, err_l2) if prev else None,
            rate_h1=_rate(prev.err_h1, err_h1) if prev else None,
            runtime_seconds=runtime,
            non_converged_steps=len(series.non_converged_steps),
        )
        records.append(record)
        prev = record
    return records


def consistency_probe(
    problem: IsaacsProblem,
    fn,
    point: tuple[float, float],
    levels: Sequence[int],
    config: SchemeConfig | None = None,
    policy: str = "advection-explicit",
) -> list[float]:
    """Gap between the discrete and continuous operators at a point.

    fn must carry value/grad/lap/dt closures.  Per level, both time slices
    of fn are elliptically projected, the min-max residual of the first
    backward step is evaluated at the interior node nearest the point and
    scaled by 1/h, and the distance to the continuous min-max residual at
    the point (time 0) is recorded.  Boundary nodes are excluded because
    their rows carry the boundary condition, not the operator.
    """
    x0, y0 = float(point[0]), float(point[1])
    target = float(pde_residual(problem, fn, x0, y0, 0.0))
    gaps = []
    for level in levels:
        mesh = build_domain_mesh(problem.domain, level=level)
        h = resolve_time_step(problem, mesh, config, policy)
        theta = check_strict_acuteness(mesh).theta
        family = assemble_step_family(
            problem, mesh, theta, policy, t_implicit=0.0, t_explicit=h, h=h
        )
        proj = build_projection(mesh)
        p_now = project(
            proj,
            lambda x, y: fn.value(x, y, 0.0),
            lambda x, y: fn.grad(x, y, 0.0),
        )
        p_next = project(
            proj,
            lambda x, y: fn.value(x, y, h),
            lambda x, y: fn.grad(x, y, h),
        )
        residual, _, _ = evaluate_infsup_residual(family, p_now, p_next, h)
        interior = mesh.vertices[: mesh.n_interior]
        node = int(np.argmin((interior[:, 0] - x0) ** 2 + (interior[:, 1] - y0) ** 2))
        gaps.append(abs(float(residual[node]) / h - target))
    return gaps


def _cell(value: float | None) -> str:
    return "" if value is None else f"{value:.3e}"


def format_convergence_csv(records: Sequence[ErrorRecord]) -> str:
    """CSV table with one row per level; first-row rate cells are empty."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    f"{r.dx:.3e}",
                    f"{r.h:.3e}",
                    str(r.dofs),
                    f"{r.err_inf:.3e}",
                    _cell(r.rate_inf),
                    f"{r.err_l2:.3e}",
                    _cell(r.rate_l2),
                    f"{r.err_h1:.3e}",
                    _cell(r.rate_h1),
                    f"{r.runtime_seconds:.3e}",
                ]
            )
        )
    return "\n".join(lines) + "\n"
