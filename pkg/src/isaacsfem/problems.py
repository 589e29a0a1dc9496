"""Problem definitions: built-in experiments, validation, and config parsing.

A problem bundles the domain, finite control grids, coefficient closures
a(x, y, t, alpha, beta), b, c, f, boundary data g(x, y, t), terminal data
v_T(x, y), and the horizon.  Optional extras carry exact solutions and the
derivative closures used by boundary projections and stability accounting.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import ControlGrid
from .errors import ParameterError
from .expressions import compile_expression
from .mesh import Mesh, generate_annulus_mesh, generate_triangle_mesh, load_mesh

__all__ = [
    "DomainSpec",
    "SmoothFunction",
    "IsaacsProblem",
    "ValidationReport",
    "experiment1",
    "tag_chase",
    "validate_problem",
    "pde_residual",
    "problem_from_config",
    "build_domain_mesh",
]


@dataclass(frozen=True)
class DomainSpec:
    """Where the problem lives: built-in triangle, annulus(r, R), or a mesh file."""

    kind: str
    r: float | None = None
    R: float | None = None
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("triangle", "annulus", "mesh"):
            raise ParameterError(f"unknown domain kind {self.kind!r}")
        if self.kind == "annulus" and (self.r is None or self.R is None):
            raise ParameterError("annulus domains need radii r and R")
        if self.kind == "mesh" and not self.path:
            raise ParameterError("mesh domains need a file path")


@dataclass(frozen=True)
class SmoothFunction:
    """A scalar function bundled with the derivatives the scheme probes.

    value(x, y, t); grad(x, y, t) -> (wx, wy); lap(x, y, t); dt(x, y, t).
    """

    value: Callable
    grad: Callable
    lap: Callable
    dt: Callable


@dataclass(frozen=True)
class IsaacsProblem:
    name: str
    domain: DomainSpec
    controls: ControlGrid
    a: Callable
    b: Callable
    c: Callable
    f: Callable
    g: Callable
    v_T: Callable
    T: float = 1.0
    time_dependent: bool = True
    g_time_dependent: bool = False
    exact: SmoothFunction | None = None
    grad_g: Callable | None = None
    lap_g: Callable | None = None
    grad_v_T: Callable | None = None
    continuous_residual: Callable | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.T <= 0:
            raise ParameterError(f"horizon must be positive, got {self.T}")


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of randomized admissibility checks on a problem's data."""

    samples: int
    violations: tuple[tuple[str, float, tuple], ...]
    boundary_mismatch: int
    notes: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [f"validated {self.samples} random samples"]
        if self.violations:
            for name, value, where in self.violations[:10]:
                lines.append(f"  VIOLATION {name} = {value:.3e} at {where}")
            if len(self.violations) > 10:
                lines.append(f"  ... and {len(self.violations) - 10} more")
        else:
            lines.append("  coefficient admissibility: clean")
        if self.boundary_mismatch:
            lines.append(
                f"  note: terminal data differs from boundary data at "
                f"{self.boundary_mismatch} boundary node(s); the scheme uses "
                f"the boundary data there"
            )
        lines.extend("  note: " + n for n in self.notes)
        return "\n".join(lines)


def experiment1(
    n_alpha: int = 16, n_beta: int = 8, T: float = 1.0, exact_alpha: bool = False
) -> IsaacsProblem:
    """Radially symmetric game with a known smooth solution on the triangle.

    The diffusion is beta * sqrt((x^2+y^2)/(T-t+1)) for beta in [1/4, 1/2],
    the drift is a unit direction alpha scaled by 1/(2 sqrt(T-t+1)), and the
    exact value is exp(-rho) + rho with rho = sqrt((x^2+y^2)/(T-t+1)).
    exact_alpha replaces the alpha grid by the pointwise optimal direction
    -grad v / |grad v| computed from the exact solution.
    """

    def tau(t):
        return T - t + 1.0

    def rho(x, y, t):
        return np.sqrt((x * x + y * y) / tau(t))

    def value(x, y, t):
        p = rho(x, y, t)
        return np.exp(-p) + p

    def grad(x, y, t):
        r = np.sqrt(x * x + y * y)
        p = rho(x, y, t)
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(r > 1e-14, -np.expm1(-p) / np.maximum(r, 1e-300), 0.0)
        s = s / np.sqrt(tau(t))
        limit = 1.0 / tau(t)
        s = np.where(r > 1e-14, s, limit)
        return s * x, s * y

    def lap(x, y, t):
        p = rho(x, y, t)
        tv = tau(t)
        ratio = np.where(p > 1e-8, -np.expm1(-p) / np.maximum(p, 1e-300), 1.0 - p / 2.0)
        return (np.exp(-p) + ratio) / tv

    def dt(x, y, t):
        p = rho(x, y, t)
        return -np.expm1(-p) * p / (2.0 * tau(t))

    exact = SmoothFunction(value=value, grad=grad, lap=lap, dt=dt)

    def a(x, y, t, alpha, beta):
        return beta * rho(x, y, t)

    def c(x, y, t, alpha, beta):
        return np.zeros_like(np.asarray(x, dtype=float))

    def f(x, y, t, alpha, beta):
        return -0.5 * np.sqrt(x * x + y * y) / tau(t) ** 1.5

    if exact_alpha:
        alphas = np.array([[0.0, 0.0]])
        alpha_labels = ("exact-direction",)

        def b(x, y, t, alpha, beta):
            gx, gy = grad(x, y, t)
            norm = np.sqrt(gx * gx + gy * gy)
            safe = np.maximum(norm, 1e-300)
            m = 0.5 / np.sqrt(tau(t))
            return (
                np.where(norm > 0, -m * gx / safe, 0.0),
                np.where(norm > 0, -m * gy / safe, 0.0),
            )

    else:
        angles = 2.0 * np.pi * np.arange(n_alpha) / n_alpha
        alphas = np.column_stack([np.cos(angles), np.sin(angles)])
        alpha_labels = tuple(f"dir({a:.4f})" for a in angles)

        def b(x, y, t, alpha, beta):
            m = 0.5 / np.sqrt(tau(t))
            shape = np.broadcast(x, y).shape
            return (
                np.broadcast_to(m * alpha[0], shape),
                np.broadcast_to(m * alpha[1], shape),
            )

    betas = np.linspace(0.25, 0.5, n_beta)
    controls = ControlGrid(
        alphas,
        betas,
        alpha_labels,
        tuple(f"beta={v:.4f}" for v in betas),
    )

    def continuous_residual(x, y, t, value_v, grad_v, lap_v, dt_v):
        """Residual of an arbitrary smooth function against the continuous
        min-max equation (exact over the compact control sets)."""
        rx = rho(x, y, t)
        diff = rx * lap_v
        best = np.where(diff >= 0, -0.5 * diff, -0.25 * diff)
        gx, gy = grad_v
        m = 0.5 / np.sqrt(tau(t))
        return -dt_v + best + m * np.sqrt(gx * gx + gy * gy) - f(x, y, t, None, None)

    return IsaacsProblem(
        name="experiment1" + ("-exact-alpha" if exact_alpha else ""),
        domain=DomainSpec(kind="triangle"),
        controls=controls,
        a=a,
        b=b,
        c=c,
        f=f,
        g=lambda x, y, t: value(x, y, t),
        v_T=lambda x, y: value(x, y, T),
        T=T,
        time_dependent=True,
        g_time_dependent=True,
        exact=exact,
        grad_g=grad,
        lap_g=lap,
        grad_v_T=lambda x, y: grad(x, y, T),
        continuous_residual=continuous_residual,
    )


def tag_chase(
    n_alpha: int = 16,
    n_beta: int = 16,
    r: float = 0.5,
    R: float = 2.0,
    T: float = 1.0,
) -> IsaacsProblem:
    """Pursuit game on an annulus in the pursuer's moving frame.

    The evader escapes through the outer circle (value 1) and is tagged at
    the inner circle (value 0); a = max(y, 0.1) and the drift difference is
    b = (4 sin beta - 0.5 sin alpha, cos beta - cos alpha).  Coefficients are
    time independent, so the operator family is assembled once.
    """
    if not (0 < r < R):
        raise ParameterError(f"annulus radii must satisfy 0 < r < R, got {r}, {R}")
    alphas = -np.pi + 2.0 * np.pi * np.arange(n_alpha) / n_alpha
    betas = -np.pi + 2.0 * np.pi * np.arange(n_beta) / n_beta
    controls = ControlGrid(
        alphas,
        betas,
        tuple(f"alpha={v:.4f}" for v in alphas),
        tuple(f"beta={v:.4f}" for v in betas),
    )
    width = R - r

    def a(x, y, t, alpha, beta):
        return np.maximum(y, 0.1)

    def b(x, y, t, alpha, beta):
        shape = np.broadcast(x, y).shape
        return (
            np.broadcast_to(4.0 * np.sin(beta) - 0.5 * np.sin(alpha), shape),
            np.broadcast_to(np.cos(beta) - np.cos(alpha), shape),
        )

    def zero(x, y, t, alpha, beta):
        return np.zeros_like(np.asarray(x, dtype=float))

    def g(x, y, t):
        rad = np.sqrt(x * x + y * y)
        return np.clip((rad - r) / width, 0.0, 1.0)

    def grad_g(x, y, t):
        rad = np.maximum(np.sqrt(x * x + y * y), 1e-300)
        return x / (rad * width), y / (rad * width)

    def lap_g(x, y, t):
        rad = np.maximum(np.sqrt(x * x + y * y), 1e-300)
        return 1.0 / (rad * width)

    return IsaacsProblem(
        name="tag-chase",
        domain=DomainSpec(kind="annulus", r=r, R=R),
        controls=controls,
        a=a,
        b=b,
        c=zero,
        f=zero,
        g=g,
        v_T=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
        T=T,
        time_dependent=False,
        g_time_dependent=False,
        grad_g=grad_g,
        lap_g=lap_g,
        grad_v_T=lambda x, y: (
            np.zeros_like(np.asarray(x, dtype=float)),
            np.zeros_like(np.asarray(x, dtype=float)),
        ),
        notes=(
            "terminal data 1 conflicts with boundary data 0 on the inner circle; "
            "the projected initial state uses the boundary data there",
        ),
    )


def build_domain_mesh(
    domain: DomainSpec,
    level: int | None = None,
    n_radial: int | None = None,
    n_angular: int | None = None,
) -> Mesh:
    """Mesh a domain descriptor with the given resolution knobs."""
    if domain.kind == "triangle":
        return generate_triangle_mesh(2 if level is None else level)
    if domain.kind == "annulus":
        return generate_annulus_mesh(
            domain.r,
            domain.R,
            13 if n_radial is None else n_radial,
            48 if n_angular is None else n_angular,
        )
    with open(domain.path, "r", encoding="utf-8") as fh:
        return load_mesh(fh.read())


def pde_residual(
    problem: IsaacsProblem, fn: SmoothFunction, x, y, t
):
    """Residual of fn against the continuous equation at (x, y, t).

    Uses the problem's closed-form min-max when available, otherwise the
    finite control grids (still independent of any mesh or time step).
    """
    value = fn.value(x, y, t)
    grad = fn.grad(x, y, t)
    lap = fn.lap(x, y, t)
    dt = fn.dt(x, y, t)
    if problem.continuous_residual is not None:
        return problem.continuous_residual(x, y, t, value, grad, lap, dt)
    x = np.asarray(x, dtype=float)
    best_beta = None
    for beta in problem.controls.betas:
        best_alpha = None
        for alpha in problem.controls.alphas:
            bx, by = problem.b(x, y, t, alpha, beta)
            term = (
                -problem.a(x, y, t, alpha, beta) * lap
                - (bx * grad[0] + by * grad[1])
                + problem.c(x, y, t, alpha, beta) * value
                - problem.f(x, y, t, alpha, beta)
            )
            best_alpha = term if best_alpha is None else np.maximum(best_alpha, term)
        best_beta = (
            best_alpha if best_beta is None else np.minimum(best_beta, best_alpha)
        )
    return -dt + best_beta


def _sample_points(mesh: Mesh, n: int, rng: np.random.Generator):
    """Uniform random points inside mesh elements."""
    probs = mesh.element_areas / mesh.element_areas.sum()
    tri = rng.choice(mesh.n_triangles, size=n, p=probs)
    u = rng.random((n, 2))
    flip = u.sum(axis=1) > 1.0
    u[flip] = 1.0 - u[flip]
    bary = np.column_stack([1.0 - u.sum(axis=1), u[:, 0], u[:, 1]])
    pts = (mesh.vertices[mesh.triangles[tri]] * bary[:, :, None]).sum(axis=1)
    return pts[:, 0], pts[:, 1]


def validate_problem(
    problem: IsaacsProblem, mesh: Mesh, samples: int = 200, seed: int = 0
) -> ValidationReport:
    """Randomized admissibility checks of the problem data on a mesh.

    Checks a >= 0, c >= 0, and finiteness of a, b, c, f at random interior
    points, times, and control pairs; compares terminal and boundary data at
    boundary nodes (a mismatch is reported, not fatal).
    """
    if samples < 1:
        raise ParameterError("validation needs at least one sample")
    rng = np.random.default_rng(seed)
    x, y = _sample_points(mesh, samples, rng)
    t = rng.uniform(0.0, problem.T, size=samples)
    ia = rng.integers(0, problem.controls.n_alpha, size=samples)
    ib = rng.integers(0, problem.controls.n_beta, size=samples)

    violations: list[tuple[str, float, tuple]] = []
    for i in range(samples):
        alpha = problem.controls.alphas[ia[i]]
        beta = problem.controls.betas[ib[i]]
        where = (float(x[i]), float(y[i]), float(t[i]), int(ia[i]), int(ib[i]))
        av = float(problem.a(x[i], y[i], t[i], alpha, beta))
        cv = float(problem.c(x[i], y[i], t[i], alpha, beta))
        bx, by = problem.b(x[i], y[i], t[i], alpha, beta)
        fv = float(problem.f(x[i], y[i], t[i], alpha, beta))
        if not np.isfinite(av) or av < 0:
            violations.append(("a", av, where))
        if not np.isfinite(cv) or cv < 0:
            violations.append(("c", cv, where))
        if not (np.isfinite(float(bx)) and np.isfinite(float(by))):
            violations.append(("b", float(bx), where))
        if not np.isfinite(fv):
            violations.append(("f", fv, where))

    xb = mesh.vertices[mesh.n_interior :, 0]
    yb = mesh.vertices[mesh.n_interior :, 1]
    vT_b = np.broadcast_to(np.asarray(problem.v_T(xb, yb), dtype=float), xb.shape)
    g_b = np.broadcast_to(
        np.asarray(problem.g(xb, yb, problem.T), dtype=float), xb.shape
    )
    mismatch = int((np.abs(vT_b - g_b) > 1e-12).sum())
    return ValidationReport(
        samples=samples,
        violations=tuple(violations),
        boundary_mismatch=mismatch,
        notes=problem.notes,
    )


def _parse_controls(text: str, what: str) -> np.ndarray:
    text = text.strip()
    if text.startswith("range:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise ParameterError(
                f"{what}: expected range:lo:hi:count, got {text!r}"
            )
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
        if count < 1:
            raise ParameterError(f"{what}: count must be at least 1")
        return np.linspace(lo, hi, count)
    if text.startswith("angles:"):
        parts = text.split(":")
        if len(parts) != 2:
            raise ParameterError(f"{what}: expected angles:count, got {text!r}")
        count = int(parts[1])
        if count < 1:
            raise ParameterError(f"{what}: count must be at least 1")
        return -np.pi + 2.0 * np.pi * np.arange(count) / count
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ParameterError(f"{what}: cannot parse control list {text!r}") from exc


def problem_from_config(text: str) -> IsaacsProblem:
    """Build a problem from INI-format config text.

    Sections: [problem] name/T; [domain] kind plus radii or mesh path;
    [controls] alphas/betas as range:lo:hi:n, angles:n, or a comma list;
    [coefficients] expressions a, b_x, b_y, c, f of x, y, t, alpha, beta;
    [data] expressions g (may use t) and v_T.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParameterError(f"cannot parse problem config: {exc}") from exc

    for section in ("domain", "controls", "coefficients", "data"):
        if not parser.has_section(section):
            raise ParameterError(f"problem config is missing the [{section}] section")

    name = parser.get("problem", "name", fallback="user-problem")
    T = parser.getfloat("problem", "T", fallback=1.0)

    kind = parser.get("domain", "kind", fallback=None)
    if kind is None:
        raise ParameterError("[domain] needs kind = triangle | annulus | mesh")
    if kind == "annulus":
        domain = DomainSpec(
            kind="annulus",
            r=parser.getfloat("domain", "r", fallback=0.5),
            R=parser.getfloat("domain", "R", fallback=2.0),
        )
    elif kind == "mesh":
        domain = DomainSpec(kind="mesh", path=parser.get("domain", "path", fallback=None))
    else:
        domain = DomainSpec(kind=kind)

    alphas = _parse_controls(parser.get("controls", "alphas", fallback=""), "alphas")
    betas = _parse_controls(parser.get("controls", "betas", fallback=""), "betas")
    controls = ControlGrid.make(alphas, betas)

    consts = {"T": T}

    def coeff(key: str, default: str | None = None) -> Callable:
        raw = parser.get("coefficients", key, fallback=default)
        if raw is None:
            raise ParameterError(f"[coefficients] is missing {key!r}")
        return compile_expression(raw, consts)

    a_fn = coeff("a")
    bx_fn = coeff("b_x", "0")
    by_fn = coeff("b_y", "0")
    c_fn = coeff("c", "0")
    f_fn = coeff("f", "0")

    g_raw = parser.get("data", "g", fallback=None)
    vT_raw = parser.get("data", "v_T", fallback=None)
    if g_raw is None or vT_raw is None:
        raise ParameterError("[data] needs both g and v_T")
    g_fn = compile_expression(g_raw, consts)
    vT_fn = compile_expression(vT_raw, consts)

    time_dependent = any(
        "t" in _names(parser.get("coefficients", k, fallback="0"))
        for k in ("a", "b_x", "b_y", "c", "f")
    )
    g_time_dependent = "t" in _names(g_raw)

    def b(x, y, t, alpha, beta):
        return (
            bx_fn(x, y, t, alpha, beta),
            by_fn(x, y, t, alpha, beta),
        )

    return IsaacsProblem(
        name=name,
        domain=domain,
        controls=controls,
        a=lambda x, y, t, alpha, beta: a_fn(x, y, t, alpha, beta),
        b=b,
        c=lambda x, y, t, alpha, beta: c_fn(x, y, t, alpha, beta),
        f=lambda x, y, t, alpha, beta: f_fn(x, y, t, alpha, beta),
        g=lambda x, y, t: g_fn(x, y, t),
        v_T=lambda x, y: vT_fn(x, y, T),
        T=T,
        time_dependent=time_dependent,
        g_time_dependent=g_time_dependent,
    )


def _names(expr: str) -> set[str]:
    import ast

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError:
        return set()
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)}
