"""Command-line entry point: mesh checks, convergence studies, field export,
and problem validation.

Every file-writing subcommand drops a manifest.json next to its artifacts
recording the resolved flags, the mesh provenance, a hash of the
configuration, and the wall time.  Re-running a subcommand with the flags
from a manifest reproduces the other artifacts byte for byte (the solver is
deterministic); only recorded runtimes differ.

Exit codes: 0 success, 1 property failure (mesh not strictly acute, data
violating admissibility), 2 input error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import convergence_study, format_convergence_csv
from .errors import IsaacsFemError, ParameterError, SolverError, StudyError
from .mesh import Mesh, check_strict_acuteness, load_mesh
from .problems import (
    DomainSpec,
    IsaacsProblem,
    build_domain_mesh,
    experiment1,
    problem_from_config,
    tag_chase,
    validate_problem,
)
from .solver import SchemeConfig, solve_isaacs

__all__ = ["RunManifest", "resolve_thread_count", "main"]

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3

THREADS_ENV_VAR = "ISAACS_FEM_THREADS"


@dataclass(frozen=True)
class RunManifest:
    """What a subcommand ran and what it produced."""

    subcommand: str
    flags: dict
    mesh: str
    config_hash: str
    wall_seconds: float
    artifacts: tuple[str, ...]

    def to_json(self) -> str:
        payload = {
            "subcommand": self.subcommand,
            "flags": self.flags,
            "mesh": self.mesh,
            "config_hash": self.config_hash,
            "wall_seconds": self.wall_seconds,
            "artifacts": list(self.artifacts),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        try:
            payload = json.loads(text)
            return cls(
                subcommand=payload["subcommand"],
                flags=payload["flags"],
                mesh=payload["mesh"],
                config_hash=payload["config_hash"],
                wall_seconds=payload["wall_seconds"],
                artifacts=tuple(payload["artifacts"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParameterError(f"cannot parse manifest: {exc}") from exc


def resolve_thread_count(value: int | None) -> int:
    """Flag value if given, else the environment variable, else 1."""
    if value is None:
        env = os.environ.get(THREADS_ENV_VAR)
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError as exc:
            raise ParameterError(
                f"{THREADS_ENV_VAR}={env!r} is not an integer"
            ) from exc
    if value < 1:
        raise ParameterError(f"thread count must be at least 1, got {value}")
    return value


def _flags_of(args: argparse.Namespace) -> dict:
    flags = {k: v for k, v in vars(args).items() if k != "handler"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in flags.items()}


def _config_hash(subcommand: str, flags: dict) -> str:
    canon = json.dumps({"subcommand": subcommand, "flags": flags}, sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _finish(
    args: argparse.Namespace,
    out_dir: Path,
    mesh_provenance: str,
    started: float,
    artifacts: list[str],
) -> RunManifest:
    flags = _flags_of(args)
    manifest = RunManifest(
        subcommand=args.subcommand,
        flags=flags,
        mesh=mesh_provenance,
        config_hash=_config_hash(args.subcommand, flags),
        wall_seconds=time.perf_counter() - started,
        artifacts=tuple(artifacts),
    )
    _write_text(out_dir / "manifest.json", manifest.to_json())
    return manifest


def _read_file(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc}") from exc


def _build_problem(args: argparse.Namespace) -> IsaacsProblem:
    if getattr(args, "config", None):
        return problem_from_config(_read_file(args.config))
    knobs = {}
    for name in ("n_alpha", "n_beta", "T"):
        value = getattr(args, name, None)
        if value is not None:
            knobs[name] = value
    name = args.problem
    if name in ("exp1", "experiment1"):
        return experiment1(exact_alpha=bool(args.exact_alpha), **knobs)
    if name in ("tag-chase", "tag_chase"):
        if args.exact_alpha:
            raise ParameterError("--exact-alpha only applies to exp1")
        return tag_chase(**knobs)
    raise ParameterError(f"unknown problem {name!r} (try exp1 or tag-chase)")


def _build_config(args: argparse.Namespace) -> SchemeConfig:
    knobs = {}
    for flag, field in (
        ("h", "h"),
        ("eta", "eta"),
        ("max_inner", "max_inner"),
        ("max_outer", "max_outer"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            knobs[field] = value
    if getattr(args, "warm_start", False):
        knobs["warm_start_policy"] = True
    return SchemeConfig(**knobs)


def _problem_mesh(args: argparse.Namespace, problem: IsaacsProblem) -> tuple[Mesh, str]:
    mesh = build_domain_mesh(
        problem.domain,
        level=getattr(args, "level", None),
        n_radial=getattr(args, "n_radial", None),
        n_angular=getattr(args, "n_angular", None),
    )
    if problem.domain.kind == "triangle":
        level = args.level if args.level is not None else 2
        provenance = f"triangle level {level}"
    elif problem.domain.kind == "annulus":
        nr = args.n_radial if args.n_radial is not None else 13
        na = args.n_angular if args.n_angular is not None else 48
        provenance = (
            f"annulus r={problem.domain.r:g} R={problem.domain.R:g} {nr}x{na}"
        )
    else:
        digest = hashlib.sha256(
            _read_file(problem.domain.path).encode("utf-8")
        ).hexdigest()
        provenance = f"file {problem.domain.path} sha256:{digest[:12]}"
    return mesh, provenance


def format_field_csv(mesh: Mesh, values: np.ndarray) -> str:
    """Nodal snapshot as x,y,value rows; floats keep full precision."""
    lines = ["x,y,value"]
    for (x, y), v in zip(mesh.vertices, values):
        lines.append(f"{float(x)!r},{float(y)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"


def format_mesh_csv(mesh: Mesh) -> str:
    """Triangle connectivity as i,j,k vertex-index rows."""
    lines = ["i,j,k"]
    for i, j, k in mesh.triangles:
        lines.append(f"{i},{j},{k}")
    return "\n".join(lines) + "\n"


def format_field_vtk(mesh: Mesh, values: np.ndarray, title: str) -> str:
    """Legacy-ASCII unstructured-grid file (points, triangles, point data)."""
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    for x, y in mesh.vertices:
        lines.append(f"{float(x)!r} {float(y)!r} 0.0")
    lines.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    for i, j, k in mesh.triangles:
        lines.append(f"3 {i} {j} {k}")
    lines.append(f"CELL_TYPES {mesh.n_triangles}")
    lines.extend("5" for _ in range(mesh.n_triangles))
    lines.append(f"POINT_DATA {mesh.n_vertices}")
    lines.append("SCALARS value double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(repr(float(v)) for v in values)
    return "\n".join(lines) + "\n"


def cmd_check_mesh(args: argparse.Namespace) -> int:
    if args.mesh is not None:
        mesh = load_mesh(_read_file(args.mesh))
    elif args.annulus:
        mesh = build_domain_mesh(
            DomainSpec(kind="annulus", r=args.r, R=args.R),
            n_radial=args.n_radial,
            n_angular=args.n_angular,
        )
    else:
        mesh = build_domain_mesh(DomainSpec(kind="triangle"), level=args.level)
    report = check_strict_acuteness(mesh)
    print(f"{mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
    print(report.summary())
    return EXIT_OK if report.is_strictly_acute else EXIT_PROPERTY


def cmd_convergence(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    problem = _build_problem(args)
    if problem.domain.kind != "triangle":
        raise ParameterError(
            "convergence studies need the refinable triangle domain"
        )
    levels = _parse_levels(args.levels)
    cfg = _build_config(args)
    threads = resolve_thread_count(args.threads)
    out_dir = Path(args.out_dir)
    csv_name = "convergence.csv"

    try:
        records = convergence_study(
            problem, levels, cfg, policy=args.policy, threads=threads
        )
    except StudyError as exc:
        _write_text(out_dir / csv_name, format_convergence_csv(exc.records))
        _finish(args, out_dir, f"triangle levels {args.levels}", started, [csv_name])
        print(f"solver failure: {exc}", file=sys.stderr)
        print(f"wrote {len(exc.records)} completed row(s) to {out_dir / csv_name}")
        return EXIT_SOLVER

    _write_text(out_dir / csv_name, format_convergence_csv(records))
    _finish(args, out_dir, f"triangle levels {args.levels}", started, [csv_name])
    stalled = sum(r.non_converged_steps for r in records)
    if stalled:
        message = f"{stalled} Howard step(s) hit the iteration caps"
        if args.strict:
            print(f"solver failure: {message}", file=sys.stderr)
            return EXIT_SOLVER
        print(f"warning: {message}", file=sys.stderr)
    print(f"wrote {len(records)} row(s) to {out_dir / csv_name}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    problem = _build_problem(args)
    mesh, provenance = _problem_mesh(args, problem)
    cfg = _build_config(args)
    resolve_thread_count(args.threads)  # validated and recorded in the manifest
    out_dir = Path(args.out_dir)
    snapshots = args.snapshot if args.snapshot else [0.0]

    series = solve_isaacs(problem, mesh, cfg, policy=args.policy)
    if args.strict and series.non_converged_steps:
        print(
            f"solver failure: {len(series.non_converged_steps)} Howard step(s) "
            "hit the iteration caps",
            file=sys.stderr,
        )
        return EXIT_SOLVER

    mesh_name = f"{problem.name}-mesh.csv"
    _write_text(out_dir / mesh_name, format_mesh_csv(mesh))
    artifacts = [mesh_name]
    for wanted in snapshots:
        t, values = series.at_time(float(wanted))
        stem = f"{problem.name}-t{t:.3f}"
        _write_text(out_dir / f"{stem}.csv", format_field_csv(mesh, values))
        _write_text(
            out_dir / f"{stem}.vtk",
            format_field_vtk(mesh, values, f"{problem.name} at t={t:.3f}"),
        )
        artifacts.extend([f"{stem}.csv", f"{stem}.vtk"])
        print(
            f"t={t:.3f}: {len(values)} values in "
            f"[{values.min():.6g}, {values.max():.6g}]"
        )
    _finish(args, out_dir, provenance, started, artifacts)
    print(f"wrote {len(artifacts)} artifact(s) to {out_dir}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    problem = _build_problem(args)
    mesh, provenance = _problem_mesh(args, problem)
    report = validate_problem(problem, mesh, samples=args.samples, seed=args.seed)
    text = report.summary()
    print(text)
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
        _write_text(out_dir / "validation.txt", text + "\n")
        _finish(args, out_dir, provenance, started, ["validation.txt"])
    return EXIT_OK if report.ok else EXIT_PROPERTY


def _parse_levels(text: str) -> list[int]:
    text = text.strip()
    try:
        if ".." in text:
            lo_text, hi_text = text.split("..")
            lo, hi = int(lo_text), int(hi_text)
            if hi < lo:
                raise ValueError("empty range")
            return list(range(lo, hi + 1))
        return [int(part) for part in text.split(",")]
    except ValueError as exc:
        raise ParameterError(
            f"cannot parse levels {text!r}; use lo..hi or a comma list"
        ) from exc


def _add_problem_flags(sub: argparse.ArgumentParser):
    sub.add_argument("--problem", default="exp1", help="exp1 or tag-chase")
    sub.add_argument("--config", help="problem config file (overrides --problem)")
    sub.add_argument("--n-alpha", type=int, dest="n_alpha")
    sub.add_argument("--n-beta", type=int, dest="n_beta")
    sub.add_argument("--T", type=float, dest="T", help="horizon override")
    sub.add_argument(
        "--exact-alpha",
        action="store_true",
        dest="exact_alpha",
        help="replace the drift grid by the closed-form optimal direction",
    )


def _add_config_flags(sub: argparse.ArgumentParser):
    sub.add_argument("--h", type=float, help="time step (default: largest stable)")
    sub.add_argument("--eta", type=float, help="policy-iteration tolerance")
    sub.add_argument("--max-inner", type=int, dest="max_inner")
    sub.add_argument("--max-outer", type=int, dest="max_outer")
    sub.add_argument(
        "--warm-start",
        action="store_true",
        dest="warm_start",
        help="seed each step's policy with the previous step's",
    )
    sub.add_argument(
        "--policy",
        default="advection-explicit",
        choices=("advection-explicit", "fully-implicit"),
        help="operator splitting policy",
    )
    sub.add_argument(
        "--strict",
        action="store_true",
        help="treat non-converged policy iterations as fatal",
    )
    sub.add_argument(
        "--threads",
        type=int,
        help=f"worker cap (default: ${THREADS_ENV_VAR} or 1)",
    )


def _add_mesh_resolution_flags(sub: argparse.ArgumentParser):
    sub.add_argument("--level", type=int, help="triangle refinement level")
    sub.add_argument("--n-radial", type=int, dest="n_radial")
    sub.add_argument("--n-angular", type=int, dest="n_angular")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isaacs-fem",
        description="Monotone P1 finite elements for Isaacs equations",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    check = subparsers.add_parser(
        "check-mesh", help="report strict acuteness of a mesh"
    )
    source = check.add_mutually_exclusive_group(required=True)
    source.add_argument("--triangle", action="store_true")
    source.add_argument("--annulus", action="store_true")
    source.add_argument("--mesh", help="mesh file path")
    check.add_argument("--level", type=int, default=2)
    check.add_argument("--r", type=float, default=0.5)
    check.add_argument("--R", type=float, default=2.0)
    check.add_argument("--n-radial", type=int, dest="n_radial", default=13)
    check.add_argument("--n-angular", type=int, dest="n_angular", default=48)
    check.set_defaults(handler=cmd_check_mesh)

    conv = subparsers.add_parser(
        "convergence", help="error table over refinement levels"
    )
    _add_problem_flags(conv)
    _add_config_flags(conv)
    conv.add_argument("--levels", default="2..4", help="lo..hi or comma list")
    conv.add_argument("--out-dir", dest="out_dir", default="convergence-out")
    conv.set_defaults(handler=cmd_convergence)

    solve = subparsers.add_parser(
        "solve", help="solve and export nodal value snapshots"
    )
    _add_problem_flags(solve)
    _add_config_flags(solve)
    _add_mesh_resolution_flags(solve)
    solve.add_argument(
        "--snapshot",
        type=float,
        action="append",
        help="time to export (repeatable; default 0)",
    )
    solve.add_argument("--out-dir", dest="out_dir", default="solve-out")
    solve.set_defaults(handler=cmd_solve)

    val = subparsers.add_parser(
        "validate", help="randomized admissibility checks of problem data"
    )
    _add_problem_flags(val)
    _add_mesh_resolution_flags(val)
    val.add_argument("--samples", type=int, default=200)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--out-dir", dest="out_dir", default=None)
    val.set_defaults(handler=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except IsaacsFemError as exc:
        print(f"property failure: {exc}", file=sys.stderr)
        return EXIT_PROPERTY


if __name__ == "__main__":
    sys.exit(main())
