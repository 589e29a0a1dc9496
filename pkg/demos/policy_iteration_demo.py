"""Watch the policy iteration work through one backward sweep.

Solves the benchmark problem on a mid-size mesh and reports, per time step,
how many maximization passes and linear solves the iteration needed, plus
the sup-norm bookkeeping against the explicit stability bound.
"""

import numpy as np

from isaacsfem import SchemeConfig, experiment1, generate_triangle_mesh, solve_isaacs

LEVEL = 3


def main():
    problem = experiment1()
    mesh = generate_triangle_mesh(LEVEL)
    print(
        f"level {LEVEL}: {mesh.n_vertices} vertices "
        f"({mesh.n_interior} interior), dx = {mesh.dx:.4f}"
    )
    print(
        f"control grid: {problem.controls.n_alpha} drift directions x "
        f"{problem.controls.n_beta} diffusion levels"
    )

    series = solve_isaacs(problem, mesh, SchemeConfig())
    print(f"auto-selected h = {series.h:.4f} -> {len(series.times) - 1} steps")
    print()
    print("step    t     outer  inner  solves  residual")
    for i, stats in enumerate(series.howard_stats):
        t = series.times[i + 1]
        print(
            f"{i:4d}  {t:5.3f}  {stats.outer_iterations:5d}  "
            f"{stats.inner_iterations:5d}  {stats.linear_solves:6d}  "
            f"{stats.residual:.2e}"
        )

    exact = problem.exact.value(mesh.vertices[:, 0], mesh.vertices[:, 1], 0.0)
    print()
    print(f"sup norm of trajectory: {series.sup_norm:.4f}")
    print(f"stability bound:        {series.stability_bound:.4f}")
    print(f"nodal error at t = 0:   {np.abs(series.final - exact).max():.3e}")


if __name__ == "__main__":
    main()
