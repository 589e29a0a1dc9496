"""Value function of the pursuit game on the annulus.

The evader wins (value 1) by reaching the outer circle, the pursuer wins
(value 0) by closing to the inner circle; the pursuer's horizontal speed
advantage makes the picture asymmetric.  Solves backward to t = 0 and
renders a filled contour with the annulus hole left open.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import matplotlib.tri as mtri
import numpy as np

from isaacsfem import SchemeConfig, build_domain_mesh, solve_isaacs, tag_chase

OUT = "pursuit_value.png"


def main():
    problem = tag_chase()
    mesh = build_domain_mesh(problem.domain, n_radial=9, n_angular=40)
    print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")

    series = solve_isaacs(problem, mesh, SchemeConfig())
    values = series.final
    print(f"time step h = {series.h:.4f}, {len(series.times) - 1} steps")
    print(f"value range at t = 0: [{values.min():.4f}, {values.max():.4f}]")
    for step, stats in enumerate(series.howard_stats):
        if step % 5 == 0:
            print(
                f"  step {step}: {stats.outer_iterations} outer / "
                f"{stats.inner_iterations} inner iterations, "
                f"residual {stats.residual:.2e}"
            )

    tri = mtri.Triangulation(
        mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles
    )
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    image = ax.tricontourf(tri, values, levels=np.linspace(0.0, 1.0, 21))
    ax.set_aspect("equal")
    fig.colorbar(image, ax=ax, label="value at t = 0")
    fig.tight_layout()
    fig.savefig(OUT, dpi=150)
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
