"""Refine the benchmark problem and watch the errors fall.

Runs the radially symmetric game on triangle levels 2..4 (add 5 for a
longer run), prints the error table, and saves a log-log plot of the three
error norms against 1/dx.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from isaacsfem import SchemeConfig, convergence_study, experiment1, format_convergence_csv

LEVELS = [2, 3, 4]
OUT = "convergence_demo.png"


def main():
    problem = experiment1()
    print(f"problem: {problem.name}, horizon T = {problem.T}")
    print(f"levels: {LEVELS} (auto-selected time steps)")

    records = convergence_study(problem, LEVELS, SchemeConfig())
    print()
    print(format_convergence_csv(records))

    inv_dx = [1.0 / r.dx for r in records]
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for label, series in (
        ("sup", [r.err_inf for r in records]),
        ("L2", [r.err_l2 for r in records]),
        ("H1", [r.err_h1 for r in records]),
    ):
        ax.loglog(inv_dx, series, "o-", label=label)
    # slope -1 guide through the first H1 point
    ax.loglog(inv_dx, [records[0].err_h1 * (inv_dx[0] / x) for x in inv_dx],
              "k--", linewidth=0.8, label="slope -1")
    ax.set_xlabel("1 / dx")
    ax.set_ylabel("error at t = 0")
    ax.legend()
    fig.tight_layout()
    fig.savefig(OUT, dpi=150)
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
