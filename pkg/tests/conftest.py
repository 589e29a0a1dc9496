"""Shared builders for the test suite."""

import numpy as np

from isaacsfem.assembly import ControlGrid
from isaacsfem.problems import DomainSpec, IsaacsProblem


def zeros_xy(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def plain_problem(
    a_val: float,
    b_vec: tuple[float, float],
    boundary: float = 0.0,
    terminal: float = 0.0,
    name: str = "plain",
) -> IsaacsProblem:
    """Single-control problem with constant coefficients and zero c, f."""
    controls = ControlGrid(
        np.array([0.0]), np.array([0.0]), ("only",), ("only",)
    )

    def a(x, y, t, alpha, beta):
        return np.full(np.broadcast(x, y).shape, a_val)

    def b(x, y, t, alpha, beta):
        shape = np.broadcast(x, y).shape
        return np.broadcast_to(b_vec[0], shape), np.broadcast_to(b_vec[1], shape)

    def zero(x, y, t, alpha, beta):
        return zeros_xy(x, y)

    return IsaacsProblem(
        name=name,
        domain=DomainSpec(kind="triangle"),
        controls=controls,
        a=a,
        b=b,
        c=zero,
        f=zero,
        g=lambda x, y, t: np.full(np.broadcast(x, y).shape, boundary),
        v_T=lambda x, y: np.full(np.broadcast(x, y).shape, terminal),
        T=1.0,
        time_dependent=False,
    )
