"""Artificial diffusion sizing, coefficient splitting, and monotonicity audits."""

import math

import numpy as np
import pytest
from conftest import plain_problem

from isaacsfem.assembly import CoefficientField, FamilyAssembler, OperatorFamily
from isaacsfem.errors import MonotonicityError, ParameterError, StabilizationError
from isaacsfem.mesh import check_strict_acuteness, generate_triangle_mesh
from isaacsfem.problems import experiment1
from isaacsfem.solver import assemble_step_family
from isaacsfem.stabilization import (
    SPLITTING_POLICIES,
    apply_splitting_policy,
    compute_artificial_viscosity,
    max_stable_timestep,
    operator_stability_norms,
    verify_monotonicity,
)
from test_assembly import manual_split

ZERO_B = CoefficientField.constant((0.0, 0.0))
ZERO_C = CoefficientField.constant(0.0)


def exp1_family(level, h_placeholder=1.0):
    p = experiment1()
    m = generate_triangle_mesh(level)
    theta = check_strict_acuteness(m).theta
    return assemble_step_family(
        p, m, theta, "advection-explicit", 0.0, 0.0, h=h_placeholder
    ), m


def test_no_advection_no_reaction_no_viscosity():
    m = generate_triangle_mesh(3)
    nu = compute_artificial_viscosity(m, ZERO_B, ZERO_C, math.pi / 6)
    np.testing.assert_array_equal(nu, np.zeros(m.n_vertices))


def test_non_acute_angle_rejected():
    m = generate_triangle_mesh(2)
    with pytest.raises(StabilizationError):
        compute_artificial_viscosity(m, ZERO_B, ZERO_C, 0.0)


def test_equilateral_element_hand_value():
    m = generate_triangle_mesh(0)
    theta = check_strict_acuteness(m).theta
    assert theta == pytest.approx(math.pi / 6, abs=1e-12)
    nu = compute_artificial_viscosity(
        m, CoefficientField.constant((1.0, 0.0)), ZERO_C, theta
    )
    # |b| = 1 and sin(theta) = 1/2, so nu = 1 / (0.5 |grad hat| vol) with the
    # normalized hat gradient; for this element that value is exactly 1
    vol = m.element_areas[0]
    grad_hat = np.sqrt((m.hat_gradients[0, 0] ** 2).sum()) / m.l1_norms[0] * vol
    expected = 1.0 / (0.5 * grad_hat / vol * vol)
    assert expected == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(nu, np.full(3, expected), rtol=1e-12)


def test_viscosity_scales_linearly_with_advection():
    m = generate_triangle_mesh(3)
    theta = check_strict_acuteness(m).theta
    b = CoefficientField.from_closure(lambda x, y: (y + 2.0, x - 0.5), vector=True)
    b2 = CoefficientField.from_closure(
        lambda x, y: (2.0 * (y + 2.0), 2.0 * (x - 0.5)), vector=True
    )
    nu = compute_artificial_viscosity(m, b, ZERO_C, theta)
    nu2 = compute_artificial_viscosity(m, b2, ZERO_C, theta)
    np.testing.assert_allclose(nu2, 2.0 * nu, rtol=1e-14)


def test_sufficient_natural_diffusion_means_no_topup():
    prob = plain_problem(1.0, (0.1, 0.0))
    m = generate_triangle_mesh(3)
    theta = check_strict_acuteness(m).theta
    (split,) = apply_splitting_policy(prob, "advection-explicit", m, theta)
    assert (split.nu_explicit < 1.0).all()
    np.testing.assert_array_equal(split.artificial_topup, np.zeros(m.n_vertices))
    np.testing.assert_array_equal(split.a_explicit, split.nu_explicit)
    # the split is exact: explicit and implicit diffusion add up to a = 1
    np.testing.assert_allclose(
        split.a_explicit + split.a_implicit, np.ones(m.n_vertices), rtol=1e-14
    )


def test_degenerate_diffusion_goes_fully_artificial():
    prob = plain_problem(0.0, (1.0, 0.0))
    m = generate_triangle_mesh(3)
    theta = check_strict_acuteness(m).theta
    (split,) = apply_splitting_policy(prob, "advection-explicit", m, theta)
    np.testing.assert_array_equal(split.a_explicit, split.nu_explicit)
    np.testing.assert_array_equal(split.artificial_topup, split.nu_explicit)
    np.testing.assert_array_equal(split.a_implicit, np.zeros(m.n_vertices))
    assert (split.nu_explicit > 0).all()


def test_unknown_policy_rejected():
    prob = plain_problem(1.0, (0.0, 0.0))
    m = generate_triangle_mesh(2)
    assert "advection-explicit" in SPLITTING_POLICIES
    with pytest.raises(ParameterError):
        apply_splitting_policy(prob, "imex", m, math.pi / 6)


@pytest.mark.parametrize("policy", SPLITTING_POLICIES)
def test_split_diffusion_dominates_its_viscosity_floor(policy):
    p = experiment1()
    m = generate_triangle_mesh(3)
    theta = check_strict_acuteness(m).theta
    for split in apply_splitting_policy(p, policy, m, theta):
        assert (split.a_explicit >= split.nu_explicit).all()
        assert (split.a_implicit >= split.nu_implicit).all()


def test_topup_concentrates_where_diffusion_degenerates():
    p = experiment1()
    m = generate_triangle_mesh(4)
    theta = check_strict_acuteness(m).theta
    splits = apply_splitting_policy(p, "advection-explicit", m, theta)
    split = splits[0]  # smallest beta, hence thinnest natural diffusion
    dist = np.hypot(m.vertices[:, 0], m.vertices[:, 1])
    topped = split.artificial_topup > 0
    assert topped.any()
    # the diffusion coefficient vanishes at the origin, so top-up happens
    # within a couple of mesh sizes of it and nowhere else
    assert dist[topped].max() < 1.3 * m.dx
    assert not topped[dist > 1.3 * m.dx].any()


def test_topup_fraction_decays_under_refinement():
    p = experiment1()
    fractions = []
    for level in (2, 3, 4):
        m = generate_triangle_mesh(level)
        theta = check_strict_acuteness(m).theta
        split = apply_splitting_policy(p, "advection-explicit", m, theta)[0]
        fractions.append((split.artificial_topup > 0).mean())
    assert fractions[0] > fractions[1] > fractions[2]


def test_unbounded_step_without_explicit_matrix():
    m = generate_triangle_mesh(2)
    fam = FamilyAssembler(m).assemble(
        [manual_split(m, a_imp=1.0)], np.zeros(m.n_vertices), 1, 1
    )
    assert max_stable_timestep(fam) is None


def test_step_ceiling_is_reciprocal_diagonal():
    fam = OperatorFamily.from_matrices(
        [np.array([[4.0]])], [np.array([[0.0]])], [np.zeros(1)], 1, 1
    )
    assert max_stable_timestep(fam) == pytest.approx(0.25, rel=1e-14)


def test_positive_offdiagonal_rejected():
    fam = OperatorFamily.from_matrices(
        [np.array([[0.0, 1.0], [0.0, 0.0]])],
        [np.zeros((2, 2))],
        [np.zeros(2)],
        1,
        1,
    )
    with pytest.raises(MonotonicityError):
        max_stable_timestep(fam)


def test_step_ceiling_tracks_mesh_size():
    ratios = []
    for level in (3, 4):
        fam, m = exp1_family(level)
        h_max = max_stable_timestep(fam)
        assert h_max is not None and h_max > 0
        ratios.append(h_max / m.dx)
    assert 0.5 < ratios[0] / ratios[1] < 2.0


def test_implicit_laplacian_is_mmatrix_for_any_step():
    m = generate_triangle_mesh(2)
    fam = FamilyAssembler(m).assemble(
        [manual_split(m, a_imp=1.0)], np.zeros(m.n_vertices), 1, 1
    )
    for h in (1e-3, 1.0, 50.0):
        report = verify_monotonicity(fam, h)
        assert report.is_I_mmatrix
        assert report.is_monotone
        assert report.offdiag_violations_E == (0, 0.0)
        assert report.h_max is None
        assert report.dominance_margin > 0


def test_oversized_step_is_flagged():
    fam, _ = exp1_family(3)
    h_max = max_stable_timestep(fam)
    report = verify_monotonicity(fam, 1.5 * h_max)
    count, worst = report.offdiag_violations_E
    assert count >= 1 and worst > 0
    assert not report.is_monotone
    assert report.h_max == pytest.approx(h_max, rel=1e-12)
    good = verify_monotonicity(fam, 0.9 * h_max)
    assert good.is_monotone


def test_z_matrix_dominance_against_dense_inverse():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        A = -rng.integers(0, 3, (3, 3)).astype(float)
        np.fill_diagonal(A, 0.0)
        delta = rng.integers(-3, 3)
        np.fill_diagonal(A, np.abs(A).sum(axis=1) + delta)
        fam = OperatorFamily.from_matrices(
            [np.zeros((3, 3))], [A], [np.zeros(3)], 1, 1
        )
        report = verify_monotonicity(fam, 1.0)
        margins = 1.0 + A.diagonal() - np.abs(A - np.diag(A.diagonal())).sum(axis=1)
        assert report.is_I_mmatrix == bool(
            (margins > 0).all() and (1.0 + A.diagonal() > 0).all()
        )
        if report.is_I_mmatrix:
            inv = np.linalg.inv(np.eye(3) + A)
            assert inv.min() >= -1e-12


def test_weak_dominance_is_not_enough():
    A = np.array([[1.0, -2.0], [-3.0, 2.0]])  # margins after +Id: 0 and 0
    fam = OperatorFamily.from_matrices([np.zeros((2, 2))], [A], [np.zeros(2)], 1, 1)
    assert not verify_monotonicity(fam, 1.0).is_I_mmatrix
    B = A + np.eye(2)  # strictly dominant now
    fam2 = OperatorFamily.from_matrices([np.zeros((2, 2))], [B], [np.zeros(2)], 1, 1)
    assert verify_monotonicity(fam2, 1.0).is_I_mmatrix


def test_operator_norms_within_unit_ball():
    fam, _ = exp1_family(3)
    h = 0.9 * max_stable_timestep(fam)
    inv_norm, exp_norm = operator_stability_norms(fam, h)
    assert inv_norm <= 1.0 + 1e-10
    assert exp_norm <= 1.0 + 1e-12


def test_report_serialization():
    fam, m = exp1_family(2)
    report = verify_monotonicity(fam, 0.9 * max_stable_timestep(fam))
    text = report.to_text()
    assert "verdict: monotone" in text
    csv = report.to_csv()
    lines = csv.splitlines()
    assert lines[0] == "pair_id,row,margin"
    assert len(lines) == 1 + fam.n_pairs * m.n_vertices
