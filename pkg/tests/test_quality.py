import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from wrapgrasp.curves import build_circle, closest_point
from wrapgrasp.errors import (EmptyContactError, InvalidParameterError,
                              OptimizationFailedError)
from wrapgrasp.pmp import OcpSpec, SolverConfig, solve
from wrapgrasp.quality import (ArmConfig, continuum_wrench, eigenvalues_sym3,
                               gramian, inner_solver_defaults,
                               jacobi_eigensystem, maximize_quality,
                               point_grasp_map, quality_map,
                               shadow_interpolant, singular_values_check,
                               trajectory_gramian)

# Closed-form values for circular-arc contact sets with the identity
# shadow map (boundary radius 5, centered at the origin). Frozen from
# hand antiderivatives: the Gramian needs only the set measure, the first
# moment of the contact positions, and their second moment; the half-arc
# eigenvalues come from the decoupled middle entry plus the quadratic
# formula on the remaining 2x2 block.
R5 = 5.0
FULL_W_DIAG = (31.415926535897931, 31.415926535897931, 785.39816339744823)
FULL_Q2 = 775156.91700749542
FULL_SIGMA_TOP = 28.024956081989643
HALF_W = np.array([[15.707963267948966, 0.0, -50.0],
                   [0.0, 15.707963267948966, 0.0],
                   [-50.0, 0.0, 392.69908169872411]])
HALF_EIGS = (399.21781899495562, 15.707963267948966, 9.1892259717174625)
HALF_Q2 = 57624.706456064494
HALF_Q3 = 0.023018075683223886
HALF_WRENCH = (0.0, -10.0, 0.0)


def identity_map(s):
    return s


@pytest.fixture(scope="module")
def circle_wrap(circle5):
    spec = OcpSpec(circle5, arm_length=12.0, rho_target=1.0,
                   alpha_target=math.pi / 2, chi=10.0,
                   initial=(3.0, math.pi / 2), arm_radius=1.0)
    report = solve(spec, inner_solver_defaults())
    assert report.converged
    return report.trajectory


@pytest.fixture(scope="module")
def circle_map(circle5):
    return quality_map(circle5, disc=(3.0, 13.0, 4, 8))


# ---------------------------------------------------------------------------
# pointwise grasp map
# ---------------------------------------------------------------------------

def test_point_map_examples():
    g = point_grasp_map((0.0, 0.0), 0.0)
    assert np.allclose(g.matrix, [[1, 0], [0, 1], [0, 0]], atol=1e-15)

    g = point_grasp_map((1.0, 0.0), math.pi / 2)
    assert np.allclose(g.matrix, [[0, -1], [1, 0], [1, 0]], atol=1e-15)

    g = point_grasp_map((0.0, 2.0), 0.0)
    assert np.allclose(g.matrix[2], [-2.0, 0.0], atol=1e-15)


def test_point_map_structure():
    rng = np.random.default_rng(41)
    for _ in range(100):
        pos = rng.normal(scale=4.0, size=2)
        phi = rng.uniform(-10.0, 10.0)
        g = point_grasp_map(pos, phi)
        top = g.matrix[:2]
        assert np.allclose(top.T @ top, np.eye(2), atol=1e-14)
        assert np.linalg.det(top) == pytest.approx(1.0, abs=1e-14)
        perp = np.array([-pos[1], pos[0]])
        assert np.allclose(g.matrix[2], perp @ top, atol=1e-13)
    with pytest.raises(InvalidParameterError):
        point_grasp_map((1.0, 2.0, 3.0), 0.0)
    with pytest.raises(ValueError):
        g.matrix[0, 0] = 99.0


# ---------------------------------------------------------------------------
# symmetric 3x3 eigensolver
# ---------------------------------------------------------------------------

def test_eigenvalues_plain_cases():
    assert np.allclose(eigenvalues_sym3(np.eye(3)), (1.0, 1.0, 1.0),
                       atol=1e-15)
    vals = eigenvalues_sym3(np.diag(FULL_W_DIAG))
    assert vals == pytest.approx(
        (FULL_W_DIAG[2], FULL_W_DIAG[0], FULL_W_DIAG[1]), rel=1e-14)
    with pytest.raises(InvalidParameterError):
        eigenvalues_sym3(np.eye(4))


def test_eigenvalues_match_cubic_oracle():
    # characteristic polynomial built from trace, principal minors and
    # the determinant; its roots are an independent reference.
    rng = np.random.default_rng(20260816)
    for _ in range(100):
        a = rng.normal(scale=3.0, size=(3, 3))
        a = a + a.T
        tr = a[0, 0] + a[1, 1] + a[2, 2]
        minors = (a[0, 0] * a[1, 1] - a[0, 1] ** 2
                  + a[0, 0] * a[2, 2] - a[0, 2] ** 2
                  + a[1, 1] * a[2, 2] - a[1, 2] ** 2)
        det = (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
               - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
               + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))
        roots = np.sort(np.roots([1.0, -tr, minors, -det]).real)[::-1]
        vals = eigenvalues_sym3(a)
        scale = max(np.abs(roots).max(), 1.0)
        assert np.abs(vals - roots).max() <= 1e-9 * scale


def test_eigenvector_residuals():
    rng = np.random.default_rng(77)
    mats = [rng.normal(scale=2.0, size=(3, 3)) for _ in range(30)]
    mats = [m + m.T for m in mats]
    mats.append(np.diag(FULL_W_DIAG) * 1.0)  # exactly repeated eigenvalue
    for a in mats:
        vals, vecs = jacobi_eigensystem(a)
        norm = math.sqrt(float(np.sum(a * a)))
        for k in range(3):
            res = a @ vecs[:, k] - vals[k] * vecs[:, k]
            assert np.linalg.norm(res) <= 1e-9 * max(norm, 1e-30)
        assert np.allclose(vecs.T @ vecs, np.eye(3), atol=1e-12)


# ---------------------------------------------------------------------------
# Gramian over circular-arc contact sets
# ---------------------------------------------------------------------------

def test_full_circle_gramian_closed_form(circle5):
    g = gramian(circle5, [(0.0, circle5.length)], identity_map)
    assert np.allclose(np.diag(g.matrix), FULL_W_DIAG,
                       rtol=1e-8, atol=1e-10)
    off = g.matrix - np.diag(np.diag(g.matrix))
    assert np.abs(off).max() <= 1e-8 * FULL_W_DIAG[2]
    assert np.array_equal(g.matrix, g.matrix.T)

    assert g.q1 == pytest.approx(FULL_W_DIAG[0], rel=1e-8)
    assert g.q2 == pytest.approx(FULL_Q2, rel=1e-8)
    assert g.q3 == pytest.approx(1.0 / R5 ** 2, rel=1e-8, abs=0.0)
    assert g.singular_values[0] == pytest.approx(FULL_SIGMA_TOP, rel=1e-8)
    assert g.measure == pytest.approx(2.0 * math.pi * R5, rel=1e-10)


def test_half_circle_gramian_frozen_oracle(circle5):
    g = gramian(circle5, [(0.0, math.pi * R5)], identity_map)
    assert np.allclose(g.matrix, HALF_W, rtol=1e-9, atol=1e-9)
    assert np.allclose(g.eigenvalues, HALF_EIGS, rtol=1e-9)
    assert g.q1 == pytest.approx(HALF_EIGS[2], rel=1e-9)
    assert g.q2 == pytest.approx(HALF_Q2, rel=1e-8)
    assert g.q3 == pytest.approx(HALF_Q3, rel=1e-8)


def test_short_arc_rank_deficiency(circle5):
    eps = 1e-3
    mid = 2.0 + 0.5 * eps
    g = gramian(circle5, [(2.0, 2.0 + eps)], identity_map)
    point = point_grasp_map(circle5.position(mid),
                            float(circle5.tangent_angle(mid)))
    expected = eps * (point.matrix @ point.matrix.T)
    assert np.allclose(g.matrix, expected, rtol=1e-4, atol=1e-12)
    # one contact pins only a 2-dimensional wrench subspace
    assert g.eigenvalues[2] <= 1e-8 * g.eigenvalues[0]
    assert abs(g.q1) <= 1e-8 * g.eigenvalues[0]
    assert abs(g.q2) <= 1e-8 * g.eigenvalues[0] ** 2 * g.eigenvalues[1]


def test_gramian_rejects_empty_contact(circle5):
    with pytest.raises(EmptyContactError):
        gramian(circle5, [], identity_map)
    with pytest.raises(EmptyContactError):
        gramian(circle5, [(2.0, 2.0)], identity_map)
    with pytest.raises(EmptyContactError):
        continuum_wrench(circle5, [], identity_map, lambda s: (0.0, 1.0))


def test_gramian_invariants_on_random_arcs(ellipse84):
    rng = np.random.default_rng(5150)
    for _ in range(25):
        pieces = rng.integers(1, 4)
        starts = np.sort(rng.uniform(0.0, ellipse84.length, pieces))
        intervals = [(float(a), float(a + rng.uniform(0.5, 6.0)))
                     for a in starts]
        g = gramian(ellipse84, intervals, identity_map, samples=512)
        assert np.array_equal(g.matrix, g.matrix.T)
        trace = float(np.trace(g.matrix))
        assert g.eigenvalues.min() >= -1e-10 * trace
        product = float(np.prod(g.eigenvalues))
        assert g.q2 == pytest.approx(product,
                                     rel=1e-8, abs=1e-8 * trace ** 3)
        assert 0.0 <= g.q3 <= 1.0
        assert g.metric(1) == g.q1 and g.metric(3) == g.q3
    with pytest.raises(InvalidParameterError):
        g.metric(4)


def test_gramian_quadrature_refinement(circle5):
    arcs = [(0.5, 9.0), (12.0, 17.5)]
    coarse = gramian(circle5, arcs, identity_map, samples=2048)
    fine = gramian(circle5, arcs, identity_map, samples=4096)
    for a, b in zip((coarse.q1, coarse.q2, coarse.q3),
                    (fine.q1, fine.q2, fine.q3)):
        assert abs(a - b) <= 1e-6 * max(abs(b), 1e-30)


def test_translation_covariance():
    shift = np.array([1.7, -0.6])
    centered = build_circle(R5)
    moved = build_circle(R5, center=shift)
    arcs = [(0.0, math.pi * R5)]
    w0 = gramian(centered, arcs, identity_map).matrix
    w1 = gramian(moved, arcs, identity_map).matrix
    # force block only sees rotations, never positions
    assert np.allclose(w0[:2, :2], w1[:2, :2], rtol=1e-12, atol=1e-12)
    assert not np.allclose(w0[2], w1[2], rtol=1e-3, atol=1e-3)

    s_probe = 4.0
    g0 = point_grasp_map(centered.position(s_probe),
                         float(centered.tangent_angle(s_probe)))
    g1 = point_grasp_map(moved.position(s_probe),
                         float(moved.tangent_angle(s_probe)))
    assert np.allclose(g0.matrix[:2], g1.matrix[:2], atol=1e-12)
    perp_shift = np.array([-shift[1], shift[0]])
    assert np.allclose(g1.matrix[2] - g0.matrix[2],
                       perp_shift @ g0.matrix[:2], atol=1e-10)


# ---------------------------------------------------------------------------
# continuum wrench
# ---------------------------------------------------------------------------

def test_wrench_of_zero_force(circle5):
    wr = continuum_wrench(circle5, [(0.0, 10.0)], identity_map,
                          lambda s: (0.0, 0.0))
    assert np.array_equal(wr, np.zeros(3))


def test_wrench_full_circle_pressing_force_cancels(circle5):
    wr = continuum_wrench(circle5, [(0.0, circle5.length)], identity_map,
                          lambda s: (0.0, 1.0))
    assert np.abs(wr).max() < 1e-8


def test_wrench_half_circle_frozen_and_refined(circle5):
    arcs = [(0.0, math.pi * R5)]
    wr = continuum_wrench(circle5, arcs, identity_map,
                          lambda s: (0.0, 1.0), samples=256)
    assert np.allclose(wr, HALF_WRENCH, atol=1e-8)
    dense = continuum_wrench(circle5, arcs, identity_map,
                             lambda s: (0.0, 1.0), samples=2560)
    assert np.abs(wr - dense).max() <= 1e-6


def test_wrench_rejects_bad_profile(circle5):
    with pytest.raises(InvalidParameterError):
        continuum_wrench(circle5, [(0.0, 1.0)], identity_map,
                         lambda s: (1.0, 2.0, 3.0))


# ---------------------------------------------------------------------------
# spectrum cross-check
# ---------------------------------------------------------------------------

def test_singular_check_full_circle(circle5):
    rep = singular_values_check(circle5, [(0.0, circle5.length)],
                                identity_map)
    assert rep.converged and rep.passed
    assert rep.top_singular_value == pytest.approx(FULL_SIGMA_TOP, rel=1e-6)
    assert rep.relative_gap <= 1e-4
    assert rep.singular_values[0] == pytest.approx(rep.gramian_root,
                                                   rel=1e-12)


def test_singular_check_random_arcs(ellipse84):
    rng = np.random.default_rng(909)
    for _ in range(5):
        a = float(rng.uniform(0.0, ellipse84.length))
        arc = [(a, a + float(rng.uniform(2.0, 12.0)))]
        rep = singular_values_check(ellipse84, arc, identity_map,
                                    samples=512)
        assert rep.passed, rep.relative_gap


def test_singular_check_short_arc_rank(circle5):
    rep = singular_values_check(circle5, [(1.0, 1.0 + 1e-3)], identity_map)
    assert rep.singular_values[2] <= 1e-4 * rep.singular_values[0]


# ---------------------------------------------------------------------------
# solved-wrap plumbing
# ---------------------------------------------------------------------------

def test_shadow_interpolant_matches_trajectory(circle_wrap):
    f = shadow_interpolant(circle_wrap)
    assert np.array_equal(f(circle_wrap.s), circle_wrap.s_o)
    mid = 0.5 * (circle_wrap.s[3] + circle_wrap.s[4])
    lo, hi = circle_wrap.s_o[3], circle_wrap.s_o[4]
    assert lo < f(mid) < hi


def test_trajectory_gramian_scores_converged_wrap(circle5, circle_wrap):
    g = trajectory_gramian(circle5, circle_wrap, tol=0.1)
    assert g.measure > 1.0
    assert g.q1 > 0.0 and g.q2 > 0.0 and 0.0 < g.q3 < 1.0


# ---------------------------------------------------------------------------
# placement maps
# ---------------------------------------------------------------------------

def test_quality_map_circle_statuses_and_geometry(circle5, circle_map):
    m = circle_map
    assert all(s == "ok" for row in m.status for s in row)
    assert np.isfinite(m.q1).all() and np.isfinite(m.q3).all()
    assert np.allclose(m.centroid, 0.0, atol=1e-9)
    for i, d in enumerate(m.distances):
        for j, psi in enumerate(m.angles):
            assert m.base_angles[i, j] == pytest.approx(psi + math.pi / 2)
            reached = closest_point(circle5, m.base_points[i, j]).distance
            assert reached == pytest.approx(float(d), abs=1e-6)


def test_quality_map_circle_radial_symmetry(circle_map):
    # cells at one distance are the same problem rotated, so every metric
    # must be flat across the ray angle
    for field in (circle_map.q1, circle_map.q2, circle_map.q3):
        for i in range(circle_map.distances.size):
            row = field[i]
            spread = (row.max() - row.min()) / abs(row.mean())
            assert spread < 0.02


def test_quality_map_circle_proximity_trend(circle_map):
    for field in (circle_map.q1, circle_map.q2, circle_map.q3):
        means = field.mean(axis=1)
        corr = spearmanr(circle_map.distances, means).statistic
        assert corr < -0.9
        assert np.all(np.diff(means) < 0.0)


def test_quality_map_records_failures_as_missing(circle5):
    # a 40-sweep budget cannot finish the barrier continuation, so every
    # cell must come back as a recorded failure, never as zero quality
    starved = SolverConfig(eta=1e-2, steps=300, max_iterations=40,
                           grow_every=10, eta_max=0.5,
                           plateau_window=20, plateau_rtol=2e-4,
                           barrier_weight=1e-3, barrier_weight_initial=10.0,
                           barrier_stage_window=15, barrier_stage_rtol=1e-3)
    m = quality_map(circle5, disc=(3.0, 5.0, 1, 4), solver=starved)
    assert all(s == "not-converged" for row in m.status for s in row)
    assert np.isnan(m.q1).all() and np.isnan(m.q2).all() \
        and np.isnan(m.q3).all()
    rows = m.rows()
    assert len(rows) == 4 and rows[0][-1] == "not-converged"
    assert not any(r[5] == 0.0 or r[6] == 0.0 for r in rows)


def test_quality_map_validation(circle5):
    with pytest.raises(InvalidParameterError):
        quality_map(circle5, disc=(0.0, 13.0, 4, 8))
    with pytest.raises(InvalidParameterError):
        quality_map(circle5, disc=(3.0, 2.0, 4, 8))
    with pytest.raises(InvalidParameterError):
        quality_map(circle5, disc=(3.0, 13.0, 0, 8))
    with pytest.raises(InvalidParameterError):
        ArmConfig(radius=-1.0)
    with pytest.raises(InvalidParameterError):
        ArmConfig(alpha_target=math.pi)
    with pytest.raises(InvalidParameterError):
        circle5 and ArmConfig(contact_tol=-0.5)


def test_quality_map_threads_match_serial(circle5):
    serial = quality_map(circle5, disc=(4.0, 6.0, 1, 3), threads=1)
    threaded = quality_map(circle5, disc=(4.0, 6.0, 1, 3), threads=4)
    assert np.array_equal(serial.q1, threaded.q1, equal_nan=True)
    assert np.array_equal(serial.q2, threaded.q2, equal_nan=True)
    assert serial.status == threaded.status


def test_ellipse_map_half_turn_symmetry(ellipse84):
    # the placement rule is chiral (the arm always leads the ray by a
    # quarter turn), so only the object's rotational symmetries carry
    # over to the map: for the ellipse that is the half turn
    m = quality_map(ellipse84, disc=(3.0, 3.0, 1, 8))
    for field in (m.q1, m.q2):
        row = field[0]
        assert np.all(np.isfinite(row))
        rolled = np.roll(row, 4)
        assert np.abs(row - rolled).max() <= 0.01 * np.abs(row).max()


def test_deformed_map_three_fold_symmetry(deformed53):
    m = quality_map(deformed53, disc=(3.0, 3.0, 1, 6))
    row = m.q1[0]
    assert np.all(np.isfinite(row))
    rolled = np.roll(row, 2)
    assert np.abs(row - rolled).max() <= 0.01 * np.abs(row).max()


# ---------------------------------------------------------------------------
# placement search
# ---------------------------------------------------------------------------

def test_maximize_quality_prefers_proximity(circle5):
    best = maximize_quality(circle5, 1, disc=(3.0, 13.0, 3, 6),
                            starts=2, max_evaluations=20)
    assert best.quality >= float(np.nanmax(best.coarse_map.q1)) - 1e-12
    assert best.distance <= 4.0
    assert best.trajectory.contact_intervals(0.1)
    assert best.gram.q1 == pytest.approx(best.quality)
    assert best.kappa.size == best.trajectory.s.size


def test_maximize_quality_validation_and_total_failure(circle5):
    with pytest.raises(InvalidParameterError):
        maximize_quality(circle5, 4)
    starved = SolverConfig(eta=1e-2, steps=300, max_iterations=40,
                           grow_every=10, eta_max=0.5,
                           plateau_window=20, plateau_rtol=2e-4,
                           barrier_weight=1e-3, barrier_weight_initial=10.0,
                           barrier_stage_window=15, barrier_stage_rtol=1e-3)
    with pytest.raises(OptimizationFailedError):
        maximize_quality(circle5, 1, disc=(3.0, 5.0, 1, 4), solver=starved)
