import math

import numpy as np
import pytest

from wrapgrasp.curves import build_circle, build_ellipse, tapered_radius
from wrapgrasp.errors import (AdmissibilityError, InvalidParameterError,
                              SingularityError)
from wrapgrasp.pmp import (OcpSpec, SolverConfig, backward_sweep, costate_rhs,
                           evaluate_cost, gradient_step, hamiltonian,
                           running_cost, solve)

HALF_PI = math.pi / 2


@pytest.fixture(scope="module")
def unit_circle_problem():
    """Constant-target problem on a unit circle, warm-startable exactly.

    With rho held at 0.5 and alpha at pi/2, the curvature that keeps the
    contact state frozen is k_o/(1 + rho*k_o) = 1/1.5.
    """
    return OcpSpec(curve=build_circle(1.0), arm_length=3.0,
                   rho_target=lambda s: 0.5, alpha_target=HALF_PI,
                   chi=10.0, initial=(0.5, HALF_PI))


EQUILIBRIUM_KAPPA = 1.0 / 1.5


# ---------------------------------------------------------------------------
# pointwise quantities
# ---------------------------------------------------------------------------

def test_running_cost_values():
    assert running_cost(2.0, 1.1, 2.0, 1.1, 10.0, 0.0) == 0.0
    assert running_cost(3.0, 1.1, 2.0, 1.1, 10.0, 0.0) == pytest.approx(5.0)
    assert running_cost(2.0, 1.1 + math.pi, 2.0, 1.1, 10.0,
                        0.0) == pytest.approx(20.0)
    # effort term alone
    assert running_cost(2.0, 1.1, 2.0, 1.1, 10.0, 3.0) == pytest.approx(4.5)


def test_running_cost_vanishes_only_at_perfect_tracking():
    rng = np.random.default_rng(11)
    for _ in range(50):
        rho_d = rng.uniform(0.2, 3.0)
        alpha_d = rng.uniform(0.3, math.pi - 0.3)
        off = rng.normal(size=3) * 0.3
        c = running_cost(rho_d + off[0], alpha_d + off[1], rho_d, alpha_d,
                         rng.uniform(0.5, 20.0), off[2])
        assert c >= 0.0
        if np.any(np.abs(off) > 1e-12):
            assert c > 0.0


def test_hamiltonian_values(unit_circle_problem):
    spec = unit_circle_problem
    assert hamiltonian(0.5, HALF_PI, 0.0, 0.0, 0.0, 1.0, spec) == 0.0
    # -p1*cos(pi/2) contributes nothing regardless of p1
    assert hamiltonian(0.5, HALF_PI, 1.0, 0.0, 0.0, 1.0,
                       spec) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(SingularityError):
        hamiltonian(0.5, HALF_PI, 0.0, 0.0, 0.0, -2.0, spec)


def test_hamiltonian_maximized_at_minus_p2(unit_circle_problem):
    spec = unit_circle_problem
    p2 = -0.37
    best = hamiltonian(0.9, 1.2, 0.4, p2, -p2, 1.0, spec)
    for dk in (-0.3, -0.05, 0.05, 0.3):
        assert hamiltonian(0.9, 1.2, 0.4, p2, -p2 + dk, 1.0, spec) < best


def test_costate_rhs_values(unit_circle_problem):
    spec = unit_circle_problem
    dp1, dp2 = costate_rhs(0.5, HALF_PI, 0.0, 0.0, 1.0, spec)
    assert dp1 == 0.0 and dp2 == 0.0

    # matching targets so only the p2 coupling term remains
    spec1 = OcpSpec(curve=build_circle(5.0), arm_length=1.0,
                    rho_target=1.0, alpha_target=HALF_PI,
                    chi=10.0, initial=(1.0, HALF_PI))
    dp1, dp2 = costate_rhs(1.0, HALF_PI, 0.0, 1.0, 0.2, spec1)
    assert dp1 == pytest.approx(0.04 / 1.44, rel=1e-15)
    assert dp2 == pytest.approx(0.0, abs=1e-15)

    dp1, dp2 = costate_rhs(1.0, HALF_PI, 1.0, 0.0, 0.2, spec1)
    assert dp1 == pytest.approx(0.0, abs=1e-15)
    assert dp2 == pytest.approx(-1.0, rel=1e-15)

    with pytest.raises(SingularityError):
        costate_rhs(10.0, HALF_PI, 0.0, 0.0, -0.2, spec1)


def test_gradient_step_values():
    s = np.linspace(0.0, 1.0, 5)
    assert np.all(gradient_step(np.zeros(5), np.zeros(5), 0.3) == 0.0)
    # stationarity kappa = -p2 is a fixed point for any step size
    assert gradient_step(np.ones(5), -np.ones(5),
                         0.5) == pytest.approx(np.ones(5))
    assert gradient_step(np.zeros(5), np.ones(5),
                         1e-6) == pytest.approx(np.full(5, -1e-6))
    assert s.shape == gradient_step(s, s, 0.1).shape
    with pytest.raises(InvalidParameterError):
        gradient_step(np.zeros(5), np.zeros(5), 0.0)


# ---------------------------------------------------------------------------
# problem validation
# ---------------------------------------------------------------------------

def test_problem_validation(circle5):
    good = dict(curve=circle5, arm_length=2.0, rho_target=1.0,
                alpha_target=HALF_PI)
    OcpSpec(**good)
    with pytest.raises(InvalidParameterError):
        OcpSpec(**{**good, "chi": 0.0})
    with pytest.raises(InvalidParameterError):
        OcpSpec(**{**good, "arm_length": -1.0})
    with pytest.raises(InvalidParameterError):
        OcpSpec(**{**good, "initial": (1.0, math.pi)})
    with pytest.raises(InvalidParameterError):
        OcpSpec(**{**good, "initial": (-1.0, 1.0)})
    with pytest.raises(InvalidParameterError):
        # dips below zero inside the span even though the ends look fine
        OcpSpec(**{**good, "rho_target": lambda s: math.cos(3.0 * s)})
    with pytest.raises(InvalidParameterError):
        OcpSpec(**{**good, "alpha_target": lambda s: 1.0 + 3.0 * s})


def test_solver_config_validation():
    SolverConfig()
    with pytest.raises(InvalidParameterError):
        SolverConfig(eta=0.0)
    with pytest.raises(InvalidParameterError):
        SolverConfig(steps=999)          # odd grids break the half-step rule
    with pytest.raises(InvalidParameterError):
        SolverConfig(max_iterations=0)
    with pytest.raises(InvalidParameterError):
        SolverConfig(barrier_weight=-1.0)


# ---------------------------------------------------------------------------
# backward sweep
# ---------------------------------------------------------------------------

def test_transversality_exact(ellipse84):
    spec = OcpSpec(curve=ellipse84, arm_length=10.0, rho_target=1.0,
                   alpha_target=HALF_PI, chi=10.0, initial=(1.3, 1.5),
                   base_shadow=2.0)
    _, traj = evaluate_cost(spec,
                            lambda s: 0.08 + 0.03 * math.sin(0.4 * s),
                            steps=800)
    cost = backward_sweep(traj, spec)
    assert cost.p1[-1] == 0.0
    assert cost.p2[-1] == 0.0
    assert cost.p3[-1] == 0.0


def test_costates_vanish_at_perfect_tracking(unit_circle_problem):
    _, traj = evaluate_cost(unit_circle_problem,
                            lambda s: EQUILIBRIUM_KAPPA, steps=400)
    cost = backward_sweep(traj, unit_circle_problem)
    assert np.abs(cost.p1).max() < 1e-10
    assert np.abs(cost.p2).max() < 1e-10
    assert np.abs(cost.p3).max() < 1e-10


def test_third_costate_zero_on_circle(circle5):
    # constant boundary curvature leaves the shadow-arclength adjoint dark
    spec = OcpSpec(curve=circle5, arm_length=8.0, rho_target=1.0,
                   alpha_target=HALF_PI, chi=10.0, initial=(2.0, 1.3))
    _, traj = evaluate_cost(spec, lambda s: 0.1, steps=600)
    cost = backward_sweep(traj, spec)
    assert np.abs(cost.p3).max() == 0.0
    assert np.abs(cost.p2).max() > 0.0


def test_backward_sweep_rejects_mismatched_grid(circle5):
    spec = OcpSpec(curve=circle5, arm_length=8.0, rho_target=1.0,
                   alpha_target=HALF_PI, chi=10.0, initial=(2.0, 1.3))
    _, traj = evaluate_cost(spec, lambda s: 0.1, steps=600)
    other = OcpSpec(curve=circle5, arm_length=9.0, rho_target=1.0,
                    alpha_target=HALF_PI, chi=10.0, initial=(2.0, 1.3))
    with pytest.raises(InvalidParameterError):
        backward_sweep(traj, other)


def test_adjoint_matches_finite_differences():
    """Directional derivatives from the costates vs central differences."""
    curve = build_ellipse(3.0, 1.7)
    L = 6.0
    spec = OcpSpec(curve=curve, arm_length=L, rho_target=0.6,
                   alpha_target=HALF_PI, chi=10.0, initial=(1.1, 1.5))
    steps = 1000

    def profile(extra):
        return lambda s: 0.2 + 0.05 * np.sin(0.7 * s) + extra(s)

    _, traj = evaluate_cost(spec, profile(lambda s: 0.0), steps=steps)
    cost = backward_sweep(traj, spec)
    grad = traj.kappa + cost.p2
    s = traj.s
    h = s[1] - s[0]
    w = np.ones_like(s)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0

    rng = np.random.default_rng(20260816)
    eps = 1e-5
    for _ in range(10):
        a, b, phase = rng.normal(size=3)
        m = rng.integers(1, 6)

        def direction(x, a=a, b=b, m=m, phase=phase):
            return a * np.sin(2.0 * np.pi * m * x / L + phase) + b

        predicted = float(np.sum(w * grad * direction(s)) * h / 3.0)
        plus, _ = evaluate_cost(
            spec, profile(lambda x: eps * direction(x)), steps=steps)
        minus, _ = evaluate_cost(
            spec, profile(lambda x: -eps * direction(x)), steps=steps)
        fd = (plus - minus) / (2.0 * eps)
        assert abs(predicted - fd) <= 1e-4 * max(abs(fd), 1e-30)


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def test_near_stationary_start_barely_moves(unit_circle_problem):
    cfg = SolverConfig(max_iterations=1, plateau_window=10**9,
                       initial_kappa=lambda s: EQUILIBRIUM_KAPPA)
    rep = solve(unit_circle_problem, cfg)
    start = np.full_like(rep.kappa, EQUILIBRIUM_KAPPA)
    moved = np.linalg.norm(rep.kappa - start)
    assert moved <= cfg.eta * np.linalg.norm(start) * (1.0 + 1e-9)
    assert rep.iterations == 1
    assert not rep.converged


def test_solver_reaches_stationarity(unit_circle_problem):
    cfg = SolverConfig(eta=1e-2, eta_max=0.25, grow_every=10, steps=400,
                       plateau_window=10**9, max_iterations=200_000,
                       initial_kappa=lambda s: EQUILIBRIUM_KAPPA)
    rep = solve(unit_circle_problem, cfg)
    assert rep.converged
    assert rep.reason == "stationarity residual below tolerance"
    assert rep.stationarity < 1e-4
    assert np.abs(rep.kappa + rep.costates.p2).max() < 1e-4


def test_cost_history_non_increasing(circle5):
    L = 2.0 * circle5.length / 3.0
    spec = OcpSpec(curve=circle5, arm_length=L,
                   rho_target=tapered_radius(L / 20.0, L / 200.0, L),
                   alpha_target=HALF_PI, chi=10.0, initial=(5.0, 1.6))
    rep = solve(spec, SolverConfig(max_iterations=1500))
    assert np.all(np.diff(rep.cost_history) <= 1e-12)
    assert np.all(np.isfinite(rep.cost_history))
    # the report carries one entry per accepted iterate, plus the start
    assert (len(rep.cost_history) == len(rep.barrier_history)
            == len(rep.tracking_history))
    assert len(rep.gradient_norm_history) == len(rep.cost_history)
    # final iterate is admissible
    tr = rep.trajectory
    assert tr.rho.min() > 0.0
    assert 0.0 < tr.alpha.min() and tr.alpha.max() < math.pi
    assert rep.eta_final > 0.0


def test_solver_rejects_singular_initial_guess(deformed53):
    # a straight arm from this pose recedes into a concave lobe until the
    # shadow map degenerates, so the zero default guess cannot even start
    L = 2.0 * deformed53.length / 3.0
    spec = OcpSpec(curve=deformed53, arm_length=L,
                   rho_target=tapered_radius(L / 20.0, L / 200.0, L),
                   alpha_target=HALF_PI, chi=10.0, initial=(4.7, 1.4))
    with pytest.raises(SingularityError):
        solve(spec, SolverConfig(max_iterations=10))


def test_solver_rejects_inadmissible_initial_guess(ellipse84):
    L = 2.0 * ellipse84.length / 3.0
    spec = OcpSpec(curve=ellipse84, arm_length=L,
                   rho_target=tapered_radius(L / 20.0, L / 200.0, L),
                   alpha_target=HALF_PI, chi=10.0, initial=(5.3, 1.8))
    with pytest.raises(AdmissibilityError):
        solve(spec, SolverConfig(max_iterations=10,
                                 initial_kappa=lambda s: 0.3))


def test_solver_reports_iteration_cap(unit_circle_problem):
    cfg = SolverConfig(max_iterations=5, plateau_window=10**9,
                       initial_kappa=lambda s: 0.2)
    rep = solve(unit_circle_problem, cfg)
    assert rep.iterations == 5
    assert not rep.converged
    assert rep.reason == "max iterations reached"


def test_report_arrays_immutable(unit_circle_problem):
    cfg = SolverConfig(max_iterations=3, plateau_window=10**9,
                       initial_kappa=lambda s: 0.2)
    rep = solve(unit_circle_problem, cfg)
    for arr in (rep.kappa, rep.cost_history, rep.tracking_history,
                rep.barrier_history, rep.gradient_norm_history,
                rep.costates.p1, rep.costates.p2, rep.costates.p3):
        with pytest.raises(ValueError):
            arr[0] = 1.0


def test_equilibrium_cost_is_pure_effort(unit_circle_problem):
    # frozen contact state: the quadrature sees a constant integrand
    cost, traj = evaluate_cost(unit_circle_problem,
                               lambda s: EQUILIBRIUM_KAPPA, steps=400)
    expect = 3.0 * 0.5 * EQUILIBRIUM_KAPPA ** 2
    assert cost == pytest.approx(expect, rel=1e-10)
    assert np.abs(traj.rho - 0.5).max() < 1e-12
    assert np.abs(traj.alpha - HALF_PI).max() < 1e-12
