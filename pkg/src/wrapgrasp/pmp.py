"""Optimal curvature control for wrapping an arm around an object.

The control input is the arm's curvature profile kappa(s); the goal is to
track desired contact-distance and contact-angle profiles (rho_d, alpha_d)
along the arm. The cost is

    J = int_0^L [ kappa^2/2
                  + chi ( (rho - rho_d)^2/2 + 1 - cos(alpha - alpha_d) ) ] ds

subject to the contact kinematics. First-order optimality couples the
forward state sweep with a backward adjoint (costate) sweep; the curvature
profile is then improved by small gradient steps

    kappa <- kappa + eta * (-p2 - kappa)

until the cost plateaus or the stationarity residual kappa + p2 vanishes.

The state constraints (rho > 0, alpha in (0, pi)) are kept inactive by a
soft log-barrier added to the internal objective only; the reported cost
history is always the plain tracking cost above, with the barrier part
recorded separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .contact import ContactTrajectory, integrate_contact
from .curves import BoundaryCurve
from .errors import (AdmissibilityError, InvalidParameterError,
                     SingularityError)

Profile = Union[Callable[[float], float], float]


def _as_profile(p: Profile) -> Callable[[float], float]:
    if callable(p):
        return p
    value = float(p)
    return lambda s: value


def _sample(profile: Callable[[float], float], s: np.ndarray) -> np.ndarray:
    return np.asarray([float(profile(v)) for v in s])


def _eval_cells(coef: np.ndarray, cell: float, period: float,
                x: np.ndarray, slope: bool = False) -> np.ndarray:
    """Vectorized piecewise-cubic evaluation on packed spline cells."""
    xx = np.mod(x, period)
    j = np.minimum((xx / cell).astype(np.int64), coef.shape[0] - 1)
    u = xx - j * cell
    c = coef[j]
    if slope:
        return c[:, 1] + u * (2.0 * c[:, 2] + u * 3.0 * c[:, 3])
    return c[:, 0] + u * (c[:, 1] + u * (c[:, 2] + u * c[:, 3]))


# ---------------------------------------------------------------------------
# problem and solver descriptions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OcpSpec:
    """Curvature-tracking problem over a fixed arm length.

    ``rho_target`` and ``alpha_target`` are the desired contact distance
    and angle, given as callables of arm arclength or constants. The arm
    radius used for contact-depth bookkeeping defaults to ``rho_target``
    (wrapping at the arm's own surface distance); pass ``arm_radius`` to
    separate the two.
    """

    curve: BoundaryCurve
    arm_length: float
    rho_target: Profile
    alpha_target: Profile
    chi: float = 10.0
    initial: Tuple[float, float] = (1.0, math.pi / 2)
    base_shadow: float = 0.0
    arm_radius: Optional[Profile] = None

    def __post_init__(self):
        if not self.arm_length > 0.0:
            raise InvalidParameterError("arm_length must be positive")
        if not self.chi > 0.0:
            raise InvalidParameterError("chi must be positive")
        rho0, alpha0 = self.initial
        if not rho0 > 0.0:
            raise InvalidParameterError("initial rho must be positive")
        if not 0.0 < alpha0 < math.pi:
            raise InvalidParameterError("initial alpha must lie in (0, pi)")
        probe = np.linspace(0.0, self.arm_length, 101)
        rd = _sample(_as_profile(self.rho_target), probe)
        ad = _sample(_as_profile(self.alpha_target), probe)
        if not np.all(rd > 0.0):
            raise InvalidParameterError("rho_target must be positive on "
                                        "[0, L]")
        if not (np.all(ad > 0.0) and np.all(ad < math.pi)):
            raise InvalidParameterError("alpha_target must lie in (0, pi) "
                                        "on [0, L]")

    def full_initial(self) -> Tuple[float, float, float]:
        return (self.initial[0], self.initial[1], self.base_shadow)

    def radius_profile(self) -> Callable[[float], float]:
        base = self.arm_radius if self.arm_radius is not None \
            else self.rho_target
        return _as_profile(base)


@dataclass(frozen=True)
class SolverConfig:
    """Gradient-sweep settings.

    ``eta`` is the initial step size; on an inadmissible or cost-increasing
    candidate the step is halved and the same gradient retried, and after
    every ``grow_every`` accepted steps it doubles (up to ``eta_max``,
    0 disables growth). ``barrier_weight`` scales the internal soft barrier
    keeping iterates away from rho = 0 and alpha = {0, pi}; the rho part
    of the barrier switches on below ``barrier_margin`` times the local
    target distance rho_d(s). The barrier starts heavy, at
    ``barrier_weight_initial``, and is halved stage by stage down to
    ``barrier_weight``: a cold curvature guess makes the early iterates
    dive at the object surface, and only a heavy barrier turns that dive
    before it pins the line search against the hard admissibility wall.
    A stage ends (and the weight halves) once the accepted cost has
    improved by less than ``barrier_stage_rtol`` (relative) over the last
    ``barrier_stage_window`` accepted steps while no point of the arm sits
    below the barrier floor, so protection lasts exactly as long as the
    approach transient does.
    """

    eta: float = 1e-6
    steps: int = 2000
    max_iterations: int = 500_000
    grow_every: int = 50
    eta_max: float = 1e-3
    plateau_window: int = 100
    plateau_rtol: float = 1e-8
    stationarity_tol: float = 1e-4
    barrier_weight: float = 1e-3
    barrier_weight_initial: float = 1e3
    barrier_stage_window: int = 200
    barrier_stage_rtol: float = 1e-5
    barrier_margin: float = 0.5
    min_eta: float = 1e-18
    initial_kappa: Optional[Union[Callable[[float], float],
                                  Sequence[float]]] = None

    def __post_init__(self):
        if not self.eta > 0.0:
            raise InvalidParameterError("eta must be positive")
        if self.steps < 2 or self.steps % 2:
            raise InvalidParameterError("steps must be a positive even "
                                        "count")
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be >= 1")
        if self.barrier_weight < 0.0:
            raise InvalidParameterError("barrier_weight must be >= 0")
        if self.barrier_stage_window < 1:
            raise InvalidParameterError("barrier_stage_window must be >= 1")


@dataclass(frozen=True)
class CostateTrajectory:
    """Adjoint variables on the shared arclength grid.

    p1 and p2 pair with the contact distance and angle; p3 pairs with the
    shadow arclength and vanishes identically on constant-curvature
    boundaries. The free right endpoint forces all three to zero at s = L.
    """

    s: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray

    def __post_init__(self):
        for a in (self.s, self.p1, self.p2, self.p3):
            a.flags.writeable = False


@dataclass(frozen=True)
class SolveReport:
    """Everything the gradient sweep produced.

    ``cost_history`` records the objective the line search actually
    descends: the tracking cost plus the barrier term at its weight in
    force when the iterate was accepted. It is non-increasing (up to the
    acceptance slack). ``tracking_history`` is the bare tracking cost and
    may wiggle while the barrier weight is being relaxed.
    """

    iterations: int
    converged: bool
    reason: str
    kappa: np.ndarray
    trajectory: ContactTrajectory
    costates: CostateTrajectory
    cost_history: np.ndarray        # descended objective per accepted iterate
    tracking_history: np.ndarray    # tracking cost alone, same index
    barrier_history: np.ndarray     # unweighted barrier integral, same index
    gradient_norm_history: np.ndarray
    stationarity: float             # final max |kappa + p2|
    eta_final: float

    def __post_init__(self):
        for a in (self.kappa, self.cost_history, self.tracking_history,
                  self.barrier_history, self.gradient_norm_history):
            a.flags.writeable = False

    @property
    def cost(self) -> float:
        """Final tracking cost (curvature effort plus chi-weighted error)."""
        return float(self.tracking_history[-1])


# ---------------------------------------------------------------------------
# pointwise quantities
# ---------------------------------------------------------------------------

def running_cost(rho: float, alpha: float, rho_d: float, alpha_d: float,
                 chi: float, kappa: float) -> float:
    """Cost density: curvature effort plus chi-weighted tracking error."""
    return (0.5 * kappa * kappa
            + chi * (0.5 * (rho - rho_d) ** 2
                     + 1.0 - math.cos(alpha - alpha_d)))


def hamiltonian(rho: float, alpha: float, p1: float, p2: float, kappa: float,
                kappa_o: float, spec: OcpSpec, s: float = 0.0) -> float:
    """Control Hamiltonian of the tracking problem at arclength s.

    Stationarity in the control gives dH/dkappa = -p2 - kappa, which is
    the ascent direction used by the solver.
    """
    den = 1.0 + rho * kappa_o
    if den <= 0.0:
        raise SingularityError(
            "shadow map singular: 1 + rho*kappa_o = %.6g <= 0" % den)
    rho_d = float(_as_profile(spec.rho_target)(s))
    alpha_d = float(_as_profile(spec.alpha_target)(s))
    drift = -p1 * math.cos(alpha) \
        + p2 * (-kappa + kappa_o * math.sin(alpha) / den)
    return drift - running_cost(rho, alpha, rho_d, alpha_d, spec.chi, kappa)


def costate_rhs(rho: float, alpha: float, p1: float, p2: float,
                kappa_o: float, spec: OcpSpec,
                s: float = 0.0) -> Tuple[float, float]:
    """Adjoint rates for a constant-curvature boundary segment.

    This is the two-costate form: it omits the shadow-arclength adjoint
    that a varying boundary curvature excites (the full solver carries
    that third component; see backward_sweep).
    """
    den = 1.0 + rho * kappa_o
    if den <= 0.0:
        raise SingularityError(
            "shadow map singular: 1 + rho*kappa_o = %.6g <= 0" % den)
    rho_d = float(_as_profile(spec.rho_target)(s))
    alpha_d = float(_as_profile(spec.alpha_target)(s))
    sa, ca = math.sin(alpha), math.cos(alpha)
    dp1 = kappa_o ** 2 * p2 * sa / den ** 2 + spec.chi * (rho - rho_d)
    dp2 = -p1 * sa - kappa_o * p2 * ca / den \
        + spec.chi * math.sin(alpha - alpha_d)
    return dp1, dp2


def gradient_step(kappa: np.ndarray, p2: np.ndarray,
                  eta: float) -> np.ndarray:
    """One ascent step on the Hamiltonian: kappa + eta*(-p2 - kappa)."""
    if not eta > 0.0:
        raise InvalidParameterError("eta must be positive")
    kappa = np.asarray(kappa, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    return kappa + eta * (-p2 - kappa)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

class _Workspace:
    """Precomputed grids and target samples shared by the sweeps."""

    def __init__(self, spec: OcpSpec, steps: int):
        if steps < 2 or steps % 2:
            raise InvalidParameterError("the solver grid needs an even, "
                                        "positive step count")
        self.spec = spec
        self.steps = steps
        self.h = spec.arm_length / steps
        self.s = np.arange(steps + 1) * self.h
        self.s_half = self.s[:-1] + 0.5 * self.h
        rho_d = _as_profile(spec.rho_target)
        alpha_d = _as_profile(spec.alpha_target)
        self.rd_n = _sample(rho_d, self.s)
        self.ad_n = _sample(alpha_d, self.s)
        self.rd_h = _sample(rho_d, self.s_half)
        self.ad_h = _sample(alpha_d, self.s_half)
        self.coef, self.cell, self.period = spec.curve.curvature_cells()
        self.rf_n = np.zeros_like(self.rd_n)
        self.rf_h = np.zeros_like(self.rd_h)
        # composite Simpson weights on the node grid
        w = np.ones(steps + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        self.quad = w * (self.h / 3.0)

    def forward(self, kap_nodes: np.ndarray, kap_halfs: np.ndarray):
        n = self.steps
        rho = np.empty(n + 1)
        alpha = np.empty(n + 1)
        so = np.empty(n + 1)
        ko = np.empty(n + 1)
        rho0, alpha0, so0 = self.spec.full_initial()
        status, idx = _kernels.contact_forward(
            rho0, alpha0, so0, self.h, kap_nodes, kap_halfs,
            self.coef, self.cell, self.period, rho, alpha, so, ko)
        return status, idx, rho, alpha, so, ko

    def tracking_cost(self, kap_nodes, rho, alpha) -> float:
        dens = (0.5 * kap_nodes ** 2
                + self.spec.chi * (0.5 * (rho - self.rd_n) ** 2
                                   + 1.0 - np.cos(alpha - self.ad_n)))
        return float(self.quad @ dens)

    def set_barrier_floor(self, margin: float) -> None:
        self.rf_n = margin * self.rd_n
        self.rf_h = margin * self.rd_h

    def barrier_cost(self, rho, alpha) -> float:
        b = -np.log(np.sin(alpha))
        low = rho < self.rf_n
        if np.any(low):
            r = rho[low]
            f = self.rf_n[low]
            b[low] += -np.log(r / f) + (r - f) / f
        return float(self.quad @ b)

    def backward(self, rho, alpha, so, ko, barrier_weight: float):
        n = self.steps
        rho_h = _kernels.half_nodes(rho)
        alpha_h = _kernels.half_nodes(alpha)
        so_h = _kernels.half_nodes(so)
        ko_h = _eval_cells(self.coef, self.cell, self.period, so_h)
        kop_n = _eval_cells(self.coef, self.cell, self.period, so,
                            slope=True)
        kop_h = _eval_cells(self.coef, self.cell, self.period, so_h,
                            slope=True)
        p1 = np.empty(n + 1)
        p2 = np.empty(n + 1)
        p3 = np.empty(n + 1)
        _kernels.costate_backward(
            self.h, self.spec.chi, barrier_weight,
            rho, alpha, ko, kop_n, self.rd_n, self.ad_n, self.rf_n,
            rho_h, alpha_h, ko_h, kop_h, self.rd_h, self.ad_h, self.rf_h,
            p1, p2, p3)
        return p1, p2, p3


def backward_sweep(traj: ContactTrajectory, spec: OcpSpec,
                   barrier_weight: float = 0.0,
                   barrier_margin: float = 0.5) -> CostateTrajectory:
    """Integrate the adjoint system backward along a state trajectory.

    With the default zero barrier the result is the exact adjoint of the
    tracking cost: the directional derivative of J in a curvature
    direction dk is the integral of (kappa + p2) * dk. Terminal values
    are zero (free endpoint).
    """
    ws = _Workspace(spec, traj.s.size - 1)
    if abs(ws.h - (traj.s[1] - traj.s[0])) > 1e-12 * ws.h:
        raise InvalidParameterError("trajectory grid does not match the "
                                    "problem arm length")
    if barrier_weight > 0.0:
        ws.set_barrier_floor(barrier_margin)
    ko = _eval_cells(ws.coef, ws.cell, ws.period, traj.s_o)
    p1, p2, p3 = ws.backward(traj.rho, traj.alpha, traj.s_o, ko,
                             barrier_weight)
    return CostateTrajectory(s=traj.s.copy(), p1=p1, p2=p2, p3=p3)


def evaluate_cost(spec: OcpSpec, kappa_profile, steps: int = 2000
                  ) -> Tuple[float, ContactTrajectory]:
    """Tracking cost of a curvature profile (no barrier) plus trajectory."""
    traj = integrate_contact(spec.curve, kappa_profile, spec.full_initial(),
                             spec.arm_length, steps=steps,
                             radius_profile=spec.radius_profile())
    ws = _Workspace(spec, steps)
    return ws.tracking_cost(traj.kappa, traj.rho, traj.alpha), traj


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def solve(spec: OcpSpec, config: Optional[SolverConfig] = None) -> SolveReport:
    """Forward-backward gradient sweep from the given problem description.

    Each iteration integrates the contact state forward under the current
    curvature, sweeps the adjoint backward, and steps the curvature
    against the residual kappa + p2. Inadmissible or cost-increasing
    candidates trigger step halving with the same gradient. Stops on a
    cost plateau, on stationarity, or at the iteration cap (reported, not
    raised).
    """
    cfg = config if config is not None else SolverConfig()
    ws = _Workspace(spec, cfg.steps)
    n = cfg.steps

    if cfg.initial_kappa is None:
        kappa = np.zeros(n + 1)
    elif callable(cfg.initial_kappa):
        kappa = _sample(cfg.initial_kappa, ws.s)
    else:
        kappa = np.array(cfg.initial_kappa, dtype=float)
        if kappa.shape != ws.s.shape:
            raise InvalidParameterError("initial_kappa must provide one "
                                        "value per grid node")

    wb_final = cfg.barrier_weight
    wb = max(cfg.barrier_weight_initial, wb_final) if wb_final > 0.0 else 0.0
    if wb > 0.0:
        ws.set_barrier_floor(cfg.barrier_margin)

    status, idx, rho, alpha, so, ko = ws.forward(kappa,
                                                 _kernels.half_nodes(kappa))
    if status == 2:
        raise SingularityError(
            "initial curvature guess is singular near s = %.6g"
            % (idx * ws.h), s=idx * ws.h)
    if status != 0:
        raise AdmissibilityError(
            "initial curvature guess leaves the admissible region at "
            "s = %.6g" % (idx * ws.h), s=idx * ws.h)
    cost = ws.tracking_cost(kappa, rho, alpha)
    barrier = ws.barrier_cost(rho, alpha) if wb > 0.0 else 0.0
    total = cost + wb * barrier

    eta = cfg.eta
    successes = 0
    stage_mark = 0
    total_hist = [total]
    track_hist = [cost]
    barrier_hist = [barrier]
    grad_hist = []
    converged = False
    reason = "max iterations reached"
    iterations = 0
    p1 = p2 = p3 = np.zeros(n + 1)

    for iterations in range(1, cfg.max_iterations + 1):
        p1, p2, p3 = ws.backward(rho, alpha, so, ko, wb)
        residual = float(np.abs(kappa + p2).max())
        grad_hist.append(residual)
        if wb == wb_final and residual < cfg.stationarity_tol:
            converged = True
            reason = "stationarity residual below tolerance"
            iterations -= 1
            break

        accepted = False
        # fraction-to-boundary rule: a candidate may not jump below half
        # the barrier floor at any node the current iterate clears (a
        # single large step can otherwise cross the floor band in one go,
        # landing where the barrier is too stiff for any usable step)
        rho_least = np.minimum(0.5 * ws.rf_n, 0.9 * rho)
        while eta >= cfg.min_eta:
            cand = kappa + eta * (-p2 - kappa)
            st, _, r2, a2, so2, ko2 = ws.forward(cand,
                                                 _kernels.half_nodes(cand))
            if st == 0 and (r2 >= rho_least).all():
                c2 = ws.tracking_cost(cand, r2, a2)
                b2 = ws.barrier_cost(r2, a2) if wb > 0.0 else 0.0
                t2 = c2 + wb * b2
                if t2 <= total + 1e-12:
                    accepted = True
                    break
            eta *= 0.5
        if not accepted:
            reason = "step size underflow"
            break

        kappa, rho, alpha, so, ko = cand, r2, a2, so2, ko2
        cost, barrier, total = c2, b2, t2
        total_hist.append(total)
        track_hist.append(cost)
        barrier_hist.append(barrier)
        successes += 1
        if cfg.grow_every and successes % cfg.grow_every == 0:
            eta = min(2.0 * eta, cfg.eta_max)
        if wb > wb_final:
            k = cfg.barrier_stage_window
            if (len(total_hist) - stage_mark > k
                    and float((rho - 1.05 * ws.rf_n).min()) >= 0.0):
                # relax only once this stage has plateaued with the
                # iterate clear of the distance floor; decaying mid-dive
                # hands the tail back to the hard wall
                if (total_hist[-1 - k] - total
                        < cfg.barrier_stage_rtol * max(abs(total), 1e-30)):
                    wb = max(0.5 * wb, wb_final)
                    total = cost + wb * barrier
                    total_hist[-1] = total
                    stage_mark = len(total_hist)

        w = cfg.plateau_window
        if wb == wb_final and len(total_hist) > w:
            if (total_hist[-1 - w] - total
                    < cfg.plateau_rtol * max(abs(total), 1e-30)):
                converged = True
                reason = "cost plateau"
                break

    if len(grad_hist) < len(total_hist):
        # stopped before sweeping the accepted final iterate
        p1, p2, p3 = ws.backward(rho, alpha, so, ko, wb)
        grad_hist.append(float(np.abs(kappa + p2).max()))

    radius = spec.radius_profile()
    radius_n = _sample(radius, ws.s)
    traj = ContactTrajectory(
        s=ws.s.copy(), rho=rho.copy(), alpha=alpha.copy(), s_o=so.copy(),
        nu_o=np.sin(alpha) / (1.0 + rho * ko), kappa=kappa.copy(),
        delta=radius_n - rho, radius=radius_n,
        initial=spec.full_initial())
    costates = CostateTrajectory(s=ws.s.copy(), p1=p1, p2=p2, p3=p3)
    return SolveReport(
        iterations=iterations, converged=converged, reason=reason,
        kappa=kappa, trajectory=traj, costates=costates,
        cost_history=np.asarray(total_hist),
        tracking_history=np.asarray(track_hist),
        barrier_history=np.asarray(barrier_hist),
        gradient_norm_history=np.asarray(grad_hist),
        stationarity=float(np.abs(kappa + p2).max()), eta_final=eta)
