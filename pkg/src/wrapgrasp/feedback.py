"""Curvature feedback law, closed-loop kinematics, and its certificate.

The arm can wrap an object without solving an optimization problem: a
static curvature law in the local contact coordinates drives the contact
state toward a constant-distance, right-angle ride along the boundary.
This module evaluates that law, finds the equilibrium contact distance
it induces, integrates the closed-loop kinematics, and checks the
Lyapunov function that certifies convergence on constant-curvature
objects.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .contact import ContactTrajectory
from .errors import (AdmissibilityError, DomainError, InfeasibleGainsError,
                     InvalidParameterError, SingularityError)

__all__ = [
    "FeedbackGains", "LyapunovReport",
    "feedback_curvature", "equilibrium_rho", "adaptive_mu2",
    "adaptive_gains", "integrate_closed_loop", "lyapunov_value",
    "verify_lyapunov_decrease", "quasi_static_reference",
]

Mu2Profile = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class FeedbackGains:
    """Gains of the wrapping feedback law.

    ``mu1`` weights the angle-correcting term; it must be positive for
    the closed loop to converge (zero is accepted as the degenerate
    marginal case, where the Lyapunov value is conserved and nothing
    settles). ``mu2`` sets the standoff preference and may be a constant
    or a profile over arm arclength (adaptive gains vary it with the
    local arm radius). For a constant-curvature object the closed loop
    is well-posed when ``mu2`` exceeds the negated boundary curvature.
    """

    mu1: float = 1.0
    mu2: Mu2Profile = 1.0

    def __post_init__(self):
        if not self.mu1 >= 0.0:
            raise InvalidParameterError("mu1 must be nonnegative")
        if not callable(self.mu2) and not math.isfinite(float(self.mu2)):
            raise InvalidParameterError("mu2 must be finite or a profile")

    def mu2_at(self, s: float) -> float:
        return float(self.mu2(s)) if callable(self.mu2) else float(self.mu2)


def feedback_curvature(rho: float, alpha: float, gains: FeedbackGains,
                       s: float = 0.0) -> float:
    """Commanded arm curvature at one contact state.

    Pure statics: an angle-restoring term plus a standoff-restoring term,
    each gated by the contact angle. ``s`` resolves a profile-valued
    ``mu2`` and is ignored for constant gains.
    """
    return (-gains.mu1 * math.cos(alpha)
            + (rho - gains.mu2_at(s)) * math.sin(alpha))


def equilibrium_rho(mu2: float, kappa_bar: float) -> float:
    """Contact distance at the closed-loop equilibrium.

    Root of  kappa_bar*rho^2 + (1 - mu2*kappa_bar)*rho - (mu2 + kappa_bar) = 0,
    solved in the cancellation-free form. Under the intended gains
    (kappa_bar >= 0, mu2 > -kappa_bar) exactly one root is positive.
    Concave misuse (kappa_bar < 0) can produce two positive roots, but
    at most one ever sits on the valid contact branch
    1 + rho*kappa_bar > 0; that one is returned with a warning.
    """
    mu2, kappa_bar = float(mu2), float(kappa_bar)
    if kappa_bar == 0.0:
        if mu2 <= 0.0:
            raise InfeasibleGainsError(
                "flat boundary needs mu2 > 0, got %.6g" % mu2)
        return mu2

    b = 1.0 - mu2 * kappa_bar
    c = -(mu2 + kappa_bar)
    disc = b * b - 4.0 * kappa_bar * c
    if disc < 0.0:
        raise InfeasibleGainsError(
            "equilibrium quadratic has no real root for mu2=%.6g, "
            "kappa_bar=%.6g" % (mu2, kappa_bar))
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b)) if b != 0.0 \
        else math.sqrt(kappa_bar * -c)
    roots = [r for r in (q / kappa_bar, c / q if q != 0.0 else math.inf)
             if r > 0.0 and math.isfinite(r)]
    if not roots:
        raise InfeasibleGainsError(
            "equilibrium quadratic has no positive root for mu2=%.6g, "
            "kappa_bar=%.6g" % (mu2, kappa_bar))
    valid = [r for r in roots if 1.0 + r * kappa_bar > 0.0]
    if not valid:
        raise InfeasibleGainsError(
            "no equilibrium with a valid contact geometry for mu2=%.6g, "
            "kappa_bar=%.6g" % (mu2, kappa_bar))
    if len(roots) > 1:
        warnings.warn("gains admit two positive equilibria; returning the "
                      "one on the valid contact branch", RuntimeWarning,
                      stacklevel=2)
    return valid[0]


def adaptive_mu2(r_arm: float, r_obj: float) -> float:
    """Standoff gain that puts the equilibrium exactly at the arm radius.

    For an object of radius ``r_obj`` this choice makes the closed loop
    settle at contact distance ``r_arm`` (surface touch). The flat-
    boundary limit (``r_obj`` infinite) degenerates to ``r_arm`` itself.
    """
    r_arm, r_obj = float(r_arm), float(r_obj)
    if not r_arm + r_obj > 0.0:
        raise InvalidParameterError("r_arm + r_obj must be positive")
    return r_arm - 1.0 / (r_obj + r_arm)


def adaptive_gains(radius: Union[float, Callable[[float], float]],
                   r_obj: float, mu1: float = 1.0) -> FeedbackGains:
    """Gains with the adaptive standoff rule applied along the arm.

    ``radius`` is the arm radius, constant or a profile over arclength
    (tapered arms vary it), so a profile-valued ``mu2`` tracks the local
    surface-touch equilibrium.
    """
    if callable(radius):
        return FeedbackGains(
            mu1=mu1, mu2=lambda s: adaptive_mu2(radius(s), r_obj))
    return FeedbackGains(mu1=mu1, mu2=adaptive_mu2(radius, r_obj))


def _require_admissible(rho: float, alpha: float, d: float,
                        s: float) -> None:
    if d <= 0.0:
        raise SingularityError(
            "shadow-point map degenerated (1 + rho*kappa_o = %.6g) at "
            "s = %.6g" % (d, s), s=s)
    if rho <= 0.0:
        raise AdmissibilityError(
            "closed loop drove the arm into the boundary (rho = %.6g) at "
            "s = %.6g" % (rho, s), s=s)
    if not 0.0 < alpha < math.pi:
        raise AdmissibilityError(
            "contact angle left (0, pi) (alpha = %.6g) at s = %.6g"
            % (alpha, s), s=s)


def integrate_closed_loop(curve, gains: FeedbackGains,
                          initial: Tuple[float, float, float],
                          length: float, steps: int = 4000
                          ) -> ContactTrajectory:
    """Contact trajectory under the feedback law, fixed-step RK4.

    ``curve`` only needs to expose ``curvature(s_o)``, so idealized
    boundaries (a flat strip, a constant-curvature stub) integrate as
    well as full closed curves. Aborts with a diagnostic the moment the
    state leaves the admissible region.
    """
    if not length > 0.0:
        raise InvalidParameterError("length must be positive")
    if steps < 1:
        raise InvalidParameterError("steps must be at least 1")
    rho0, alpha0, so0 = (float(initial[0]), float(initial[1]),
                         float(initial[2]))
    _require_admissible(rho0, alpha0,
                        1.0 + rho0 * float(curve.curvature(so0)), 0.0)

    h = length / steps
    n = steps + 1
    rho = np.empty(n)
    alpha = np.empty(n)
    s_o = np.empty(n)
    nu = np.empty(n)
    kap = np.empty(n)

    def rhs(r, a, so, s):
        sin_a, cos_a = math.sin(a), math.cos(a)
        if sin_a <= 0.0:
            raise AdmissibilityError(
                "contact angle left (0, pi) at s = %.6g" % s, s=s)
        ko = float(curve.curvature(so))
        d = 1.0 + r * ko
        if d <= 0.0:
            raise SingularityError(
                "shadow-point map degenerated at s = %.6g" % s, s=s)
        k = -gains.mu1 * cos_a + (r - gains.mu2_at(s)) * sin_a
        speed = sin_a / d
        return -cos_a, -k + ko * speed, speed, k

    r, a, so = rho0, alpha0, so0
    for i in range(n):
        s = i * h
        _require_admissible(r, a, 1.0 + r * float(curve.curvature(so)), s)
        dr, da, dso, k = rhs(r, a, so, s)
        rho[i], alpha[i], s_o[i], nu[i], kap[i] = r, a, so, dso, k
        if i == steps:
            break
        k1 = (dr, da, dso)
        k2 = rhs(r + 0.5 * h * k1[0], a + 0.5 * h * k1[1],
                 so + 0.5 * h * k1[2], s + 0.5 * h)[:3]
        k3 = rhs(r + 0.5 * h * k2[0], a + 0.5 * h * k2[1],
                 so + 0.5 * h * k2[2], s + 0.5 * h)[:3]
        k4 = rhs(r + h * k3[0], a + h * k3[1], so + h * k3[2], s + h)[:3]
        r += (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        a += (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        so += (h / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])

    return ContactTrajectory(s=np.arange(n) * h, rho=rho, alpha=alpha,
                             s_o=s_o, nu_o=nu, kappa=kap,
                             initial=(rho0, alpha0, so0))


def lyapunov_value(rho: float, alpha: float, mu2: float,
                   kappa_bar: float) -> float:
    """Lyapunov candidate for the constant-curvature closed loop."""
    rho, alpha = float(rho), float(alpha)
    sin_a = math.sin(alpha)
    if not 0.0 < alpha < math.pi or sin_a <= 0.0:
        raise DomainError("alpha must lie in (0, pi), got %.6g" % alpha)
    d = 1.0 + rho * float(kappa_bar)
    if d <= 0.0:
        raise DomainError(
            "1 + rho*kappa_bar must be positive, got %.6g" % d)
    return (-math.log(sin_a) + 0.5 * (rho - float(mu2)) ** 2
            - math.log(d))


@dataclass(frozen=True)
class LyapunovReport:
    """Decrease certificate evaluated along one trajectory.

    ``max_increase`` is the largest forward-difference slope of the
    Lyapunov value (nonpositive up to integration error on a valid
    closed loop); ``max_mismatch`` the largest absolute gap between that
    slope and the closed-form decrease rate at the step midpoint.
    """

    passed_monotone: bool
    passed_match: bool
    max_increase: float
    max_mismatch: float
    worst_increase_s: float
    worst_mismatch_s: float
    steps: int
    increase_tol: float
    match_tol: float

    @property
    def passed(self) -> bool:
        return self.passed_monotone and self.passed_match


def verify_lyapunov_decrease(traj: ContactTrajectory, gains: FeedbackGains,
                             kappa_bar: float,
                             increase_tol: float = 1e-6,
                             match_tol: float = 1e-4) -> LyapunovReport:
    """Check monotone Lyapunov decrease along a closed-loop trajectory.

    The decrease rate has the closed form -mu1*cos(alpha)^2/sin(alpha)
    on constant-curvature objects; the finite-difference slope of the
    stored values must stay below ``increase_tol`` and agree with the
    closed form at step midpoints within ``match_tol``. Returns a
    report -- regression material, not an exception.
    """
    mu2 = gains.mu2_at(0.0)
    values = np.array([lyapunov_value(r, a, mu2, kappa_bar)
                       for r, a in zip(traj.rho, traj.alpha)])
    h = float(traj.s[1] - traj.s[0])
    slopes = np.diff(values) / h

    mid_alpha = 0.5 * (traj.alpha[:-1] + traj.alpha[1:])
    closed_form = (-gains.mu1 * np.cos(mid_alpha) ** 2
                   / np.sin(mid_alpha))
    mismatch = np.abs(slopes - closed_form)

    i_inc = int(np.argmax(slopes))
    i_mis = int(np.argmax(mismatch))
    max_increase = float(slopes[i_inc])
    max_mismatch = float(mismatch[i_mis])
    return LyapunovReport(passed_monotone=bool(max_increase <= increase_tol),
                          passed_match=bool(max_mismatch <= match_tol),
                          max_increase=max_increase,
                          max_mismatch=max_mismatch,
                          worst_increase_s=float(traj.s[i_inc]),
                          worst_mismatch_s=float(traj.s[i_mis]),
                          steps=int(slopes.size),
                          increase_tol=float(increase_tol),
                          match_tol=float(match_tol))


def quasi_static_reference(curve, traj: ContactTrajectory,
                           gains: FeedbackGains) -> np.ndarray:
    """Pointwise equilibrium distance along a trajectory's shadow path.

    On varying-curvature objects the constant-curvature theory does not
    apply globally; this evaluates the equilibrium root at each node's
    local boundary curvature as a quasi-static reference -- a diagnostic
    extrapolation, not a convergence guarantee. Nodes whose local
    curvature admits no equilibrium hold NaN.
    """
    out = np.empty(traj.s.size)
    for i, (s, so) in enumerate(zip(traj.s, traj.s_o)):
        try:
            out[i] = equilibrium_rho(gains.mu2_at(float(s)),
                                     float(curve.curvature(so)))
        except InfeasibleGainsError:
            out[i] = math.nan
    return out
