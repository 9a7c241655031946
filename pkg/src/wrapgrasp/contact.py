"""Reduced contact kinematics between the arm and an object boundary.

The arm state relative to the object is captured by the contact distance
rho(s) (arm point to nearest boundary point), the contact angle alpha(s)
(rotation from the arm tangent to that direction), and the shadow
arclength s_o(s) of the nearest boundary point. Along the arm:

    d rho/ds   = -cos(alpha)
    d alpha/ds = -kappa(s) + kappa_o(s_o) sin(alpha) / (1 + rho kappa_o)
    d s_o/ds   = nu_o = sin(alpha) / (1 + rho kappa_o)

valid on the admissible region rho > 0, alpha in (0, pi), nu_o > 0 (the
shadow point always moves forward). The arm is taken to travel outside the
enclosed region, so the contact direction is the boundary's left normal.
Contact happens where the contact depth delta = r_arm(s) - rho(s) is
nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .curves import ArmCenterline, BoundaryCurve, closest_point, integrate_arm
from .errors import (AdmissibilityError, ReconstructionMismatchError,
                     SingularityError)

KappaProfile = Union[Callable[[float], float], np.ndarray, Sequence[float]]


# ---------------------------------------------------------------------------
# pointwise kinematics
# ---------------------------------------------------------------------------

def shadow_speed(rho: float, alpha: float, kappa_o: float) -> float:
    """nu_o = sin(alpha) / (1 + rho * kappa_o), the shadow point's speed."""
    den = 1.0 + rho * kappa_o
    if den <= 0.0:
        raise SingularityError(
            "shadow map singular: 1 + rho*kappa_o = %.6g <= 0" % den)
    return math.sin(alpha) / den


def contact_rhs(rho: float, alpha: float, kappa: float,
                kappa_o: float) -> Tuple[float, float]:
    """Rates (d rho/ds, d alpha/ds) of the contact state."""
    nu = shadow_speed(rho, alpha, kappa_o)
    return -math.cos(alpha), -kappa + kappa_o * nu


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContactTrajectory:
    """Contact state sampled on a uniform arm-arclength grid."""

    s: np.ndarray            # (n+1,) arm arclengths, 0 .. L
    rho: np.ndarray          # contact distance, > 0
    alpha: np.ndarray        # contact angle, in (0, pi)
    s_o: np.ndarray          # shadow arclength, strictly increasing
    nu_o: np.ndarray         # shadow speed, > 0
    kappa: np.ndarray        # arm curvature used for the sweep
    delta: Optional[np.ndarray] = None   # r_arm - rho where a radius profile
    radius: Optional[np.ndarray] = None  # was supplied, else None
    initial: Tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))

    def __post_init__(self):
        for a in (self.s, self.rho, self.alpha, self.s_o, self.nu_o,
                  self.kappa, self.delta, self.radius):
            if a is not None:
                a.flags.writeable = False

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def contact_intervals(self, tol: float = 0.0) -> List[Tuple[float, float]]:
        """Closed intervals of the contact set {s : delta(s) >= -tol}.

        Interval endpoints between grid nodes are located by linear
        interpolation of delta.
        """
        if self.delta is None:
            raise ValueError("trajectory carries no radius profile, "
                             "contact depth undefined")
        g = self.delta + tol
        mask = g >= 0.0
        intervals: List[Tuple[float, float]] = []
        start: Optional[float] = None
        for i in range(self.s.size):
            if mask[i] and start is None:
                if i == 0:
                    start = float(self.s[0])
                else:
                    frac = g[i - 1] / (g[i - 1] - g[i])
                    start = float(self.s[i - 1]
                                  + frac * (self.s[i] - self.s[i - 1]))
            elif not mask[i] and start is not None:
                frac = g[i - 1] / (g[i - 1] - g[i])
                end = float(self.s[i - 1]
                            + frac * (self.s[i] - self.s[i - 1]))
                intervals.append((start, end))
                start = None
        if start is not None:
            intervals.append((start, float(self.s[-1])))
        return intervals

    def contact_measure(self, tol: float = 0.0) -> float:
        return sum(b - a for a, b in self.contact_intervals(tol))

    def table(self) -> np.ndarray:
        """Columns s, rho, alpha, s_o, nu_o, delta, in_contact."""
        delta = self.delta if self.delta is not None \
            else np.full(self.s.size, np.nan)
        in_contact = (delta >= 0.0).astype(float)
        return np.column_stack([self.s, self.rho, self.alpha, self.s_o,
                                self.nu_o, delta, in_contact])


def _kappa_arrays(kappa_profile: KappaProfile, s: np.ndarray,
                  h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Node and half-node curvature samples from a callable or node array.

    Array input is interpreted as node values of a piecewise-linear
    profile, so half-node values are midpoint averages.
    """
    if callable(kappa_profile):
        nodes = np.asarray([float(kappa_profile(v)) for v in s])
        halfs = np.asarray([float(kappa_profile(v + 0.5 * h))
                            for v in s[:-1]])
    else:
        nodes = np.asarray(kappa_profile, dtype=float)
        if nodes.shape != s.shape:
            raise ValueError("kappa array must match the node grid "
                             f"({s.size} values)")
        halfs = 0.5 * (nodes[:-1] + nodes[1:])
    return nodes, halfs


def _forward_arrays(curve: BoundaryCurve, kap_nodes: np.ndarray,
                    kap_halfs: np.ndarray, initial: Tuple[float, float, float],
                    h: float):
    """Run the compiled forward sweep; returns (status, index, arrays)."""
    n = kap_nodes.size - 1
    rho = np.empty(n + 1)
    alpha = np.empty(n + 1)
    so = np.empty(n + 1)
    ko = np.empty(n + 1)
    coef, cell, period = curve.curvature_cells()
    status, idx = _kernels.contact_forward(
        float(initial[0]), float(initial[1]), float(initial[2]), h,
        kap_nodes, kap_halfs, coef, cell, period, rho, alpha, so, ko)
    return status, idx, rho, alpha, so, ko


def integrate_contact(curve: BoundaryCurve, kappa_profile: KappaProfile,
                      initial: Tuple[float, float, float], L: float,
                      steps: int = 2000,
                      radius_profile: Optional[Callable[[float], float]] = None
                      ) -> ContactTrajectory:
    """Integrate the contact kinematics over s in [0, L].

    ``initial`` is (rho_0, alpha_0, s_o_0) with s_o_0 the closest-point
    arclength of the arm base. Fixed-step classical 4th-order scheme;
    admissibility is enforced by hard abort (no clamping), reporting the
    violating arclength.
    """
    if not L > 0.0:
        raise ValueError("integration length must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    h = L / steps
    s = np.arange(steps + 1) * h
    kap_nodes, kap_halfs = _kappa_arrays(kappa_profile, s, h)

    status, idx, rho, alpha, so, ko = _forward_arrays(
        curve, kap_nodes, kap_halfs, initial, h)
    if status == 2:
        raise SingularityError(
            "shadow map singular (1 + rho*kappa_o <= 0) near s = %.6g"
            % (idx * h), s=idx * h)
    if status == 1:
        raise AdmissibilityError(
            "trajectory left the admissible region at s = %.6g "
            "(rho = %.6g, alpha = %.6g)" % (idx * h, rho[idx], alpha[idx]),
            s=idx * h)

    den = 1.0 + rho * ko
    nu = np.sin(alpha) / den
    delta = radius = None
    if radius_profile is not None:
        radius = np.asarray([float(radius_profile(v)) for v in s])
        delta = radius - rho
    return ContactTrajectory(s=s, rho=rho, alpha=alpha, s_o=so, nu_o=nu,
                             kappa=kap_nodes, delta=delta, radius=radius,
                             initial=(float(initial[0]), float(initial[1]),
                                      float(initial[2])))


# ---------------------------------------------------------------------------
# pose <-> contact-state conversions
# ---------------------------------------------------------------------------

def contact_state_from_pose(curve: BoundaryCurve, base_point: Sequence[float],
                            base_angle: float,
                            hint: Optional[float] = None
                            ) -> Tuple[float, float, float]:
    """(rho_0, alpha_0, s_o_0) for an arm base pose near the object."""
    r = closest_point(curve, base_point, hint=hint)
    p = np.asarray(base_point, dtype=float)
    direction = (curve.position(r.s_o) - p) / r.distance
    ca, sa = math.cos(base_angle), math.sin(base_angle)
    cross = ca * direction[1] - sa * direction[0]
    dot = ca * direction[0] + sa * direction[1]
    alpha = math.atan2(cross, dot)
    if not 0.0 < alpha < math.pi:
        raise AdmissibilityError(
            "base pose has the object on the wrong side: alpha = %.6g "
            "not in (0, pi)" % alpha)
    return r.distance, alpha, r.s_o


def pose_from_contact(curve: BoundaryCurve, rho: float, alpha: float,
                      s_o: float) -> Tuple[np.ndarray, float]:
    """Arm point and tangent angle realizing a contact state.

    The contact direction is the boundary's left normal at s_o (arm
    outside the enclosed region), so the arm point is gamma - rho*n and
    its tangent angle is phi + pi/2 - alpha.
    """
    gamma = curve.position(s_o)
    phi = float(curve.tangent_angle(s_o))
    normal = np.array([-math.sin(phi), math.cos(phi)])
    point = gamma - rho * normal
    theta = phi + 0.5 * math.pi - alpha
    return point, theta


def reconstruct_arm(curve: BoundaryCurve, traj: ContactTrajectory,
                    kappa_profile: KappaProfile,
                    base: Optional[Tuple[Sequence[float], float]] = None
                    ) -> ArmCenterline:
    """Integrate the arm centerline matching a contact trajectory.

    When ``base`` is omitted the pose is derived from the trajectory's
    initial contact state. The reconstruction is cross-checked against the
    trajectory: the distance from each arm sample to its shadow point must
    equal rho(s), and the connecting segment must be orthogonal to the
    boundary tangent.
    """
    steps = traj.s.size - 1
    if base is None:
        rho0, alpha0, so0 = traj.initial
        point, theta = pose_from_contact(curve, rho0, alpha0, so0)
    else:
        point, theta = np.asarray(base[0], dtype=float), float(base[1])

    if callable(kappa_profile):
        profile = kappa_profile
    else:
        nodes = np.asarray(kappa_profile, dtype=float)
        h = traj.s[1] - traj.s[0]

        def profile(v, _nodes=nodes, _h=h):
            j = min(int(v / _h), _nodes.size - 2)
            frac = v / _h - j
            return (1.0 - frac) * _nodes[j] + frac * _nodes[j + 1]

    arm = integrate_arm(profile, (point, theta), traj.length, steps=steps)

    gamma = curve.position(traj.s_o)
    offsets = gamma - arm.points
    dist = np.linalg.norm(offsets, axis=1)
    L = traj.length
    if np.abs(dist - traj.rho).max() > 1e-4 * L:
        raise ReconstructionMismatchError(
            "arm-to-shadow distance deviates from rho by %.3g (max, "
            "tolerance %.3g)" % (np.abs(dist - traj.rho).max(), 1e-4 * L))
    tangents = curve.tangent(traj.s_o)
    ortho = np.abs(np.sum(offsets * tangents, axis=1))
    if ortho.max() > 1e-6 * L:
        raise ReconstructionMismatchError(
            "orthogonality residual %.3g exceeds %.3g"
            % (ortho.max(), 1e-6 * L))
    return arm
