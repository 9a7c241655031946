"""Arclength-parameterized planar boundary curves and arm centerlines.

Conventions used throughout the package:

* object boundaries are closed, simple, and traversed counterclockwise;
* ``s_o`` is arclength along the object boundary, ``s`` arclength along
  the arm;
* the boundary tangent is t = (cos phi, sin phi); the left normal
  n = (-sin phi, cos phi) points into the enclosed region;
* curvature follows dphi/ds_o = kappa_o, so convex arcs have kappa_o > 0
  and concave dents kappa_o < 0;
* the arm centerline obeys dr/ds = (cos theta, sin theta),
  dtheta/ds = kappa(s).

Provides:

* ``BoundaryCurve`` -- immutable sampled closed curve with periodic cubic
  interpolation of position and curvature
* ``build_circle`` / ``build_ellipse`` / ``build_deformed_circle``
* ``eval_boundary`` / ``closest_point`` -- boundary queries
* ``ArmCenterline`` / ``integrate_arm`` -- fixed-step 4th-order integration
  of the arm kinematics from a curvature profile
* ``tapered_radius`` -- linear cross-section radius profile
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import ConstructionError, InvalidParameterError, TrackingLostError

TWO_PI = 2.0 * math.pi

# number of uniform arclength samples stored per curve
DEFAULT_SAMPLES = 4096


# ---------------------------------------------------------------------------
# periodic interpolation helper
# ---------------------------------------------------------------------------

class _PeriodicCubic:
    """Cubic spline on a uniform grid over [0, period], wrapped periodically.

    Knot values must satisfy v[-1] == v[0]; evaluation wraps the query
    modulo the period first, so eval(x) and eval(x mod period) are
    bit-identical.
    """

    def __init__(self, period: float, values: np.ndarray):
        n = values.shape[0] - 1
        self.period = float(period)
        self.h = self.period / n
        knots = np.linspace(0.0, self.period, n + 1)
        self._cs = CubicSpline(knots, values, bc_type="periodic")
        self._deriv = self._cs.derivative()

    def wrap(self, x):
        return np.mod(x, self.period)

    def __call__(self, x):
        return self._cs(self.wrap(x))

    def slope(self, x):
        return self._deriv(self.wrap(x))

    def cells(self) -> np.ndarray:
        """Per-interval coefficients packed for Horner evaluation.

        Row j holds (a0, a1, a2, a3) with
        value = a0 + u*(a1 + u*(a2 + u*a3)), u = x - j*h.
        """
        c = self._cs.c  # shape (4, n): c[0] cubic ... c[3] constant
        return np.ascontiguousarray(np.stack([c[3], c[2], c[1], c[0]], axis=1))


# ---------------------------------------------------------------------------
# boundary curve
# ---------------------------------------------------------------------------

class BoundaryCurve:
    """Closed planar curve sampled at uniform arclength.

    Attributes
    ----------
    length : float
        Total arclength L_o.
    s : (N,) array
        Sample arclengths, uniform in [0, L_o).
    gamma : (N, 2) array
        Sample positions.
    phi : (N,) array
        Tangent angles, stored unwrapped (cumulative) so interpolation
        never crosses a 2*pi seam; phi increases by exactly 2*pi per lap.
    kappa : (N,) array
        Signed curvature at the samples.

    All arrays are read-only; instances are immutable after construction
    and safe to share across threads.
    """

    def __init__(self, length: float, gamma: np.ndarray, phi: np.ndarray,
                 kappa: np.ndarray):
        gamma = np.array(gamma, dtype=float)
        phi = np.array(phi, dtype=float)
        kappa = np.array(kappa, dtype=float)
        n = gamma.shape[0]
        if gamma.shape != (n, 2) or phi.shape != (n,) or kappa.shape != (n,):
            raise InvalidParameterError("inconsistent sample array shapes")
        if not (np.isfinite(length) and length > 0.0):
            raise InvalidParameterError("curve length must be positive")
        if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(phi))
                and np.all(np.isfinite(kappa))):
            raise ConstructionError("non-finite curve samples")

        self.length = float(length)
        self.s = np.arange(n) * (self.length / n)
        self.gamma = gamma
        self.phi = phi
        self.kappa = kappa
        for a in (self.s, self.gamma, self.phi, self.kappa):
            a.flags.writeable = False

        # periodic interpolants; the tangent angle is split into a linear
        # winding part 2*pi*s_o/L_o plus a periodic remainder so the spline
        # sees periodic data.
        ext = lambda v: np.concatenate([v, v[:1]])
        self._px = _PeriodicCubic(self.length, ext(gamma[:, 0]))
        self._py = _PeriodicCubic(self.length, ext(gamma[:, 1]))
        self._pk = _PeriodicCubic(self.length, ext(kappa))
        rem = phi - TWO_PI * self.s / self.length
        self._pphi = _PeriodicCubic(self.length, ext(rem))

    # -- queries ------------------------------------------------------------

    def wrap(self, s_o):
        """Map arclength onto the fundamental period [0, L_o)."""
        return np.mod(s_o, self.length)

    def position(self, s_o):
        w = self.wrap(s_o)
        return np.stack([self._px(w), self._py(w)], axis=-1)

    def tangent_angle(self, s_o):
        """Unwrapped tangent angle: continuous in s_o across laps."""
        s_o = np.asarray(s_o, dtype=float)
        w = self.wrap(s_o)
        lap = np.floor(s_o / self.length)
        return self._pphi(w) + TWO_PI * (w / self.length + lap)

    def curvature(self, s_o):
        return self._pk(s_o)

    def curvature_slope(self, s_o):
        """d kappa_o / d s_o, from the same interpolant as curvature()."""
        return self._pk.slope(s_o)

    def tangent(self, s_o):
        a = self.tangent_angle(s_o)
        return np.stack([np.cos(a), np.sin(a)], axis=-1)

    def normal(self, s_o):
        """Left normal (points into the enclosed region for CCW curves)."""
        a = self.tangent_angle(s_o)
        return np.stack([-np.sin(a), np.cos(a)], axis=-1)

    @property
    def centroid(self) -> np.ndarray:
        return self.gamma.mean(axis=0)

    @property
    def min_curvature(self) -> float:
        return float(self.kappa.min())

    @property
    def max_curvature(self) -> float:
        return float(self.kappa.max())

    @property
    def is_convex(self) -> bool:
        return self.min_curvature >= 0.0

    # -- plumbing for the integration kernels --------------------------------

    def curvature_cells(self) -> Tuple[np.ndarray, float, float]:
        """(coefficients, cell width, period) of the curvature interpolant."""
        return self._pk.cells(), self._pk.h, self.length

    def sample_table(self) -> np.ndarray:
        """(N, 5) array with columns s_o, x, y, phi, kappa_o."""
        return np.column_stack([self.s, self.gamma, self.phi, self.kappa])


def eval_boundary(curve: BoundaryCurve, s_o) -> Tuple[np.ndarray, float, float]:
    """Evaluate (position, tangent angle, curvature) at arclength s_o.

    s_o is wrapped modulo L_o; the angle is returned unwrapped-consistent
    with neighboring arclengths.
    """
    return (curve.position(s_o), curve.tangent_angle(s_o),
            curve.curvature(s_o))


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def build_circle(radius: float, center: Sequence[float] = (0.0, 0.0),
                 samples: int = DEFAULT_SAMPLES) -> BoundaryCurve:
    """Circle of given radius, s_o = 0 at the positive-x axis crossing."""
    _check_samples(samples)
    if not radius > 0.0:
        raise InvalidParameterError("circle radius must be positive")
    center = np.asarray(center, dtype=float)
    length = TWO_PI * radius
    s = np.arange(samples) * (length / samples)
    u = s / radius
    gamma = center + radius * np.column_stack([np.cos(u), np.sin(u)])
    phi = u + 0.5 * math.pi
    kappa = np.full(samples, 1.0 / radius)
    return BoundaryCurve(length, gamma, phi, kappa)


def build_ellipse(semi_major: float, semi_minor: float,
                  center: Sequence[float] = (0.0, 0.0),
                  samples: int = DEFAULT_SAMPLES) -> BoundaryCurve:
    """Axis-aligned ellipse, arclength-reparameterized to unit speed.

    s_o = 0 sits at the semi-major vertex (center + (a, 0)).
    """
    _check_samples(samples)
    a, b = float(semi_major), float(semi_minor)
    if not (a >= b > 0.0):
        raise InvalidParameterError(
            "ellipse axes must satisfy semi_major >= semi_minor > 0")

    def pos(t):
        return a * np.cos(t), b * np.sin(t)

    def deriv(t):
        return -a * np.sin(t), b * np.cos(t)

    def curv(t):
        return a * b / (a * a * np.sin(t) ** 2 + b * b * np.cos(t) ** 2) ** 1.5

    return _reparameterized_curve(pos, deriv, curv, center, samples)


def build_deformed_circle(base_radius: float, amplitude: float = 0.15,
                          mode: int = 3,
                          center: Sequence[float] = (0.0, 0.0),
                          samples: int = DEFAULT_SAMPLES) -> BoundaryCurve:
    """Cosine-perturbed circle: polar radius R*(1 + amplitude*cos(mode*psi)).

    |amplitude| < 1 keeps the polar radius positive, which guarantees a
    simple closed curve. Amplitudes above 1/(1 + mode^2) produce concave
    lobes (kappa_o < 0 there); callers that need a convex boundary should
    check ``is_convex`` on the result.
    """
    _check_samples(samples)
    R, A, m = float(base_radius), float(amplitude), int(mode)
    if not R > 0.0:
        raise InvalidParameterError("base radius must be positive")
    if m < 0:
        raise InvalidParameterError("mode must be a nonnegative integer")
    if not abs(A) < 1.0:
        raise ConstructionError(
            "|amplitude| >= 1 collapses the polar radius; curve would "
            "self-intersect")

    def radial(t):
        return R * (1.0 + A * np.cos(m * t))

    def pos(t):
        r = radial(t)
        return r * np.cos(t), r * np.sin(t)

    def deriv(t):
        r = radial(t)
        dr = -R * A * m * np.sin(m * t)
        return dr * np.cos(t) - r * np.sin(t), dr * np.sin(t) + r * np.cos(t)

    def curv(t):
        r = radial(t)
        dr = -R * A * m * np.sin(m * t)
        ddr = -R * A * m * m * np.cos(m * t)
        return (r * r + 2.0 * dr * dr - r * ddr) / (r * r + dr * dr) ** 1.5

    return _reparameterized_curve(pos, deriv, curv, center, samples)


def _check_samples(samples: int) -> None:
    if int(samples) != samples or samples < 16:
        raise InvalidParameterError("samples must be an integer >= 16")


# 15-point Gauss-Legendre rule, used for per-interval arclength increments
_GL_X, _GL_W = np.polynomial.legendre.leggauss(15)


def _reparameterized_curve(pos, deriv, curv, center, samples) -> BoundaryCurve:
    """Build a BoundaryCurve from a smooth parametric loop over t in [0, 2pi].

    A dense parameter->arclength table is built by per-interval quadrature
    (cross-checked against adaptive quadrature of the speed), inverted by
    monotone cubic interpolation, and refined by Newton steps so the stored
    samples sit on uniform arclength to near machine precision.
    """
    center = np.asarray(center, dtype=float)

    def speed(t):
        dx, dy = deriv(t)
        return np.hypot(dx, dy)

    m_table = 4096
    t_table = np.linspace(0.0, TWO_PI, m_table + 1)
    # composite Gauss-Legendre arclength increments, vectorized over intervals
    half = 0.5 * (t_table[1] - t_table[0])
    mids = 0.5 * (t_table[:-1] + t_table[1:])
    nodes = mids[:, None] + half * _GL_X[None, :]
    seg = half * speed(nodes) @ _GL_W
    s_table = np.concatenate([[0.0], np.cumsum(seg)])
    length = float(s_table[-1])

    total, _ = quad(speed, 0.0, TWO_PI, epsabs=1e-10, epsrel=1e-10, limit=200)
    if abs(total - length) > 1e-9 * length:
        raise ConstructionError(
            "arclength table disagrees with adaptive quadrature")

    t_of_s = PchipInterpolator(s_table, t_table)
    s = np.arange(samples) * (length / samples)
    t = np.asarray(t_of_s(s))
    # Newton refinement of s(t_k) = s_k using local quadrature increments
    for _ in range(3):
        j = np.clip(np.searchsorted(t_table, t, side="right") - 1,
                    0, m_table - 1)
        a = t_table[j]
        halfw = 0.5 * (t - a)
        nodes = 0.5 * (t + a)[:, None] + halfw[:, None] * _GL_X[None, :]
        s_at_t = s_table[j] + halfw * (speed(nodes) @ _GL_W)
        t = t - (s_at_t - s) / speed(t)

    x, y = pos(t)
    dx, dy = deriv(t)
    phi = np.unwrap(np.arctan2(dy, dx))
    # total turning must be exactly one CCW lap: the gap left between the
    # last sample and phi(0) + 2*pi is then under one sample's worth
    last_gap = phi[0] + TWO_PI - phi[-1]
    if not -math.pi < last_gap < math.pi:
        raise ConstructionError(
            "total turning differs from 2*pi; loop is not simple/CCW")
    kappa = np.asarray(curv(t))
    gamma = center + np.column_stack([x, y])
    return BoundaryCurve(length, gamma, phi, kappa)


# ---------------------------------------------------------------------------
# closest-point queries
# ---------------------------------------------------------------------------

class ClosestPoint(NamedTuple):
    s_o: float
    distance: float
    ambiguous: bool = False


def closest_point(curve: BoundaryCurve, point: Sequence[float],
                  hint: Optional[float] = None) -> ClosestPoint:
    """Arclength of the boundary point nearest to ``point``.

    Without a hint the global minimizer is found by a dense scan over the
    stored samples followed by local refinement. With a hint, only the
    window [hint, hint + L_o/4] is searched and the nearest local
    minimizer at or ahead of the hint is returned (the shadow point moves
    forward along the boundary); the returned s_o is then unwrapped
    (monotone with the hint, may exceed L_o).
    """
    p = np.asarray(point, dtype=float)

    if hint is None:
        return _closest_global(curve, p)
    return _closest_hinted(curve, p, float(hint))


def _dist2(curve: BoundaryCurve, p: np.ndarray, s):
    g = curve.position(s)
    d = g - p
    return np.sum(d * d, axis=-1)


def _closest_global(curve: BoundaryCurve, p: np.ndarray) -> ClosestPoint:
    d2 = _dist2(curve, p, curve.s)
    j = int(np.argmin(d2))
    dmin = math.sqrt(d2[j])

    # degenerate queries (e.g. circle center): a wide stretch of samples is
    # equally close -> deterministic tie-break at the smallest arclength.
    band = np.flatnonzero(np.sqrt(d2) <= dmin + 1e-9 * curve.length)
    if band.size > curve.s.size // 4:
        s0 = float(curve.s[band[0]])
        return ClosestPoint(s0, math.sqrt(_dist2(curve, p, s0)), True)

    h = curve.length / curve.s.size
    lo, hi = curve.s[j] - h, curve.s[j] + h
    s_star = _refine_minimum(curve, p, lo, hi)
    dist = math.sqrt(_dist2(curve, p, s_star))
    _reject_on_curve(dist)

    # multiple separated minima within tolerance -> ambiguous; keep the
    # smallest arclength among them.
    others = band[(band < j - 2) | (band > j + 2)]
    ambiguous = False
    for k in np.split(others, np.flatnonzero(np.diff(others) > 1) + 1):
        if k.size == 0:
            continue
        jj = k[int(np.argmin(d2[k]))]
        alt = _refine_minimum(curve, p, curve.s[jj] - h, curve.s[jj] + h)
        alt_dist = math.sqrt(_dist2(curve, p, alt))
        if abs(alt_dist - dist) <= 1e-9 * max(1.0, curve.length):
            ambiguous = True
            if curve.wrap(alt) < curve.wrap(s_star):
                s_star, dist = alt, alt_dist
    s_star = float(curve.wrap(s_star))
    if curve.length - s_star < 1e-9 * curve.length:
        s_star = 0.0
    return ClosestPoint(s_star, dist, ambiguous)


def _closest_hinted(curve: BoundaryCurve, p: np.ndarray,
                    hint: float) -> ClosestPoint:
    window = 0.25 * curve.length
    grid = np.linspace(hint, hint + window, 257)
    d2 = _dist2(curve, p, grid)

    idx = None
    if d2[0] <= d2[1]:
        idx = 0
    else:
        interior = np.flatnonzero((d2[1:-1] <= d2[:-2]) & (d2[1:-1] <= d2[2:]))
        if interior.size:
            idx = int(interior[0]) + 1
    if idx is None:
        raise TrackingLostError(
            "no closest-point minimizer within [hint, hint + L_o/4]; "
            "shadow tracking lost at hint %.6g" % hint)

    lo = grid[max(idx - 1, 0)]
    hi = grid[min(idx + 1, grid.size - 1)]
    s_star = _refine_minimum(curve, p, lo, hi)
    s_star = max(s_star, hint)  # forward motion only
    dist = math.sqrt(_dist2(curve, p, s_star))
    _reject_on_curve(dist)
    return ClosestPoint(float(s_star), dist, False)


def _reject_on_curve(dist: float) -> None:
    if dist < 1e-12:
        raise InvalidParameterError(
            "query point lies on the boundary curve (distance < 1e-12)")


def _refine_minimum(curve: BoundaryCurve, p: np.ndarray,
                    lo: float, hi: float) -> float:
    """Golden-section to 1e-10 relative, then Newton polish on the
    orthogonality condition (gamma(s) - p) . t(s) = 0."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _dist2(curve, p, c)
    fd = _dist2(curve, p, d)
    tol = 1e-10 * curve.length
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _dist2(curve, p, c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _dist2(curve, p, d)
    s = 0.5 * (a + b)

    for _ in range(4):
        g = curve.position(s) - p
        t = curve.tangent(s)
        n = curve.normal(s)
        res = float(g @ t)
        slope = 1.0 + curve.curvature(s) * float(g @ n)
        if slope <= 0.0:
            break
        step = res / slope
        if abs(step) > (hi - lo):
            break
        s -= step
    return float(s)


# ---------------------------------------------------------------------------
# arm centerline
# ---------------------------------------------------------------------------

class ArmCenterline:
    """Sampled arm centerline r(s), theta(s), kappa(s) over s in [0, L].

    Immutable; arrays are read-only. ``radius`` holds the cross-section
    radius profile sampled on the same grid when one was supplied.
    """

    def __init__(self, s: np.ndarray, points: np.ndarray, theta: np.ndarray,
                 kappa: np.ndarray, radius: Optional[np.ndarray] = None):
        self.s = s
        self.points = points
        self.theta = theta
        self.kappa = kappa
        self.radius = radius
        self.length = float(s[-1])
        self.base_point = points[0].copy()
        self.base_angle = float(theta[0])
        for a in (self.s, self.points, self.theta, self.kappa):
            a.flags.writeable = False
        if radius is not None:
            radius.flags.writeable = False

    @property
    def tip(self) -> np.ndarray:
        return self.points[-1]


def integrate_arm(kappa_profile: Callable[[float], float],
                  base: Tuple[Sequence[float], float], L: float,
                  steps: int = 2000,
                  radius_profile: Optional[Callable[[float], float]] = None
                  ) -> ArmCenterline:
    """Integrate dr/ds = (cos theta, sin theta), dtheta/ds = kappa(s).

    Classical fixed-step 4th-order scheme with ``steps`` intervals.
    """
    if not L > 0.0:
        raise InvalidParameterError("arm length must be positive")
    if steps < 1:
        raise InvalidParameterError("steps must be >= 1")
    (x, y), th = np.asarray(base[0], dtype=float), float(base[1])
    h = L / steps
    n = steps + 1
    s = np.arange(n) * h
    pts = np.empty((n, 2))
    theta = np.empty(n)
    pts[0] = (x, y)
    theta[0] = th

    for i in range(steps):
        si = s[i]
        k1 = kappa_profile(si)
        k2 = kappa_profile(si + 0.5 * h)
        k4 = kappa_profile(si + h)

        c1, s1 = math.cos(th), math.sin(th)
        th2 = th + 0.5 * h * k1
        c2, s2 = math.cos(th2), math.sin(th2)
        th3 = th + 0.5 * h * k2
        c3, s3 = math.cos(th3), math.sin(th3)
        th4 = th + h * k2
        c4, s4 = math.cos(th4), math.sin(th4)

        x += h * (c1 + 2.0 * (c2 + c3) + c4) / 6.0
        y += h * (s1 + 2.0 * (s2 + s3) + s4) / 6.0
        th += h * (k1 + 4.0 * k2 + k4) / 6.0
        pts[i + 1] = (x, y)
        theta[i + 1] = th

    kap = np.array([kappa_profile(v) for v in s], dtype=float)
    rad = None
    if radius_profile is not None:
        rad = np.array([radius_profile(v) for v in s], dtype=float)
        if np.any(rad <= 0.0):
            raise InvalidParameterError("arm radius profile must be positive")
    return ArmCenterline(s, pts, theta, kap, rad)


def tapered_radius(r_base: float, r_tip: float, L: float
                   ) -> Callable[[float], float]:
    """Linear taper r_arm(s) = r_base + (r_tip - r_base) * s / L."""
    if r_base <= 0.0 or r_tip <= 0.0:
        raise InvalidParameterError("arm radii must be positive")
    slope = (r_tip - r_base) / L

    def profile(s):
        return r_base + slope * s

    return profile
