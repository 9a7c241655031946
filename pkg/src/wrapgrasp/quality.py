"""Grasp maps, contact Gramians, quality metrics, and placement search.

A wrapped arm transmits distributed contact forces to the object through
a line-of-contact grasp map. This module builds the pointwise 3x2 map,
integrates its second moments over a contact set (the Gramian), derives
three scalar quality metrics from the Gramian spectrum, sweeps base
placements over an annular region around the object, and searches that
region for the best placement per metric.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .contact import ContactTrajectory, contact_state_from_pose
from .curves import BoundaryCurve, closest_point
from .errors import (AdmissibilityError, EmptyContactError,
                     InvalidParameterError, OptimizationFailedError,
                     SingularityError)
from .pmp import OcpSpec, SolveReport, SolverConfig, solve

__all__ = [
    "PointGraspMap", "GraspGramian", "QualityMap", "ArmConfig",
    "SingularValueReport", "OptimalGrasp",
    "point_grasp_map", "gramian", "trajectory_gramian", "eigenvalues_sym3",
    "jacobi_eigensystem", "continuum_wrench", "singular_values_check",
    "shadow_interpolant", "quality_map", "maximize_quality",
    "inner_solver_defaults",
]

TWO_PI = 2.0 * math.pi

Intervals = Sequence[Tuple[float, float]]
ShadowMap = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# pointwise grasp map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointGraspMap:
    """3x2 map from a local contact force to a planar wrench.

    The columns transform a force expressed in the contact frame (the
    laboratory frame rotated by the boundary tangent angle) into global
    force components plus the moment about the laboratory origin.
    """

    matrix: np.ndarray
    position: np.ndarray
    tangent_angle: float

    def __post_init__(self):
        self.matrix.flags.writeable = False
        self.position.flags.writeable = False


def point_grasp_map(position: Sequence[float],
                    tangent_angle: float) -> PointGraspMap:
    """Wrench map of a single contact point.

    Top block: rotation by ``tangent_angle``. Third row: the moment arm,
    the perpendicular of ``position`` composed with the same rotation.
    """
    g = np.asarray(position, dtype=float)
    if g.shape != (2,):
        raise InvalidParameterError("contact position must be a 2-vector")
    c, s = math.cos(tangent_angle), math.sin(tangent_angle)
    rot = np.array([[c, -s], [s, c]])
    perp = np.array([-g[1], g[0]])
    return PointGraspMap(matrix=np.vstack([rot, perp @ rot]),
                         position=g, tangent_angle=float(tangent_angle))


# ---------------------------------------------------------------------------
# symmetric 3x3 eigenproblem
# ---------------------------------------------------------------------------

def jacobi_eigensystem(matrix,
                       max_sweeps: int = 64) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric 3x3 matrix by Jacobi rotations.

    Returns ``(values, vectors)`` with values sorted descending and the
    matching eigenvectors in columns. Rotations cycle until the
    off-diagonal norm drops below 1e-12 of the trace magnitude (with a
    Frobenius floor for traceless input); quadratic convergence makes the
    sweep cap generous. Preferred over the closed-form cubic because it
    stays accurate near repeated eigenvalues, which the circular-object
    Gramian hits exactly.
    """
    a = np.asarray(matrix, dtype=float)
    if a.shape != (3, 3):
        raise InvalidParameterError("expected a 3x3 matrix")
    a = 0.5 * (a + a.T)
    v = np.eye(3)
    scale = max(abs(a[0, 0] + a[1, 1] + a[2, 2]),
                math.sqrt(float(np.sum(a * a))), 1e-300)
    tol = 1e-12 * scale

    for _ in range(max_sweeps):
        off = math.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off <= tol:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p, q]
            if apq == 0.0:
                continue
            tau = 0.5 * (a[q, q] - a[p, p]) / apq
            t = math.copysign(1.0, tau) / (abs(tau)
                                           + math.sqrt(1.0 + tau * tau))
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = t * c
            rot = np.eye(3)
            rot[p, p] = rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            a = 0.5 * (a + a.T)
            v = v @ rot

    d = np.diag(a).copy()
    order = np.argsort(d)[::-1]
    return d[order], v[:, order]


def eigenvalues_sym3(matrix) -> np.ndarray:
    """Descending eigenvalues of a symmetric 3x3 matrix."""
    values, _ = jacobi_eigensystem(matrix)
    return values


def _det3(w: np.ndarray) -> float:
    return float(
        w[0, 0] * (w[1, 1] * w[2, 2] - w[1, 2] * w[2, 1])
        - w[0, 1] * (w[1, 0] * w[2, 2] - w[1, 2] * w[2, 0])
        + w[0, 2] * (w[1, 0] * w[2, 1] - w[1, 1] * w[2, 0]))


# ---------------------------------------------------------------------------
# Gramian over a contact set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraspGramian:
    """Second-moment matrix of the grasp map over a contact set.

    ``q1`` is the smallest eigenvalue (worst-direction gain), ``q2`` the
    determinant (wrench-ellipsoid volume), ``q3`` the smallest-to-largest
    eigenvalue ratio (isotropy, clipped into [0, 1] against roundoff).
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    q1: float
    q2: float
    q3: float
    measure: float

    def __post_init__(self):
        self.matrix.flags.writeable = False
        self.eigenvalues.flags.writeable = False

    @property
    def singular_values(self) -> np.ndarray:
        """Spectrum of the continuum map: square roots of the eigenvalues."""
        return np.sqrt(np.clip(self.eigenvalues, 0.0, None))

    def metric(self, index: int) -> float:
        if index not in (1, 2, 3):
            raise InvalidParameterError("metric index must be 1, 2 or 3")
        return (self.q1, self.q2, self.q3)[index - 1]


def _clean_intervals(contact_set: Intervals) -> List[Tuple[float, float]]:
    out = []
    for pair in contact_set:
        a, b = float(pair[0]), float(pair[1])
        if b > a:
            out.append((a, b))
    if not out:
        raise EmptyContactError("contact set is empty")
    return out


def _quadrature(intervals: List[Tuple[float, float]],
                samples: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Simpson nodes and weights covering each interval.

    The sample budget is split across intervals in proportion to length,
    at least eight panels each, so one number controls refinement.
    """
    total = sum(b - a for a, b in intervals)
    nodes, weights = [], []
    for a, b in intervals:
        panels = max(8, 2 * int(math.ceil(0.5 * samples * (b - a) / total)))
        x = np.linspace(a, b, panels + 1)
        w = np.full(panels + 1, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        nodes.append(x)
        weights.append(w * ((b - a) / panels / 3.0))
    return np.concatenate(nodes), np.concatenate(weights)


def _map_shadow(s_o_map: ShadowMap, s_nodes: np.ndarray) -> np.ndarray:
    try:
        so = np.asarray(s_o_map(s_nodes), dtype=float)
        if so.shape == s_nodes.shape:
            return so
    except (TypeError, ValueError):
        pass
    return np.asarray([float(s_o_map(v)) for v in s_nodes])


def shadow_interpolant(trajectory: ContactTrajectory) -> ShadowMap:
    """Piecewise-linear arm-arclength -> shadow-arclength map."""
    s_grid, so_grid = trajectory.s, trajectory.s_o

    def s_o_map(s):
        return np.interp(s, s_grid, so_grid)

    return s_o_map


def gramian(curve: BoundaryCurve, contact_set: Intervals,
            s_o_map: ShadowMap, samples: int = 2048) -> GraspGramian:
    """Integrated second moments of the grasp map over a contact set.

    ``contact_set`` lists closed [start, end] intervals of arm arclength;
    ``s_o_map`` sends arm arclength to the contacted boundary arclength.
    Because the force block of each pointwise map is a rotation, the
    integrand depends only on the contact position: the Gramian reduces
    to the set measure, the first moment of the contact positions, and
    their second moment about the origin, making the matrix exactly
    symmetric by construction.
    """
    nodes, w = _quadrature(_clean_intervals(contact_set), samples)
    gam = curve.position(_map_shadow(s_o_map, nodes))
    m0 = float(np.sum(w))
    mx = float(np.dot(w, gam[:, 0]))
    my = float(np.dot(w, gam[:, 1]))
    m2 = float(np.dot(w, gam[:, 0] ** 2 + gam[:, 1] ** 2))
    wmat = np.array([[m0, 0.0, -my],
                     [0.0, m0, mx],
                     [-my, mx, m2]])
    values, _ = jacobi_eigensystem(wmat)
    lam_max, lam_min = float(values[0]), float(values[2])
    q3 = min(max(lam_min / lam_max, 0.0), 1.0) if lam_max > 0.0 else 0.0
    return GraspGramian(matrix=wmat, eigenvalues=values, q1=lam_min,
                        q2=_det3(wmat), q3=q3, measure=m0)


def trajectory_gramian(curve: BoundaryCurve, trajectory: ContactTrajectory,
                       tol: float = 0.0, samples: int = 2048) -> GraspGramian:
    """Gramian of the contact set a solved trajectory establishes."""
    return gramian(curve, trajectory.contact_intervals(tol),
                   shadow_interpolant(trajectory), samples=samples)


# ---------------------------------------------------------------------------
# continuum wrench and spectrum cross-check
# ---------------------------------------------------------------------------

def _eval_force(force_profile, s_nodes: np.ndarray) -> np.ndarray:
    try:
        f = np.asarray(force_profile(s_nodes), dtype=float)
        if f.shape == (s_nodes.size, 2):
            return f
    except (TypeError, ValueError):
        pass
    return np.asarray([np.asarray(force_profile(v), dtype=float)
                       for v in s_nodes])


def continuum_wrench(curve: BoundaryCurve, contact_set: Intervals,
                     s_o_map: ShadowMap, force_profile,
                     samples: int = 2048) -> np.ndarray:
    """Net planar wrench of a distributed contact force.

    ``force_profile`` maps arm arclength to a 2-vector force density in
    the local contact frame. The result stacks the global force with the
    moment about the laboratory origin.
    """
    nodes, w = _quadrature(_clean_intervals(contact_set), samples)
    so = _map_shadow(s_o_map, nodes)
    gam = curve.position(so)
    phi = np.asarray(curve.tangent_angle(so), dtype=float)
    f = _eval_force(force_profile, nodes)
    if f.shape != (nodes.size, 2):
        raise InvalidParameterError("force profile must yield 2-vectors")
    c, s = np.cos(phi), np.sin(phi)
    fx = c * f[:, 0] - s * f[:, 1]
    fy = s * f[:, 0] + c * f[:, 1]
    moment = gam[:, 0] * fy - gam[:, 1] * fx
    return np.array([float(np.dot(w, fx)), float(np.dot(w, fy)),
                     float(np.dot(w, moment))])


@dataclass(frozen=True)
class SingularValueReport:
    """Agreement between the operator spectrum and the Gramian roots."""

    top_singular_value: float    # leading value from power iteration
    gramian_root: float          # square root of the largest eigenvalue
    singular_values: np.ndarray  # all three Gramian roots, descending
    relative_gap: float
    iterations: int
    converged: bool
    passed: bool

    def __post_init__(self):
        self.singular_values.flags.writeable = False


def singular_values_check(curve: BoundaryCurve, contact_set: Intervals,
                          s_o_map: ShadowMap, samples: int = 2048,
                          tol: float = 1e-4,
                          max_iterations: int = 20000) -> SingularValueReport:
    """Cross-check the grasp-map spectrum against the Gramian.

    Power iteration runs on grid-sampled force profiles: each step sends
    a profile to its net wrench and back through the transposed pointwise
    maps, which is the discretized normal operator of the continuum map.
    The leading Rayleigh quotient must match the largest Gramian
    eigenvalue, so its root must match the top singular value.
    """
    nodes, w = _quadrature(_clean_intervals(contact_set), samples)
    so = _map_shadow(s_o_map, nodes)
    gam = curve.position(so)
    phi = np.asarray(curve.tangent_angle(so), dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    perp = np.column_stack([-gam[:, 1], gam[:, 0]])

    def wrench_of(f):
        fx = c * f[:, 0] - s * f[:, 1]
        fy = s * f[:, 0] + c * f[:, 1]
        return np.array([np.dot(w, fx), np.dot(w, fy),
                         np.dot(w, perp[:, 0] * fx + perp[:, 1] * fy)])

    def pull_back(wr):
        gx = wr[0] + wr[2] * perp[:, 0]
        gy = wr[1] + wr[2] * perp[:, 1]
        return np.column_stack([c * gx + s * gy, -s * gx + c * gy])

    f = np.column_stack([np.ones(nodes.size), np.full(nodes.size, 0.5)])
    f /= math.sqrt(float(np.dot(w, f[:, 0] ** 2 + f[:, 1] ** 2)))
    lam_prev = math.inf
    converged = False
    iterations = 0
    lam = 0.0
    for iterations in range(1, max_iterations + 1):
        wr = wrench_of(f)
        lam = float(wr @ wr)  # Rayleigh quotient of a normalized profile
        if abs(lam - lam_prev) <= 1e-12 * max(lam, 1e-300):
            converged = True
            break
        lam_prev = lam
        g = pull_back(wr)
        norm = math.sqrt(float(np.dot(w, g[:, 0] ** 2 + g[:, 1] ** 2)))
        if norm == 0.0:
            break
        f = g / norm

    gram = gramian(curve, contact_set, s_o_map, samples=samples)
    root = float(gram.singular_values[0])
    top = math.sqrt(max(lam, 0.0))
    gap = abs(top - root) / max(root, 1e-300)
    return SingularValueReport(top_singular_value=top, gramian_root=root,
                               singular_values=gram.singular_values,
                               relative_gap=gap, iterations=iterations,
                               converged=converged, passed=bool(gap <= tol))


# ---------------------------------------------------------------------------
# placement maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArmConfig:
    """Arm used for placement studies: slender, uniform, surface-tracking.

    The targets follow the standard placement-study setup: track the
    arm's own radius at a right contact angle, so a converged solve wraps
    the surface. ``length`` defaults to half the boundary length and
    ``contact_tol`` (the grazing depth still counted as contact) to a
    tenth of the radius, wide enough to keep the surface-riding wrap --
    which oscillates a few percent around zero depth -- connected.
    """

    radius: float = 1.0
    length: Optional[float] = None
    alpha_target: float = math.pi / 2
    chi: float = 10.0
    contact_tol: Optional[float] = None

    def __post_init__(self):
        if not self.radius > 0.0:
            raise InvalidParameterError("arm radius must be positive")
        if self.length is not None and not self.length > 0.0:
            raise InvalidParameterError("arm length must be positive")
        if not 0.0 < self.alpha_target < math.pi:
            raise InvalidParameterError("alpha_target must lie in (0, pi)")
        if not self.chi > 0.0:
            raise InvalidParameterError("chi must be positive")
        if self.contact_tol is not None and self.contact_tol < 0.0:
            raise InvalidParameterError("contact_tol must be nonnegative")

    def resolved_length(self, curve: BoundaryCurve) -> float:
        return 0.5 * curve.length if self.length is None else float(self.length)

    def resolved_tol(self) -> float:
        return 0.1 * self.radius if self.contact_tol is None \
            else float(self.contact_tol)


def inner_solver_defaults() -> SolverConfig:
    """Solver settings for the many small placement solves.

    Tuned for throughput: a coarser integration grid, a lighter starting
    barrier, and plateau detection that stops on the steep part of the
    descent rather than deep in the asymptotic tail. Stopping early
    biases all cells of a placement map the same way, which preserves the
    comparisons a map exists for; stopping in the tail instead makes the
    stop iteration -- and with it the metrics -- twitchy between
    numerically near-identical cells.
    """
    return SolverConfig(eta=1e-2, steps=300, max_iterations=20_000,
                        grow_every=10, eta_max=0.5,
                        plateau_window=20, plateau_rtol=2e-4,
                        barrier_weight=1e-3, barrier_weight_initial=10.0,
                        barrier_stage_window=15, barrier_stage_rtol=1e-3)


@dataclass(frozen=True)
class QualityMap:
    """Quality metrics over a polar placement grid.

    Rows index the distance to the boundary, columns the ray angle about
    the object centroid. Cells whose inner solve failed hold NaN metrics
    and a status string naming the failure -- never zero quality.
    """

    distances: np.ndarray     # (n_d,)
    angles: np.ndarray        # (n_psi,)
    base_points: np.ndarray   # (n_d, n_psi, 2)
    base_angles: np.ndarray   # (n_d, n_psi)
    q1: np.ndarray            # (n_d, n_psi), NaN where failed
    q2: np.ndarray
    q3: np.ndarray
    status: Tuple[Tuple[str, ...], ...]
    centroid: np.ndarray

    def __post_init__(self):
        for a in (self.distances, self.angles, self.base_points,
                  self.base_angles, self.q1, self.q2, self.q3,
                  self.centroid):
            a.flags.writeable = False

    def metric(self, index: int) -> np.ndarray:
        if index not in (1, 2, 3):
            raise InvalidParameterError("metric index must be 1, 2 or 3")
        return (self.q1, self.q2, self.q3)[index - 1]

    def rows(self) -> List[tuple]:
        """Flat (d, psi, x0, y0, theta0, Q1, Q2, Q3, status) records."""
        out = []
        for i, d in enumerate(self.distances):
            for j, psi in enumerate(self.angles):
                out.append((float(d), float(psi),
                            float(self.base_points[i, j, 0]),
                            float(self.base_points[i, j, 1]),
                            float(self.base_angles[i, j]),
                            float(self.q1[i, j]), float(self.q2[i, j]),
                            float(self.q3[i, j]), self.status[i][j]))
        return out


def _point_inside(polygon: np.ndarray, point: np.ndarray) -> bool:
    """Even-odd crossing test against a dense polygonal boundary."""
    x, y = polygon[:, 0], polygon[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    straddles = (y > point[1]) != (y2 > point[1])
    if not straddles.any():
        return False
    xs, ys, xe, ye = (a[straddles] for a in (x, y, x2, y2))
    t = (point[1] - ys) / (ye - ys)
    crossings = np.count_nonzero(xs + t * (xe - xs) > point[0])
    return bool(crossings % 2)


def _place_base(curve: BoundaryCurve, centroid: np.ndarray,
                polygon: np.ndarray, psi: float, distance: float
                ) -> np.ndarray:
    """Point outside the object at the given boundary distance along a ray.

    Marches outward from the centroid along the ray at angle ``psi``
    until the point is outside with at least the requested clearance,
    then bisects the entry of that region; the clearance there equals
    ``distance`` because the distance field has unit slope.
    """
    u = np.array([math.cos(psi), math.sin(psi)])

    def far_enough(t: float) -> bool:
        p = centroid + t * u
        if _point_inside(polygon, p):
            return False
        try:
            return closest_point(curve, p).distance >= distance
        except InvalidParameterError:
            return False  # probe landed exactly on the boundary

    lo, hi = 0.0, max(distance, 0.125 * curve.length)
    for _ in range(64):
        if far_enough(hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise InvalidParameterError(
            "no placement at distance %.6g along the ray at %.6g"
            % (distance, psi))
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if far_enough(mid):
            hi = mid
        else:
            lo = mid
    return centroid + hi * u


@dataclass(frozen=True)
class _CellResult:
    status: str
    metrics: Tuple[float, float, float]
    base_point: np.ndarray
    base_angle: float
    report: Optional[SolveReport] = None
    gram: Optional[GraspGramian] = None


_CELL_FAILED = (math.nan, math.nan, math.nan)


def _solve_with_fallback(spec: OcpSpec, cfg: SolverConfig,
                         arm_length: float) -> Tuple[str, Optional[SolveReport]]:
    """Inner solve, retrying once with a gently curled initial arm.

    A straight cold start can recede into the shadow-map singularity on
    concave stretches before the gradient has any say; a quarter-turn
    curl over the arm length avoids that without biasing the converged
    wrap. The retry is skipped when the caller pinned the initial guess.
    """
    attempts = [cfg]
    if cfg.initial_kappa is None:
        curl = 0.5 * math.pi / arm_length
        attempts.append(replace(cfg, initial_kappa=lambda s: curl))
    last = "singular-start"
    for attempt in attempts:
        try:
            return "ok", solve(spec, attempt)
        except SingularityError:
            last = "singular-start"
        except AdmissibilityError:
            last = "inadmissible-start"
    return last, None


def _evaluate_cell(curve: BoundaryCurve, centroid: np.ndarray,
                   polygon: np.ndarray, distance: float, psi: float,
                   arm: ArmConfig, cfg: SolverConfig,
                   gramian_samples: int = 1024) -> _CellResult:
    base_angle = psi + 0.5 * math.pi
    try:
        base = _place_base(curve, centroid, polygon, psi, distance)
    except InvalidParameterError:
        return _CellResult("placement-failed", _CELL_FAILED,
                           np.full(2, math.nan), base_angle)
    try:
        rho0, alpha0, so0 = contact_state_from_pose(curve, base, base_angle)
    except AdmissibilityError:
        return _CellResult("inadmissible-pose", _CELL_FAILED, base, base_angle)

    length = arm.resolved_length(curve)
    spec = OcpSpec(curve, arm_length=length, rho_target=arm.radius,
                   alpha_target=arm.alpha_target, chi=arm.chi,
                   initial=(rho0, alpha0), base_shadow=so0,
                   arm_radius=arm.radius)
    status, report = _solve_with_fallback(spec, cfg, length)
    if report is None:
        return _CellResult(status, _CELL_FAILED, base, base_angle)
    if not report.converged:
        return _CellResult("not-converged", _CELL_FAILED, base, base_angle,
                           report=report)
    intervals = report.trajectory.contact_intervals(arm.resolved_tol())
    if not intervals:
        return _CellResult("no-contact", _CELL_FAILED, base, base_angle,
                           report=report)
    gram = gramian(curve, intervals, shadow_interpolant(report.trajectory),
                   samples=gramian_samples)
    return _CellResult("ok", (gram.q1, gram.q2, gram.q3), base, base_angle,
                       report=report, gram=gram)


def _map_geometry(curve: BoundaryCurve) -> Tuple[np.ndarray, np.ndarray]:
    polygon = curve.position(curve.s)
    return polygon.mean(axis=0), polygon


def _check_disc(disc) -> Tuple[float, float, int, int]:
    d_min, d_max, n_d, n_psi = (float(disc[0]), float(disc[1]),
                                int(disc[2]), int(disc[3]))
    if not d_min > 0.0:
        raise InvalidParameterError("d_min must be positive")
    if not d_max >= d_min:
        raise InvalidParameterError("d_max must be at least d_min")
    if n_d < 1 or n_psi < 1:
        raise InvalidParameterError("grid must have at least one cell")
    return d_min, d_max, n_d, n_psi


def quality_map(curve: BoundaryCurve, arm: Optional[ArmConfig] = None,
                disc: Tuple[float, float, int, int] = (3.0, 13.0, 24, 96),
                solver: Optional[SolverConfig] = None,
                threads: int = 1) -> QualityMap:
    """Sweep base placements on a polar grid and score each grasp.

    Each cell places the arm base at a prescribed distance from the
    boundary along the ray at angle ``psi`` from the object centroid,
    pointing a quarter turn ahead of the ray, solves the wrap, and scores
    the resulting contact set. Cells are independent; ``threads`` bounds
    the worker pool and results merge by cell index, so the outcome does
    not depend on scheduling.
    """
    d_min, d_max, n_d, n_psi = _check_disc(disc)
    arm = arm if arm is not None else ArmConfig()
    cfg = solver if solver is not None else inner_solver_defaults()
    centroid, polygon = _map_geometry(curve)

    distances = np.linspace(d_min, d_max, n_d) if n_d > 1 \
        else np.array([d_min])
    angles = np.arange(n_psi) * (TWO_PI / n_psi)

    def run_cell(ij):
        i, j = ij
        return _evaluate_cell(curve, centroid, polygon,
                              float(distances[i]), float(angles[j]),
                              arm, cfg)

    cells = [(i, j) for i in range(n_d) for j in range(n_psi)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(ij) for ij in cells]

    base_points = np.full((n_d, n_psi, 2), math.nan)
    base_angles = np.full((n_d, n_psi), math.nan)
    metrics = np.full((3, n_d, n_psi), math.nan)
    status = [["" for _ in range(n_psi)] for _ in range(n_d)]
    for (i, j), res in zip(cells, results):
        base_points[i, j] = res.base_point
        base_angles[i, j] = res.base_angle
        metrics[:, i, j] = res.metrics
        status[i][j] = res.status
    return QualityMap(distances=distances, angles=angles,
                      base_points=base_points, base_angles=base_angles,
                      q1=metrics[0], q2=metrics[1], q3=metrics[2],
                      status=tuple(tuple(row) for row in status),
                      centroid=centroid)


# ---------------------------------------------------------------------------
# placement search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimalGrasp:
    """Best placement found for one quality metric."""

    metric_index: int
    quality: float
    distance: float
    angle: float
    base_point: np.ndarray
    base_angle: float
    kappa: np.ndarray
    trajectory: ContactTrajectory
    gram: GraspGramian
    coarse_map: QualityMap
    evaluations: int

    def __post_init__(self):
        self.base_point.flags.writeable = False


def maximize_quality(curve: BoundaryCurve, metric_index: int,
                     arm: Optional[ArmConfig] = None,
                     disc: Tuple[float, float, int, int] = (3.0, 13.0, 8, 24),
                     solver: Optional[SolverConfig] = None,
                     threads: int = 1, starts: int = 5,
                     max_evaluations: int = 60) -> OptimalGrasp:
    """Best base placement for one quality metric.

    A coarse placement map over ``disc`` seeds a derivative-free simplex
    search in (distance, ray angle); the best ``starts`` cells launch
    independent searches whose overall winner is re-solved to recover the
    arm shape. Failed placements score as -inf, so the search routes
    around holes in the map; if every start fails the whole way, an
    optimization-failed error is raised.
    """
    if metric_index not in (1, 2, 3):
        raise InvalidParameterError("metric index must be 1, 2 or 3")
    arm = arm if arm is not None else ArmConfig()
    cfg = solver if solver is not None else inner_solver_defaults()
    d_min, d_max, n_d, n_psi = _check_disc(disc)

    coarse = quality_map(curve, arm=arm, disc=disc, solver=cfg,
                         threads=threads)
    field = coarse.metric(metric_index)
    order = np.argsort(np.where(np.isfinite(field), field, -math.inf),
                       axis=None)[::-1]
    seeds = [divmod(int(k), n_psi) for k in order[:max(1, starts)]]
    if not np.isfinite(field[seeds[0]]):
        raise OptimizationFailedError(
            "every coarse placement cell failed to produce a grasp")

    centroid, polygon = _map_geometry(curve)
    cache: dict = {}
    evaluations = 0

    def cell_at(d: float, psi: float) -> _CellResult:
        nonlocal evaluations
        key = (round(d, 12), round(psi, 12))
        if key not in cache:
            cache[key] = _evaluate_cell(curve, centroid, polygon, d, psi,
                                        arm, cfg)
            evaluations += 1
        return cache[key]

    def objective(x) -> float:
        d, psi = float(x[0]), float(x[1]) % TWO_PI
        if not d_min <= d <= d_max:
            return math.inf
        value = cell_at(d, psi).metrics[metric_index - 1]
        return -value if math.isfinite(value) else math.inf

    d_step = 0.5 * (d_max - d_min) / max(n_d - 1, 1) or 0.25
    psi_step = math.pi / n_psi
    best_x, best_val = None, math.inf
    for i, j in seeds:
        if not np.isfinite(field[i, j]):
            continue
        x0 = np.array([coarse.distances[i], coarse.angles[j]])
        simplex = np.array([x0, x0 + [d_step, 0.0], x0 + [0.0, psi_step]])
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"initial_simplex": simplex,
                                "maxfev": max_evaluations,
                                "xatol": 1e-3, "fatol": 1e-10})
        if res.fun < best_val:
            best_val, best_x = float(res.fun), np.asarray(res.x, dtype=float)

    if best_x is None or not math.isfinite(best_val):
        raise OptimizationFailedError(
            "no simplex start reached a scoring placement")

    d_best, psi_best = float(np.clip(best_x[0], d_min, d_max)), \
        float(best_x[1]) % TWO_PI
    winner = cell_at(d_best, psi_best)
    if winner.status != "ok":
        # the cache guarantees the best simplex value came from a scored
        # cell; re-resolve it exactly if clipping moved the point
        scored = [(v.metrics[metric_index - 1], k, v)
                  for k, v in cache.items() if v.status == "ok"]
        _, key, winner = max(scored, key=lambda t: t[0])
        d_best, psi_best = key
    return OptimalGrasp(metric_index=metric_index,
                        quality=float(winner.metrics[metric_index - 1]),
                        distance=d_best, angle=psi_best,
                        base_point=winner.base_point,
                        base_angle=winner.base_angle,
                        kappa=winner.report.kappa,
                        trajectory=winner.report.trajectory,
                        gram=winner.gram, coarse_map=coarse,
                        evaluations=evaluations)
