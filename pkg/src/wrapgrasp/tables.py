"""CSV data tables for curves, trajectories, solves, and quality maps.

All floats are serialized with 17 significant digits so a written table
round-trips to the exact same doubles — regression baselines can be
compared bit for bit. Files are written atomically (temp file in the
target directory, then rename), ASCII, '.' decimal separator, '\\n'
line endings.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .contact import ContactTrajectory
from .quality import QualityMap

__all__ = [
    "atomic_write_text", "format_float",
    "write_curve_table", "write_trajectory_table",
    "write_cost_history_table", "write_quality_map_table",
    "write_best_grasp_table",
    "read_trajectory_table", "read_quality_map_table",
]


def format_float(x: float) -> str:
    return "%.17g" % float(x)


def atomic_write_text(path, text: str) -> None:
    """Write a small text artifact without ever exposing a partial file."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent,
                               prefix=target.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="") as handle:
            handle.write(text)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _render_rows(header: Sequence[str], rows) -> str:
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(row) + "\n")
    return out.getvalue()


def write_curve_table(path, curve) -> None:
    """Boundary samples: columns s_o, x, y, phi, kappa_o."""
    s = curve.s
    xy = curve.position(s)
    phi = curve.tangent_angle(s)
    kap = curve.curvature(s)
    rows = ([format_float(v) for v in (s[i], xy[i, 0], xy[i, 1], phi[i],
                                       kap[i])]
            for i in range(s.size))
    atomic_write_text(path, _render_rows(
        ("s_o", "x", "y", "phi", "kappa_o"), rows))


def write_trajectory_table(path, traj: ContactTrajectory) -> None:
    """Contact sweep: columns s, rho, alpha, s_o, nu_o, delta, in_contact.

    Trajectories without a radius profile have no contact depth; their
    delta column reads nan and in_contact is 0 throughout.
    """
    have_delta = traj.delta is not None
    rows = []
    for i in range(traj.s.size):
        delta = float(traj.delta[i]) if have_delta else math.nan
        contact = "1" if have_delta and delta >= 0.0 else "0"
        rows.append([format_float(traj.s[i]), format_float(traj.rho[i]),
                     format_float(traj.alpha[i]), format_float(traj.s_o[i]),
                     format_float(traj.nu_o[i]), format_float(delta),
                     contact])
    atomic_write_text(path, _render_rows(
        ("s", "rho", "alpha", "s_o", "nu_o", "delta", "in_contact"), rows))


def write_cost_history_table(path, report) -> None:
    """Accepted-iterate histories of a gradient-sweep solve."""
    rows = ([str(i), format_float(report.cost_history[i]),
             format_float(report.tracking_history[i]),
             format_float(report.barrier_history[i]),
             format_float(report.gradient_norm_history[i])]
            for i in range(report.cost_history.size))
    atomic_write_text(path, _render_rows(
        ("iteration", "cost", "tracking", "barrier", "gradient_norm"),
        rows))


def write_quality_map_table(path, qmap: QualityMap) -> None:
    """Placement grid: columns d, psi, x0, y0, theta0, Q1, Q2, Q3, status."""
    rows = ([format_float(d), format_float(psi), format_float(x0),
             format_float(y0), format_float(th), format_float(q1),
             format_float(q2), format_float(q3), status]
            for d, psi, x0, y0, th, q1, q2, q3, status in qmap.rows())
    atomic_write_text(path, _render_rows(
        ("d", "psi", "x0", "y0", "theta0", "Q1", "Q2", "Q3", "status"),
        rows))


def write_best_grasp_table(path, best) -> None:
    """One-row summary of a quality maximization."""
    row = [str(best.metric_index), format_float(best.quality),
           format_float(best.distance), format_float(best.angle),
           format_float(best.base_point[0]),
           format_float(best.base_point[1]),
           format_float(best.base_angle), str(best.evaluations)]
    atomic_write_text(path, _render_rows(
        ("metric", "quality", "d", "psi", "x0", "y0", "theta0",
         "evaluations"), [row]))


def _read_rows(path, expected_header: Sequence[str]) -> List[List[str]]:
    with open(path, "r", encoding="ascii", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != list(expected_header):
            raise ValueError("%s: expected header %s, found %s"
                             % (path, ",".join(expected_header), header))
        return [row for row in reader if row]


def read_trajectory_table(path) -> ContactTrajectory:
    """Rebuild a trajectory from its table (exact, thanks to %.17g)."""
    rows = _read_rows(path, ("s", "rho", "alpha", "s_o", "nu_o", "delta",
                             "in_contact"))
    cols = np.array([[float(v) for v in row[:6]] for row in rows])
    delta: Optional[np.ndarray] = cols[:, 5].copy()
    if np.all(np.isnan(delta)):
        delta = None
    return ContactTrajectory(
        s=cols[:, 0].copy(), rho=cols[:, 1].copy(), alpha=cols[:, 2].copy(),
        s_o=cols[:, 3].copy(), nu_o=cols[:, 4].copy(),
        kappa=np.full(cols.shape[0], math.nan), delta=delta,
        initial=(float(cols[0, 1]), float(cols[0, 2]), float(cols[0, 3])))


def read_quality_map_table(path) -> QualityMap:
    """Rebuild a placement map from its table.

    The object centroid is not part of the table and is left NaN; the
    renderers never need it because every cell carries its base pose.
    """
    rows = _read_rows(path, ("d", "psi", "x0", "y0", "theta0", "Q1", "Q2",
                             "Q3", "status"))
    distances: List[float] = []
    angles: List[float] = []
    for row in rows:
        d, psi = float(row[0]), float(row[1])
        if d not in distances:
            distances.append(d)
        if psi not in angles:
            angles.append(psi)
    n_d, n_psi = len(distances), len(angles)
    if n_d * n_psi != len(rows):
        raise ValueError("%s: rows do not fill a full (d, psi) grid" % path)
    base_points = np.empty((n_d, n_psi, 2))
    base_angles = np.empty((n_d, n_psi))
    q = np.empty((3, n_d, n_psi))
    status = [[""] * n_psi for _ in range(n_d)]
    for k, row in enumerate(rows):
        i, j = divmod(k, n_psi)
        base_points[i, j] = (float(row[2]), float(row[3]))
        base_angles[i, j] = float(row[4])
        q[0, i, j], q[1, i, j], q[2, i, j] = (float(row[5]), float(row[6]),
                                              float(row[7]))
        status[i][j] = row[8]
    return QualityMap(distances=np.array(distances), angles=np.array(angles),
                      base_points=base_points, base_angles=base_angles,
                      q1=q[0], q2=q[1], q3=q[2],
                      status=tuple(tuple(r) for r in status),
                      centroid=np.array([math.nan, math.nan]))
