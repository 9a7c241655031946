"""Hand-rolled SVG 1.1 renderings of wraps, tracking panels, and maps.

Every renderer returns the complete SVG document as a string and is
bit-for-bit deterministic: fixed viewport, fixed number formats, no
timestamps, no external assets. Scene drawings place one world-to-screen
matrix on a root group and keep all coordinates absolute; chart panels
are laid out directly in screen space.
"""

from __future__ import annotations

import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .contact import ContactTrajectory
from .quality import QualityMap

__all__ = ["render_scene_svg", "render_tracking_svg", "render_quality_svg"]

_WIDTH = 720
_HEIGHT = 540
_MARGIN = 36.0

_OBJECT_FILL = "#ece7dd"
_OBJECT_STROKE = "#6b645a"
_ARM_STROKE = "#1f4e9c"
_CONTACT_STROKE = "#d95f02"
_TARGET_STROKE = "#a0a0a0"
_TEXT_FILL = "#303030"

# dark-violet to yellow ramp, anchors every 1/8 of the unit interval
_RAMP = (
    (0.267, 0.005, 0.329), (0.283, 0.141, 0.458), (0.254, 0.265, 0.530),
    (0.207, 0.372, 0.553), (0.164, 0.471, 0.558), (0.128, 0.567, 0.551),
    (0.135, 0.659, 0.518), (0.478, 0.821, 0.318), (0.993, 0.906, 0.144),
)


def _fmt(x: float) -> str:
    return "%.5f" % float(x)


def _fmt_screen(x: float) -> str:
    return "%.2f" % float(x)


def _ramp_color(t: float) -> str:
    t = min(max(float(t), 0.0), 1.0)
    x = t * (len(_RAMP) - 1)
    i = min(int(x), len(_RAMP) - 2)
    u = x - i
    rgb = [(1.0 - u) * a + u * b for a, b in zip(_RAMP[i], _RAMP[i + 1])]
    return "#%02x%02x%02x" % tuple(int(round(255 * v)) for v in rgb)


def _decimate(points: np.ndarray, cap: int = 800) -> np.ndarray:
    n = points.shape[0]
    if n <= cap:
        return points
    stride = -(-n // cap)
    idx = list(range(0, n, stride))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return points[idx]


def _path(points: np.ndarray, close: bool = False) -> str:
    parts = ["M %s %s" % (_fmt(points[0, 0]), _fmt(points[0, 1]))]
    parts.extend("L %s %s" % (_fmt(p[0]), _fmt(p[1])) for p in points[1:])
    if close:
        parts.append("Z")
    return " ".join(parts)


def _document(body: List[str]) -> str:
    head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
            '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            'width="%d" height="%d" viewBox="0 0 %d %d">\n'
            '<rect x="0" y="0" width="%d" height="%d" fill="#ffffff"/>\n'
            % (_WIDTH, _HEIGHT, _WIDTH, _HEIGHT, _WIDTH, _HEIGHT))
    return head + "\n".join(body) + "\n</svg>\n"


def _world_transform(xs: Sequence[float], ys: Sequence[float],
                     box: Tuple[float, float, float, float]
                     ) -> Tuple[str, float]:
    """One matrix mapping world bounds into a screen box, y up."""
    x0, y0, bw, bh = box
    xmin, xmax = float(min(xs)), float(max(xs))
    ymin, ymax = float(min(ys)), float(max(ys))
    spanx = max(xmax - xmin, 1e-9)
    spany = max(ymax - ymin, 1e-9)
    k = min(bw / spanx, bh / spany) * 0.92
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    tx = x0 + 0.5 * bw - k * cx
    ty = y0 + 0.5 * bh + k * cy
    matrix = ('transform="matrix(%s 0 0 -%s %s %s)"'
              % (_fmt(k), _fmt(k), _fmt(tx), _fmt(ty)))
    return matrix, k


def _text(x: float, y: float, label: str, size: int = 13,
          anchor: str = "start") -> str:
    return ('<text x="%s" y="%s" font-family="Helvetica, Arial, sans-serif"'
            ' font-size="%d" text-anchor="%s" fill="%s">%s</text>'
            % (_fmt_screen(x), _fmt_screen(y), size, anchor, _TEXT_FILL,
               label))


def render_scene_svg(curve, arm: Optional[np.ndarray] = None,
                     contact_mask: Optional[np.ndarray] = None,
                     overlay: Optional[np.ndarray] = None,
                     title: str = "") -> str:
    """Object boundary with an optional arm centerline drawn over it.

    ``arm`` is an (n, 2) array of centerline points; ``contact_mask``
    marks the samples in contact, drawn as a thicker underlay (an empty
    mask simply leaves the highlight out). ``overlay`` draws a second,
    dashed centerline (used for best-placement overlays).
    """
    boundary = curve.position(curve.s)
    boundary = np.vstack([boundary, boundary[:1]])
    xs = list(boundary[:, 0])
    ys = list(boundary[:, 1])
    for extra in (arm, overlay):
        if extra is not None:
            xs.extend(extra[:, 0])
            ys.extend(extra[:, 1])
    box = (_MARGIN, _MARGIN, _WIDTH - 2 * _MARGIN, _HEIGHT - 2 * _MARGIN)
    matrix, k = _world_transform(xs, ys, box)

    body = ['<g %s>' % matrix]
    body.append('<path d="%s" fill="%s" stroke="%s" stroke-width="%s"/>'
                % (_path(_decimate(boundary), close=True), _OBJECT_FILL,
                   _OBJECT_STROKE, _fmt(1.6 / k)))
    if arm is not None and contact_mask is not None and contact_mask.any():
        for seg in _mask_runs(contact_mask):
            pts = arm[seg[0]:seg[1] + 1]
            if pts.shape[0] >= 2:
                body.append('<path d="%s" fill="none" stroke="%s" '
                            'stroke-width="%s" stroke-linecap="round"/>'
                            % (_path(_decimate(pts)), _CONTACT_STROKE,
                               _fmt(5.0 / k)))
    if arm is not None:
        body.append('<path d="%s" fill="none" stroke="%s" '
                    'stroke-width="%s"/>'
                    % (_path(_decimate(arm)), _ARM_STROKE, _fmt(2.2 / k)))
        body.append('<circle cx="%s" cy="%s" r="%s" fill="%s"/>'
                    % (_fmt(arm[0, 0]), _fmt(arm[0, 1]), _fmt(4.0 / k),
                       _ARM_STROKE))
    if overlay is not None:
        body.append('<path d="%s" fill="none" stroke="%s" '
                    'stroke-width="%s" stroke-dasharray="%s %s"/>'
                    % (_path(_decimate(overlay)), "#7b3294",
                       _fmt(2.2 / k), _fmt(6.0 / k), _fmt(5.0 / k)))
    body.append('</g>')
    if title:
        body.append(_text(_WIDTH / 2, 24, title, size=15, anchor="middle"))
    return _document(body)


def _mask_runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    runs = []
    start = None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, mask.size - 1))
    return runs


def _panel(x0: float, y0: float, w: float, h: float, s: np.ndarray,
           y: np.ndarray, reference: Optional[float], label: str) -> List[str]:
    lo = float(min(y.min(), reference if reference is not None else y.min()))
    hi = float(max(y.max(), reference if reference is not None else y.max()))
    pad = 0.08 * max(hi - lo, 1e-9)
    lo, hi = lo - pad, hi + pad
    smax = float(s[-1]) if s[-1] > 0 else 1.0

    def sx(v):
        return x0 + (v / smax) * w

    def sy(v):
        return y0 + h - (v - lo) / (hi - lo) * h

    out = ['<rect x="%s" y="%s" width="%s" height="%s" fill="none" '
           'stroke="#c8c8c8"/>' % (_fmt_screen(x0), _fmt_screen(y0),
                                   _fmt_screen(w), _fmt_screen(h))]
    if reference is not None:
        ry = sy(reference)
        out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="%s" '
                   'stroke-dasharray="6 4" stroke-width="1.2"/>'
                   % (_fmt_screen(x0), _fmt_screen(ry), _fmt_screen(x0 + w),
                      _fmt_screen(ry), _TARGET_STROKE))
    pts = np.column_stack([np.fromiter((sx(v) for v in s), float),
                           np.fromiter((sy(v) for v in y), float)])
    pts = _decimate(pts, cap=1000)
    d = "M " + " L ".join("%s %s" % (_fmt_screen(p[0]), _fmt_screen(p[1]))
                          for p in pts)
    out.append('<path d="%s" fill="none" stroke="%s" stroke-width="1.8"/>'
               % (d, _ARM_STROKE))
    out.append(_text(x0 - 6, y0 + 12, "%.3g" % hi, size=11, anchor="end"))
    out.append(_text(x0 - 6, y0 + h, "%.3g" % lo, size=11, anchor="end"))
    out.append(_text(x0 + w, y0 + h + 16, "%.3g" % smax, size=11,
                     anchor="end"))
    out.append(_text(x0, y0 + h + 16, "0", size=11))
    out.append(_text(x0 + 8, y0 + 16, label, size=13))
    return out


def render_tracking_svg(traj: ContactTrajectory,
                        rho_target: Callable[[float], float],
                        alpha_target: float, title: str = "") -> str:
    """Two stacked panels: rho over its target, and alpha, both vs s.

    The dashed reference lines sit at 1 (perfect distance tracking) and
    at the target angle.
    """
    s = traj.s
    rho_d = np.fromiter((float(rho_target(v)) for v in s), float)
    ratio = traj.rho / rho_d
    x0, w = 84.0, _WIDTH - 84.0 - 30.0
    h = (_HEIGHT - 150.0) / 2.0
    body = []
    body.extend(_panel(x0, 60.0, w, h, s, ratio, 1.0,
                       "contact distance / target"))
    body.extend(_panel(x0, 60.0 + h + 54.0, w, h, s, traj.alpha,
                       float(alpha_target), "contact angle [rad]"))
    body.append(_text(_WIDTH / 2, _HEIGHT - 12, "arm arclength s",
                      size=12, anchor="middle"))
    if title:
        body.append(_text(_WIDTH / 2, 28, title, size=15, anchor="middle"))
    return _document(body)


def render_quality_svg(curve, qmap: QualityMap, metric_index: int,
                       best_arm: Optional[np.ndarray] = None,
                       title: str = "") -> str:
    """Placement-quality scatter around the object, one metric per file.

    Cell markers sit at the actual base points and are colored by the
    metric normalized to the map's own finite maximum; failed cells are
    drawn hollow. ``best_arm`` overlays the winning arm as a dashed
    curve.
    """
    values = qmap.metric(metric_index)
    boundary = curve.position(curve.s)
    boundary = np.vstack([boundary, boundary[:1]])
    pts = qmap.base_points.reshape(-1, 2)
    xs = list(boundary[:, 0]) + list(pts[:, 0])
    ys = list(boundary[:, 1]) + list(pts[:, 1])
    if best_arm is not None:
        xs.extend(best_arm[:, 0])
        ys.extend(best_arm[:, 1])
    box = (_MARGIN, _MARGIN, _WIDTH - 2 * _MARGIN - 70.0,
           _HEIGHT - 2 * _MARGIN)
    matrix, k = _world_transform(xs, ys, box)

    finite = values[np.isfinite(values)]
    vmax = float(finite.max()) if finite.size and finite.max() > 0 else 1.0
    marker = 0.38 * _min_spacing(qmap.base_points)

    body = ['<g %s>' % matrix]
    body.append('<path d="%s" fill="%s" stroke="%s" stroke-width="%s"/>'
                % (_path(_decimate(boundary), close=True), _OBJECT_FILL,
                   _OBJECT_STROKE, _fmt(1.6 / k)))
    for i in range(values.shape[0]):
        for j in range(values.shape[1]):
            x, y = qmap.base_points[i, j]
            v = values[i, j]
            if np.isfinite(v):
                body.append('<circle cx="%s" cy="%s" r="%s" fill="%s"/>'
                            % (_fmt(x), _fmt(y), _fmt(marker),
                               _ramp_color(v / vmax)))
            else:
                body.append('<circle cx="%s" cy="%s" r="%s" fill="none" '
                            'stroke="#b0b0b0" stroke-width="%s"/>'
                            % (_fmt(x), _fmt(y), _fmt(0.7 * marker),
                               _fmt(1.0 / k)))
    if best_arm is not None:
        body.append('<path d="%s" fill="none" stroke="#7b3294" '
                    'stroke-width="%s" stroke-dasharray="%s %s"/>'
                    % (_path(_decimate(best_arm)), _fmt(2.4 / k),
                       _fmt(6.0 / k), _fmt(5.0 / k)))
    body.append('</g>')
    body.extend(_colorbar(_WIDTH - 86.0, 70.0, 18.0, _HEIGHT - 160.0, vmax))
    label = title or ("grasp quality Q%d" % metric_index)
    body.append(_text(_WIDTH / 2 - 35, 24, label, size=15, anchor="middle"))
    return _document(body)


def _min_spacing(base_points: np.ndarray) -> float:
    best = math.inf
    for axis in (0, 1):
        if base_points.shape[axis] > 1:
            d = np.diff(base_points, axis=axis)
            dist = np.hypot(d[..., 0], d[..., 1])
            finite = dist[np.isfinite(dist) & (dist > 0)]
            if finite.size:
                best = min(best, float(finite.min()))
    if not math.isfinite(best):
        best = 1.0
    return best


def _colorbar(x0: float, y0: float, w: float, h: float,
              vmax: float) -> List[str]:
    cells = 24
    out = []
    for i in range(cells):
        t = (i + 0.5) / cells
        y = y0 + h - (i + 1) * h / cells
        out.append('<rect x="%s" y="%s" width="%s" height="%s" fill="%s"/>'
                   % (_fmt_screen(x0), _fmt_screen(y), _fmt_screen(w),
                      _fmt_screen(h / cells + 0.5), _ramp_color(t)))
    out.append('<rect x="%s" y="%s" width="%s" height="%s" fill="none" '
               'stroke="#909090"/>' % (_fmt_screen(x0), _fmt_screen(y0),
                                       _fmt_screen(w), _fmt_screen(h)))
    out.append(_text(x0 + w + 5, y0 + 11, "%.3g" % vmax, size=11))
    out.append(_text(x0 + w + 5, y0 + h, "0", size=11))
    return out
