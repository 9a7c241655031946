"""Hot inner loops for the contact and costate sweeps.

Everything here works on plain float64 arrays so the functions can be
compiled with numba when it is installed; without numba the same code runs
as ordinary Python (slower, same results). Boundary curvature is passed in
as packed periodic-cubic coefficients (see BoundaryCurve.curvature_cells).
"""

import math

import numpy as np

try:
    from numba import njit as _njit

    def _jit(f):
        return _njit(cache=True, nogil=True)(f)
except ImportError:  # pragma: no cover - numba is a declared dependency
    def _jit(f):
        return f

PI = math.pi


@_jit
def periodic_cubic(coef, cell, period, x):
    """Evaluate a uniform periodic cubic at x (wrapped into [0, period))."""
    w = x % period
    j = int(w / cell)
    if j >= coef.shape[0]:
        j = coef.shape[0] - 1
    u = w - j * cell
    return coef[j, 0] + u * (coef[j, 1] + u * (coef[j, 2] + u * coef[j, 3]))


@_jit
def periodic_cubic_slope(coef, cell, period, x):
    w = x % period
    j = int(w / cell)
    if j >= coef.shape[0]:
        j = coef.shape[0] - 1
    u = w - j * cell
    return coef[j, 1] + u * (2.0 * coef[j, 2] + u * 3.0 * coef[j, 3])


@_jit
def contact_forward(rho0, alpha0, so0, h, kap_nodes, kap_halfs,
                    coef, cell, period, rho, alpha, so, ko_out):
    """RK4 sweep of the contact kinematics.

    d rho/ds   = -cos(alpha)
    d alpha/ds = -kappa(s) + kappa_o(s_o) sin(alpha) / (1 + rho kappa_o)
    d s_o/ds   =  sin(alpha) / (1 + rho kappa_o)

    kappa is piecewise-defined by its node and half-node samples. Output
    arrays are filled through the last computed node. Returns (status,
    index): status 0 = completed, 1 = admissibility violated at a node,
    2 = shadow-map singularity (at a node or inside a stage evaluation).
    """
    n = kap_nodes.shape[0] - 1
    r, a, w = rho0, alpha0, so0
    rho[0] = r
    alpha[0] = a
    so[0] = w
    ko = periodic_cubic(coef, cell, period, w)
    ko_out[0] = ko
    den = 1.0 + r * ko
    if den <= 0.0:
        return 2, 0
    if not (r > 0.0 and 0.0 < a < PI):
        return 1, 0

    for i in range(n):
        ko = periodic_cubic(coef, cell, period, w)
        den = 1.0 + r * ko
        if den <= 0.0:
            return 2, i
        nu = math.sin(a) / den
        d1r = -math.cos(a)
        d1a = -kap_nodes[i] + ko * nu
        d1w = nu

        kh = kap_halfs[i]
        r2 = r + 0.5 * h * d1r
        a2 = a + 0.5 * h * d1a
        w2 = w + 0.5 * h * d1w
        ko = periodic_cubic(coef, cell, period, w2)
        den = 1.0 + r2 * ko
        if den <= 0.0:
            return 2, i
        nu = math.sin(a2) / den
        d2r = -math.cos(a2)
        d2a = -kh + ko * nu
        d2w = nu

        r3 = r + 0.5 * h * d2r
        a3 = a + 0.5 * h * d2a
        w3 = w + 0.5 * h * d2w
        ko = periodic_cubic(coef, cell, period, w3)
        den = 1.0 + r3 * ko
        if den <= 0.0:
            return 2, i
        nu = math.sin(a3) / den
        d3r = -math.cos(a3)
        d3a = -kh + ko * nu
        d3w = nu

        r4 = r + h * d3r
        a4 = a + h * d3a
        w4 = w + h * d3w
        ko = periodic_cubic(coef, cell, period, w4)
        den = 1.0 + r4 * ko
        if den <= 0.0:
            return 2, i
        nu = math.sin(a4) / den
        d4r = -math.cos(a4)
        d4a = -kap_nodes[i + 1] + ko * nu
        d4w = nu

        r += h * (d1r + 2.0 * (d2r + d3r) + d4r) / 6.0
        a += h * (d1a + 2.0 * (d2a + d3a) + d4a) / 6.0
        w += h * (d1w + 2.0 * (d2w + d3w) + d4w) / 6.0
        rho[i + 1] = r
        alpha[i + 1] = a
        so[i + 1] = w
        ko = periodic_cubic(coef, cell, period, w)
        ko_out[i + 1] = ko
        den = 1.0 + r * ko
        if den <= 0.0:
            return 2, i + 1
        if not (r > 0.0 and 0.0 < a < PI and math.sin(a) / den > 0.0):
            return 1, i + 1
    return 0, -1


@_jit
def costate_rate(p1, p2, p3, rho, al, ko, kop, rd, ad, chi, wb, rho_ref):
    """Adjoint rates for the augmented running cost.

    p1, p2 are adjoint to (rho, alpha) as in the stationarity conditions of
    the wrapping-control Hamiltonian; p3 is adjoint to the shadow arclength
    (kop = d kappa_o / d s_o enters only here). wb > 0 adds the soft-barrier
    contributions.
    """
    den = 1.0 + rho * ko
    sa = math.sin(al)
    ca = math.cos(al)
    cm = sa / (den * den)
    g1 = (ko * ko * p2 + ko * p3) * cm + chi * (rho - rd)
    g2 = -p1 * sa - (ko * p2 + p3) * ca / den + chi * math.sin(al - ad)
    g3 = kop * cm * (rho * p3 - p2)
    if wb > 0.0:
        g2 += wb * (-ca / sa)
        if rho < rho_ref:
            g1 += wb * (1.0 / rho_ref - 1.0 / rho)
    return g1, g2, g3


@_jit
def costate_backward(h, chi, wb,
                     rho_n, al_n, ko_n, kop_n, rd_n, ad_n, rf_n,
                     rho_h, al_h, ko_h, kop_h, rd_h, ad_h, rf_h,
                     p1, p2, p3):
    """RK4 sweep of the adjoint system from s = L down to 0.

    Node quantities (suffix _n) live on the same grid as the forward state;
    half-node quantities (suffix _h, index i covers s = (i + 1/2) h) are
    interpolants of the stored forward pass. rf_* is the arclength-varying
    barrier floor on rho. Terminal condition is zero.
    """
    n = rho_n.shape[0] - 1
    q1 = 0.0
    q2 = 0.0
    q3 = 0.0
    p1[n] = 0.0
    p2[n] = 0.0
    p3[n] = 0.0
    for i in range(n, 0, -1):
        j = i - 1
        a1, b1, c1 = costate_rate(q1, q2, q3, rho_n[i], al_n[i], ko_n[i],
                                  kop_n[i], rd_n[i], ad_n[i],
                                  chi, wb, rf_n[i])
        a2, b2, c2 = costate_rate(q1 - 0.5 * h * a1, q2 - 0.5 * h * b1,
                                  q3 - 0.5 * h * c1, rho_h[j], al_h[j],
                                  ko_h[j], kop_h[j], rd_h[j], ad_h[j],
                                  chi, wb, rf_h[j])
        a3, b3, c3 = costate_rate(q1 - 0.5 * h * a2, q2 - 0.5 * h * b2,
                                  q3 - 0.5 * h * c2, rho_h[j], al_h[j],
                                  ko_h[j], kop_h[j], rd_h[j], ad_h[j],
                                  chi, wb, rf_h[j])
        a4, b4, c4 = costate_rate(q1 - h * a3, q2 - h * b3, q3 - h * c3,
                                  rho_n[j], al_n[j], ko_n[j], kop_n[j],
                                  rd_n[j], ad_n[j], chi, wb, rf_n[j])
        q1 -= h * (a1 + 2.0 * (a2 + a3) + a4) / 6.0
        q2 -= h * (b1 + 2.0 * (b2 + b3) + b4) / 6.0
        q3 -= h * (c1 + 2.0 * (c2 + c3) + c4) / 6.0
        p1[j] = q1
        p2[j] = q2
        p3[j] = q3


def half_nodes(v: np.ndarray) -> np.ndarray:
    """Values at s = (i + 1/2) h from node samples, 4-point cubic stencil.

    Interior: (-v[i-1] + 9 v[i] + 9 v[i+1] - v[i+2]) / 16, O(h^4) on a
    uniform grid; the two end cells use the one-sided cubic equivalent.
    """
    n = v.shape[0] - 1
    out = np.empty(n)
    out[1:-1] = (-v[:-3] + 9.0 * v[1:-2] + 9.0 * v[2:-1] - v[3:]) / 16.0
    out[0] = (5.0 * v[0] + 15.0 * v[1] - 5.0 * v[2] + v[3]) / 16.0
    out[-1] = (5.0 * v[n] + 15.0 * v[n - 1] - 5.0 * v[n - 2] + v[n - 3]) / 16.0
    return out
