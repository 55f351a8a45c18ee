"""Integral-form necessary conditions along a trajectory.

For a problem of order m, with F the arc-length form of the Lagrangian,

    phi_0(s) = dF/dt^(m) + sum_{i=1}^m (-1)^(m-i+1) R_{m-i+1}[dF/dt^(i-1)](s)
    phi_c(s) = dF/dX_c^(m) + sum_{i=1}^m (-1)^(m-i+1) R_{m-i+1}[dF/dX_c^(i-1)](s)

where R_r[g](s) is the r-fold repeated integral of g from 0 to s.  Along a
minimizer each phi is constant.  A constant verdict is only ever reported as
consistent with the necessary condition; it does not certify a minimizer.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .expr import Expr
from .reparam import ArcCurve, arclength, f_jet
from .trajectory import Trajectory

SMOOTH_TOLERANCE = 1e-6
GRADED_TOLERANCE = 1e-3
EXCLUDED_BUDGET = 0.01

CONSTANT = "constant"
NON_CONSTANT = "non-constant"
INCONCLUSIVE = "inconclusive near-singular"


# ---------------------------------------------------------------------------
# repeated integrals on the arc-length grid

_ROW_BLOCK = 512


def _prefix_weights(arc: ArcCurve, rows=None) -> np.ndarray:
    """W[q, p] with int_0^{s_q} g ds ~ sum_p W[q, p] g_p.

    Whole cells before the one holding sample q use Gauss weights; the
    partial cell uses the spectral integration matrix.  Integration runs in
    t with ds = s'(t) dt so no re-sampling in s is needed.
    """
    grid = arc.grid
    order = grid.order
    J = len(grid.t)
    rows = np.arange(J) if rows is None else np.asarray(rows)
    A = quadrature.integration_matrix(order)
    h = grid.mesh.widths
    full = grid.w * arc.ds_dt
    W = np.where(grid.cell[None, :] < grid.cell[rows, None], full[None, :], 0.0)
    same = grid.cell[None, :] == grid.cell[rows, None]
    qc = grid.cell[rows]
    partial = h[qc][:, None] * A[grid.local[rows][:, None], grid.local[None, :]] * arc.ds_dt[None, :]
    return np.where(same, partial, W)


def repeated_integrals(arc: ArcCurve, g, r: int) -> np.ndarray:
    """Cauchy form int_0^{s_q} (s_q - sigma)^(r-1)/(r-1)! g dsigma at every sample."""
    if r < 1:
        raise ValueError("repeated integral order must be >= 1")
    g = np.asarray(g, dtype=float)
    J = len(arc.s)
    out = np.empty(J)
    fact = math.factorial(r - 1)
    for start in range(0, J, _ROW_BLOCK):
        rows = np.arange(start, min(start + _ROW_BLOCK, J))
        W = _prefix_weights(arc, rows)
        if r > 1:
            W = W * (arc.s[rows, None] - arc.s[None, :]) ** (r - 1) / fact
        out[rows] = W @ g
    return out


def repeated_integral(arc: ArcCurve, g, s: float, r: int) -> float:
    """R_r[g](s) for an arbitrary s in [0, l]; ``g`` is sampled on the arc grid."""
    if r < 1:
        raise ValueError("repeated integral order must be >= 1")
    if not -1e-12 * max(1.0, arc.length) <= s <= arc.length * (1 + 1e-12):
        raise ValueError(f"s = {s} outside [0, {arc.length}]")
    g = np.asarray(g, dtype=float)
    grid = arc.grid
    t = arc.at(float(s))
    mesh = grid.mesh
    c = int(mesh.locate(t))
    xi_q = (t - mesh.nodes[c]) / mesh.widths[c]
    nodes, _ = quadrature.gauss_unit(grid.order)
    kernel = (s - arc.s) ** (r - 1) / math.factorial(r - 1)
    weights = np.where(grid.cell < c, grid.w * arc.ds_dt, 0.0)
    inside = grid.cell == c
    pw = quadrature.partial_weights(nodes, [xi_q])[0]
    weights[inside] = mesh.widths[c] * pw * arc.ds_dt[inside]
    return float(np.sum(weights * kernel * g))


def nested_integrals(arc: ArcCurve, g, r: int) -> np.ndarray:
    """The same quantity as :func:`repeated_integrals`, by r nested prefix integrals."""
    out = np.asarray(g, dtype=float)
    W = _prefix_weights(arc)
    for _ in range(r):
        out = W @ out
    return out


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ResidualReport:
    id: str
    s: np.ndarray
    phi: np.ndarray
    mean: float
    max_abs_deviation: float
    relative_deviation: float
    tolerance: float
    verdict: str
    excluded: np.ndarray = field(repr=False)
    excluded_fraction: float = 0.0
    trend_deviation: float = 0.0
    order: int = 1

    @property
    def statement(self) -> str:
        if self.verdict == CONSTANT:
            return "consistent with necessary condition"
        if self.verdict == NON_CONSTANT:
            return "necessary condition fails"
        return "inconclusive"

    def summary(self) -> dict:
        return {
            "id": self.id,
            "mean": self.mean,
            "max_abs_deviation": self.max_abs_deviation,
            "relative_deviation": self.relative_deviation,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "statement": self.statement,
            "excluded_fraction": self.excluded_fraction,
            "trend_deviation": self.trend_deviation,
            "samples": int(len(self.s)),
        }


def judge(cid: str, s, phi, excluded, tolerance: float, order: int = 1) -> ResidualReport:
    s = np.asarray(s, dtype=float)
    phi = np.asarray(phi, dtype=float)
    excluded = np.asarray(excluded, dtype=bool) | ~np.isfinite(phi)
    kept = ~excluded
    frac = float(np.mean(excluded)) if len(phi) else 0.0
    if not np.any(kept):
        return ResidualReport(cid, s, phi, math.nan, math.nan, math.nan, tolerance, INCONCLUSIVE, excluded, frac, math.nan, order)
    vals = phi[kept]
    mean = float(np.mean(vals))
    dev = float(np.max(np.abs(vals - mean)))
    rel = dev / (1.0 + abs(mean))
    # deviation from the best polynomial of degree order-1 in s
    deg = max(order - 1, 0)
    if np.sum(kept) > deg + 1:
        sk = s[kept]
        span = max(float(sk.max() - sk.min()), 1e-300)
        coef = np.polynomial.polynomial.polyfit((sk - sk.min()) / span, vals, deg)
        fit = np.polynomial.polynomial.polyval((sk - sk.min()) / span, coef)
        trend = float(np.max(np.abs(vals - fit))) / (1.0 + abs(mean))
    else:
        trend = 0.0
    if frac > EXCLUDED_BUDGET:
        verdict = INCONCLUSIVE
    elif rel <= tolerance:
        verdict = CONSTANT
    else:
        verdict = NON_CONSTANT
    return ResidualReport(cid, s, phi, mean, dev, rel, tolerance, verdict, excluded, frac, trend, order)


def default_tolerance(x: Trajectory) -> float:
    return GRADED_TOLERANCE if x.mesh.grading.kind == "geometric" else SMOOTH_TOLERANCE


def _setup(L: Expr, x: Trajectory, order, quad_order):
    m = max(L.m, 1) if order is None else order
    if x.m < m:
        raise ValueError(f"trajectory of order {x.m} cannot carry a problem of order {m}")
    L.check_shape(m, x.n)
    arc = arclength(x, quad_order, m)
    return m, arc


def _assemble(arc: ArcCurve, top, lower, m: int, skip_zeroth: bool = False) -> np.ndarray:
    """top + sum_{i=1}^m (-1)^(m-i+1) R_{m-i+1}[lower[i-1]]."""
    phi = np.array(top, dtype=float)
    for i in range(1, m + 1):
        if skip_zeroth and i == 1:
            continue
        g = np.where(np.isfinite(lower[i - 1]), lower[i - 1], 0.0)
        phi = phi + (-1) ** (m - i + 1) * repeated_integrals(arc, g, m - i + 1)
    return phi


def dubois_reymond_terms(L: Expr, x: Trajectory, order=None, quad_order: int = 8, autonomous_shortcut: bool = False):
    m, arc = _setup(L, x, order, quad_order)
    fj = f_jet(L, arc)
    skip = autonomous_shortcut and L.autonomous
    return arc, fj, _assemble(arc, fj.dF_dt[m], fj.dF_dt, m, skip_zeroth=skip)


def dubois_reymond_residual(
    L: Expr,
    x: Trajectory,
    tolerance: float | None = None,
    order: int | None = None,
    quad_order: int = 8,
    autonomous_shortcut: bool = False,
) -> ResidualReport:
    """Constancy report for the integral duBois-Reymond quantity phi_0."""
    tol = default_tolerance(x) if tolerance is None else tolerance
    arc, fj, phi = dubois_reymond_terms(L, x, order, quad_order, autonomous_shortcut)
    return judge("dBR", arc.s, phi, arc.near_singular, tol, arc.m)


def euler_lagrange_residual(
    L: Expr,
    x: Trajectory,
    tolerance: float | None = None,
    order: int | None = None,
    quad_order: int = 8,
) -> list[ResidualReport]:
    """One constancy report per state component for phi_1..phi_n."""
    tol = default_tolerance(x) if tolerance is None else tolerance
    m, arc = _setup(L, x, order, quad_order)
    fj = f_jet(L, arc)
    reports = []
    for c in range(x.n):
        phi = _assemble(arc, fj.dF_dX[m, c], fj.dF_dX[:, c], m)
        reports.append(judge(f"EL_{c + 1}", arc.s, phi, arc.near_singular, tol, m))
    return reports


def residual_csv(reports: list[ResidualReport]) -> str:
    """Columns s, phi_0, phi_1..phi_n, excluded."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = ["phi_0" if r.id == "dBR" else "phi_" + r.id.split("_")[1] for r in reports]
    writer.writerow(["s", *names, "excluded"])
    s = reports[0].s
    excluded = np.logical_or.reduce([r.excluded for r in reports])
    for j in range(len(s)):
        writer.writerow([repr(float(s[j]))] + [repr(float(r.phi[j])) for r in reports] + [int(excluded[j])])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# superlinearity witness


@dataclass(frozen=True)
class WitnessReport:
    t: np.ndarray
    W: np.ndarray
    sup: float
    argmax: float

    def summary(self) -> dict:
        return {"sup": self.sup, "argmax_t": self.argmax, "samples": int(len(self.t))}


def superlinearity_witness(L: Expr, x: Trajectory, order: int | None = None, per_cell: int = 16) -> WitnessReport:
    """W(t) = |dL/dx^(m)| * sum_{i=1}^m |x^(i)(t)| on Chebyshev points and cell ends."""
    m = max(L.m, 1) if order is None else order
    if x.m < m:
        raise ValueError(f"trajectory of order {x.m} cannot carry a problem of order {m}")
    cells, xi = x._sample_points(per_cell)
    t = x.mesh.nodes[cells] + x.mesh.widths[cells] * xi
    jets = x.derivs_in_cells(cells, xi, m)
    _, grad, _ = L.derivatives(t, jets)
    n = x.n
    top = grad[1 + m * n : 1 + (m + 1) * n]
    W = np.linalg.norm(top, axis=0) * sum(np.linalg.norm(jets[i], axis=0) for i in range(1, m + 1))
    j = int(np.argmax(W))
    return WitnessReport(t, W, float(W[j]), float(t[j]))
