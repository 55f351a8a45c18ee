"""Arc-length reparameterization of a trajectory graph and the function F.

The graph {(t, x(t))} is rewritten as (t(s), X(s)) with s the arc length,
so that t' = 1/sqrt(1 + |x'|^2) and |X'|^2 + t'^2 = 1.  Derivatives with
respect to s are produced in Taylor mode: at every sample the t-series of x
is turned into an s-series by series reversion, which gives t^(k)(s) and
X^(k)(s) for all k <= m in one sweep.

With P_ik the coefficients expressing x^(k)(t(s)) = sum_i P_ik X^(i)(s),

    F(t, X, t', X', ..., t^(m), X^(m)) = L(t, X, P_11 X', ..., sum_i P_im X^(i)) t'

and all its partials come from forward AD over this composite map.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import dual, quadrature, series
from .dual import Dual
from .expr import Expr
from .trajectory import QuadGrid, Trajectory

NEAR_SINGULAR = 1e-8


@dataclass(frozen=True)
class ArcCurve:
    """Samples of (t(s), X(s)) at the images of the trajectory's Gauss points."""

    length: float
    s: np.ndarray  # (J,)
    tder: np.ndarray  # (m+1, J): t, t', ..., t^(m)
    Xder: np.ndarray  # (m+1, n, J)
    ds_dt: np.ndarray  # (J,)
    s_nodes: np.ndarray  # s at mesh nodes
    grid: QuadGrid
    trajectory: Trajectory
    order: int

    @property
    def m(self) -> int:
        return self.order

    @property
    def n(self) -> int:
        return self.Xder.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.tder[0]

    @property
    def near_singular(self) -> np.ndarray:
        return self.tder[1] < NEAR_SINGULAR

    @property
    def ds(self) -> np.ndarray:
        """Quadrature weights in s at the samples."""
        return self.grid.w * self.ds_dt

    def speed_defect(self) -> np.ndarray:
        return np.sum(self.Xder[1] ** 2, axis=0) + self.tder[1] ** 2 - 1.0

    def s_of_t(self, t) -> np.ndarray:
        """Arc length from a to t, by Gauss quadrature on the partial cell."""
        traj = self.trajectory
        t = np.atleast_1d(np.asarray(t, dtype=float))
        cell = traj.mesh.locate(t)
        t0 = traj.mesh.nodes[cell]
        xi, wi = quadrature.gauss_unit(self.grid.order)
        span = t - t0
        pts = t0[:, None] + span[:, None] * xi[None, :]
        d1 = traj.eval_derivs(pts.ravel(), 1)[1].reshape(traj.n, *pts.shape)
        speed = np.sqrt(1.0 + np.sum(d1**2, axis=0))
        return self.s_nodes[cell] + span * (speed @ wi)

    def at(self, s: float) -> float:
        """t(s) by bracketed root-finding inside the cell containing s."""
        if not -1e-12 <= s <= self.length * (1 + 1e-12):
            raise ValueError(f"s = {s} outside [0, {self.length}]")
        s = min(max(s, 0.0), self.length)
        cell = int(np.clip(np.searchsorted(self.s_nodes, s, side="right") - 1, 0, len(self.s_nodes) - 2))
        lo, hi = self.trajectory.mesh.nodes[cell], self.trajectory.mesh.nodes[cell + 1]
        f = lambda tt: float(self.s_of_t(tt)[0]) - s  # noqa: E731
        flo, fhi = f(lo), f(hi)
        if flo >= 0:
            return float(lo)
        if fhi <= 0:
            return float(hi)
        return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def arclength(x: Trajectory, quad_order: int = 8, order: int | None = None) -> ArcCurve:
    """Arc-length reparameterization sampled at the Gauss points of ``x``.

    ``order`` (default ``x.m``) is how many s-derivatives to produce; it may
    not exceed the order of the trajectory.
    """
    m = x.m if order is None else order
    if not 1 <= m <= x.m:
        raise ValueError(f"reparameterization order must lie in 1..{x.m}")
    grid = x.quadrature(quad_order)
    xs = x.jets(grid, upto=m)  # (m+1, n, J) t-derivatives
    h = x.mesh.widths

    # s'(t) as a series in the t-offset; x' has coefficients x^(k+1)/k!
    d1 = [xs[k + 1] / math.factorial(k) for k in range(m)]
    sq = [c.sum(axis=0) for c in series.mul(d1, d1)]
    sq[0] = sq[0] + 1.0
    speed = series.sqrt(sq)
    ds_dt = speed[0]

    # s at nodes and at Gauss points
    per_cell = (grid.w * ds_dt).reshape(x.mesh.cells, quad_order).sum(axis=1)
    s_nodes = np.concatenate([[0.0], np.cumsum(per_cell)])
    A = quadrature.integration_matrix(quad_order)
    local_s = (ds_dt.reshape(x.mesh.cells, quad_order) @ A.T) * h[:, None]
    s = (s_nodes[:-1, None] + local_s).ravel()

    # revert s - s_j = S(dt) to dt = T(ds), then compose x with T
    s_series = series.integral(speed, 0.0)
    t_series = series.revert(s_series)
    tder = np.empty((m + 1, len(s)))
    tder[0] = grid.t
    for k in range(1, m + 1):
        tder[k] = math.factorial(k) * t_series[k]
    x_series = [xs[k] / math.factorial(k) for k in range(m + 1)]
    X_series = series.compose(x_series, t_series, m)
    Xder = np.empty_like(xs)
    Xder[0] = xs[0]
    for k in range(1, m + 1):
        Xder[k] = math.factorial(k) * X_series[k]

    for arr in (s, tder, Xder, s_nodes):
        arr.setflags(write=False)
    return ArcCurve(float(s_nodes[-1]), s, tder, Xder, ds_dt, s_nodes, grid, x, m)


# ---------------------------------------------------------------------------
# P_ik


@dataclass(frozen=True)
class PTable:
    """P_ik for 1 <= i <= k <= m, with their Taylor series in s."""

    m: int
    series: dict

    def __getitem__(self, ik):
        return self.series[ik][0]

    def s_derivative(self, i: int, k: int, order: int = 1):
        return math.factorial(order) * self.series[(i, k)][order]

    def reconstruct(self, k: int, Xder):
        """sum_i P_ik X^(i); ``Xder[i]`` may be an array of components."""
        return sum(self[(i, k)] * Xder[i] for i in range(1, k + 1))


def p_table(tderivs) -> PTable:
    """P_ik from (t', t'', ..., t^(m)) by the recurrence

    P_11 = 1/t',  P_{i,k+1} = (d/ds P_ik + P_{i-1,k}) / t'.

    The inputs may be arrays or Duals.  d/ds is applied to the Taylor
    series of each P in s, so every entry is differentiated exactly.
    """
    m = len(tderivs)
    if m < 1:
        raise ValueError("need at least t'")
    if np.any(np.asarray(dual.value_of(tderivs[0])) <= 0):
        raise ValueError("t' must be positive")
    tp = [tderivs[j] / math.factorial(j) for j in range(m)]  # series of t'(s)
    inv = series.reciprocal(tp)
    table = {(1, 1): inv}
    for k in range(1, m):
        size = m - k  # entries in the series of P_{., k+1}
        for i in range(1, k + 2):
            acc = None
            if i <= k:
                acc = series.derivative(table[(i, k)])[:size]
            if i >= 2:
                prev = table[(i - 1, k)][:size]
                acc = prev if acc is None else series.add(acc, prev)
            table[(i, k + 1)] = series.mul(acc, inv[:size], size - 1)
    return PTable(m, table)


# ---------------------------------------------------------------------------
# F and its partials


@dataclass(frozen=True)
class FJet:
    F: np.ndarray  # (J,)
    dF_dt: np.ndarray  # (m+1, J): dF/dt^(k)
    dF_dX: np.ndarray  # (m+1, n, J): dF/dX_i^(k)

    @property
    def m(self) -> int:
        return self.dF_dt.shape[0] - 1


def composite_F(L: Expr, tv, Xv, m: int):
    """F evaluated on generic arithmetic values.

    ``tv[k]`` is t^(k) and ``Xv[k][i]`` is X_{i+1}^(k) for k = 0..m.
    """
    P = p_table(tv[1:])
    n = len(Xv[0])
    xs = [list(Xv[0])]
    for k in range(1, m + 1):
        xs.append([sum(P[(i, k)] * Xv[i][c] for i in range(1, k + 1)) for c in range(n)])
    return L(tv[0], xs) * tv[1]


def f_jet(L: Expr, arc: ArcCurve, tder=None, Xder=None) -> FJet:
    """F and all partials at the arc samples (or at explicit points).

    Coordinates are ordered (t, X_1..X_n, t', X'_1.., ..., t^(m), X^(m)_..).
    """
    tder = arc.tder if tder is None else np.asarray(tder, dtype=float)
    Xder = arc.Xder if Xder is None else np.asarray(Xder, dtype=float)
    m, n = Xder.shape[0] - 1, Xder.shape[1]
    L.check_shape(m, n)
    if np.any(tder[1] <= 0):
        raise ValueError("t' must be positive at every evaluation point")
    shape = tder.shape[1:]
    seeds = []
    for k in range(m + 1):
        seeds.append(tder[k])
        seeds.extend(Xder[k, i] for i in range(n))
    v = Dual.variables(seeds)
    tv = [v[k * (n + 1)] for k in range(m + 1)]
    Xv = [v[k * (n + 1) + 1 : (k + 1) * (n + 1)] for k in range(m + 1)]
    with np.errstate(all="ignore"):
        out = composite_F(L, tv, Xv, m)
    val = np.broadcast_to(out.val, shape).copy()
    grad = np.broadcast_to(out.grad, (len(seeds),) + shape).reshape((m + 1, n + 1) + shape)
    return FJet(val, grad[:, 0].copy(), grad[:, 1:].copy())


def remark_partials(L: Expr, tder, Xder) -> FJet:
    """Hand-written partials of F for m = 2, used as an independent check.

    Built only from the t-side partials of L:
        dF/dt = L_t t',        dF/dX = t' L_x,
        dF/dX' = L_v + t' P12 L_w,     dF/dX'' = t' P22 L_w,
        dF/dt' = L + t'[L_v.(-X'/t'^2) + L_w.(3 t'' X'/t'^4 - 2 X''/t'^3)],
        dF/dt'' = -L_w.X'/t'^2,
    where v = x', w = x''.
    """
    tder = np.asarray(tder, dtype=float)
    Xder = np.asarray(Xder, dtype=float)
    if Xder.shape[0] != 3:
        raise ValueError("closed-form partials are for second-order problems")
    n = Xder.shape[1]
    t, tp, tpp = tder
    X, X1, X2 = Xder
    P12 = -tpp / tp**3
    P22 = 1.0 / tp**2
    v = X1 / tp
    w = P12 * X1 + P22 * X2
    xs = np.stack([X, v, w])
    val, grad, _ = L.derivatives(t, xs)
    Lt = grad[0]
    Lx, Lv, Lw = grad[1:].reshape(3, n, *tp.shape)
    dF_dt = np.stack(
        [
            Lt * tp,
            val + tp * (np.sum(Lv * (-X1 / tp**2), axis=0) + np.sum(Lw * (3 * tpp * X1 / tp**4 - 2 * X2 / tp**3), axis=0)),
            -np.sum(Lw * X1, axis=0) / tp**2,
        ]
    )
    dF_dX = np.stack([tp * Lx, Lv + tp * P12 * Lw, tp * P22 * Lw])
    return FJet(val * tp, dF_dt, dF_dX)


def to_csv(arc: ArcCurve, fj: FJet) -> str:
    m, n = arc.m, arc.n
    cols = ["s"] + [f"t{k}" for k in range(m + 1)]
    cols += [f"X{k}_{i + 1}" for k in range(m + 1) for i in range(n)]
    cols += ["F"] + [f"dF_dt{k}" for k in range(m + 1)]
    cols += [f"dF_dX{k}_{i + 1}" for k in range(m + 1) for i in range(n)]
    cols += ["near_singular"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    ns = arc.near_singular
    for j in range(len(arc.s)):
        row = [arc.s[j], *arc.tder[:, j], *arc.Xder[:, :, j].ravel(), fj.F[j], *fj.dF_dt[:, j], *fj.dF_dX[:, :, j].ravel()]
        writer.writerow([repr(float(r)) for r in row] + [int(ns[j])])
    return buf.getvalue()
