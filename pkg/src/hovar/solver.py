"""Direct-method minimization over Hermite trajectory spaces.

The unknowns are the derivative values x, x', ..., x^(m-1) at interior
mesh nodes; boundary node data are pinned, so boundary conditions hold
exactly.  The objective is composite Gauss quadrature of L, and its
gradient is exact: forward AD gives the jet partials of L at every
quadrature point and the (linear) Hermite basis maps them back to node
data.  Minimization uses scipy's L-BFGS-B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, sparse

from .dual import EvaluationError
from .expr import Expr, parse
from .trajectory import BoundaryData, Mesh, Trajectory, boundary_blend, hermite_basis, refine


class ProblemError(ValueError):
    """Invalid problem description; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class ProblemSpec:
    L: Expr
    m: int
    n: int
    interval: tuple
    boundary: BoundaryData
    autonomous: bool | None = None

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        if not a < b:
            raise ProblemError("interval", "need a < b")
        object.__setattr__(self, "interval", (a, b))
        if self.m < 1 or self.n < 1:
            raise ProblemError("m", "order and dimension must be >= 1")
        if self.L.m > self.m or self.L.n > self.n:
            raise ProblemError(
                "lagrangian", f"uses order {self.L.m} / dimension {self.L.n}, beyond declared m={self.m}, n={self.n}"
            )
        if self.boundary.m != self.m or self.boundary.n != self.n:
            raise ProblemError("boundary", f"needs {self.m} vectors of length {self.n} per side")
        if self.autonomous is None:
            object.__setattr__(self, "autonomous", self.L.autonomous)
        elif bool(self.autonomous) != self.L.autonomous:
            raise ProblemError("autonomous", "flag disagrees with the presence of t in the Lagrangian")

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    def to_dict(self) -> dict:
        return {
            "lagrangian": self.L.source,
            "m": self.m,
            "n": self.n,
            "interval": list(self.interval),
            "boundary": self.boundary.to_dict(),
            "autonomous": self.autonomous,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        if not isinstance(d, dict):
            raise ProblemError("problem", "must be a JSON object")
        for key in ("lagrangian", "interval", "boundary"):
            if key not in d:
                raise ProblemError(key, "missing")
        try:
            L = parse(d["lagrangian"])
        except (ValueError, TypeError) as exc:
            raise ProblemError("lagrangian", str(exc)) from None
        m = d.get("m", max(L.m, 1))
        n = d.get("n", max(L.n, 1))
        if not isinstance(m, int) or not isinstance(n, int):
            raise ProblemError("m", "m and n must be integers")
        interval = d["interval"]
        if not isinstance(interval, (list, tuple)) or len(interval) != 2:
            raise ProblemError("interval", "must be [a, b]")
        bd = d["boundary"]
        if not isinstance(bd, dict) or "left" not in bd or "right" not in bd:
            raise ProblemError("boundary", "needs 'left' and 'right'")
        try:
            boundary = BoundaryData(bd["left"], bd["right"])
        except (ValueError, TypeError) as exc:
            raise ProblemError("boundary", str(exc)) from None
        return cls(L, m, n, tuple(interval), boundary, d.get("autonomous"))


@dataclass(frozen=True)
class SolveOptions:
    mesh: Mesh | None = None
    quad_order: int = 8
    maxiter: int = 20000
    gtol: float = 1e-10
    ftol: float = 1e-15
    maxcor: int = 20
    cap: float | None = None
    penalty_start: float = 1e2
    penalty_growth: float = 100.0
    penalty_max: float = 1e12
    penalty_tol: float = 1e-6
    restarts: int = 5
    seed: int = 0
    jitter: float = 0.1
    initial: Trajectory | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.gtol > 0:
            raise ValueError("gradient tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("need at least one start")
        if self.cap is not None and not self.cap > 0:
            raise ValueError("cap must be positive")

    def check(self, m: int):
        if self.quad_order < m + 1:
            raise ValueError(f"quadrature order must be >= m + 1 = {m + 1}")


@dataclass
class MinimizeResult:
    trajectory: Trajectory
    value: float
    converged: bool
    diagnostics: dict

    def summary(self) -> dict:
        return {"value": self.value, "converged": self.converged, "diagnostics": self.diagnostics}


# ---------------------------------------------------------------------------
# discretized objective


class Discretization:
    """Linear maps from node data to derivative values at quadrature points."""

    def __init__(self, problem: ProblemSpec, mesh: Mesh, quad_order: int):
        self.problem = problem
        self.mesh = mesh
        m, n = problem.m, problem.n
        if abs(mesh.a - problem.a) > 1e-12 * max(1.0, abs(problem.a)) or abs(mesh.b - problem.b) > 1e-12 * max(
            1.0, abs(problem.b)
        ):
            raise ProblemError("mesh", f"mesh spans [{mesh.a}, {mesh.b}], problem interval is {list(problem.interval)}")
        tr = Trajectory(mesh, np.zeros((mesh.cells + 1, m, n)))
        self.grid = tr.quadrature(quad_order)
        N = mesh.cells
        h = mesh.widths[self.grid.cell]
        J = len(self.grid.t)
        rows = np.repeat(np.arange(J), 2 * m)
        self.B = []
        for k in range(m + 1):
            basis = hermite_basis(self.grid.xi, m, k)  # (J, 2m): [left jj.., right jj..]
            vals = np.empty((J, 2 * m))
            cols = np.empty((J, 2 * m), dtype=int)
            for side in range(2):
                for jj in range(m):
                    r = side * m + jj
                    vals[:, r] = basis[:, r] * h ** (jj - k)
                    cols[:, r] = (self.grid.cell + side) * m + jj
            self.B.append(sparse.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(J, (N + 1) * m)))
        self.free = np.ones((N + 1, m, n), dtype=bool)
        self.free[0] = self.free[-1] = False
        self.pinned = np.zeros((N + 1, m, n))
        self.pinned[0] = problem.boundary.left
        self.pinned[-1] = problem.boundary.right

    @property
    def size(self) -> int:
        return int(self.free.sum())

    def node_data(self, z) -> np.ndarray:
        data = self.pinned.copy()
        data[self.free] = z
        return data

    def pack(self, traj: Trajectory) -> np.ndarray:
        return traj.node_data[self.free].copy()

    def jets(self, data) -> np.ndarray:
        """(m+1, n, J) derivative values at quadrature points."""
        N1, m, n = data.shape
        flat = data.reshape(N1 * m, n)
        return np.stack([Bk @ flat for Bk in self.B]).transpose(0, 2, 1)

    def evaluate(self, z, cap=None, mu=0.0, gradient=True):
        """Quadrature value (with optional cap penalty) and gradient in z."""
        p = self.problem
        data = self.node_data(z)
        jets = self.jets(data)
        w = self.grid.w
        if gradient:
            val, grad, _ = p.L.derivatives(self.grid.t, jets, include_t=False)
            grad = grad.reshape(p.m + 1, p.n, -1)
        else:
            val = p.L.values(self.grid.t, jets)
            grad = None
        total = float(np.sum(w * val))
        violation = 0.0
        if cap is not None:
            top = jets[p.m]
            excess = np.maximum(0.0, np.sum(top**2, axis=0) - cap**2)
            violation = float(np.sum(w * excess**2))
            total += mu * violation
            if gradient:
                grad = grad.copy()
                grad[p.m] += mu * 4.0 * excess * top
        if not gradient:
            return total, violation
        weighted = grad * w  # (m+1, n, J)
        g = sum(self.B[k].T @ weighted[k].T for k in range(p.m + 1))  # ((N+1)m, n)
        g = g.reshape(data.shape)
        return total, g[self.free], violation


def objective(p: ProblemSpec, x: Trajectory, quad_order: int = 8) -> float:
    """Integral of L along x by composite Gauss quadrature."""
    if x.m < p.m or x.n != p.n:
        raise ProblemError("trajectory", f"has m={x.m}, n={x.n}; problem needs m={p.m}, n={p.n}")
    grid = x.quadrature(quad_order)
    jets = x.jets(grid, upto=p.m)
    with np.errstate(all="ignore"):
        try:
            vals = p.L.values(grid.t, jets)
        except EvaluationError:
            for j in range(len(grid.t)):
                try:
                    p.L.values(grid.t[j : j + 1], jets[:, :, j : j + 1])
                except EvaluationError as exc:
                    raise EvaluationError(f"{exc} at t = {grid.t[j]!r}") from None
            raise
    return float(np.sum(grid.w * vals))


# ---------------------------------------------------------------------------
# minimization


UNBOUNDED_VALUE = 1e100
STATIONARY_RTOL = 1e-4


def _run_lbfgs(disc: Discretization, z0, opts: SolveOptions, cap, mu):
    state = {"failed": None}

    def fun(z):
        try:
            with np.errstate(all="ignore"):
                f, g, _ = disc.evaluate(z, cap, mu)
        except EvaluationError as exc:
            state["failed"] = str(exc)
            return 1e300, np.zeros_like(z)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            state["failed"] = "non-finite objective"
            return 1e300, np.zeros_like(z)
        return f, g

    res = optimize.minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": opts.maxiter, "gtol": opts.gtol, "ftol": opts.ftol, "maxcor": opts.maxcor, "maxls": 50},
    )
    f, g = fun(res.x)
    gnorm = float(np.max(np.abs(g))) if len(g) else 0.0
    msg = str(res.message)
    # a stalled run on a functional unbounded below can still report success
    bounded = np.isfinite(f) and abs(f) < UNBOUNDED_VALUE
    small = gnorm <= opts.gtol or (bool(res.success) and gnorm <= STATIONARY_RTOL * (1.0 + abs(f)))
    if not bounded:
        msg = "objective appears unbounded below"
    elif not small:
        msg = f"{msg}; gradient norm {gnorm:.3e} above tolerance"
    return res.x, float(f), gnorm, int(res.nit), bool(bounded and small), msg


def _solve_once(disc: Discretization, z0, opts: SolveOptions):
    if opts.cap is None:
        z, f, gnorm, nit, ok, msg = _run_lbfgs(disc, z0, opts, None, 0.0)
        return z, f, {"grad_norm": gnorm, "iterations": nit, "converged": ok, "message": msg}
    mu = opts.penalty_start
    z = z0
    nit_total = 0
    while True:
        z, f, gnorm, nit, ok, msg = _run_lbfgs(disc, z, opts, opts.cap, mu)
        nit_total += nit
        _, violation = disc.evaluate(z, opts.cap, mu, gradient=False)
        if violation < opts.penalty_tol or mu * opts.penalty_growth > opts.penalty_max or not ok:
            break
        mu *= opts.penalty_growth
    feasible = violation < opts.penalty_tol
    return z, f, {
        "grad_norm": gnorm,
        "iterations": nit_total,
        "converged": ok and feasible,
        "message": msg if feasible else "cap penalty did not reach the violation target",
        "penalty": mu,
        "violation": violation,
    }


def minimize(p: ProblemSpec, opts: SolveOptions | None = None) -> MinimizeResult:
    """Best of several L-BFGS-B runs from jittered starts."""
    opts = opts or SolveOptions()
    opts.check(p.m)
    mesh = opts.mesh or Mesh.uniform(p.a, p.b, 8)
    disc = Discretization(p, mesh, opts.quad_order)
    if opts.initial is not None:
        start = opts.initial if opts.initial.mesh is mesh else opts.initial.resample(mesh)
        if start.m != p.m or start.n != p.n:
            raise ProblemError("initial", "initial trajectory has the wrong order or dimension")
    else:
        start = boundary_blend(mesh, p.boundary)
    z_init = disc.pack(start)
    rng = np.random.default_rng(opts.seed)
    # the perturbation scale tracks the size of each unknown
    scale = opts.jitter * (1.0 + np.abs(z_init))
    runs = []
    for r in range(opts.restarts):
        z0 = z_init if r == 0 else z_init + scale * rng.standard_normal(z_init.shape)
        try:
            z, f, info = _solve_once(disc, z0, opts)
        except EvaluationError as exc:
            z, f, info = z0, math.inf, {"converged": False, "message": str(exc), "grad_norm": math.inf, "iterations": 0}
        runs.append((f, r, z, info))
    finite = [run for run in runs if math.isfinite(run[0]) and run[0] < 1e300]
    if not finite:
        f, r, z, info = runs[0]
        traj = Trajectory(mesh, disc.node_data(z))
        return MinimizeResult(traj, math.inf, False, {"message": info.get("message"), "restart_values": []})
    f, r, z, info = min(finite, key=lambda run: (run[0], run[1]))
    traj = Trajectory(mesh, disc.node_data(z))
    # report the plain objective, without any penalty contribution
    value = objective(p, traj, opts.quad_order)
    values = [run[0] for run in runs]
    diagnostics = dict(info)
    diagnostics.update(
        {
            "restart_values": values,
            "restart_spread": float(max(finite, key=lambda run: run[0])[0] - f),
            "best_restart": r,
            "unknowns": disc.size,
            "cells": mesh.cells,
        }
    )
    return MinimizeResult(traj, value, bool(info["converged"]), diagnostics)


# ---------------------------------------------------------------------------
# Lavrentiev gap and blow-up probes


GAP = "gap-detected"
NO_GAP = "no-gap"
INCONCLUSIVE = "inconclusive"


@dataclass
class GapReport:
    levels: list
    cap: float
    tolerance: float
    threshold: float
    gap: float
    verdict: str
    notes: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "cap": self.cap,
            "tolerance": self.tolerance,
            "threshold": self.threshold,
            "gap": self.gap,
            "verdict": self.verdict,
            "levels": self.levels,
            "notes": self.notes,
        }


def default_free_mesh(p: ProblemSpec, endpoint: str = "left", ratio: float = 0.5) -> Mesh:
    return Mesh.geometric(p.a, p.b, 3, ratio, endpoint, 2)


def default_cap_mesh(p: ProblemSpec) -> Mesh:
    return Mesh.uniform(p.a, p.b, 4)


def gap_verdict(levels: list, tolerance: float):
    """Decide from per-level values; returns (verdict, margin, threshold, notes)."""
    notes = []
    unreliable = sum(1 for lv in levels if not (lv["free_converged"] and lv["cap_converged"]))
    last = levels[-1]
    margin = last["cap_value"] - last["free_value"]
    threshold = max(10 * tolerance, 0.01 * (1 + abs(last["free_value"])))
    if unreliable >= 2:
        notes.append(f"{unreliable} levels did not converge")
        return INCONCLUSIVE, margin, threshold, notes
    prev = levels[-2]["cap_value"] - levels[-2]["free_value"]
    if margin > threshold:
        if margin >= prev - 1e-9:
            return GAP, margin, threshold, notes
        notes.append("margin exceeds the threshold but shrank over the last two levels")
        return INCONCLUSIVE, margin, threshold, notes
    if abs(margin) <= tolerance:
        return NO_GAP, margin, threshold, notes
    notes.append("margin lies between the no-gap tolerance and the detection threshold")
    return INCONCLUSIVE, margin, threshold, notes


def lavrentiev_gap(
    p: ProblemSpec,
    cap: float,
    levels: int = 6,
    opts: SolveOptions | None = None,
    free_mesh: Mesh | None = None,
    cap_mesh: Mesh | None = None,
    tolerance: float = 1e-6,
) -> GapReport:
    """Compare minima of the graded free class and the capped uniform class."""
    if levels < 3:
        raise ValueError("need at least 3 levels")
    opts = opts or SolveOptions()
    fm = free_mesh or default_free_mesh(p)
    cm = cap_mesh or default_cap_mesh(p)
    rows = []
    warm_free = warm_cap = None
    for level in range(1, levels + 1):
        free = minimize(p, replace(opts, mesh=fm, cap=None, initial=warm_free))
        capped = minimize(p, replace(opts, mesh=cm, cap=cap, initial=warm_cap))
        rows.append(
            {
                "level": level,
                "free_cells": fm.cells,
                "free_min_cell": float(fm.widths.min()),
                "free_value": free.value,
                "free_converged": free.converged,
                "cap_cells": cm.cells,
                "cap_value": capped.value,
                "cap_converged": capped.converged,
                "cap_violation": capped.diagnostics.get("violation", 0.0),
                "margin": capped.value - free.value,
            }
        )
        warm_free, warm_cap = free.trajectory, capped.trajectory
        fm, cm = refine(fm), refine(cm)
    verdict, margin, threshold, notes = gap_verdict(rows, tolerance)
    for key in ("free_value", "cap_value"):
        seq = [r[key] for r in rows]
        if any(b > a + 1e-9 * (1 + abs(a)) for a, b in zip(seq, seq[1:])):
            notes.append(f"{key} increased under refinement beyond 1e-9 slack")
    return GapReport(rows, float(cap), tolerance, threshold, margin, verdict, notes)


@dataclass
class BlowupReport:
    sup_norms: list
    ratios: list
    unbounded_suspect: bool
    rows: list

    def summary(self) -> dict:
        return {
            "sup_norms": self.sup_norms,
            "ratios": self.ratios,
            "unbounded_suspect": self.unbounded_suspect,
            "levels": self.rows,
        }


def growth_report(sups, rows=None, threshold: float = 1.1) -> BlowupReport:
    sups = [float(s) for s in sups]
    ratios = [b / a if a > 0 else math.inf for a, b in zip(sups, sups[1:])]
    # a non-finite sup norm or ratio is itself a blow-up signal
    suspect = len(ratios) >= 2 and all(not r <= threshold for r in ratios[-2:])
    return BlowupReport(sups, ratios, suspect, rows or [])


def blowup_probe(p: ProblemSpec, levels: int = 6, opts: SolveOptions | None = None, mesh: Mesh | None = None) -> BlowupReport:
    """sup|x^(m)| of computed minimizers on successively refined meshes."""
    if levels < 3:
        raise ValueError("need at least 3 levels")
    opts = opts or SolveOptions()
    mesh = mesh or default_free_mesh(p)
    sups, rows = [], []
    warm = None
    for level in range(1, levels + 1):
        res = minimize(p, replace(opts, mesh=mesh, initial=warm))
        sup = res.trajectory.sup_norm_deriv(p.m)
        sups.append(sup)
        rows.append({"level": level, "cells": mesh.cells, "min_cell": float(mesh.widths.min()),
                     "value": res.value, "converged": res.converged, "sup_norm": sup})
        warm = res.trajectory
        mesh = refine(mesh)
    report = growth_report(sups, rows)
    for row, ratio in zip(rows[1:], report.ratios):
        row["ratio"] = ratio
    return report
