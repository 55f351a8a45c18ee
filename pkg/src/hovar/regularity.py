"""Sampled feasibility checks for Lipschitz-regularity conditions.

Every check evaluates the Lagrangian and its partials on a jittered lattice
of jet points and either finds constants for which the inequality holds at
every sample ("holds-on-box", which is not a proof), or reports a sample
that no constant in the search range can accommodate ("violated").

Two-constant linear conditions  v <= alpha*u + beta  (or >= for the
superlinearity condition) are fitted on the diagonal alpha = beta = tau:
the extreme ratio v/(u+1) over all samples is exactly the best tau, which
is then snapped to a power of two so that re-checking is free of rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dual import EvaluationError
from .expr import Expr
from .trajectory import Trajectory

HOLDS = "holds-on-box"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"

MAX_SAMPLES = 10_000_000
DYADIC_RANGE = (-20, 20)
ZERO_PARTIAL = 1e-12
T_CELLS = 8

FIRST_ORDER_ONLY = ("tonelli_morrey", "cv_vectorial", "cv_autonomous", "cv_weighted", "sarychev_torres")
CONDITIONS = FIRST_ORDER_ONLY + ("h4",)
ST_BETAS = (0.0, 0.5, 1.0, 1.5, 1.99)
ST_MUS = (None, 0.0, 1.0, 2.0)  # None stands for max(beta - 1, -1)


class BudgetError(ValueError):
    pass


# ---------------------------------------------------------------------------
# sampling box


@dataclass(frozen=True)
class JetBox:
    """Box of jet points: an interval for t and for every x_i^(k).

    ``x[k][i]`` is the interval (lo, hi) for x_{i+1}^(k).  ``counts`` is a
    lattice size per axis (t first, then x^(0)_1, ..., x^(m)_n), or one
    number used for every axis.
    """

    t: tuple
    x: tuple
    counts: tuple | int = 7
    seed: int = 0
    jitter: float = 0.5

    def __post_init__(self):
        t = tuple(float(v) for v in self.t)
        x = tuple(tuple(tuple(float(v) for v in iv) for iv in level) for level in self.x)
        if len(t) != 2 or not t[0] < t[1]:
            raise ValueError("t interval must be (lo, hi) with lo < hi")
        if not x or not x[0]:
            raise ValueError("box needs intervals for x^(0) .. x^(m)")
        n = len(x[0])
        for k, level in enumerate(x):
            if len(level) != n:
                raise ValueError(f"derivative order {k} has {len(level)} intervals, expected {n}")
            for i, iv in enumerate(level):
                if len(iv) != 2 or not iv[0] < iv[1]:
                    raise ValueError(f"interval for x_{i + 1}^({k}) must be (lo, hi) with lo < hi")
        axes = 1 + len(x) * n
        counts = (int(self.counts),) * axes if np.ndim(self.counts) == 0 else tuple(int(c) for c in self.counts)
        if len(counts) != axes:
            raise ValueError(f"counts needs {axes} entries, got {len(counts)}")
        if min(counts) < 1:
            raise ValueError("counts must be positive")
        if math.prod(counts) > MAX_SAMPLES:
            raise BudgetError(f"box has {math.prod(counts)} samples, budget is {MAX_SAMPLES}")
        if not 0 <= self.jitter <= 1:
            raise ValueError("jitter must lie in [0, 1]")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "counts", counts)

    @property
    def m(self) -> int:
        return len(self.x) - 1

    @property
    def n(self) -> int:
        return len(self.x[0])

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    def intervals(self) -> list[tuple[float, float]]:
        return [self.t] + [iv for level in self.x for iv in level]

    def samples(self) -> tuple[np.ndarray, np.ndarray]:
        """Jittered lattice: t of shape (S,), x of shape (m+1, n, S)."""
        rng = np.random.default_rng(self.seed)
        ivs = self.intervals()
        grids = np.meshgrid(*[np.arange(c) for c in self.counts], indexing="ij")
        idx = np.stack([g.ravel() for g in grids])  # (D, S)
        offs = 0.5 + self.jitter * (rng.random(idx.shape) - 0.5)
        pts = np.empty(idx.shape)
        for d, ((lo, hi), c) in enumerate(zip(ivs, self.counts)):
            pts[d] = lo + (hi - lo) * (idx[d] + offs[d]) / c
        return pts[0], pts[1:].reshape(self.m + 1, self.n, -1)

    def to_dict(self) -> dict:
        return {
            "t": list(self.t),
            "x": [[list(iv) for iv in level] for level in self.x],
            "counts": list(self.counts),
            "seed": self.seed,
            "jitter": self.jitter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JetBox":
        try:
            return cls(d["t"], d["x"], d.get("counts", 7), int(d.get("seed", 0)), float(d.get("jitter", 0.5)))
        except KeyError as exc:
            raise ValueError(f"box is missing field {exc.args[0]!r}") from None

    @classmethod
    def symmetric(cls, t, radii, n: int = 1, counts=7, seed: int = 0) -> "JetBox":
        """Box with |x^(k)_i| <= radii[k]."""
        return cls(t, [[(-r, r)] * n for r in radii], counts, seed)


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class RegularityVerdict:
    id: str
    status: str
    witness: dict = field(default_factory=dict)
    point: dict | None = None
    box: dict | None = None
    samples: int = 0
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "status": self.status,
            "witness": self.witness,
            "point": self.point,
            "box": self.box,
            "samples": self.samples,
            "notes": list(self.notes),
        }


def _point(t, x, j, **extra) -> dict:
    out = {"t": float(t[j]), "x": x[:, :, j].tolist()}
    out.update({k: float(v) for k, v in extra.items()})
    return out


def _dyadic_above(tau: float) -> float | None:
    """Smallest 2^p >= tau within the search range, None if tau is too big."""
    lo, hi = DYADIC_RANGE
    if not math.isfinite(tau) or tau > 2.0**hi:
        return None
    if tau <= 2.0**lo:
        return 2.0**lo
    p = math.ceil(math.log2(tau))
    while 2.0 ** (p - 1) >= tau:
        p -= 1
    while 2.0**p < tau:
        p += 1
    return 2.0**p


def _dyadic_below(tau: float) -> float | None:
    """Largest 2^p <= tau within the search range, None if tau is too small."""
    lo, hi = DYADIC_RANGE
    if not math.isfinite(tau) or tau < 2.0**lo:
        return None
    if tau >= 2.0**hi:
        return 2.0**hi
    p = math.floor(math.log2(tau))
    while 2.0 ** (p + 1) <= tau:
        p += 1
    while 2.0**p > tau:
        p -= 1
    return 2.0**p


def fit_upper(u, v):
    """tau with v <= tau*u + tau at every sample (u >= 0), or None."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        return None, None
    ratio = v / (u + 1.0)
    j = int(np.argmax(ratio))
    tau = _dyadic_above(float(ratio[j]))
    while tau is not None and not np.all(v <= tau * u + tau):
        tau = _dyadic_above(2.0 * tau)
    return tau, j


def fit_lower(u, v):
    """tau with tau*u + tau <= v at every sample (u >= 0), or None."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    ratio = v / (u + 1.0)
    j = int(np.argmin(ratio))
    tau = _dyadic_below(float(ratio[j]))
    while tau is not None and not np.all(tau * u + tau <= v):
        tau = _dyadic_below(0.5 * tau)
    return tau, j


class _Samples:
    """Value and gradient of L on the box samples, Hessian on request."""

    def __init__(self, L: Expr, box: JetBox, second_order=False):
        L.check_shape(box.m, box.n)
        self.box = box
        self.m, self.n = box.m, box.n
        self.t, self.x = box.samples()
        self.L = L
        self.val, grad, self.hess = L.derivatives(self.t, self.x, second_order=second_order)
        self.grad_t = grad[0]
        self.grad_x = grad[1:].reshape(self.m + 1, self.n, -1)

    def norm(self, arr):
        return np.linalg.norm(arr, axis=0)

    def block(self, k: int):
        """Hessian block over x^(k): shape (S, n, n)."""
        s = 1 + k * self.n
        return np.moveaxis(self.hess[s : s + self.n, s : s + self.n], -1, 0)


def _base(cid, box, status, **kw):
    return RegularityVerdict(cid, status, box=box.to_dict(), samples=box.size, **kw)


# ---------------------------------------------------------------------------
# individual conditions


def _tonelli_morrey(S: _Samples, box: JetBox) -> RegularityVerdict:
    cid = "tonelli_morrey"
    u = np.abs(S.val)
    v = S.norm(S.grad_x[0]) + S.norm(S.grad_x[1])
    tau, j = fit_upper(u, v)
    if tau is None:
        return _base(cid, box, VIOLATED, point=_point(S.t, S.x, j, lhs=v[j], L=S.val[j]),
                     notes=("no constants c, r up to the search bound",))
    return _base(cid, box, HOLDS, witness={"c": tau, "r": tau})


def _cv_vectorial(S: _Samples, box: JetBox) -> RegularityVerdict:
    cid = "cv_vectorial"
    n = S.n
    H = S.block(1)  # (S, n, n)
    eig = np.linalg.eigvalsh(H)[:, 0]
    j = int(np.argmin(eig))
    if eig[j] <= 0:
        return _base(cid, box, VIOLATED, point=_point(S.t, S.x, j, min_eigenvalue=eig[j]),
                     notes=("second derivative in the velocity is not positive definite",))
    # rhs = L_x - L_vt - L_vx v
    sv = 1 + n
    Lvt = S.hess[sv : sv + n, 0]
    Lvx = S.hess[sv : sv + n, 1 : 1 + n]
    vel = S.x[1]
    rhs = S.grad_x[0] - Lvt - np.einsum("ijs,js->is", Lvx, vel)
    sol = np.linalg.solve(H, np.moveaxis(rhs, -1, 0)[..., None])[..., 0]
    lhs = np.linalg.norm(sol, axis=1)
    speed = np.linalg.norm(vel, axis=0)
    scale = speed**3 + 1.0
    c = _dyadic_above(float(np.max(lhs / scale)))
    while c is not None and not np.all(lhs <= c * scale):
        c = _dyadic_above(2.0 * c)
    if c is None:
        j = int(np.argmax(lhs / scale))
        return _base(cid, box, VIOLATED, point=_point(S.t, S.x, j, lhs=lhs[j]),
                     notes=("no constant c up to the search bound",))
    return _base(cid, box, HOLDS, witness={"c": c, "min_eigenvalue": float(eig.min())})


def _t_cells(S: _Samples, box: JetBox, cells: int):
    lo, hi = box.t
    edges = np.linspace(lo, hi, cells + 1)
    idx = np.clip(np.searchsorted(edges, S.t, side="right") - 1, 0, cells - 1)
    return edges, idx


def _cv_autonomous(S: _Samples, box: JetBox, c: float = 0.0, cells: int = T_CELLS) -> RegularityVerdict:
    cid = "cv_autonomous"
    v = np.abs(S.grad_t)
    rhs0 = c * np.abs(S.val)
    edges, idx = _t_cells(S, box, cells)
    k = np.zeros(cells)
    for q in range(cells):
        sel = idx == q
        if np.any(sel):
            k[q] = max(0.0, float(np.max(v[sel] - rhs0[sel])))
    # float rounding in v - c|L| can leave a sample a hair above; nudge up
    while not np.all(v <= rhs0 + k[idx]):
        bad = v > rhs0 + k[idx]
        for q in np.unique(idx[bad]):
            k[q] = np.nextafter(k[q], np.inf)
    if not np.all(np.isfinite(k)):
        return _base(cid, box, INCONCLUSIVE, notes=("non-finite partials on the box",))
    l1 = float(np.sum(k * np.diff(edges)))
    return _base(cid, box, HOLDS, witness={"c": c, "k": k.tolist(), "k_edges": edges.tolist(), "k_l1": l1})


def _cv_weighted(S: _Samples, box: JetBox, c: float = 0.0, cells: int = T_CELLS) -> RegularityVerdict:
    cid = "cv_weighted"
    v = S.norm(S.grad_x[0]) - c * np.abs(S.val)
    u = S.norm(S.grad_x[1])
    edges, idx = _t_cells(S, box, cells)
    k = np.zeros(cells)
    for q in range(cells):
        sel = idx == q
        if not np.any(sel):
            continue
        tau, j = fit_upper(u[sel], np.maximum(v[sel], 0.0))
        if tau is None:
            where = np.flatnonzero(sel)[j]
            return _base(cid, box, VIOLATED, point=_point(S.t, S.x, where, lhs=v[where]),
                         notes=(f"no k, m up to the search bound on t-cell {q}",))
        k[q] = tau
    width = np.diff(edges)
    return _base(cid, box, HOLDS, witness={
        "c": c, "k": k.tolist(), "m": k.tolist(), "k_edges": edges.tolist(),
        "k_l1": float(np.sum(k * width)), "m_l1": float(np.sum(k * width)),
    })


def _sarychev_torres(S: _Samples, box: JetBox, betas=ST_BETAS, mus=ST_MUS) -> RegularityVerdict:
    cid = "sarychev_torres"
    base = np.abs(S.grad_t) + S.norm(S.grad_x[0])
    speed = S.norm(S.x[1])
    L = S.val
    best = None
    tried = []
    for beta in betas:
        if not float(beta).is_integer() and np.any(L < 0):
            continue  # L^beta undefined
        u = L**beta if beta else np.ones_like(L)
        if np.any(u < 0):
            continue  # the diagonal fit needs gamma*u >= 0
        for mu in mus:
            mu = max(beta - 1.0, -1.0) if mu is None else mu
            if mu < max(beta - 1.0, -1.0) or (beta, mu) in tried:
                continue
            tried.append((beta, mu))
            with np.errstate(divide="ignore", invalid="ignore"):
                v = base * speed**mu
            tau, _ = fit_upper(u, v)
            if tau is not None and (best is None or tau < best[0]):
                best = (tau, beta, mu)
    if best is None:
        if not tried:
            return _base(cid, box, INCONCLUSIVE, notes=("no admissible (beta, mu) pair: L takes negative values",))
        j = int(np.argmax(base))
        return _base(cid, box, VIOLATED, point=_point(S.t, S.x, j, lhs=base[j]),
                     notes=("no (gamma, eta) up to the search bound for any searched (beta, mu)",))
    tau, beta, mu = best
    return _base(cid, box, HOLDS, witness={"gamma": tau, "eta": tau, "beta": beta, "mu": mu})


def _locate_zero(L: Expr, t, x, m: int, lo: float, hi: float):
    """Sign change of dL/dx^(m) along the x^(m) axis through a point (n = 1)."""
    grid = np.linspace(lo, hi, 257)
    xs = np.repeat(x[:, :, None], len(grid), axis=2)
    xs[m, 0] = grid
    _, grad, _ = L.derivatives(np.full(len(grid), t), xs)
    g = grad[1 + m]
    flips = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)
    if len(flips) == 0:
        return None

    def partial(z):
        xz = x.copy()
        xz[m, 0] = z
        _, gz, _ = L.derivatives(np.asarray(t), xz)
        return float(gz[1 + m])

    a, b = grid[flips[0]], grid[flips[0] + 1]
    fa = partial(a)
    if fa == 0:
        return a, 0.0
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = partial(mid)
        if fm == 0 or b - a <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            a = b = mid
            break
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    z = 0.5 * (a + b)
    return z, partial(z)


def _h4(S: _Samples, box: JetBox) -> RegularityVerdict:
    cid = "h4"
    m = S.m
    top = S.norm(S.grad_x[m])
    u = sum(S.norm(S.x[i]) for i in range(1, m + 1))
    j = int(np.argmin(top))
    if top[j] < ZERO_PARTIAL:
        return _base(cid, box, VIOLATED, point=_point(S.t, S.x, j, partial=top[j]),
                     notes=("dL/dx^(m) vanishes at a sample, so no b > 0 exists",))
    if S.n == 1:
        lo, hi = box.x[m][0]
        found = _locate_zero(S.L, S.t[j], S.x[:, :, j].copy(), m, lo, hi)
        if found is not None and abs(found[1]) < ZERO_PARTIAL:
            z, val = found
            xz = S.x[:, :, j].copy()
            xz[m, 0] = z
            point = {"t": float(S.t[j]), "x": xz.tolist(), "partial": abs(val)}
            return _base(cid, box, VIOLATED, point=point,
                         notes=("dL/dx^(m) changes sign inside the box; its zero was located by bisection",))
    tau, jj = fit_lower(u, top)
    if tau is None:
        return _base(cid, box, VIOLATED, point=_point(S.t, S.x, jj, partial=top[jj]),
                     notes=("no a, b above the search floor",))
    return _base(cid, box, HOLDS, witness={"a": tau, "b": tau})


def check_condition(L: Expr, box: JetBox, cid: str, **options) -> RegularityVerdict:
    """Sampled verdict for one condition id on a jet box."""
    if cid not in CONDITIONS:
        raise ValueError(f"unknown condition {cid!r}; expected one of {', '.join(CONDITIONS)}")
    if cid in FIRST_ORDER_ONLY and box.m != 1:
        raise ValueError(f"condition {cid!r} is stated for first-order problems; box has m={box.m}")
    try:
        S = _Samples(L, box, second_order=(cid == "cv_vectorial"))
    except EvaluationError as exc:
        return _base(cid, box, INCONCLUSIVE, notes=(f"evaluation failed: {exc}",))
    if cid == "tonelli_morrey":
        return _tonelli_morrey(S, box)
    if cid == "cv_vectorial":
        return _cv_vectorial(S, box)
    if cid == "cv_autonomous":
        return _cv_autonomous(S, box, **options)
    if cid == "cv_weighted":
        return _cv_weighted(S, box, **options)
    if cid == "sarychev_torres":
        return _sarychev_torres(S, box, **options)
    return _h4(S, box)


# ---------------------------------------------------------------------------
# existence hypotheses


def _floor_2sig(a: float) -> float:
    """Round down to two significant decimal digits."""
    if a <= 0:
        return a
    p = math.floor(math.log10(a)) - 1
    return math.floor(a / 10.0**p) * 10.0**p


def check_tonelli_hypotheses(L: Expr, box: JetBox, pairs: int | None = None) -> tuple[RegularityVerdict, RegularityVerdict]:
    """(H2) convexity in x^(m) and (H3) quadratic coercivity L >= a|x^(m)|^2."""
    S = _Samples(L, box, second_order=True)
    m, n = S.m, S.n
    rng = np.random.default_rng(box.seed + 1)
    count = len(S.t) if pairs is None else pairs
    i = rng.integers(0, len(S.t), count)
    k = rng.integers(0, len(S.t), count)
    xa = S.x[:, :, i]
    xb = xa.copy()
    xb[m] = S.x[m][:, k]
    xm = xa.copy()
    xm[m] = 0.5 * (xa[m] + xb[m])
    t = S.t[i]
    la, lb, lm = L.values(t, xa), L.values(t, xb), L.values(t, xm)
    slack = 1e-10 * (1.0 + np.abs(la) + np.abs(lb))
    gap = lm - 0.5 * (la + lb)
    bad = np.flatnonzero(gap > slack)
    if len(bad):
        j = bad[int(np.argmax(gap[bad]))]
        h2 = _base("h2", box, VIOLATED, point={
            "t": float(t[j]), "x": xa[:, :, j].tolist(), "x_other": xb[:, :, j].tolist(),
            "midpoint_excess": float(gap[j])}, notes=("midpoint convexity fails in x^(m)",))
    else:
        H = S.block(m)
        eig = np.linalg.eigvalsh(H)[:, 0]
        scale = 1.0 + np.max(np.abs(H), axis=(1, 2))
        jj = int(np.argmin(eig / scale))
        if eig[jj] < -1e-10 * scale[jj]:
            h2 = _base("h2", box, VIOLATED, point=_point(S.t, S.x, jj, min_eigenvalue=eig[jj]),
                       notes=("Hessian in x^(m) is not positive semidefinite",))
        else:
            h2 = _base("h2", box, HOLDS, witness={"pairs": int(count), "min_eigenvalue": float(eig.min())})

    top2 = np.sum(S.x[m] ** 2, axis=0)
    pos = top2 > 0
    ratio = np.where(pos, S.val / np.where(pos, top2, 1.0), np.inf)
    j = int(np.argmin(ratio))
    if np.any(S.val[~pos] < 0) or ratio[j] <= 0:
        jv = j if ratio[j] <= 0 else int(np.flatnonzero(~pos & (S.val < 0))[0])
        h3 = _base("h3", box, VIOLATED, point=_point(S.t, S.x, jv, L=S.val[jv]),
                   notes=("L >= a|x^(m)|^2 with a > 0 fails",))
    else:
        a = _floor_2sig(float(ratio[j]) * (1 + 1e-12))
        while not np.all(S.val >= a * top2):
            a = _floor_2sig(a * (1 - 1e-3))
        h3 = _base("h3", box, HOLDS, witness={"a": a, "b": 0.0})
    return h2, h3


def check_conditions(L: Expr, box: JetBox, ids) -> list[RegularityVerdict]:
    """Several checks at once; h2/h3 are the existence hypotheses.

    When both coercivity (h3) and h4 are requested and h4 fails because
    dL/dx^(m) changes sign on the box, both verdicts get a note.
    """
    out = {}
    need_tonelli = any(c in ("h2", "h3") for c in ids)
    if need_tonelli:
        out["h2"], out["h3"] = check_tonelli_hypotheses(L, box)
    for cid in ids:
        if cid not in ("h2", "h3"):
            out[cid] = check_condition(L, box, cid)
    if "h3" in out and "h4" in out and out["h3"].status == HOLDS and out["h4"].status == VIOLATED:
        note = "coercivity holds while dL/dx^(m) vanishes on the box: the two hypotheses pull in opposite directions"
        for cid in ("h3", "h4"):
            v = out[cid]
            out[cid] = RegularityVerdict(v.id, v.status, v.witness, v.point, v.box, v.samples, v.notes + (note,))
    return [out[c] for c in ids]


# ---------------------------------------------------------------------------
# (S0)/(Si) envelopes along a trajectory


@dataclass(frozen=True)
class BoundTable:
    t: np.ndarray
    envelopes: dict
    norms: dict
    exponent: float
    delta: float

    def summary(self) -> dict:
        return {
            "delta": self.delta,
            "exponent": self.exponent,
            "norms": self.norms,
            "sup": {k: float(np.max(v)) for k, v in self.envelopes.items()},
        }


def sample_S_hypotheses(L: Expr, x: Trajectory, delta: float, offsets: int = 9, quad_order: int = 8) -> BoundTable:
    """Envelopes of |dL/dt| and |dL/dx_i^(k)| over single-slot perturbations.

    (S0) perturbs only the t-slot, (S_i) only the coordinate in question, by
    up to delta.  Norms are taken in L^{m'} with m' = m/(m-1) (sup for m=1).
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    m = max(L.m, 1)
    if x.m < m:
        raise ValueError(f"trajectory of order {x.m} cannot carry a problem of order {m}")
    grid = x.quadrature(quad_order)
    jets = x.jets(grid, upto=m)
    shifts = np.linspace(-delta, delta, offsets)
    n = x.n
    envelopes = {}

    env = np.zeros(len(grid))
    for d in shifts:
        _, g, _ = L.derivatives(grid.t + d, jets)
        env = np.maximum(env, np.abs(g[0]))
    envelopes["S0:t"] = env
    for k in range(m + 1):
        for i in range(n):
            env = np.zeros(len(grid))
            slot = 1 + k * n + i
            for d in shifts:
                pert = jets.copy()
                pert[k, i] += d
                _, g, _ = L.derivatives(grid.t, pert)
                env = np.maximum(env, np.abs(g[slot]))
            name = f"x{i + 1}" if k == 0 else f"d{k}x{i + 1}"
            envelopes[f"S:{name}"] = env
    exponent = math.inf if m == 1 else m / (m - 1)
    norms = {}
    for name, env in envelopes.items():
        if math.isinf(exponent):
            norms[name] = float(np.max(env))
        else:
            norms[name] = float(np.sum(grid.w * env**exponent) ** (1.0 / exponent))
    return BoundTable(grid.t, envelopes, norms, exponent, float(delta))
