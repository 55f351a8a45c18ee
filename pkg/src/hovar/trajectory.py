"""Piecewise-polynomial candidate trajectories on (possibly graded) meshes.

A trajectory of order ``m`` is a C^(m-1) Hermite element of degree 2m-1 per
cell.  Its free parameters are the derivative values x, x', ..., x^(m-1) at
the mesh nodes; the m-th derivative is piecewise polynomial of degree m-1
and may jump at nodes, where point queries take the right limit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import quadrature


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# meshes


@dataclass(frozen=True)
class Grading:
    kind: str = "custom"  # uniform | geometric | custom
    ratio: float = 0.5
    endpoint: str = "left"
    levels: int = 0
    per_level: int = 1

    def to_dict(self) -> dict:
        if self.kind == "geometric":
            return {
                "kind": "geometric",
                "ratio": self.ratio,
                "endpoint": self.endpoint,
                "levels": self.levels,
                "per_level": self.per_level,
            }
        return {"kind": self.kind}


class Mesh:
    """Strictly increasing nodes a = t_0 < ... < t_N = b."""

    __slots__ = ("nodes", "grading")

    def __init__(self, nodes, grading: Grading | None = None):
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 2:
            raise ValueError("a mesh needs at least two nodes")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        self.nodes = nodes
        self.grading = grading or Grading()

    @classmethod
    def uniform(cls, a: float, b: float, cells: int) -> "Mesh":
        if cells < 1:
            raise ValueError("need at least one cell")
        return cls(np.linspace(a, b, cells + 1), Grading("uniform"))

    @classmethod
    def geometric(cls, a, b, levels, ratio=0.5, endpoint="left", per_level=1) -> "Mesh":
        """Cells shrinking by ``ratio`` per level toward ``endpoint``."""
        if not 0 < ratio < 1:
            raise ValueError("grading ratio must lie in (0, 1)")
        if endpoint not in ("left", "right"):
            raise ValueError("endpoint must be 'left' or 'right'")
        if levels < 0 or per_level < 1:
            raise ValueError("levels must be >= 0 and per_level >= 1")
        # distances from the singular endpoint, as fractions of (b - a)
        bounds = ratio ** np.arange(levels + 1)  # 1, q, ..., q^L
        pts = [0.0, bounds[-1]]
        for j in range(levels):
            hi, lo = bounds[j], bounds[j + 1]
            pts.extend(lo + (hi - lo) * np.arange(1, per_level + 1) / per_level)
        frac = np.unique(np.array(pts))
        if endpoint == "left":
            nodes = a + (b - a) * frac
        else:
            nodes = b - (b - a) * frac[::-1]
        nodes[0], nodes[-1] = a, b
        return cls(nodes, Grading("geometric", ratio, endpoint, levels, per_level))

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def cells(self) -> int:
        return len(self.nodes) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def locate(self, t) -> np.ndarray:
        """Cell index for each t, right-limit convention at interior nodes."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.nodes, t, side="right") - 1
        return np.clip(idx, 0, self.cells - 1)

    def to_dict(self) -> dict:
        return {"nodes": self.nodes.tolist(), "grading": self.grading.to_dict()}

    def __repr__(self) -> str:
        return f"Mesh(cells={self.cells}, a={self.a}, b={self.b}, grading={self.grading.kind})"


def refine(mesh: Mesh) -> Mesh:
    """Nested refinement: one more geometric level, or halve every cell."""
    g = mesh.grading
    if g.kind == "geometric":
        return Mesh.geometric(mesh.a, mesh.b, g.levels + 1, g.ratio, g.endpoint, g.per_level)
    mids = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
    nodes = np.sort(np.concatenate([mesh.nodes, mids]))
    return Mesh(nodes, Grading("uniform") if g.kind == "uniform" else Grading())


def mesh_from_dict(d: dict) -> Mesh:
    g = d.get("grading", {})
    if "nodes" in d:
        kind = g.get("kind", "custom")
        if kind == "geometric":
            grading = Grading("geometric", g["ratio"], g["endpoint"], g["levels"], g.get("per_level", 1))
        else:
            grading = Grading(kind)
        return Mesh(d["nodes"], grading)
    raise ValueError("mesh record needs 'nodes'")


def mesh_from_spec(spec: dict, interval) -> Mesh:
    """Mesh from a problem-file description.

    Accepted forms: {"kind": "uniform", "cells": N},
    {"kind": "geometric", "levels": L, "ratio": q, "endpoint": e, "per_level": p}
    or {"nodes": [...]}.
    """
    a, b = (float(v) for v in interval)
    if not isinstance(spec, dict):
        raise ValueError("mesh must be an object")
    if "nodes" in spec:
        mesh = mesh_from_dict(spec)
        if abs(mesh.a - a) > 1e-12 * max(1.0, abs(a)) or abs(mesh.b - b) > 1e-12 * max(1.0, abs(b)):
            raise ValueError("mesh nodes must span the problem interval")
        return mesh
    kind = spec.get("kind", "uniform")
    if kind == "uniform":
        return Mesh.uniform(a, b, int(spec.get("cells", 8)))
    if kind == "geometric":
        return Mesh.geometric(
            a, b, int(spec.get("levels", 6)), float(spec.get("ratio", 0.5)),
            spec.get("endpoint", "left"), int(spec.get("per_level", 1)),
        )
    raise ValueError(f"unknown mesh kind {kind!r}")


# ---------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class BoundaryData:
    """x^(k)(a) = left[k] and x^(k)(b) = right[k] for k = 0..m-1."""

    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        left = np.array(self.left, dtype=float)
        right = np.array(self.right, dtype=float)
        if left.ndim != 2 or left.shape != right.shape:
            raise ValueError("boundary data must be two (m, n) arrays of equal shape")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def m(self) -> int:
        return self.left.shape[0]

    @property
    def n(self) -> int:
        return self.left.shape[1]

    def to_dict(self) -> dict:
        return {"left": self.left.tolist(), "right": self.right.tolist()}


# ---------------------------------------------------------------------------
# Hermite elements


@lru_cache(maxsize=None)
def _hermite_inverse(m: int) -> np.ndarray:
    """Map from scaled endpoint data to monomial coefficients on [0, 1]."""
    deg = 2 * m
    mat = np.zeros((deg, deg))
    for j in range(m):
        mat[j, j] = math.factorial(j)
        for p in range(j, deg):
            mat[m + j, p] = math.factorial(p) / math.factorial(p - j)
    inv = np.linalg.inv(mat)
    inv.setflags(write=False)
    return inv


def hermite_basis(xi, m: int, k: int) -> np.ndarray:
    """k-th xi-derivative of the 2m local Hermite basis functions at xi.

    Basis r < m carries d^r/dxi^r at xi = 0, basis m + r the same at xi = 1.
    Returns an array of shape (len(xi), 2m).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    deg = 2 * m
    powers = np.zeros((len(xi), deg))
    for p in range(k, deg):
        powers[:, p] = math.factorial(p) / math.factorial(p - k) * xi ** (p - k)
    return powers @ _hermite_inverse(m)


def _scaled_local_data(mesh: Mesh, data: np.ndarray) -> np.ndarray:
    """(N, 2m, n) endpoint data of each cell in local xi-derivatives."""
    m = data.shape[1]
    h = mesh.widths
    scale = h[:, None] ** np.arange(m)[None, :]  # (N, m)
    left = data[:-1] * scale[:, :, None]
    right = data[1:] * scale[:, :, None]
    return np.concatenate([left, right], axis=1)


class Trajectory:
    """C^(m-1) piecewise Hermite trajectory x: [a, b] -> R^n."""

    def __init__(self, mesh: Mesh, node_data):
        data = np.array(node_data, dtype=float)
        if data.ndim != 3 or data.shape[0] != mesh.cells + 1:
            raise ValueError(
                f"node data must have shape (N+1, m, n) = ({mesh.cells + 1}, m, n), got {data.shape}"
            )
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise ValueError("node data needs m >= 1 and n >= 1")
        data.setflags(write=False)
        self.mesh = mesh
        self.node_data = data
        self._local = _scaled_local_data(mesh, data)

    @property
    def m(self) -> int:
        return self.node_data.shape[1]

    @property
    def n(self) -> int:
        return self.node_data.shape[2]

    @property
    def a(self) -> float:
        return self.mesh.a

    @property
    def b(self) -> float:
        return self.mesh.b

    # -- evaluation -------------------------------------------------------
    def _check_domain(self, t):
        t = np.asarray(t, dtype=float)
        span = self.b - self.a
        slack = 1e-14 * max(1.0, abs(self.a), abs(self.b))
        if np.any(t < self.a - slack) or np.any(t > self.b + slack) or not np.all(np.isfinite(t)):
            bad = t[(t < self.a - slack) | (t > self.b + slack) | ~np.isfinite(t)]
            raise DomainError(f"t = {bad.ravel()[0]!r} outside [{self.a}, {self.b}] (span {span})")
        return np.clip(t, self.a, self.b)

    def derivs_in_cells(self, cell, xi, upto: int) -> np.ndarray:
        """Derivatives 0..upto at local coordinates; shape (upto+1, n, J)."""
        cell = np.asarray(cell, dtype=int)
        xi = np.asarray(xi, dtype=float)
        h = self.mesh.widths[cell]
        local = self._local[cell]  # (J, 2m, n)
        out = np.empty((upto + 1, self.n, len(cell)))
        for k in range(upto + 1):
            basis = hermite_basis(xi, self.m, k)  # (J, 2m)
            out[k] = (np.einsum("jr,jri->ij", basis, local)) / h[None, :] ** k
        return out

    def eval_derivs(self, t, upto: int | None = None) -> np.ndarray:
        """x(t), x'(t), ..., x^(upto)(t).

        Scalar t gives shape (upto+1, n); array t gives (upto+1, n, len(t)).
        Derivatives above m are those of the cell polynomial (right limit).
        """
        upto = self.m if upto is None else upto
        if upto < 0:
            raise ValueError("upto must be >= 0")
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(self._check_domain(t))
        cell = self.mesh.locate(t)
        xi = (t - self.mesh.nodes[cell]) / self.mesh.widths[cell]
        out = self.derivs_in_cells(cell, xi, upto)
        return out[:, :, 0] if scalar else out

    def one_sided(self, node: int, upto: int, side: str) -> np.ndarray:
        """Limits of derivatives at an interior node from the given side."""
        cell = node - 1 if side == "left" else node
        xi = 1.0 if side == "left" else 0.0
        return self.derivs_in_cells([cell], [xi], upto)[:, :, 0]

    def quadrature(self, order: int):
        t, w, cell, local = quadrature.composite(self.mesh.nodes, order)
        xi, _ = quadrature.gauss_unit(order)
        return QuadGrid(t, w, cell, local, xi[local], order, self.mesh)

    def jets(self, grid: "QuadGrid", upto: int | None = None) -> np.ndarray:
        upto = self.m if upto is None else upto
        return self.derivs_in_cells(grid.cell, grid.xi, upto)

    # -- norms ------------------------------------------------------------
    def _sample_points(self, per_cell: int = 16):
        k = np.arange(per_cell)
        cheb = 0.5 * (1 - np.cos(np.pi * (k + 0.5) / per_cell))
        xi = np.concatenate([[0.0], cheb, [1.0]])
        cells = np.repeat(np.arange(self.mesh.cells), len(xi))
        return cells, np.tile(xi, self.mesh.cells)

    def sup_norm_deriv(self, k: int, per_cell: int = 16) -> float:
        """max |x^(k)| over Chebyshev points and both ends of every cell."""
        if not 0 <= k <= self.m:
            raise ValueError(f"derivative order {k} outside 0..{self.m}")
        cells, xi = self._sample_points(per_cell)
        vals = self.derivs_in_cells(cells, xi, k)[k]
        return float(np.max(np.linalg.norm(vals, axis=0)))

    def sobolev_seminorm(self, k: int, p: float = 2.0) -> float:
        """Integral of |x^(k)|^p over [a, b] (the p-th power of the seminorm)."""
        if not 0 <= k <= self.m:
            raise ValueError(f"derivative order {k} outside 0..{self.m}")
        if p < 1:
            raise ValueError("p must be >= 1")
        degree = 2 * self.m - 1 - k
        if float(p).is_integer() and int(p) % 2 == 0:
            order = max(1, (int(p) * degree) // 2 + 1)
        else:
            order = max(16, int(np.ceil(p * degree)) + 8)
        grid = self.quadrature(order)
        vals = self.derivs_in_cells(grid.cell, grid.xi, k)[k]
        return float(np.sum(grid.w * np.linalg.norm(vals, axis=0) ** p))

    # -- conversions -------------------------------------------------------
    def boundary_data(self) -> BoundaryData:
        return BoundaryData(self.node_data[0], self.node_data[-1])

    def resample(self, mesh: Mesh) -> "Trajectory":
        """Hermite interpolant of this trajectory on another mesh.

        Exact when the new mesh refines the current one.
        """
        upto = self.m - 1
        vals = self.eval_derivs(mesh.nodes, upto)  # (m, n, N+1)
        # node data must come from the cell on the correct side at shared nodes;
        # derivatives below m are continuous so either side agrees
        return Trajectory(mesh, np.transpose(vals, (2, 0, 1)))

    def to_record(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "mesh": self.mesh.to_dict(),
            "node_data": self.node_data.tolist(),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Trajectory":
        try:
            mesh = mesh_from_dict(rec["mesh"])
            data = np.array(rec["node_data"], dtype=float)
        except KeyError as exc:
            raise ValueError(f"trajectory record is missing field {exc.args[0]!r}") from None
        traj = cls(mesh, data)
        if "m" in rec and rec["m"] != traj.m or "n" in rec and rec["n"] != traj.n:
            raise ValueError("trajectory record m/n disagree with node_data shape")
        return traj

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        return cls.from_record(json.loads(text))

    def to_csv(self, per_cell: int = 8) -> str:
        """Sampled rows t, x_i, d1x_i, ..., dmx_i (right limits at nodes)."""
        xi = np.linspace(0.0, 1.0, per_cell + 1)[:-1]
        cells = np.repeat(np.arange(self.mesh.cells), len(xi))
        xi_all = np.tile(xi, self.mesh.cells)
        t = self.mesh.nodes[cells] + self.mesh.widths[cells] * xi_all
        vals = self.derivs_in_cells(cells, xi_all, self.m)
        last = self.derivs_in_cells([self.mesh.cells - 1], [1.0], self.m)
        t = np.append(t, self.b)
        vals = np.concatenate([vals, last], axis=2)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["t"] + [
            (f"x{i + 1}" if k == 0 else f"d{k}x{i + 1}") for k in range(self.m + 1) for i in range(self.n)
        ]
        writer.writerow(header)
        for j in range(len(t)):
            writer.writerow([repr(float(t[j]))] + [repr(float(v)) for v in vals[:, :, j].ravel()])
        return buf.getvalue()


@dataclass(frozen=True)
class QuadGrid:
    """Composite Gauss points of a trajectory's mesh, cell-major."""

    t: np.ndarray
    w: np.ndarray
    cell: np.ndarray
    local: np.ndarray
    xi: np.ndarray
    order: int
    mesh: Mesh

    def __len__(self) -> int:
        return len(self.t)


def hermite_interpolant(mesh: Mesh, node_data) -> Trajectory:
    return Trajectory(mesh, node_data)


def from_function(mesh: Mesh, m: int, derivs: Callable[[np.ndarray], np.ndarray]) -> Trajectory:
    """Hermite interpolant of a function given its derivatives.

    ``derivs(t)`` must return an array of shape (m, n, len(t)) holding
    x, x', ..., x^(m-1) at the nodes.
    """
    vals = np.asarray(derivs(mesh.nodes), dtype=float)
    if vals.ndim == 2:
        vals = vals[:, None, :]
    if vals.shape[0] < m:
        raise ValueError(f"need {m} derivative levels, got {vals.shape[0]}")
    return Trajectory(mesh, np.transpose(vals[:m], (2, 0, 1)))


def polynomial_trajectory(mesh: Mesh, m: int, coeffs) -> Trajectory:
    """Interpolant of the polynomial sum_p coeffs[p] t^p (rows per component)."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))

    def derivs(t):
        out = np.empty((m, coeffs.shape[0], len(t)))
        for i, c in enumerate(coeffs):
            poly = np.polynomial.Polynomial(c)
            for k in range(m):
                out[k, i] = poly.deriv(k)(t) if k else poly(t)
        return out

    return from_function(mesh, m, derivs)


def boundary_blend(mesh: Mesh, boundary: BoundaryData) -> Trajectory:
    """Degree 2m-1 polynomial matching the boundary data, on the given mesh."""
    m, n = boundary.m, boundary.n
    h = mesh.b - mesh.a
    scale = h ** np.arange(m)
    local = np.concatenate([boundary.left * scale[:, None], boundary.right * scale[:, None]])

    def derivs(t):
        xi = (np.asarray(t) - mesh.a) / h
        out = np.empty((m, n, len(xi)))
        for k in range(m):
            basis = hermite_basis(xi, m, k)
            out[k] = (basis @ local).T / h**k
        return out

    return from_function(mesh, m, derivs)
