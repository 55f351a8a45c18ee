"""Bundled fixture problems and their reference trajectories."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from ..trajectory import Mesh, Trajectory, from_function, mesh_from_spec, polynomial_trajectory

NAMES = ("dirichlet", "beam", "mania", "example_cv90", "superlinear_h4")
CV90_K = (3.0 / 5.0) ** (5.0 / 3.0)


def text(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(NAMES)}")
    return resources.files(__package__).joinpath(f"{name}.json").read_text()


def load(name: str) -> dict:
    return json.loads(text(name))


def describe() -> list[tuple[str, str]]:
    return [(name, load(name)["description"]) for name in NAMES]


def cv90_derivs(t, k: float = CV90_K) -> np.ndarray:
    """x, x', x'' of k t^(5/3)."""
    t = np.asarray(t, dtype=float)
    return np.array([k * t ** (5 / 3), 5 * k / 3 * t ** (2 / 3), 10 * k / 9 * t ** (-1 / 3)])


# references: name -> (order, builder on a mesh)
def reference(name: str, mesh: Mesh) -> Trajectory:
    """Known trajectory for a fixture (or a named variant) on the given mesh.

    ``dirichlet`` is the line, ``dirichlet_parabola`` the non-extremal t^2
    with the same boundary data, ``beam`` the cubic 3t^2 - 2t^3, ``mania``
    the interpolant of t^(1/3) and ``example_cv90`` that of k t^(5/3).
    """
    if name == "dirichlet":
        return polynomial_trajectory(mesh, 1, [0.0, 1.0])
    if name == "dirichlet_parabola":
        return polynomial_trajectory(mesh, 1, [0.0, 0.0, 1.0])
    if name in ("beam", "superlinear_h4"):
        return polynomial_trajectory(mesh, 2, [0.0, 0.0, 3.0, -2.0])
    if name == "mania":
        return from_function(mesh, 1, lambda t: np.cbrt(np.asarray(t))[None, :])
    if name == "example_cv90":
        return from_function(mesh, 2, lambda t: cv90_derivs(t)[:2])
    raise KeyError(f"no reference trajectory for {name!r}")


REFERENCES = ("dirichlet", "dirichlet_parabola", "beam", "mania", "example_cv90")
_REFERENCE_FIXTURE = {"dirichlet_parabola": "dirichlet"}


def reference_fixture(ref: str) -> str:
    return _REFERENCE_FIXTURE.get(ref, ref)


def export(directory, with_references: bool = True) -> list[Path]:
    """Write fixture problem files (and reference trajectories) to a directory."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in NAMES:
        path = out / f"{name}.json"
        path.write_text(text(name))
        written.append(path)
    (out / "README.md").write_text(resources.files(__package__).joinpath("README.md").read_text())
    written.append(out / "README.md")
    if with_references:
        for ref in REFERENCES:
            problem = load(reference_fixture(ref))
            mesh = mesh_from_spec(problem["mesh"], tuple(problem["interval"]))
            path = out / f"{ref}.trajectory.json"
            path.write_text(reference(ref, mesh).to_json() + "\n")
            written.append(path)
    return written
