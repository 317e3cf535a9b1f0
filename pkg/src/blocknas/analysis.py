"""Pareto-front post-processing: hypervolume, knee-and-boundary, HV series.

Everything here is pure: fronts come in as objective vectors (minimization in
both components) and results are exact.  The per-generation hypervolume series
normalizes against run-wide ideal/nadir bounds fixed once, so the series is
reproducible offline from the exported fronts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .moea import ObjectiveVector


@dataclass(frozen=True)
class FrontSnapshot:
    """One generation's mutually non-dominated archive members."""

    generation: int
    members: tuple[tuple[int, ObjectiveVector], ...]

    def objectives(self) -> list[ObjectiveVector]:
        return [obj for _, obj in self.members]


def hypervolume_2d(front: Sequence[ObjectiveVector], reference: ObjectiveVector) -> float:
    """Exact sweep-line area dominated by `front` and bounded by `reference`.

    Points not strictly better than the reference in both components are
    clipped out; an empty front yields 0.
    """
    pts = [(f1, f2) for f1, f2 in front if f1 < reference[0] and f2 < reference[1]]
    if not pts:
        return 0.0
    pts.sort()
    area = 0.0
    prev_f2 = float(reference[1])
    for f1, f2 in pts:
        if f2 < prev_f2:
            area += (reference[0] - f1) * (prev_f2 - f2)
            prev_f2 = f2
    return area


class KneeSelection(NamedTuple):
    """Indices into the front for each selection role."""

    boundary_light: int
    boundary_heavy: int
    knee: int


def knee_and_boundary(
    objectives: Sequence[ObjectiveVector], ids: Sequence[int] | None = None
) -> KneeSelection:
    """Boundary solutions (per-objective minima) plus the front member closest,
    after per-front min-max normalization, to the intersection of the two
    boundaries.  Knee ties break by lower f1, then lower id.
    """
    n = len(objectives)
    if n == 0:
        raise ValueError("front must be nonempty")
    if ids is None:
        ids = list(range(n))
    f = np.asarray(objectives, dtype=np.float64)
    span = f.max(axis=0) - f.min(axis=0)
    norm = np.where(span > 0, (f - f.min(axis=0)) / np.where(span > 0, span, 1.0), 0.0)

    heavy = min(range(n), key=lambda i: (f[i, 0], f[i, 1], ids[i]))
    light = min(range(n), key=lambda i: (f[i, 1], f[i, 0], ids[i]))
    intersection = np.array([norm[heavy, 0], norm[light, 1]])
    dist = np.hypot(norm[:, 0] - intersection[0], norm[:, 1] - intersection[1])
    knee = min(range(n), key=lambda i: (dist[i], f[i, 0], ids[i]))
    return KneeSelection(boundary_light=light, boundary_heavy=heavy, knee=knee)


def objective_bounds(objectives: Sequence[ObjectiveVector]) -> tuple[ObjectiveVector, ObjectiveVector]:
    """(ideal, nadir): componentwise best and worst over everything evaluated."""
    f = np.asarray(objectives, dtype=np.float64)
    lo = f.min(axis=0)
    hi = f.max(axis=0)
    return ObjectiveVector(float(lo[0]), float(lo[1])), ObjectiveVector(float(hi[0]), float(hi[1]))


def normalize_objective(
    obj: ObjectiveVector, ideal: ObjectiveVector, nadir: ObjectiveVector
) -> ObjectiveVector:
    def scale(v: float, lo: float, hi: float) -> float:
        return (v - lo) / (hi - lo) if hi > lo else 0.0

    return ObjectiveVector(scale(obj.f1, ideal.f1, nadir.f1), scale(obj.f2, ideal.f2, nadir.f2))


def normalized_hv_series(
    snapshots: Sequence[FrontSnapshot], ideal: ObjectiveVector, nadir: ObjectiveVector
) -> list[float]:
    """Per-generation hypervolume in [0,1]: objectives scaled by the run-wide
    ideal/nadir, reference at the normalized nadir (1,1)."""
    series = []
    for snap in snapshots:
        scaled = [normalize_objective(obj, ideal, nadir) for obj in snap.objectives()]
        series.append(hypervolume_2d(scaled, ObjectiveVector(1.0, 1.0)))
    return series
