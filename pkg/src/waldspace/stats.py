"""Fréchet functions, Fréchet means and geodesic-triangle angle sums."""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import spd
from .embedding import phi
from .errors import DegenerateTriangle, WaldError
from .forest import Split, Wald, WaldTopology, validate_topology
from .geodesic import GeodesicParams, geodesic_path, wald_distance
from .geometry import GroveChart, tangent_project


@dataclass(frozen=True)
class Sample:
    walds: tuple[Wald, ...]

    def __post_init__(self):
        walds = tuple(self.walds)
        if not walds:
            raise WaldError("a sample needs at least one wald")
        if len({w.n_leaves for w in walds}) != 1:
            raise WaldError("all wälder of a sample must have the same number of leaves")
        object.__setattr__(self, "walds", walds)

    @property
    def n_leaves(self) -> int:
        return self.walds[0].n_leaves

    def __len__(self) -> int:
        return len(self.walds)


def frechet_function(candidate: Wald, sample: Sample, params: GeodesicParams | None = None) -> float:
    """Mean squared wald distance from ``candidate`` to the sample points."""
    if candidate.n_leaves != sample.n_leaves:
        raise WaldError("candidate and sample have different numbers of leaves")
    return float(np.mean([wald_distance(candidate, x, params) ** 2 for x in sample.walds]))


@dataclass(frozen=True)
class SymmetricFamily:
    """Candidates on one resolved topology: pendant splits share one weight, inner splits another.

    An inner weight of zero removes the inner splits, giving the star tree.
    """

    topology: WaldTopology

    def __post_init__(self):
        if len(self.topology.partition) != 1:
            raise WaldError("the family topology must be a single tree")

    @classmethod
    def with_inner(cls, n_leaves: int, inner: Sequence[Split]) -> "SymmetricFamily":
        pendant = [Split.of([u], [v for v in range(1, n_leaves + 1) if v != u]) for u in range(1, n_leaves + 1)]
        return cls(validate_topology(list(pendant) + list(inner), n_leaves))

    def candidate(self, pendant: float, inner: float) -> Wald:
        weights = {}
        for s in self.topology.ordered:
            if s.is_pendant:
                weights[s] = pendant
            elif inner > 0.0:
                weights[s] = inner
        return Wald.from_weights(weights, self.topology.n_leaves)


@dataclass(frozen=True)
class FrechetSearch:
    family: SymmetricFamily
    pendant_grid: tuple[float, ...]
    inner_grid: tuple[float, ...]
    params: GeodesicParams = field(default_factory=GeodesicParams)
    refine: bool = True
    max_evals: int = 60
    workers: int = 1

    @property
    def resolution(self) -> float:
        grid = sorted(set(self.inner_grid))
        if len(grid) < 2:
            return 0.0
        return float(min(b - a for a, b in zip(grid[:-1], grid[1:])))


@dataclass(frozen=True)
class FrechetResult:
    wald: Wald
    value: float
    pendant: float
    inner: float
    sticky: bool
    grid: np.ndarray  # rows of (pendant, inner, value)


def _grid_value(args):
    family, sample, params, pendant, inner = args
    return frechet_function(family.candidate(pendant, inner), sample, params)


def frechet_heatmap(sample: Sample, search: FrechetSearch) -> np.ndarray:
    points = list(itertools.product(search.pendant_grid, search.inner_grid))
    jobs = [(search.family, sample, search.params, a, b) for a, b in points]
    if search.workers > 1:
        with ProcessPoolExecutor(search.workers) as pool:
            values = list(pool.map(_grid_value, jobs))
    else:
        values = [_grid_value(j) for j in jobs]
    return np.array([(a, b, v) for (a, b), v in zip(points, values)], dtype=float)


def frechet_mean(sample: Sample, search: FrechetSearch) -> FrechetResult:
    """Best candidate of the family: grid search, then simplex refinement with clamping.

    The minimizer is reported as sticky when its inner weight does not
    exceed the resolution of the inner grid.
    """
    grid = frechet_heatmap(sample, search)
    # ties go to the lexicographically smallest coordinates
    order = np.lexsort((grid[:, 1], grid[:, 0], grid[:, 2]))
    pendant, inner, value = grid[order[0]]

    lo_p, hi_p = min(search.pendant_grid), max(search.pendant_grid)
    hi_i = max(search.inner_grid)

    def clamp(x):
        return float(np.clip(x[0], lo_p, hi_p)), float(np.clip(x[1], 0.0, hi_i))

    if search.refine:
        cache: dict[tuple[float, float], float] = {}

        def objective(x):
            key = clamp(x)
            if key not in cache:
                cache[key] = frechet_function(search.family.candidate(*key), sample, search.params)
            return cache[key]

        step_p = max(search.resolution, 0.02)
        start = np.array([pendant, inner])
        simplex = np.array([start, start + [step_p, 0.0], start + [0.0, step_p]])
        minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={"initial_simplex": simplex, "maxfev": search.max_evals, "xatol": 1e-4, "fatol": 1e-10},
        )
        for key, v in sorted(cache.items()):
            if v < value:
                (pendant, inner), value = key, v
    sticky = inner <= search.resolution
    return FrechetResult(
        search.family.candidate(pendant, inner), float(value), float(pendant), float(inner), bool(sticky), grid
    )


@dataclass(frozen=True)
class StickinessCase:
    name: str
    sample: Sample
    expect_sticky: bool
    search: FrechetSearch


def quartet_tree(inner: Sequence[int], inner_weight: float, pendant_weight: float) -> Wald:
    """Resolved 4-leaf tree whose interior split puts ``inner`` on one side."""
    leaves = range(1, 5)
    weights = {Split.of([u], [v for v in leaves if v != u]): pendant_weight for u in leaves}
    weights[Split.of(inner, [v for v in leaves if v not in inner])] = inner_weight
    return Wald.from_weights(weights, 4)


def stickiness_cases(workers: int = 1) -> dict[str, StickinessCase]:
    """The recorded 4-leaf samples used to contrast sticky and non-sticky Fréchet means."""
    doc = json.loads(resources.files("waldspace").joinpath("data/stickiness.json").read_text())
    split = doc["family_inner_split"]
    family = SymmetricFamily.with_inner(doc["n_leaves"], [Split.of(split["a"], split["b"])])
    cfg = doc["search"]
    search = FrechetSearch(
        family,
        tuple(cfg["pendant_grid"]),
        tuple(cfg["inner_grid"]),
        GeodesicParams(**cfg["geodesic"]),
        max_evals=cfg["max_evals"],
        workers=workers,
    )
    cases = {}
    for name, conf in doc["configurations"].items():
        trees = []
        for text, weight in conf["interior_weights"].items():
            left = [int(c) for c in text.split("|")[0]]
            trees.append(quartet_tree(left, weight, doc["pendant_weight"]))
        cases[name] = StickinessCase(name, Sample(tuple(trees)), bool(conf["expect_sticky"]), search)
    return cases


# ------------------------------------------------------------------ triangles


@dataclass(frozen=True)
class TriangleAngles:
    angles: tuple[float, float, float]  # degrees, at the three corners
    angles_second: tuple[float, float, float]  # same, using the second path point as direction

    @property
    def total(self) -> float:
        return float(sum(self.angles))

    @property
    def total_second(self) -> float:
        return float(sum(self.angles_second))


def _direction(corner: Wald, p: np.ndarray, toward: Wald) -> np.ndarray:
    x = spd.log_map(p, phi(toward))
    if toward.topology == corner.topology and corner.topology.splits:
        x = tangent_project(p, x, GroveChart.of(corner))
    return x


def _angle(p: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    c = spd.inner(p, x, y) / (spd.norm(p, x) * spd.norm(p, y))
    return math.degrees(math.acos(float(np.clip(c, -1.0, 1.0))))


def triangle_angles(f1: Wald, f2: Wald, f3: Wald, params: GeodesicParams | None = None) -> TriangleAngles:
    params = params or GeodesicParams()
    corners = (f1, f2, f3)
    mats = [phi(w) for w in corners]
    for i, j in itertools.combinations(range(3), 2):
        if spd.dist(mats[i], mats[j]) < 1e-9:
            raise DegenerateTriangle(f"corners {i + 1} and {j + 1} coincide")
    args = (params.n0, params.i_ext, params.j_straight)
    kw = {"tol": params.tol, "max_iter": params.max_iter}
    paths = {}
    for i, j in itertools.permutations(range(3), 2):
        if (j, i) in paths:
            paths[(i, j)] = paths[(j, i)][::-1]
        else:
            paths[(i, j)] = geodesic_path(corners[i], corners[j], *args, **kw).points
    first, second = [], []
    for k in range(3):
        others = [j for j in range(3) if j != k]
        for bucket, step in ((first, 1), (second, 2)):
            dirs = [_direction(corners[k], mats[k], paths[(k, j)][step]) for j in others]
            bucket.append(_angle(mats[k], *dirs))
    return TriangleAngles(tuple(first), tuple(second))


def triangle_angle_sum(f1: Wald, f2: Wald, f3: Wald, params: GeodesicParams | None = None) -> float:
    """Sum of the three corner angles of a geodesic triangle, in degrees."""
    return triangle_angles(f1, f2, f3, params).total


def one_split_triangle(weight: float) -> tuple[Wald, Wald, Wald]:
    """Three 3-leaf forests, each joining one pair of leaves by an edge of the given weight."""
    return tuple(Wald.from_weights({Split.of([a], [b]): weight}, 3) for a, b in ((2, 3), (1, 3), (1, 2)))
