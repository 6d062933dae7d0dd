"""Discrete geodesics in wald space.

Points of a path are kept as coordinates in the closed cube of a *chart*
topology. A chart is a grove whose closure contains both endpoints when
such a grove exists; descending onto a face of the cube (a zero weight)
moves the point into a lower-dimensional grove, while a zero coordinate
may become positive again later, which lets a path leave a boundary it
touched earlier.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import spd
from .embedding import phi
from .errors import EnergyIncrease, NoConvergence, TopologyMismatch, WaldError
from .forest import (
    Wald,
    WaldTopology,
    lift_to_boundary,
    resolved_topologies,
    topology_leq,
    validate_topology,
)

CAP = 1.0 - 1e-9
SNAP = 1e-8
ARMIJO = 1e-4
# Resolved trees are enumerated to find common upper charts only up to this size.
CHART_SEARCH_LIMIT = 6
MAX_CHARTS = 16


@dataclass(frozen=True)
class GeodesicParams:
    n0: int = 5
    i_ext: int = 4
    j_straight: int = 10
    tol: float = 1e-8
    max_iter: int = 500
    symmetric: bool = True

    def __post_init__(self):
        if self.n0 < 5 or self.n0 % 2 == 0:
            raise WaldError(f"n0 must be odd and at least 5, got {self.n0}")
        if self.i_ext < 0 or self.j_straight < 0:
            raise WaldError("round counts must be non-negative")

    @property
    def n_points(self) -> int:
        return 2**self.i_ext * (self.n0 - 1) + 1


# ----------------------------------------------------------------- charts


class _Chart:
    """Evaluation of the embedding on the closed cube of one topology."""

    def __init__(self, topology: WaldTopology):
        lay = topology.layout
        self.topology = topology
        self.n = lay.n
        self.m = len(topology.ordered)
        self.inc = lay.incidence
        self.conn = lay.connected.astype(float)
        self.upper = lay.iu * lay.n + lay.iv
        self.lower = lay.iv * lay.n + lay.iu
        self.diag = np.arange(lay.n) * (lay.n + 1)
        self._eye = np.eye(self.m, dtype=bool)

    def _fill(self, vals: np.ndarray, diag: float) -> np.ndarray:
        out = np.zeros(vals.shape[:-1] + (self.n * self.n,))
        out[..., self.upper] = vals
        out[..., self.lower] = vals
        out[..., self.diag] = diag
        return out.reshape(vals.shape[:-1] + (self.n, self.n))

    def matrix(self, lam: np.ndarray) -> np.ndarray:
        f = np.where(self.inc, 1.0 - lam, 1.0)
        return self._fill(self.conn * f.prod(axis=1), 1.0)

    def jacobian(self, lam: np.ndarray) -> np.ndarray:
        f = np.where(self.inc, 1.0 - lam, 1.0)
        g = np.where(self._eye[:, None, :], 1.0, f[None, :, :])
        vals = -g.prod(axis=2) * self.inc.T
        return self._fill(vals, 0.0)

    @lru_cache(maxsize=256)
    def _face(self, zeros: tuple[bool, ...]) -> tuple[WaldTopology, tuple[int, ...]]:
        keep = tuple(i for i, z in enumerate(zeros) if not z)
        top = validate_topology([self.topology.ordered[i] for i in keep], self.n)
        return top, keep

    def wald(self, lam: np.ndarray) -> Wald:
        zeros = lam <= 0.0
        if not zeros.any():
            return Wald(self.topology, dict(zip(self.topology.ordered, lam.tolist())))
        top, keep = self._face(tuple(bool(z) for z in zeros))
        return Wald(top, {self.topology.ordered[i]: float(lam[i]) for i in keep})


@lru_cache(maxsize=512)
def _chart(topology: WaldTopology) -> _Chart:
    return _Chart(topology)


@lru_cache(maxsize=1024)
def chart_topologies(t1: WaldTopology, t2: WaldTopology) -> tuple[WaldTopology, ...]:
    """Groves whose closures are searched when joining points of ``t1`` and ``t2``.

    Fully resolved groves above both topologies are preferred. Without a
    common one, the resolved groves above either endpoint are used, and for
    large N the endpoint groves themselves.
    """
    n = t1.n_leaves
    if n <= CHART_SEARCH_LIMIT:
        trees = resolved_topologies(n)
        above1 = [t for t in trees if topology_leq(t1, t)]
        above2 = [t for t in trees if topology_leq(t2, t)]
        common = [t for t in above1 if t in set(above2)]
        if 0 < len(common) <= MAX_CHARTS:
            return tuple(common)
        if not common:
            union = list(dict.fromkeys(above1 + above2))
            if len(union) <= MAX_CHARTS:
                return tuple(union)
    if topology_leq(t1, t2):
        return (t2,)
    if topology_leq(t2, t1):
        return (t1,)
    return (t1, t2)


# ------------------------------------------------------------- projection


@dataclass
class _State:
    lam: np.ndarray
    p: np.ndarray  # embedded matrix at lam
    root: np.ndarray  # its square root
    root_inv: np.ndarray
    log_a: np.ndarray  # log of whitened target
    f: float  # half squared distance to the target


def _state(chart: _Chart, lam: np.ndarray, target: np.ndarray) -> _State | None:
    p = chart.matrix(lam)
    s, u = np.linalg.eigh(p)
    if s[0] <= 1e-13:
        return None
    r = np.sqrt(s)
    root = (u * r) @ u.T
    root_inv = (u / r) @ u.T
    a = root_inv @ target @ root_inv
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    if w[0] <= 0.0:
        return None
    lw = np.log(w)
    return _State(lam, p, root, root_inv, (v * lw) @ v.T, 0.5 * float(lw @ lw))


def _snap_to_faces(chart: _Chart, st: _State, target: np.ndarray, tol: float) -> _State:
    """Set near-zero coordinates to zero when that costs no more than the stopping tolerance."""
    near = (st.lam > 0.0) & (st.lam < SNAP)
    if not near.any():
        return st
    lam = np.where(near, 0.0, st.lam)
    new = _state(chart, lam, target)
    if new is None or new.f > st.f + tol * float(np.sum(st.lam[near])) + 1e-15:
        return st
    return new


@dataclass
class _Descent:
    chart: _Chart
    state: _State
    iterations: int
    converged: bool
    grad_norm: float


def _descend(chart: _Chart, target: np.ndarray, lam0: np.ndarray, tol: float, max_iter: int) -> _Descent:
    lam = np.clip(np.asarray(lam0, dtype=float), 0.0, CAP)
    st = _state(chart, lam, target)
    if st is None:
        lam = np.clip(lam, 1e-3, CAP)
        st = _state(chart, lam, target)
    if st is None:
        lam = np.full(chart.m, 0.5)
        st = _state(chart, lam, target)
    if chart.m == 0:
        return _Descent(chart, st, 0, True, 0.0)
    gnorm = np.inf
    for it in range(max_iter):
        dt = st.root_inv @ chart.jacobian(st.lam) @ st.root_inv
        flat = dt.reshape(chart.m, -1)
        b = flat @ st.log_a.reshape(-1)  # minus the Euclidean gradient
        g = flat @ flat.T
        blocked = ((st.lam <= 0.0) & (b < 0.0)) | ((st.lam >= CAP) & (b > 0.0))
        free = ~blocked
        if not free.any():
            return _Descent(chart, st, it, True, 0.0)
        bf = b[free]
        try:
            step_f = np.linalg.solve(g[np.ix_(free, free)], bf)
        except np.linalg.LinAlgError:
            step_f = np.linalg.lstsq(g[np.ix_(free, free)], bf, rcond=None)[0]
        gnorm = float(np.sqrt(max(bf @ step_f, 0.0)))
        if gnorm <= tol:
            return _Descent(chart, _snap_to_faces(chart, st, target, tol), it, True, gnorm)
        step = np.zeros(chart.m)
        step[free] = step_f
        t = 1.0
        while True:
            lam_new = np.clip(st.lam + t * step, 0.0, CAP)
            new = _state(chart, lam_new, target)
            if new is not None:
                decrease = float(b @ (lam_new - st.lam))
                if new.f <= st.f - ARMIJO * decrease + 1e-15 * st.f:
                    break
            t *= 0.5
            if t < 1e-12:
                # no further progress is representable; accept if the gradient is already tiny
                return _Descent(chart, st, it, gnorm <= 1e3 * tol, gnorm)
        st = new
    return _Descent(chart, st, max_iter, False, gnorm)


@dataclass
class _Node:
    p: np.ndarray
    root: np.ndarray
    root_inv: np.ndarray
    coords: dict  # _Chart -> coordinates in its closed cube
    wald: Wald
    converged: bool = True


def _node_from_wald(w: Wald, charts: Sequence[_Chart]) -> _Node:
    p = phi(w)
    s, u = np.linalg.eigh(p)
    r = np.sqrt(s)
    coords = {}
    for c in charts:
        lam = lift_to_boundary(w, c.topology, cut_value=CAP)
        if lam is not None:
            coords[c] = np.clip(lam, 0.0, CAP)
    return _Node(p, (u * r) @ u.T, (u / r) @ u.T, coords, w)


def _project(target: np.ndarray, refs: Sequence[tuple[_Node, float]], tol: float, max_iter: int) -> _Node:
    """Project ``target`` starting from weighted reference nodes; the best chart wins."""
    starts: dict[_Chart, list] = {}
    for node, weight in refs:
        for c, lam in node.coords.items():
            starts.setdefault(c, []).append((weight, lam))
    best = None
    for c, items in starts.items():
        total = sum(w for w, _ in items)
        lam0 = sum(w * lam for w, lam in items) / total if total > 0 else items[0][1]
        res = _descend(c, target, lam0, tol, max_iter)
        if best is None or res.state.f < best.state.f:
            best = res
    st = best.state
    return _Node(st.p, st.root, st.root_inv, {best.chart: st.lam}, best.chart.wald(st.lam), best.converged)


def project_to_wald(p, hint: Wald, tol: float = 1e-8, max_iter: int = 500) -> Wald:
    """Closest wald to ``p`` found by descent from ``hint`` within the closure of its grove."""
    p = spd.spd(p)
    chart = _chart(hint.topology)
    res = _descend(chart, p, hint.lambdas, tol, max_iter)
    if not res.converged:
        warnings.warn(
            f"projection stopped after {res.iterations} iterations with gradient norm {res.grad_norm:.3e}",
            NoConvergence,
            stacklevel=2,
        )
    return chart.wald(res.state.lam)


# ------------------------------------------------------------------ paths


@dataclass(frozen=True)
class DiscretePath:
    points: tuple[Wald, ...]
    matrices: tuple[np.ndarray, ...]
    flagged: tuple[int, ...] = ()
    energy_history: tuple[float, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def energy(self) -> float:
        return _energy(self.matrices)

    @property
    def length(self) -> float:
        return spd.path_length(list(self.matrices))


def _energy(matrices: Sequence[np.ndarray]) -> float:
    return 0.5 * sum(spd.dist(a, b) ** 2 for a, b in zip(matrices[:-1], matrices[1:]))


def path_energy(path: DiscretePath) -> float:
    if len(path.points) < 2:
        raise WaldError("a path needs at least two points")
    return path.energy


def _midpoint(a: _Node, b: _Node, t: float) -> np.ndarray:
    w, v = np.linalg.eigh(a.root_inv @ b.p @ a.root_inv)
    inner = (v * np.exp(t * np.log(w))) @ v.T
    out = a.root @ inner @ a.root
    return 0.5 * (out + out.T)


def _straighten_target(prev: _Node, node: _Node, nxt: _Node) -> np.ndarray:
    logs = []
    for other in (prev, nxt):
        a = node.root_inv @ other.p @ node.root_inv
        w, v = np.linalg.eigh(0.5 * (a + a.T))
        logs.append((v * np.log(w)) @ v.T)
    w, v = np.linalg.eigh(0.5 * (logs[0] + logs[1]))
    out = node.root @ ((v * np.exp(w)) @ v.T) @ node.root
    return 0.5 * (out + out.T)


def _node_energy(nodes: Sequence[_Node]) -> float:
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        w = np.linalg.eigvalsh(a.root_inv @ b.p @ a.root_inv)
        total += float(np.sum(np.log(w) ** 2))
    return 0.5 * total


def geodesic_path(
    f1: Wald,
    f2: Wald,
    n0: int = 5,
    i_ext: int = 4,
    j_straight: int = 10,
    *,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> DiscretePath:
    """Approximate geodesic by successive projection, midpoint extension and straightening."""
    params = GeodesicParams(n0, i_ext, j_straight, tol, max_iter)
    if f1.n_leaves != f2.n_leaves:
        raise WaldError("endpoints have different numbers of leaves")
    if f1 == f2:
        p = phi(f1)
        k = params.n_points
        return DiscretePath((f1,) * k, (p,) * k)

    charts = [_chart(t) for t in chart_topologies(f1.topology, f2.topology)]
    first, last = _node_from_wald(f1, charts), _node_from_wald(f2, charts)
    if not first.coords or not last.coords:
        for node in (first, last):
            if not node.coords:
                node.coords[_chart(node.wald.topology)] = np.clip(node.wald.lambdas, 0.0, CAP)

    def project(target, refs):
        return _project(target, refs, tol, max_iter)

    nodes: list = [None] * n0
    nodes[0], nodes[-1] = first, last
    lo, hi = 0, n0 - 1
    while hi - lo > 2:
        k = hi - lo
        a, b = nodes[lo], nodes[hi]
        nodes[lo + 1] = project(_midpoint(a, b, 1.0 / k), [(a, 1 - 1.0 / k), (b, 1.0 / k)])
        nodes[hi - 1] = project(_midpoint(b, a, 1.0 / k), [(b, 1 - 1.0 / k), (a, 1.0 / k)])
        lo, hi = lo + 1, hi - 1
    nodes[lo + 1] = project(_midpoint(nodes[lo], nodes[hi], 0.5), [(nodes[lo], 0.5), (nodes[hi], 0.5)])

    history = [_node_energy(nodes)]
    increases = 0
    for _ in range(i_ext):
        grown = [nodes[0]]
        for a, b in zip(nodes[:-1], nodes[1:]):
            grown.append(project(_midpoint(a, b, 0.5), [(a, 0.5), (b, 0.5)]))
            grown.append(b)
        nodes = grown
        history.append(_node_energy(nodes))
        for _ in range(j_straight):
            for i in range(1, len(nodes) - 1):
                prev, node, nxt = nodes[i - 1], nodes[i], nodes[i + 1]
                refs = [(node, 1.0)] + [(x, 1.0) for x in (prev, nxt) if set(x.coords) - set(node.coords)]
                nodes[i] = project(_straighten_target(prev, node, nxt), refs)
            energy = _node_energy(nodes)
            if energy > history[-1] + 1e-9:
                increases += 1
            history.append(energy)

    if increases:
        warnings.warn(f"path energy increased in {increases} straightening rounds", EnergyIncrease, stacklevel=2)
    flagged = tuple(i for i, node in enumerate(nodes) if not node.converged)
    if flagged:
        warnings.warn(f"{len(flagged)} path points did not converge under projection", NoConvergence, stacklevel=2)
    return DiscretePath(
        tuple(node.wald for node in nodes),
        tuple(node.p for node in nodes),
        flagged,
        tuple(history),
    )


def wald_distance(f1: Wald, f2: Wald, params: GeodesicParams | None = None) -> float:
    """Length of the approximate geodesic; averaged over both directions when ``params.symmetric``."""
    params = params or GeodesicParams()
    args = (params.n0, params.i_ext, params.j_straight)
    kw = {"tol": params.tol, "max_iter": params.max_iter}
    forward = geodesic_path(f1, f2, *args, **kw).length
    if not params.symmetric:
        return forward
    backward = geodesic_path(f2, f1, *args, **kw).length
    return 0.5 * (forward + backward)


def bhv_comparison_path(f1: Wald, f2: Wald, k: int) -> DiscretePath:
    """``k + 1`` points interpolating branch lengths linearly inside one grove."""
    if f1.topology != f2.topology:
        raise TopologyMismatch("comparison paths need endpoints in one grove")
    if k < 1:
        raise WaldError("need at least one step")
    l1 = -np.log1p(-f1.lambdas)
    l2 = -np.log1p(-f2.lambdas)
    points = []
    for i in range(k + 1):
        if i == 0:
            points.append(f1)
        elif i == k:
            points.append(f2)
        else:
            s = i / k
            points.append(Wald.from_array(f1.topology, -np.expm1(-((1 - s) * l1 + s * l2))))
    return DiscretePath(tuple(points), tuple(phi(w) for w in points))
