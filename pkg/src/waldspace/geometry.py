"""Pullback Riemannian geometry of a single grove.

A grove with topology ``E`` is parametrized by the open cube ``(0, 1)^E``
and inherits the affine-invariant metric through the embedding.
Indices of all tensors follow the deterministic split order of the
topology.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .embedding import hessian, jacobian, phi_bar
from .errors import DegeneratePlane, DomainError, PreconditionViolated, SingularMetric
from .forest import Wald, WaldTopology

FD_STEP = 1e-5


@dataclass(frozen=True)
class GroveChart:
    topology: WaldTopology
    lam: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float).reshape(-1)
        if lam.shape != (len(self.topology.ordered),):
            raise DomainError(f"expected {len(self.topology.ordered)} coordinates, got {lam.shape[0]}")
        if np.any((lam <= 0) | (lam >= 1)):
            raise DomainError("chart coordinates must lie strictly inside (0, 1)")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def of(cls, w: Wald) -> "GroveChart":
        return cls(w.topology, w.lambdas)

    @property
    def dim(self) -> int:
        return len(self.lam)

    def moved(self, k: int, h: float) -> "GroveChart":
        lam = self.lam.copy()
        lam[k] += h
        return GroveChart(self.topology, lam)

    def matrix(self) -> np.ndarray:
        return phi_bar(self.topology, self.lam)

    def wald(self) -> Wald:
        return Wald.from_array(self.topology, self.lam)


@dataclass(frozen=True)
class MetricTensor:
    g: np.ndarray
    g_inv: np.ndarray


def _frames(c: GroveChart):
    p = c.matrix()
    p_inv = np.linalg.inv(p)
    d = jacobian(c.topology, c.lam)
    q = p_inv @ d
    return p, p_inv, d, q


def _invert(g: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(g)
    if w[0] <= 1e-14 * max(w[-1], 1.0):
        raise SingularMetric(f"metric eigenvalues span [{w[0]:.3e}, {w[-1]:.3e}]")
    return np.linalg.inv(g)


def metric_tensor(c: GroveChart) -> MetricTensor:
    _, _, _, q = _frames(c)
    g = np.einsum("iab,jba->ij", q, q)
    g = 0.5 * (g + g.T)
    return MetricTensor(g, _invert(g))


def metric_derivative(c: GroveChart) -> np.ndarray:
    """``dg[k, i, j]`` is the partial derivative of ``g_ij`` along coordinate ``k``."""
    p, p_inv, d, q = _frames(c)
    q2 = p_inv @ hessian(c.topology, c.lam)
    return (
        -np.einsum("kab,ibc,jca->kij", q, q, q)
        - np.einsum("iab,kbc,jca->kij", q, q, q)
        + np.einsum("ikab,jba->kij", q2, q)
        + np.einsum("iab,jkba->kij", q, q2)
    )


def _christoffel_from(dg: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    # lowered[i, j, k] = d_i g_jk + d_j g_ki - d_k g_ij
    lowered = dg + np.einsum("jki->ijk", dg) - np.einsum("kij->ijk", dg)
    gamma = 0.5 * np.einsum("ijk,km->mij", lowered, g_inv)
    return 0.5 * (gamma + np.swapaxes(gamma, 1, 2))


def christoffel(c: GroveChart) -> np.ndarray:
    """Christoffel symbols of the second kind, ``gamma[m, i, j]``."""
    return _christoffel_from(metric_derivative(c), metric_tensor(c).g_inv)


def riemann_from(
    gamma_at: Callable[[np.ndarray], np.ndarray], g: np.ndarray, lam: np.ndarray, h: float = FD_STEP
) -> np.ndarray:
    """Covariant curvature tensor ``R[i, j, k, s] = <R(d_i, d_j) d_k, d_s>``.

    ``gamma_at`` returns Christoffel symbols at a coordinate vector; their
    derivatives are taken by central differences with step ``h``. With this
    convention ``R[i, j, j, i]`` is the sectional-curvature numerator.
    """
    lam = np.asarray(lam, dtype=float)
    n = len(lam)
    gamma = gamma_at(lam)
    d_gamma = np.empty((n,) + gamma.shape)
    for k in range(n):
        step = np.zeros(n)
        step[k] = h
        d_gamma[k] = (gamma_at(lam + step) - gamma_at(lam - step)) / (2 * h)
    # upper[l, i, j, k] = d_i G^l_jk - d_j G^l_ik + G^m_jk G^l_im - G^m_ik G^l_jm
    upper = (
        np.einsum("iljk->lijk", d_gamma)
        - np.einsum("jlik->lijk", d_gamma)
        + np.einsum("mjk,lim->lijk", gamma, gamma)
        - np.einsum("mik,ljm->lijk", gamma, gamma)
    )
    return np.einsum("lijk,ls->ijks", upper, g)


def curvature_tensor(c: GroveChart, h: float = FD_STEP) -> np.ndarray:
    def gamma_at(lam):
        return christoffel(GroveChart(c.topology, lam))

    return riemann_from(gamma_at, metric_tensor(c).g, c.lam, h)


def sectional_curvature(c: GroveChart, x, y, riemann: np.ndarray | None = None) -> float:
    """Sectional curvature of the plane spanned by coordinate vectors ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = metric_tensor(c).g
    scale = (x @ g @ x) * (y @ g @ y)
    area = scale - (x @ g @ y) ** 2
    if not scale > 0.0 or area < 1e-12 * scale:
        raise DegeneratePlane(f"plane area {area:.3e} too small relative to {scale:.3e}")
    r = curvature_tensor(c) if riemann is None else riemann
    return float(np.einsum("ijks,i,j,k,s->", r, x, y, y, x) / area)


def coordinate_curvature(c: GroveChart, i: int, j: int) -> float:
    """Closed-form curvature numerator of the coordinate plane ``(i, j)``.

    This is the Gauss equation for the grove inside the SPD cone. With
    ``Q_i = P^-1 dP/dλ_i``, ``Q_ij = P^-1 d²P/dλ_i dλ_j`` and
    ``S = 2 Q_ij - Q_j Q_i - Q_i Q_j`` it reads
    ``1/4 <proj S, proj S> - <proj Q_i², proj Q_j²> - tr((S - Q_ij) Q_ij)``
    where ``proj`` takes tangential components and pairs them through the
    inverse metric.
    """
    p, p_inv, _, q = _frames(c)
    q2 = p_inv @ hessian(c.topology, c.lam)
    g_inv = metric_tensor(c).g_inv
    s = 2 * q2[i, j] - q[j] @ q[i] - q[i] @ q[j]
    ts = np.einsum("ab,hba->h", s, q)
    ti = np.einsum("ab,hba->h", q[i] @ q[i], q)
    tj = np.einsum("ab,hba->h", q[j] @ q[j], q)
    return float(0.25 * ts @ g_inv @ ts - ti @ g_inv @ tj - np.trace((s - q2[i, j]) @ q2[i, j]))


def gauss_sectional_curvature(c: GroveChart, x, y) -> float:
    """Sectional curvature of the plane spanned by ``x`` and ``y`` without finite differences.

    Ambient curvature of the SPD cone plus second fundamental form terms. It
    stays accurate close to the all-isolated forest, where differencing
    Christoffel symbols loses every digit.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p, p_inv, d, _ = _frames(c)
    h = hessian(c.topology, c.lam)
    g = metric_tensor(c).g

    def ip(a, b):
        return float(np.einsum("ij,ji->", p_inv @ a, p_inv @ b))

    def normal_part(m):
        coef = np.linalg.solve(g, np.array([ip(di, m) for di in d]))
        return m - np.einsum("h,hab->ab", coef, d)

    def second_form(u, v):
        du = np.einsum("i,iab->ab", u, d)
        dv = np.einsum("i,iab->ab", v, d)
        hess = np.einsum("i,j,ijab->ab", u, v, h)
        return normal_part(hess - 0.5 * (du @ p_inv @ dv + dv @ p_inv @ du))

    dx = np.einsum("i,iab->ab", x, d)
    dy = np.einsum("i,iab->ab", y, d)
    scale = ip(dx, dx) * ip(dy, dy)
    area = scale - ip(dx, dy) ** 2
    if not scale > 0.0 or area < 1e-12 * scale:
        raise DegeneratePlane(f"plane area {area:.3e} too small relative to {scale:.3e}")
    comm = p_inv @ dx @ p_inv @ dy - p_inv @ dy @ p_inv @ dx
    ambient = 0.25 * float(np.trace(comm @ comm))
    nxx, nyy, nxy = second_form(x, x), second_form(y, y), second_form(x, y)
    return (ambient + ip(nxx, nyy) - ip(nxy, nxy)) / area


def curvature_extremes(c: GroveChart, n_planes: int = 500, seed: int = 0) -> tuple[float, float]:
    """Smallest and largest sectional curvature over ``n_planes`` random planes."""
    rng = np.random.default_rng(seed)
    values = []
    while len(values) < n_planes:
        x, y = rng.standard_normal((2, c.dim))
        try:
            values.append(gauss_sectional_curvature(c, x, y))
        except DegeneratePlane:
            continue
    return float(min(values)), float(max(values))


def tangent_project(p: np.ndarray, x: np.ndarray, c: GroveChart) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the tangent space of the grove at ``c``."""
    p = np.asarray(p, dtype=float)
    gap = float(np.max(np.abs(p - c.matrix())))
    if gap > 1e-9:
        raise PreconditionViolated(f"base point is {gap:.3e} away from the chart's matrix")
    p_inv = np.linalg.inv(p)

    def ip(a, b):
        return float(np.einsum("ij,ji->", p_inv @ a, p_inv @ b))

    basis = []
    for d in jacobian(c.topology, c.lam):
        v = d.copy()
        for u in basis:
            v = v - ip(v, u) * u
        nv = np.sqrt(max(ip(v, v), 0.0))
        if nv < 1e-12:
            raise SingularMetric("tangent basis is numerically dependent")
        basis.append(v / nv)
    out = np.zeros_like(p)
    for u in basis:
        out += ip(x, u) * u
    return 0.5 * (out + out.T)
