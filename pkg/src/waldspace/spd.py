"""Affine-invariant geometry on symmetric positive-definite matrices.

All matrix functions go through one symmetric eigendecomposition.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import EigenFailure, NotPositiveDefinite

PD_TOL = 1e-12


def sym(x) -> np.ndarray:
    """Return the symmetric part of ``x`` as a float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    return 0.5 * (x + x.T)


def eigh(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        return np.linalg.eigh(p)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


def spd(p, tol: float = PD_TOL) -> np.ndarray:
    """Symmetrize ``p`` and verify that its smallest eigenvalue exceeds ``tol``."""
    p = sym(p)
    w = np.linalg.eigvalsh(p)
    if w[0] <= tol:
        raise NotPositiveDefinite(float(w[0]))
    return p


def is_spd(p, tol: float = PD_TOL) -> bool:
    try:
        spd(p, tol)
    except (NotPositiveDefinite, EigenFailure, ValueError):
        return False
    return True


def apply(p: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    w, v = eigh(p)
    return (v * f(w)) @ v.T


def _roots(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = eigh(p)
    if w[0] <= 0:
        raise NotPositiveDefinite(float(w[0]))
    r = np.sqrt(w)
    return (v * r) @ v.T, (v / r) @ v.T


def sqrtm(p: np.ndarray) -> np.ndarray:
    return _roots(p)[0]


def logm(p: np.ndarray) -> np.ndarray:
    w, v = eigh(p)
    if w[0] <= 0:
        raise NotPositiveDefinite(float(w[0]))
    return (v * np.log(w)) @ v.T


def expm(x: np.ndarray) -> np.ndarray:
    return apply(x, np.exp)


def inner(p, x, y) -> float:
    """``trace(P^-1 X P^-1 Y)``."""
    a = np.linalg.solve(p, x)
    b = np.linalg.solve(p, y)
    return float(np.einsum("ij,ji->", a, b))


def norm(p, x) -> float:
    return float(np.sqrt(max(inner(p, x, x), 0.0)))


def exp_map(p, x) -> np.ndarray:
    s, si = _roots(sym(p))
    return sym(s @ expm(sym(si @ x @ si)) @ s)


def log_map(p, q) -> np.ndarray:
    s, si = _roots(sym(p))
    return sym(s @ logm(sym(si @ q @ si)) @ s)


def geodesic_point(p, q, t: float) -> np.ndarray:
    s, si = _roots(sym(p))
    inner_log = logm(sym(si @ q @ si))
    return sym(s @ expm(t * inner_log) @ s)


def dist(p, q) -> float:
    """Frobenius norm of ``log(P^-1/2 Q P^-1/2)``."""
    if np.array_equal(p, q):
        spd(p)
        return 0.0
    _, si = _roots(sym(p))
    w = np.linalg.eigvalsh(sym(si @ q @ si))
    if w[0] <= 0:
        raise NotPositiveDefinite(float(w[0]))
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def path_length(points: Sequence[np.ndarray]) -> float:
    if len(points) == 0:
        raise ValueError("a path needs at least one point")
    return float(sum(dist(a, b) for a, b in zip(points[:-1], points[1:])))
