"""The correlation-matrix embedding of wald space and its inverse."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import spd
from .errors import (
    DomainError,
    NotAWaldMatrix,
    PreconditionViolated,
    ToleranceAmbiguity,
    UnknownSplit,
)
from .forest import (
    Split,
    Wald,
    WaldTopology,
    _random_resolved,
    _weights_array,
    partial_order_compare,
    to_mask,
)

FOUR_POINT_TOL = 1e-10
SPLIT_TOL = 1e-9
AMBIGUITY_FLOOR = 1e-12
WEIGHT_CAP = float(np.nextafter(1.0, 0.0))


def _pairs_to_matrix(t: WaldTopology, values: np.ndarray, diag: float) -> np.ndarray:
    lay = t.layout
    m = np.full((lay.n, lay.n), 0.0)
    m[lay.iu, lay.iv] = values
    m[lay.iv, lay.iu] = values
    np.fill_diagonal(m, diag)
    return m


def _factors(t: WaldTopology, lam: np.ndarray) -> np.ndarray:
    return np.where(t.layout.incidence, 1.0 - lam, 1.0)


def phi_bar(t: WaldTopology, lam) -> np.ndarray:
    """Product formula for the matrix entries, evaluated at arbitrary real weights."""
    lam = _weights_array(t, lam)
    values = np.where(t.layout.connected, _factors(t, lam).prod(axis=1), 0.0)
    return _pairs_to_matrix(t, values, 1.0)


def phi(w: Wald) -> np.ndarray:
    return phi_bar(w.topology, w.lambdas)


def jacobian(t: WaldTopology, lam) -> np.ndarray:
    """All first derivatives, shape ``(|E|, N, N)``."""
    lam = _weights_array(t, lam)
    k = len(lam)
    f = _factors(t, lam)
    g = np.broadcast_to(f, (k,) + f.shape).copy()
    idx = np.arange(k)
    g[idx, :, idx] = 1.0
    vals = -g.prod(axis=2) * t.layout.incidence.T
    return np.stack([_pairs_to_matrix(t, v, 0.0) for v in vals]) if k else np.zeros((0, t.n_leaves, t.n_leaves))


def hessian(t: WaldTopology, lam) -> np.ndarray:
    """All second derivatives, shape ``(|E|, |E|, N, N)``; the diagonal blocks vanish."""
    lam = _weights_array(t, lam)
    k = len(lam)
    n = t.n_leaves
    out = np.zeros((k, k, n, n))
    inc = t.layout.incidence
    f = _factors(t, lam)
    for i, j in itertools.combinations(range(k), 2):
        g = f.copy()
        g[:, i] = 1.0
        g[:, j] = 1.0
        vals = g.prod(axis=1) * (inc[:, i] & inc[:, j])
        out[i, j] = out[j, i] = _pairs_to_matrix(t, vals, 0.0)
    return out


def _split_index(t: WaldTopology, e: Split) -> int:
    if e not in t.index:
        raise UnknownSplit(e)
    return t.index[e]


def d_phi(t: WaldTopology, lam, e: Split) -> np.ndarray:
    i = _split_index(t, e)
    lam = _weights_array(t, lam)
    f = _factors(t, lam)
    f[:, i] = 1.0
    vals = -f.prod(axis=1) * t.layout.incidence[:, i]
    return _pairs_to_matrix(t, vals, 0.0)


def d2_phi(t: WaldTopology, lam, e: Split, f: Split) -> np.ndarray:
    i, j = _split_index(t, e), _split_index(t, f)
    if i == j:
        return np.zeros((t.n_leaves, t.n_leaves))
    lam = _weights_array(t, lam)
    g = _factors(t, lam)
    g[:, i] = 1.0
    g[:, j] = 1.0
    inc = t.layout.incidence
    vals = g.prod(axis=1) * (inc[:, i] & inc[:, j])
    return _pairs_to_matrix(t, vals, 0.0)


# ------------------------------------------------------------ characterization


@dataclass(frozen=True)
class Violation:
    """The worst offending index tuple (1-based labels) of one violated condition."""

    condition: str
    witness: tuple[int, ...]
    excess: float
    count: int


@dataclass(frozen=True)
class WaldMatrixReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def conditions(self) -> tuple[str, ...]:
        return tuple(v.condition for v in self.violations)

    def __bool__(self) -> bool:
        return self.ok


def _worst(condition: str, excess: np.ndarray, mask: np.ndarray) -> Violation | None:
    count = int(mask.sum())
    if not count:
        return None
    masked = np.where(mask, excess, -np.inf)
    idx = np.unravel_index(int(np.argmax(masked)), masked.shape)
    return Violation(condition, tuple(int(i) + 1 for i in idx), float(masked[idx]), count)


def check_wald_matrix(p) -> WaldMatrixReport:
    """List every violated defining condition of an embedded wald.

    Conditions: ``SYM`` symmetry, ``R1`` unit diagonal, ``R2`` four-point
    condition on distinct quadruples (min form), ``R3`` non-negativity,
    ``R4`` triangle condition on distinct triples, ``R5`` off-diagonal
    entries below one, ``PD`` positive definiteness.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {p.shape}")
    n = p.shape[0]
    found = []
    asym = np.abs(p - p.T)
    found.append(_worst("SYM", asym, asym > 1e-12))
    p = 0.5 * (p + p.T)
    off = ~np.eye(n, dtype=bool)

    dev = np.abs(np.diag(p) - 1.0)
    v = _worst("R1", dev, dev > 1e-12)
    if v is not None:
        found.append(Violation("R1", (v.witness[0], v.witness[0]), v.excess, v.count))

    # R2 on pairwise distinct quadruples, one slice of the first index at a time
    r2_count, r2_best = 0, None
    if n >= 4:
        idx = np.arange(n)
        for u in range(n):
            pv = p[u]  # rho_{u·}
            lhs = pv[:, None, None] * p[None, :, :]  # rho_uv rho_st  -> [v,s,t]
            y = pv[None, :, None] * p[:, None, :]  # rho_us rho_vt
            z = pv[None, None, :] * p[:, :, None]  # rho_ut rho_vs
            excess = np.minimum(y, z) - lhs
            distinct = (
                (idx[:, None, None] != idx[None, :, None])
                & (idx[:, None, None] != idx[None, None, :])
                & (idx[None, :, None] != idx[None, None, :])
                & (idx[:, None, None] != u)
                & (idx[None, :, None] != u)
                & (idx[None, None, :] != u)
            )
            mask = distinct & (excess > FOUR_POINT_TOL)
            c = int(mask.sum())
            if c:
                r2_count += c
                masked = np.where(mask, excess, -np.inf)
                k = np.unravel_index(int(np.argmax(masked)), masked.shape)
                cand = (float(masked[k]), (u + 1,) + tuple(int(i) + 1 for i in k))
                if r2_best is None or cand[0] > r2_best[0]:
                    r2_best = cand
    if r2_count:
        found.append(Violation("R2", r2_best[1], r2_best[0], r2_count))

    found.append(_worst("R3", -p, off & (p < -1e-12)))

    if n >= 3:
        tri = p[:, None, :] * p[None, :, :]  # [u,v,s] = rho_us rho_sv
        excess = tri - p[:, :, None]
        idx = np.arange(n)
        distinct = (
            (idx[:, None, None] != idx[None, :, None])
            & (idx[:, None, None] != idx[None, None, :])
            & (idx[None, :, None] != idx[None, None, :])
        )
        found.append(_worst("R4", excess, distinct & (excess > FOUR_POINT_TOL)))

    found.append(_worst("R5", p - 1.0, off & (p >= 1.0 - 1e-12)))

    try:
        w = np.linalg.eigvalsh(p)
        if w[0] <= spd.PD_TOL:
            found.append(Violation("PD", (), float(-w[0]), 1))
    except np.linalg.LinAlgError:
        found.append(Violation("PD", (), float("inf"), 1))
    return WaldMatrixReport(tuple(v for v in found if v is not None))


# ----------------------------------------------------------------- recognition


def _bipartitions(k: int) -> np.ndarray:
    """Boolean membership of side ``A`` (always holding element 0), shape ``(2^(k-1)-1, k)``."""
    rows = []
    for bits in range(2 ** (k - 1) - 1):
        rows.append([True] + [bool(bits >> i & 1) for i in range(k - 1)])
    return np.array(rows, dtype=bool).reshape(-1, k)


def _block_splits_from_matrix(rho: np.ndarray, labels: tuple[int, ...], tol: float):
    k = len(labels)
    d = -np.log(rho)
    # quartet values q[u,v,s,t] = (d_ut + d_vs - d_uv - d_st) / 2
    q = 0.5 * (d[:, None, None, :] + d.T[None, :, :, None] - d[:, :, None, None] - d[None, None, :, :])
    ratio = np.sqrt(
        (rho[:, None, None, :] * rho.T[None, :, :, None]) / (rho[:, :, None, None] * rho[None, None, :, :])
    )
    sides = _bipartitions(k)
    chunk = max(1, int(2_000_000 // q.size))
    found = []
    for start in range(0, len(sides), chunk):
        a = sides[start : start + chunk]
        b = ~a
        mask = (
            a[:, :, None, None, None] & a[:, None, :, None, None]
            & b[:, None, None, :, None] & b[:, None, None, None, :]
        )
        index = np.where(mask, q[None], np.inf).reshape(len(a), -1).min(axis=1)
        best = np.where(mask, ratio[None], -np.inf).reshape(len(a), -1).max(axis=1)
        for row, ix, mx in zip(a, index, best):
            if AMBIGUITY_FLOOR < ix <= tol:
                side = [labels[i] for i in range(k) if row[i]]
                warnings.warn(
                    f"split with side {side} has support {ix:.3e} within tolerance; excluded",
                    ToleranceAmbiguity,
                    stacklevel=3,
                )
            if ix > tol:
                sa = [labels[i] for i in range(k) if row[i]]
                sb = [labels[i] for i in range(k) if not row[i]]
                # entries of order 1e-17 give a weight that rounds to one; keep the split open
                found.append((Split.of(sa, sb), min(1.0 - float(mx), WEIGHT_CAP)))
    return found


def recognize(p, tol: float = SPLIT_TOL) -> Wald:
    """Recover the wald whose embedded matrix is ``p``."""
    p = np.asarray(p, dtype=float)
    report = check_wald_matrix(p)
    if not report.ok:
        raise NotAWaldMatrix(report)
    p = 0.5 * (p + p.T)
    n = p.shape[0]
    seen = 0
    weights: dict[Split, float] = {}
    for u in range(n):
        if seen >> u & 1:
            continue
        members = tuple(int(v) + 1 for v in np.flatnonzero(p[u] > 0))
        seen |= to_mask(members)
        if len(members) < 2:
            continue
        ix = np.array(members) - 1
        for s, w in _block_splits_from_matrix(p[np.ix_(ix, ix)], members, tol):
            weights[s] = w
    result = Wald.from_weights(weights, n)
    residual = float(np.max(np.abs(phi(result) - p)))
    if residual > 1e-9:
        warnings.warn(f"recognized wald reproduces the matrix only to {residual:.2e}", RuntimeWarning, stacklevel=2)
    return result


def contract_toward_infinity(w: Wald, x: float) -> Wald:
    """The wald embedded at ``x I + (1 - x) phi(w)``."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"contraction parameter must lie in [0, 1], got {x}")
    if x == 0.0:
        return w
    if x == 1.0:
        return Wald.infinity(w.n_leaves)
    n = w.n_leaves
    return recognize(x * np.eye(n) + (1.0 - x) * phi(w))


def whitney_factor(
    e_pair: tuple[WaldTopology, Mapping[Split, float] | np.ndarray],
    boundary: tuple[WaldTopology, Mapping[Split, float] | np.ndarray],
    e_prime: Split,
) -> tuple[Split, float]:
    """Pick ``e`` corresponding to ``e_prime`` with nonzero boundary weight and its scale factor.

    The derivative of the continued embedding of the upper grove along
    ``e`` at ``lambda*`` equals the returned factor times the derivative of
    the lower grove's embedding along ``e_prime``. The factor is the
    product of ``1 - lambda*`` over the other splits corresponding to
    ``e_prime``.
    """
    sub_top, sub_lam = e_pair
    top, lam_star = boundary
    sub_lam = _weights_array(sub_top, sub_lam)
    lam_star = _weights_array(top, lam_star)
    if e_prime not in sub_top.splits:
        raise UnknownSplit(e_prime)
    witness = partial_order_compare(sub_top, top)
    if witness is None or sub_top == top:
        raise PreconditionViolated("the first topology must lie strictly below the second")
    gap = float(np.max(np.abs(phi_bar(sub_top, sub_lam) - phi_bar(top, lam_star))))
    if gap > 1e-9:
        raise PreconditionViolated(f"embedded points differ by {gap:.3e}")
    group = sorted(witness.corresponding[e_prime])
    nonzero = [s for s in group if lam_star[top.position(s)] != 0.0]
    if not nonzero:
        raise PreconditionViolated(f"every split corresponding to {e_prime} has zero weight")
    e = nonzero[0]
    c = float(np.prod([1.0 - lam_star[top.position(s)] for s in group if s != e]))
    return e, c


def matrix_blocks(p: np.ndarray) -> tuple[frozenset[int], ...]:
    """Leaf partition read off the zero pattern of a wald matrix."""
    n = p.shape[0]
    blocks, seen = [], set()
    for u in range(n):
        if u in seen:
            continue
        members = frozenset(int(v) + 1 for v in np.flatnonzero(p[u] > 0))
        seen |= {v - 1 for v in members}
        blocks.append(members)
    return tuple(sorted(blocks, key=min))


def violating_matrix(rng: np.random.Generator, condition: str, n_leaves: int) -> np.ndarray:
    """Embedded random resolved tree, perturbed so that ``condition`` (``R2``, ``R3`` or ``R4``) fails.

    ``R2`` needs at least four leaves, ``R4`` at least three.
    """
    need = {"R2": 4, "R3": 2, "R4": 3}
    if condition not in need:
        raise ValueError(f"unsupported condition {condition!r}")
    if n_leaves < need[condition]:
        raise ValueError(f"{condition} needs at least {need[condition]} leaves")
    t = _random_resolved(rng, n_leaves)
    p = phi_bar(t, rng.uniform(0.05, 0.95, size=len(t.ordered)))
    labels = rng.permutation(n_leaves)
    if condition == "R3":
        u, v = labels[:2]
        p[u, v] = p[v, u] = -rng.uniform(0.01, 0.5)
    elif condition == "R4":
        u, v, s = labels[:3]
        p[u, v] = p[v, u] = p[u, s] * p[s, v] * rng.uniform(0.2, 0.9)
    else:
        u, v, s, w = labels[:4]
        # pair so that u v | s w is the largest product, then push it below the others
        pairs = [(u, v, s, w), (u, s, v, w), (u, w, v, s)]
        a, b, c, d = max(pairs, key=lambda q: p[q[0], q[1]] * p[q[2], q[3]])
        others = min(p[a, c] * p[b, d], p[a, d] * p[b, c])
        p[a, b] = p[b, a] = others / p[c, d] * rng.uniform(0.2, 0.9)
    return p


__all__ = [
    "Violation",
    "WaldMatrixReport",
    "check_wald_matrix",
    "contract_toward_infinity",
    "d2_phi",
    "d_phi",
    "hessian",
    "jacobian",
    "matrix_blocks",
    "phi",
    "phi_bar",
    "recognize",
    "violating_matrix",
    "whitney_factor",
]
