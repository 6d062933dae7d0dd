"""Split systems, wald topologies, wälder and the partial order on topologies.

Labels are the integers ``1..N``. Sets of labels are stored as integer
bitmasks where label ``u`` occupies bit ``u - 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DomainError,
    IncompatibleSplits,
    NotInWaldSpace,
    OverlappingBlocks,
    SeparationViolated,
    UnknownSplit,
    WaldError,
)

MAX_LEAVES = 64


def to_mask(labels: Iterable[int]) -> int:
    mask = 0
    for u in labels:
        u = int(u)
        if u < 1 or u > MAX_LEAVES:
            raise WaldError(f"label {u} outside 1..{MAX_LEAVES}")
        mask |= 1 << (u - 1)
    return mask


def from_mask(mask: int) -> tuple[int, ...]:
    labels = []
    u = 1
    while mask:
        if mask & 1:
            labels.append(u)
        mask >>= 1
        u += 1
    return tuple(labels)


def _lowest(mask: int) -> int:
    return mask & -mask


def _format_labels(labels: tuple[int, ...], sep: str) -> str:
    return sep.join(str(u) for u in labels)


@dataclass(frozen=True)
class Split:
    """A bipartition ``A|B`` of a leaf block, oriented so that ``A`` holds the smallest label."""

    a: int
    b: int

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise WaldError("both sides of a split must be nonempty")
        if self.a & self.b:
            raise WaldError("the sides of a split must be disjoint")
        if not _lowest(self.a | self.b) & self.a:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @classmethod
    def of(cls, side_a: Iterable[int], side_b: Iterable[int]) -> "Split":
        return cls(to_mask(side_a), to_mask(side_b))

    @classmethod
    def parse(cls, text: str) -> "Split":
        """Parse ``"12|34"`` (single-digit labels) or ``"1,2|3,4"``."""
        try:
            left, right = text.split("|")
        except ValueError:
            raise WaldError(f"cannot parse split {text!r}") from None

        def side(s: str) -> list[int]:
            s = s.strip()
            if "," in s or " " in s:
                return [int(t) for t in s.replace(",", " ").split()]
            return [int(ch) for ch in s]

        try:
            return cls.of(side(left), side(right))
        except ValueError:
            raise WaldError(f"cannot parse split {text!r}") from None

    @property
    def block_a(self) -> frozenset[int]:
        return frozenset(from_mask(self.a))

    @property
    def block_b(self) -> frozenset[int]:
        return frozenset(from_mask(self.b))

    @property
    def support(self) -> int:
        return self.a | self.b

    @property
    def is_pendant(self) -> bool:
        return self.a & (self.a - 1) == 0 or self.b & (self.b - 1) == 0

    def separates(self, u: int, v: int) -> bool:
        bu, bv = 1 << (u - 1), 1 << (v - 1)
        return bool((self.a & bu and self.b & bv) or (self.b & bu and self.a & bv))

    def sort_key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return from_mask(self.a), from_mask(self.b)

    def __lt__(self, other: "Split") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        la, lb = from_mask(self.a), from_mask(self.b)
        sep = "" if max(la + lb) < 10 else ","
        return f"{_format_labels(la, sep)}|{_format_labels(lb, sep)}"

    def __repr__(self) -> str:
        return f"Split({self})"


def split_compatible(s: Split, t: Split) -> bool:
    return not (s.a & t.a and s.a & t.b and s.b & t.a and s.b & t.b)


def restrict_split(e: Split, block: int | Iterable[int]) -> Split | None:
    """Restriction ``(A∩block)|(B∩block)``, or ``None`` if one side is empty."""
    mask = block if isinstance(block, int) else to_mask(block)
    a, b = e.a & mask, e.b & mask
    if a and b:
        return Split(a, b)
    return None


@dataclass(frozen=True)
class _Layout:
    """Dense index structures used by the matrix maps."""

    n: int
    iu: np.ndarray
    iv: np.ndarray
    incidence: np.ndarray  # (pairs, splits) bool: split lies on the path between the pair
    connected: np.ndarray  # (pairs,) bool


@dataclass(frozen=True)
class WaldTopology:
    n_leaves: int
    splits: frozenset[Split]
    partition: tuple[frozenset[int], ...]

    @cached_property
    def ordered(self) -> tuple[Split, ...]:
        return tuple(sorted(self.splits))

    @cached_property
    def index(self) -> Mapping[Split, int]:
        return MappingProxyType({s: i for i, s in enumerate(self.ordered)})

    @cached_property
    def block_masks(self) -> tuple[int, ...]:
        return tuple(to_mask(b) for b in self.partition)

    def block_of(self, u: int) -> int:
        bit = 1 << (u - 1)
        for m in self.block_masks:
            if m & bit:
                return m
        raise WaldError(f"label {u} outside 1..{self.n_leaves}")

    def position(self, e: Split) -> int:
        try:
            return self.index[e]
        except KeyError:
            raise UnknownSplit(e) from None

    @property
    def is_resolved(self) -> bool:
        return len(self.splits) == 2 * self.n_leaves - 3

    @cached_property
    def layout(self) -> _Layout:
        n = self.n_leaves
        iu, iv = np.triu_indices(n, 1)
        inc = np.zeros((len(iu), len(self.ordered)), dtype=bool)
        conn = np.zeros(len(iu), dtype=bool)
        for k, (u, v) in enumerate(zip(iu + 1, iv + 1)):
            conn[k] = self.block_of(u) == self.block_of(v)
            for j, s in enumerate(self.ordered):
                inc[k, j] = s.separates(u, v)
        for arr in (iu, iv, inc, conn):
            arr.setflags(write=False)
        return _Layout(n, iu, iv, inc, conn)

    def __str__(self) -> str:
        return "{" + ", ".join(str(s) for s in self.ordered) + "}"


def validate_topology(splits: Iterable[Split], n_leaves: int) -> WaldTopology:
    n_leaves = int(n_leaves)
    if not 2 <= n_leaves <= MAX_LEAVES:
        raise WaldError(f"number of leaves must lie in 2..{MAX_LEAVES}, got {n_leaves}")
    full = (1 << n_leaves) - 1
    splits = frozenset(splits)
    for s in splits:
        if s.support & ~full:
            raise WaldError(f"split {s} uses labels outside 1..{n_leaves}")

    by_block: dict[int, list[Split]] = {}
    for s in sorted(splits):
        by_block.setdefault(s.support, []).append(s)
    supports = sorted(by_block, key=_lowest)
    for m1, m2 in itertools.combinations(supports, 2):
        if m1 & m2:
            raise OverlappingBlocks(by_block[m1][0], by_block[m2][0])

    for block in by_block.values():
        for s, t in itertools.combinations(block, 2):
            if not split_compatible(s, t):
                raise IncompatibleSplits(s, t)

    for mask, block in by_block.items():
        seen: dict[tuple[bool, ...], int] = {}
        for u in from_mask(mask):
            bit = 1 << (u - 1)
            signature = tuple(bool(s.a & bit) for s in block)
            if signature in seen:
                raise SeparationViolated(seen[signature], u)
            seen[signature] = u

    covered = 0
    for m in supports:
        covered |= m
    blocks = [frozenset(from_mask(m)) for m in supports]
    blocks += [frozenset([u]) for u in range(1, n_leaves + 1) if not covered & (1 << (u - 1))]
    blocks.sort(key=min)
    return WaldTopology(n_leaves, splits, tuple(blocks))


def edges_on_path(t: WaldTopology, u: int, v: int) -> frozenset[Split]:
    return frozenset(s for s in t.splits if s.separates(u, v))


@dataclass(frozen=True, eq=False)
class Wald:
    """A point of wald space: a topology with one weight in (0, 1) per split."""

    topology: WaldTopology
    weights: Mapping[Split, float] = field(default_factory=dict)

    def __post_init__(self):
        weights = {s: float(w) for s, w in self.weights.items()}
        if set(weights) != set(self.topology.splits):
            raise WaldError("weights must be given for exactly the splits of the topology")
        for s, w in weights.items():
            if not 0.0 < w < 1.0:
                raise DomainError(f"weight of {s} must lie in (0, 1), got {w}")
        ordered = {s: weights[s] for s in self.topology.ordered}
        object.__setattr__(self, "weights", MappingProxyType(ordered))

    @classmethod
    def from_weights(cls, weights: Mapping[Split, float], n_leaves: int) -> "Wald":
        return cls(validate_topology(weights.keys(), n_leaves), weights)

    @classmethod
    def from_array(cls, topology: WaldTopology, lam) -> "Wald":
        lam = np.asarray(lam, dtype=float)
        return cls(topology, dict(zip(topology.ordered, lam.tolist())))

    @classmethod
    def infinity(cls, n_leaves: int) -> "Wald":
        return cls(validate_topology((), n_leaves), {})

    @property
    def n_leaves(self) -> int:
        return self.topology.n_leaves

    @property
    def lambdas(self) -> np.ndarray:
        return np.fromiter(self.weights.values(), dtype=float, count=len(self.weights))

    def weight(self, s: Split) -> float:
        """Weight of ``s``, or 0 if the split is absent."""
        return self.weights.get(s, 0.0)

    def __eq__(self, other):
        if not isinstance(other, Wald):
            return NotImplemented
        return self.topology == other.topology and dict(self.weights) == dict(other.weights)

    def __hash__(self):
        return hash((self.topology, tuple(self.weights.values())))

    def __repr__(self) -> str:
        body = ", ".join(f"{s}: {w:.6g}" for s, w in self.weights.items())
        return f"Wald(N={self.n_leaves}, {{{body}}})"


def walds_close(w1: Wald, w2: Wald, tol: float = 1e-9) -> bool:
    if w1.topology != w2.topology:
        return False
    return all(abs(w1.weights[s] - w2.weights[s]) <= tol for s in w1.topology.splits)


@dataclass(frozen=True)
class OrderWitness:
    """The decomposition of ``E`` certifying ``E' <= E``."""

    corresponding: Mapping[Split, frozenset[Split]]
    disappearing: frozenset[Split]
    cut: frozenset[Split]

    @property
    def is_identity(self) -> bool:
        return not self.disappearing and not self.cut and all(
            r == frozenset([s]) for s, r in self.corresponding.items()
        )


def partial_order_compare(e_prime: WaldTopology, e: WaldTopology) -> OrderWitness | None:
    """Return the R-set witness if ``e_prime <= e`` and ``None`` otherwise."""
    if e_prime.n_leaves != e.n_leaves:
        raise WaldError("topologies have different numbers of leaves")

    # refinement: every block of e_prime lies inside a block of e
    parent: dict[int, int] = {}
    for m in e_prime.block_masks:
        outer = e.block_of(from_mask(m)[0])
        if m & ~outer:
            return None
        parent[m] = outer

    # cut: distinct e_prime blocks sharing an e block are separated by one split
    children: dict[int, list[int]] = {}
    for m, outer in parent.items():
        children.setdefault(outer, []).append(m)
    for outer, inner in children.items():
        splits = [s for s in e.splits if s.support == outer]
        for m1, m2 in itertools.combinations(inner, 2):
            if not any(
                (m1 & ~s.a == 0 and m2 & ~s.b == 0) or (m1 & ~s.b == 0 and m2 & ~s.a == 0)
                for s in splits
            ):
                return None

    # restriction: every split of e_prime is a restriction of some split of e
    corresponding: dict[Split, set[Split]] = {s: set() for s in e_prime.splits}
    disappearing: set[Split] = set()
    cut: set[Split] = set()
    inner_blocks = [m for m in e_prime.block_masks if m & (m - 1)]
    for s in e.splits:
        hits = []
        for m in inner_blocks:
            if m & ~s.support:
                continue
            r = restrict_split(s, m)
            if r is not None:
                hits.append(r)
        if not hits:
            cut.add(s)
            continue
        # a split restricting validly to two blocks would contradict the cut property
        assert len(hits) == 1, "split restricts to more than one block"
        r = hits[0]
        if r in corresponding:
            corresponding[r].add(s)
        else:
            disappearing.add(s)
    if any(not r for r in corresponding.values()):
        return None
    return OrderWitness(
        MappingProxyType({s: frozenset(corresponding[s]) for s in e_prime.ordered}),
        frozenset(disappearing),
        frozenset(cut),
    )


def topology_leq(e_prime: WaldTopology, e: WaldTopology) -> bool:
    return partial_order_compare(e_prime, e) is not None


def _weights_array(t: WaldTopology, lam) -> np.ndarray:
    if isinstance(lam, Mapping):
        arr = np.zeros(len(t.ordered))
        for s, w in lam.items():
            arr[t.position(s)] = w
        if len(lam) != len(t.ordered):
            missing = set(t.splits) - set(lam)
            if missing:
                raise WaldError(f"no weight given for {sorted(missing)[0]}")
        return arr
    arr = np.asarray(lam, dtype=float).reshape(-1)
    if arr.shape != (len(t.ordered),):
        raise WaldError(f"expected {len(t.ordered)} weights, got {arr.shape[0]}")
    return arr


def sub_wald_from_boundary(e: WaldTopology, lambda_star) -> Wald:
    """Identify the wald represented by a point of the closed cube ``[0, 1]^E``.

    Splits with weight 1 cut the forest, splits with weight 0 are removed,
    and splits that collapse onto one restricted split are merged with
    weight ``1 - prod(1 - lambda)``.
    """
    lam = _weights_array(e, lambda_star)
    if np.any((lam < 0) | (lam > 1)) or not np.all(np.isfinite(lam)):
        raise DomainError("boundary weights must lie in [0, 1]")
    ordered = e.ordered
    n = e.n_leaves

    # connectivity: u ~ v iff same block and no separating split is cut
    comp = list(range(n + 1))

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for u, v in itertools.combinations(range(1, n + 1), 2):
        if e.block_of(u) != e.block_of(v):
            continue
        on_path = [lam[j] for j, s in enumerate(ordered) if s.separates(u, v)]
        if all(w == 0.0 for w in on_path):
            raise NotInWaldSpace(f"labels {u} and {v} coincide at this boundary point")
        if all(w < 1.0 for w in on_path):
            comp[find(u)] = find(v)

    blocks: dict[int, int] = {}
    for u in range(1, n + 1):
        blocks[find(u)] = blocks.get(find(u), 0) | (1 << (u - 1))
    inner_blocks = [m for m in blocks.values() if m & (m - 1)]

    survivors: dict[Split, list[int]] = {}
    for j, s in enumerate(ordered):
        for m in inner_blocks:
            if m & ~s.support:
                continue
            r = restrict_split(s, m)
            if r is not None:
                survivors.setdefault(r, []).append(j)
    weights = {}
    for r, members in survivors.items():
        if any(lam[j] != 0.0 for j in members):
            weights[r] = 1.0 - float(np.prod([1.0 - lam[j] for j in members]))
    return Wald.from_weights(weights, n)


def lift_to_boundary(w: Wald, e: WaldTopology, cut_value: float = 1.0) -> np.ndarray | None:
    """Coordinates in ``[0, 1]^E`` whose boundary wald is ``w``, if ``w``'s topology is below ``e``.

    Disappearing splits get 0, cut splits get ``cut_value`` and the weight
    of each split of ``w`` is shared equally (multiplicatively) among its
    corresponding splits.
    """
    witness = partial_order_compare(w.topology, e)
    if witness is None:
        return None
    lam = np.zeros(len(e.ordered))
    for s in witness.cut:
        lam[e.position(s)] = cut_value
    for s_prime, group in witness.corresponding.items():
        share = 1.0 - (1.0 - w.weights[s_prime]) ** (1.0 / len(group))
        for s in group:
            lam[e.position(s)] = share
    return lam


# ---------------------------------------------------------------- enumeration


def _block_splits(mask: int) -> list[Split]:
    labels = from_mask(mask)
    first, rest = labels[0], labels[1:]
    out = []
    for r in range(0, len(rest)):
        for extra in itertools.combinations(rest, r):
            a = to_mask((first,) + extra)
            out.append(Split(a, mask & ~a))
    return out


@lru_cache(maxsize=None)
def _block_topologies(mask: int) -> tuple[frozenset[Split], ...]:
    """All valid split systems on one block (all labels connected)."""
    labels = from_mask(mask)
    if len(labels) == 1:
        return (frozenset(),)
    candidates = _block_splits(mask)
    out = []

    def separated(chosen):
        sigs = set()
        for u in labels:
            bit = 1 << (u - 1)
            sig = tuple(bool(s.a & bit) for s in chosen)
            if sig in sigs:
                return False
            sigs.add(sig)
        return True

    def grow(start, chosen):
        if separated(chosen):
            out.append(frozenset(chosen))
        for k in range(start, len(candidates)):
            s = candidates[k]
            if all(split_compatible(s, t) for t in chosen):
                chosen.append(s)
                grow(k + 1, chosen)
                chosen.pop()

    grow(0, [])
    return tuple(out)


def _set_partitions(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]


def enumerate_topologies(n_leaves: int) -> list[WaldTopology]:
    """Every wald topology on ``n_leaves`` labels (feasible for small N only)."""
    out = []
    for part in _set_partitions(list(range(1, n_leaves + 1))):
        options = [_block_topologies(to_mask(b)) for b in part]
        for combo in itertools.product(*options):
            splits = frozenset().union(*combo)
            out.append(validate_topology(splits, n_leaves))
    out.sort(key=lambda t: (len(t.splits), [s.sort_key() for s in t.ordered], t.partition))
    return out


@lru_cache(maxsize=None)
def resolved_topologies(n_leaves: int) -> tuple[WaldTopology, ...]:
    """All fully resolved trees, built by inserting leaves onto edges one at a time."""
    if n_leaves < 2:
        raise WaldError("need at least two leaves")
    trees = [frozenset([Split.of([1], [2])])]
    for k in range(3, n_leaves + 1):
        bit = 1 << (k - 1)
        grown = []
        for tree in trees:
            for e in tree:
                new = set()
                for f in tree:
                    if f == e:
                        continue
                    if e.a & ~f.a == 0 or e.b & ~f.a == 0:
                        new.add(Split(f.a | bit, f.b))
                    else:
                        new.add(Split(f.a, f.b | bit))
                new.add(Split(e.a | bit, e.b))
                new.add(Split(e.a, e.b | bit))
                new.add(Split(bit, e.a | e.b))
                grown.append(frozenset(new))
        trees = grown
    return tuple(validate_topology(t, n_leaves) for t in trees)


def extend_topology(t: WaldTopology) -> WaldTopology | None:
    """A topology with one more split that lies strictly above ``t``; ``None`` if resolved."""
    n = t.n_leaves
    for mask in t.block_masks:
        if not mask & (mask - 1):
            continue
        own = [s for s in t.splits if s.support == mask]
        if len(own) == 2 * len(from_mask(mask)) - 3:
            continue
        for cand in _block_splits(mask):
            if cand in t.splits or not all(split_compatible(cand, s) for s in own):
                continue
            return validate_topology(t.splits | {cand}, n)
    if len(t.block_masks) < 2:
        return None
    m1, m2 = t.block_masks[0], t.block_masks[1]
    anchor1, anchor2 = _lowest(m1), _lowest(m2)
    grown = set()
    for s in t.splits:
        if s.support == m1:
            grown.add(Split(s.a | m2, s.b) if s.a & anchor1 else Split(s.a, s.b | m2))
        elif s.support == m2:
            grown.add(Split(s.a | m1, s.b) if s.a & anchor2 else Split(s.a, s.b | m1))
        else:
            grown.add(s)
    grown.add(Split(m1, m2))
    return validate_topology(grown, n)


def random_wald(rng: np.random.Generator, n_leaves: int, p_cut: float = 0.15,
                p_contract: float = 0.25, low: float = 0.02, high: float = 0.98) -> Wald:
    """Random wald: a random resolved tree with random cuts and contractions, then uniform weights."""
    trees = None
    if n_leaves <= 7:
        trees = resolved_topologies(n_leaves)
    while True:
        if trees is not None:
            t = trees[rng.integers(len(trees))]
        else:
            t = _random_resolved(rng, n_leaves)
        m = len(t.ordered)
        u = rng.random(m)
        lam = np.where(u < p_cut, 1.0, np.where(u < p_cut + p_contract, 0.0, 0.5))
        try:
            shape = sub_wald_from_boundary(t, lam).topology
        except NotInWaldSpace:
            continue
        weights = rng.uniform(low, high, size=len(shape.ordered))
        return Wald.from_array(shape, weights)


def _random_resolved(rng: np.random.Generator, n_leaves: int) -> WaldTopology:
    tree = {Split.of([1], [2])}
    for k in range(3, n_leaves + 1):
        bit = 1 << (k - 1)
        ordered = sorted(tree)
        e = ordered[rng.integers(len(ordered))]
        new = set()
        for f in tree:
            if f == e:
                continue
            if e.a & ~f.a == 0 or e.b & ~f.a == 0:
                new.add(Split(f.a | bit, f.b))
            else:
                new.add(Split(f.a, f.b | bit))
        new |= {Split(e.a | bit, e.b), Split(e.a, e.b | bit), Split(bit, e.a | e.b)}
        tree = new
    return validate_topology(tree, n_leaves)
