"""Newick and JSON forms of forests, and the graph/split correspondence.

Newick dialect: leaves are the integer labels ``1..N``; every edge carries a
branch length; a forest is a sequence of ``;``-terminated trees. An integer
label on an internal node marks a labelled interior vertex, other internal
names are ignored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .errors import (
    DegreeTwoVertex,
    DomainError,
    DuplicateLabel,
    MissingLength,
    NewickSyntaxError,
    NonPositiveLength,
    WaldError,
)
from .forest import Split, Wald, from_mask, to_mask


def lengths_to_weights(length: float) -> float:
    """Edge weight ``1 - exp(-length)`` of a branch length in ``(0, inf)``."""
    length = float(length)
    if not length > 0.0:
        raise DomainError(f"branch length must be positive, got {length}")
    return -math.expm1(-length)


def weights_to_lengths(weight: float) -> float:
    weight = float(weight)
    if not 0.0 < weight < 1.0:
        raise DomainError(f"edge weight must lie in (0, 1), got {weight}")
    return -math.log1p(-weight)


def _edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class GraphForest:
    """A forest as a graph: vertices ``0..n_vertices-1``, leaf labels and edge lengths.

    ``lengths`` is keyed by ``(u, v)`` with ``u < v``; its keys are the edges.
    """

    n_vertices: int
    labels: Mapping[int, int]  # vertex -> label
    lengths: Mapping[tuple[int, int], float]

    def __post_init__(self):
        labels = dict(self.labels)
        lengths = {_edge(*e): float(x) for e, x in self.lengths.items()}
        if len(lengths) != len(self.lengths):
            raise WaldError("an edge is listed twice")
        for v in labels:
            if not 0 <= v < self.n_vertices:
                raise WaldError(f"labelled vertex {v} does not exist")
        seen = {}
        for v, u in labels.items():
            if u in seen:
                raise DuplicateLabel(u)
            seen[u] = v
        if sorted(seen) != list(range(1, len(seen) + 1)):
            raise WaldError("labels must be exactly 1..N")
        parent = list(range(self.n_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        degree = [0] * self.n_vertices
        for (u, v), x in lengths.items():
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices) or u == v:
                raise WaldError(f"edge {(u, v)} is not a pair of distinct vertices")
            if not x > 0.0:
                raise NonPositiveLength((u, v), x)
            ru, rv = find(u), find(v)
            if ru == rv:
                raise WaldError("the graph contains a cycle")
            parent[ru] = rv
            degree[u] += 1
            degree[v] += 1
        for v in range(self.n_vertices):
            if v in labels:
                continue
            if degree[v] == 2:
                raise DegreeTwoVertex(v)
            if degree[v] < 2:
                raise WaldError(f"unlabeled vertex {v} has degree {degree[v]}")
        object.__setattr__(self, "labels", MappingProxyType(labels))
        object.__setattr__(self, "lengths", MappingProxyType(dict(sorted(lengths.items()))))

    @property
    def n_leaves(self) -> int:
        return len(self.labels)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(self.lengths)

    def neighbours(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for u, v in self.lengths:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def length(self, u: int, v: int) -> float:
        return self.lengths[_edge(u, v)]


# ------------------------------------------------------------------ parsing


class _Node:
    __slots__ = ("label", "length", "children", "position")

    def __init__(self, position: int):
        self.label: int | None = None
        self.length: float | None = None
        self.children: list[_Node] = []
        self.position = position


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str):
        raise NewickSyntaxError(message, self.pos)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str):
        if self.peek() != char:
            self.error(f"expected {char!r}")
        self.pos += 1

    def token(self) -> str:
        self.skip()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in "(),:;" and not self.text[self.pos].isspace():
            self.pos += 1
        return self.text[start : self.pos]

    def subtree(self) -> _Node:
        node = _Node(self.pos)
        if self.peek() == "(":
            self.pos += 1
            node.children.append(self.subtree())
            while self.peek() == ",":
                self.pos += 1
                node.children.append(self.subtree())
            self.expect(")")
            name = self.token()
            if name.isdigit():
                node.label = int(name)
        else:
            name = self.token()
            if not name:
                self.error("expected a leaf label")
            if not name.isdigit() or int(name) < 1:
                self.error(f"leaf label {name!r} is not a positive integer")
            node.label = int(name)
        if self.peek() == ":":
            self.pos += 1
            start = self.pos
            raw = self.token()
            try:
                node.length = float(raw)
            except ValueError:
                self.pos = start
                self.error(f"invalid branch length {raw!r}")
            if not math.isfinite(node.length):
                self.pos = start
                self.error(f"invalid branch length {raw!r}")
        return node

    def forest(self) -> list[_Node]:
        trees = []
        while self.peek():
            root = self.subtree()
            if root.length is not None:
                self.error("the root of a tree cannot carry a branch length")
            self.expect(";")
            trees.append(root)
        if not trees:
            self.error("empty input")
        return trees


def parse_newick(text: str) -> GraphForest:
    """Parse one or more ``;``-terminated Newick trees into a :class:`GraphForest`.

    An unlabeled root of degree two is an artefact of rooted notation and is
    removed by joining its two edges. Any other unlabeled vertex of degree
    two is rejected.
    """
    labels: dict[int, int] = {}
    lengths: dict[tuple[int, int], float] = {}
    count = 0

    def build(node: _Node) -> int:
        nonlocal count
        v = count
        count += 1
        if node.label is not None:
            if node.label in labels.values():
                raise DuplicateLabel(node.label)
            labels[v] = node.label
        for child in node.children:
            c = build(child)
            if child.length is None:
                raise MissingLength((v, c))
            if not child.length > 0.0:
                raise NonPositiveLength((v, c), child.length)
            lengths[(v, c)] = child.length
        return v

    for root in _Parser(text).forest():
        r = build(root)
        if root.label is None and len(root.children) == 2:
            (a, la), (b, lb) = [(e[1], x) for e, x in lengths.items() if e[0] == r]
            del lengths[(r, a)], lengths[(r, b)]
            lengths[_edge(a, b)] = la + lb
    # drop vertices freed by root suppression and renumber
    used = sorted(set(labels) | {v for e in lengths for v in e})
    renumber = {v: i for i, v in enumerate(used)}
    return GraphForest(
        len(used),
        {renumber[v]: u for v, u in labels.items()},
        {(renumber[a], renumber[b]): x for (a, b), x in lengths.items()},
    )


# ------------------------------------------------------------------ serialization


def _format_length(x: float) -> str:
    return repr(float(x))


def _components(f: GraphForest) -> list[list[int]]:
    adj = f.neighbours()
    seen = set()
    comps = []
    for v in range(f.n_vertices):
        if v in seen:
            continue
        stack, comp = [v], []
        seen.add(v)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        comps.append(comp)
    return comps


def serialize_newick(f: GraphForest) -> str:
    """Deterministic Newick text, one tree per component ordered by smallest label.

    Each tree is rooted next to its smallest label; children are ordered by
    their smallest descendant label.
    """
    adj = f.neighbours()
    out = []
    comps = []
    for comp in _components(f):
        smallest = min((f.labels[v], v) for v in comp if v in f.labels)
        comps.append((smallest, comp))
    for (_, anchor), _comp in sorted(comps):
        root = anchor
        if len(adj[anchor]) == 1 and adj[anchor][0] not in f.labels:
            root = adj[anchor][0]

        min_label: dict[int, int] = {}

        def smallest_below(v: int, parent: int) -> int:
            best = f.labels.get(v, math.inf)
            for c in adj[v]:
                if c != parent:
                    best = min(best, smallest_below(c, v))
            min_label[v] = best
            return best

        smallest_below(root, -1)

        def write(v: int, parent: int) -> str:
            children = sorted((c for c in adj[v] if c != parent), key=min_label.__getitem__)
            name = str(f.labels[v]) if v in f.labels else ""
            if not children:
                return name
            inner = ",".join(f"{write(c, v)}:{_format_length(f.length(v, c))}" for c in children)
            return f"({inner}){name}"

        out.append(write(root, -1) + ";")
    return "".join(out)


# ------------------------------------------------------------------ graphs and splits


def graph_to_splits(f: GraphForest) -> Wald:
    """The wald whose splits are the edge bipartitions of ``f``, weighted by ``1 - exp(-length)``."""
    adj = f.neighbours()

    def side(v: int, parent: int) -> int:
        mask = to_mask([f.labels[v]]) if v in f.labels else 0
        for c in adj[v]:
            if c != parent:
                mask |= side(c, v)
        return mask

    weights = {}
    for u, v in f.edges:
        s = Split(side(u, v), side(v, u))
        assert s not in weights, "two edges induce the same split"
        weights[s] = lengths_to_weights(f.length(u, v))
    return Wald.from_weights(weights, f.n_leaves)


def splits_to_graph(w: Wald) -> GraphForest:
    """Graph realization of a wald: one vertex per cluster below the smallest label of each block."""
    labels: dict[int, int] = {}
    lengths: dict[tuple[int, int], float] = {}
    count = 0
    for block in w.topology.partition:
        root = count
        count += 1
        labels[root] = min(block)
        block_mask = to_mask(block)
        splits = [s for s in w.topology.ordered if s.support == block_mask]
        # with the smallest label on side a, side b is the cluster hanging below that edge
        clusters = sorted(splits, key=lambda s: bin(s.b).count("1"))
        vertex = {}
        for s in clusters:
            vertex[s] = count
            count += 1
        for i, s in enumerate(clusters):
            parent = next((vertex[t] for t in clusters[i + 1 :] if t.b & s.b == s.b), root)
            lengths[(parent, vertex[s])] = weights_to_lengths(w.weights[s])
        for u in block:
            if u == labels[root]:
                continue
            bit = to_mask([u])
            holder = min((s for s in clusters if s.b & bit), key=lambda s: bin(s.b).count("1"))
            labels[vertex[holder]] = u
    return GraphForest(count, labels, lengths)


def forests_equivalent(f: GraphForest, g: GraphForest, tol: float = 1e-9) -> bool:
    """Same labels, same splits and edge weights within ``tol``."""
    a, b = graph_to_splits(f), graph_to_splits(g)
    if a.topology != b.topology:
        return False
    return all(abs(a.weights[s] - b.weights[s]) <= tol for s in a.weights)


def wald_to_newick(w: Wald) -> str:
    return serialize_newick(splits_to_graph(w))


def wald_from_newick(text: str) -> Wald:
    return graph_to_splits(parse_newick(text))


# ------------------------------------------------------------------ JSON documents


def wald_to_document(w: Wald) -> dict:
    return {
        "n_leaves": w.n_leaves,
        "splits": [
            {"a": list(from_mask(s.a)), "b": list(from_mask(s.b)), "lambda": float(x)} for s, x in w.weights.items()
        ],
    }


def wald_from_document(doc: Mapping) -> Wald:
    try:
        n = int(doc["n_leaves"])
        entries = doc["splits"]
        weights = {}
        for entry in entries:
            s = Split.of(entry["a"], entry["b"])
            if s in weights:
                raise WaldError(f"split {s} is listed twice")
            weights[s] = float(entry["lambda"])
    except (KeyError, TypeError) as exc:
        raise WaldError(f"malformed forest document: {exc}") from exc
    return Wald.from_weights(weights, n)


def dumps_wald(w: Wald) -> str:
    return json.dumps(wald_to_document(w), indent=2)


def loads_wald(text: str) -> Wald:
    """Read a wald from a JSON document or, failing that, from Newick text."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise WaldError(f"invalid JSON: {exc}") from exc
        return wald_from_document(doc)
    return wald_from_newick(text)
