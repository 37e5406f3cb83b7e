"""Directed-graph value types, causal orders, and structural metrics.

Node identity is by name string everywhere; integer indices are derived
from a :class:`VariableSet` and never persisted.  All types are immutable
values after construction and all operations are pure functions.
"""

from __future__ import annotations

import heapq
import shlex
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    CyclicGraphError,
    ParseError,
    ShapeMismatchError,
    UnorderedNodeError,
)

__all__ = [
    "VariableSet",
    "AdjacencyMatrix",
    "MixedGraph",
    "TopologicalOrder",
    "LevelOrder",
    "dtop",
    "shd",
    "transitive_closure",
    "find_cycles",
    "topological_order_of",
    "level_order_of",
    "isolated_nodes",
    "parse_edge_list",
    "serialize_edge_list",
]


@dataclass(frozen=True)
class VariableSet:
    """An ordered set of unique variable names with optional descriptions."""

    names: tuple[str, ...]
    descriptions: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(set(self.names)) != len(self.names):
            raise ValueError("variable names must be unique")
        if any(not n for n in self.names):
            raise ValueError("variable names must be non-empty")
        unknown = set(self.descriptions) - set(self.names)
        if unknown:
            raise ValueError(f"descriptions for unknown variables: {sorted(unknown)}")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def description(self, name: str) -> str:
        return self.descriptions.get(name, "")


@dataclass(frozen=True)
class AdjacencyMatrix:
    """A directed graph over a :class:`VariableSet` as a boolean matrix.

    ``bits[i, j]`` is true iff there is a directed edge from variable ``i``
    to variable ``j``.  The diagonal is always zero.  The matrix is not
    required to be acyclic (expert-built graphs may contain cycles); use
    :meth:`is_dag` or :func:`topological_order_of` when acyclicity matters.
    """

    vars: VariableSet
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        n = len(self.vars)
        if bits.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got {bits.shape}")
        if bits.diagonal().any():
            raise ValueError("self loops are not allowed")
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def empty(cls, variables: VariableSet) -> "AdjacencyMatrix":
        n = len(variables)
        return cls(variables, np.zeros((n, n), dtype=bool))

    @classmethod
    def from_edges(
        cls, variables: VariableSet, edges: Iterable[tuple[str, str]]
    ) -> "AdjacencyMatrix":
        n = len(variables)
        bits = np.zeros((n, n), dtype=bool)
        for src, dst in edges:
            if src == dst:
                raise ValueError(f"self loop on {src!r}")
            bits[variables.index(src), variables.index(dst)] = True
        return cls(variables, bits)

    @property
    def n(self) -> int:
        return len(self.vars)

    def n_edges(self) -> int:
        return int(self.bits.sum())

    def has_edge(self, src: str, dst: str) -> bool:
        return bool(self.bits[self.vars.index(src), self.vars.index(dst)])

    def edges(self) -> list[tuple[str, str]]:
        """All directed edges as name pairs, in index order."""
        names = self.vars.names
        return [(names[i], names[j]) for i, j in zip(*np.nonzero(self.bits))]

    def parents(self, name: str) -> list[str]:
        j = self.vars.index(name)
        return [self.vars.names[i] for i in np.nonzero(self.bits[:, j])[0]]

    def children(self, name: str) -> list[str]:
        i = self.vars.index(name)
        return [self.vars.names[j] for j in np.nonzero(self.bits[i])[0]]

    def is_dag(self) -> bool:
        try:
            topological_order_of(self)
            return True
        except CyclicGraphError:
            return False

    def with_edge(self, src: str, dst: str, present: bool = True) -> "AdjacencyMatrix":
        bits = self.bits.copy()
        bits[self.vars.index(src), self.vars.index(dst)] = present
        return AdjacencyMatrix(self.vars, bits)


def _norm_pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class MixedGraph:
    """A graph with both directed and undirected edges (e.g. a CPDAG)."""

    vars: VariableSet
    directed: frozenset[tuple[str, str]] = frozenset()
    undirected: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self):
        directed = frozenset(self.directed)
        undirected = frozenset(_norm_pair(*e) for e in self.undirected)
        for src, dst in directed | undirected:
            if src == dst:
                raise ValueError(f"self loop on {src!r}")
            self.vars.index(src)
            self.vars.index(dst)
        dir_pairs = {_norm_pair(*e) for e in directed}
        overlap = dir_pairs & undirected
        if overlap:
            raise ValueError(f"edges both directed and undirected: {sorted(overlap)}")
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)

    @classmethod
    def from_matrix(cls, g: AdjacencyMatrix) -> "MixedGraph":
        return cls(g.vars, directed=frozenset(g.edges()))

    def degree(self, name: str) -> int:
        self.vars.index(name)
        d = sum(1 for e in self.directed if name in e)
        u = sum(1 for e in self.undirected if name in e)
        return d + u

    def directed_matrix(self) -> AdjacencyMatrix:
        return AdjacencyMatrix.from_edges(self.vars, self.directed)


@dataclass(frozen=True)
class TopologicalOrder:
    """Ranks for a subset of variables; missing names are undetermined."""

    rank: Mapping[str, int]

    def __post_init__(self):
        rank = dict(self.rank)
        values = sorted(rank.values())
        if values != list(range(len(rank))):
            raise ValueError("ranks must form a bijection onto 0..k-1")
        object.__setattr__(self, "rank", rank)

    @classmethod
    def from_sequence(cls, names: Iterable[str]) -> "TopologicalOrder":
        return cls({name: i for i, name in enumerate(names)})

    def __len__(self) -> int:
        return len(self.rank)

    def __contains__(self, name: object) -> bool:
        return name in self.rank

    def names_in_order(self) -> list[str]:
        return sorted(self.rank, key=self.rank.__getitem__)

    def predecessors(self, name: str) -> set[str]:
        if name not in self.rank:
            raise UnorderedNodeError(f"{name!r} is not ranked")
        r = self.rank[name]
        return {k for k, v in self.rank.items() if v < r}


@dataclass(frozen=True)
class LevelOrder:
    """Level assignment: level 0 for roots, longest-path depth otherwise."""

    level: Mapping[str, int]

    def __post_init__(self):
        level = dict(self.level)
        if level:
            if min(level.values()) != 0:
                raise ValueError("some variable must have level 0")
            if any(v < 0 for v in level.values()):
                raise ValueError("levels must be non-negative")
        object.__setattr__(self, "level", level)

    def groups(self) -> list[list[str]]:
        """Names grouped by level, ascending; names sorted within a level."""
        out: dict[int, list[str]] = {}
        for name, lvl in self.level.items():
            out.setdefault(lvl, []).append(name)
        return [sorted(out[lvl]) for lvl in sorted(out)]


def _edge_endpoints(truth: AdjacencyMatrix) -> set[str]:
    names = truth.vars.names
    rows, cols = np.nonzero(truth.bits)
    return {names[i] for i in rows} | {names[j] for j in cols}


def dtop(order: TopologicalOrder, truth: AdjacencyMatrix) -> int:
    """Count ground-truth edges that point backwards under ``order``.

    Every node incident to a true edge must be ranked; isolated nodes of
    the truth may be missing from the order without affecting the count.
    """
    missing = _edge_endpoints(truth) - set(order.rank)
    if missing:
        raise UnorderedNodeError(
            f"order does not rank nodes present in the graph: {sorted(missing)}"
        )
    rank = order.rank
    names = truth.vars.names
    count = 0
    for i, j in zip(*np.nonzero(truth.bits)):
        if rank[names[j]] < rank[names[i]]:
            count += 1
    return count


def shd(estimated: AdjacencyMatrix, truth: AdjacencyMatrix) -> int:
    """Structural Hamming distance; a reversed edge counts once."""
    if estimated.vars.names != truth.vars.names:
        raise ShapeMismatchError("graphs must share the same variable set")
    a, b = estimated.bits, truth.bits
    diff = int(np.sum(a != b))
    # Pairs where both graphs have exactly one edge, oppositely directed,
    # contribute 2 to the raw symmetric difference but count as a single
    # falsely directed edge.
    reversed_pairs = np.triu((a & ~a.T) & (b.T & ~b) | (a.T & ~a) & (b & ~b.T), k=1)
    return diff - int(reversed_pairs.sum())


def transitive_closure(g: AdjacencyMatrix) -> AdjacencyMatrix:
    """Closure of a DAG: an edge i -> j wherever a directed path exists."""
    topological_order_of(g)  # raises CyclicGraphError on cycles
    reach = g.bits.copy()
    n = g.n
    while True:
        nxt = reach | (reach @ reach)
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    np.fill_diagonal(reach, False)
    return AdjacencyMatrix(g.vars, reach)


def find_cycles(g: AdjacencyMatrix, max_len: int = 5) -> list[tuple[str, ...]]:
    """All simple directed cycles of length <= ``max_len``.

    Each cycle is reported once, rotated to start at its lowest-index node.
    Exhaustive cycle counting is intractable, so callers treat the result
    as a lower bound when ``max_len`` < n.
    """
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    n = g.n
    succ = [np.nonzero(g.bits[i])[0].tolist() for i in range(n)]
    names = g.vars.names
    cycles: list[tuple[str, ...]] = []

    def extend(start: int, path: list[int], on_path: set[int]):
        node = path[-1]
        for nxt in succ[node]:
            if nxt == start:
                cycles.append(tuple(names[i] for i in path))
            elif nxt > start and nxt not in on_path and len(path) < max_len:
                on_path.add(nxt)
                path.append(nxt)
                extend(start, path, on_path)
                path.pop()
                on_path.remove(nxt)

    for start in range(n):
        extend(start, [start], {start})
    return cycles


def _witness_cycle(g: AdjacencyMatrix, candidates: set[int]) -> tuple[str, ...]:
    """Extract one directed cycle from the non-sortable remainder.

    Every node left over by Kahn's algorithm has a leftover predecessor,
    so walking predecessors must revisit a node; the revisited segment,
    reversed, follows the edge direction.
    """
    start = min(candidates)
    path = [start]
    seen = {start: 0}
    node = start
    while True:
        node = int(min(i for i in np.nonzero(g.bits[:, node])[0] if int(i) in candidates))
        if node in seen:
            seg = path[seen[node]:]
            cycle = [seg[0], *reversed(seg[1:])]
            return tuple(g.vars.names[i] for i in cycle)
        seen[node] = len(path)
        path.append(node)


def topological_order_of(g: AdjacencyMatrix) -> TopologicalOrder:
    """Deterministic topological order (ties broken by ascending index)."""
    n = g.n
    indegree = g.bits.sum(axis=0).astype(int)
    ready = [i for i in range(n) if indegree[i] == 0]
    heapq.heapify(ready)
    out: list[int] = []
    while ready:
        i = heapq.heappop(ready)
        out.append(i)
        for j in np.nonzero(g.bits[i])[0]:
            indegree[j] -= 1
            if indegree[j] == 0:
                heapq.heappush(ready, int(j))
    if len(out) != n:
        remaining = set(range(n)) - set(out)
        cycle = _witness_cycle(g, remaining)
        raise CyclicGraphError(f"graph contains a cycle: {' -> '.join(cycle)}", cycle)
    return TopologicalOrder.from_sequence(g.vars.names[i] for i in out)


def level_order_of(g: AdjacencyMatrix) -> LevelOrder:
    """Longest-path levels: roots at level 0, each node at the length of
    the longest directed path reaching it from a root."""
    order = topological_order_of(g)
    names = g.vars.names
    level = {}
    for name in order.names_in_order():
        parents = g.parents(name)
        level[name] = 0 if not parents else max(level[p] for p in parents) + 1
    return LevelOrder(level)


def isolated_nodes(g: MixedGraph, variables: VariableSet) -> set[str]:
    """Names from ``variables`` with no incident edge of either kind."""
    touched: set[str] = set()
    for e in g.directed:
        touched.update(e)
    for e in g.undirected:
        touched.update(e)
    return {name for name in variables if name not in touched}


# ---------------------------------------------------------------------------
# Edge-list text format
#
#   src -> dst        directed edge
#   src -- dst        undirected edge
#   name              isolated node declaration
#   # ...             comment
#
# Names containing whitespace are double quoted.


def parse_edge_list(text: str) -> MixedGraph:
    names: list[str] = []
    seen: set[str] = set()

    def note(name: str):
        if name not in seen:
            seen.add(name)
            names.append(name)

    directed: set[tuple[str, str]] = set()
    undirected: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not tokens:
            continue
        if len(tokens) == 1:
            note(tokens[0])
        elif len(tokens) == 3 and tokens[1] in ("->", "--"):
            src, op, dst = tokens
            note(src)
            note(dst)
            if op == "->":
                directed.add((src, dst))
            else:
                undirected.add(_norm_pair(src, dst))
        else:
            raise ParseError(f"expected 'src -> dst', 'src -- dst' or a bare name, got {raw!r}",
                             line=lineno)
    return MixedGraph(VariableSet(tuple(names)), frozenset(directed), frozenset(undirected))


def _quote(name: str) -> str:
    if any(c.isspace() for c in name) or "#" in name or '"' in name:
        return '"' + name.replace('"', '\\"') + '"'
    return name


def serialize_edge_list(g: MixedGraph) -> str:
    # Bare-name lines come first so that parsing recovers the variable
    # order exactly (isolated nodes included).
    lines = [_quote(name) for name in g.vars]
    for src, dst in sorted(g.directed):
        lines.append(f"{_quote(src)} -> {_quote(dst)}")
    for src, dst in sorted(g.undirected):
        lines.append(f"{_quote(src)} -- {_quote(dst)}")
    return "\n".join(lines) + "\n"
