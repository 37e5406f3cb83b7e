"""Querying pipelines that turn expert answers into a causal order.

Two pipelines are provided: the pairwise pipeline asks one question per
node pair, while the tuple pipeline asks every size-3 (or size-4) subset
for an acyclic mini-graph, majority-votes each pair across tuples,
tie-breaks through a high-cost expert, and entropy-prunes any remaining
cycles before extracting the order.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import CyclicGraphError
from .experts import Choice, Expert, ExpertQuery, PairVerdict, TupleVerdict
from .graph import (
    AdjacencyMatrix,
    MixedGraph,
    TopologicalOrder,
    VariableSet,
    find_cycles,
    isolated_nodes,
    topological_order_of,
)

__all__ = [
    "EdgeBelief",
    "ElicitationReport",
    "PAIRWISE_STRATEGIES",
    "pairwise_pipeline",
    "enumerate_tuples",
    "triplet_pipeline",
    "entropy_prune",
    "merge_order",
    "write_order",
    "read_order",
]

PAIRWISE_STRATEGIES = ("base", "cot", "iterative", "one_hop")


@dataclass(frozen=True)
class EdgeBelief:
    """Vote tally for one unordered pair, oriented as (a, b) with a first."""

    pair: tuple[str, str]
    votes: Mapping[str, int]  # keyed by Choice.value: "A", "B", "C"
    entropy: float
    resolved: Choice | None = None
    resolved_by: str = "majority"

    @classmethod
    def from_counts(cls, pair, counts: Mapping[Choice, int], resolved, resolved_by):
        votes = {c.value: int(counts.get(c, 0)) for c in Choice}
        return cls(pair, votes, _entropy_bits(list(votes.values())), resolved, resolved_by)


def _entropy_bits(counts: Sequence[int]) -> float:
    total = sum(counts)
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


@dataclass(frozen=True)
class ElicitationReport:
    """Everything a pipeline run produced, plus diagnostics.

    ``final_dag`` and ``order`` are absent when the pairwise pipeline built
    a cyclic graph (the tuple pipeline always prunes its way to a DAG).
    """

    vars: VariableSet
    method: str
    strategy: str
    merged: MixedGraph
    final_dag: AdjacencyMatrix | None
    order: TopologicalOrder | None
    beliefs: Mapping[tuple[str, str], EdgeBelief]
    calls: Mapping[str, int]
    ties: int
    cycles_before_prune: int
    isolated: frozenset[str]

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "strategy": self.strategy,
            "variables": list(self.vars.names),
            "merged": {
                "directed": sorted(list(e) for e in self.merged.directed),
                "undirected": sorted(list(e) for e in self.merged.undirected),
            },
            "final_edges": (
                sorted(list(e) for e in self.final_dag.edges())
                if self.final_dag is not None
                else None
            ),
            "order": self.order.names_in_order() if self.order is not None else None,
            "beliefs": {
                f"{a}|{b}": {
                    "votes": dict(belief.votes),
                    "entropy": belief.entropy,
                    "resolved": belief.resolved.value if belief.resolved else None,
                    "resolved_by": belief.resolved_by,
                }
                for (a, b), belief in sorted(self.beliefs.items())
            },
            "calls": dict(self.calls),
            "ties": self.ties,
            "cycles_before_prune": self.cycles_before_prune,
            "isolated": sorted(self.isolated),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))


def write_order(order: TopologicalOrder) -> str:
    """Order file format: one node name per line, rank ascending."""
    return "\n".join(order.names_in_order()) + "\n"


def read_order(text: str) -> TopologicalOrder:
    names = [line.strip() for line in text.splitlines() if line.strip()]
    return TopologicalOrder.from_sequence(names)


def _pair_query(
    variables: VariableSet, a: str, b: str, context: str, extras: Mapping[str, object]
) -> ExpertQuery:
    return ExpertQuery(
        "pairwise",
        (a, b),
        descriptions=(variables.description(a), variables.description(b)),
        context=context,
        extras=extras,
    )


def _bounded_cycle_count(g: AdjacencyMatrix) -> int:
    return len(find_cycles(g, max_len=min(max(g.n, 2), 5)))


def merge_order(final_dag: AdjacencyMatrix) -> TopologicalOrder:
    """Topological order of the final DAG, isolated nodes excluded."""
    full = topological_order_of(final_dag)
    degree = final_dag.bits.sum(axis=0) + final_dag.bits.sum(axis=1)
    connected = {final_dag.vars.names[i] for i in np.nonzero(degree)[0]}
    return TopologicalOrder.from_sequence(
        name for name in full.names_in_order() if name in connected
    )


def pairwise_pipeline(
    variables: VariableSet,
    expert: Expert,
    strategy: str = "base",
    context: str = "",
) -> ElicitationReport:
    """Ask every pair once and assemble the answers into a directed graph.

    The ``iterative`` and ``one_hop`` strategies thread previously decided
    edges into each query's extras.  If the resulting graph is cyclic the
    report leaves ``final_dag`` and ``order`` absent.
    """
    if strategy not in PAIRWISE_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if len(variables) < 2:
        raise ValueError("need at least two variables")
    names = variables.names
    calls_before = expert.calls
    edges: list[tuple[str, str]] = []
    beliefs: dict[tuple[str, str], EdgeBelief] = {}
    transcript: list[tuple[ExpertQuery, PairVerdict]] = []
    try:
        for i, j in itertools.combinations(range(len(names)), 2):
            a, b = names[i], names[j]
            extras: dict[str, object] = {}
            if strategy == "cot":
                # The worked-examples prompt lists every graph variable.
                extras["all_nodes"] = names
            elif strategy == "iterative":
                extras["directed_edges"] = tuple(edges)
            elif strategy == "one_hop":
                extras["x_edges"] = tuple(e for e in edges if a in e)
                extras["y_edges"] = tuple(e for e in edges if b in e)
            query = _pair_query(variables, a, b, context, extras)
            verdict = expert.answer_pair(query)
            transcript.append((query, verdict))
            if verdict.choice is Choice.FORWARD:
                edges.append((a, b))
            elif verdict.choice is Choice.BACKWARD:
                edges.append((b, a))
            beliefs[(a, b)] = EdgeBelief.from_counts(
                (a, b), {verdict.choice: 1}, verdict.choice, "majority"
            )
    except Exception as exc:
        exc.partial_transcript = transcript  # type: ignore[attr-defined]
        raise
    graph = AdjacencyMatrix.from_edges(variables, edges)
    merged = MixedGraph.from_matrix(graph)
    cycles = _bounded_cycle_count(graph)
    try:
        order = merge_order(graph)
        final_dag: AdjacencyMatrix | None = graph
    except CyclicGraphError:
        order = None
        final_dag = None
    return ElicitationReport(
        vars=variables,
        method="pairwise",
        strategy=strategy,
        merged=merged,
        final_dag=final_dag,
        order=order,
        beliefs=beliefs,
        calls={"expert": expert.calls - calls_before},
        ties=0,
        cycles_before_prune=cycles,
        isolated=frozenset(isolated_nodes(merged, variables)),
    )


def enumerate_tuples(
    variables: VariableSet,
    size: int = 3,
    k: int | None = None,
    seed: int | None = None,
) -> list[tuple[str, ...]]:
    """All size-``size`` node subsets, or a seeded subsample when ``k`` given.

    The subsample guarantees every unordered pair appears in at least
    ``min(k, C(n - 2, size - 2))`` tuples while using at most k * C(n, 2)
    tuples in total.
    """
    if size not in (3, 4):
        raise ValueError("tuple size must be 3 or 4")
    n = len(variables)
    if size > n:
        raise ValueError("tuple size exceeds the number of variables")
    names = variables.names
    all_tuples = [
        tuple(names[i] for i in combo)
        for combo in itertools.combinations(range(n), size)
    ]
    if k is None:
        return all_tuples
    if k < 1:
        raise ValueError("k must be at least 1")
    target = min(k, math.comb(n - 2, size - 2))
    rng = np.random.default_rng(seed)
    by_pair: dict[tuple[str, str], list[int]] = {}
    for idx, tup in enumerate(all_tuples):
        for a, b in itertools.combinations(tup, 2):
            by_pair.setdefault((a, b), []).append(idx)
    chosen: set[int] = set()
    counts = {pair: 0 for pair in by_pair}
    for pair in sorted(by_pair):
        if counts[pair] >= target:
            continue
        candidates = [idx for idx in by_pair[pair] if idx not in chosen]
        rng.shuffle(candidates)
        for idx in candidates:
            if counts[pair] >= target:
                break
            chosen.add(idx)
            for other in itertools.combinations(all_tuples[idx], 2):
                counts[other] += 1
    return [all_tuples[idx] for idx in sorted(chosen)]


def triplet_pipeline(
    variables: VariableSet,
    expert: Expert,
    tiebreak_expert: Expert,
    size: int = 3,
    k: int | None = None,
    seed: int | None = None,
    context: str = "",
    max_workers: int = 1,
) -> ElicitationReport:
    """The tuple querying method: enumerate tuples, vote, tie-break, prune.

    Vote tallying is a deterministic fold over the verdicts sorted by tuple
    identity, so concurrent tuple queries cannot change the result.
    """
    names = variables.names
    tuples = enumerate_tuples(variables, size=size, k=k, seed=seed)
    expert_before = expert.calls
    tiebreak_before = tiebreak_expert.calls

    def run(tup: tuple[str, ...]) -> tuple[tuple[str, ...], TupleVerdict]:
        query = ExpertQuery(
            "tuple",
            tup,
            descriptions=tuple(variables.description(t) for t in tup),
            context=context,
        )
        return tup, expert.answer_tuple(query)

    transcript: list[tuple[tuple[str, ...], TupleVerdict]] = []
    try:
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                transcript = list(pool.map(run, tuples))
        else:
            transcript = [run(tup) for tup in tuples]
    except Exception as exc:
        exc.partial_transcript = transcript  # type: ignore[attr-defined]
        raise
    transcript.sort(key=lambda item: item[0])

    index = {name: i for i, name in enumerate(names)}
    votes: dict[tuple[str, str], dict[Choice, int]] = {}
    for tup, verdict in transcript:
        for a, b in itertools.combinations(sorted(tup, key=index.__getitem__), 2):
            counter = votes.setdefault((a, b), {c: 0 for c in Choice})
            counter[verdict.pair_choice(a, b)] += 1

    beliefs: dict[tuple[str, str], EdgeBelief] = {}
    edges: list[tuple[str, str]] = []
    ties = 0
    for pair in sorted(votes, key=lambda p: (index[p[0]], index[p[1]])):
        counter = votes[pair]
        best = max(counter.values())
        top = [c for c in Choice if counter[c] == best]
        if len(top) == 1:
            resolved, resolved_by = top[0], "majority"
        else:
            ties += 1
            resolved_by = "tiebreak"
            query = _pair_query(variables, pair[0], pair[1], context, {"tiebreak": True})
            resolved = tiebreak_expert.answer_pair(query).choice
        beliefs[pair] = EdgeBelief.from_counts(pair, counter, resolved, resolved_by)
        if resolved is Choice.FORWARD:
            edges.append(pair)
        elif resolved is Choice.BACKWARD:
            edges.append((pair[1], pair[0]))

    raw = AdjacencyMatrix.from_edges(variables, edges)
    merged = MixedGraph.from_matrix(raw)
    cycles = _bounded_cycle_count(raw)
    final_dag = entropy_prune(raw, beliefs)
    return ElicitationReport(
        vars=variables,
        method="tuple",
        strategy=f"size{size}" + (f"-k{k}" if k is not None else ""),
        merged=merged,
        final_dag=final_dag,
        order=merge_order(final_dag),
        beliefs=beliefs,
        calls={
            "expert": expert.calls - expert_before,
            "tiebreak": tiebreak_expert.calls - tiebreak_before,
        },
        ties=ties,
        cycles_before_prune=cycles,
        isolated=frozenset(isolated_nodes(MixedGraph.from_matrix(final_dag), variables)),
    )


def _cycle_edges(g: AdjacencyMatrix) -> list[tuple[str, str]]:
    """Edges lying on at least one directed cycle: u -> v with v reaching u."""
    reach = g.bits.copy()
    while True:
        nxt = reach | (reach @ reach)
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    names = g.vars.names
    out = []
    for i, j in zip(*np.nonzero(g.bits)):
        if reach[j, i]:
            out.append((names[i], names[j]))
    return out


def entropy_prune(
    graph: AdjacencyMatrix, beliefs: Mapping[tuple[str, str], EdgeBelief]
) -> AdjacencyMatrix:
    """Remove low-confidence (high-entropy) edges until no cycle remains.

    Each round considers only edges currently on a cycle, drops every one
    with entropy strictly above the round's mean, and falls back to the
    single highest-entropy edge (lexicographically larger (src, dst) wins
    ties) when all cycle edges share one entropy value.  Acyclic input is
    returned unchanged.
    """

    def edge_entropy(src: str, dst: str) -> float:
        key = (src, dst) if (src, dst) in beliefs else (dst, src)
        if key not in beliefs:
            raise KeyError(f"no belief recorded for edge {src!r} -> {dst!r}")
        return beliefs[key].entropy

    current = graph
    while True:
        cyc = _cycle_edges(current)
        if not cyc:
            return current
        entropies = {edge: edge_entropy(*edge) for edge in cyc}
        mean = sum(entropies.values()) / len(entropies)
        doomed = [edge for edge in cyc if entropies[edge] > mean]
        if not doomed:
            doomed = [max(cyc, key=lambda e: (entropies[e], e))]
        bits = current.bits.copy()
        for src, dst in doomed:
            bits[current.vars.index(src), current.vars.index(dst)] = False
        current = AdjacencyMatrix(current.vars, bits)
