"""Expert backends answering pairwise and tuple causal queries.

All backends share one protocol: :meth:`Expert.answer_pair` returns a
:class:`PairVerdict` and :meth:`Expert.answer_tuple` returns an acyclic
:class:`TupleVerdict` over the queried nodes.  Verdicts are deterministic
given the backend's configuration (seed, transcript), so identical queries
always produce identical answers regardless of call order or concurrency.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import AdjacencyMatrix

__all__ = [
    "Choice",
    "PairVerdict",
    "TupleVerdict",
    "ExpertQuery",
    "Expert",
    "PerfectExpert",
    "EpsilonExpertConfig",
    "EpsilonExpert",
    "ScriptedExpert",
    "perfect_pairwise",
    "epsilon_pairwise",
    "epsilon_tuple",
    "pair_sequence",
]


class Choice(Enum):
    """The three answers to "does the first node cause the second?"."""

    FORWARD = "A"
    BACKWARD = "B"
    NO_EDGE = "C"

    def flipped(self) -> "Choice":
        if self is Choice.FORWARD:
            return Choice.BACKWARD
        if self is Choice.BACKWARD:
            return Choice.FORWARD
        return self


@dataclass(frozen=True)
class PairVerdict:
    choice: Choice
    rationale: str = ""


@dataclass(frozen=True)
class TupleVerdict:
    """A directed edge set over the queried nodes; always acyclic."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    rationale: str = ""
    repaired: bool = False

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(self.edges))
        known = set(self.nodes)
        for src, dst in self.edges:
            if src not in known or dst not in known:
                raise ValueError(f"edge {src!r} -> {dst!r} leaves the queried nodes")
        if _has_cycle(self.nodes, self.edges):
            raise ValueError("tuple verdict contains a directed cycle")

    def pair_choice(self, a: str, b: str) -> Choice:
        """The verdict's choice for the pair, oriented as (a, b)."""
        if (a, b) in self.edges:
            return Choice.FORWARD
        if (b, a) in self.edges:
            return Choice.BACKWARD
        return Choice.NO_EDGE


def _has_cycle(nodes: Sequence[str], edges: Iterable[tuple[str, str]]) -> bool:
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    indeg = {n: 0 for n in nodes}
    for src, dst in edges:
        succ[src].append(dst)
        indeg[dst] += 1
    ready = [n for n in nodes if indeg[n] == 0]
    seen = 0
    while ready:
        node = ready.pop()
        seen += 1
        for nxt in succ[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    return seen != len(nodes)


@dataclass(frozen=True)
class ExpertQuery:
    """One question to an expert backend."""

    kind: str  # "pairwise" | "tuple"
    nodes: tuple[str, ...]
    descriptions: tuple[str, ...] = ()
    context: str = ""
    extras: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("query nodes must be distinct")
        if self.kind == "pairwise":
            if len(self.nodes) != 2:
                raise ValueError("pairwise queries take exactly two nodes")
        elif self.kind == "tuple":
            if not 3 <= len(self.nodes) <= 4:
                raise ValueError("tuple queries take three or four nodes")
        else:
            raise ValueError(f"unknown query kind {self.kind!r}")
        if self.descriptions and len(self.descriptions) != len(self.nodes):
            raise ValueError("descriptions must align with nodes")

    def fingerprint(self) -> str:
        cached = getattr(self, "_fingerprint", None)
        if cached is None:
            extras = repr(sorted((str(k), repr(v)) for k, v in self.extras.items()))
            cached = f"{self.kind}|{','.join(self.nodes)}|{extras}"
            object.__setattr__(self, "_fingerprint", cached)
        return cached


class Expert:
    """Base class keeping a thread-safe count of answered queries."""

    name = "expert"

    def __init__(self):
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._calls

    def reset_calls(self):
        with self._lock:
            self._calls = 0

    def answer_pair(self, query: ExpertQuery) -> PairVerdict:
        with self._lock:
            self._calls += 1
        return self._answer_pair(query)

    def answer_tuple(self, query: ExpertQuery) -> TupleVerdict:
        with self._lock:
            self._calls += 1
        return self._answer_tuple(query)

    def _answer_pair(self, query: ExpertQuery) -> PairVerdict:
        raise NotImplementedError

    def _answer_tuple(self, query: ExpertQuery) -> TupleVerdict:
        raise NotImplementedError


def _avoiding_path(truth: AdjacencyMatrix, src: str, dst: str, aux: frozenset[str]) -> bool:
    """True iff a directed path src -> dst exists that avoids ``aux``."""
    names = truth.vars
    blocked = {names.index(a) for a in aux if a not in (src, dst)}
    start, goal = names.index(src), names.index(dst)
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        for nxt in np.nonzero(truth.bits[node])[0]:
            nxt = int(nxt)
            if nxt == goal:
                return True
            if nxt not in seen and nxt not in blocked:
                seen.add(nxt)
                stack.append(nxt)
    return False


def perfect_pairwise(
    truth: AdjacencyMatrix, a: str, b: str, aux: Iterable[str] = ()
) -> PairVerdict:
    """Answer of an expert that knows the full graph.

    Forward if there is a direct edge a -> b or a directed path from a to b
    avoiding every auxiliary node; Backward symmetrically; otherwise no edge.
    """
    if a == b:
        raise ValueError("pair nodes must differ")
    aux = frozenset(aux) - {a, b}
    if truth.has_edge(a, b) or _avoiding_path(truth, a, b, aux):
        return PairVerdict(Choice.FORWARD)
    if truth.has_edge(b, a) or _avoiding_path(truth, b, a, aux):
        return PairVerdict(Choice.BACKWARD)
    return PairVerdict(Choice.NO_EDGE)


def pair_sequence(n_nodes: int) -> list[tuple[int, int]]:
    """Order in which tuple pairs are resolved: pairs touching the last
    (auxiliary) node first, the focal first-two pair last."""
    out = []
    for hi in range(n_nodes - 1, 0, -1):
        for lo in range(hi):
            out.append((lo, hi))
    return out


class PerfectExpert(Expert):
    """Oracle backend answering from the ground-truth DAG.

    For pairwise queries the auxiliary set is taken from the query's
    ``extras["aux"]`` (default: empty).  For tuple queries each pair is
    answered with the remaining tuple nodes as the auxiliary set, so a
    mediated path through a queried node yields "no edge".
    """

    name = "perfect"

    def __init__(self, truth: AdjacencyMatrix):
        super().__init__()
        self.truth = truth

    def _answer_pair(self, query: ExpertQuery) -> PairVerdict:
        aux = query.extras.get("aux", ())
        a, b = query.nodes
        return perfect_pairwise(self.truth, a, b, aux)

    def _answer_tuple(self, query: ExpertQuery) -> TupleVerdict:
        nodes = query.nodes
        edges = set()
        for i, j in pair_sequence(len(nodes)):
            a, b = nodes[i], nodes[j]
            aux = frozenset(nodes) - {a, b}
            verdict = perfect_pairwise(self.truth, a, b, aux)
            if verdict.choice is Choice.FORWARD:
                edges.add((a, b))
            elif verdict.choice is Choice.BACKWARD:
                edges.add((b, a))
        return TupleVerdict(nodes, frozenset(edges))


@dataclass(frozen=True)
class EpsilonExpertConfig:
    """A stochastic expert erring with probability ``epsilon`` per query."""

    epsilon: float
    seed: int
    truth: AdjacencyMatrix

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie strictly between 0 and 1")


_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    """One step of splitmix64; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class _QueryRng:
    """Cheap deterministic uniforms derived from (seed, query fingerprint)."""

    def __init__(self, seed: int, fingerprint: str):
        digest = hashlib.blake2b(
            f"{seed}|{fingerprint}".encode(), digest_size=8
        ).digest()
        self._state = int.from_bytes(digest, "big")

    def uniform(self) -> float:
        self._state, out = _splitmix64(self._state)
        return out / 2**64


_CHOICES = (Choice.FORWARD, Choice.BACKWARD, Choice.NO_EDGE)


def _draw_choice(
    rng: _QueryRng,
    true_choice: Choice,
    epsilon: float,
    forbidden: frozenset[Choice],
) -> Choice:
    """Sample a choice: correct with 1 - eps, each wrong with eps / 2,
    renormalized over the admissible choices."""
    weights = []
    for choice in _CHOICES:
        if choice in forbidden:
            weights.append(0.0)
        elif choice is true_choice:
            weights.append(1.0 - epsilon)
        else:
            weights.append(epsilon / 2.0)
    total = weights[0] + weights[1] + weights[2]
    if total <= 0:
        raise ValueError("all choices forbidden")
    u = rng.uniform() * total
    acc = 0.0
    for choice, w in zip(_CHOICES, weights):
        acc += w
        if u < acc:
            return choice
    return Choice.NO_EDGE


class EpsilonExpert(Expert):
    """Noisy oracle per the renormalizing error model.

    The true choice for a pair is the perfect expert's answer with the
    remaining queried nodes as the auxiliary set.  Tuple pairs are resolved
    in the fixed auxiliary-first sequence, and a choice that would close a
    directed cycle inside the tuple is removed before renormalizing.
    """

    name = "epsilon"

    def __init__(self, config: EpsilonExpertConfig):
        super().__init__()
        self.config = config
        self._true_cache: dict[tuple, Choice] = {}

    @classmethod
    def create(cls, truth: AdjacencyMatrix, epsilon: float, seed: int) -> "EpsilonExpert":
        return cls(EpsilonExpertConfig(epsilon, seed, truth))

    def reseeded(self, seed: int) -> "EpsilonExpert":
        """A copy with a fresh seed that shares the (seed-independent)
        true-choice cache; used by trial loops in simulations."""
        clone = EpsilonExpert(
            EpsilonExpertConfig(self.config.epsilon, seed, self.config.truth)
        )
        clone._true_cache = self._true_cache
        return clone

    def _rng(self, query: ExpertQuery) -> _QueryRng:
        return _QueryRng(self.config.seed, query.fingerprint())

    def _true_choice(self, a: str, b: str, aux: frozenset[str]) -> Choice:
        key = (a, b, aux)
        hit = self._true_cache.get(key)
        if hit is None:
            hit = perfect_pairwise(self.config.truth, a, b, aux).choice
            self._true_cache[key] = hit
        return hit

    def _answer_pair(self, query: ExpertQuery) -> PairVerdict:
        a, b = query.nodes
        aux = frozenset(query.extras.get("aux", ()))
        forbidden = frozenset(query.extras.get("forbidden", ()))
        rng = self._rng(query)
        true = self._true_choice(a, b, aux)
        return PairVerdict(_draw_choice(rng, true, self.config.epsilon, forbidden))

    def _answer_tuple(self, query: ExpertQuery) -> TupleVerdict:
        nodes = query.nodes
        rng = self._rng(query)
        edges: set[tuple[str, str]] = set()

        def reachable(src: str, dst: str) -> bool:
            stack, seen = [src], {src}
            while stack:
                cur = stack.pop()
                for s, d in edges:
                    if s == cur and d not in seen:
                        if d == dst:
                            return True
                        seen.add(d)
                        stack.append(d)
            return False

        for i, j in pair_sequence(len(nodes)):
            a, b = nodes[i], nodes[j]
            aux = frozenset(nodes) - {a, b}
            forbidden = set()
            if reachable(b, a):
                forbidden.add(Choice.FORWARD)  # a -> b would close a cycle
            if reachable(a, b):
                forbidden.add(Choice.BACKWARD)
            true = self._true_choice(a, b, aux)
            choice = _draw_choice(rng, true, self.config.epsilon, frozenset(forbidden))
            if choice is Choice.FORWARD:
                edges.add((a, b))
            elif choice is Choice.BACKWARD:
                edges.add((b, a))
        return TupleVerdict(nodes, frozenset(edges))


def epsilon_pairwise(
    config: EpsilonExpertConfig,
    a: str,
    b: str,
    forbidden: Iterable[Choice] = (),
    aux: Iterable[str] = (),
) -> PairVerdict:
    """One noisy pairwise answer with an optional forbidden choice set."""
    expert = EpsilonExpert(config)
    query = ExpertQuery(
        "pairwise",
        (a, b),
        extras={"forbidden": tuple(forbidden), "aux": tuple(aux)},
    )
    return expert.answer_pair(query)


def epsilon_tuple(config: EpsilonExpertConfig, nodes: Sequence[str]) -> TupleVerdict:
    """One noisy tuple answer over three (or four) nodes."""
    expert = EpsilonExpert(config)
    return expert.answer_tuple(ExpertQuery("tuple", tuple(nodes)))


class ScriptedExpert(Expert):
    """Replays verdicts recorded earlier, keyed by query fingerprint.

    Used to replay annotation-session transcripts and recorded LLM runs;
    a pipeline fed with a scripted expert reproduces the original run
    verdict for verdict.
    """

    name = "scripted"

    def __init__(self, answers: Mapping[str, PairVerdict | TupleVerdict]):
        super().__init__()
        self._answers = dict(answers)

    @classmethod
    def from_records(
        cls, records: Iterable[tuple[ExpertQuery, PairVerdict | TupleVerdict]]
    ) -> "ScriptedExpert":
        return cls({query.fingerprint(): verdict for query, verdict in records})

    def _lookup(self, query: ExpertQuery):
        key = query.fingerprint()
        if key not in self._answers:
            raise KeyError(f"no scripted answer for query {key!r}")
        return self._answers[key]

    def _answer_pair(self, query: ExpertQuery) -> PairVerdict:
        verdict = self._lookup(query)
        if not isinstance(verdict, PairVerdict):
            raise TypeError("scripted answer is not a pairwise verdict")
        return verdict

    def _answer_tuple(self, query: ExpertQuery) -> TupleVerdict:
        verdict = self._lookup(query)
        if not isinstance(verdict, TupleVerdict):
            raise TypeError("scripted answer is not a tuple verdict")
        return verdict
