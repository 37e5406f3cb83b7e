"""Independent brute-force oracles used to freeze expected test values.

Everything here is deliberately naive (path enumeration, exhaustive
search, variable elimination) and shares no code with the implementations
under test.
"""

from __future__ import annotations

import itertools

import numpy as np

from causalorder.bn import BayesNet
from causalorder.graph import AdjacencyMatrix, VariableSet


def all_directed_paths(g: AdjacencyMatrix, src: str, dst: str) -> list[list[str]]:
    names = g.vars.names
    out: list[list[str]] = []

    def walk(path: list[str]):
        node = path[-1]
        if node == dst:
            out.append(list(path))
            return
        i = g.vars.index(node)
        for j in np.nonzero(g.bits[i])[0]:
            nxt = names[int(j)]
            if nxt not in path:
                path.append(nxt)
                walk(path)
                path.pop()

    walk([src])
    return out


def brute_closure_edges(g: AdjacencyMatrix) -> set[tuple[str, str]]:
    out = set()
    for src in g.vars:
        for dst in g.vars:
            if src != dst and all_directed_paths(g, src, dst):
                out.add((src, dst))
    return out


def brute_level_order(g: AdjacencyMatrix) -> dict[str, int]:
    roots = [name for name in g.vars if not g.parents(name)]
    levels = {}
    for name in g.vars:
        if name in roots:
            levels[name] = 0
            continue
        longest = 0
        for root in roots:
            for path in all_directed_paths(g, root, name):
                longest = max(longest, len(path) - 1)
        levels[name] = longest
    return levels


def brute_d_separated(g: AdjacencyMatrix, x: str, y: str, z) -> bool:
    """Path-blocking definition over all undirected simple paths."""
    z = set(z)
    if x in z or y in z:
        return True
    names = g.vars.names
    n = len(names)
    idx = {name: i for i, name in enumerate(names)}
    desc = {name: set() for name in names}
    for a in names:
        for b in names:
            if a != b and all_directed_paths(g, a, b):
                desc[a].add(b)

    adj = [set() for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if g.bits[i, j]:
                adj[i].add(j)
                adj[j].add(i)

    def blocked(path: list[int]) -> bool:
        for pos in range(1, len(path) - 1):
            prev, node, nxt = path[pos - 1], path[pos], path[pos + 1]
            into_prev = bool(g.bits[prev, node])
            into_next = bool(g.bits[nxt, node])
            name = names[node]
            if into_prev and into_next:  # collider
                opened = name in z or bool(desc[name] & z)
                if not opened:
                    return True
            else:
                if name in z:
                    return True
        return False

    stack = [[idx[x]]]
    while stack:
        path = stack.pop()
        node = path[-1]
        if node == idx[y]:
            if not blocked(path):
                return False
            continue
        for nxt in adj[node]:
            if nxt not in path:
                stack.append(path + [nxt])
    return True


def exact_marginals(bn: BayesNet) -> dict[str, np.ndarray]:
    """Marginals by brute-force summation over the full joint (small nets)."""
    names = list(bn.vars.names)
    cards = [bn.cardinality(v) for v in names]
    pos = {v: i for i, v in enumerate(names)}
    marginals = {v: np.zeros(bn.cardinality(v)) for v in names}
    for assignment in itertools.product(*[range(c) for c in cards]):
        p = 1.0
        for v in names:
            combo = 0
            for parent in bn.parents[v]:
                combo = combo * bn.cardinality(parent) + assignment[pos[parent]]
            p *= bn.cpt[v][combo, assignment[pos[v]]]
        for v in names:
            marginals[v][assignment[pos[v]]] += p
    return marginals


def random_dag(rng: np.random.Generator, n: int, p: float = 0.5) -> AdjacencyMatrix:
    """Edge-probability p upper triangular under a random permutation."""
    perm = rng.permutation(n)
    bits = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                bits[perm[i], perm[j]] = True
    variables = VariableSet(tuple(f"v{i}" for i in range(n)))
    return AdjacencyMatrix(variables, bits)


def brute_cpdag(truth: AdjacencyMatrix) -> tuple[set[tuple[str, str]], set[tuple[str, str]]]:
    """CPDAG via Markov-equivalence enumeration over skeleton orientations.

    Returns (directed, undirected-normalized) edge name sets.
    """
    names = truth.vars.names
    n = len(names)
    skeleton = [
        (i, j)
        for i, j in itertools.combinations(range(n), 2)
        if truth.bits[i, j] or truth.bits[j, i]
    ]

    def v_structures(bits):
        out = set()
        for a, b in itertools.combinations(range(n), 2):
            if bits[a, b] or bits[b, a]:
                continue
            for c in range(n):
                if bits[a, c] and bits[b, c]:
                    out.add((a, b, c))
        return out

    def is_dag(bits):
        indeg = bits.sum(axis=0).astype(int)
        ready = [i for i in range(n) if indeg[i] == 0]
        seen = 0
        while ready:
            i = ready.pop()
            seen += 1
            for j in np.nonzero(bits[i])[0]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    ready.append(int(j))
        return seen == n

    target_v = v_structures(truth.bits)
    member_edges = []
    for orientation in itertools.product((0, 1), repeat=len(skeleton)):
        bits = np.zeros((n, n), dtype=bool)
        for flip, (i, j) in zip(orientation, skeleton):
            if flip:
                bits[j, i] = True
            else:
                bits[i, j] = True
        if is_dag(bits) and v_structures(bits) == target_v:
            member_edges.append({(i, j) for i, j in zip(*np.nonzero(bits))})
    directed = set.intersection(*member_edges) if member_edges else set()
    undirected = set()
    for i, j in skeleton:
        if (i, j) not in directed and (j, i) not in directed:
            undirected.add(tuple(sorted((names[i], names[j]))))
    return (
        {(names[i], names[j]) for i, j in directed},
        undirected,
    )


def exact_third_pair_error(eps: float) -> float:
    """Exact marginal error on the focal pair, enumerated from the mechanism.

    Averages over the 25 equally likely three-node ground truths and the
    nine possible answer combinations for the two auxiliary pairs.
    """
    from causalorder.sims import three_node_family

    def choice_prob(true_idx: int, answer_idx: int) -> float:
        return 1.0 - eps if answer_idx == true_idx else eps / 2.0

    total = 0.0
    graphs = three_node_family()
    for g in graphs:
        # Truths for the pair sequence (C,A), (C,B), (A,B); encode each
        # pair's relation as 0: first->second, 1: second->first, 2: none.
        def rel(a, b):
            if g.has_edge(a, b):
                return 0
            if g.has_edge(b, a):
                return 1
            return 2

        t_ca, t_cb, t_ab = rel("C", "A"), rel("C", "B"), rel("A", "B")
        for a_ca in range(3):
            for a_cb in range(3):
                w = choice_prob(t_ca, a_ca) * choice_prob(t_cb, a_cb)
                # Predicted chain C->A plus B->C forbids A->B (cycle
                # A->B->C->A); predicted A->C plus C->B forbids B->A.
                forbidden = None
                if a_ca == 0 and a_cb == 1:  # C->A and B->C
                    forbidden = 0  # A->B
                elif a_ca == 1 and a_cb == 0:  # A->C and C->B
                    forbidden = 1  # B->A
                if forbidden is None:
                    err = eps
                elif forbidden == t_ab:
                    err = 1.0
                else:
                    err = eps / (2.0 - eps)
                total += w * err
    return total / len(graphs)
