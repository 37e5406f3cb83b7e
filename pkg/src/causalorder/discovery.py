"""Constraint-based discovery and causal-order integration.

``pc_cpdag`` runs a PC-stable adjacency search with a pluggable
conditional-independence test (chi-squared for discrete data, Fisher-z
partial correlation for continuous data, or an exact d-separation oracle
on a known graph), orients v-structures, and closes under the four Meek
rules.  ``orient_with_order`` consumes the remaining undirected edges
using an elicited causal order with an expert fallback, and
``export_level_prior`` turns a possibly cyclic expert graph into a level
prior for score-based searches.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .bn import SampleTable
from .effect import d_separated
from .errors import CyclicGraphError, DegenerateDataError, OrientationCycleError
from .experts import Choice, Expert, ExpertQuery
from .graph import (
    AdjacencyMatrix,
    LevelOrder,
    MixedGraph,
    TopologicalOrder,
    VariableSet,
    level_order_of,
    topological_order_of,
)

__all__ = [
    "CiTestConfig",
    "LevelPrior",
    "pc_cpdag",
    "orient_with_order",
    "export_level_prior",
    "write_level_prior",
]


@dataclass(frozen=True)
class CiTestConfig:
    """Configuration for the conditional-independence test used by PC."""

    alpha: float = 0.05
    test: str = "chi2"  # "chi2" | "fisherz" | "oracle"
    max_cond_size: int | None = None
    oracle_graph: AdjacencyMatrix | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.test not in ("chi2", "fisherz", "oracle"):
            raise ValueError(f"unknown CI test {self.test!r}")
        if self.test == "oracle" and self.oracle_graph is None:
            raise ValueError("oracle test needs oracle_graph")


@dataclass(frozen=True)
class LevelPrior:
    """A level order plus the prior probability given to a score-based search."""

    levels: LevelOrder
    prior_prob: float

    def __post_init__(self):
        if not 0 < self.prior_prob <= 1:
            raise ValueError("prior probability must lie in (0, 1]")


def _chi2_independent(
    data: np.ndarray, i: int, j: int, cond: tuple[int, ...], alpha: float
) -> bool:
    """Stratified chi-squared test; independence is never rejected when the
    conditioning strata leave no degrees of freedom."""
    cols = data[:, [i, j]]
    if cond:
        strata_cols = data[:, list(cond)]
        _, strata = np.unique(strata_cols, axis=0, return_inverse=True)
    else:
        strata = np.zeros(len(data), dtype=np.int64)
    stat = 0.0
    dof = 0
    for s in np.unique(strata):
        rows = cols[strata == s]
        xi, x_inv = np.unique(rows[:, 0], return_inverse=True)
        yi, y_inv = np.unique(rows[:, 1], return_inverse=True)
        if len(xi) < 2 or len(yi) < 2:
            continue
        table = np.zeros((len(xi), len(yi)))
        np.add.at(table, (x_inv, y_inv), 1)
        expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True)
        expected = expected / table.sum()
        mask = expected > 0
        stat += float(((table - expected) ** 2 / np.where(mask, expected, 1))[mask].sum())
        dof += (len(xi) - 1) * (len(yi) - 1)
    if dof == 0:
        return True
    return float(stats.chi2.sf(stat, dof)) > alpha


def _fisherz_independent(
    data: np.ndarray, i: int, j: int, cond: tuple[int, ...], alpha: float
) -> bool:
    idx = [i, j, *cond]
    sub = data[:, idx].astype(float)
    corr = np.corrcoef(sub, rowvar=False)
    try:
        prec = np.linalg.pinv(corr)
    except np.linalg.LinAlgError:
        return False
    r = -prec[0, 1] / np.sqrt(prec[0, 0] * prec[1, 1])
    r = float(np.clip(r, -0.999999, 0.999999))
    n = data.shape[0]
    dof = n - len(cond) - 3
    if dof <= 0:
        return True
    z = 0.5 * np.log((1 + r) / (1 - r))
    p = 2 * stats.norm.sf(np.sqrt(dof) * abs(z))
    return float(p) > alpha


def _make_ci_test(data: SampleTable | None, cfg: CiTestConfig, variables: VariableSet):
    if cfg.test == "oracle":
        truth = cfg.oracle_graph
        assert truth is not None
        names = variables.names

        def oracle(i: int, j: int, cond: tuple[int, ...]) -> bool:
            return d_separated(truth, names[i], names[j], [names[c] for c in cond])

        return oracle
    if data is None:
        raise ValueError(f"CI test {cfg.test!r} needs sample data")
    if data.n_rows < 1:
        raise DegenerateDataError("empty sample table")
    arr = np.asarray(data.data)
    for col, name in enumerate(data.columns):
        if np.all(arr[:, col] == arr[0, col]):
            raise DegenerateDataError(f"column {name!r} is constant")
    if cfg.test == "chi2":
        return lambda i, j, cond: _chi2_independent(arr, i, j, cond, cfg.alpha)
    return lambda i, j, cond: _fisherz_independent(arr, i, j, cond, cfg.alpha)


def _skeleton(variables: VariableSet, ci_test, max_cond_size: int | None):
    """PC-stable adjacency search: edge removals commit at the end of each
    conditioning-set-size level, so results are order independent."""
    n = len(variables)
    adjacent: dict[int, set[int]] = {i: set(range(n)) - {i} for i in range(n)}
    sepsets: dict[tuple[int, int], tuple[int, ...]] = {}
    level = 0
    limit = n - 2 if max_cond_size is None else max_cond_size
    while level <= limit:
        snapshot = {i: frozenset(neigh) for i, neigh in adjacent.items()}
        if all(len(snapshot[i]) - 1 < level for i in range(n)):
            break
        removals: list[tuple[int, int, tuple[int, ...]]] = []
        for i, j in itertools.combinations(range(n), 2):
            if j not in adjacent[i]:
                continue
            candidates: list[tuple[int, ...]] = []
            seen = set()
            for base in (snapshot[i] - {j}, snapshot[j] - {i}):
                for cond in itertools.combinations(sorted(base), level):
                    if cond not in seen:
                        seen.add(cond)
                        candidates.append(cond)
            for cond in candidates:
                if ci_test(i, j, cond):
                    removals.append((i, j, cond))
                    break
        for i, j, cond in removals:
            adjacent[i].discard(j)
            adjacent[j].discard(i)
            sepsets[(i, j)] = cond
            sepsets[(j, i)] = cond
        level += 1
    return adjacent, sepsets


def _orient_v_structures(n, adjacent, sepsets):
    """Directed marks as an n x n matrix: directed[i, j] means i -> j."""
    directed = np.zeros((n, n), dtype=bool)
    for i, k in itertools.combinations(range(n), 2):
        if k in adjacent[i]:
            continue
        sep = set(sepsets.get((i, k), ()))
        for j in sorted(adjacent[i] & adjacent[k]):
            if j in sep:
                continue
            # First committed orientation wins on conflicts.
            if not directed[j, i]:
                directed[i, j] = True
            if not directed[j, k]:
                directed[k, j] = True
    return directed


def _apply_meek(n, adjacent, directed):
    """Meek rules 1-4 to fixpoint over the undirected remainder."""

    def und(i, j):
        return j in adjacent[i] and not directed[i, j] and not directed[j, i]

    def orient(i, j):
        directed[i, j] = True

    changed = True
    while changed:
        changed = False
        for a, b in itertools.permutations(range(n), 2):
            if not und(a, b):
                continue
            # R1: c -> a, a - b, c and b nonadjacent  =>  a -> b
            fire = any(
                directed[c, a] and b not in adjacent[c]
                for c in adjacent[a]
                if c != b
            )
            # R2: a -> c -> b with a - b  =>  a -> b
            fire = fire or any(
                directed[a, c] and directed[c, b]
                for c in adjacent[a] & adjacent[b]
            )
            # R3: a - c, a - d, c -> b, d -> b, c and d nonadjacent  =>  a -> b
            if not fire:
                parents_b = [c for c in adjacent[a] & adjacent[b] if und(a, c) and directed[c, b]]
                fire = any(
                    d not in adjacent[c]
                    for c, d in itertools.combinations(parents_b, 2)
                )
            # R4: a - c, c -> d, d -> b, d adjacent to a  =>  a -> b
            if not fire:
                fire = any(
                    und(a, c) and directed[c, d] and directed[d, b]
                    for d in adjacent[a]
                    for c in adjacent[d]
                    if c != b and c in adjacent[a]
                )
            if fire:
                orient(a, b)
                changed = True
    return directed


def pc_cpdag(data: SampleTable | None, cfg: CiTestConfig,
             variables: VariableSet | None = None) -> MixedGraph:
    """PC-stable skeleton, v-structures, and Meek closure.

    For the oracle test ``data`` may be omitted; otherwise columns must
    match ``variables`` (defaults to the data's column order).
    """
    if variables is None:
        if cfg.test == "oracle" and cfg.oracle_graph is not None:
            variables = cfg.oracle_graph.vars
        elif data is not None:
            variables = VariableSet(data.columns)
        else:
            raise ValueError("need variables, data, or an oracle graph")
    if data is not None and data.columns != variables.names:
        raise ValueError("data columns do not match the variable set")
    n = len(variables)
    ci_test = _make_ci_test(data, cfg, variables)
    adjacent, sepsets = _skeleton(variables, ci_test, cfg.max_cond_size)
    directed = _orient_v_structures(n, adjacent, sepsets)
    # Drop double orientations defensively (conflicting v-structures).
    both = directed & directed.T
    directed &= ~both
    directed = _apply_meek(n, adjacent, directed)
    # The directed part of a CPDAG must stay acyclic; with inconsistent
    # finite-sample orientations we fall back to undirecting edges that
    # close a cycle, in deterministic order.
    names = variables.names
    while True:
        try:
            topological_order_of(AdjacencyMatrix(variables, directed))
            break
        except CyclicGraphError as exc:
            cycle = exc.cycle
            src = variables.index(cycle[-1])
            dst = variables.index(cycle[0])
            directed[src, dst] = False
    directed_edges = set()
    undirected_edges = set()
    for i in range(n):
        for j in adjacent[i]:
            if directed[i, j]:
                directed_edges.add((names[i], names[j]))
            elif not directed[j, i]:
                undirected_edges.add(tuple(sorted((names[i], names[j]))))
    return MixedGraph(variables, frozenset(directed_edges), frozenset(undirected_edges))


def orient_with_order(
    cpdag: MixedGraph,
    order: TopologicalOrder | None,
    fallback: Expert,
    context: str = "",
) -> AdjacencyMatrix:
    """Orient every undirected CPDAG edge by the elicited order.

    When either endpoint is unranked (or no order is given) the fallback
    expert is asked one pairwise question; a no-edge answer drops the edge.
    Directed CPDAG edges are never touched.  If the combined result is
    cyclic an :class:`OrientationCycleError` carrying the oriented graph is
    raised so the caller can decide.
    """
    edges = set(cpdag.directed)
    for a, b in sorted(cpdag.undirected):
        if order is not None and a in order and b in order:
            if order.rank[a] < order.rank[b]:
                edges.add((a, b))
            else:
                edges.add((b, a))
            continue
        query = ExpertQuery(
            "pairwise",
            (a, b),
            descriptions=(cpdag.vars.description(a), cpdag.vars.description(b)),
            context=context,
        )
        choice = fallback.answer_pair(query).choice
        if choice is Choice.FORWARD:
            edges.add((a, b))
        elif choice is Choice.BACKWARD:
            edges.add((b, a))
    result = AdjacencyMatrix.from_edges(cpdag.vars, edges)
    try:
        topological_order_of(result)
    except CyclicGraphError as exc:
        raise OrientationCycleError(
            f"order-based orientation created a cycle: {' -> '.join(exc.cycle)}",
            result,
            exc.cycle,
        ) from None
    return result


def _strongly_connected_components(g: AdjacencyMatrix) -> list[list[int]]:
    """Tarjan's algorithm, iterative; components in a deterministic order."""
    n = g.n
    succ = [np.nonzero(g.bits[i])[0].tolist() for i in range(n)]
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    components: list[list[int]] = []
    counter = itertools.count()

    def strongconnect(root: int):
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = next(counter)
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.append(member)
                    if member == node:
                        break
                components.append(sorted(comp))

    for v in range(n):
        if v not in index:
            strongconnect(v)
    return components


def export_level_prior(graph: AdjacencyMatrix, prob: float) -> LevelPrior:
    """Level prior from an expert graph that may contain cycles.

    Strongly connected components are condensed, levels are the longest
    path from a root component, and every node of a component shares the
    component's level.  On a DAG this reduces to the plain level order.
    """
    comps = _strongly_connected_components(graph)
    comp_of = {}
    for ci, comp in enumerate(comps):
        for node in comp:
            comp_of[node] = ci
    k = len(comps)
    cond = np.zeros((k, k), dtype=bool)
    for i, j in zip(*np.nonzero(graph.bits)):
        a, b = comp_of[int(i)], comp_of[int(j)]
        if a != b:
            cond[a, b] = True
    cond_vars = VariableSet(tuple(f"c{idx}" for idx in range(k)))
    cond_levels = level_order_of(AdjacencyMatrix(cond_vars, cond))
    level = {}
    for ci, comp in enumerate(comps):
        lvl = cond_levels.level[f"c{ci}"]
        for node in comp:
            level[graph.vars.names[node]] = lvl
    return LevelPrior(LevelOrder(level), prob)


def write_level_prior(prior: LevelPrior) -> str:
    """Prior file: ``prob <p>`` then one ``level <k>: names...`` line per level."""
    lines = [f"prob {prior.prior_prob:g}"]
    for k, names in enumerate(prior.levels.groups()):
        lines.append(f"level {k}: " + " ".join(names))
    return "\n".join(lines) + "\n"
