"""Backdoor machinery and regression-based causal effect estimation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .bn import LinearScm, SampleTable
from .errors import MissingColumnError, SingularDesignError
from .graph import AdjacencyMatrix, TopologicalOrder, topological_order_of

__all__ = [
    "AdjustmentSet",
    "AceEstimate",
    "d_separated",
    "is_valid_backdoor",
    "order_adjustment_set",
    "minimal_backdoor",
    "ace_adjusted",
    "epsilon_ace",
    "scm_true_ace",
]


@dataclass(frozen=True)
class AdjustmentSet:
    """A candidate adjustment set for a treatment (and optionally a target)."""

    treatment: str
    members: frozenset[str]
    target: str | None = None
    source: str = "order-predecessors"

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        if self.treatment in self.members:
            raise ValueError("treatment cannot be part of the adjustment set")
        if self.target is not None and self.target in self.members:
            raise ValueError("target cannot be part of the adjustment set")


@dataclass(frozen=True)
class AceEstimate:
    value: float
    treatment_levels: tuple[float, float]
    stderr: float
    n_used: int
    estimator: str = "adjustment-regression"

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("estimate must be finite")


def _ancestor_mask(bits: np.ndarray, seeds: Iterable[int]) -> np.ndarray:
    """Boolean mask of seeds plus all their ancestors."""
    n = bits.shape[0]
    mask = np.zeros(n, dtype=bool)
    stack = list(seeds)
    for s in stack:
        mask[s] = True
    while stack:
        node = stack.pop()
        for parent in np.nonzero(bits[:, node])[0]:
            if not mask[parent]:
                mask[parent] = True
                stack.append(int(parent))
    return mask


def d_separated(g: AdjacencyMatrix, x: str, y: str, z: Iterable[str] = ()) -> bool:
    """Exact d-separation test via the moralized ancestral graph.

    Conditioning on an endpoint (x or y inside ``z``) counts as separated,
    matching the reachability semantics of the moral-graph construction.
    """
    if x == y:
        raise ValueError("x and y must differ")
    names = g.vars
    xi, yi = names.index(x), names.index(y)
    zi = {names.index(v) for v in z}
    if xi in zi or yi in zi:
        return True
    keep = _ancestor_mask(g.bits, [xi, yi, *zi])
    sub = g.bits & keep[:, None] & keep[None, :]
    # Moralize: connect co-parents, drop direction.
    moral = sub | sub.T | ((sub @ sub.T) & keep[:, None] & keep[None, :])
    np.fill_diagonal(moral, False)
    # Remove conditioned nodes and look for an x..y path.
    alive = keep.copy()
    for v in zi:
        alive[v] = False
    frontier = [xi]
    seen = {xi}
    while frontier:
        node = frontier.pop()
        for nxt in np.nonzero(moral[node])[0]:
            nxt = int(nxt)
            if not alive[nxt] or nxt in seen:
                continue
            if nxt == yi:
                return False
            seen.add(nxt)
            frontier.append(nxt)
    return True


def _descendants(g: AdjacencyMatrix, node: str) -> set[str]:
    names = g.vars
    start = names.index(node)
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for nxt in np.nonzero(g.bits[cur])[0]:
            nxt = int(nxt)
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    seen.discard(start)
    return {names.names[i] for i in seen}


def is_valid_backdoor(
    g: AdjacencyMatrix, treatment: str, target: str, z: Iterable[str]
) -> bool:
    """Check both backdoor conditions exactly.

    (i) no member of ``z`` is a descendant of the treatment, and (ii) ``z``
    d-separates treatment and target in the graph with the treatment's
    outgoing edges removed (which blocks exactly the paths with an arrow
    into the treatment).
    """
    z = set(z)
    if treatment == target:
        raise ValueError("treatment and target must differ")
    if treatment in z:
        return False
    if z & _descendants(g, treatment):
        return False
    bits = g.bits.copy()
    bits[g.vars.index(treatment), :] = False
    stripped = AdjacencyMatrix(g.vars, bits)
    return d_separated(stripped, treatment, target, z)


def order_adjustment_set(order: TopologicalOrder, treatment: str) -> AdjustmentSet:
    """All strictly preceding ranked nodes; unranked nodes are excluded."""
    return AdjustmentSet(
        treatment=treatment,
        members=frozenset(order.predecessors(treatment)),
        source="order-predecessors",
    )


def minimal_backdoor(g: AdjacencyMatrix, treatment: str, target: str) -> AdjustmentSet:
    """A minimal valid backdoor set, shrunk greedily from the parents.

    The treatment's parents always satisfy the backdoor criterion in a DAG
    without latent confounders, so greedy removal terminates at a set from
    which no single member can be dropped.
    """
    members = set(g.parents(treatment))
    if not is_valid_backdoor(g, treatment, target, members):
        raise ValueError("parent set unexpectedly fails the backdoor criterion")
    for candidate in sorted(members):
        trial = members - {candidate}
        if is_valid_backdoor(g, treatment, target, trial):
            members = trial
    return AdjustmentSet(
        treatment=treatment,
        members=frozenset(members),
        target=target,
        source="minimal-backdoor",
    )


def ace_adjusted(
    data: SampleTable,
    treatment: str,
    target: str,
    z: Iterable[str],
    x: float,
    x_star: float,
) -> AceEstimate:
    """Average causal effect by OLS adjustment.

    Fits target ~ treatment + z and scales the treatment coefficient by
    (x - x_star).  Discrete state indices are used as numeric codes.
    """
    z = sorted(set(z))
    if treatment == target:
        raise ValueError("treatment and target must differ")
    if treatment in z or target in z:
        raise ValueError("treatment and target cannot appear in the adjustment set")
    if x == x_star:
        raise ValueError("treatment levels must differ")
    for column in (treatment, target, *z):
        if column not in data.columns:
            raise MissingColumnError(f"column {column!r} not in the sample table")
    n = data.n_rows
    design = np.column_stack(
        [np.ones(n), data.column(treatment).astype(float)]
        + [data.column(c).astype(float) for c in z]
    )
    response = data.column(target).astype(float)
    p = design.shape[1]
    gram = design.T @ design
    if np.linalg.matrix_rank(gram) < p:
        raise SingularDesignError("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(design, response, rcond=None)
    residuals = response - design @ coef
    dof = max(n - p, 1)
    sigma2 = float(residuals @ residuals) / dof
    cov = sigma2 * np.linalg.inv(gram)
    scale = x - x_star
    return AceEstimate(
        value=float(coef[1]) * scale,
        treatment_levels=(float(x), float(x_star)),
        stderr=float(np.sqrt(max(cov[1, 1], 0.0))) * abs(scale),
        n_used=n,
    )


def epsilon_ace(estimate: AceEstimate | float, truth_value: float) -> float:
    """Absolute error of an effect estimate against the ground truth."""
    value = estimate.value if isinstance(estimate, AceEstimate) else float(estimate)
    return abs(value - truth_value)


def scm_true_ace(
    scm: LinearScm, treatment: str, target: str, x: float = 1.0, x_star: float = 0.0
) -> float:
    """Closed-form ACE of a linear SCM: path-coefficient sum times (x - x*)."""
    order = topological_order_of(scm.structure())
    unit = {treatment: 1.0}
    for node in order.names_in_order():
        if node == treatment:
            continue
        unit[node] = sum(
            scm.coeff[(p, node)] * unit.get(p, 0.0) for p in scm.parents[node]
        )
    return unit.get(target, 0.0) * (x - x_star)
