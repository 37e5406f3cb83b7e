"""Discrete Bayesian networks, linear-Gaussian SCMs, and bundled benchmarks.

The BN document format is a small structured text format:

    bn <name>
    context: <one line of free text>
    node <name> {
      description: <text>;
      states: s1, s2;
      parents: p1, p2;
      cpt:
        <one row per parent-state combination, probabilities space separated>
    }

CPT rows are laid out in row-major parent order: the first listed parent
varies slowest.  Linear SCM documents use the same block shape with
``coeff`` and ``noise`` fields instead of states and tables.
"""

from __future__ import annotations

import importlib.resources
import io
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    CptRowSumError,
    CyclicGraphError,
    CyclicParentsError,
    ParseError,
    UnknownGraphError,
)
from .graph import AdjacencyMatrix, VariableSet, topological_order_of

__all__ = [
    "BayesNet",
    "LinearScm",
    "SampleTable",
    "load_bn",
    "dump_bn",
    "load_scm",
    "dump_scm",
    "forward_sample",
    "sample_linear_scm",
    "bundled_graph",
    "bundled_bn",
    "BUNDLED_GRAPHS",
]

BUNDLED_GRAPHS = ("earthquake", "cancer", "survey", "asia", "asia_m", "child")


@dataclass(frozen=True)
class SampleTable:
    """Rows of discrete state indices or reals, one column per variable."""

    columns: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[1] != len(self.columns):
            raise ValueError("data must be 2-d with one column per variable")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def n_rows(self) -> int:
        return int(self.data.shape[0])

    def column(self, name: str) -> np.ndarray:
        try:
            i = self.columns.index(name)
        except ValueError:
            raise KeyError(f"no column {name!r}") from None
        return self.data[:, i]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        is_int = np.issubdtype(self.data.dtype, np.integer)
        for row in self.data:
            if is_int:
                buf.write(",".join(str(int(v)) for v in row) + "\n")
            else:
                buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SampleTable":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ParseError("empty CSV document")
        columns = tuple(lines[0].split(","))
        rows = [ln.split(",") for ln in lines[1:]]
        try:
            data = np.array([[int(v) for v in row] for row in rows], dtype=np.int64)
        except ValueError:
            data = np.array([[float(v) for v in row] for row in rows], dtype=float)
        if data.size == 0:
            data = data.reshape(0, len(columns))
        return cls(columns, data)


def _parse_blocks(text: str, kind: str) -> tuple[str, str, list[tuple[str, dict[str, str]]]]:
    """Shared parser for the BN/SCM block documents."""
    lines = text.splitlines()
    pos = 0

    def skip_blank():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1

    skip_blank()
    if pos >= len(lines) or not lines[pos].strip().startswith(kind + " "):
        raise ParseError(f"expected header '{kind} <name>'", line=pos + 1)
    name = lines[pos].strip()[len(kind):].strip()
    pos += 1
    skip_blank()
    context = ""
    if pos < len(lines) and lines[pos].strip().startswith("context:"):
        context = lines[pos].strip()[len("context:"):].strip()
        pos += 1

    body = "\n".join(lines[pos:])
    blocks: list[tuple[str, dict[str, str]]] = []
    for match in re.finditer(r"node\s+(\"[^\"]+\"|\S+)\s*\{([^}]*)\}", body):
        node = match.group(1).strip('"')
        fields: dict[str, str] = {}
        for chunk in match.group(2).split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            if ":" not in chunk:
                raise ParseError(f"malformed field {chunk!r} in node {node!r}")
            key, value = chunk.split(":", 1)
            fields[key.strip()] = value.strip()
        blocks.append((node, fields))
    leftover = re.sub(r"node\s+(\"[^\"]+\"|\S+)\s*\{[^}]*\}", "", body).strip()
    if leftover:
        raise ParseError(f"unparseable content: {leftover.splitlines()[0]!r}")
    if not blocks:
        raise ParseError("document declares no nodes")
    return name, context, blocks


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _check_parent_dag(names: tuple[str, ...], parents: Mapping[str, tuple[str, ...]]):
    variables = VariableSet(names)
    edges = [(p, child) for child, ps in parents.items() for p in ps]
    try:
        topological_order_of(AdjacencyMatrix.from_edges(variables, edges))
    except CyclicGraphError as exc:
        raise CyclicParentsError(f"parent structure is cyclic: {exc}") from None
    except ValueError as exc:
        raise CyclicParentsError(str(exc)) from None


@dataclass(frozen=True)
class BayesNet:
    """A discrete conditional-probability-table network."""

    name: str
    context: str
    vars: VariableSet
    parents: Mapping[str, tuple[str, ...]]
    states: Mapping[str, tuple[str, ...]]
    cpt: Mapping[str, np.ndarray]

    def __post_init__(self):
        _check_parent_dag(self.vars.names, self.parents)
        tables: dict[str, np.ndarray] = {}
        for node in self.vars:
            table = np.asarray(self.cpt[node], dtype=float)
            n_combos = 1
            for p in self.parents[node]:
                n_combos *= len(self.states[p])
            if table.shape != (n_combos, len(self.states[node])):
                raise ParseError(
                    f"node {node!r}: expected {n_combos} CPT rows of width "
                    f"{len(self.states[node])}, got {table.shape}"
                )
            bad = np.nonzero(np.abs(table.sum(axis=1) - 1.0) > 1e-9)[0]
            if bad.size:
                raise CptRowSumError(
                    f"node {node!r}: CPT row {int(bad[0])} sums to "
                    f"{table[bad[0]].sum():.6f}, expected 1"
                )
            table = table.copy()
            table.setflags(write=False)
            tables[node] = table
        object.__setattr__(self, "cpt", tables)

    def structure(self) -> AdjacencyMatrix:
        edges = [(p, child) for child, ps in self.parents.items() for p in ps]
        return AdjacencyMatrix.from_edges(self.vars, edges)

    def cardinality(self, name: str) -> int:
        return len(self.states[name])


@dataclass(frozen=True)
class LinearScm:
    """A linear-Gaussian structural causal model."""

    name: str
    vars: VariableSet
    parents: Mapping[str, tuple[str, ...]]
    coeff: Mapping[tuple[str, str], float]
    noise_std: Mapping[str, float]

    def __post_init__(self):
        _check_parent_dag(self.vars.names, self.parents)
        for node in self.vars:
            if self.noise_std[node] <= 0:
                raise ValueError(f"noise_std for {node!r} must be positive")
            for p in self.parents[node]:
                if (p, node) not in self.coeff:
                    raise ValueError(f"missing coefficient for edge {p!r} -> {node!r}")

    def structure(self) -> AdjacencyMatrix:
        edges = [(p, child) for child, ps in self.parents.items() for p in ps]
        return AdjacencyMatrix.from_edges(self.vars, edges)


def load_bn(text: str) -> BayesNet:
    name, context, blocks = _parse_blocks(text, "bn")
    names = tuple(node for node, _ in blocks)
    descriptions: dict[str, str] = {}
    parents: dict[str, tuple[str, ...]] = {}
    states: dict[str, tuple[str, ...]] = {}
    cpt: dict[str, np.ndarray] = {}
    for node, fields in blocks:
        if "states" not in fields or "cpt" not in fields:
            raise ParseError(f"node {node!r} must declare states and cpt")
        if fields.get("description"):
            descriptions[node] = fields["description"]
        states[node] = _split_list(fields["states"])
        if len(states[node]) < 2:
            raise ParseError(f"node {node!r} needs at least two states")
        parents[node] = _split_list(fields.get("parents", ""))
        rows = [r for r in fields["cpt"].splitlines() if r.strip()]
        try:
            table = np.array([[float(v) for v in r.split()] for r in rows], dtype=float)
        except ValueError as exc:
            raise ParseError(f"node {node!r}: bad CPT value ({exc})") from None
        cpt[node] = table
    for node in names:
        for p in parents[node]:
            if p not in states:
                raise ParseError(f"node {node!r} references unknown parent {p!r}")
    variables = VariableSet(names, descriptions)
    return BayesNet(name, context, variables, parents, states, cpt)


def dump_bn(bn: BayesNet) -> str:
    out = [f"bn {bn.name}"]
    if bn.context:
        out.append(f"context: {bn.context}")
    out.append("")
    for node in bn.vars:
        out.append(f"node {node} {{")
        desc = bn.vars.description(node)
        if desc:
            out.append(f"  description: {desc};")
        out.append(f"  states: {', '.join(bn.states[node])};")
        out.append(f"  parents: {', '.join(bn.parents[node])};")
        out.append("  cpt:")
        for row in bn.cpt[node]:
            out.append("    " + " ".join(f"{v:.6f}" for v in row))
        out.append("}")
        out.append("")
    return "\n".join(out)


def load_scm(text: str) -> LinearScm:
    name, _context, blocks = _parse_blocks(text, "scm")
    names = tuple(node for node, _ in blocks)
    parents: dict[str, tuple[str, ...]] = {}
    coeff: dict[tuple[str, str], float] = {}
    noise: dict[str, float] = {}
    for node, fields in blocks:
        parents[node] = _split_list(fields.get("parents", ""))
        noise[node] = float(fields.get("noise", "1.0"))
        for item in _split_list(fields.get("coeff", "")):
            if ":" not in item:
                raise ParseError(f"node {node!r}: coeff entries look like 'parent:value'")
            parent, value = item.rsplit(":", 1)
            coeff[(parent.strip(), node)] = float(value)
    variables = VariableSet(names)
    return LinearScm(name, variables, parents, coeff, noise)


def dump_scm(scm: LinearScm) -> str:
    out = [f"scm {scm.name}", ""]
    for node in scm.vars:
        out.append(f"node {node} {{")
        out.append(f"  parents: {', '.join(scm.parents[node])};")
        if scm.parents[node]:
            pairs = ", ".join(f"{p}:{scm.coeff[(p, node)]!r}" for p in scm.parents[node])
            out.append(f"  coeff: {pairs};")
        out.append(f"  noise: {scm.noise_std[node]!r};")
        out.append("}")
        out.append("")
    return "\n".join(out)


def _ancestral_schedule(vars_: VariableSet, parents: Mapping[str, tuple[str, ...]]):
    edges = [(p, child) for child, ps in parents.items() for p in ps]
    order = topological_order_of(AdjacencyMatrix.from_edges(vars_, edges))
    return order.names_in_order()


def forward_sample(bn: BayesNet, n: int, seed: int) -> SampleTable:
    """Draw ``n`` i.i.d. rows by ancestral sampling; deterministic per seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    values: dict[str, np.ndarray] = {}
    for node in _ancestral_schedule(bn.vars, bn.parents):
        table = bn.cpt[node]
        ps = bn.parents[node]
        if ps:
            combo = np.zeros(n, dtype=np.int64)
            for p in ps:
                combo = combo * bn.cardinality(p) + values[p]
            probs = table[combo]
        else:
            probs = np.broadcast_to(table[0], (n, table.shape[1]))
        cdf = np.cumsum(probs, axis=1)
        u = rng.random(n)
        values[node] = (u[:, None] > cdf).sum(axis=1).astype(np.int64)
    data = np.column_stack([values[name] for name in bn.vars])
    return SampleTable(bn.vars.names, data)


def sample_linear_scm(scm: LinearScm, n: int, seed: int) -> SampleTable:
    """Ancestral sampling of a linear-Gaussian SCM; deterministic per seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    values: dict[str, np.ndarray] = {}
    for node in _ancestral_schedule(scm.vars, scm.parents):
        x = scm.noise_std[node] * rng.standard_normal(n)
        for p in scm.parents[node]:
            x = x + scm.coeff[(p, node)] * values[p]
        values[node] = x
    data = np.column_stack([values[name] for name in scm.vars])
    return SampleTable(scm.vars.names, data)


def _data_text(filename: str) -> str:
    ref = importlib.resources.files("causalorder.data").joinpath(filename)
    return ref.read_text(encoding="utf-8")


def bundled_bn(name: str) -> BayesNet:
    """Load one of the bundled benchmark networks by name."""
    if name not in BUNDLED_GRAPHS:
        raise UnknownGraphError(
            f"unknown graph {name!r}; available: {', '.join(BUNDLED_GRAPHS)}"
        )
    return load_bn(_data_text(f"{name}.bn"))


def bundled_graph(name: str) -> AdjacencyMatrix:
    """Structure of a bundled benchmark graph (variables carried on the matrix)."""
    return bundled_bn(name).structure()
