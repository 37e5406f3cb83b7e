"""Chat-endpoint expert backend: template rendering, parsing, transcripts.

The endpoint speaks a chat-completion style JSON API.  Credentials and
addressing come from the environment (EXPERT_API_BASE, EXPERT_API_KEY,
EXPERT_MODEL) and are never written to manifests or transcripts.  Every
exchange can be recorded to a JSONL transcript and replayed through
:class:`ReplayTransport`, which makes recorded runs fully deterministic.
"""

from __future__ import annotations

import ast
import hashlib
import importlib.resources
import json
import os
import re
import threading
from dataclasses import dataclass
from typing import Callable, Iterable

import requests

from .errors import EndpointError, UnparseableAnswerError
from .experts import Choice, Expert, ExpertQuery, PairVerdict, TupleVerdict

__all__ = [
    "EndpointConfig",
    "HttpTransport",
    "ReplayTransport",
    "LlmExpert",
    "llm_answer",
    "render_template",
    "load_template",
    "prompt_key",
]

_ANSWER_TAG = re.compile(r"<Answer>\s*(.*?)\s*</Answer>", re.DOTALL)

_TEMPLATES = {
    ("pairwise", "base"): "pairwise_base.txt",
    ("pairwise", "cot"): "pairwise_cot.txt",
    ("pairwise", "iterative"): "pairwise_iterative.txt",
    ("pairwise", "one_hop"): "pairwise_one_hop.txt",
    ("tuple", "base"): "tuple.txt",
}


def load_template(kind: str, strategy: str) -> str:
    try:
        filename = _TEMPLATES[(kind, strategy if kind == "pairwise" else "base")]
    except KeyError:
        raise ValueError(f"no template for kind={kind!r} strategy={strategy!r}") from None
    ref = importlib.resources.files("causalorder.templates").joinpath(filename)
    return ref.read_text(encoding="utf-8")


def _quoted_list(items: Iterable[str]) -> str:
    return "[" + ", ".join(f"'{item}'" for item in items) + "]"


def _edge_list(edges: Iterable[tuple[str, str]]) -> str:
    rendered = ", ".join(f"('{a}','{b}')" for a, b in edges)
    return "[" + rendered + "]" if rendered else "[]"


def render_template(query: ExpertQuery, strategy: str = "base") -> str:
    """Fill the strategy's template with the query's nodes and context."""
    template = load_template(query.kind, strategy)
    if query.kind == "pairwise":
        x, y = (f"'{n}'" for n in query.nodes)
        fields = {
            "X": x,
            "Y": y,
            "context": query.context or "modeling the given variables",
            "nodes": _quoted_list(query.extras.get("all_nodes", query.nodes)),
            "directed_edges": _edge_list(query.extras.get("directed_edges", ())),
            "x_edges": _edge_list(query.extras.get("x_edges", ())),
            "y_edges": _edge_list(query.extras.get("y_edges", ())),
        }
    else:
        descriptions = query.descriptions or tuple("" for _ in query.nodes)
        fields = {
            "context": query.context or "model the given variables",
            "nodes": _quoted_list(query.nodes),
            "descriptions": "[" + ", ".join(f"({d})" for d in descriptions) + "]",
        }
    return template.format(**fields)


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode()).hexdigest()


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    api_key: str = ""
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 2
    max_in_flight: int = 4

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        base_url = os.environ.get("EXPERT_API_BASE", "")
        if not base_url:
            raise EndpointError("EXPERT_API_BASE is not set")
        return cls(
            base_url=base_url,
            model=os.environ.get("EXPERT_MODEL", ""),
            api_key=os.environ.get("EXPERT_API_KEY", ""),
            **overrides,
        )


class HttpTransport:
    """POSTs a single-turn chat request and returns the reply text."""

    def __init__(self, config: EndpointConfig):
        self.config = config

    def __call__(self, prompt: str) -> str:
        cfg = self.config
        headers = {"Content-Type": "application/json"}
        if cfg.api_key:
            headers["Authorization"] = f"Bearer {cfg.api_key}"
        payload = {
            "model": cfg.model,
            "temperature": cfg.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            response = requests.post(
                cfg.base_url.rstrip("/") + "/chat/completions",
                json=payload,
                headers=headers,
                timeout=cfg.timeout,
            )
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except requests.RequestException as exc:
            raise EndpointError(f"endpoint request failed: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise EndpointError(f"malformed endpoint response: {exc}") from exc


class ReplayTransport:
    """Serves responses from a recorded JSONL transcript, keyed by prompt."""

    def __init__(self, records: Iterable[dict]):
        self._by_key: dict[str, list[str]] = {}
        for record in records:
            key = record.get("prompt_key") or prompt_key(record["prompt"])
            self._by_key.setdefault(key, []).append(record["raw_response"])
        self._served: dict[str, int] = {}

    @classmethod
    def from_jsonl(cls, text: str) -> "ReplayTransport":
        return cls(json.loads(line) for line in text.splitlines() if line.strip())

    def __call__(self, prompt: str) -> str:
        key = prompt_key(prompt)
        responses = self._by_key.get(key)
        if not responses:
            raise EndpointError("no recorded response for this prompt")
        # Repeated identical prompts (retries) replay in recorded order,
        # sticking to the last response once exhausted.
        i = self._served.get(key, 0)
        self._served[key] = i + 1
        return responses[min(i, len(responses) - 1)]


def _parse_pair_answer(raw: str) -> Choice:
    matches = _ANSWER_TAG.findall(raw)
    for match in reversed(matches):
        token = match.strip().strip(".")
        if token in ("A", "B", "C"):
            return Choice(token)
    raise UnparseableAnswerError("no A/B/C answer tag in response", raw=raw)


def _parse_tuple_answer(raw: str, nodes: tuple[str, ...]):
    matches = _ANSWER_TAG.findall(raw)
    if not matches:
        raise UnparseableAnswerError("no answer tag in response", raw=raw)
    text = matches[-1].replace("‘", "'").replace("’", "'")
    text = text.replace("“", '"').replace("”", '"')
    try:
        parsed = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        raise UnparseableAnswerError(f"cannot parse edge list {text!r}", raw=raw)
    if not isinstance(parsed, (list, tuple)):
        raise UnparseableAnswerError(f"expected a list of edges, got {text!r}", raw=raw)
    known = set(nodes)
    edges: list[tuple[str, str]] = []
    for item in parsed:
        if isinstance(item, str):  # ('C') collapses to a bare isolated node
            name = item
            if name not in known:
                raise UnparseableAnswerError(f"unknown node {name!r}", raw=raw)
        elif isinstance(item, tuple) and len(item) == 1:
            if item[0] not in known:
                raise UnparseableAnswerError(f"unknown node {item[0]!r}", raw=raw)
        elif isinstance(item, tuple) and len(item) == 2:
            src, dst = item
            if src not in known or dst not in known:
                raise UnparseableAnswerError(f"unknown edge {item!r}", raw=raw)
            if src != dst:
                edges.append((str(src), str(dst)))
        else:
            raise UnparseableAnswerError(f"bad edge entry {item!r}", raw=raw)
    return edges


def _acyclic(nodes: tuple[str, ...], edges: list[tuple[str, str]]) -> bool:
    try:
        TupleVerdict(nodes, frozenset(edges))
        return True
    except ValueError:
        return False


class LlmExpert(Expert):
    """Expert backed by a chat endpoint (or a recorded transcript).

    Parse failures are retried up to the configured count.  Tuple answers
    that stay cyclic after one retry are repaired by dropping last-listed
    edges until acyclic; the verdict is marked repaired and the exchange is
    kept in the transcript either way.
    """

    name = "llm"

    def __init__(
        self,
        config: EndpointConfig,
        strategy: str = "base",
        transport: Callable[[str], str] | None = None,
        transcript_path: str | None = None,
    ):
        super().__init__()
        self.config = config
        self.strategy = strategy
        self.transport = transport if transport is not None else HttpTransport(config)
        self.transcript: list[dict] = []
        self._transcript_path = transcript_path
        self._transcript_lock = threading.Lock()
        self._gate = threading.Semaphore(max(1, config.max_in_flight))

    def _exchange(self, prompt: str) -> str:
        with self._gate:
            return self.transport(prompt)

    def _record(self, query: ExpertQuery, prompt: str, raw: str, parsed) -> None:
        record = {
            "query": query.fingerprint(),
            "prompt_key": prompt_key(prompt),
            "prompt": prompt,
            "raw_response": raw,
            "parsed": parsed,
        }
        with self._transcript_lock:
            self.transcript.append(record)
            if self._transcript_path:
                with open(self._transcript_path, "a", encoding="utf-8") as sink:
                    sink.write(json.dumps(record, sort_keys=True) + "\n")

    def _answer_pair(self, query: ExpertQuery) -> PairVerdict:
        prompt = render_template(query, self.strategy)
        last: UnparseableAnswerError | None = None
        for _ in range(self.config.max_retries + 1):
            raw = self._exchange(prompt)
            try:
                choice = _parse_pair_answer(raw)
            except UnparseableAnswerError as exc:
                last = exc
                continue
            self._record(query, prompt, raw, choice.value)
            return PairVerdict(choice, rationale=raw)
        assert last is not None
        self._record(query, prompt, last.raw, None)
        raise last

    def _answer_tuple(self, query: ExpertQuery) -> TupleVerdict:
        prompt = render_template(query, "base")
        last_error: UnparseableAnswerError | None = None
        edges: list[tuple[str, str]] | None = None
        for _ in range(self.config.max_retries + 1):
            raw = self._exchange(prompt)
            try:
                candidate = _parse_tuple_answer(raw, query.nodes)
            except UnparseableAnswerError as exc:
                last_error = exc
                continue
            edges = candidate
            if _acyclic(query.nodes, edges):
                self._record(query, prompt, raw, sorted(edges))
                return TupleVerdict(query.nodes, frozenset(edges), rationale=raw)
            # One more attempt before repairing a cyclic answer.
            raw = self._exchange(prompt)
            try:
                candidate = _parse_tuple_answer(raw, query.nodes)
                edges = candidate
            except UnparseableAnswerError:
                pass
            break
        if edges is None:
            assert last_error is not None
            self._record(query, prompt, last_error.raw, None)
            raise last_error
        repaired = False
        while not _acyclic(query.nodes, edges):
            edges = edges[:-1]  # drop the lowest-confidence (last listed) edge
            repaired = True
        self._record(
            query,
            prompt,
            raw,
            {"edges": sorted(edges), "repaired": repaired},
        )
        return TupleVerdict(query.nodes, frozenset(edges), rationale=raw, repaired=repaired)


def llm_answer(
    query: ExpertQuery,
    config: EndpointConfig,
    strategy: str = "base",
    transport: Callable[[str], str] | None = None,
) -> PairVerdict | TupleVerdict:
    """One-shot convenience wrapper over :class:`LlmExpert`."""
    expert = LlmExpert(config, strategy=strategy, transport=transport)
    if query.kind == "pairwise":
        return expert.answer_pair(query)
    return expert.answer_tuple(query)
