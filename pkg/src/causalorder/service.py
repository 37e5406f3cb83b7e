"""HTTP session backend that turns a live human into an expert backend.

A session wraps one pipeline run: the pipeline thread blocks on a queue of
pending queries, the HTTP API serves those queries to a browser client and
feeds validated answers back.  Accepted answers append to a JSONL
transcript so a finished (or crashed) session can be replayed through a
scripted expert and must reproduce the pipeline result exactly.
"""

from __future__ import annotations

import itertools
import json
import os
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .bn import BUNDLED_GRAPHS, bundled_bn
from .elicitation import ElicitationReport, pairwise_pipeline, triplet_pipeline
from .errors import AnswerTimeoutError, SessionClosedError
from .experts import (
    Choice,
    Expert,
    ExpertQuery,
    PairVerdict,
    PerfectExpert,
    ScriptedExpert,
    TupleVerdict,
)

__all__ = ["SessionStore", "HumanExpert", "create_app", "replay_transcript"]


def _cycle_witness(nodes: tuple[str, ...], edges: list[tuple[str, str]]) -> list[str]:
    """One directed cycle among the submitted edges, as a node list."""
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for src, dst in edges:
        succ[src].append(dst)

    for start in nodes:
        stack = [(start, [start])]
        while stack:
            node, path = stack.pop()
            for nxt in succ[node]:
                if nxt == start:
                    return path
                if nxt not in path:
                    stack.append((nxt, path + [nxt]))
    return []


@dataclass
class PendingQuery:
    query_id: str
    query: ExpertQuery
    event: threading.Event = field(default_factory=threading.Event)
    verdict: PairVerdict | TupleVerdict | None = None

    def payload(self) -> dict:
        return {
            "query_id": self.query_id,
            "kind": self.query.kind,
            "nodes": list(self.query.nodes),
            "descriptions": list(self.query.descriptions),
            "context": self.query.context,
            "is_tiebreak": bool(self.query.extras.get("tiebreak", False)),
        }


class Session:
    """State of one annotation run; mutation is serialized by a lock."""

    def __init__(self, session_id: str, method: str, graph: str, total: int,
                 answer_timeout: float, transcript_path: str | None):
        self.id = session_id
        self.method = method
        self.graph = graph
        self.status = "open"
        self.created = time.time()
        self.answer_timeout = answer_timeout
        self.total_queries = total
        self.ties = 0
        self.lock = threading.Lock()
        self.pending: deque[PendingQuery] = deque()
        self.by_id: dict[str, PendingQuery] = {}
        self.answered: dict[str, dict] = {}
        self.records: list[dict] = []
        self.report: ElicitationReport | None = None
        self.error: str | None = None
        self.transcript_path = transcript_path
        self._ids = itertools.count(1)

    def next_query_id(self) -> str:
        return f"q{next(self._ids)}"

    def append_record(self, record: dict) -> None:
        self.records.append(record)
        if self.transcript_path:
            with open(self.transcript_path, "a", encoding="utf-8") as sink:
                sink.write(json.dumps(record, sort_keys=True) + "\n")


class HumanExpert(Expert):
    """Expert that enqueues queries for a human and blocks until answered."""

    name = "human"

    def __init__(self, session: Session):
        super().__init__()
        self.session = session

    def _wait(self, query: ExpertQuery) -> PairVerdict | TupleVerdict:
        session = self.session
        with session.lock:
            if session.status != "open":
                raise SessionClosedError("annotation session is closed")
            pending = PendingQuery(session.next_query_id(), query)
            if query.extras.get("tiebreak"):
                session.ties += 1
                session.total_queries += 1
            session.pending.append(pending)
            session.by_id[pending.query_id] = pending
        if not pending.event.wait(timeout=session.answer_timeout):
            raise AnswerTimeoutError(
                f"no answer for {pending.query_id} within {session.answer_timeout}s"
            )
        if pending.verdict is None:
            raise SessionClosedError("annotation session closed while waiting")
        return pending.verdict

    def _answer_pair(self, query: ExpertQuery) -> PairVerdict:
        verdict = self._wait(query)
        if not isinstance(verdict, PairVerdict):
            raise TypeError("expected a pairwise verdict")
        return verdict

    def _answer_tuple(self, query: ExpertQuery) -> TupleVerdict:
        verdict = self._wait(query)
        if not isinstance(verdict, TupleVerdict):
            raise TypeError("expected a tuple verdict")
        return verdict


class _TranscriptFirstExpert(Expert):
    """Serves recorded answers by query fingerprint, deferring anything new
    to the human queue; this is how a resumed session skips work already
    done before a crash."""

    name = "human"

    def __init__(self, recorded: ScriptedExpert, human: "HumanExpert", session: Session):
        super().__init__()
        self._recorded = recorded
        self._human = human
        self._session = session

    def _replayed(self, query: ExpertQuery):
        try:
            if query.kind == "pairwise":
                verdict = self._recorded.answer_pair(query)
            else:
                verdict = self._recorded.answer_tuple(query)
        except KeyError:
            return None
        # Keep the bookkeeping consistent with a live answer.
        with self._session.lock:
            qid = self._session.next_query_id()
            self._session.answered[qid] = {"query_id": qid, "replayed": True}
            if query.extras.get("tiebreak"):
                self._session.ties += 1
                self._session.total_queries += 1
        return verdict

    def _answer_pair(self, query: ExpertQuery) -> PairVerdict:
        verdict = self._replayed(query)
        if verdict is None:
            return self._human.answer_pair(query)
        if not isinstance(verdict, PairVerdict):
            raise TypeError("recorded verdict kind mismatch")
        return verdict

    def _answer_tuple(self, query: ExpertQuery) -> TupleVerdict:
        verdict = self._replayed(query)
        if verdict is None:
            return self._human.answer_tuple(query)
        if not isinstance(verdict, TupleVerdict):
            raise TypeError("recorded verdict kind mismatch")
        return verdict


class SessionStore:
    """All live sessions plus the pipeline threads driving them."""

    def __init__(self, transcript_dir: str | None = None, answer_timeout: float = 3600.0):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.transcript_dir = transcript_dir
        self.answer_timeout = answer_timeout

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def resume(self, session_id: str, graph: str, method: str = "triplet",
               tiebreak: str = "perfect") -> Session:
        """Restart a crashed session from its transcript file.

        Recorded answers replay automatically; the human only sees the
        queries that were never answered.
        """
        if not self.transcript_dir:
            raise ValueError("store has no transcript directory")
        path = f"{self.transcript_dir}/{session_id}.jsonl"
        with open(path, encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        return self.create(graph, method=method, tiebreak=tiebreak,
                           prior_records=records)

    def create(
        self,
        graph: str,
        method: str = "triplet",
        tiebreak: str = "perfect",
        answer_timeout: float | None = None,
        prior_records: list[dict] | None = None,
    ) -> Session:
        if graph not in BUNDLED_GRAPHS:
            raise ValueError(f"unknown graph {graph!r}")
        if method not in ("pairwise", "triplet"):
            raise ValueError("method must be pairwise or triplet")
        bn = bundled_bn(graph)
        truth = bn.structure()
        n = len(truth.vars)
        if method == "pairwise":
            total = n * (n - 1) // 2
        else:
            total = n * (n - 1) * (n - 2) // 6
        session_id = uuid.uuid4().hex[:12]
        transcript_path = None
        if self.transcript_dir:
            transcript_path = f"{self.transcript_dir}/{session_id}.jsonl"
        session = Session(
            session_id,
            method,
            graph,
            total,
            answer_timeout if answer_timeout is not None else self.answer_timeout,
            transcript_path,
        )
        with self._lock:
            self._sessions[session_id] = session

        human: Expert = HumanExpert(session)
        if prior_records:
            # Seed the new transcript with the recovered answers so a
            # second crash still has the full history.
            for record in prior_records:
                session.append_record(record)
            human = _TranscriptFirstExpert(
                replay_transcript(prior_records), human, session  # type: ignore[arg-type]
            )
        if tiebreak == "human":
            tiebreak_expert: Expert = human
        else:
            tiebreak_expert = PerfectExpert(truth)

        def run():
            try:
                if method == "pairwise":
                    report = pairwise_pipeline(
                        truth.vars, human, strategy="base", context=bn.context
                    )
                else:
                    report = triplet_pipeline(
                        truth.vars, human, tiebreak_expert, context=bn.context
                    )
                with session.lock:
                    session.report = report
                    if session.status == "open":
                        session.status = "done"
            except (SessionClosedError, AnswerTimeoutError) as exc:
                with session.lock:
                    session.error = str(exc)
                    if session.status == "open":
                        session.status = "failed"
            except Exception as exc:  # surfaced through /progress
                with session.lock:
                    session.error = f"{type(exc).__name__}: {exc}"
                    session.status = "failed"

        thread = threading.Thread(target=run, name=f"session-{session_id}", daemon=True)
        session.thread = thread  # type: ignore[attr-defined]
        thread.start()
        return session

    def next_query(self, session_id: str, wait: float = 0.0) -> dict | None:
        session = self.get(session_id)
        deadline = time.time() + max(0.0, wait)
        while True:
            with session.lock:
                for pending in session.pending:
                    if not pending.event.is_set():
                        return pending.payload()
                status = session.status
            if status != "open" or time.time() >= deadline:
                return None
            time.sleep(0.02)

    def progress(self, session_id: str) -> dict:
        session = self.get(session_id)
        with session.lock:
            resolved = []
            if session.report is not None:
                for (a, b), belief in sorted(session.report.beliefs.items()):
                    resolved.append(
                        {
                            "pair": [a, b],
                            "votes": dict(belief.votes),
                            "resolved": belief.resolved.value if belief.resolved else None,
                            "resolved_by": belief.resolved_by,
                        }
                    )
            return {
                "status": session.status,
                "method": session.method,
                "graph": session.graph,
                "answered": len(session.answered),
                "total": session.total_queries,
                "ties": session.ties,
                "resolved_pairs": resolved,
                "error": session.error,
            }

    def submit(self, session_id: str, query_id: str, verdict_payload: Mapping) -> dict:
        session = self.get(session_id)
        with session.lock:
            if session.status != "open":
                raise SessionClosedError("session is closed")
            pending = session.by_id.get(query_id)
            if pending is None:
                raise KeyError(query_id)
            if query_id in session.answered:
                raise FileExistsError(query_id)  # mapped to 409 by the API layer
            query = pending.query
            if query.kind == "pairwise":
                choice = verdict_payload.get("choice")
                if choice not in ("A", "B", "C"):
                    raise ValueError("choice must be A, B or C")
                verdict: PairVerdict | TupleVerdict = PairVerdict(Choice(choice))
            else:
                raw_edges = [tuple(e) for e in verdict_payload.get("edges", [])]
                for edge in raw_edges:
                    if len(edge) != 2 or any(n not in query.nodes for n in edge):
                        raise ValueError(f"bad edge {edge!r}")
                cycle = _cycle_witness(query.nodes, raw_edges)
                if cycle:
                    raise CyclicSubmission(cycle)
                verdict = TupleVerdict(query.nodes, frozenset(raw_edges))
            record = {
                "query_id": query_id,
                "fingerprint": query.fingerprint(),
                "kind": query.kind,
                "nodes": list(query.nodes),
                "verdict": _verdict_payload(verdict),
            }
            session.answered[query_id] = record
            session.append_record(record)
            session.pending.remove(pending)
            pending.verdict = verdict
            pending.event.set()
        return {"accepted": True, "query_id": query_id}

    def close(self, session_id: str) -> dict:
        session = self.get(session_id)
        with session.lock:
            was_open = session.status == "open"
            if was_open:
                session.status = "closed"
            leftovers = list(session.pending)
            session.pending.clear()
        for pending in leftovers:
            pending.event.set()  # wake the pipeline; verdict stays None
        thread = getattr(session, "thread", None)
        if thread is not None:
            thread.join(timeout=5.0)
        with session.lock:
            report = session.report.to_json_dict() if session.report else None
            return {
                "status": session.status,
                "report": report,
                "transcript": list(session.records),
            }


class CyclicSubmission(ValueError):
    def __init__(self, cycle: list[str]):
        super().__init__("submitted triplet contains a directed cycle")
        self.cycle = cycle


def _verdict_payload(verdict: PairVerdict | TupleVerdict) -> dict:
    if isinstance(verdict, PairVerdict):
        return {"choice": verdict.choice.value}
    return {"edges": sorted(list(e) for e in verdict.edges)}


def replay_transcript(records: list[dict]) -> ScriptedExpert:
    """Rebuild a scripted expert from a session transcript."""
    answers: dict[str, PairVerdict | TupleVerdict] = {}
    for record in records:
        fingerprint = record["fingerprint"]
        if record["kind"] == "pairwise":
            answers[fingerprint] = PairVerdict(Choice(record["verdict"]["choice"]))
        else:
            answers[fingerprint] = TupleVerdict(
                tuple(record["nodes"]),
                frozenset(tuple(e) for e in record["verdict"]["edges"]),
            )
    return ScriptedExpert(answers)


class CreateSessionBody(BaseModel):
    graph: str
    method: str = "triplet"
    tiebreak: str = "perfect"
    answer_timeout: float | None = None


class AnswerBody(BaseModel):
    query_id: str
    verdict: dict


def create_app(store: SessionStore | None = None) -> FastAPI:
    store = store if store is not None else SessionStore()
    app = FastAPI(title="annotation-service")
    app.state.store = store

    # Optional bearer auth: set ANNOTATION_TOKEN to require it.
    @app.middleware("http")
    async def check_token(request, call_next):
        token = os.environ.get("ANNOTATION_TOKEN", "")
        if token:
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {token}":
                from fastapi.responses import JSONResponse

                return JSONResponse({"detail": "missing or bad token"}, status_code=401)
        return await call_next(request)

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        try:
            session = store.create(
                body.graph,
                method=body.method,
                tiebreak=body.tiebreak,
                answer_timeout=body.answer_timeout,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"id": session.id, "method": session.method, "graph": session.graph,
                "total": session.total_queries}

    @app.get("/sessions/{session_id}/next")
    def next_query(session_id: str, wait: float = 0.0):
        try:
            payload = store.next_query(session_id, wait=min(wait, 30.0))
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        return {"query": payload, "progress": store.progress(session_id)}

    @app.post("/sessions/{session_id}/answers")
    def submit_answer(session_id: str, body: AnswerBody):
        try:
            return store.submit(session_id, body.query_id, body.verdict)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session or query")
        except FileExistsError:
            raise HTTPException(status_code=409, detail="query already answered")
        except CyclicSubmission as exc:
            raise HTTPException(
                status_code=422,
                detail={"error": "cyclic", "cycle": exc.cycle},
            )
        except SessionClosedError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/sessions/{session_id}/progress")
    def progress(session_id: str):
        try:
            return store.progress(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")

    @app.post("/sessions/{session_id}/close")
    def close_session(session_id: str):
        try:
            return store.close(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")

    return app


def main():  # pragma: no cover - manual entry point
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="annotation service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8321)
    parser.add_argument("--transcripts", default=None, help="directory for JSONL transcripts")
    args = parser.parse_args()
    app = create_app(SessionStore(transcript_dir=args.transcripts))
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":  # pragma: no cover
    main()
