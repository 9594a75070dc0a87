"""HTTP service hosting a pipeline run whose oracle waits on human labels.

One session at a time. The pipeline runs on a worker thread; each annotation
batch becomes a set of open requests that block the worker until request
handlers submit every label. Handlers never touch pipeline state: they talk
to the worker through the queue backend, which owns a lock around the open
requests and the budget ledger. Submissions are idempotent by request id, so
a retried POST never double-charges.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import RunConfig
from .core import AnnotationItem, BudgetLedger, SimulatedGoldBackend
from .discovery import run_mnid
from .errors import (
    BudgetExhausted,
    DuplicateSubmission,
    MnidError,
    UnknownRequest,
)
from .evaluation import report_json
from .ingest import (
    SyntheticSpec,
    generate_synthetic,
    load_corpus,
    load_embeddings,
)


@dataclass
class AnnotationRequest:
    request_id: str
    point_id: str
    text: str
    phase: str
    cluster_id: int | None
    issued_at: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "point_id": self.point_id,
            "text": self.text,
            "phase": self.phase,
            "cluster_id": self.cluster_id,
            "issued_at": self.issued_at,
        }


class LiveQueueBackend:
    """Oracle backend that queues requests for humans and blocks the pipeline.

    The budget is charged one unit per answered request (under the lock), so
    a state snapshot always shows spend equal to answered requests plus the
    initial labeled count.
    """

    name = "live-queue"

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._counter = itertools.count(1)
        self._open: dict[str, AnnotationRequest] = {}
        self._order: list[str] = []
        self._answers: dict[str, str] = {}
        self._acks: dict[str, dict[str, Any]] = {}
        self._labels_seen: list[str] = []
        self.ledger: BudgetLedger | None = None

    # -- pipeline side ---------------------------------------------------

    def query(self, items: Sequence[AnnotationItem], ledger: BudgetLedger) -> list[str]:
        with self._cond:
            self.ledger = ledger
            batch: list[str] = []
            for item in items:
                request_id = f"r{next(self._counter):06d}"
                self._open[request_id] = AnnotationRequest(
                    request_id=request_id,
                    point_id=item.point_id,
                    text=item.text,
                    phase=item.phase,
                    cluster_id=item.cluster_id,
                    issued_at=time.time(),
                )
                self._order.append(request_id)
                batch.append(request_id)
            self._cond.notify_all()
            self._cond.wait_for(lambda: all(r in self._answers for r in batch))
            labels = [self._answers[r] for r in batch]
        return labels

    # -- handler side ----------------------------------------------------

    def submit(self, request_id: str, label: str) -> dict[str, Any]:
        with self._cond:
            if request_id in self._acks:
                ack = self._acks[request_id]
                if ack["label"] != label:
                    raise DuplicateSubmission(
                        f"request {request_id} already answered with {ack['label']!r}"
                    )
                return ack
            if request_id not in self._open:
                raise UnknownRequest(f"no open request {request_id}")
            if self.ledger is None or self.ledger.remaining < 1:
                raise BudgetExhausted("no annotation budget remaining")
            self.ledger.charge(1)
            request = self._open.pop(request_id)
            self._order.remove(request_id)
            self._answers[request_id] = label
            if label not in self._labels_seen:
                self._labels_seen.append(label)
            ack = {
                "request_id": request_id,
                "point_id": request.point_id,
                "label": label,
                "spent": self.ledger.spent,
            }
            self._acks[request_id] = ack
            self._cond.notify_all()
            return ack

    def open_requests(self, limit: int | None = None) -> list[dict[str, Any]]:
        with self._cond:
            ids = self._order if limit is None else self._order[:limit]
            return [self._open[r].to_dict() for r in ids]

    def labels_seen(self) -> list[str]:
        with self._cond:
            return list(self._labels_seen)

    def budget_snapshot(self) -> dict[str, int] | None:
        with self._cond:
            if self.ledger is None:
                return None
            return {"total": self.ledger.total, "spent": self.ledger.spent}


class AnnotationSession:
    """One pipeline run plus the state its console needs to render."""

    def __init__(
        self,
        session_id: str,
        cfg: RunConfig,
        corpus,
        embeddings,
        report_path: Path | None,
    ) -> None:
        self.session_id = session_id
        self.cfg = cfg
        self.corpus = corpus
        self.embeddings = embeddings
        self.report_path = report_path
        self.live = cfg.oracle_backend == "live-queue"
        self.backend = LiveQueueBackend() if self.live else SimulatedGoldBackend()
        self._lock = threading.Lock()
        self._phase = "starting"
        self._stage_info: dict[str, Any] = {}
        self._budget_hint: dict[str, int] | None = None
        self.report = None
        self.error: str | None = None
        self._thread = threading.Thread(target=self._run, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def _observe(self, stage: str, info: dict[str, Any] | None = None) -> None:
        with self._lock:
            self._phase = stage
            if info:
                self._stage_info.update(info)
                if "budget_total" in info:
                    self._budget_hint = {
                        "total": info["budget_total"],
                        "spent": info["budget_spent"],
                    }

    def _run(self) -> None:
        try:
            report = run_mnid(
                self.corpus,
                self.embeddings,
                self.cfg,
                backend=self.backend,
                observer=self._observe,
            )
            with self._lock:
                self.report = report
                self._phase = "done"
            if self.report_path is not None:
                self.report_path.write_text(report_json(report), encoding="utf-8")
        except Exception as exc:  # surfaced through /api/state
            with self._lock:
                self.error = f"{type(exc).__name__}: {exc}"
                self._phase = "failed"

    @property
    def done(self) -> bool:
        with self._lock:
            return self._phase in ("done", "failed")

    def state(self) -> dict[str, Any]:
        budget = None
        if isinstance(self.backend, LiveQueueBackend):
            budget = self.backend.budget_snapshot()
        with self._lock:
            if budget is None:
                budget = self._budget_hint
            clusters = self._stage_info.get("clusters")
            return {
                "session_id": self.session_id,
                "phase": self._phase,
                "budget": budget,
                "n_new": self._stage_info.get("n_new"),
                "clusters": clusters,
                "done": self._phase in ("done", "failed"),
                "has_report": self.report is not None,
                "error": self.error,
            }

    def classes(self) -> dict[str, Any]:
        vocab = self.corpus.vocabulary
        names = list(vocab.labels)
        if isinstance(self.backend, LiveQueueBackend):
            for label in self.backend.labels_seen():
                if label not in names:
                    names.append(label)
        known = [vocab.label(i) for i in sorted(vocab.known_at_start)]
        return {"classes": names, "known_at_start": known}


class SessionRequest(BaseModel):
    config: dict[str, Any]
    corpus_path: str | None = None
    embeddings_path: str | None = None
    synthetic: dict[str, Any] | None = None
    report_path: str | None = None


class LabelSubmission(BaseModel):
    request_id: str
    label: str


def create_app(static_dir: str | Path | None = None) -> FastAPI:
    """Build the service; ``static_dir`` optionally serves the console UI."""
    app = FastAPI(title="annotation service")
    sessions: dict[str, AnnotationSession] = {}
    counter = itertools.count(1)
    lock = threading.Lock()

    def current() -> AnnotationSession:
        with lock:
            if not sessions:
                raise HTTPException(status_code=404, detail="no session")
            return next(iter(sessions.values()))

    @app.post("/api/session", status_code=201)
    def start_session(body: SessionRequest) -> dict[str, Any]:
        with lock:
            active = next(iter(sessions.values()), None)
            if active is not None and not active.done:
                raise HTTPException(status_code=409, detail="session busy")
            try:
                cfg = RunConfig.from_dict(body.config)
                if body.synthetic is not None:
                    corpus, matrix = generate_synthetic(
                        SyntheticSpec.from_dict(body.synthetic)
                    )
                elif body.corpus_path and body.embeddings_path:
                    corpus = load_corpus(body.corpus_path)
                    matrix = load_embeddings(body.embeddings_path, corpus, normalize=False)
                else:
                    raise ValueError(
                        "need either synthetic spec or corpus_path + embeddings_path"
                    )
            except (MnidError, ValueError, OSError) as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            session_id = f"s{next(counter):04d}"
            report_path = Path(body.report_path) if body.report_path else None
            session = AnnotationSession(session_id, cfg, corpus, matrix, report_path)
            sessions.clear()
            sessions[session_id] = session
            session.start()
            return {"session_id": session_id}

    @app.get("/api/state")
    def get_state() -> dict[str, Any]:
        return current().state()

    @app.get("/api/queue")
    def get_queue(limit: int = 50) -> list[dict[str, Any]]:
        session = current()
        if not isinstance(session.backend, LiveQueueBackend):
            return []
        return session.backend.open_requests(limit)

    @app.post("/api/labels")
    def post_label(body: LabelSubmission) -> dict[str, Any]:
        session = current()
        if not isinstance(session.backend, LiveQueueBackend):
            raise HTTPException(status_code=409, detail="session is not live")
        try:
            return session.backend.submit(body.request_id, body.label)
        except UnknownRequest as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except DuplicateSubmission as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except BudgetExhausted as exc:
            raise HTTPException(status_code=402, detail=str(exc)) from exc

    @app.get("/api/classes")
    def get_classes() -> dict[str, Any]:
        return current().classes()

    @app.get("/api/report")
    def get_report() -> JSONResponse:
        session = current()
        if session.report is None:
            raise HTTPException(status_code=404, detail="report not ready")
        return JSONResponse(session.report.to_dict())

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return app
