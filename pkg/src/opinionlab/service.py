"""HTTP front for the reason workbench.

Every diagnostic endpoint delegates to the library function of the same name
and serializes through the payload builders below; the service never computes
similarities, projections, or clouds on its own. Mutations are serialized
through one lock and the session log is flushed to disk after each one, so a
restarted server replays the log back to the identical catalog state.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from pydantic import BaseModel

from .corpus import EmbeddingStore
from .reasons import (
    DEFAULT_EMBED_DIM,
    CatalogError,
    CatalogSession,
    DuplicateReason,
    UnknownReason,
    add_phrase,
    add_reason,
    assign_all,
    closest_tweets,
    initial_catalog,
    load_events,
    project_2d,
    remove_reason,
    silhouette,
    undo,
    wordcloud_terms,
)

SESSION_LOG = "session.jsonl"
_UNSET = object()


# ---------------------------------------------------------------------------
# payload builders: one canonical JSON shape per endpoint, shared with tests

def reasons_payload(session: CatalogSession) -> list:
    return [{
        "id": reason.id,
        "display_name": reason.display_name,
        "stance_side": reason.stance_side,
        "phrases": list(reason.phrases),
    } for _rid, reason in sorted(session.catalog.items())]


def closest_payload(session: CatalogSession, reason_id: str, k: int) -> list:
    return [[tid, sim] for tid, sim in closest_tweets(session, reason_id, k)]


def wordcloud_payload(session: CatalogSession, reason_id: str, n: int) -> list:
    return [[term, weight] for term, weight in wordcloud_terms(session, reason_id, n)]


def assignments_payload(session: CatalogSession, threshold=_UNSET) -> dict:
    assigns = (assign_all(session) if threshold is _UNSET
               else assign_all(session, threshold))
    histogram: dict[str, int] = {rid: 0 for rid in sorted(session.catalog)}
    unassigned = 0
    for a in assigns:
        if a.reason_id is None:
            unassigned += 1
        else:
            histogram[a.reason_id] += 1
    return {
        "assignments": [[a.tweet_id, a.reason_id, a.similarity] for a in assigns],
        "histogram": histogram,
        "unassigned": unassigned,
    }


def projection_payload(session: CatalogSession, threshold=_UNSET) -> list:
    points = (project_2d(session) if threshold is _UNSET
              else project_2d(session, threshold))
    return [[tid, x, y, rid] for tid, x, y, rid in points]


def silhouette_payload(session: CatalogSession, threshold=_UNSET) -> dict:
    value = (silhouette(session) if threshold is _UNSET
             else silhouette(session, threshold))
    return {"silhouette": value}


def log_payload(session: CatalogSession) -> list:
    return [dict(ev) for ev in session.events]


def _json(payload) -> Response:
    return Response(json.dumps(payload, ensure_ascii=False),
                    media_type="application/json")


# ---------------------------------------------------------------------------
# state

@dataclass
class WorkbenchState:
    """One active session per server plus the write lock and persistence."""

    session: CatalogSession
    data_dir: str | None
    lock: threading.Lock

    def persist(self) -> None:
        if self.data_dir is not None:
            os.makedirs(self.data_dir, exist_ok=True)
            self.session.dump_log(os.path.join(self.data_dir, SESSION_LOG))


def open_session(corpus, catalog=None, store=None, *, data_dir=None,
                 threshold=None, actor: str = "coder") -> CatalogSession:
    """Fresh session, or a resumed one when the data dir holds a log."""
    store = store if store is not None else EmbeddingStore(DEFAULT_EMBED_DIM)
    catalog = catalog if catalog is not None else initial_catalog(store)
    log_path = (os.path.join(data_dir, SESSION_LOG)
                if data_dir is not None else None)
    if log_path and os.path.exists(log_path):
        return CatalogSession.resume(corpus, catalog, load_events(log_path),
                                     store, threshold, actor)
    return CatalogSession(corpus, catalog, store, threshold, actor)


class AddReasonBody(BaseModel):
    id: str
    phrase: str
    stance_side: str = "Anti"


class AddPhraseBody(BaseModel):
    phrase: str


def create_app(corpus, catalog=None, store=None, *, data_dir=None,
               threshold=None, actor: str = "coder") -> FastAPI:
    session = open_session(corpus, catalog, store, data_dir=data_dir,
                           threshold=threshold, actor=actor)
    state = WorkbenchState(session, str(data_dir) if data_dir else None,
                           threading.Lock())
    app = FastAPI(title="reason workbench")
    app.state.workbench = state

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return _error(400, str(exc))

    def _error(status: int, message: str) -> Response:
        return Response(json.dumps({"error": message}, ensure_ascii=False),
                        status_code=status, media_type="application/json")

    def _mutate(fn):
        with state.lock:
            try:
                fn(state.session)
            except DuplicateReason as e:
                return _error(409, str(e))
            except UnknownReason as e:
                return _error(404, str(e))
            except (CatalogError, ValueError) as e:
                return _error(400, str(e))
            state.persist()
            return _json({"ok": True, "log_length": len(state.session.events)})

    def _diagnostic(fn):
        try:
            return _json(fn(state.session))
        except UnknownReason as e:
            return _error(404, str(e))
        except (CatalogError, ValueError) as e:
            return _error(400, str(e))

    @app.get("/reasons")
    def get_reasons():
        return _json(reasons_payload(state.session))

    @app.get("/reasons/{reason_id}/closest")
    def get_closest(reason_id: str, k: int = 10):
        return _diagnostic(lambda s: closest_payload(s, reason_id, k))

    @app.get("/reasons/{reason_id}/wordcloud")
    def get_wordcloud(reason_id: str, n: int = 25):
        return _diagnostic(lambda s: wordcloud_payload(s, reason_id, n))

    @app.get("/assignments")
    def get_assignments(threshold: float | None = None):
        t = _UNSET if threshold is None else threshold
        return _diagnostic(lambda s: assignments_payload(s, t))

    @app.get("/projection")
    def get_projection(threshold: float | None = None):
        t = _UNSET if threshold is None else threshold
        return _diagnostic(lambda s: projection_payload(s, t))

    @app.get("/silhouette")
    def get_silhouette(threshold: float | None = None):
        t = _UNSET if threshold is None else threshold
        return _diagnostic(lambda s: silhouette_payload(s, t))

    @app.post("/reasons")
    def post_reason(body: AddReasonBody):
        return _mutate(lambda s: add_reason(s, body.id, body.phrase, body.stance_side))

    @app.delete("/reasons/{reason_id}")
    def delete_reason(reason_id: str):
        return _mutate(lambda s: remove_reason(s, reason_id))

    @app.post("/reasons/{reason_id}/phrases")
    def post_phrase(reason_id: str, body: AddPhraseBody):
        return _mutate(lambda s: add_phrase(s, reason_id, body.phrase))

    @app.get("/session/log")
    def get_log():
        return _json(log_payload(state.session))

    @app.post("/session/undo")
    def post_undo():
        return _mutate(lambda s: undo(s))

    return app


def serve(corpus, catalog=None, store=None, *, port: int = 8000,
          data_dir=None, threshold=None, host: str = "127.0.0.1") -> None:
    """Run the workbench service until interrupted."""
    import uvicorn

    app = create_app(corpus, catalog, store, data_dir=data_dir,
                     threshold=threshold)
    uvicorn.run(app, host=host, port=port)
