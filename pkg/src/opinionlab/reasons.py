"""Reason catalog: grounding stance arguments in a corpus by similarity.

A catalog maps reason ids to exemplar phrases; tweets are assigned to the
reason whose closest phrase they resemble most (cosine over unit
embeddings).  A CatalogSession wraps a catalog in an append-only edit log,
so that replaying the log from the initial catalog always reproduces the
current assignments, including across undo and process restarts.
"""

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .corpus import EmbeddingStore, embed

DEFAULT_THRESHOLD = 0.3
DEFAULT_EMBED_DIM = 64
STANCE_SIDES = ("Pro", "Anti")

_DATA_DIR = Path(__file__).parent / "data"
_UNSET = object()


class CatalogError(Exception):
    pass


class DuplicateReason(CatalogError):
    pass


class UnknownReason(CatalogError):
    pass


class EmptyPhrase(CatalogError):
    pass


class EmptyCluster(CatalogError):
    pass


class TooFewClusters(CatalogError):
    pass


class DegenerateRank(CatalogError):
    pass


@dataclass(frozen=True, eq=False)
class Reason:
    id: str
    stance_side: str
    phrases: tuple[str, ...]
    phrase_vectors: np.ndarray  # (len(phrases), dim), unit rows
    display_name: str = ""

    def __post_init__(self):
        if not self.phrases:
            raise CatalogError(f"reason {self.id!r} has no phrases")
        if self.stance_side not in STANCE_SIDES:
            raise CatalogError(f"stance side must be one of {STANCE_SIDES}")
        if self.phrase_vectors.shape != (len(self.phrases), self.phrase_vectors.shape[1]):
            raise CatalogError("one vector per phrase required")
        if not self.display_name:
            object.__setattr__(self, "display_name", self.id)


def make_reason(reason_id: str, phrases, stance_side: str, store: EmbeddingStore,
                display_name: str = "") -> Reason:
    phrases = tuple(phrases)
    for p in phrases:
        if not p.strip():
            raise EmptyPhrase("phrases must be non-empty")
    vectors = np.stack([embed(p, store) for p in phrases]).astype(np.float64)
    return Reason(reason_id, stance_side, phrases, vectors, display_name)


def load_catalog(path, store: EmbeddingStore) -> dict[str, Reason]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    catalog: dict[str, Reason] = {}
    for entry in payload["reasons"]:
        rid = entry["id"]
        if rid in catalog:
            raise DuplicateReason(f"catalog file repeats reason {rid!r}")
        catalog[rid] = make_reason(rid, entry["phrases"], entry["stance_side"], store)
    return catalog


def save_catalog(catalog: dict[str, Reason], path) -> None:
    payload = {"reasons": [
        {"id": r.id, "stance_side": r.stance_side, "phrases": list(r.phrases)}
        for r in catalog.values()]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def initial_catalog(store: EmbeddingStore) -> dict[str, Reason]:
    """The 12 seed reasons, all argued from the anti side."""
    return load_catalog(_DATA_DIR / "catalog_initial.json", store)


def final_catalog(store: EmbeddingStore) -> dict[str, Reason]:
    """The post-interaction catalog: 13 anti and 9 pro reasons."""
    return load_catalog(_DATA_DIR / "catalog_final.json", store)


@dataclass(frozen=True)
class Assignment:
    tweet_id: str
    reason_id: str | None
    similarity: float


def similarity_to_reason(vector: np.ndarray, reason: Reason) -> float:
    """Max over the reason's phrases of cosine with the given unit vector."""
    return float(np.max(reason.phrase_vectors @ vector))


def similarity(tweet, reason: Reason, store: EmbeddingStore) -> float:
    return similarity_to_reason(embed(tweet.text, store), reason)


# ---------------------------------------------------------------------------
# sessions


def _effective_events(events):
    """Resolve undo markers: each undo cancels the latest surviving edit."""
    effective = []
    for ev in events:
        if ev["action"] == "undo":
            if effective:
                effective.pop()
        else:
            effective.append(ev)
    return effective


def _apply_event(catalog: dict[str, Reason], ev: dict, store: EmbeddingStore) -> None:
    action = ev["action"]
    rid = ev["reason_id"]
    if action == "add_reason":
        if rid in catalog:
            raise DuplicateReason(f"reason {rid!r} already exists")
        catalog[rid] = make_reason(rid, [ev["phrase"]], ev["stance_side"], store)
    elif action == "remove_reason":
        if rid not in catalog:
            raise UnknownReason(f"no reason {rid!r}")
        del catalog[rid]
    elif action == "add_phrase":
        if rid not in catalog:
            raise UnknownReason(f"no reason {rid!r}")
        old = catalog[rid]
        catalog[rid] = make_reason(rid, old.phrases + (ev["phrase"],),
                                   old.stance_side, store, old.display_name)
    else:
        raise CatalogError(f"unknown log action {action!r}")


def replay_catalog(initial: dict[str, Reason], events, store: EmbeddingStore) -> dict[str, Reason]:
    catalog = dict(initial)
    for ev in _effective_events(events):
        _apply_event(catalog, ev, store)
    return catalog


class CatalogSession:
    """One coder session: a catalog plus its append-only edit log.

    The catalog and the tweet assignments are never mutated in place; every
    edit appends an event and rebuilds both by replaying the log, which
    makes the replay-determinism invariant true by construction.
    """

    def __init__(self, corpus, catalog: dict[str, Reason],
                 store: EmbeddingStore | None = None,
                 threshold: float | None = None, actor: str = "coder"):
        self.corpus = list(corpus)
        self.store = store if store is not None else EmbeddingStore(DEFAULT_EMBED_DIM)
        for reason in catalog.values():
            if reason.phrase_vectors.shape[1] != self.store.dimension:
                raise CatalogError(
                    f"reason {reason.id!r} vectors have dimension "
                    f"{reason.phrase_vectors.shape[1]}, store holds {self.store.dimension}")
        self.initial = dict(catalog)
        self.threshold = threshold
        self.actor = actor
        self.events: list[dict] = []
        self._vec_of = {t.id: np.asarray(embed(t.text, self.store), dtype=np.float64)
                        for t in self.corpus}
        self._refresh()

    @classmethod
    def resume(cls, corpus, catalog, events, store=None, threshold=None,
               actor: str = "coder") -> "CatalogSession":
        """Rebuild a session from a persisted event log (crash recovery)."""
        session = cls(corpus, catalog, store, threshold, actor)
        session.events = [dict(ev) for ev in events]
        session._refresh()
        return session

    def _refresh(self):
        self.catalog = replay_catalog(self.initial, self.events, self.store)
        self.assignments = assign_all(self)

    def _record(self, action: str, reason_id: str, actor=None, **extra):
        self.events.append({
            "seq": len(self.events),
            "ts": datetime.now(timezone.utc).isoformat(),
            "actor": actor if actor is not None else self.actor,
            "action": action,
            "reason_id": reason_id,
            **extra,
        })
        self._refresh()

    def log_jsonl(self) -> str:
        return "".join(json.dumps(ev, ensure_ascii=False) + "\n" for ev in self.events)

    def dump_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.log_jsonl())


def load_events(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def add_reason(session: CatalogSession, reason_id: str, phrase: str,
               stance_side: str = "Anti", actor=None) -> CatalogSession:
    if reason_id in session.catalog:
        raise DuplicateReason(f"reason {reason_id!r} already exists")
    if not phrase.strip():
        raise EmptyPhrase("phrase must be non-empty")
    if stance_side not in STANCE_SIDES:
        raise CatalogError(f"stance side must be one of {STANCE_SIDES}")
    session._record("add_reason", reason_id, actor, phrase=phrase, stance_side=stance_side)
    return session


def remove_reason(session: CatalogSession, reason_id: str, actor=None) -> CatalogSession:
    if reason_id not in session.catalog:
        raise UnknownReason(f"no reason {reason_id!r}")
    session._record("remove_reason", reason_id, actor)
    return session


def add_phrase(session: CatalogSession, reason_id: str, phrase: str,
               actor=None) -> CatalogSession:
    if reason_id not in session.catalog:
        raise UnknownReason(f"no reason {reason_id!r}")
    if not phrase.strip():
        raise EmptyPhrase("phrase must be non-empty")
    session._record("add_phrase", reason_id, actor, phrase=phrase)
    return session


def undo(session: CatalogSession, actor=None) -> CatalogSession:
    if not _effective_events(session.events):
        raise CatalogError("nothing to undo")
    session._record("undo", "", actor)
    return session


# ---------------------------------------------------------------------------
# diagnostics


def _resolve_threshold(session, threshold):
    return session.threshold if threshold is _UNSET else threshold


def assign_all(session: CatalogSession, threshold=_UNSET) -> list[Assignment]:
    """Each tweet goes to its most similar reason, ties to the smaller id.

    With a threshold, tweets whose best similarity falls below it stay
    unassigned; with None every tweet is assigned (unless the catalog is
    empty)."""
    threshold = _resolve_threshold(session, threshold)
    ordered = sorted(session.catalog)
    out = []
    for tweet in session.corpus:
        vec = session._vec_of[tweet.id]
        best_id, best_sim = None, 0.0
        for rid in ordered:
            sim = similarity_to_reason(vec, session.catalog[rid])
            if best_id is None or sim > best_sim:
                best_id, best_sim = rid, sim
        if best_id is None:
            out.append(Assignment(tweet.id, None, 0.0))
        elif threshold is not None and best_sim < threshold:
            out.append(Assignment(tweet.id, None, best_sim))
        else:
            out.append(Assignment(tweet.id, best_id, best_sim))
    return out


def closest_tweets(session: CatalogSession, reason_id: str, k: int) -> list[tuple[str, float]]:
    """Top-k (tweet_id, similarity), descending, ties by tweet id."""
    if reason_id not in session.catalog:
        raise UnknownReason(f"no reason {reason_id!r}")
    if k < 1:
        raise ValueError("k must be at least 1")
    reason = session.catalog[reason_id]
    scored = [(t.id, similarity_to_reason(session._vec_of[t.id], reason))
              for t in session.corpus]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


_TOKEN = re.compile(r"\w+")


def _ngrams(text: str):
    tokens = _TOKEN.findall(text.lower())
    for n in (2, 3):
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i:i + n])


def wordcloud_terms(session: CatalogSession, reason_id: str,
                    top_n: int = 25) -> list[tuple[str, float]]:
    """Bigram/trigram TF-IDF of the reason's cluster against the others.

    Documents are the per-reason concatenations of currently assigned
    tweets; a reason with nothing assigned contributes no document.
    """
    if reason_id not in session.catalog:
        raise UnknownReason(f"no reason {reason_id!r}")
    texts_by_reason: dict[str, list[str]] = {}
    by_id = {t.id: t for t in session.corpus}
    for a in session.assignments:
        if a.reason_id is not None:
            texts_by_reason.setdefault(a.reason_id, []).append(by_id[a.tweet_id].text)
    if reason_id not in texts_by_reason:
        raise EmptyCluster(f"no tweets assigned to {reason_id!r}")

    doc_grams = {rid: list(_ngrams("\n".join(texts)))
                 for rid, texts in texts_by_reason.items()}
    n_docs = len(doc_grams)
    df: dict[str, int] = {}
    for grams in doc_grams.values():
        for g in set(grams):
            df[g] = df.get(g, 0) + 1
    tf: dict[str, int] = {}
    for g in doc_grams[reason_id]:
        tf[g] = tf.get(g, 0) + 1
    weighted = [(g, count * float(np.log(n_docs / df[g]))) for g, count in tf.items()]
    weighted.sort(key=lambda pair: (-pair[1], pair[0]))
    return weighted[:top_n]


def silhouette_values(vectors: np.ndarray, labels) -> np.ndarray:
    """Per-point silhouette coefficients under cosine distance.

    Singleton clusters score 0 by convention, as do points whose intra and
    inter distances are both zero."""
    labels = np.asarray(labels)
    if len(set(labels.tolist())) < 2:
        raise TooFewClusters("need at least two non-empty clusters")
    dist = np.maximum(1.0 - vectors @ vectors.T, 0.0)
    scores = np.zeros(len(labels))
    for i in range(len(labels)):
        same = labels == labels[i]
        same[i] = False
        if not same.any():
            continue
        a = float(dist[i, same].mean())
        b = min(float(dist[i, labels == other].mean())
                for other in np.unique(labels) if other != labels[i])
        top = max(a, b)
        scores[i] = (b - a) / top if top > 0 else 0.0
    return scores


def silhouette(session: CatalogSession, threshold=_UNSET) -> float:
    """Mean silhouette over assigned tweets under cosine distance."""
    assigns = assign_all(session, threshold)
    assigned = [a for a in assigns if a.reason_id is not None]
    if len({a.reason_id for a in assigned}) < 2:
        raise TooFewClusters("need at least two non-empty clusters")
    vectors = np.stack([session._vec_of[a.tweet_id] for a in assigned])
    labels = np.array([a.reason_id for a in assigned])
    return float(silhouette_values(vectors, labels).mean())


def project_2d(session: CatalogSession, threshold=_UNSET) -> list[tuple[str, float, float, str | None]]:
    """Deterministic 2-component PCA of the tweet embeddings.

    Every tweet is projected; the reason id (None for unassigned) rides
    along for coloring.  Component signs are fixed by making the first
    nonzero loading positive.
    """
    assigns = assign_all(session, threshold)
    if sum(1 for a in assigns if a.reason_id is not None) < 3:
        raise CatalogError("need at least 3 assigned tweets")
    X = np.stack([session._vec_of[t.id] for t in session.corpus])
    Xc = X - X.mean(axis=0)
    if not np.any(np.abs(Xc) > 1e-12):
        raise DegenerateRank("all embeddings are identical")
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    comps = vt[:2]
    if comps.shape[0] < 2:
        comps = np.vstack([comps, np.zeros((2 - comps.shape[0], comps.shape[1]))])
    for row in range(2):
        nonzero = np.nonzero(np.abs(comps[row]) > 1e-12)[0]
        if nonzero.size and comps[row, nonzero[0]] < 0:
            comps[row] = -comps[row]
    coords = Xc @ comps.T
    return [(t.id, float(coords[i, 0]), float(coords[i, 1]), assigns[i].reason_id)
            for i, t in enumerate(session.corpus)]
