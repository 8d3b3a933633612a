"""Tweet corpus ingestion, embedding store, and the weak labelers.

Corpora and stores are immutable after load; all labelers are pure
functions, so concurrent readers need no locking.
"""

from __future__ import annotations

import hashlib
import json
import re
import struct
import unicodedata
from dataclasses import dataclass, field
from importlib import resources

import numpy as np


class CorpusError(Exception):
    pass


class DuplicateIdError(CorpusError):
    pass


@dataclass(frozen=True)
class MalformedLine:
    line_no: int
    message: str


@dataclass(frozen=True)
class EntityMention:
    id: str
    tweet_id: str
    start: int
    end: int
    surface: str
    canonical: str | None = None

    @property
    def key(self) -> str:
        """Entity identity used for cross-tweet agreement: canonical if given."""
        return self.canonical if self.canonical is not None else self.surface.lower()


_HASHTAG = re.compile(r"#(\w+)")


@dataclass(frozen=True)
class Tweet:
    id: str
    text: str
    hashtags: tuple[str, ...]
    mentions: tuple[EntityMention, ...] = ()


def extract_hashtags(text: str) -> tuple[str, ...]:
    return tuple(m.group(1).lower() for m in _HASHTAG.finditer(text))


def make_tweet(tweet_id: str, text: str, mentions=()) -> Tweet:
    """Build a Tweet, deriving hashtags and validating mention spans."""
    resolved = []
    for m in mentions:
        if isinstance(m, EntityMention):
            start, end, mid, canonical = m.start, m.end, m.id, m.canonical
        else:
            start, end, mid, canonical = m["start"], m["end"], m["id"], m.get("canonical")
        if not (isinstance(start, int) and isinstance(end, int)
                and 0 <= start < end <= len(text)):
            raise ValueError(f"mention {mid!r}: span [{start}, {end}) out of range for text "
                             f"of length {len(text)}")
        resolved.append(EntityMention(str(mid), str(tweet_id), start, end,
                                      text[start:end], canonical))
    return Tweet(str(tweet_id), text, extract_hashtags(text), tuple(resolved))


def _parse_line(raw: str, line_no: int) -> Tweet:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ValueError(f"invalid JSON: {e.msg}") from e
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    if "id" not in obj or "text" not in obj:
        raise ValueError("missing required field 'id' or 'text'")
    if not isinstance(obj["text"], str):
        raise ValueError("'text' must be a string")
    mentions = obj.get("mentions", [])
    if not isinstance(mentions, list):
        raise ValueError("'mentions' must be a list")
    for m in mentions:
        if not isinstance(m, dict) or not {"id", "start", "end"} <= set(m):
            raise ValueError("each mention needs fields id, start, end")
    return make_tweet(obj["id"], obj["text"], mentions)


def iter_corpus(path, on_error=None):
    """Stream tweets from a JSONL file one line at a time.

    Malformed lines are passed to ``on_error(MalformedLine)`` and skipped.
    Duplicate tweet or mention ids abort the load: downstream code keys
    inference variables by these ids, so collisions cannot be recovered from.
    """
    seen_tweets: set[str] = set()
    seen_mentions: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                tweet = _parse_line(raw, line_no)
            except ValueError as e:
                if on_error is not None:
                    on_error(MalformedLine(line_no, str(e)))
                continue
            if tweet.id in seen_tweets:
                raise DuplicateIdError(f"line {line_no}: duplicate tweet id {tweet.id!r}")
            seen_tweets.add(tweet.id)
            for m in tweet.mentions:
                if m.id in seen_mentions:
                    raise DuplicateIdError(f"line {line_no}: duplicate mention id {m.id!r}")
                seen_mentions.add(m.id)
            yield tweet


@dataclass(frozen=True)
class Corpus:
    tweets: tuple[Tweet, ...]
    errors: tuple[MalformedLine, ...] = ()

    def __len__(self):
        return len(self.tweets)

    def __iter__(self):
        return iter(self.tweets)

    def by_id(self) -> dict[str, Tweet]:
        return {t.id: t for t in self.tweets}


def load_corpus(path) -> Corpus:
    errors: list[MalformedLine] = []
    tweets = tuple(iter_corpus(path, on_error=errors.append))
    return Corpus(tweets, tuple(errors))


def serialize_corpus(corpus) -> str:
    """Canonical JSONL: fixed key order, compact separators, no ASCII escapes."""
    lines = []
    for t in corpus:
        mentions = []
        for m in t.mentions:
            entry = {"id": m.id, "start": m.start, "end": m.end}
            if m.canonical is not None:
                entry["canonical"] = m.canonical
            mentions.append(entry)
        lines.append(json.dumps({"id": t.id, "text": t.text, "mentions": mentions},
                                ensure_ascii=False, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# embeddings

EMB_MAGIC = b"EMB1"
_KEY_BYTES = 32
_PROJECTION_SEED = 0x5EB2


def text_key(text: str) -> bytes:
    """SHA-256 of NFC-normalized, whitespace-collapsed text."""
    norm = " ".join(unicodedata.normalize("NFC", text).split())
    return hashlib.sha256(norm.encode("utf-8")).digest()


class EmbeddingStore:
    """Fixed-dimension store of unit-norm text embeddings.

    Texts missing from the store fall back to a deterministic character
    n-gram embedding, so lookups are total.
    """

    def __init__(self, dimension: int):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)
        self._vectors: dict[bytes, np.ndarray] = {}
        self._fallback_cache: dict[bytes, np.ndarray] = {}

    def __len__(self):
        return len(self._vectors)

    def __contains__(self, text: str) -> bool:
        return text_key(text) in self._vectors

    def add(self, text: str, vector) -> None:
        vec = np.asarray(vector, dtype=np.float32).reshape(-1)
        if vec.shape[0] != self.dimension:
            raise ValueError(f"vector has dimension {vec.shape[0]}, store holds {self.dimension}")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ValueError("cannot store a zero vector")
        self._vectors[text_key(text)] = (vec / norm).astype(np.float32)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(EMB_MAGIC)
            fh.write(struct.pack("<I", self.dimension))
            fh.write(struct.pack("<Q", len(self._vectors)))
            for key in sorted(self._vectors):
                fh.write(key)
                fh.write(self._vectors[key].astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "EmbeddingStore":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != EMB_MAGIC:
                raise CorpusError(f"bad embedding file magic: {magic!r}")
            (dimension,) = struct.unpack("<I", fh.read(4))
            (count,) = struct.unpack("<Q", fh.read(8))
            store = cls(dimension)
            record = _KEY_BYTES + 4 * dimension
            for _ in range(count):
                blob = fh.read(record)
                if len(blob) != record:
                    raise CorpusError("truncated embedding file")
                key = blob[:_KEY_BYTES]
                vec = np.frombuffer(blob[_KEY_BYTES:], dtype="<f4").astype(np.float32)
                norm = float(np.linalg.norm(vec))
                if not (abs(norm - 1.0) <= 1e-5):
                    raise CorpusError(f"stored vector has norm {norm}, expected 1.0")
                store._vectors[key] = vec
        return store


_N_BUCKETS = 1 << 20
_column_cache: dict[tuple[int, int], np.ndarray] = {}


def _projection_column(dimension: int, bucket: int) -> np.ndarray:
    col = _column_cache.get((dimension, bucket))
    if col is None:
        col = np.random.default_rng(_PROJECTION_SEED * _N_BUCKETS + bucket)\
            .standard_normal(dimension)
        _column_cache[(dimension, bucket)] = col
    return col


def _char_ngrams(norm: str):
    for n in (3, 4, 5):
        for i in range(len(norm) - n + 1):
            yield norm[i:i + n]


def fallback_embedding(text: str, dimension: int) -> np.ndarray:
    """Character 3-5-gram hashed TF vector under a fixed-seed random projection."""
    norm = " ".join(unicodedata.normalize("NFC", text).split())
    grams = list(_char_ngrams(norm)) or ([norm] if norm else [])
    counts: dict[int, int] = {}
    for g in grams:
        digest = hashlib.blake2b(g.encode("utf-8"), digest_size=8).digest()
        bucket = int.from_bytes(digest, "little") % _N_BUCKETS
        counts[bucket] = counts.get(bucket, 0) + 1
    vec = np.zeros(dimension)
    for bucket, tf in counts.items():
        vec += tf * _projection_column(dimension, bucket)
    n = float(np.linalg.norm(vec))
    if n == 0.0:
        vec = np.random.default_rng(_PROJECTION_SEED).standard_normal(dimension)
        n = float(np.linalg.norm(vec))
    return (vec / n).astype(np.float32)


def embed(text: str, store: EmbeddingStore) -> np.ndarray:
    key = text_key(text)
    vec = store._vectors.get(key)
    if vec is not None:
        return vec
    cached = store._fallback_cache.get(key)
    if cached is None:
        cached = fallback_embedding(text, store.dimension)
        store._fallback_cache[key] = cached
    return cached


# ---------------------------------------------------------------------------
# weak labelers

@dataclass(frozen=True)
class WeakLabelSets:
    provax_hashtags: frozenset[str]
    antivax_hashtags: frozenset[str]
    liberty_lexicon: tuple[str, ...]
    liberty_min_hits: int = 4

    def __post_init__(self):
        overlap = self.provax_hashtags & self.antivax_hashtags
        if overlap:
            raise ValueError(f"hashtag sets overlap: {sorted(overlap)[:3]}")
        if self.liberty_min_hits < 1:
            raise ValueError("liberty_min_hits must be >= 1")


def load_wordlist(path) -> list[str]:
    """One entry per line, '#' comments, lowercased, order-preserving dedup."""
    out: list[str] = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            entry = raw.split("#", 1)[0].strip().lower()
            if entry and entry not in seen:
                seen.add(entry)
                out.append(entry)
    return out


def _data_path(name: str):
    return resources.files("opinionlab.data").joinpath(name)


def default_weak_label_sets() -> WeakLabelSets:
    return WeakLabelSets(
        provax_hashtags=frozenset(load_wordlist(_data_path("hashtags_provax.txt"))),
        antivax_hashtags=frozenset(load_wordlist(_data_path("hashtags_antivax.txt"))),
        liberty_lexicon=tuple(load_wordlist(_data_path("liberty_lexicon.txt"))),
    )


def weak_label_stance(tweet: Tweet, sets: WeakLabelSets) -> str | None:
    """Anti/Pro from hashtag families; None when both or neither appear.

    Conflicts stay unlabeled rather than falling back to a majority count:
    distant supervision wants precision over recall.
    """
    tags = set(tweet.hashtags)
    has_anti = bool(tags & sets.antivax_hashtags)
    has_pro = bool(tags & sets.provax_hashtags)
    if has_anti and not has_pro:
        return "Anti"
    if has_pro and not has_anti:
        return "Pro"
    return None


_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")


def _tokens(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def count_liberty_hits(text: str, sets: WeakLabelSets) -> int:
    """Count lexicon matches: greedy longest-phrase-first, no overlaps."""
    toks = _tokens(text)
    phrases = sorted((tuple(_tokens(e)) for e in sets.liberty_lexicon),
                     key=len, reverse=True)
    phrases = [p for p in phrases if p]
    hits = 0
    i = 0
    while i < len(toks):
        for p in phrases:
            if tuple(toks[i:i + len(p)]) == p:
                hits += 1
                i += len(p)
                break
        else:
            i += 1
    return hits


def weak_label_liberty(tweet: Tweet, sets: WeakLabelSets) -> bool:
    return count_liberty_hits(tweet.text, sets) >= sets.liberty_min_hits
