"""Per-template linear scorers over hashed text features, an embedding block,
and one-hot symbol blocks, trained with a locally normalized objective
(softmax cross-entropy plus L2, plain mini-batch gradient descent).

featurize/score are pure; a trained ScorerParams is immutable afterwards.
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .rules import ENTITY_SORT, RuleTemplate

_HASH_SALT = b"opinionfeat"  # fixed so feature indices are stable across runs


class ScorerError(Exception):
    pass


class DimensionMismatch(ScorerError):
    pass


class EmptyTrainingSet(ScorerError):
    pass


_WORD = re.compile(r"[a-z0-9]+")


def _words(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def hash_ngram(key: str, hash_bits: int) -> int:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8, salt=_HASH_SALT).digest()
    return int.from_bytes(digest, "little") % (1 << hash_bits)


@dataclass(frozen=True)
class FeatureSpace:
    """Layout of the concatenated feature blocks.

    [0, 2^hash_bits)            hashed word uni/bi-grams (text and entity fields)
    [+embedding_dim)            dense tweet embedding
    [+len(roles)) ...           one-hot blocks for role, polarity, stance, reason
    """

    hash_bits: int = 18
    embedding_dim: int = 0
    roles: tuple[str, ...] = ()
    polarities: tuple[str, ...] = ()
    stances: tuple[str, ...] = ()
    reasons: tuple[str, ...] = ()

    @property
    def hash_dim(self) -> int:
        return 1 << self.hash_bits

    def _offsets(self):
        off = self.hash_dim
        emb = off
        off += self.embedding_dim
        blocks = {}
        for name, vocab in (("roles", self.roles), ("polarities", self.polarities),
                            ("stances", self.stances), ("reasons", self.reasons)):
            blocks[name] = (off, {v: i for i, v in enumerate(vocab)})
            off += len(vocab)
        return emb, blocks, off

    @property
    def total_dim(self) -> int:
        return self._offsets()[2]

    def block_range(self, name: str) -> tuple[int, int]:
        emb, blocks, total = self._offsets()
        if name == "text":
            return 0, self.hash_dim
        if name == "embedding":
            return emb, emb + self.embedding_dim
        off, vocab = blocks[name]
        return off, off + len(vocab)


def space_for_program(program, hash_bits: int = 18, embedding_dim: int = 0,
                      reasons=()) -> FeatureSpace:
    """FeatureSpace with one-hot vocabularies taken from a program's label
    spaces; the open reason vocabulary comes from the catalog at hand."""
    def values(name):
        space = program.spaces.get(name)
        return space.values if space is not None and space.closed else ()

    return FeatureSpace(
        hash_bits=hash_bits,
        embedding_dim=embedding_dim,
        roles=values("roles"),
        polarities=values("polarities"),
        stances=values("stances"),
        reasons=tuple(sorted(reasons)),
    )


@dataclass(frozen=True)
class GroundingContext:
    """Everything a template instance can see: the tweet text, the mentioned
    entity surface (if any), the tweet embedding, and the body symbols bound
    by the grounding (label-space name -> label)."""

    tweet_text: str
    entity_surface: str | None = None
    embedding: np.ndarray | None = None
    symbols: dict[str, str] = field(default_factory=dict)


def _template_uses_entity(template: RuleTemplate, schema) -> bool:
    for atom in template.body + (template.head,):
        pred = schema.get(atom.predicate)
        if pred is not None and ENTITY_SORT in pred.arg_sorts:
            return True
    return False


def _body_symbol_spaces(template: RuleTemplate, schema) -> list[str]:
    """Label-space names the template's body conditions on (one-hot blocks)."""
    spaces = []
    for atom in template.body:
        pred = schema.get(atom.predicate)
        if pred is None:
            continue
        name = pred.label_space_name
        if name is not None and name not in spaces:
            spaces.append(name)
    return spaces


def featurize(space: FeatureSpace, template: RuleTemplate, ctx: GroundingContext,
              schema=None) -> dict[int, float]:
    if schema is None:
        from .rules import builtin_schema
        schema = builtin_schema()
    features: dict[int, float] = {}

    def add_ngrams(fieldname: str, text: str):
        words = _words(text)
        grams = words + [f"{a} {b}" for a, b in zip(words, words[1:])]
        for g in grams:
            idx = hash_ngram(f"{fieldname}:{g}", space.hash_bits)
            features[idx] = features.get(idx, 0.0) + 1.0

    add_ngrams("txt", ctx.tweet_text)
    if _template_uses_entity(template, schema):
        if ctx.entity_surface:
            add_ngrams("ent", ctx.entity_surface)

    if space.embedding_dim:
        if ctx.embedding is None:
            raise ScorerError("feature space declares an embedding block but the "
                              "grounding context has no embedding")
        vec = np.asarray(ctx.embedding, dtype=float).reshape(-1)
        if vec.shape[0] != space.embedding_dim:
            raise DimensionMismatch(f"embedding has dim {vec.shape[0]}, "
                                    f"space declares {space.embedding_dim}")
        lo, _hi = space.block_range("embedding")
        for i, v in enumerate(vec):
            if v != 0.0:
                features[lo + i] = float(v)

    for space_name in _body_symbol_spaces(template, schema):
        label = ctx.symbols.get(space_name)
        if label is None:
            raise ScorerError(f"template {template.id} conditions on {space_name} "
                              f"but the grounding binds no symbol for it")
        lo, _hi = space.block_range(space_name)
        _off, vocab = space._offsets()[1][space_name]
        if label not in vocab:
            raise ScorerError(f"unknown {space_name} symbol {label!r}")
        features[lo + vocab[label]] = 1.0
    return features


@dataclass(frozen=True)
class ScorerParams:
    template_id: str
    labels: tuple[str, ...]
    weights: np.ndarray  # (n_labels, feature_dim)
    bias: np.ndarray  # (n_labels,)

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise DimensionMismatch("weights must be 2-d and bias 1-d")
        if self.weights.shape[0] != len(self.labels) or self.bias.shape[0] != len(self.labels):
            raise DimensionMismatch("n_labels disagrees between labels, weights, bias")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ScorerError("non-finite parameter entries")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]


def zero_params(template_id: str, labels, feature_dim: int) -> ScorerParams:
    return ScorerParams(template_id, tuple(labels),
                        np.zeros((len(labels), feature_dim)), np.zeros(len(labels)))


def random_params(template_id: str, labels, feature_dim: int, seed: int,
                  scale: float = 0.01) -> ScorerParams:
    rng = np.random.default_rng(seed)
    return ScorerParams(template_id, tuple(labels),
                        scale * rng.standard_normal((len(labels), feature_dim)),
                        scale * rng.standard_normal(len(labels)))


@dataclass(frozen=True)
class RuleWeight:
    key: str
    labels: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        if self.scores.shape != (len(self.labels),):
            raise DimensionMismatch("score vector length must equal the label count")


def score(params: ScorerParams, features: dict[int, float], key: str = "") -> RuleWeight:
    """logits = W x + b, gathering only the active feature columns."""
    logits = params.bias.astype(float).copy()
    dim = params.feature_dim
    for idx, val in features.items():
        if not (0 <= idx < dim):
            raise DimensionMismatch(f"feature index {idx} outside dimension {dim}")
        logits += params.weights[:, idx] * val
    return RuleWeight(key, params.labels, logits)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 30
    l2: float = 1e-4
    batch_size: int = 32
    seed: int = 13


def _pack_examples(examples, labels, feature_dim):
    """One CSR row per example plus the gold label row indices."""
    label_index = {lab: i for i, lab in enumerate(labels)}
    n = len(examples)
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i, (features, _gold) in enumerate(examples):
        indptr[i + 1] = indptr[i] + len(features)
    indices = np.empty(int(indptr[-1]), dtype=np.int64)
    data = np.empty(int(indptr[-1]))
    pos = 0
    for features, _gold in examples:
        for idx, val in features.items():
            if not (0 <= idx < feature_dim):
                raise DimensionMismatch(f"feature index {idx} outside dimension {feature_dim}")
            indices[pos] = idx
            data[pos] = val
            pos += 1
    x = sparse.csr_matrix((data, indices, indptr), shape=(n, feature_dim))
    gold = np.fromiter((label_index[g] for _f, g in examples), dtype=np.int64, count=n)
    return x, gold


def _packed_loss_and_grad(weights, bias, x, gold, l2):
    n = x.shape[0]
    grad_w = l2 * weights
    grad_b = np.zeros_like(bias)
    total = 0.5 * l2 * float(np.sum(weights * weights))
    if n == 0:
        return total, grad_w, grad_b
    logits = x @ weights.T + bias
    logp = log_softmax(logits)
    rows = np.arange(n)
    total += -float(np.sum(logp[rows, gold])) / n
    delta = np.exp(logp)
    delta[rows, gold] -= 1.0
    delta /= n
    grad_b += delta.sum(axis=0)
    grad_w += (x.T @ delta).T
    return total, grad_w, grad_b


def loss_and_grad(weights, bias, examples, labels, l2):
    """Mean cross-entropy + 0.5*l2*||W||^2 and its exact gradient.

    ``examples`` is a list of (feature dict, gold label). The same function
    drives both the optimizer steps and the finite-difference tests.
    """
    x, gold = _pack_examples(examples, labels, weights.shape[1])
    return _packed_loss_and_grad(weights, bias, x, gold, l2)


def train_local(template_id: str, examples, labels, feature_dim: int,
                config: TrainConfig = TrainConfig()):
    """Train one template's scorer; returns (ScorerParams, loss trace).

    Starts from zeros, so the first trace entry is exactly ln(n_labels) plus
    a zero penalty; the trace then holds the full-set loss after each epoch.
    """
    if not examples:
        raise EmptyTrainingSet(f"no training examples for template {template_id}")
    labels = tuple(labels)
    label_index = {lab: i for i, lab in enumerate(labels)}
    for _feats, gold in examples:
        if gold not in label_index:
            raise ScorerError(f"gold label {gold!r} outside label space {labels}")
    weights = np.zeros((len(labels), feature_dim))
    bias = np.zeros(len(labels))
    x, gold = _pack_examples(examples, labels, feature_dim)
    rng = np.random.default_rng(config.seed)
    trace = [_packed_loss_and_grad(weights, bias, x, gold, config.l2)[0]]
    for _epoch in range(config.epochs):
        order = rng.permutation(len(examples))
        for lo in range(0, len(examples), config.batch_size):
            sel = order[lo:lo + config.batch_size]
            _loss, gw, gb = _packed_loss_and_grad(weights, bias, x[sel], gold[sel], config.l2)
            weights -= config.learning_rate * gw
            bias -= config.learning_rate * gb
        trace.append(_packed_loss_and_grad(weights, bias, x, gold, config.l2)[0])
    return ScorerParams(template_id, labels, weights, bias), trace


SCORER_MAGIC = b"SCR1"


def save_params(params: ScorerParams, path) -> None:
    tid = params.template_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(SCORER_MAGIC)
        fh.write(struct.pack("<I", len(tid)))
        fh.write(tid)
        fh.write(struct.pack("<I", len(params.labels)))
        fh.write(struct.pack("<I", params.feature_dim))
        fh.write(params.weights.astype("<f4").tobytes())
        fh.write(params.bias.astype("<f4").tobytes())


def load_params(path, labels) -> ScorerParams:
    """Read an SCR1 file; ``labels`` names the rows (the file stores a count)."""
    with open(path, "rb") as fh:
        if fh.read(4) != SCORER_MAGIC:
            raise ScorerError("bad scorer file magic")
        (tid_len,) = struct.unpack("<I", fh.read(4))
        template_id = fh.read(tid_len).decode("utf-8")
        (n_labels,) = struct.unpack("<I", fh.read(4))
        (feature_dim,) = struct.unpack("<I", fh.read(4))
        if n_labels != len(labels):
            raise DimensionMismatch(f"file has {n_labels} labels, caller supplied {len(labels)}")
        body = fh.read(4 * n_labels * feature_dim)
        if len(body) != 4 * n_labels * feature_dim:
            raise ScorerError("truncated scorer file")
        weights = np.frombuffer(body, dtype="<f4").astype(float).reshape(n_labels, feature_dim)
        tail = fh.read(4 * n_labels)
        if len(tail) != 4 * n_labels:
            raise ScorerError("truncated scorer file")
        bias = np.frombuffer(tail, dtype="<f4").astype(float)
    return ScorerParams(template_id, tuple(labels), weights, bias)
