"""Multi-annotator aggregation: majority gold labels, Krippendorff's alpha
(nominal, coincidence-matrix form), character-level span agreement, and
merging of entity frame tuples.

Everything here is a pure function over immutable inputs.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

NON_ROLE = "non-role"


class AgreementError(Exception):
    pass


@dataclass(frozen=True)
class AgreementReport:
    alpha: float
    n_items: int
    n_annotators: int
    observed_disagreement: float
    expected_disagreement: float
    degenerate: bool = False

    def to_json(self) -> str:
        return json.dumps({
            "alpha": self.alpha,
            "n_items": self.n_items,
            "n_annotators": self.n_annotators,
            "observed_disagreement": self.observed_disagreement,
            "expected_disagreement": self.expected_disagreement,
            "degenerate": self.degenerate,
        })


@dataclass(frozen=True)
class SpanLabel:
    start: int
    end: int
    role: str
    polarity: str


@dataclass(frozen=True)
class FrameTuple:
    tweet_id: str
    start: int
    end: int
    surface: str
    role: str
    polarity: str


@dataclass(frozen=True)
class NominalAnnotations:
    """items[item_id][annotator] = label; an annotator may skip items."""
    annotators: tuple[str, ...]
    items: dict[str, dict[str, str]]


@dataclass(frozen=True)
class SpanAnnotations:
    """items[item_id][annotator] = spans that annotator marked on the item.

    An annotator key being present with an empty tuple means "looked at the
    item, marked nothing"; an absent key means missing data.
    """
    annotators: tuple[str, ...]
    items: dict[str, dict[str, tuple[SpanLabel, ...]]]
    texts: dict[str, str] = field(default_factory=dict)


def load_annotations(path, texts: dict[str, str] | None = None):
    """Read annotation JSONL; infers nominal vs span records from the fields.

    Nominal lines look like ``{item_id, annotator, label}``, span lines like
    ``{item_id, annotator, spans: [{start, end, role, polarity}]}``.
    """
    nominal: dict[str, dict[str, str]] = {}
    spans: dict[str, dict[str, tuple[SpanLabel, ...]]] = {}
    annotators: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            obj = json.loads(raw)
            item, ann = str(obj["item_id"]), str(obj["annotator"])
            if ann not in annotators:
                annotators.append(ann)
            if "label" in obj:
                if nominal.setdefault(item, {}).setdefault(ann, obj["label"]) != obj["label"]:
                    raise AgreementError(f"line {line_no}: {ann} labeled {item} twice")
            elif "spans" in obj:
                parsed = tuple(SpanLabel(s["start"], s["end"], s["role"], s["polarity"])
                               for s in obj["spans"])
                if item in spans and ann in spans[item]:
                    raise AgreementError(f"line {line_no}: {ann} annotated {item} twice")
                spans.setdefault(item, {})[ann] = parsed
            else:
                raise AgreementError(f"line {line_no}: record has neither label nor spans")
    if nominal and spans:
        raise AgreementError("file mixes nominal and span records")
    if spans or not nominal:
        return SpanAnnotations(tuple(annotators), spans, dict(texts or {}))
    return NominalAnnotations(tuple(annotators), nominal)


def majority_vote(labels) -> str | None:
    """Strict-majority label of the cast votes, else None (no agreement).

    Even splits and pluralities short of a majority both return None."""
    cast = [x for x in labels if x is not None]
    if not cast:
        raise ValueError("majority_vote needs at least one label")
    label, freq = Counter(cast).most_common(1)[0]
    return label if 2 * freq > len(cast) else None


def _alpha_from_units(units, n_annotators: int) -> AgreementReport:
    """Nominal alpha over label multisets, one multiset per unit."""
    usable = [u for u in units if len(u) >= 2]
    if not usable:
        raise AgreementError("no unit carries two or more labels")
    coincidence: Counter = Counter()
    for unit in usable:
        m = len(unit)
        for i, v in enumerate(unit):
            for j, k in enumerate(unit):
                if i != j:
                    coincidence[v, k] += 1.0 / (m - 1)
    n_by_value: Counter = Counter()
    for (v, _k), c in coincidence.items():
        n_by_value[v] += c
    n = sum(n_by_value.values())
    d_obs = sum(c for (v, k), c in coincidence.items() if v != k) / n
    d_exp = sum(n_by_value[v] * n_by_value[k]
                for v in n_by_value for k in n_by_value if v != k) / (n * (n - 1))
    if d_exp == 0.0:
        # single label value everywhere: no disagreement is even expressible
        return AgreementReport(1.0, len(usable), n_annotators, d_obs, d_exp, degenerate=True)
    return AgreementReport(1.0 - d_obs / d_exp, len(usable), n_annotators, d_obs, d_exp)


def krippendorff_alpha(anns: NominalAnnotations) -> AgreementReport:
    if len(anns.annotators) < 2:
        raise AgreementError("alpha needs at least two annotators")
    units = [tuple(by_ann[a] for a in anns.annotators if a in by_ann)
             for by_ann in anns.items.values()]
    return _alpha_from_units(units, len(anns.annotators))


def _char_labels(spans: tuple[SpanLabel, ...], length: int) -> list[str]:
    out = [NON_ROLE] * length
    for s in spans:
        if not (0 <= s.start < s.end <= length):
            raise AgreementError(f"span [{s.start}, {s.end}) out of range 0..{length}")
        for i in range(s.start, s.end):
            if out[i] != NON_ROLE:
                raise AgreementError(f"annotator spans overlap at char {i}")
            out[i] = f"{s.role}/{s.polarity}"
    return out


def char_level_alpha(anns: SpanAnnotations, drop_all_none: bool = False,
                     texts: dict[str, str] | None = None) -> AgreementReport:
    """Alpha over per-character role/polarity labels expanded from spans."""
    if len(anns.annotators) < 2:
        raise AgreementError("alpha needs at least two annotators")
    texts = texts if texts is not None else anns.texts
    units = []
    for item_id, by_ann in anns.items.items():
        if item_id not in texts:
            raise AgreementError(f"no text supplied for item {item_id!r}")
        length = len(texts[item_id])
        sequences = [_char_labels(by_ann[a], length)
                     for a in anns.annotators if a in by_ann]
        for pos in range(length):
            labels = tuple(seq[pos] for seq in sequences)
            if drop_all_none and all(x == NON_ROLE for x in labels):
                continue
            units.append(labels)
    return _alpha_from_units(units, len(anns.annotators))


def merge_frame_tuples(anns: SpanAnnotations,
                       texts: dict[str, str] | None = None) -> list[FrameTuple]:
    """Frame tuples over maximal character runs where >=2 annotators agree.

    A run is kept when at least two annotators assign the same role+polarity
    to every character in it; the surface is the text slice of the run.
    """
    if len(anns.annotators) < 2:
        raise AgreementError("merging needs at least two annotators")
    texts = texts if texts is not None else anns.texts
    out: list[FrameTuple] = []
    for item_id in sorted(anns.items):
        by_ann = anns.items[item_id]
        if item_id not in texts:
            raise AgreementError(f"no text supplied for item {item_id!r}")
        text = texts[item_id]
        sequences = [_char_labels(by_ann[a], len(text))
                     for a in anns.annotators if a in by_ann]
        votes = [Counter(seq[pos] for seq in sequences) for pos in range(len(text))]
        pairs = sorted({label for v in votes for label in v if label != NON_ROLE})
        for label in pairs:
            role, polarity = label.split("/", 1)
            pos = 0
            while pos < len(text):
                if votes[pos][label] >= 2:
                    start = pos
                    while pos < len(text) and votes[pos][label] >= 2:
                        pos += 1
                    out.append(FrameTuple(item_id, start, pos, text[start:pos],
                                          role, polarity))
                else:
                    pos += 1
    return out
