import itertools
import json
from collections import Counter

import numpy as np
import pytest

from opinionlab.agreement import (
    NON_ROLE,
    AgreementError,
    FrameTuple,
    NominalAnnotations,
    SpanAnnotations,
    SpanLabel,
    char_level_alpha,
    krippendorff_alpha,
    load_annotations,
    majority_vote,
    merge_frame_tuples,
)


def alpha_oracle(units):
    """Direct evaluation of nominal alpha from its definition.

    Walks every ordered label pair inside each unit for the observed part
    and pooled label counts for the expected part; shares no code with the
    implementation.
    """
    units = [u for u in units if len(u) >= 2]
    n = sum(len(u) for u in units)
    d_obs = 0.0
    for u in units:
        m = len(u)
        mismatch = sum(1 for i in range(m) for j in range(m) if i != j and u[i] != u[j])
        d_obs += mismatch / (m - 1)
    d_obs /= n
    counts = Counter(label for u in units for label in u)
    d_exp = sum(counts[v] * counts[k] for v in counts for k in counts if v != k)
    d_exp /= n * (n - 1)
    if d_exp == 0.0:
        return 1.0
    return 1.0 - d_obs / d_exp


def _nominal(rows, annotators=None):
    """rows: list of per-annotator label tuples (None = missing)."""
    annotators = annotators or tuple(f"a{i}" for i in range(len(rows[0])))
    items = {}
    for idx, row in enumerate(rows):
        items[f"item{idx}"] = {a: lab for a, lab in zip(annotators, row) if lab is not None}
    return NominalAnnotations(tuple(annotators), items)


def test_majority_vote_examples():
    assert majority_vote(["Pro", "Pro", "Anti"]) == "Pro"
    assert majority_vote(["Pro", "Anti", "Neutral"]) is None
    assert majority_vote(["Care", "Care", "Care"]) == "Care"
    assert majority_vote(["Pro", "Pro", "Anti", "Anti"]) is None
    assert majority_vote(["Pro", None, "Pro", "Anti"]) == "Pro"
    with pytest.raises(ValueError):
        majority_vote([None, None])


def test_majority_vote_order_invariant():
    votes = ["Pro", "Anti", "Pro", "Neutral", "Pro"]
    results = {majority_vote(p) for p in itertools.permutations(votes)}
    assert results == {"Pro"}


def test_alpha_perfect_agreement():
    anns = _nominal([("A", "A"), ("B", "B"), ("C", "C")])
    report = krippendorff_alpha(anns)
    assert report.alpha == 1.0
    assert not report.degenerate
    assert report.observed_disagreement == 0.0


def test_alpha_two_annotator_hand_value():
    # hand evaluation of the coincidence matrix:
    #   units (A,A) (A,B) (B,A) (B,B) give o_AA=o_BB=o_AB=o_BA=2, n=8
    #   D_o = 4/8 = 0.5, D_e = (4*4 + 4*4)/(8*7) = 4/7, alpha = 1 - 7/8
    anns = _nominal([("A", "A"), ("A", "B"), ("B", "A"), ("B", "B")])
    report = krippendorff_alpha(anns)
    assert abs(report.alpha - 0.125) <= 1e-9
    assert abs(report.observed_disagreement - 0.5) <= 1e-12
    assert abs(report.expected_disagreement - 4.0 / 7.0) <= 1e-12
    units = [("A", "A"), ("A", "B"), ("B", "A"), ("B", "B")]
    assert abs(report.alpha - alpha_oracle(units)) <= 1e-9


def _foundation_fixture():
    """Three annotators over seven labels, agreement in the reported range."""
    labels = ["Care/Harm", "Fairness/Cheating", "Loyalty/Betrayal",
              "Authority/Subversion", "Purity/Degradation", "Liberty/Oppression", "None"]
    rows = []
    for i in range(14):
        rows.append((labels[i % 7], labels[i % 7], labels[i % 7]))
    for i in range(8):
        rows.append((labels[i % 7], labels[i % 7], labels[(i + 3) % 7]))
    return rows


def test_alpha_fixture_brackets_reported_range():
    rows = _foundation_fixture()
    report = krippendorff_alpha(_nominal(rows))
    assert 0.55 <= report.alpha <= 0.85
    assert abs(report.alpha - alpha_oracle(rows)) <= 1e-9
    assert abs(report.alpha - (1.0 - report.observed_disagreement
                               / report.expected_disagreement)) <= 1e-12


def test_alpha_excludes_single_label_items():
    rows = [("A", "A"), ("A", "B"), ("B", None)]
    without = [("A", "A"), ("A", "B")]
    a1 = krippendorff_alpha(_nominal(rows)).alpha
    a2 = krippendorff_alpha(_nominal(without)).alpha
    assert a1 == a2
    assert krippendorff_alpha(_nominal(rows)).n_items == 2


def test_alpha_degenerate_single_value():
    report = krippendorff_alpha(_nominal([("A", "A"), ("A", "A")]))
    assert report.degenerate and report.alpha == 1.0
    assert report.expected_disagreement == 0.0


def test_alpha_needs_pairable_data():
    with pytest.raises(AgreementError):
        krippendorff_alpha(_nominal([("A", None), (None, "B")]))
    with pytest.raises(AgreementError):
        krippendorff_alpha(NominalAnnotations(("solo",), {"i": {"solo": "A"}}))


def test_alpha_invariant_under_relabeling_and_reordering():
    rng = np.random.default_rng(23)
    labels = ["L0", "L1", "L2", "L3"]
    for _ in range(40):
        rows = []
        for _ in range(int(rng.integers(4, 12))):
            row = tuple(labels[rng.integers(4)] if rng.random() > 0.2 else None
                        for _ in range(3))
            if sum(x is not None for x in row) >= 2:
                rows.append(row)
        if not rows:
            continue
        base = krippendorff_alpha(_nominal(rows)).alpha
        perm = list(rng.permutation(4))
        mapping = {labels[i]: labels[perm[i]] for i in range(4)}
        relabeled = [tuple(mapping[x] if x is not None else None for x in row)
                     for row in rows]
        assert abs(krippendorff_alpha(_nominal(relabeled)).alpha - base) <= 1e-12
        order = list(rng.permutation(3))
        shuffled = [tuple(row[i] for i in order) for row in rows]
        assert abs(krippendorff_alpha(_nominal(shuffled)).alpha - base) <= 1e-12


# character-level agreement over spans

FAUCI_TEXT = "Dr Fauci spoke"


def _fauci_annotations():
    return SpanAnnotations(
        annotators=("a1", "a2"),
        items={"t1": {
            "a1": (SpanLabel(0, 8, "Target", "Negative"),),
            "a2": (SpanLabel(3, 8, "Target", "Negative"),),
        }},
        texts={"t1": FAUCI_TEXT},
    )


def test_char_alpha_fauci_hand_value():
    # 14 characters: 5 agree on Target/Negative ("Fauci"), 3 disagree
    # ("Dr "), 6 agree on non-role; hand evaluation gives alpha = 38/65
    report = char_level_alpha(_fauci_annotations())
    assert abs(report.alpha - 38.0 / 65.0) <= 1e-9
    assert report.n_items == 14
    units = ([("Target/Negative", NON_ROLE)] * 3
             + [("Target/Negative", "Target/Negative")] * 5
             + [(NON_ROLE, NON_ROLE)] * 6)
    assert abs(report.alpha - alpha_oracle(units)) <= 1e-9


def test_char_alpha_drop_all_none_lowers_fixture():
    kept = char_level_alpha(_fauci_annotations(), drop_all_none=False)
    dropped = char_level_alpha(_fauci_annotations(), drop_all_none=True)
    assert abs(dropped.alpha - (-2.0 / 13.0)) <= 1e-9
    assert dropped.n_items == 8
    assert dropped.alpha <= kept.alpha
    # same comparison on a fixture where all-none characters dominate
    text = "Dr Fauci spoke at length about booster shots and travel rules"
    anns = SpanAnnotations(
        ("a1", "a2"),
        {"t1": {"a1": (SpanLabel(0, 8, "Target", "Negative"),),
                "a2": (SpanLabel(3, 8, "Target", "Negative"),)}},
        {"t1": text},
    )
    kept2 = char_level_alpha(anns, drop_all_none=False)
    dropped2 = char_level_alpha(anns, drop_all_none=True)
    assert dropped2.alpha <= kept2.alpha
    units = []
    for pos in range(len(text)):
        a1 = "Target/Negative" if 0 <= pos < 8 else NON_ROLE
        a2 = "Target/Negative" if 3 <= pos < 8 else NON_ROLE
        units.append((a1, a2))
    assert abs(kept2.alpha - alpha_oracle(units)) <= 1e-9
    dropped_units = [u for u in units if set(u) != {NON_ROLE}]
    assert abs(dropped2.alpha - alpha_oracle(dropped_units)) <= 1e-9


def test_char_alpha_identical_spans():
    anns = SpanAnnotations(
        ("a1", "a2", "a3"),
        {"t1": {a: (SpanLabel(3, 8, "Actor", "Positive"),) for a in ("a1", "a2", "a3")}},
        {"t1": FAUCI_TEXT},
    )
    assert char_level_alpha(anns).alpha == 1.0


def test_char_alpha_rejects_overlapping_spans_from_one_annotator():
    anns = SpanAnnotations(
        ("a1", "a2"),
        {"t1": {"a1": (SpanLabel(0, 5, "Actor", "Positive"),
                       SpanLabel(3, 8, "Target", "Negative")),
                "a2": (SpanLabel(0, 5, "Actor", "Positive"),)}},
        {"t1": FAUCI_TEXT},
    )
    with pytest.raises(AgreementError, match="overlap"):
        char_level_alpha(anns)


def test_merge_frame_tuples_two_of_three():
    anns = SpanAnnotations(
        ("a1", "a2", "a3"),
        {"t1": {"a1": (SpanLabel(3, 8, "Actor", "Negative"),),
                "a2": (SpanLabel(3, 8, "Actor", "Negative"),),
                "a3": ()}},
        {"t1": FAUCI_TEXT},
    )
    tuples = merge_frame_tuples(anns)
    assert tuples == [FrameTuple("t1", 3, 8, "Fauci", "Actor", "Negative")]


def test_merge_frame_tuples_single_annotator_no_tuple():
    anns = SpanAnnotations(
        ("a1", "a2"),
        {"t1": {"a1": (SpanLabel(3, 8, "Actor", "Negative"),), "a2": ()}},
        {"t1": FAUCI_TEXT},
    )
    assert merge_frame_tuples(anns) == []


def test_merge_frame_tuples_intersection():
    tuples = merge_frame_tuples(_fauci_annotations())
    assert tuples == [FrameTuple("t1", 3, 8, "Fauci", "Target", "Negative")]


def test_merge_frame_tuples_no_overlap_property():
    rng = np.random.default_rng(31)
    text = "x" * 30
    roles = ["Actor", "Target"]
    pols = ["Positive", "Negative"]
    for _ in range(60):
        items = {}
        for a in ("a1", "a2", "a3"):
            cuts = sorted(rng.choice(31, size=4, replace=False))
            spans = []
            for lo, hi in ((cuts[0], cuts[1]), (cuts[2], cuts[3])):
                if lo < hi and rng.random() < 0.8:
                    spans.append(SpanLabel(int(lo), int(hi),
                                           roles[rng.integers(2)], pols[rng.integers(2)]))
            items[a] = tuple(spans)
        anns = SpanAnnotations(("a1", "a2", "a3"), {"t": items}, {"t": text})
        tuples = merge_frame_tuples(anns)
        for t in tuples:
            assert t.surface == text[t.start:t.end]
        by_pair = {}
        for t in tuples:
            by_pair.setdefault((t.role, t.polarity), []).append(t)
        for group in by_pair.values():
            group.sort(key=lambda t: t.start)
            for prev, cur in zip(group, group[1:]):
                assert prev.end <= cur.start


# JSONL interface

def test_load_nominal_annotations(tmp_path):
    p = tmp_path / "ann.jsonl"
    rows = [
        {"item_id": "t1", "annotator": "a1", "label": "Pro"},
        {"item_id": "t1", "annotator": "a2", "label": "Anti"},
        {"item_id": "t2", "annotator": "a1", "label": "Pro"},
        {"item_id": "t2", "annotator": "a2", "label": "Pro"},
    ]
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    anns = load_annotations(p)
    assert isinstance(anns, NominalAnnotations)
    assert anns.annotators == ("a1", "a2")
    report = krippendorff_alpha(anns)
    payload = json.loads(report.to_json())
    assert set(payload) == {"alpha", "n_items", "n_annotators",
                            "observed_disagreement", "expected_disagreement", "degenerate"}


def test_load_span_annotations(tmp_path):
    p = tmp_path / "spans.jsonl"
    rows = [
        {"item_id": "t1", "annotator": "a1",
         "spans": [{"start": 0, "end": 8, "role": "Target", "polarity": "Negative"}]},
        {"item_id": "t1", "annotator": "a2",
         "spans": [{"start": 3, "end": 8, "role": "Target", "polarity": "Negative"}]},
    ]
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    anns = load_annotations(p, texts={"t1": FAUCI_TEXT})
    assert isinstance(anns, SpanAnnotations)
    assert abs(char_level_alpha(anns).alpha - 38.0 / 65.0) <= 1e-9


def test_load_rejects_double_labeling(tmp_path):
    p = tmp_path / "dup.jsonl"
    rows = [
        {"item_id": "t1", "annotator": "a1", "label": "Pro"},
        {"item_id": "t1", "annotator": "a1", "label": "Anti"},
    ]
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    with pytest.raises(AgreementError, match="twice"):
        load_annotations(p)


def test_load_rejects_mixed_records(tmp_path):
    p = tmp_path / "mixed.jsonl"
    rows = [
        {"item_id": "t1", "annotator": "a1", "label": "Pro"},
        {"item_id": "t1", "annotator": "a2",
         "spans": [{"start": 0, "end": 1, "role": "Actor", "polarity": "Positive"}]},
    ]
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    with pytest.raises(AgreementError, match="mixes"):
        load_annotations(p)


