"""
Annotator agreement and label correlations
==========================================

Two small studies: chance-corrected agreement between annotators
(Krippendorff's alpha, nominal and character-level), and Pearson
correlations between the one-hot columns of two labelings, which is how
"which foundations travel with which stances" questions get answered.
"""

from opinionlab import (
    NominalAnnotations,
    SpanAnnotations,
    SpanLabel,
    char_level_alpha,
    krippendorff_alpha,
    majority_vote,
    pearson_matrix,
)

# Three annotators label twelve tweets with stances. Disagreement on a
# third of them puts alpha well below 1 but clearly above chance.
rows = [("Pro", "Pro", "Pro")] * 5 + [("Anti", "Anti", "Anti")] * 3 \
     + [("Pro", "Anti", "Pro")] * 2 + [("Neutral", "Pro", "Anti")] * 2
annotators = ("ann1", "ann2", "ann3")
items = {f"t{i}": dict(zip(annotators, row)) for i, row in enumerate(rows)}
nominal = NominalAnnotations(annotators, items)
report = krippendorff_alpha(nominal)
print(f"nominal alpha over {report.n_items} items: {report.alpha:.3f}")
print(f"  observed disagreement {report.observed_disagreement:.3f}, "
      f"expected {report.expected_disagreement:.3f}")
print(f"  majority vote on the first split item: "
      f"{majority_vote(items['t8'].values())}")

# Span agreement is scored per character, so partially overlapping spans
# get partial credit instead of a binary miss.
spans = SpanAnnotations(
    ("ann1", "ann2"),
    {"t1": {"ann1": (SpanLabel(0, 8, "Target", "Negative"),),
            "ann2": (SpanLabel(3, 8, "Target", "Negative"),)}},
    {"t1": "Dr Fauci spoke"})
char_report = char_level_alpha(spans)
print(f"\ncharacter-level alpha, overlapping spans: {char_report.alpha:.3f}")
print(f"dropping both-unmarked characters: "
      f"{char_level_alpha(spans, drop_all_none=True).alpha:+.3f}")

# Correlation: do foundations line up with stances? Perfectly aligned
# columns give +-1; unrelated ones hover near 0.
stance = {f"t{i}": ("Anti" if i % 3 else "Pro") for i in range(30)}
foundation = {}
for i in range(30):
    if i % 3:
        foundation[f"t{i}"] = "Liberty/Oppression" if i % 2 else "Purity/Degradation"
    else:
        foundation[f"t{i}"] = "Care/Harm"
matrix = pearson_matrix(foundation, stance)
print(f"\ncorrelation matrix over {matrix.n_items} shared tweets:")
header = " ".join(f"{c:>8s}" for c in matrix.col_labels)
print(f"{'':22s}{header}")
for i, row_label in enumerate(matrix.row_labels):
    cells = " ".join(f"{matrix.r[i, j]:8.3f}" for j in range(len(matrix.col_labels)))
    print(f"{row_label:22s}{cells}")
