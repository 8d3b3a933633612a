"""
The reason-grounding workbench
==============================

Reasons are named justification themes, each carried by a handful of
exemplar phrases. Tweets attach to their most similar reason by embedding
cosine; everything a coder does (add a reason, add a phrase, undo) is an
event in an append-only log, so a session can always be replayed.

The same operations are exposed over HTTP by `opinionlab serve`; this
script drives them directly.
"""

from collections import Counter

from opinionlab import (
    CatalogSession,
    EmbeddingStore,
    add_phrase,
    add_reason,
    assign_all,
    closest_tweets,
    final_catalog,
    make_synthetic,
    silhouette,
    undo,
    wordcloud_terms,
)
from opinionlab.reasons import DEFAULT_EMBED_DIM

corpus = make_synthetic(80, seed=12)
store = EmbeddingStore(DEFAULT_EMBED_DIM)
session = CatalogSession(corpus.tweets, final_catalog(store), store,
                         threshold=0.20)

histogram = Counter(a.reason_id for a in session.assignments)
print(f"{len(session.catalog)} reasons over {len(session.corpus)} tweets")
for rid, count in histogram.most_common(8):
    bar = "#" * count
    print(f"  {str(rid):20s} {bar}")
print(f"  unassigned: {histogram.get(None, 0)}")

# Inspect one cluster: its nearest tweets and its discriminating n-grams.
rid = next(r for r, _ in histogram.most_common() if r is not None)
print(f"\nclosest tweets to {rid}:")
for tid, sim in closest_tweets(session, rid, k=3):
    text = next(t.text for t in session.corpus if t.id == tid)
    print(f"  {sim:.3f}  {text[:70]}")
print(f"word cloud for {rid}:")
for term, weight in wordcloud_terms(session, rid, top_n=6):
    print(f"  {weight:6.3f}  {term}")

print(f"\nsilhouette before editing: {silhouette(session):+.3f}")

# A coder spots a theme the catalog misses and carves it out.
session = add_reason(session, "VaxScheduling", "could not get an appointment",
                     stance_side="Anti")
session = add_phrase(session, "VaxScheduling", "clinic hours clash with my shifts")
moved = sum(1 for a in assign_all(session) if a.reason_id == "VaxScheduling")
print(f"after adding VaxScheduling: {moved} tweets move to it")

# Second thoughts: undo removes the latest surviving edit. The log keeps
# the undo itself, so the session file still tells the whole story.
session = undo(session)
session = undo(session)
print(f"after undoing both edits: {len(session.catalog)} reasons, "
      f"{len(session.events)} logged events")
for ev in session.events:
    print(f"  seq {ev['seq']}: {ev['action']} {ev['reason_id']}")
