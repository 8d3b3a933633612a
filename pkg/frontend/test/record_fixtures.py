"""Record workbench API responses for the frontend contract tests.

Stands up the real service in process (same corpus recipe as demo 03:
80 synthetic tweets, full catalog) and walks one editing scenario:

    snapshot -> add_phrase -> snapshot -> undo -> snapshot

Each response body is written byte-for-byte to test/fixtures/, so the
TypeScript tests run against exactly what the server sent, not a
hand-approximated copy.  Re-run from the repo root after any server
change:

    python3 frontend/test/record_fixtures.py
"""

import json
import pathlib

from fastapi.testclient import TestClient

from opinionlab.corpus import EmbeddingStore
from opinionlab.reasons import DEFAULT_EMBED_DIM, final_catalog
from opinionlab.service import create_app
from opinionlab.synthetic import make_synthetic

FIXTURE_DIR = pathlib.Path(__file__).parent / "fixtures"
REASON = "VaxDanger"
PHRASE = "the side effects are worse than the disease"


def main() -> None:
    corpus = list(make_synthetic(80, seed=12).tweets)
    store = EmbeddingStore(DEFAULT_EMBED_DIM)
    client = TestClient(create_app(corpus, final_catalog(store), store))
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)

    def record(name: str, resp, expect_status: int = 200) -> None:
        assert resp.status_code == expect_status, (name, resp.status_code, resp.text)
        (FIXTURE_DIR / f"{name}.json").write_bytes(resp.content)

    # pre-edit snapshot
    record("reasons_initial", client.get("/reasons"))
    record("closest_k10", client.get(f"/reasons/{REASON}/closest?k=10"))
    record("closest_k25", client.get(f"/reasons/{REASON}/closest?k=25"))
    record("wordcloud", client.get(f"/reasons/{REASON}/wordcloud"))
    record("assignments_default", client.get("/assignments"))
    record("assignments_t03", client.get("/assignments?threshold=0.3"))
    record("projection", client.get("/projection"))
    record("projection_t03", client.get("/projection?threshold=0.3"))
    record("silhouette", client.get("/silhouette"))
    record("log_initial", client.get("/session/log"))
    record("error_unknown_reason",
           client.get("/reasons/NoSuchReason/closest"), expect_status=404)

    # one phrase edit plus the fresh GETs a client must re-fetch
    record("add_phrase_response",
           client.post(f"/reasons/{REASON}/phrases", json={"phrase": PHRASE}))
    record("reasons_after_add", client.get("/reasons"))
    record("assignments_after_add", client.get("/assignments"))
    record("log_after_add", client.get("/session/log"))

    # undo and the post-undo snapshot
    record("undo_response", client.post("/session/undo"))
    record("reasons_after_undo", client.get("/reasons"))
    record("assignments_after_undo", client.get("/assignments"))
    record("log_after_undo", client.get("/session/log"))

    # sanity: undo really restored the pre-edit catalog
    before = (FIXTURE_DIR / "reasons_initial.json").read_bytes()
    after = (FIXTURE_DIR / "reasons_after_undo.json").read_bytes()
    assert before == after, "undo did not restore the initial reason list"
    k10 = json.loads((FIXTURE_DIR / "closest_k10.json").read_bytes())
    k25 = json.loads((FIXTURE_DIR / "closest_k25.json").read_bytes())
    assert k25[: len(k10)] == k10, "k=25 closest list does not extend k=10"
    manifest = {
        "reason": REASON,
        "phrase": PHRASE,
        "corpus": {"generator": "make_synthetic", "size": 80, "seed": 12},
    }
    (FIXTURE_DIR / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"recorded {len(list(FIXTURE_DIR.glob('*.json')))} fixtures -> {FIXTURE_DIR}")


if __name__ == "__main__":
    main()
