// Contract tests against recorded server responses. The fixtures are the
// literal bytes a real workbench service returned for one scripted editing
// session (see record_fixtures.py); the stub below replays them with the
// same before/after-edit phasing. Everything asserted here is therefore
// "does the UI show exactly what the server said", never "does the UI
// compute the right similarity" -- it must not compute any.

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { ApiRequestError, MutationInFlight, WorkbenchClient, type FetchLike } from "../src/api.js";
import { ConcurrentMutation, initialState, reduce } from "../src/state.js";
import {
    UNASSIGNED_COLOR,
    renderClosestTable,
    renderHistogram,
    renderLogPanel,
    renderReasonList,
    renderScatter,
    renderWordcloud,
    renderWorkbench,
} from "../src/render.js";
import type {
    AssignmentsPayload,
    ClosestRow,
    LogEvent,
    ProjectionRow,
    Reason,
    ViewState,
    WordcloudRow,
} from "../src/types.js";

function fixtureText(name: string): string {
    return readFileSync(new URL(`./fixtures/${name}.json`, import.meta.url), "utf-8");
}

function fixture<T>(name: string): T {
    return JSON.parse(fixtureText(name)) as T;
}

const MANIFEST = fixture<{ reason: string; phrase: string }>("manifest");
const REASON = MANIFEST.reason;

/**
 * Replays the recorded session. Mutations advance the phase, so a fresh GET
 * after an edit serves the re-recorded payload exactly like the live server
 * would. Any request outside the recorded script is a test bug and throws.
 */
type Phase = "initial" | "afterAdd" | "afterUndo";

class FixtureServer {
    phase: Phase = "initial";
    requests: string[] = [];

    private byPhase(initial: string, afterAdd: string, afterUndo: string): string {
        return this.phase === "initial" ? initial
            : this.phase === "afterAdd" ? afterAdd : afterUndo;
    }

    fetch: FetchLike = (url, init) => {
        const method = init?.method ?? "GET";
        this.requests.push(`${method} ${url}`);
        const respond = (name: string, status = 200) => Promise.resolve({
            status,
            text: () => Promise.resolve(fixtureText(name)),
        });
        if (method === "GET") {
            switch (url) {
                case "/reasons":
                    return respond(this.byPhase(
                        "reasons_initial", "reasons_after_add", "reasons_after_undo"));
                case `/reasons/${REASON}/closest?k=10`:
                    return respond("closest_k10");
                case `/reasons/${REASON}/closest?k=25`:
                    return respond("closest_k25");
                case "/reasons/NoSuchReason/closest?k=10":
                    return respond("error_unknown_reason", 404);
                case `/reasons/${REASON}/wordcloud`:
                    return respond("wordcloud");
                case "/assignments":
                    return respond(this.byPhase(
                        "assignments_default", "assignments_after_add", "assignments_after_undo"));
                case "/assignments?threshold=0.3":
                    return respond("assignments_t03");
                case "/projection":
                    return respond("projection");
                case "/projection?threshold=0.3":
                    return respond("projection_t03");
                case "/silhouette":
                    return respond("silhouette");
                case "/session/log":
                    return respond(this.byPhase(
                        "log_initial", "log_after_add", "log_after_undo"));
            }
        }
        if (method === "POST" && url === `/reasons/${REASON}/phrases`) {
            expect(this.phase).toBe("initial");
            expect(JSON.parse(init?.body ?? "{}")).toEqual({ phrase: MANIFEST.phrase });
            this.phase = "afterAdd";
            return respond("add_phrase_response");
        }
        if (method === "POST" && url === "/session/undo") {
            expect(this.phase).toBe("afterAdd");
            this.phase = "afterUndo";
            return respond("undo_response");
        }
        throw new Error(`request outside the recorded session: ${method} ${url}`);
    };
}

function freshClient(): { client: WorkbenchClient; server: FixtureServer } {
    const server = new FixtureServer();
    return { client: new WorkbenchClient("", server.fetch), server };
}

// extraction helpers: pull data-* attributes back out of rendered HTML in
// document order, so assertions compare against payload order directly
function attrValues(html: string, attr: string): string[] {
    return [...html.matchAll(new RegExp(`${attr}="([^"]*)"`, "g"))].map((m) => m[1]);
}

function panel(html: string, marker: string): string {
    const start = html.indexOf(marker);
    expect(start).toBeGreaterThanOrEqual(0);
    const end = html.indexOf("</section>", start);
    return html.slice(start, end < 0 ? html.length : end);
}

describe("reason inspector", () => {
    it("renders the closest-tweets table in exactly the API order", () => {
        const rows = fixture<ClosestRow[]>("closest_k10");
        const html = renderClosestTable(rows);
        expect(attrValues(html, "data-tweet-id")).toEqual(rows.map(([tid]) => tid));
        const sims = attrValues(html, "data-sim").map(Number);
        expect(sims).toEqual(rows.map(([, sim]) => sim)); // exact doubles
    });

    it("renders word-cloud terms with exactly the API weights", () => {
        const rows = fixture<WordcloudRow[]>("wordcloud");
        const html = renderWordcloud(rows);
        expect(attrValues(html, "data-term")).toEqual(rows.map(([term]) => term));
        expect(attrValues(html, "data-weight").map(Number)).toEqual(rows.map(([, w]) => w));
    });

    it("keeps the same order inside the composed workbench view", () => {
        const rows = fixture<ClosestRow[]>("closest_k10");
        const state: ViewState = {
            ...initialState(),
            reasons: fixture<Reason[]>("reasons_initial"),
            selected: REASON,
            closest: rows,
            wordcloud: fixture<WordcloudRow[]>("wordcloud"),
        };
        const table = panel(renderWorkbench(state), '<table class="closest">');
        expect(attrValues(table, "data-tweet-id")).toEqual(rows.map(([tid]) => tid));
    });

    it("grows k=10 to k=25 as an order-preserving prefix", () => {
        const k10 = fixture<ClosestRow[]>("closest_k10");
        const k25 = fixture<ClosestRow[]>("closest_k25");
        expect(k25.slice(0, k10.length)).toEqual(k10); // server-side property
        const ids10 = attrValues(renderClosestTable(k10), "data-tweet-id");
        const ids25 = attrValues(renderClosestTable(k25), "data-tweet-id");
        expect(ids25.length).toBe(25);
        expect(ids25.slice(0, ids10.length)).toEqual(ids10);
    });
});

describe("add_phrase round trip", () => {
    it("updates the histogram to match a fresh GET /assignments", async () => {
        const { client } = freshClient();
        let state = { ...initialState(), assignments: await client.getAssignments() };
        const before = attrValues(renderHistogram(state.assignments!), "data-count");

        await client.addPhrase(REASON, MANIFEST.phrase);
        // no optimistic update: the panel still shows pre-edit numbers
        expect(attrValues(renderHistogram(state.assignments!), "data-count")).toEqual(before);

        const fresh = await client.getAssignments();
        state = reduce(state, { kind: "assignments-loaded", payload: fresh });
        const html = renderHistogram(state.assignments!);
        const recorded = fixture<AssignmentsPayload>("assignments_after_add");
        const ids = attrValues(html, "data-reason-id");
        const counts = attrValues(html, "data-count").map(Number);
        const rendered = Object.fromEntries(ids.map((id, i) => [id, counts[i]]));
        expect(rendered[""]).toBe(recorded.unassigned);
        for (const [rid, n] of Object.entries(recorded.histogram)) {
            expect(rendered[rid]).toBe(n);
        }
        expect(ids.length).toBe(Object.keys(recorded.histogram).length + 1);
        expect(fresh).toEqual(recorded);
    });

    it("appends the edit to the log panel in /session/log order", async () => {
        const { client, server } = freshClient();
        expect(await client.getLog()).toEqual([]);
        await client.addPhrase(REASON, MANIFEST.phrase);
        const events = await client.getLog();
        expect(server.phase).toBe("afterAdd");
        const html = renderLogPanel(events);
        expect(attrValues(html, "data-seq").map(Number)).toEqual(events.map((e) => e.seq));
        expect(attrValues(html, "data-action")).toEqual(events.map((e) => e.action));
        expect(events[events.length - 1].action).toBe("add_phrase");
    });
});

describe("undo", () => {
    it("restores the prior reason list", async () => {
        const { client } = freshClient();
        const initial = await client.getReasons();
        const initialHtml = renderReasonList(initial, REASON);

        await client.addPhrase(REASON, MANIFEST.phrase);
        const edited = await client.getReasons();
        expect(edited).not.toEqual(initial);
        const phrases = (rs: Reason[]) => rs.find((r) => r.id === REASON)!.phrases;
        expect(phrases(edited)).toEqual([...phrases(initial), MANIFEST.phrase]);

        await client.undo();
        const restored = await client.getReasons();
        expect(restored).toEqual(initial);
        expect(renderReasonList(restored, REASON)).toBe(initialHtml);
    });

    it("returns the assignments panel to its pre-edit numbers", async () => {
        const { client } = freshClient();
        const before = await client.getAssignments();
        await client.addPhrase(REASON, MANIFEST.phrase);
        expect((await client.getAssignments()).histogram).not.toEqual(before.histogram);
        await client.undo();
        const after = await client.getAssignments();
        expect(after).toEqual(before);
        expect(renderHistogram(after)).toBe(renderHistogram(before));
        const log = await client.getLog();
        expect(log.map((e) => e.action)).toEqual(["add_phrase", "undo"]);
    });
});

describe("threshold slider", () => {
    it("shows the API unassigned count for threshold 0.3, not a local recount", async () => {
        const { client, server } = freshClient();
        const base = await client.getAssignments();
        const cut = await client.getAssignments(0.3);
        const recorded = fixture<AssignmentsPayload>("assignments_t03");
        expect(cut).toEqual(recorded);
        expect(cut.unassigned).not.toBe(base.unassigned); // differential fixture
        const html = renderHistogram(cut);
        const ids = attrValues(html, "data-reason-id");
        const counts = attrValues(html, "data-count").map(Number);
        expect(counts[ids.indexOf("")]).toBe(recorded.unassigned);
        expect(server.requests).toContain("GET /assignments?threshold=0.3");
    });
});

describe("projection scatter", () => {
    it("colors assigned points by reason and unassigned points gray", () => {
        const points = fixture<ProjectionRow[]>("projection_t03");
        const order = fixture<Reason[]>("reasons_initial").map((r) => r.id);
        const html = renderScatter(points, order);
        const tids = attrValues(html, "data-tweet-id");
        expect(tids).toEqual(points.map(([tid]) => tid));
        const rids = attrValues(html, "data-reason-id");
        const fills = attrValues(html, "fill");
        const grays = points.filter(([, , , rid]) => rid === null).length;
        expect(grays).toBeGreaterThan(0); // fixture really exercises the case
        points.forEach(([, , , rid], i) => {
            expect(rids[i]).toBe(rid ?? "");
            if (rid === null) {
                expect(fills[i]).toBe(UNASSIGNED_COLOR);
            } else {
                expect(fills[i]).not.toBe(UNASSIGNED_COLOR);
            }
        });
    });
});

describe("mutation discipline", () => {
    it("rejects a second mutation while one is in flight", async () => {
        const { client } = freshClient();
        const first = client.addPhrase(REASON, MANIFEST.phrase);
        await expect(client.undo()).rejects.toThrow(MutationInFlight);
        await first;
        expect((await client.getLog()).length).toBe(1); // only the phrase landed
    });

    it("raises when the reducer sees overlapping mutations", () => {
        let state = reduce(initialState(), { kind: "mutation-started", label: "add_phrase" });
        expect(state.pendingMutation).toBe("add_phrase");
        expect(() => reduce(state, { kind: "mutation-started", label: "undo" }))
            .toThrow(ConcurrentMutation);
        state = reduce(state, { kind: "mutation-finished" });
        expect(state.pendingMutation).toBeNull();
    });

    it("never lets a mutation action touch panel data", () => {
        const assignments = fixture<AssignmentsPayload>("assignments_default");
        let state = reduce(initialState(), { kind: "assignments-loaded", payload: assignments });
        state = reduce(state, { kind: "log-loaded", events: fixture<LogEvent[]>("log_initial") });
        const started = reduce(state, { kind: "mutation-started", label: "add_phrase" });
        expect(started.assignments).toBe(state.assignments);
        expect(started.log).toBe(state.log);
        const finished = reduce(started, { kind: "mutation-finished" });
        expect(finished.assignments).toBe(state.assignments);
        expect(finished.log).toBe(state.log);
    });

    it("shows the stale badge exactly while a mutation is pending", () => {
        let state = reduce(initialState(), { kind: "mutation-started", label: "add_phrase" });
        expect(renderWorkbench(state)).toContain('data-pending="add_phrase"');
        state = reduce(state, { kind: "mutation-finished" });
        expect(renderWorkbench(state)).not.toContain("data-pending");
    });
});

describe("error handling", () => {
    it("maps an unknown reason to the recorded 404 and the not-found view", async () => {
        const { client } = freshClient();
        let status = 0;
        let message = "";
        try {
            await client.getClosest("NoSuchReason", 10);
        } catch (err) {
            expect(err).toBeInstanceOf(ApiRequestError);
            status = (err as ApiRequestError).status;
            message = (err as ApiRequestError).message;
        }
        expect(status).toBe(404);
        expect(message).toBe(fixture<{ error: string }>("error_unknown_reason").error);
        const state = reduce(initialState(), { kind: "reason-missing", reasonId: "NoSuchReason" });
        expect(renderWorkbench(state)).toContain('data-missing-reason="NoSuchReason"');
    });

    it("renders mutation failures as an inline banner and clears the badge", () => {
        let state = reduce(initialState(), { kind: "mutation-started", label: "add_phrase" });
        state = reduce(state, { kind: "mutation-failed", message: "phrase already present" });
        const html = renderWorkbench(state);
        expect(state.pendingMutation).toBeNull();
        expect(html).toContain("phrase already present");
        expect(html).not.toContain("data-pending");
    });
});

describe("silhouette badge", () => {
    it("shows the server value verbatim", async () => {
        const { client } = freshClient();
        const value = await client.getSilhouette();
        const state = reduce(initialState(), { kind: "silhouette-loaded", value });
        const html = renderWorkbench(state);
        expect(attrValues(html, "data-silhouette").map(Number)).toEqual([
            fixture<{ silhouette: number }>("silhouette").silhouette,
        ]);
    });
});
