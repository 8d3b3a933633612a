// Browser wiring: one state object, one reducer, full re-render per action.
// Mutations follow the strict sequence dictated by the server contract:
// POST, wait for ok, then re-fetch every affected panel. Nothing updates
// ahead of the server and only one mutation can be outstanding.

import { ApiRequestError, MutationInFlight, WorkbenchClient } from "./api.js";
import { initialState, reduce, type Action } from "./state.js";
import { renderWorkbench } from "./render.js";
import type { ViewState } from "./types.js";

interface Controls {
    kSlider: HTMLInputElement;
    kValue: HTMLElement;
    thresholdSlider: HTMLInputElement;
    thresholdValue: HTMLElement;
    phraseForm: HTMLFormElement;
    phraseInput: HTMLInputElement;
    undoButton: HTMLButtonElement;
}

export class WorkbenchApp {
    private state: ViewState = initialState();

    constructor(
        private readonly client: WorkbenchClient,
        private readonly root: HTMLElement,
        private readonly controls: Controls,
    ) {}

    private dispatch(action: Action): void {
        this.state = reduce(this.state, action);
        this.root.innerHTML = renderWorkbench(this.state);
        const busy = this.state.pendingMutation !== null;
        this.controls.undoButton.disabled = busy;
        this.controls.phraseForm.querySelectorAll("button").forEach((b) => {
            b.disabled = busy;
        });
    }

    private report(err: unknown): void {
        const message = err instanceof Error ? err.message : String(err);
        this.dispatch({ kind: "error", message });
    }

    async start(): Promise<void> {
        this.bindControls();
        this.dispatch({ kind: "clear-error" });
        try {
            const reasons = await this.client.getReasons();
            this.dispatch({ kind: "reasons-loaded", reasons });
            if (reasons.length > 0) {
                await this.selectReason(reasons[0].id);
            }
            await this.refreshCorpusPanels();
            await this.refreshLog();
        } catch (err) {
            this.report(err);
        }
    }

    async selectReason(reasonId: string): Promise<void> {
        this.dispatch({ kind: "select-reason", reasonId });
        try {
            const [closest, cloud] = await Promise.all([
                this.client.getClosest(reasonId, this.state.k),
                this.client.getWordcloud(reasonId),
            ]);
            this.dispatch({ kind: "closest-loaded", rows: closest });
            this.dispatch({ kind: "wordcloud-loaded", rows: cloud });
        } catch (err) {
            if (err instanceof ApiRequestError && err.status === 404) {
                this.dispatch({ kind: "reason-missing", reasonId });
            } else {
                this.report(err);
            }
        }
    }

    private async refreshCorpusPanels(): Promise<void> {
        const t = this.state.threshold;
        const [assignments, projection, silhouette] = await Promise.all([
            this.client.getAssignments(t),
            this.client.getProjection(t),
            this.client.getSilhouette(t),
        ]);
        this.dispatch({ kind: "assignments-loaded", payload: assignments });
        this.dispatch({ kind: "projection-loaded", rows: projection });
        this.dispatch({ kind: "silhouette-loaded", value: silhouette });
    }

    private async refreshLog(): Promise<void> {
        this.dispatch({ kind: "log-loaded", events: await this.client.getLog() });
    }

    /** POST one edit, then pull fresh copies of everything it could move. */
    private async runMutation(label: string, post: () => Promise<unknown>): Promise<void> {
        try {
            this.dispatch({ kind: "mutation-started", label });
        } catch {
            return; // a mutation is pending; controls are disabled anyway
        }
        try {
            await post();
            this.dispatch({ kind: "mutation-finished" });
            const reasons = await this.client.getReasons();
            this.dispatch({ kind: "reasons-loaded", reasons });
            if (this.state.selected !== null
                && reasons.some((r) => r.id === this.state.selected)) {
                await this.selectReason(this.state.selected);
            } else if (reasons.length > 0) {
                await this.selectReason(reasons[0].id);
            }
            await this.refreshCorpusPanels();
            await this.refreshLog();
        } catch (err) {
            if (err instanceof MutationInFlight) {
                this.dispatch({ kind: "mutation-finished" });
                return;
            }
            const message = err instanceof Error ? err.message : String(err);
            this.dispatch({ kind: "mutation-failed", message });
        }
    }

    private bindControls(): void {
        const c = this.controls;
        this.root.addEventListener("click", (ev) => {
            const item = (ev.target as HTMLElement).closest("[data-reason-id]");
            if (item instanceof HTMLElement && item.classList.contains("reason")) {
                void this.selectReason(item.dataset.reasonId ?? "");
            }
        });
        c.kSlider.addEventListener("input", () => {
            const k = Number(c.kSlider.value);
            c.kValue.textContent = String(k);
            this.dispatch({ kind: "set-k", k });
            if (this.state.selected !== null) {
                this.client.getClosest(this.state.selected, k)
                    .then((rows) => this.dispatch({ kind: "closest-loaded", rows }))
                    .catch((err) => this.report(err));
            }
        });
        c.thresholdSlider.addEventListener("change", () => {
            const raw = Number(c.thresholdSlider.value);
            const threshold = raw <= 0 ? null : raw;
            c.thresholdValue.textContent = threshold === null ? "server default" : raw.toFixed(2);
            this.dispatch({ kind: "set-threshold", threshold });
            this.refreshCorpusPanels().catch((err) => this.report(err));
        });
        c.phraseForm.addEventListener("submit", (ev) => {
            ev.preventDefault();
            const phrase = c.phraseInput.value.trim();
            const reason = this.state.selected;
            if (phrase === "" || reason === null) {
                return;
            }
            void this.runMutation("add_phrase", () => this.client.addPhrase(reason, phrase))
                .then(() => {
                    c.phraseInput.value = "";
                });
        });
        c.undoButton.addEventListener("click", () => {
            void this.runMutation("undo", () => this.client.undo());
        });
    }
}

export function main(): void {
    const need = (id: string): HTMLElement => {
        const el = document.getElementById(id);
        if (el === null) {
            throw new Error(`missing #${id} in the page`);
        }
        return el;
    };
    const app = new WorkbenchApp(
        new WorkbenchClient(""),
        need("workbench-root"),
        {
            kSlider: need("k-slider") as HTMLInputElement,
            kValue: need("k-value"),
            thresholdSlider: need("threshold-slider") as HTMLInputElement,
            thresholdValue: need("threshold-value"),
            phraseForm: need("phrase-form") as HTMLFormElement,
            phraseInput: need("phrase-input") as HTMLInputElement,
            undoButton: need("undo-button") as HTMLButtonElement,
        },
    );
    void app.start();
}
