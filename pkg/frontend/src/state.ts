// Single reducer over ViewState. Panel data only ever enters through the
// *-loaded actions, which are fired from server responses; a mutation on its
// own changes nothing but the pending flag. That is what makes the UI
// non-optimistic: the screen can only show numbers the server has sent.

import type {
    AssignmentsPayload,
    ClosestRow,
    LogEvent,
    ProjectionRow,
    Reason,
    ViewState,
    WordcloudRow,
} from "./types.js";

export const DEFAULT_K = 10;

export function initialState(): ViewState {
    return {
        reasons: null,
        selected: null,
        k: DEFAULT_K,
        threshold: null,
        closest: null,
        wordcloud: null,
        assignments: null,
        projection: null,
        silhouette: null,
        log: null,
        pendingMutation: null,
        error: null,
        missingReason: null,
    };
}

export type Action =
    | { kind: "reasons-loaded"; reasons: Reason[] }
    | { kind: "select-reason"; reasonId: string }
    | { kind: "reason-missing"; reasonId: string }
    | { kind: "closest-loaded"; rows: ClosestRow[] }
    | { kind: "wordcloud-loaded"; rows: WordcloudRow[] }
    | { kind: "assignments-loaded"; payload: AssignmentsPayload }
    | { kind: "projection-loaded"; rows: ProjectionRow[] }
    | { kind: "silhouette-loaded"; value: number }
    | { kind: "log-loaded"; events: LogEvent[] }
    | { kind: "set-k"; k: number }
    | { kind: "set-threshold"; threshold: number | null }
    | { kind: "mutation-started"; label: string }
    | { kind: "mutation-finished" }
    | { kind: "mutation-failed"; message: string }
    | { kind: "error"; message: string }
    | { kind: "clear-error" };

export class ConcurrentMutation extends Error {}

export function reduce(state: ViewState, action: Action): ViewState {
    switch (action.kind) {
        case "reasons-loaded":
            return { ...state, reasons: action.reasons, missingReason: null };
        case "select-reason":
            // stale panels from the previous reason must not linger
            return {
                ...state, selected: action.reasonId, closest: null,
                wordcloud: null, missingReason: null,
            };
        case "reason-missing":
            return { ...state, missingReason: action.reasonId, closest: null, wordcloud: null };
        case "closest-loaded":
            return { ...state, closest: action.rows };
        case "wordcloud-loaded":
            return { ...state, wordcloud: action.rows };
        case "assignments-loaded":
            return { ...state, assignments: action.payload };
        case "projection-loaded":
            return { ...state, projection: action.rows };
        case "silhouette-loaded":
            return { ...state, silhouette: action.value };
        case "log-loaded":
            return { ...state, log: action.events };
        case "set-k":
            return { ...state, k: action.k };
        case "set-threshold":
            return { ...state, threshold: action.threshold };
        case "mutation-started":
            if (state.pendingMutation !== null) {
                throw new ConcurrentMutation(
                    `"${action.label}" while "${state.pendingMutation}" is pending`);
            }
            return { ...state, pendingMutation: action.label, error: null };
        case "mutation-finished":
            return { ...state, pendingMutation: null };
        case "mutation-failed":
            return { ...state, pendingMutation: null, error: action.message };
        case "error":
            return { ...state, error: action.message };
        case "clear-error":
            return { ...state, error: null };
        default: {
            const exhaustive: never = action;
            throw new Error(`unhandled action ${JSON.stringify(exhaustive)}`);
        }
    }
}
