// Server payload shapes, mirrored 1:1 from the workbench HTTP API.
// The client never recomputes anything these carry; if a number is on
// screen, it came out of one of these payloads.

export interface Reason {
    id: string;
    display_name: string;
    stance_side: "Anti" | "Pro";
    phrases: string[];
}

/** [tweet_id, cosine similarity], already sorted by the server. */
export type ClosestRow = [string, number];

/** [term, tf-idf weight], already sorted by the server. */
export type WordcloudRow = [string, number];

/** [tweet_id, reason_id | null, similarity]; null means unassigned. */
export type AssignmentRow = [string, string | null, number];

export interface AssignmentsPayload {
    assignments: AssignmentRow[];
    histogram: Record<string, number>;
    unassigned: number;
}

/** [tweet_id, x, y, reason_id | null] point for the 2D scatter. */
export type ProjectionRow = [string, number, number, string | null];

export interface SilhouettePayload {
    silhouette: number;
}

export interface LogEvent {
    seq: number;
    ts: string;
    actor: string;
    action: string;
    reason_id?: string;
    phrase?: string;
    stance_side?: string;
    [extra: string]: unknown;
}

export interface MutationResponse {
    ok: boolean;
    log_length: number;
}

export interface ApiErrorBody {
    error: string;
}

// ---------------------------------------------------------------------------
// view state

/**
 * Everything the panels render, in one place. Panel fields are null until
 * the matching response lands; mutations never touch them directly, the
 * post-mutation re-fetch does.
 */
export interface ViewState {
    reasons: Reason[] | null;
    selected: string | null;
    /** closest-tweets table size; server default is 10 */
    k: number;
    /** assignment similarity cutoff; null lets the server use its default */
    threshold: number | null;
    closest: ClosestRow[] | null;
    wordcloud: WordcloudRow[] | null;
    assignments: AssignmentsPayload | null;
    projection: ProjectionRow[] | null;
    silhouette: number | null;
    log: LogEvent[] | null;
    /** action label while a mutation awaits the server; drives the stale badge */
    pendingMutation: string | null;
    error: string | null;
    /** set when the server 404s a reason id, switches to the not-found view */
    missingReason: string | null;
}
