// Typed client for the workbench service. Diagnostics are plain GETs;
// mutations are serialized so at most one is ever in flight, matching the
// server's single write lock.

import type {
    ApiErrorBody,
    AssignmentsPayload,
    ClosestRow,
    LogEvent,
    MutationResponse,
    ProjectionRow,
    Reason,
    SilhouettePayload,
    WordcloudRow,
} from "./types.js";

export interface HttpResponse {
    status: number;
    text(): Promise<string>;
}

export type FetchLike = (url: string, init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
}) => Promise<HttpResponse>;

export class ApiRequestError extends Error {
    constructor(readonly status: number, message: string) {
        super(message);
        this.name = "ApiRequestError";
    }
}

export class MutationInFlight extends Error {
    constructor() {
        super("a mutation is already awaiting the server");
        this.name = "MutationInFlight";
    }
}

function query(params: Record<string, string | number | null | undefined>): string {
    const parts: string[] = [];
    for (const [key, value] of Object.entries(params)) {
        if (value !== null && value !== undefined) {
            parts.push(`${encodeURIComponent(key)}=${encodeURIComponent(String(value))}`);
        }
    }
    return parts.length ? `?${parts.join("&")}` : "";
}

export class WorkbenchClient {
    private mutationPending = false;

    constructor(
        private readonly baseUrl: string,
        private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
    ) {}

    get busy(): boolean {
        return this.mutationPending;
    }

    private async request<T>(path: string, init?: Parameters<FetchLike>[1]): Promise<T> {
        const resp = await this.fetchImpl(this.baseUrl + path, init);
        const body = await resp.text();
        if (resp.status !== 200) {
            let message = `request failed with status ${resp.status}`;
            try {
                message = (JSON.parse(body) as ApiErrorBody).error ?? message;
            } catch {
                // non-JSON error body, keep the status message
            }
            throw new ApiRequestError(resp.status, message);
        }
        return JSON.parse(body) as T;
    }

    private async mutate(path: string, payload?: unknown): Promise<MutationResponse> {
        if (this.mutationPending) {
            throw new MutationInFlight();
        }
        this.mutationPending = true;
        try {
            return await this.request<MutationResponse>(path, {
                method: "POST",
                headers: { "content-type": "application/json" },
                body: payload === undefined ? "{}" : JSON.stringify(payload),
            });
        } finally {
            this.mutationPending = false;
        }
    }

    // -- diagnostics ---------------------------------------------------------

    getReasons(): Promise<Reason[]> {
        return this.request<Reason[]>("/reasons");
    }

    getClosest(reasonId: string, k: number): Promise<ClosestRow[]> {
        return this.request<ClosestRow[]>(
            `/reasons/${encodeURIComponent(reasonId)}/closest${query({ k })}`);
    }

    getWordcloud(reasonId: string): Promise<WordcloudRow[]> {
        return this.request<WordcloudRow[]>(
            `/reasons/${encodeURIComponent(reasonId)}/wordcloud`);
    }

    getAssignments(threshold: number | null = null): Promise<AssignmentsPayload> {
        return this.request<AssignmentsPayload>(`/assignments${query({ threshold })}`);
    }

    getProjection(threshold: number | null = null): Promise<ProjectionRow[]> {
        return this.request<ProjectionRow[]>(`/projection${query({ threshold })}`);
    }

    async getSilhouette(threshold: number | null = null): Promise<number> {
        const payload = await this.request<SilhouettePayload>(
            `/silhouette${query({ threshold })}`);
        return payload.silhouette;
    }

    getLog(): Promise<LogEvent[]> {
        return this.request<LogEvent[]>("/session/log");
    }

    // -- mutations -----------------------------------------------------------

    addReason(id: string, phrase: string, stanceSide: string): Promise<MutationResponse> {
        return this.mutate("/reasons", { id, phrase, stance_side: stanceSide });
    }

    addPhrase(reasonId: string, phrase: string): Promise<MutationResponse> {
        return this.mutate(
            `/reasons/${encodeURIComponent(reasonId)}/phrases`, { phrase });
    }

    removeReason(reasonId: string): Promise<MutationResponse> {
        if (this.mutationPending) {
            throw new MutationInFlight();
        }
        this.mutationPending = true;
        return this.request<MutationResponse>(
            `/reasons/${encodeURIComponent(reasonId)}`, { method: "DELETE" },
        ).finally(() => {
            this.mutationPending = false;
        });
    }

    undo(): Promise<MutationResponse> {
        return this.mutate("/session/undo");
    }
}
