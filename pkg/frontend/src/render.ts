// Pure HTML builders, one per panel. Every number on screen is copied
// straight from a server payload; full precision rides along in data-*
// attributes (the visible text may be shortened for humans). Row and span
// order is payload order, nothing is re-sorted client side.

import type {
    AssignmentsPayload,
    ClosestRow,
    LogEvent,
    ProjectionRow,
    Reason,
    ViewState,
    WordcloudRow,
} from "./types.js";

export const UNASSIGNED_COLOR = "#9aa0a6";

const PALETTE = [
    "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951", "#ff8ab7",
    "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0", "#1f77b4", "#d62728",
    "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf", "#aec7e8", "#ffbb78", "#98df8a",
];

export function esc(text: string): string {
    return text
        .replaceAll("&", "&amp;")
        .replaceAll("<", "&lt;")
        .replaceAll(">", "&gt;")
        .replaceAll('"', "&quot;");
}

/** Stable reason -> color from the catalog order; null means unassigned. */
export function colorFor(reasonId: string | null, reasonOrder: string[]): string {
    if (reasonId === null) {
        return UNASSIGNED_COLOR;
    }
    const idx = reasonOrder.indexOf(reasonId);
    return idx < 0 ? UNASSIGNED_COLOR : PALETTE[idx % PALETTE.length];
}

export function renderReasonList(reasons: Reason[], selected: string | null): string {
    const items = reasons.map((r) => {
        const cls = r.id === selected ? "reason selected" : "reason";
        return `<li class="${cls}" data-reason-id="${esc(r.id)}" data-stance="${esc(r.stance_side)}">`
            + `<span class="name">${esc(r.display_name)}</span>`
            + `<span class="side ${r.stance_side.toLowerCase()}">${esc(r.stance_side)}</span>`
            + `<span class="phrase-count" data-phrase-count="${r.phrases.length}">${r.phrases.length}</span>`
            + `</li>`;
    });
    return `<ul class="reason-list">${items.join("")}</ul>`;
}

export function renderPhrases(reason: Reason): string {
    const items = reason.phrases.map(
        (p) => `<li class="phrase" data-phrase="${esc(p)}">${esc(p)}</li>`);
    return `<ul class="phrase-list" data-reason-id="${esc(reason.id)}">${items.join("")}</ul>`;
}

export function renderClosestTable(rows: ClosestRow[]): string {
    const body = rows.map(([tweetId, sim], i) =>
        `<tr data-tweet-id="${esc(tweetId)}" data-sim="${String(sim)}">`
        + `<td class="rank">${i + 1}</td>`
        + `<td class="tweet">${esc(tweetId)}</td>`
        + `<td class="sim">${sim.toFixed(4)}</td>`
        + `</tr>`).join("");
    return `<table class="closest"><thead><tr><th>#</th><th>tweet</th><th>sim</th></tr></thead>`
        + `<tbody>${body}</tbody></table>`;
}

export function renderWordcloud(rows: WordcloudRow[]): string {
    // font size is presentation only; the weight itself is untouched
    const weights = rows.map(([, w]) => w);
    const hi = weights.length ? Math.max(...weights) : 1;
    const lo = weights.length ? Math.min(...weights) : 0;
    const spans = rows.map(([term, weight]) => {
        const rel = hi > lo ? (weight - lo) / (hi - lo) : 1;
        const px = Math.round(11 + rel * 21);
        return `<span class="cloud-term" data-term="${esc(term)}" data-weight="${String(weight)}"`
            + ` style="font-size:${px}px">${esc(term)}</span>`;
    });
    return `<div class="wordcloud">${spans.join(" ")}</div>`;
}

export function renderHistogram(payload: AssignmentsPayload): string {
    const entries = Object.entries(payload.histogram);
    const top = Math.max(1, payload.unassigned, ...entries.map(([, n]) => n));
    const bars = entries.map(([reasonId, count]) => {
        const pct = (100 * count) / top;
        return `<div class="bar-row" data-reason-id="${esc(reasonId)}" data-count="${count}">`
            + `<span class="bar-label">${esc(reasonId)}</span>`
            + `<span class="bar" style="width:${pct.toFixed(1)}%"></span>`
            + `<span class="bar-count">${count}</span>`
            + `</div>`;
    });
    const pct = (100 * payload.unassigned) / top;
    bars.push(
        `<div class="bar-row unassigned" data-reason-id="" data-count="${payload.unassigned}">`
        + `<span class="bar-label">unassigned</span>`
        + `<span class="bar" style="width:${pct.toFixed(1)}%"></span>`
        + `<span class="bar-count">${payload.unassigned}</span>`
        + `</div>`);
    return `<div class="histogram">${bars.join("")}</div>`;
}

export function renderScatter(points: ProjectionRow[], reasonOrder: string[]): string {
    const size = 420;
    const pad = 12;
    const xs = points.map((p) => p[1]);
    const ys = points.map((p) => p[2]);
    const xLo = Math.min(...xs, 0);
    const xHi = Math.max(...xs, 1e-9);
    const yLo = Math.min(...ys, 0);
    const yHi = Math.max(...ys, 1e-9);
    const sx = (x: number) => pad + ((x - xLo) / (xHi - xLo)) * (size - 2 * pad);
    const sy = (y: number) => size - pad - ((y - yLo) / (yHi - yLo)) * (size - 2 * pad);
    const dots = points.map(([tweetId, x, y, reasonId]) => {
        const fill = colorFor(reasonId, reasonOrder);
        const cls = reasonId === null ? "dot unassigned" : "dot";
        return `<circle class="${cls}" data-tweet-id="${esc(tweetId)}"`
            + ` data-reason-id="${reasonId === null ? "" : esc(reasonId)}"`
            + ` cx="${sx(x).toFixed(2)}" cy="${sy(y).toFixed(2)}" r="4" fill="${fill}">`
            + `<title>${esc(tweetId)}${reasonId === null ? "" : ": " + esc(reasonId)}</title>`
            + `</circle>`;
    }).join("");
    return `<svg class="scatter" viewBox="0 0 ${size} ${size}" width="${size}" height="${size}">${dots}</svg>`;
}

export function renderSilhouetteBadge(value: number): string {
    return `<span class="silhouette-badge" data-silhouette="${String(value)}">`
        + `silhouette ${value.toFixed(3)}</span>`;
}

export function renderLogPanel(events: LogEvent[]): string {
    const items = events.map((ev) => {
        const detail = [ev.reason_id, ev.phrase].filter((v) => v !== undefined);
        const text = `${ev.actor} ${ev.action.replaceAll("_", " ")}`
            + (detail.length ? `: ${detail.join(" / ")}` : "");
        return `<li class="log-event" data-seq="${ev.seq}" data-action="${esc(ev.action)}">`
            + `<time>${esc(ev.ts)}</time> ${esc(text)}</li>`;
    });
    return `<ol class="edit-log">${items.join("")}</ol>`;
}

export function renderStaleBadge(pending: string | null): string {
    if (pending === null) {
        return "";
    }
    return `<span class="stale-badge" data-pending="${esc(pending)}">`
        + `waiting for server (${esc(pending)})</span>`;
}

export function renderError(message: string | null): string {
    return message === null ? ""
        : `<div class="error-banner" role="alert">${esc(message)}</div>`;
}

export function renderMissingReason(reasonId: string): string {
    return `<div class="not-found" data-missing-reason="${esc(reasonId)}">`
        + `<h2>Unknown reason</h2>`
        + `<p>The server has no reason called "${esc(reasonId)}". It may have been`
        + ` removed in another session; pick one from the list.</p></div>`;
}

const LOADING = `<p class="loading">loading&hellip;</p>`;

/** Compose the full workbench; null panels render as loading stubs. */
export function renderWorkbench(state: ViewState): string {
    const reasonOrder = state.reasons ? state.reasons.map((r) => r.id) : [];
    const selected = state.reasons?.find((r) => r.id === state.selected) ?? null;
    const inspector = state.missingReason !== null
        ? renderMissingReason(state.missingReason)
        : [
            selected ? `<h2>${esc(selected.display_name)}</h2>` + renderPhrases(selected) : LOADING,
            `<section class="panel closest-panel"><h3>closest tweets (k=${state.k})</h3>`
            + (state.closest ? renderClosestTable(state.closest) : LOADING) + `</section>`,
            `<section class="panel cloud-panel"><h3>word cloud</h3>`
            + (state.wordcloud ? renderWordcloud(state.wordcloud) : LOADING) + `</section>`,
        ].join("");
    return `<div class="workbench">`
        + `<header>`
        + (state.silhouette !== null ? renderSilhouetteBadge(state.silhouette) : "")
        + renderStaleBadge(state.pendingMutation)
        + renderError(state.error)
        + `</header>`
        + `<aside class="panel reasons-panel">`
        + (state.reasons ? renderReasonList(state.reasons, state.selected) : LOADING)
        + `</aside>`
        + `<main class="inspector">${inspector}</main>`
        + `<section class="panel histogram-panel"><h3>assignments</h3>`
        + (state.assignments ? renderHistogram(state.assignments) : LOADING) + `</section>`
        + `<section class="panel scatter-panel"><h3>embedding map</h3>`
        + (state.projection ? renderScatter(state.projection, reasonOrder) : LOADING) + `</section>`
        + `<section class="panel log-panel"><h3>edit log</h3>`
        + (state.log ? renderLogPanel(state.log) : LOADING) + `</section>`
        + `</div>`;
}
