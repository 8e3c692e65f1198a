// HTML renderers for the three screens. Pure string builders so they are
// testable without a DOM; main.ts attaches the event handlers.

import type { DashboardModel } from "./histogram.js";
import type { ConsoleState } from "./state.js";
import type { ManifestEvent, ShowStatus, Ticket } from "./types.js";

function esc(text: unknown): string {
    return String(text).replace(/[&<>"']/g, (c) => `&#${c.charCodeAt(0)};`);
}

export function renderReviewScreen(
    state: ConsoleState,
    serverNowMs: number,
    baseUrl: string,
): string {
    if (state.pendingTickets.length === 0) {
        return `<p class="empty">No pending tickets.</p>`;
    }
    const rows = state.pendingTickets.map((t: Ticket) => {
        const age = state.ticketAgeMs(t, serverNowMs);
        const severity = state.ticketSeverity(age);
        const remaining = Math.max(0, state.dwellLimitMs - age);
        return `
<div class="ticket ${severity}" data-ticket="${esc(t.ticket_id)}">
  <img src="${esc(baseUrl + t.preview_url)}" alt="asset preview" width="160">
  <div class="meta">
    <span class="tid">${esc(t.ticket_id)}</span>
    <span>muse ${t.muse_id} · ${esc(t.task_type)}</span>
    <span class="age" data-age="${age}">age ${(age / 1000).toFixed(1)}s
      · auto in ${(remaining / 1000).toFixed(1)}s</span>
  </div>
  <button class="approve" data-ticket="${esc(t.ticket_id)}">Approve</button>
  <button class="reject" data-ticket="${esc(t.ticket_id)}">Reject</button>
</div>`;
    });
    return rows.join("\n");
}

export function renderCueScreen(state: ConsoleState, status: ShowStatus | null): string {
    const round = status?.open_round ?? "none";
    const parts = [
        `<div class="rounds">
  <span>Open round: <b>${esc(round)}</b></span>
  <button data-round="R1_BACKGROUND">Open R1</button>
  <button data-round="R2_POSE">Open R2</button>
  <button data-round="R3_OBJECT">Open R3</button>
  <button id="close-round">Close round</button>
</div>
<div class="oracle-controls">
  <label>Cue seed <input id="cue-seed" type="number" value="42"></label>
  <button id="trigger-cue">Trigger Oracle cue</button>
  <label>Override <input id="override" type="range" min="0" max="1" step="0.01" value="0.5"></label>
  <button id="send-override">Post override</button>
</div>`,
    ];
    if (state.cue) {
        const moves = state.cue.move_names.length
            ? state.cue.move_names
            : state.cue.selected_move_ids;
        parts.push(`<div class="cue">
  <h3>Tonight's moves</h3>
  <ol>${moves.map((m) => `<li>${esc(m)}</li>`).join("")}</ol>
  <pre class="poem">${esc(state.cue.poem_text)}</pre>
</div>`);
    }
    if (state.lastFeedback) {
        const f = state.lastFeedback;
        const crossed = f.value >= state.threshold;
        parts.push(`<div class="gauges">
  <div class="gauge composite ${crossed ? "crossed" : ""}">
    composite ${(f.value * 100).toFixed(0)}% (${esc(f.source)})
  </div>
  ${crossed ? `<div class="banner">THRESHOLD CROSSED</div>` : ""}
</div>`);
    }
    return parts.join("\n");
}

export function renderDashboard(model: DashboardModel | null, stale: boolean): string {
    const staleNote = stale
        ? `<div class="stale">STREAM STALE — data may be out of date</div>`
        : "";
    if (!model) {
        return `${staleNote}<p class="empty">No completed jobs yet.</p>`;
    }
    const maxCount = Math.max(...model.bins.map((b) => b.count), 1);
    const bars = model.bins
        .map((b) => {
            const height = (b.count / maxCount) * 100;
            const cls = b.overBudget ? "over" : b.inBudgetBand ? "band" : "";
            return `<div class="bar ${cls}" style="height:${height.toFixed(0)}%"
  title="${b.lo_ms / 1000}-${b.hi_ms / 1000}s: ${b.count}"></div>`;
        })
        .join("");
    const violations = model.violations.length
        ? `<div class="violations">budget violations (&gt;60s): ${model.violations
              .map((v) => `<code>${esc(v)}</code>`)
              .join(" ")}</div>`
        : `<div class="violations none">zero violations</div>`;
    const stages = Object.entries(model.stageTotals)
        .map(([stage, ms]) => `<tr><td>${esc(stage)}</td><td>${(ms / 1000).toFixed(1)}s</td></tr>`)
        .join("");
    return `${staleNote}
<div class="stats">completed ${model.completed} ·
  p50 ${(model.p50_ms / 1000).toFixed(1)}s ·
  p95 ${(model.p95_ms / 1000).toFixed(1)}s ·
  max ${(model.max_ms / 1000).toFixed(1)}s</div>
<div class="histogram">${bars}</div>
<div class="band-note">shaded band: 30-60s publish budget; red: over budget</div>
${violations}
<table class="stages"><thead><tr><th>stage</th><th>total</th></tr></thead>
<tbody>${stages}</tbody></table>`;
}

export function renderFeed(events: ManifestEvent[]): string {
    const rows = events
        .slice(-30)
        .reverse()
        .map((e) => {
            const summary =
                e.kind === "ASSET"
                    ? `${e.detail["substituted"] ? "substituted" : "published"} ${esc(
                          e.detail["asset_id"],
                      )}`
                    : e.kind === "FEEDBACK"
                      ? `feedback ${Number(e.detail["value"]).toFixed(2)} (${esc(e.detail["source"])})`
                      : `cue ${esc((e.detail["selected_move_ids"] as string[])?.join(", "))}`;
            return `<li><code>#${e.seq}</code> t=${(e.t_ms / 1000).toFixed(1)}s ${summary}</li>`;
        })
        .join("");
    return `<ul class="feed">${rows}</ul>`;
}
