// Console state, reconstructable at any time from GET endpoints plus the
// event stream: pending tickets, the live cue and feedback gauges, and the
// event feed. The threshold banner is edge-triggered: it fires once per
// upward crossing, not on every feedback event above the line.

import type { CueResponse, ManifestEvent, Ticket } from "./types.js";

export interface FeedbackState {
    value: number;
    source: string;
    t_ms: number;
}

export class ConsoleState {
    pendingTickets: Ticket[] = [];
    dwellLimitMs = 20000;
    cue: CueResponse | null = null;
    lastFeedback: FeedbackState | null = null;
    threshold = 0.6;
    thresholdBannerCount = 0;
    private aboveThreshold = false;
    feed: ManifestEvent[] = [];
    feedLimit = 200;

    setReview(tickets: Ticket[], dwellLimitMs: number): void {
        this.pendingTickets = tickets.filter((t) => t.state === "PENDING");
        this.dwellLimitMs = dwellLimitMs;
    }

    setCue(cue: CueResponse): void {
        this.cue = cue;
    }

    apply(event: ManifestEvent): void {
        this.feed.push(event);
        if (this.feed.length > this.feedLimit) {
            this.feed.splice(0, this.feed.length - this.feedLimit);
        }
        if (event.kind === "ASSET") {
            const ticketId = event.detail["ticket_id"];
            if (typeof ticketId === "string") {
                this.pendingTickets = this.pendingTickets.filter(
                    (t) => t.ticket_id !== ticketId,
                );
            }
        } else if (event.kind === "FEEDBACK") {
            const value = Number(event.detail["value"]);
            this.lastFeedback = {
                value,
                source: String(event.detail["source"]),
                t_ms: event.t_ms,
            };
            const above = value >= this.threshold;
            if (above && !this.aboveThreshold) {
                this.thresholdBannerCount += 1;
            }
            this.aboveThreshold = above;
        } else if (event.kind === "CUE") {
            const detail = event.detail as Record<string, unknown>;
            const ids = (detail["selected_move_ids"] as string[]) ?? [];
            // manifest CUE entries carry ids only; keep names from a prior
            // cue response when it described the same selection
            const sameCue =
                this.cue !== null &&
                JSON.stringify(this.cue.selected_move_ids) === JSON.stringify(ids);
            this.cue = {
                show_id: String(detail["show_id"] ?? ""),
                seed: Number(detail["seed"] ?? 0),
                selected_move_ids: ids,
                move_names: sameCue && this.cue ? this.cue.move_names : [],
                poem_text: String(detail["poem_text"] ?? ""),
                source_asset_ids: (detail["source_asset_ids"] as string[]) ?? [],
            };
        }
    }

    ticketAgeMs(ticket: Ticket, nowServerMs: number): number {
        return Math.max(0, nowServerMs - ticket.created_at);
    }

    ticketSeverity(ageMs: number): "ok" | "warn" | "critical" {
        if (ageMs >= this.dwellLimitMs) {
            return "critical";
        }
        if (ageMs >= 0.75 * this.dwellLimitMs) {
            return "warn";
        }
        return "ok";
    }
}
