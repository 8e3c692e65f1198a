// Thin client for the documented service endpoints. The console holds no
// authoritative state: everything here is a GET or an idempotence-safe POST,
// and decisions are guarded against double submission.

import type {
    CueResponse,
    DecisionResponse,
    LatencyReport,
    ReviewList,
    ScoreReport,
    ShowStatus,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
    constructor(
        public status: number,
        public errorCode: string,
        message: string,
    ) {
        super(message);
    }
}

export class ConsoleApi {
    private inFlightDecisions = new Set<string>();

    constructor(
        private baseUrl: string,
        private fetchImpl: FetchLike = (url, init) => fetch(url, init),
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const resp = await this.fetchImpl(this.baseUrl + path, init);
        if (!resp.ok) {
            let code = `HTTP_${resp.status}`;
            let message = resp.statusText;
            try {
                const body = await resp.json();
                code = body.error_code ?? code;
                message = body.message ?? message;
            } catch {
                // non-JSON error body; keep the status text
            }
            throw new ApiError(resp.status, code, message);
        }
        return (await resp.json()) as T;
    }

    private post<T>(path: string, body?: unknown): Promise<T> {
        return this.request<T>(path, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: body === undefined ? undefined : JSON.stringify(body),
        });
    }

    status(showId: string): Promise<ShowStatus> {
        return this.request(`/shows/${showId}`);
    }

    review(showId: string): Promise<ReviewList> {
        return this.request(`/shows/${showId}/review?state=PENDING`);
    }

    /** Resolves null if a decision for this ticket is already in flight. */
    async decide(
        ticketId: string,
        decision: "APPROVE" | "REJECT",
        operator: string,
    ): Promise<DecisionResponse | null> {
        if (this.inFlightDecisions.has(ticketId)) {
            return null;
        }
        this.inFlightDecisions.add(ticketId);
        try {
            return await this.post<DecisionResponse>(`/tickets/${ticketId}/decision`, {
                decision,
                operator,
            });
        } finally {
            this.inFlightDecisions.delete(ticketId);
        }
    }

    openRound(showId: string, round: string): Promise<ShowStatus> {
        return this.post(`/shows/${showId}/rounds/${round}/open`);
    }

    closeRound(showId: string): Promise<ShowStatus> {
        return this.post(`/shows/${showId}/rounds/close`);
    }

    closeShow(showId: string): Promise<ShowStatus> {
        return this.post(`/shows/${showId}/close`);
    }

    triggerCue(showId: string, seed: number): Promise<CueResponse> {
        return this.post(`/shows/${showId}/oracle/cue`, { seed });
    }

    override(showId: string, composite: number): Promise<{ seq: number; value: number }> {
        return this.post(`/shows/${showId}/oracle/override`, { composite });
    }

    scoreRecording(showId: string, recordingJsonl: string): Promise<ScoreReport> {
        return this.request(`/shows/${showId}/oracle/score`, {
            method: "POST",
            headers: { "content-type": "application/x-ndjson" },
            body: recordingJsonl,
        });
    }

    latency(showId: string): Promise<LatencyReport | null> {
        return this.request<LatencyReport>(`/shows/${showId}/latency`).catch(
            (err: unknown) => {
                if (err instanceof ApiError && err.errorCode === "NoCompletedJobs") {
                    return null;
                }
                throw err;
            },
        );
    }

    advance(showId: string, ms: number): Promise<ShowStatus> {
        return this.post(`/shows/${showId}/advance`, { ms });
    }

    previewUrl(path: string): string {
        return this.baseUrl + path;
    }
}
