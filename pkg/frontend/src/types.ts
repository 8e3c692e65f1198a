// Wire types for the show-control service API.

export interface ManifestEvent {
    seq: number;
    t_ms: number;
    kind: "ASSET" | "FEEDBACK" | "CUE";
    payload_digest: string;
    detail: Record<string, unknown>;
}

export interface HeartbeatEvent {
    kind: "HEARTBEAT";
    t_ms: number;
}

export type StreamEvent = ManifestEvent | HeartbeatEvent;

export function isManifestEvent(e: StreamEvent): e is ManifestEvent {
    return e.kind !== "HEARTBEAT";
}

export interface Ticket {
    ticket_id: string;
    asset_id: string;
    job_id: string;
    muse_id: number;
    task_type: string;
    created_at: number;
    state: string;
    decided_by: string | null;
    decided_at: number | null;
    age_ms: number;
    preview_url: string;
}

export interface ReviewList {
    show_id: string;
    tickets: Ticket[];
    dwell_limit_ms: number;
}

export interface DecisionResponse {
    ticket_id: string;
    job_id: string;
    decision: string;
    substituted: boolean;
    released_asset_id: string;
}

export interface CueResponse {
    show_id: string;
    seed: number;
    selected_move_ids: string[];
    move_names: string[];
    poem_text: string;
    source_asset_ids: string[];
}

export interface ScoreReport {
    oks_mean: number;
    dtw_cost: number;
    dtw_normalized: number;
    energy: number;
    normalized: { accuracy: number; timing: number; energy: number };
    composite: number;
    threshold: number;
    threshold_crossed: boolean;
}

export interface LatencyReport {
    show_id: string;
    completed_count: number;
    budget_window_ms: [number, number];
    p50_ms: number;
    p95_ms: number;
    max_ms: number;
    budget_violations: string[];
    phase_counts: Record<string, number>;
    per_job: Record<string, { end_to_end_ms: number; stages: Record<string, number> }>;
}

export interface ShowStatus {
    show_id: string;
    open_round: string | null;
    closed: boolean;
    group_sizes: Record<string, number>;
    queues: Record<string, { waiting: number; in_flight: number; pool_size: number }>;
    pending_tickets: number;
    manifest_entries: number;
    t_ms: number;
}
