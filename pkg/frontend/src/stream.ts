// Manifest event stream over the service's WS endpoint: monotonic cursor,
// gap-free resume after reconnect, heartbeat-based staleness detection.

import type { ManifestEvent, StreamEvent } from "./types.js";
import { isManifestEvent } from "./types.js";

export interface WebSocketLike {
    // deliberately loose: both the browser WebSocket and the node "ws"
    // client satisfy these slots
    onopen: ((ev: any) => void) | null;
    onclose: ((ev: any) => void) | null;
    onmessage: ((ev: any) => void) | null;
    close(): void;
}

export type SocketFactory = (url: string) => WebSocketLike;

export interface StreamOptions {
    staleAfterMs?: number;
    maxBackoffMs?: number;
    timeSource?: () => number;
}

export class StreamClient {
    cursor = -1; // last seen manifest seq
    connected = false;
    private socket: WebSocketLike | null = null;
    private listeners: ((event: ManifestEvent) => void)[] = [];
    private staleListeners: ((stale: boolean) => void)[] = [];
    private reconnectAttempts = 0;
    private lastActivity = 0;
    private stale = false;
    private closed = false;
    private staleTimer: ReturnType<typeof setInterval> | null = null;
    private staleAfterMs: number;
    private maxBackoffMs: number;
    private now: () => number;

    constructor(
        private urlFor: (fromSeq: number) => string,
        private makeSocket: SocketFactory,
        options: StreamOptions = {},
    ) {
        this.staleAfterMs = options.staleAfterMs ?? 5000;
        this.maxBackoffMs = options.maxBackoffMs ?? 15000;
        this.now = options.timeSource ?? (() => Date.now());
    }

    onEvent(fn: (event: ManifestEvent) => void): void {
        this.listeners.push(fn);
    }

    onStaleChange(fn: (stale: boolean) => void): void {
        this.staleListeners.push(fn);
    }

    connect(): void {
        this.closed = false;
        this.open();
        if (this.staleTimer === null) {
            this.staleTimer = setInterval(() => this.checkStale(), 1000);
        }
    }

    close(): void {
        this.closed = true;
        if (this.staleTimer !== null) {
            clearInterval(this.staleTimer);
            this.staleTimer = null;
        }
        this.socket?.close();
        this.socket = null;
    }

    private open(): void {
        const url = this.urlFor(this.cursor + 1);
        const socket = this.makeSocket(url);
        this.socket = socket;
        socket.onopen = () => {
            this.connected = true;
            this.reconnectAttempts = 0;
            this.touch();
        };
        socket.onmessage = (ev) => {
            this.touch();
            const event = JSON.parse(String(ev.data)) as StreamEvent;
            if (!isManifestEvent(event)) {
                return; // heartbeat: activity only
            }
            if (event.seq <= this.cursor) {
                return; // duplicate after a racy reconnect
            }
            this.cursor = event.seq;
            for (const fn of this.listeners) {
                fn(event);
            }
        };
        socket.onclose = () => {
            this.connected = false;
            if (!this.closed) {
                this.scheduleReconnect();
            }
        };
    }

    private scheduleReconnect(): void {
        const delay = Math.min(500 * 2 ** this.reconnectAttempts, this.maxBackoffMs);
        this.reconnectAttempts += 1;
        setTimeout(() => {
            if (!this.closed) {
                this.open();
            }
        }, delay);
    }

    private touch(): void {
        this.lastActivity = this.now();
        if (this.stale) {
            this.stale = false;
            this.staleListeners.forEach((fn) => fn(false));
        }
    }

    checkStale(): void {
        const quiet = this.now() - this.lastActivity;
        const isStale = !this.connected || quiet >= this.staleAfterMs;
        if (isStale !== this.stale) {
            this.stale = isStale;
            this.staleListeners.forEach((fn) => fn(isStale));
        }
    }

    get isStale(): boolean {
        return this.stale;
    }
}
