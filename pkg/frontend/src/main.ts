// Console entry point: wires the API client, the event stream, and the three
// screens into the page. Base URL and show id come from the query string
// (?base=http://host:port&show=main&operator=name).

import { ApiError, ConsoleApi } from "./api.js";
import { dashboardModel, type DashboardModel } from "./histogram.js";
import { renderCueScreen, renderDashboard, renderFeed, renderReviewScreen } from "./render.js";
import { ConsoleState } from "./state.js";
import { StreamClient } from "./stream.js";
import type { ShowStatus } from "./types.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("base") ?? "";
const showId = params.get("show") ?? "main";
const operator = params.get("operator") ?? "console-operator";

const api = new ConsoleApi(baseUrl);
const state = new ConsoleState();
let status: ShowStatus | null = null;
let dashboard: DashboardModel | null = null;

const el = (id: string) => document.getElementById(id)!;

function showError(err: unknown): void {
    const box = el("errors");
    const message =
        err instanceof ApiError ? `${err.errorCode}: ${err.message}` : String(err);
    box.innerHTML = `<div class="error">${message}</div>`;
    setTimeout(() => (box.innerHTML = ""), 6000);
}

function redraw(): void {
    el("review").innerHTML = renderReviewScreen(state, status?.t_ms ?? 0, baseUrl);
    el("cue").innerHTML = renderCueScreen(state, status);
    el("dashboard").innerHTML = renderDashboard(dashboard, stream.isStale);
    el("events").innerHTML = renderFeed(state.feed);
    el("session").textContent =
        `show ${showId} · operator ${operator} · cursor ${stream.cursor}`;
}

async function refreshReview(): Promise<void> {
    try {
        const review = await api.review(showId);
        state.setReview(review.tickets, review.dwell_limit_ms);
    } catch (err) {
        showError(err);
    }
}

async function refreshStatusAndLatency(): Promise<void> {
    try {
        status = await api.status(showId);
        const report = await api.latency(showId);
        dashboard = report ? dashboardModel(report) : null;
        if (report) {
            state.threshold = state.threshold; // threshold comes from score config
        }
    } catch (err) {
        showError(err);
    }
}

const stream = new StreamClient(
    (fromSeq) =>
        `${baseUrl.replace(/^http/, "ws")}/shows/${showId}/stream?from_seq=${fromSeq}`,
    (url) => new WebSocket(url),
);
stream.onEvent((event) => {
    state.apply(event);
    // a decision or publish may change latency and review state
    void refreshStatusAndLatency().then(redraw);
    redraw();
});
stream.onStaleChange(() => redraw());
stream.connect();

document.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const ticketId = target.dataset["ticket"];
    if (ticketId && (target.classList.contains("approve") || target.classList.contains("reject"))) {
        target.setAttribute("disabled", "true");
        const decision = target.classList.contains("approve") ? "APPROVE" : "REJECT";
        api.decide(ticketId, decision, operator)
            .then(() => refreshReview())
            .then(redraw)
            .catch(showError);
        return;
    }
    const round = target.dataset["round"];
    if (round) {
        api.openRound(showId, round).then((s) => ((status = s), redraw())).catch(showError);
        return;
    }
    if (target.id === "close-round") {
        api.closeRound(showId).then((s) => ((status = s), redraw())).catch(showError);
    } else if (target.id === "trigger-cue") {
        const seed = Number((el("cue-seed") as HTMLInputElement).value);
        api.triggerCue(showId, seed)
            .then((cue) => (state.setCue(cue), redraw()))
            .catch(showError);
    } else if (target.id === "send-override") {
        const value = Number((el("override") as HTMLInputElement).value);
        api.override(showId, value).catch(showError);
    }
});

setInterval(() => {
    void refreshReview().then(redraw);
}, 2000);
setInterval(() => {
    void refreshStatusAndLatency().then(redraw);
}, 3000);

void refreshReview()
    .then(refreshStatusAndLatency)
    .then(redraw);
