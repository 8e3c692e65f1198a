// End-to-end and per-stage latency binning for the dashboard, with the
// publish budget band marked and violating jobs called out.

import type { LatencyReport } from "./types.js";

export interface Bin {
    lo_ms: number;
    hi_ms: number;
    count: number;
    inBudgetBand: boolean;
    overBudget: boolean;
}

export function binDurations(
    durations: number[],
    budget: [number, number],
    binWidthMs = 10000,
): Bin[] {
    if (durations.length === 0) {
        return [];
    }
    const maxValue = Math.max(...durations, budget[1]);
    const binCount = Math.floor(maxValue / binWidthMs) + 1;
    const bins: Bin[] = [];
    for (let i = 0; i < binCount; i++) {
        const lo = i * binWidthMs;
        const hi = lo + binWidthMs;
        bins.push({
            lo_ms: lo,
            hi_ms: hi,
            count: 0,
            inBudgetBand: lo < budget[1] && hi > budget[0],
            overBudget: lo >= budget[1],
        });
    }
    for (const d of durations) {
        bins[Math.min(Math.floor(d / binWidthMs), binCount - 1)].count += 1;
    }
    return bins;
}

export interface DashboardModel {
    bins: Bin[];
    stageTotals: Record<string, number>;
    p50_ms: number;
    p95_ms: number;
    max_ms: number;
    violations: string[];
    completed: number;
}

export function dashboardModel(report: LatencyReport): DashboardModel {
    const durations = Object.values(report.per_job).map((j) => j.end_to_end_ms);
    const stageTotals: Record<string, number> = {};
    for (const job of Object.values(report.per_job)) {
        for (const [stage, ms] of Object.entries(job.stages)) {
            stageTotals[stage] = (stageTotals[stage] ?? 0) + ms;
        }
    }
    return {
        bins: binDurations(durations, report.budget_window_ms),
        stageTotals,
        p50_ms: report.p50_ms,
        p95_ms: report.p95_ms,
        max_ms: report.max_ms,
        violations: report.budget_violations,
        completed: report.completed_count,
    };
}
