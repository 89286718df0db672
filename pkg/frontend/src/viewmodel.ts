// Turns API responses into display rows. Numbers are formatted, never
// recomputed; the savings figure is the API's own value rounded for
// display.

import type { SimulateResponse, SweepResponse } from "./api.js";

export interface ComparisonRow {
  policy: string;
  carbon: number;
  carbonLabel: string;
  computeHours: number;
  computeLabel: string;
  completion: number;
  completionLabel: string;
  savingsPct: number;
  savingsLabel: string;
  metDeadline: boolean;
}

const POLICY_ORDER = ["agnostic", "sr_deadline", "sr_threshold", "static", "greedy"];

function policyRank(label: string): number {
  const base = label.split(":")[0];
  const index = POLICY_ORDER.indexOf(base);
  return index === -1 ? POLICY_ORDER.length : index;
}

export function comparisonRows(response: SimulateResponse): ComparisonRow[] {
  const rows = Object.entries(response.policies).map(([policy, result]) => ({
    policy,
    carbon: result.metrics.carbon_g,
    carbonLabel: result.metrics.carbon_g.toFixed(1),
    computeHours: result.metrics.compute_slot_hours,
    computeLabel: result.metrics.compute_slot_hours.toFixed(2),
    completion: result.metrics.completion_slot,
    completionLabel: result.metrics.completion_slot.toFixed(2),
    savingsPct: result.savings_vs_agnostic_pct,
    savingsLabel: `${result.savings_vs_agnostic_pct.toFixed(1)}%`,
    metDeadline: result.metrics.met_deadline,
  }));
  rows.sort((a, b) => policyRank(a.policy) - policyRank(b.policy) || a.policy.localeCompare(b.policy));
  return rows;
}

export interface OverlaySeries {
  policy: string;
  startSlot: number;
  allocations: number[];
}

export function overlaySeries(response: SimulateResponse): OverlaySeries[] {
  return comparisonRows(response).map(({ policy }) => {
    const schedule = response.policies[policy].schedule;
    return {
      policy,
      startSlot: schedule.window_start,
      allocations: schedule.allocations,
    };
  });
}

export interface SweepLine {
  policy: string;
  points: { x: number; y: number }[];
}

export function sweepLines(response: SweepResponse): SweepLine[] {
  const byPolicy = new Map<string, { x: number; y: number }[]>();
  for (const cell of response.summary.cells) {
    if (!byPolicy.has(cell.policy)) byPolicy.set(cell.policy, []);
    byPolicy.get(cell.policy)!.push({ x: cell.axis_value, y: cell.mean_carbon_g });
  }
  return [...byPolicy.entries()]
    .map(([policy, points]) => ({
      policy,
      points: points.sort((a, b) => a.x - b.x),
    }))
    .sort((a, b) => policyRank(a.policy) - policyRank(b.policy));
}
