// Hand-rolled SVG charts: an intensity line with step-plot allocation
// overlays, comparison bars with savings labels, and sweep lines. Pure
// string builders so they render anywhere and test without a DOM.

import type { ComparisonRow, OverlaySeries, SweepLine } from "./viewmodel.js";

export const POLICY_COLORS: Record<string, string> = {
  agnostic: "#8a8a8a",
  greedy: "#2a9d3f",
  sr_deadline: "#2b6cb0",
  sr_threshold: "#805ad5",
  static: "#dd7a21",
};

export function policyColor(policy: string): string {
  return POLICY_COLORS[policy.split(":")[0]] ?? "#c53030";
}

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export interface OverlayInput {
  startSlot: number;
  intensities: number[];
  series: OverlaySeries[];
}

/** Intensity polyline (left scale) with per-policy allocation steps (right scale). */
export function overlayChart(input: OverlayInput, width = 640, height = 280): string {
  const pad = { left: 44, right: 40, top: 12, bottom: 26 };
  const plotW = width - pad.left - pad.right;
  const plotH = height - pad.top - pad.bottom;
  const slots = input.intensities.length;
  const maxIntensity = Math.max(1, ...input.intensities);
  const maxAlloc = Math.max(
    1, ...input.series.flatMap((s) => s.allocations.length ? s.allocations : [1]),
  );
  const x = (slot: number) => pad.left + ((slot - input.startSlot) / Math.max(1, slots)) * plotW;
  const yIntensity = (v: number) => pad.top + plotH - (v / maxIntensity) * plotH;
  const yAlloc = (v: number) => pad.top + plotH - (v / (maxAlloc * 1.25)) * plotH;

  const intensityPoints = input.intensities
    .map((v, i) => `${x(input.startSlot + i + 0.5).toFixed(1)},${yIntensity(v).toFixed(1)}`)
    .join(" ");

  const steps = input.series
    .map((series) => {
      if (series.allocations.length === 0) return "";
      let d = `M ${x(series.startSlot).toFixed(1)} ${yAlloc(series.allocations[0]).toFixed(1)}`;
      series.allocations.forEach((alloc, i) => {
        d += ` H ${x(series.startSlot + i + 1).toFixed(1)}`;
        const next = series.allocations[i + 1];
        if (next !== undefined) d += ` V ${yAlloc(next).toFixed(1)}`;
      });
      return `<path class="alloc" data-policy="${escapeXml(series.policy)}" d="${d}" ` +
        `fill="none" stroke="${policyColor(series.policy)}" stroke-width="2"/>`;
    })
    .join("");

  const legend = input.series
    .map((s, i) =>
      `<text x="${pad.left + 4 + i * 110}" y="${pad.top + 10}" fill="${policyColor(s.policy)}" ` +
      `font-size="11">${escapeXml(s.policy)}</text>`)
    .join("");

  return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" role="img">` +
    `<polyline points="${intensityPoints}" fill="none" stroke="#222" stroke-width="1.5"/>` +
    steps + legend +
    `<text x="4" y="${pad.top + 10}" font-size="10" fill="#555">gCO2eq/kWh</text>` +
    `<text x="${width - 36}" y="${pad.top + 10}" font-size="10" fill="#555">servers</text>` +
    `<text x="${pad.left}" y="${height - 6}" font-size="10" fill="#555">slot ${input.startSlot}</text>` +
    `<text x="${width - pad.right - 50}" y="${height - 6}" font-size="10" fill="#555">slot ${input.startSlot + slots}</text>` +
    `</svg>`;
}

/** Carbon bars with the API's savings percentage written above each bar. */
export function comparisonBars(rows: ComparisonRow[], width = 640, height = 240): string {
  if (rows.length === 0) return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}"/>`;
  const pad = { left: 44, right: 10, top: 26, bottom: 40 };
  const plotW = width - pad.left - pad.right;
  const plotH = height - pad.top - pad.bottom;
  const maxCarbon = Math.max(...rows.map((r) => r.carbon), 1e-9);
  const band = plotW / rows.length;
  const bars = rows
    .map((row, i) => {
      const barH = (row.carbon / maxCarbon) * plotH;
      const x = pad.left + i * band + band * 0.15;
      const y = pad.top + plotH - barH;
      const label = row.policy === "agnostic" ? row.carbonLabel
        : `${row.carbonLabel} (${row.savingsLabel})`;
      return (
        `<rect x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${(band * 0.7).toFixed(1)}" ` +
        `height="${barH.toFixed(1)}" fill="${policyColor(row.policy)}"/>` +
        `<text class="savings" x="${(x + band * 0.35).toFixed(1)}" y="${(y - 6).toFixed(1)}" ` +
        `text-anchor="middle" font-size="11">${escapeXml(label)}</text>` +
        `<text x="${(x + band * 0.35).toFixed(1)}" y="${height - 22}" text-anchor="middle" ` +
        `font-size="11">${escapeXml(row.policy)}</text>` +
        `<text x="${(x + band * 0.35).toFixed(1)}" y="${height - 8}" text-anchor="middle" ` +
        `font-size="10" fill="#555">${row.computeLabel} srv-h, done ${row.completionLabel}</text>`
      );
    })
    .join("");
  return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" role="img">` +
    `<text x="4" y="14" font-size="10" fill="#555">carbon</text>` + bars + `</svg>`;
}

/** Mean carbon per policy against completion time. */
export function sweepChart(lines: SweepLine[], width = 640, height = 240): string {
  const pad = { left: 44, right: 10, top: 14, bottom: 30 };
  const plotW = width - pad.left - pad.right;
  const plotH = height - pad.top - pad.bottom;
  const points = lines.flatMap((l) => l.points);
  if (points.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}"/>`;
  }
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  const yMax = Math.max(...ys, 1e-9);
  const x = (v: number) => pad.left + ((v - xMin) / Math.max(1e-9, xMax - xMin)) * plotW;
  const y = (v: number) => pad.top + plotH - (v / yMax) * plotH;
  const paths = lines
    .map((line) => {
      const pts = line.points.map((p) => `${x(p.x).toFixed(1)},${y(p.y).toFixed(1)}`).join(" ");
      return `<polyline data-policy="${escapeXml(line.policy)}" points="${pts}" fill="none" ` +
        `stroke="${policyColor(line.policy)}" stroke-width="2"/>`;
    })
    .join("");
  const legend = lines
    .map((l, i) =>
      `<text x="${pad.left + 4 + i * 110}" y="${pad.top + 10}" fill="${policyColor(l.policy)}" ` +
      `font-size="11">${escapeXml(l.policy)}</text>`)
    .join("");
  return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" role="img">` +
    paths + legend +
    `<text x="4" y="${height - 8}" font-size="10" fill="#555">completion time (slots)</text>` +
    `</svg>`;
}
