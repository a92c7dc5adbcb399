/** Telemetry chart: per-kind window means with min/max band, emergency
 * thresholds as horizontal rules and alert markers.  Renders to an SVG
 * string so the chart logic stays testable without a DOM. */

import { AlertRow, EmergencyRule, TelemetryWindow } from "./types.js";

export interface ChartOptions {
  width?: number;
  height?: number;
  padding?: number;
}

interface Point {
  t: number;
  mean: number;
  min: number;
  max: number;
}

export function seriesFor(windows: TelemetryWindow[], kind: string): Point[] {
  const points: Point[] = [];
  for (const w of windows) {
    const summary = w.vitals[kind] ?? w.ambient[kind];
    if (!summary || summary.count === 0) continue;
    points.push({
      t: (w.window[0] + w.window[1]) / 2,
      mean: summary.mean,
      min: summary.min,
      max: summary.max,
    });
  }
  return points;
}

export function chartSvg(
  windows: TelemetryWindow[],
  kind: string,
  rules: EmergencyRule[],
  alerts: AlertRow[],
  options: ChartOptions = {},
): string {
  const width = options.width ?? 640;
  const height = options.height ?? 200;
  const pad = options.padding ?? 28;
  const points = seriesFor(windows, kind);
  const rule = rules.find((r) => r.kind === kind);
  const kindAlerts = alerts.filter((a) => a.cause.kind === kind);

  if (points.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" class="chart chart-empty">` +
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" ` +
      `class="placeholder">no ${kind} data yet</text></svg>`;
  }

  const t0 = points[0].t;
  const t1 = points[points.length - 1].t;
  const values = points.flatMap((p) => [p.min, p.max]);
  if (rule?.lower != null) values.push(rule.lower);
  if (rule?.upper != null) values.push(rule.upper);
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (hi - lo < 1e-9) {
    lo -= 1;
    hi += 1;
  }
  const margin = (hi - lo) * 0.1;
  lo -= margin;
  hi += margin;

  const x = (t: number) =>
    t1 === t0 ? width / 2 : pad + ((t - t0) / (t1 - t0)) * (width - 2 * pad);
  const y = (v: number) => height - pad - ((v - lo) / (hi - lo)) * (height - 2 * pad);
  const fmt = (n: number) => n.toFixed(1);

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" class="chart" data-kind="${kind}">`);

  // min/max band
  const upper = points.map((p) => `${fmt(x(p.t))},${fmt(y(p.max))}`);
  const lower = [...points].reverse().map((p) => `${fmt(x(p.t))},${fmt(y(p.min))}`);
  parts.push(`<polygon class="band" points="${upper.concat(lower).join(" ")}"/>`);

  // threshold rules
  for (const [edge, value] of [["lower", rule?.lower], ["upper", rule?.upper]] as const) {
    if (value == null) continue;
    parts.push(`<line class="threshold threshold-${edge}" x1="${pad}" ` +
      `x2="${width - pad}" y1="${fmt(y(value))}" y2="${fmt(y(value))}"/>`);
    parts.push(`<text class="threshold-label" x="${width - pad + 2}" ` +
      `y="${fmt(y(value))}">${value}</text>`);
  }

  // mean line
  const line = points.map((p) => `${fmt(x(p.t))},${fmt(y(p.mean))}`).join(" ");
  parts.push(`<polyline class="mean" fill="none" points="${line}"/>`);

  // alert markers
  for (const alert of kindAlerts) {
    if (alert.created_at < t0 || alert.created_at > t1) continue;
    const ax = fmt(x(alert.created_at));
    parts.push(`<line class="alert-marker" x1="${ax}" x2="${ax}" ` +
      `y1="${pad}" y2="${height - pad}"/>`);
    parts.push(`<circle class="alert-dot" cx="${ax}" ` +
      `cy="${fmt(y(alert.cause.value))}" r="3"/>`);
  }

  parts.push("</svg>");
  return parts.join("");
}
