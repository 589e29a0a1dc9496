import { scaleLog } from "d3-scale";
import { schemeCategory10 } from "d3-scale-chromatic";

import { ConvergenceRow, ErrorSeries, ERROR_SERIES } from "./csv.js";
import { escapeXml, openSvg, px, Margins } from "./svg.js";

export interface ConvergencePlotOptions {
  /** Which error columns to draw; defaults to all three. */
  series?: readonly ErrorSeries[];
  /** Draw a dashed first-order reference line. */
  refSlope?: boolean;
  width?: number;
  height?: number;
  title?: string;
  xLabel?: string;
  yLabel?: string;
}

/** One plotted series: errors against 1/dx, plus the fitted order. */
export interface RenderedSeries {
  name: ErrorSeries;
  /** 1/dx, ascending (finest mesh last). */
  x: number[];
  /** Error values matching x. */
  y: number[];
  /** Least-squares slope of ln(err) against ln(dx): the observed order. */
  slope: number;
}

export interface ConvergencePlot {
  svg: string;
  series: RenderedSeries[];
}

/**
 * Fit the convergence order by least squares of ln(err) against ln(dx).
 *
 * A positive result means the error shrinks with the mesh size; first-order
 * convergence gives a slope near 1.
 */
export function fitSlope(dx: readonly number[], err: readonly number[]): number {
  if (dx.length !== err.length) {
    throw new Error(`fitSlope needs matching arrays (got ${dx.length} and ${err.length})`);
  }
  if (dx.length < 2) {
    throw new Error("fitSlope needs at least two points");
  }
  const lx = dx.map(Math.log);
  const ly = err.map(Math.log);
  const n = lx.length;
  const mx = lx.reduce((a, b) => a + b, 0) / n;
  const my = ly.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  return sxy / sxx;
}

const MARKER_RADIUS = 3.5;

function marker(shape: number, cx: number, cy: number, color: string): string {
  const r = MARKER_RADIUS;
  switch (shape % 3) {
    case 0:
      return `<circle cx="${px(cx)}" cy="${px(cy)}" r="${r}" fill="${color}"/>`;
    case 1:
      return `<rect x="${px(cx - r)}" y="${px(cy - r)}" width="${2 * r}" height="${2 * r}" fill="${color}"/>`;
    default:
      return (
        `<path d="M ${px(cx)} ${px(cy - r)} L ${px(cx + r)} ${px(cy + r)} ` +
        `L ${px(cx - r)} ${px(cy + r)} Z" fill="${color}"/>`
      );
  }
}

/**
 * Render a log-log convergence plot (error against 1/dx) as an SVG string.
 *
 * Needs at least two rows; with one row there is nothing to connect and no
 * slope to fit.
 */
export function renderConvergencePlot(
  rows: readonly ConvergenceRow[],
  options: ConvergencePlotOptions = {},
): ConvergencePlot {
  if (rows.length < 2) {
    throw new Error(`need >= 2 rows to plot convergence (got ${rows.length})`);
  }
  const names = options.series ?? ERROR_SERIES;
  if (names.length === 0) {
    throw new Error("no series selected");
  }
  const width = options.width ?? 640;
  const height = options.height ?? 480;
  const margins: Margins = { top: 42, right: 170, bottom: 52, left: 72 };

  const ordered = [...rows].sort((a, b) => b.dx - a.dx);
  const xs = ordered.map((row) => 1 / row.dx);
  const series: RenderedSeries[] = names.map((name) => ({
    name,
    x: xs,
    y: ordered.map((row) => row[name]),
    slope: fitSlope(
      ordered.map((row) => row.dx),
      ordered.map((row) => row[name]),
    ),
  }));

  const allErrors = series.flatMap((s) => s.y);
  const xScale = scaleLog()
    .domain([Math.min(...xs) / 1.3, Math.max(...xs) * 1.3])
    .range([margins.left, width - margins.right]);
  const yScale = scaleLog()
    .domain([Math.min(...allErrors) / 1.5, Math.max(...allErrors) * 1.5])
    .range([height - margins.bottom, margins.top]);

  let svg = openSvg(width, height);

  const plotTop = margins.top;
  const plotBottom = height - margins.bottom;
  const plotLeft = margins.left;
  const plotRight = width - margins.right;

  const xFormat = xScale.tickFormat(8, "~g");
  const yFormat = yScale.tickFormat(8, "~g");
  for (const tick of xScale.ticks()) {
    const x = px(xScale(tick));
    const label = xFormat(tick);
    const stroke = label === "" ? "#f0f0f0" : "#d8d8d8";
    svg += `<line x1="${x}" y1="${plotTop}" x2="${x}" y2="${plotBottom}" stroke="${stroke}"/>\n`;
    if (label !== "") {
      svg += `<text x="${x}" y="${plotBottom + 18}" text-anchor="middle">${escapeXml(label)}</text>\n`;
    }
  }
  for (const tick of yScale.ticks()) {
    const y = px(yScale(tick));
    const label = yFormat(tick);
    const stroke = label === "" ? "#f0f0f0" : "#d8d8d8";
    svg += `<line x1="${plotLeft}" y1="${y}" x2="${plotRight}" y2="${y}" stroke="${stroke}"/>\n`;
    if (label !== "") {
      svg += `<text x="${plotLeft - 8}" y="${px(yScale(tick) + 4)}" text-anchor="end">${escapeXml(label)}</text>\n`;
    }
  }
  svg += `<rect x="${plotLeft}" y="${plotTop}" width="${plotRight - plotLeft}" height="${plotBottom - plotTop}" fill="none" stroke="#444"/>\n`;

  if (options.refSlope) {
    // First-order guide err = C/x, anchored a factor above the topmost series.
    const top = series.reduce((best, s) => (s.y[0] > best.y[0] ? s : best), series[0]);
    const c = 1.6 * top.y[0] * top.x[0];
    const [x0, x1] = xScale.domain();
    svg += `<g data-ref-slope="1">\n`;
    svg +=
      `<line x1="${px(xScale(x0))}" y1="${px(yScale(c / x0))}" ` +
      `x2="${px(xScale(x1))}" y2="${px(yScale(c / x1))}" ` +
      `stroke="#888" stroke-dasharray="6 4"/>\n`;
    const xm = Math.sqrt(x0 * x1);
    svg += `<text x="${px(xScale(xm) + 6)}" y="${px(yScale(c / xm) - 6)}" fill="#666">slope 1</text>\n`;
    svg += `</g>\n`;
  }

  series.forEach((s, idx) => {
    const color = schemeCategory10[idx % schemeCategory10.length];
    const pointList = s.x.map((x, i) => `${px(xScale(x))},${px(yScale(s.y[i]))}`).join(" ");
    svg += `<g data-series="${s.name}">\n`;
    svg += `<polyline points="${pointList}" fill="none" stroke="${color}" stroke-width="1.5"/>\n`;
    s.x.forEach((x, i) => {
      svg += marker(idx, xScale(x), yScale(s.y[i]), color) + "\n";
    });
    svg += `</g>\n`;
  });

  const legendX = plotRight + 14;
  series.forEach((s, idx) => {
    const color = schemeCategory10[idx % schemeCategory10.length];
    const y = plotTop + 10 + idx * 22;
    svg += marker(idx, legendX + 4, y, color) + "\n";
    svg += `<text x="${legendX + 14}" y="${px(y + 4)}">${s.name} (slope ${s.slope.toFixed(2)})</text>\n`;
  });

  if (options.title) {
    svg += `<text x="${px((plotLeft + plotRight) / 2)}" y="24" text-anchor="middle" font-size="15">${escapeXml(options.title)}</text>\n`;
  }
  const xLabel = options.xLabel ?? "1/dx";
  const yLabel = options.yLabel ?? "error";
  svg += `<text x="${px((plotLeft + plotRight) / 2)}" y="${height - 14}" text-anchor="middle">${escapeXml(xLabel)}</text>\n`;
  svg +=
    `<text x="18" y="${px((plotTop + plotBottom) / 2)}" text-anchor="middle" ` +
    `transform="rotate(-90 18 ${px((plotTop + plotBottom) / 2)})">${escapeXml(yLabel)}</text>\n`;
  svg += "</svg>\n";

  return { svg, series };
}
