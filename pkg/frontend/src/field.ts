import { scaleLinear, scaleSequential } from "d3-scale";
import { interpolateViridis } from "d3-scale-chromatic";

import { FieldPoint, MeshTriangle } from "./csv.js";
import { escapeXml, openSvg, px, Margins } from "./svg.js";

export interface FieldPlotOptions {
  width?: number;
  height?: number;
  title?: string;
  /** Color interpolator on [0, 1]; defaults to viridis. */
  colormap?: (t: number) => string;
}

export interface FieldPlot {
  svg: string;
  /** Minimum and maximum nodal value (unpadded, even if constant). */
  range: [number, number];
}

function checkTriangles(points: readonly FieldPoint[], triangles: readonly MeshTriangle[]): void {
  triangles.forEach((triangle, idx) => {
    for (const vertex of triangle) {
      if (vertex >= points.length) {
        throw new Error(
          `mesh line ${idx + 2} references vertex ${vertex} but the field has only ${points.length} values`,
        );
      }
    }
  });
}

/**
 * Color domain for a value range; a constant field is padded by 0.5 on each
 * side so the colorbar stays non-degenerate.
 */
export function colorDomain(lo: number, hi: number): [number, number] {
  if (lo === hi) {
    return [lo - 0.5, hi + 0.5];
  }
  return [lo, hi];
}

/**
 * Piecewise-linear point evaluation of a nodal field over its triangulation.
 *
 * Returns a function mapping (x, y) to the interpolated value, or undefined
 * for points outside every triangle. Location is by brute-force barycentric
 * test, fine for meshes of a few thousand triangles.
 */
export function interpolateField(
  points: readonly FieldPoint[],
  triangles: readonly MeshTriangle[],
): (x: number, y: number) => number | undefined {
  checkTriangles(points, triangles);
  return (x, y) => {
    for (const [i, j, k] of triangles) {
      const p1 = points[i];
      const p2 = points[j];
      const p3 = points[k];
      const det = (p2.y - p3.y) * (p1.x - p3.x) + (p3.x - p2.x) * (p1.y - p3.y);
      const l1 = ((p2.y - p3.y) * (x - p3.x) + (p3.x - p2.x) * (y - p3.y)) / det;
      const l2 = ((p3.y - p1.y) * (x - p3.x) + (p1.x - p3.x) * (y - p3.y)) / det;
      const l3 = 1 - l1 - l2;
      if (l1 >= -1e-12 && l2 >= -1e-12 && l3 >= -1e-12) {
        return l1 * p1.value + l2 * p2.value + l3 * p3.value;
      }
    }
    return undefined;
  };
}

const COLORBAR_STRIPS = 64;

/**
 * Render a nodal field as flat-shaded mesh triangles with a colorbar.
 *
 * Each triangle is filled with the color of its mean nodal value, so holes in
 * the triangulation (an annulus interior, say) stay empty. Throws when the
 * mesh references vertices the field does not have.
 */
export function renderFieldPlot(
  points: readonly FieldPoint[],
  triangles: readonly MeshTriangle[],
  options: FieldPlotOptions = {},
): FieldPlot {
  if (points.length === 0) {
    throw new Error("field CSV has no rows");
  }
  checkTriangles(points, triangles);

  const values = points.map((p) => p.value);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const color = scaleSequential(options.colormap ?? interpolateViridis).domain(colorDomain(lo, hi));

  const width = options.width ?? 560;
  const height = options.height ?? 480;
  const margins: Margins = { top: 42, right: 110, bottom: 24, left: 24 };
  const plotWidth = width - margins.left - margins.right;
  const plotHeight = height - margins.top - margins.bottom;

  const xLo = Math.min(...points.map((p) => p.x));
  const xHi = Math.max(...points.map((p) => p.x));
  const yLo = Math.min(...points.map((p) => p.y));
  const yHi = Math.max(...points.map((p) => p.y));
  const scale = Math.min(plotWidth / Math.max(xHi - xLo, 1e-30), plotHeight / Math.max(yHi - yLo, 1e-30));
  const xMid = (xLo + xHi) / 2;
  const yMid = (yLo + yHi) / 2;
  const toScreenX = (x: number) => margins.left + plotWidth / 2 + (x - xMid) * scale;
  const toScreenY = (y: number) => margins.top + plotHeight / 2 - (y - yMid) * scale;

  let svg = openSvg(width, height);

  for (const [i, j, k] of triangles) {
    const fill = color((points[i].value + points[j].value + points[k].value) / 3);
    const cornerList = [points[i], points[j], points[k]]
      .map((p) => `${px(toScreenX(p.x))},${px(toScreenY(p.y))}`)
      .join(" ");
    // Stroke in the fill color to close antialiasing seams between triangles.
    svg += `<polygon points="${cornerList}" fill="${fill}" stroke="${fill}" stroke-width="0.5"/>\n`;
  }

  const barX = width - margins.right + 28;
  const barWidth = 16;
  const barTop = margins.top;
  const barHeight = plotHeight;
  const [dLo, dHi] = color.domain();
  svg += `<g data-colorbar="value">\n`;
  for (let strip = 0; strip < COLORBAR_STRIPS; strip++) {
    const t0 = strip / COLORBAR_STRIPS;
    const t1 = (strip + 1) / COLORBAR_STRIPS;
    const y = barTop + barHeight * (1 - t1);
    const fill = color(dLo + (dHi - dLo) * (t0 + t1) / 2);
    svg += `<rect x="${barX}" y="${px(y)}" width="${barWidth}" height="${px(barHeight / COLORBAR_STRIPS + 0.5)}" fill="${fill}"/>\n`;
  }
  svg += `<rect x="${barX}" y="${barTop}" width="${barWidth}" height="${barHeight}" fill="none" stroke="#444"/>\n`;
  const tickScale = scaleLinear().domain([dLo, dHi]).range([barTop + barHeight, barTop]);
  for (const tick of tickScale.ticks(5)) {
    const y = px(tickScale(tick));
    svg += `<line x1="${barX + barWidth}" y1="${y}" x2="${barX + barWidth + 4}" y2="${y}" stroke="#444"/>\n`;
    svg += `<text x="${barX + barWidth + 8}" y="${px(tickScale(tick) + 4)}">${escapeXml(String(tick))}</text>\n`;
  }
  svg += `</g>\n`;

  if (options.title) {
    svg += `<text x="${px(margins.left + plotWidth / 2)}" y="24" text-anchor="middle" font-size="15">${escapeXml(options.title)}</text>\n`;
  }
  svg += "</svg>\n";

  return { svg, range: [lo, hi] };
}
