import { readFileSync, writeFileSync } from "node:fs";

import { ERROR_SERIES, ErrorSeries, parseConvergenceCsv, parseFieldCsv, parseMeshCsv } from "./csv.js";
import { renderConvergencePlot } from "./convergence.js";
import { renderFieldPlot } from "./field.js";

export type Logger = (line: string) => void;

export const CONVERGENCE_USAGE =
  "usage: plot-convergence <table.csv> <out.svg> [--series err_inf,err_l2,err_h1] [--ref-slope]";
export const FIELD_USAGE = "usage: plot-field <values.csv> <mesh.csv> <out.svg>";

function readInput(path: string): string {
  try {
    return readFileSync(path, "utf8");
  } catch (err) {
    throw new Error(`cannot read ${path}: ${err instanceof Error ? err.message : String(err)}`);
  }
}

function parseSeriesList(value: string): ErrorSeries[] {
  const names = value
    .split(",")
    .map((name) => name.trim())
    .filter((name) => name.length > 0);
  const known = ERROR_SERIES as readonly string[];
  const unknown = names.filter((name) => !known.includes(name));
  if (names.length === 0 || unknown.length > 0) {
    throw new Error(`--series expects a comma-separated subset of ${ERROR_SERIES.join(",")} (got "${value}")`);
  }
  return names as ErrorSeries[];
}

/** Exit code 0 on success, 1 on data errors, 2 on usage errors. */
export function runPlotConvergence(argv: string[], log: Logger = console.log, fail: Logger = console.error): number {
  const positional: string[] = [];
  let series: ErrorSeries[] | undefined;
  let refSlope = false;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "-h" || arg === "--help") {
      log(CONVERGENCE_USAGE);
      return 0;
    } else if (arg === "--ref-slope") {
      refSlope = true;
    } else if (arg === "--series" || arg.startsWith("--series=")) {
      const value = arg === "--series" ? argv[++i] : arg.slice("--series=".length);
      if (value === undefined) {
        fail("--series needs a value");
        fail(CONVERGENCE_USAGE);
        return 2;
      }
      try {
        series = parseSeriesList(value);
      } catch (err) {
        fail(err instanceof Error ? err.message : String(err));
        return 2;
      }
    } else if (arg.startsWith("-")) {
      fail(`unknown flag: ${arg}`);
      fail(CONVERGENCE_USAGE);
      return 2;
    } else {
      positional.push(arg);
    }
  }
  if (positional.length !== 2) {
    fail(CONVERGENCE_USAGE);
    return 2;
  }
  const [csvPath, outPath] = positional;
  try {
    const rows = parseConvergenceCsv(readInput(csvPath));
    const plot = renderConvergencePlot(rows, { series, refSlope });
    writeFileSync(outPath, plot.svg);
    for (const s of plot.series) {
      log(`${s.name}: fitted slope ${s.slope.toFixed(3)} over ${s.x.length} rows`);
    }
    log(`wrote ${outPath}`);
    return 0;
  } catch (err) {
    fail(err instanceof Error ? err.message : String(err));
    return 1;
  }
}

/** Exit code 0 on success, 1 on data errors, 2 on usage errors. */
export function runPlotField(argv: string[], log: Logger = console.log, fail: Logger = console.error): number {
  const positional: string[] = [];
  for (const arg of argv) {
    if (arg === "-h" || arg === "--help") {
      log(FIELD_USAGE);
      return 0;
    } else if (arg.startsWith("-")) {
      fail(`unknown flag: ${arg}`);
      fail(FIELD_USAGE);
      return 2;
    } else {
      positional.push(arg);
    }
  }
  if (positional.length !== 3) {
    fail(FIELD_USAGE);
    return 2;
  }
  const [valuesPath, meshPath, outPath] = positional;
  try {
    const points = parseFieldCsv(readInput(valuesPath));
    const triangles = parseMeshCsv(readInput(meshPath));
    const plot = renderFieldPlot(points, triangles);
    writeFileSync(outPath, plot.svg);
    log(`value range: [${plot.range[0]}, ${plot.range[1]}] over ${points.length} nodes, ${triangles.length} triangles`);
    log(`wrote ${outPath}`);
    return 0;
  } catch (err) {
    fail(err instanceof Error ? err.message : String(err));
    return 1;
  }
}
