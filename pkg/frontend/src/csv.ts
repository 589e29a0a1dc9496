import Papa from "papaparse";

/** Error-norm columns of the solver's convergence table. */
export const ERROR_SERIES = ["err_inf", "err_l2", "err_h1"] as const;
export type ErrorSeries = (typeof ERROR_SERIES)[number];

/** One row of a convergence table (extra columns such as rates are ignored). */
export interface ConvergenceRow {
  dx: number;
  err_inf: number;
  err_l2: number;
  err_h1: number;
}

/** One nodal sample of a field snapshot. */
export interface FieldPoint {
  x: number;
  y: number;
  value: number;
}

/** Vertex indices of one mesh triangle. */
export type MeshTriangle = [number, number, number];

interface ParsedTable {
  fields: string[];
  rows: Record<string, unknown>[];
}

function parseTable(text: string, label: string, required: readonly string[]): ParsedTable {
  const parsed = Papa.parse<Record<string, unknown>>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new Error(`${label}: ${first.message} (line ${(first.row ?? 0) + 2})`);
  }
  const fields = parsed.meta.fields ?? [];
  const missing = required.filter((column) => !fields.includes(column));
  if (missing.length > 0) {
    throw new Error(`${label} is missing column(s): ${missing.join(", ")}`);
  }
  return { fields, rows: parsed.data };
}

function numberAt(row: Record<string, unknown>, column: string, line: number, label: string): number {
  const value = row[column];
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new Error(`${label} line ${line}: column ${column} is not a finite number (got ${JSON.stringify(value)})`);
  }
  return value;
}

/**
 * Parse a convergence table with columns dx, err_inf, err_l2, err_h1.
 *
 * The solver CLI writes extra columns (h, dofs, rates, runtime); those are
 * accepted and ignored. Mesh sizes and errors must be strictly positive
 * since both plot axes are logarithmic.
 */
export function parseConvergenceCsv(text: string): ConvergenceRow[] {
  const label = "convergence CSV";
  const { rows } = parseTable(text, label, ["dx", ...ERROR_SERIES]);
  return rows.map((row, i) => {
    const line = i + 2;
    const out: ConvergenceRow = {
      dx: numberAt(row, "dx", line, label),
      err_inf: numberAt(row, "err_inf", line, label),
      err_l2: numberAt(row, "err_l2", line, label),
      err_h1: numberAt(row, "err_h1", line, label),
    };
    for (const column of ["dx", ...ERROR_SERIES] as const) {
      if (out[column] <= 0) {
        throw new Error(`${label} line ${line}: column ${column} must be positive (got ${out[column]})`);
      }
    }
    return out;
  });
}

/** Parse a field snapshot with columns x, y, value. */
export function parseFieldCsv(text: string): FieldPoint[] {
  const label = "field CSV";
  const { rows } = parseTable(text, label, ["x", "y", "value"]);
  return rows.map((row, i) => {
    const line = i + 2;
    return {
      x: numberAt(row, "x", line, label),
      y: numberAt(row, "y", line, label),
      value: numberAt(row, "value", line, label),
    };
  });
}

/** Parse triangle connectivity with columns i, j, k (0-based vertex indices). */
export function parseMeshCsv(text: string): MeshTriangle[] {
  const label = "mesh CSV";
  const { rows } = parseTable(text, label, ["i", "j", "k"]);
  return rows.map((row, idx) => {
    const line = idx + 2;
    const triangle = (["i", "j", "k"] as const).map((column) => {
      const value = numberAt(row, column, line, label);
      if (!Number.isInteger(value) || value < 0) {
        throw new Error(`${label} line ${line}: column ${column} must be a nonnegative integer (got ${value})`);
      }
      return value;
    });
    return triangle as MeshTriangle;
  });
}
