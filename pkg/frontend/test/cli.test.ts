import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { runPlotConvergence, runPlotField } from "../src/cli.js";

const fixturePath = (name: string) => fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));

function collect() {
  const lines: string[] = [];
  return { lines, log: (line: string) => lines.push(line) };
}

const freshDir = () => mkdtempSync(join(tmpdir(), "isaacsfem-plots-"));

describe("plot-convergence", () => {
  it("plots the reference table and prints first-order fitted slopes", () => {
    const out = join(freshDir(), "convergence.svg");
    const stdout = collect();
    const stderr = collect();
    const code = runPlotConvergence([fixturePath("reference-error-table.csv"), out, "--ref-slope"], stdout.log, stderr.log);
    expect(code).toBe(0);
    expect(stderr.lines).toEqual([]);
    expect(stdout.lines.join("\n")).toContain("err_inf: fitted slope 0.975 over 7 rows");
    expect(stdout.lines.join("\n")).toContain("err_l2: fitted slope 0.939 over 7 rows");
    expect(stdout.lines.join("\n")).toContain("err_h1: fitted slope 1.005 over 7 rows");
    expect(existsSync(out)).toBe(true);
    const svg = readFileSync(out, "utf8");
    expect(svg.startsWith("<svg ")).toBe(true);
    expect(svg).toContain('data-ref-slope="1"');
  });

  it("prints a slope of 1.000 on synthetic first-order data", () => {
    const dir = freshDir();
    const csv = join(dir, "synthetic.csv");
    const dx = [1, 0.5, 0.25, 0.125, 0.0625, 0.03125];
    const lines = dx.map((d) => `${d},${0.37 * d},${0.11 * d},${0.9 * d}`);
    writeFileSync(csv, "dx,err_inf,err_l2,err_h1\n" + lines.join("\n") + "\n");
    const stdout = collect();
    const code = runPlotConvergence([csv, join(dir, "synthetic.svg")], stdout.log, collect().log);
    expect(code).toBe(0);
    for (const name of ["err_inf", "err_l2", "err_h1"]) {
      expect(stdout.lines.join("\n")).toContain(`${name}: fitted slope 1.000`);
    }
  });

  it("honors --series and rejects unknown names", () => {
    const dir = freshDir();
    const out = join(dir, "l2-only.svg");
    const stdout = collect();
    expect(runPlotConvergence([fixturePath("reference-error-table.csv"), out, "--series", "err_l2"], stdout.log, collect().log)).toBe(0);
    expect(stdout.lines.some((line) => line.startsWith("err_l2:"))).toBe(true);
    expect(stdout.lines.some((line) => line.startsWith("err_inf:"))).toBe(false);

    const stderr = collect();
    expect(
      runPlotConvergence([fixturePath("reference-error-table.csv"), out, "--series=err_sup"], collect().log, stderr.log),
    ).toBe(2);
    expect(stderr.lines.join("\n")).toContain("err_sup");
  });

  it("fails with a message on a single-row table", () => {
    const dir = freshDir();
    const csv = join(dir, "one-row.csv");
    writeFileSync(csv, "dx,err_inf,err_l2,err_h1\n0.4,1e-2,5e-3,2e-2\n");
    const stderr = collect();
    const code = runPlotConvergence([csv, join(dir, "out.svg")], collect().log, stderr.log);
    expect(code).toBe(1);
    expect(stderr.lines.join("\n")).toContain("need >= 2 rows");
  });

  it("fails with a message when a column is missing", () => {
    const dir = freshDir();
    const csv = join(dir, "no-h1.csv");
    writeFileSync(csv, "dx,err_inf,err_l2\n0.4,1e-2,5e-3\n0.2,5e-3,2e-3\n");
    const stderr = collect();
    expect(runPlotConvergence([csv, join(dir, "out.svg")], collect().log, stderr.log)).toBe(1);
    expect(stderr.lines.join("\n")).toContain("missing column(s): err_h1");
  });

  it("reports unreadable input and bad usage separately", () => {
    const stderr = collect();
    expect(runPlotConvergence(["/no/such/table.csv", join(freshDir(), "out.svg")], collect().log, stderr.log)).toBe(1);
    expect(stderr.lines.join("\n")).toContain("cannot read /no/such/table.csv");

    expect(runPlotConvergence(["only-one-arg.csv"], collect().log, collect().log)).toBe(2);
    expect(runPlotConvergence(["a.csv", "b.svg", "--wat"], collect().log, collect().log)).toBe(2);
    const help = collect();
    expect(runPlotConvergence(["--help"], help.log, collect().log)).toBe(0);
    expect(help.lines[0]).toContain("usage: plot-convergence");
  });
});

describe("plot-field", () => {
  it("plots the pursuit snapshot and reports its value range", () => {
    const out = join(freshDir(), "field.svg");
    const stdout = collect();
    const code = runPlotField(
      [fixturePath("tag-chase-t0.000.csv"), fixturePath("tag-chase-mesh.csv"), out],
      stdout.log,
      collect().log,
    );
    expect(code).toBe(0);
    const report = stdout.lines.join("\n");
    expect(report).toContain("value range: [");
    expect(report).toContain("96 nodes, 160 triangles");
    const match = report.match(/value range: \[([-\d.e]+), ([-\d.e]+)\]/);
    expect(match).not.toBeNull();
    expect(Number(match![1])).toBeGreaterThanOrEqual(0);
    expect(Number(match![2])).toBeLessThanOrEqual(1);
    expect(readFileSync(out, "utf8")).toContain("<polygon ");
  });

  it("fails with a message on a node count mismatch", () => {
    const dir = freshDir();
    const truncated = join(dir, "truncated.csv");
    const lines = readFileSync(fixturePath("tag-chase-t0.000.csv"), "utf8").trim().split("\n");
    writeFileSync(truncated, lines.slice(0, -1).join("\n") + "\n");
    const stderr = collect();
    const code = runPlotField([truncated, fixturePath("tag-chase-mesh.csv"), join(dir, "out.svg")], collect().log, stderr.log);
    expect(code).toBe(1);
    expect(stderr.lines.join("\n")).toContain("only 95 values");
  });

  it("rejects bad usage", () => {
    expect(runPlotField(["a.csv", "b.csv"], collect().log, collect().log)).toBe(2);
    expect(runPlotField(["a.csv", "b.csv", "c.svg", "--wat"], collect().log, collect().log)).toBe(2);
    const help = collect();
    expect(runPlotField(["-h"], help.log, collect().log)).toBe(0);
    expect(help.lines[0]).toContain("usage: plot-field");
  });
});
