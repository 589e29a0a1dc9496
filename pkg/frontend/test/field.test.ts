import { readFileSync } from "node:fs";

import { describe, expect, it } from "vitest";

import { parseConvergenceCsv, parseFieldCsv, parseMeshCsv } from "../src/csv.js";
import { colorDomain, interpolateField, renderFieldPlot } from "../src/field.js";

const fixture = (name: string) => readFileSync(new URL(`./fixtures/${name}`, import.meta.url), "utf8");

const tagChase = () => ({
  points: parseFieldCsv(fixture("tag-chase-t0.000.csv")),
  triangles: parseMeshCsv(fixture("tag-chase-mesh.csv")),
});

const polygonFills = (svg: string) =>
  [...svg.matchAll(/<polygon [^>]*fill="([^"]+)"/g)].map((m) => m[1]);

describe("renderFieldPlot", () => {
  it("renders the pursuit snapshot with values inside [0, 1]", () => {
    const { points, triangles } = tagChase();
    const plot = renderFieldPlot(points, triangles);
    expect(plot.range[0]).toBeGreaterThanOrEqual(-1e-12);
    expect(plot.range[1]).toBeLessThanOrEqual(1 + 1e-12);
    expect(polygonFills(plot.svg)).toHaveLength(160);
    expect(plot.svg).toContain('data-colorbar="value"');
    expect(plot.svg).not.toContain("NaN");
  });

  it("renders a constant field in a uniform color with a padded colorbar", () => {
    const { points, triangles } = tagChase();
    const ones = points.map((p) => ({ ...p, value: 1 }));
    const plot = renderFieldPlot(ones, triangles);
    expect(plot.range).toEqual([1, 1]);
    const fills = polygonFills(plot.svg);
    expect(new Set(fills).size).toBe(1);
    // Padded domain [0.5, 1.5] puts real tick labels on the colorbar.
    expect(plot.svg).toContain(">0.6<");
    expect(plot.svg).toContain(">1.4<");
  });

  it("pads only degenerate color domains", () => {
    expect(colorDomain(1, 1)).toEqual([0.5, 1.5]);
    expect(colorDomain(0, 1)).toEqual([0, 1]);
  });

  it("rejects a mesh that references more vertices than the field has", () => {
    const { points, triangles } = tagChase();
    expect(() => renderFieldPlot(points.slice(0, 95), triangles)).toThrow(/only 95 values/);
  });
});

describe("interpolateField", () => {
  it("reproduces nodal values and rejects points outside the mesh", () => {
    const { points, triangles } = tagChase();
    const at = interpolateField(points, triangles);
    expect(at(points[0].x, points[0].y)).toBeCloseTo(points[0].value, 9);
    expect(at(0, 0)).toBeUndefined(); // annulus hole
    expect(at(50, 50)).toBeUndefined();
  });

  it("sees the radial symmetry of the smooth reference field", () => {
    // Nodal samples of a radially symmetric function: the linear interpolant
    // over an unsymmetric mesh may differ under rotation by at most the
    // discretization error at this mesh size, taken from the reference table.
    const points = parseFieldCsv(fixture("exp1-exact-t0.csv"));
    const triangles = parseMeshCsv(fixture("exp1-mesh.csv"));
    const reference = parseConvergenceCsv(fixture("reference-error-table.csv"));
    const bound = reference.find((row) => Math.abs(row.dx - 0.2165) < 1e-9)?.err_inf;
    expect(bound).toBeDefined();

    const at = interpolateField(points, triangles);
    let worst = 0;
    for (const radius of [0.08, 0.17, 0.26, 0.35, 0.44]) {
      for (let k = 0; k < 14; k++) {
        const theta = (k * 2 * Math.PI) / 14 + 0.05;
        const x = radius * Math.cos(theta);
        const y = radius * Math.sin(theta);
        const value = at(x, y);
        const rotated = at(-y, x);
        expect(value).toBeDefined();
        expect(rotated).toBeDefined();
        worst = Math.max(worst, Math.abs(value! - rotated!));
      }
    }
    expect(worst).toBeGreaterThan(0);
    expect(worst).toBeLessThan(bound!);
  });

  it("renders the reference field with its exact value range", () => {
    const points = parseFieldCsv(fixture("exp1-exact-t0.csv"));
    const triangles = parseMeshCsv(fixture("exp1-mesh.csv"));
    const plot = renderFieldPlot(points, triangles);
    expect(plot.range[0]).toBeCloseTo(1.00379, 5);
    expect(plot.range[1]).toBeCloseTo(1.20018, 5);
    expect(polygonFills(plot.svg)).toHaveLength(64);
  });
});
