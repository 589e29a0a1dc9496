export {
  ERROR_SERIES,
  parseConvergenceCsv,
  parseFieldCsv,
  parseMeshCsv,
} from "./csv.js";
export type { ConvergenceRow, ErrorSeries, FieldPoint, MeshTriangle } from "./csv.js";
export { fitSlope, renderConvergencePlot } from "./convergence.js";
export type { ConvergencePlot, ConvergencePlotOptions, RenderedSeries } from "./convergence.js";
export { colorDomain, interpolateField, renderFieldPlot } from "./field.js";
export type { FieldPlot, FieldPlotOptions } from "./field.js";
export { runPlotConvergence, runPlotField, CONVERGENCE_USAGE, FIELD_USAGE } from "./cli.js";
