/** Escape a string for use in SVG text content or attribute values. */
export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Format a pixel coordinate compactly (2 decimals, no trailing zeros). */
export function px(value: number): string {
  return String(Math.round(value * 100) / 100);
}

export interface Margins {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export function openSvg(width: number, height: number): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n`
  );
}
