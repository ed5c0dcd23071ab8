/**
 * Assembly of single `det ...` interchange lines.
 *
 * One record per line, space-separated key=value fields. Labels are
 * double-quoted with backslash escapes; ids are bare tokens limited to
 * [A-Za-z0-9_.:-]. Only keys the engine knows are ever emitted, so parsing
 * back produces zero warnings.
 */

export const BARE_ID = /^[A-Za-z0-9_.:-]+$/;

/** One detection, field-for-field what the engine's parser reconstructs. */
export interface AdapterRecord {
  frame: number;
  x: number;
  y: number;
  w: number;
  h: number;
  score: number;
  label: string;
  /** Pre-rendered `<h>x<w>:<c0,...>` token; omit for box-only detections. */
  mask?: string;
  id?: string;
}

export function quoteLabel(label: string): string {
  return '"' + label.replace(/\\/g, "\\\\").replace(/"/g, '\\"') + '"';
}

export function formatNumber(value: number): string {
  if (!Number.isFinite(value)) {
    throw new Error(`non-finite field value: ${value}`);
  }
  // String(n) is shortest round-trip for doubles, which Python floats share
  return String(value);
}

/** Renders one record; key order mirrors the engine's own writer. */
export function detLine(record: AdapterRecord): string {
  const parts = [
    "det",
    `frame=${record.frame}`,
    `x=${formatNumber(record.x)}`,
    `y=${formatNumber(record.y)}`,
    `w=${formatNumber(record.w)}`,
    `h=${formatNumber(record.h)}`,
    `score=${formatNumber(record.score)}`,
    `label=${quoteLabel(record.label)}`,
  ];
  if (record.mask !== undefined) {
    parts.push(`mask=${record.mask}`);
  }
  if (record.id !== undefined && record.id !== "") {
    if (!BARE_ID.test(record.id)) {
      throw new Error(`id must be a bare token, got ${JSON.stringify(record.id)}`);
    }
    parts.push(`id=${record.id}`);
  }
  return parts.join(" ");
}
