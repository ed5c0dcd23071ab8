/**
 * Conversion from model-native per-frame outputs to the detection file format.
 *
 * The input is whatever a detector/segmenter wrapper dumps after inference:
 * full-frame dimensions plus, per frame, boxes in pixel coordinates, scores,
 * labels, and optional full-frame masks (float or integer, >0 means set).
 * The output is one valid interchange line per detection, ready for the
 * counting engine to consume.
 */

import { AdapterRecord, detLine } from "./detline";
import { encodeRuns, maskToken } from "./rle";

/** Raised for inputs the engine would reject: wrong dims, bad scores. */
export class ExportError extends Error {}

export interface ModelDetection {
  /** [x, y, w, h] in pixels, origin top-left. */
  box: [number, number, number, number];
  score: number;
  label: string;
  /** Full-frame rows, height x width; any numeric type, >0 means foreground. */
  mask?: number[][];
  id?: string;
}

export interface ModelFrame {
  frame: number;
  detections: ModelDetection[];
}

export interface ModelDump {
  width: number;
  height: number;
  frames: ModelFrame[];
}

function checkDims(dump: ModelDump): void {
  if (!Number.isInteger(dump.width) || dump.width < 1) {
    throw new ExportError(`width must be a positive integer, got ${dump.width}`);
  }
  if (!Number.isInteger(dump.height) || dump.height < 1) {
    throw new ExportError(`height must be a positive integer, got ${dump.height}`);
  }
}

function recordFor(det: ModelDetection, frame: number, dump: ModelDump): AdapterRecord {
  if (!Number.isInteger(frame) || frame < 0) {
    throw new ExportError(`frame must be an integer >= 0, got ${frame}`);
  }
  const [x, y, w, h] = det.box;
  for (const value of det.box) {
    if (!Number.isFinite(value)) {
      throw new ExportError(`frame ${frame}: box has non-finite coordinate ${value}`);
    }
  }
  if (w < 0 || h < 0) {
    throw new ExportError(`frame ${frame}: box size must be >= 0, got ${w}x${h}`);
  }
  if (!Number.isFinite(det.score) || det.score < 0 || det.score > 1) {
    throw new ExportError(`frame ${frame}: score must be in [0, 1], got ${det.score}`);
  }
  const record: AdapterRecord = {
    frame,
    x,
    y,
    w,
    h,
    score: det.score,
    label: det.label,
  };
  if (det.mask !== undefined) {
    if (det.mask.length !== dump.height) {
      throw new ExportError(
        `frame ${frame}: mask has ${det.mask.length} rows, video height is ${dump.height}`
      );
    }
    for (const row of det.mask) {
      if (row.length !== dump.width) {
        throw new ExportError(
          `frame ${frame}: mask row has ${row.length} columns, video width is ${dump.width}`
        );
      }
    }
    record.mask = maskToken(dump.height, dump.width, encodeRuns(det.mask, dump.width));
  }
  if (det.id !== undefined) {
    record.id = det.id;
  }
  return record;
}

/** Renders the whole dump as detection file text (empty dump, empty file). */
export function exportDetections(dump: ModelDump): string {
  checkDims(dump);
  const lines: string[] = [];
  for (const frame of dump.frames) {
    for (const det of frame.detections) {
      lines.push(detLine(recordFor(det, frame.frame, dump)));
    }
  }
  return lines.length === 0 ? "" : lines.join("\n") + "\n";
}
