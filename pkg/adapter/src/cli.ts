#!/usr/bin/env node
/**
 * Command line entry: read a model dump (JSON), write a detections file.
 *
 *   vidcount-adapter <model-dump.json> <detections.txt>
 *
 * One process per video; nothing is kept between runs.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { exportDetections, ExportError, ModelDump } from "./export";

export function main(argv: string[]): number {
  if (argv.length !== 2) {
    process.stderr.write("usage: vidcount-adapter <model-dump.json> <detections.txt>\n");
    return 2;
  }
  const [inputPath, outputPath] = argv;
  let dump: ModelDump;
  try {
    dump = JSON.parse(readFileSync(inputPath, "utf8")) as ModelDump;
  } catch (err) {
    process.stderr.write(`error: cannot read ${inputPath}: ${(err as Error).message}\n`);
    return 1;
  }
  try {
    writeFileSync(outputPath, exportDetections(dump), "utf8");
  } catch (err) {
    if (err instanceof ExportError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 3;
    }
    throw err;
  }
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
