/**
 * Row-major run-length encoding for binary masks.
 *
 * Runs alternate zero-count first: a mask whose first pixel is set starts
 * with an explicit 0, so `[[1,0],[0,1]]` encodes as `0,1,2,1`. Counts always
 * sum to height * width, matching what the counting engine parses back.
 */

/** Binarizes one sample the way segmenter post-processing usually does. */
export function isForeground(value: number): boolean {
  return value > 0;
}

/** Encodes row-major pixels (any numeric type, >0 means set) into runs. */
export function encodeRuns(rows: ArrayLike<number>[], width: number): number[] {
  const runs: number[] = [];
  let current = 0;
  let count = 0;
  for (const row of rows) {
    for (let i = 0; i < width; i++) {
      const bit = isForeground(row[i]) ? 1 : 0;
      if (bit === current) {
        count++;
        continue;
      }
      runs.push(count);
      current = bit;
      count = 1;
    }
  }
  runs.push(count);
  return runs;
}

/** Formats runs as the `<h>x<w>:<c0,c1,...>` mask token. */
export function maskToken(height: number, width: number, runs: number[]): string {
  return `${height}x${width}:${runs.join(",")}`;
}
