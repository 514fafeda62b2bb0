/** Client-side parse of an asset-id CSV upload.
 *
 * Mirrors the server's rules so mistakes surface inline before any
 * request is made: one asset id per line, an optional header row
 * (asset_id / assetid / id), blank lines skipped, duplicates collapsed
 * to first occurrence. Extra cells after the first on a line are
 * ignored, matching the server.
 */

const ASSET_ID = /^A\d{6}$/;
const HEADER_WORDS = new Set(["asset_id", "assetid", "id"]);

export interface CsvRowError {
  line: number;
  cell: string;
  reason: string;
}

export interface CsvParseResult {
  ids: string[];
  errors: CsvRowError[];
}

export function parseAssetIdCsv(text: string): CsvParseResult {
  const ids: string[] = [];
  const seen = new Set<string>();
  const errors: CsvRowError[] = [];
  let firstDataLine = true;
  const lines = text.split(/\r\n|\r|\n/);
  for (let i = 0; i < lines.length; i += 1) {
    const lineNo = i + 1;
    const cells = (lines[i] ?? "")
      .split(",")
      .map((c) => c.trim())
      .filter((c) => c.length > 0);
    if (cells.length === 0) continue;
    const cell = cells[0]!;
    if (firstDataLine && HEADER_WORDS.has(cell.toLowerCase())) {
      firstDataLine = false;
      continue;
    }
    firstDataLine = false;
    if (!ASSET_ID.test(cell)) {
      errors.push({ line: lineNo, cell, reason: `${cell} is not an asset id` });
    } else if (!seen.has(cell)) {
      seen.add(cell);
      ids.push(cell);
    }
  }
  return { ids, errors };
}

/** One inline message listing every bad row, or null for a clean parse. */
export function csvErrorSummary(result: CsvParseResult): string | null {
  if (result.errors.length === 0) return null;
  const rows = result.errors.map((e) => `row ${e.line}: ${e.reason}`);
  return rows.join("; ");
}
