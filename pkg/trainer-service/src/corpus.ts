import * as fs from "fs";

/** One training record of the emitted line-delimited corpus. */
export interface CorpusRecord {
  input: string;
  output: string;
}

export class CorpusFormatError extends Error {}

/**
 * Read a JSONL corpus of {input, output} records.
 * Anything else on a line is a schema mismatch and fails loudly.
 */
export function readCorpus(path: string): CorpusRecord[] {
  if (!fs.existsSync(path)) {
    throw new CorpusFormatError(`corpus file not found: ${path}`);
  }
  const records: CorpusRecord[] = [];
  const lines = fs.readFileSync(path, "utf-8").split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let row: unknown;
    try {
      row = JSON.parse(line);
    } catch {
      throw new CorpusFormatError(`${path}:${i + 1}: not valid JSON`);
    }
    const record = row as Partial<CorpusRecord>;
    if (typeof record.input !== "string" || typeof record.output !== "string") {
      throw new CorpusFormatError(
        `${path}:${i + 1}: expected {"input": str, "output": str}`
      );
    }
    records.push({ input: record.input, output: record.output });
  }
  if (records.length === 0) {
    throw new CorpusFormatError(`${path}: corpus is empty`);
  }
  return records;
}
