// Command line: featurize <input.csv> <output-dir>
//
// Writes dataset.csv (the modeling toolkit's input contract), rejects.csv
// (one line per skipped input row, with the reason), and audit.csv
// (replicate counts and canonical keys per kept structure).

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import {
  InputFormatError,
  auditCsv,
  datasetCsv,
  featurizeRecords,
  parseRawCsv,
  rejectionsCsv,
} from "./featurize.js";

export function main(argv: string[]): number {
  const args = argv.filter((a) => a !== "featurize");
  if (args.length !== 2) {
    console.error("usage: featurize <input.csv> <output-dir>");
    return 1;
  }
  const [inputPath, outDir] = args as [string, string];
  let text: string;
  try {
    text = readFileSync(inputPath, "utf-8");
  } catch (err) {
    console.error(`featurize: cannot read ${inputPath}: ${(err as Error).message}`);
    return 2;
  }
  try {
    const records = parseRawCsv(text);
    const result = featurizeRecords(records);
    mkdirSync(outDir, { recursive: true });
    writeFileSync(join(outDir, "dataset.csv"), datasetCsv(result), "utf-8");
    writeFileSync(join(outDir, "rejects.csv"), rejectionsCsv(result), "utf-8");
    writeFileSync(join(outDir, "audit.csv"), auditCsv(result), "utf-8");
    console.error(
      `featurize: ${result.inputRows} rows in -> ${result.records.length} structures ` +
        `(${result.keptRows} kept, ${result.rejections.length} rejected)`,
    );
    for (const r of result.rejections) {
      console.error(`featurize: rejected row ${r.row}: ${r.reason}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof InputFormatError) {
      console.error(`featurize: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

const isDirectRun = process.argv[1] !== undefined && import.meta.url.endsWith(
  process.argv[1].split("/").pop() ?? "",
);
if (isDirectRun) {
  process.exit(main(process.argv.slice(2)));
}
