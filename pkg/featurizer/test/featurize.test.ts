import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import {
  InputFormatError,
  auditCsv,
  datasetCsv,
  featurizeRecords,
  parseRawCsv,
  rejectionsCsv,
} from "../src/featurize.js";
import { main as cliMain } from "../src/cli.js";

const FIXTURE = join(__dirname, "..", "fixtures", "raw_activities.csv");
const EXPECTED = join(__dirname, "..", "fixtures", "expected_dataset.csv");

function runFixture() {
  return featurizeRecords(parseRawCsv(readFileSync(FIXTURE, "utf-8")));
}

describe("parseRawCsv", () => {
  it("accepts the documented header with and without source_id", () => {
    expect(parseRawCsv("smiles,ic50_nM\nCCO,100\n")).toHaveLength(1);
    const withId = parseRawCsv("smiles,ic50_nM,source_id\nCCO,100,x1\n");
    expect(withId[0]).toMatchObject({ smiles: "CCO", ic50nM: 100, sourceId: "x1", row: 2 });
  });

  it("rejects malformed headers and ragged rows", () => {
    expect(() => parseRawCsv("structure,ic50\nCCO,1\n")).toThrow(InputFormatError);
    expect(() => parseRawCsv("smiles,ic50_nM\nCCO\n")).toThrow(/row 2/);
    expect(() => parseRawCsv("")).toThrow(InputFormatError);
  });
});

describe("featurizeRecords on the 20-molecule fixture", () => {
  it("accounts for every input row", () => {
    const result = runFixture();
    expect(result.inputRows).toBe(22);
    expect(result.keptRows).toBe(20);
    expect(result.rejections).toHaveLength(2);
    expect(result.keptRows + result.rejections.length).toBe(result.inputRows);
  });

  it("groups replicates by canonical structure and averages pIC50", () => {
    const result = runFixture();
    expect(result.records).toHaveLength(18); // 20 kept rows, 2 replicate pairs
    const replicated = result.records.filter((r) => r.replicates === 2);
    expect(replicated).toHaveLength(2);
    // ethanol appears as CCO (900 uM) and OCC (1.1 mM): mean in log space
    const ethanol = replicated.find((r) => r.sourceIds.includes("CHEM000011"))!;
    const want = (9 - Math.log10(900000) + (9 - Math.log10(1100000))) / 2;
    expect(ethanol.pic50).toBeCloseTo(want, 12);
    expect(ethanol.sourceIds).toEqual(["CHEM000011", "CHEM000020"]);
  });

  it("logs rejections with row context and reasons", () => {
    const result = runFixture();
    const reasons = result.rejections.map((r) => r.reason).join(" ");
    expect(reasons).toMatch(/unparseable/);
    expect(reasons).toMatch(/no organic fragment/);
    expect(result.rejections.map((r) => r.row)).toEqual([22, 23]);
  });

  it("emits the dataset contract: sorted unique ids, binary cells, 128 columns", () => {
    const result = runFixture();
    const text = datasetCsv(result);
    const lines = text.trimEnd().split("\n");
    const header = lines[0]!.split(",");
    expect(header).toHaveLength(130);
    expect(header.slice(0, 2)).toEqual(["id", "y"]);
    expect(header[2]).toBe("b0");
    expect(header[129]).toBe("b127");
    const ids = lines.slice(1).map((l) => l.split(",")[0]!);
    expect(new Set(ids).size).toBe(ids.length);
    expect([...ids].sort()).toEqual(ids);
    for (const line of lines.slice(1)) {
      const cells = line.split(",");
      expect(cells).toHaveLength(130);
      expect(Number.isFinite(Number(cells[1]))).toBe(true);
      for (const bit of cells.slice(2)) {
        expect(bit === "0" || bit === "1").toBe(true);
      }
    }
  });

  it("matches the committed expected_dataset fixture byte for byte", () => {
    const result = runFixture();
    expect(datasetCsv(result)).toBe(readFileSync(EXPECTED, "utf-8"));
  });

  it("reports replicate counts in the audit table", () => {
    const result = runFixture();
    const lines = auditCsv(result).trimEnd().split("\n");
    expect(lines[0]).toBe("id,pIC50,n_replicates,source_ids,canonical_key");
    expect(lines).toHaveLength(19);
  });

  it("writes a parseable rejection log", () => {
    const text = rejectionsCsv(runFixture());
    expect(text.split("\n")[0]).toBe("row,smiles,reason");
    expect(text).toContain("[Na+].[Cl-]");
  });
});

describe("cli", () => {
  it("featurizes a file into an output directory", () => {
    const out = mkdtempSync(join(tmpdir(), "featurizer-"));
    const code = cliMain([FIXTURE, out]);
    expect(code).toBe(0);
    const dataset = readFileSync(join(out, "dataset.csv"), "utf-8");
    expect(dataset).toBe(readFileSync(EXPECTED, "utf-8"));
    expect(readFileSync(join(out, "rejects.csv"), "utf-8")).toContain("row,smiles,reason");
    expect(readFileSync(join(out, "audit.csv"), "utf-8")).toContain("n_replicates");
  });

  it("fails with usage on wrong arguments", () => {
    expect(cliMain([])).toBe(1);
  });

  it("fails with a data error on a bad header", () => {
    const out = mkdtempSync(join(tmpdir(), "featurizer-"));
    const bad = join(out, "bad.csv");
    require("node:fs").writeFileSync(bad, "a,b\n1,2\n");
    expect(cliMain([bad, out])).toBe(2);
  });
});
