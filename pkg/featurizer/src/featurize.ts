// End-to-end featurization: raw (smiles, ic50_nM[, source_id]) rows in,
// the modeling toolkit's dataset CSV out, plus a rejection log and a
// replicate audit table.
//
// Output contract (consumed downstream as-is): header id,y,b0..b127 with
// y the pIC50 and every b* cell the literal 0 or 1; UTF-8, comma-separated,
// Unix newlines. Row order is sorted by id for determinism.

import { createHash } from "node:crypto";
import Papa from "papaparse";

import { ActivityError, toPIC50 } from "./activity.js";
import { DEFAULT_BITS, DEFAULT_RADIUS, fingerprint } from "./fingerprint.js";
import { StandardizeError, standardize } from "./standardize.js";

export interface RawActivityRecord {
  smiles: string;
  ic50nM: number;
  sourceId: string | null;
  row: number; // 1-based data row in the input file (header is row 1)
}

export interface Rejection {
  row: number;
  smiles: string;
  reason: string;
}

export interface FeaturizedRecord {
  id: string;
  pic50: number;
  bits: number[];
  replicates: number;
  canonicalKey: string;
  sourceIds: string[];
}

export interface FeaturizeResult {
  records: FeaturizedRecord[]; // sorted by id
  rejections: Rejection[];
  inputRows: number;
  keptRows: number;
}

export class InputFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "InputFormatError";
  }
}

export function parseRawCsv(text: string): RawActivityRecord[] {
  const parsed = Papa.parse<string[]>(text.replace(/^﻿/, ""), {
    delimiter: ",",
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]!;
    throw new InputFormatError(`row ${(first.row ?? 0) + 1}: ${first.message}`);
  }
  const rows = parsed.data;
  if (rows.length === 0) {
    throw new InputFormatError("empty input file");
  }
  const header = rows[0]!.map((h) => h.trim());
  const okHeader =
    (header.length === 2 || header.length === 3) &&
    header[0] === "smiles" &&
    header[1] === "ic50_nM" &&
    (header.length === 2 || header[2] === "source_id");
  if (!okHeader) {
    throw new InputFormatError(
      `row 1: header must be smiles,ic50_nM[,source_id], got ${header.join(",")}`,
    );
  }
  const records: RawActivityRecord[] = [];
  rows.slice(1).forEach((cells, i) => {
    const row = i + 2;
    if (cells.length !== header.length) {
      throw new InputFormatError(
        `row ${row}: expected ${header.length} cells, got ${cells.length}`,
      );
    }
    records.push({
      smiles: cells[0]!.trim(),
      ic50nM: Number(cells[1]),
      sourceId: header.length === 3 ? cells[2]!.trim() || null : null,
      row,
    });
  });
  return records;
}

export function featurizeRecords(
  records: RawActivityRecord[],
  radius = DEFAULT_RADIUS,
  nBits = DEFAULT_BITS,
): FeaturizeResult {
  interface Group {
    canonicalKey: string;
    bits: number[];
    pic50Values: number[];
    sourceIds: string[];
  }
  const groups = new Map<string, Group>();
  const rejections: Rejection[] = [];
  let kept = 0;
  for (const record of records) {
    let pic50: number;
    try {
      pic50 = toPIC50(record.ic50nM);
    } catch (err) {
      if (err instanceof ActivityError) {
        rejections.push({ row: record.row, smiles: record.smiles, reason: err.message });
        continue;
      }
      throw err;
    }
    try {
      const std = standardize(record.smiles);
      const group = groups.get(std.canonicalKey) ?? {
        canonicalKey: std.canonicalKey,
        bits: fingerprint(std.molecule, radius, nBits),
        pic50Values: [],
        sourceIds: [],
      };
      group.pic50Values.push(pic50);
      if (record.sourceId) {
        group.sourceIds.push(record.sourceId);
      }
      groups.set(std.canonicalKey, group);
      kept += 1;
    } catch (err) {
      if (err instanceof StandardizeError) {
        rejections.push({ row: record.row, smiles: record.smiles, reason: err.message });
        continue;
      }
      throw err;
    }
  }
  const out: FeaturizedRecord[] = [...groups.values()].map((group) => ({
    id: structureId(group.canonicalKey),
    pic50:
      group.pic50Values.reduce((acc, v) => acc + v, 0) / group.pic50Values.length,
    bits: group.bits,
    replicates: group.pic50Values.length,
    canonicalKey: group.canonicalKey,
    sourceIds: group.sourceIds,
  }));
  out.sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
  return { records: out, rejections, inputRows: records.length, keptRows: kept };
}

export function structureId(canonicalKey: string): string {
  return "M" + createHash("sha256").update(canonicalKey, "utf-8").digest("hex").slice(0, 12);
}

export function datasetCsv(result: FeaturizeResult, nBits = DEFAULT_BITS): string {
  const header = ["id", "y", ...Array.from({ length: nBits }, (_, i) => `b${i}`)];
  const lines = [header.join(",")];
  for (const record of result.records) {
    lines.push([record.id, String(record.pic50), ...record.bits.map(String)].join(","));
  }
  return lines.join("\n") + "\n";
}

export function rejectionsCsv(result: FeaturizeResult): string {
  const lines = ["row,smiles,reason"];
  for (const r of result.rejections) {
    lines.push([String(r.row), quote(r.smiles), quote(r.reason)].join(","));
  }
  return lines.join("\n") + "\n";
}

export function auditCsv(result: FeaturizeResult): string {
  const lines = ["id,pIC50,n_replicates,source_ids,canonical_key"];
  for (const r of result.records) {
    lines.push(
      [
        r.id,
        String(r.pic50),
        String(r.replicates),
        quote(r.sourceIds.join(";")),
        quote(r.canonicalKey),
      ].join(","),
    );
  }
  return lines.join("\n") + "\n";
}

function quote(value: string): string {
  if (/[",\n]/.test(value)) {
    return `"${value.replace(/"/g, '""')}"`;
  }
  return value;
}
