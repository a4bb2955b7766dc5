import { readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import {
  DEFAULT_BITS,
  FINGERPRINT_VERSION,
  circularIdentifiers,
  fingerprint,
} from "../src/fingerprint.js";
import { parseSmiles } from "../src/smiles.js";
import { standardize } from "../src/standardize.js";

const GOLDEN = JSON.parse(
  readFileSync(join(__dirname, "..", "fixtures", "golden_fingerprints.json"), "utf-8"),
) as {
  version: string;
  radius: number;
  n_bits: number;
  entries: Array<{ smiles: string; bits: number[] }>;
};

describe("fingerprint", () => {
  it("is deterministic", () => {
    const a = fingerprint(parseSmiles("CC(=O)Oc1ccccc1C(=O)O"));
    const b = fingerprint(parseSmiles("CC(=O)Oc1ccccc1C(=O)O"));
    expect(a).toEqual(b);
  });

  it("has exactly 128 binary entries", () => {
    const bits = fingerprint(parseSmiles("CCO"));
    expect(bits).toHaveLength(DEFAULT_BITS);
    expect(bits.every((b) => b === 0 || b === 1)).toBe(true);
    expect(bits.some((b) => b === 1)).toBe(true);
  });

  it("is invariant to the SMILES atom ordering", () => {
    const a = fingerprint(standardize("CC(=O)Oc1ccccc1C(=O)O").molecule);
    const b = fingerprint(standardize("OC(=O)c1ccccc1OC(C)=O").molecule);
    expect(a).toEqual(b);
  });

  it("differs between related molecules", () => {
    const toluene = fingerprint(parseSmiles("Cc1ccccc1"));
    const phenol = fingerprint(parseSmiles("Oc1ccccc1"));
    expect(toluene).not.toEqual(phenol);
  });

  it("separates ring from chain environments", () => {
    const cyclohexane = fingerprint(parseSmiles("C1CCCCC1"));
    const hexane = fingerprint(parseSmiles("CCCCCC"));
    expect(cyclohexane).not.toEqual(hexane);
  });

  it("grows identifier sets with radius", () => {
    const mol = parseSmiles("CC(C)Cc1ccc(cc1)C(C)C(=O)O");
    const r0 = circularIdentifiers(mol, 0).size;
    const r2 = circularIdentifiers(mol, 2).size;
    expect(r2).toBeGreaterThan(r0);
  });

  it("matches the pinned golden file", () => {
    expect(GOLDEN.version).toBe(FINGERPRINT_VERSION);
    expect(GOLDEN.radius).toBe(2);
    expect(GOLDEN.n_bits).toBe(DEFAULT_BITS);
    for (const entry of GOLDEN.entries) {
      const bits = fingerprint(standardize(entry.smiles).molecule);
      expect(bits, entry.smiles).toEqual(entry.bits);
    }
  });
});
