// Circular (Morgan-type) fingerprints over parsed molecules: iteratively
// hashed atom neighborhoods up to a fixed radius, folded onto a short bit
// vector. Radius 2 and 128 bits are the toolkit-wide defaults.
//
// FINGERPRINT_VERSION pins the hashing scheme; golden files record it so a
// change to invariants or hashing is caught instead of silently shifting
// every dataset.

import { ATOMIC_NUMBERS, Molecule, ringMembership, totalHydrogens } from "./smiles.js";

export const FINGERPRINT_VERSION = "fp/1 radius-hash-fold";
export const DEFAULT_RADIUS = 2;
export const DEFAULT_BITS = 128;

// 32-bit hash combination in the boost::hash_combine style.
function hashCombine(seed: number, value: number): number {
  let hash = seed >>> 0;
  const v = value >>> 0;
  hash ^= (v + 0x9e3779b9 + (hash << 6) + (hash >>> 2)) >>> 0;
  return hash >>> 0;
}

function hashComponents(components: number[]): number {
  let hash = 0;
  for (const c of components) {
    hash = hashCombine(hash, c);
  }
  return hash;
}

function initialInvariants(mol: Molecule): number[] {
  const inRing = ringMembership(mol);
  const degree = mol.atoms.map(() => 0);
  for (const bond of mol.bonds) {
    degree[bond.a]! += 1;
    degree[bond.b]! += 1;
  }
  return mol.atoms.map((atom, i) =>
    hashComponents([
      ATOMIC_NUMBERS[atom.element] ?? 0,
      degree[i]!,
      totalHydrogens(mol, i),
      (atom.charge + 8) >>> 0,
      atom.isotope,
      inRing[i] ? 1 : 0,
      atom.aromatic ? 1 : 0,
    ]),
  );
}

/** All neighborhood identifiers seen while expanding to `radius`. */
export function circularIdentifiers(mol: Molecule, radius = DEFAULT_RADIUS): Set<number> {
  const neighbors: Array<Array<{ atom: number; bondKey: number }>> = mol.atoms.map(
    () => [],
  );
  for (const bond of mol.bonds) {
    const key = bond.aromatic ? 12 : bond.order;
    neighbors[bond.a]!.push({ atom: bond.b, bondKey: key });
    neighbors[bond.b]!.push({ atom: bond.a, bondKey: key });
  }
  let current = initialInvariants(mol);
  const seen = new Set<number>(current);
  for (let layer = 1; layer <= radius; layer++) {
    const next: number[] = new Array(mol.atoms.length);
    for (let i = 0; i < mol.atoms.length; i++) {
      const pairs = neighbors[i]!
        .map((nb) => [nb.bondKey, current[nb.atom]!] as const)
        .sort((p, q) => (p[1] !== q[1] ? p[1] - q[1] : p[0] - q[0]));
      let invariant = hashCombine(layer, current[i]!);
      for (const [bondKey, nbInv] of pairs) {
        invariant = hashCombine(invariant, hashCombine(bondKey, nbInv));
      }
      next[i] = invariant;
      seen.add(invariant);
    }
    current = next;
  }
  return seen;
}

/** Fold the neighborhood identifiers onto a fixed-length 0/1 vector. */
export function fingerprint(
  mol: Molecule,
  radius = DEFAULT_RADIUS,
  nBits = DEFAULT_BITS,
): number[] {
  if (nBits < 1) {
    throw new Error(`nBits must be >= 1, got ${nBits}`);
  }
  const bits = new Array<number>(nBits).fill(0);
  for (const id of circularIdentifiers(mol, radius)) {
    bits[id % nBits] = 1;
  }
  return bits;
}
