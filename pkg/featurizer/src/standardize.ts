// Structure standardization: parse, drop inorganic fragments (counterions,
// bare salts), keep the largest organic fragment, and derive a canonical
// key used to group replicate measurements of the same structure.

import {
  Molecule,
  SmilesError,
  fragments,
  parseSmiles,
  subMolecule,
  totalHydrogens,
} from "./smiles.js";

export class StandardizeError extends Error {
  constructor(message: string, public readonly reason: "unparseable" | "inorganic") {
    super(message);
    this.name = "StandardizeError";
  }
}

export interface StandardizedStructure {
  molecule: Molecule;
  canonicalKey: string;
}

export function standardize(smiles: string): StandardizedStructure {
  let mol: Molecule;
  try {
    mol = parseSmiles(smiles);
  } catch (err) {
    if (err instanceof SmilesError) {
      throw new StandardizeError(`unparseable structure: ${err.message}`, "unparseable");
    }
    throw err;
  }
  const parts = fragments(mol).map((indices) => subMolecule(mol, indices));
  const organic = parts.filter((part) => part.atoms.some((a) => a.element === "C"));
  if (organic.length === 0) {
    throw new StandardizeError("no organic fragment (no carbon)", "inorganic");
  }
  let best: { mol: Molecule; key: string } | null = null;
  for (const part of organic) {
    const key = canonicalKey(part);
    if (
      best === null ||
      part.atoms.length > best.mol.atoms.length ||
      (part.atoms.length === best.mol.atoms.length &&
        (part.bonds.length > best.mol.bonds.length ||
          (part.bonds.length === best.mol.bonds.length && key < best.key)))
    ) {
      best = { mol: part, key };
    }
  }
  return { molecule: best!.mol, canonicalKey: best!.key };
}

interface NeighborEntry {
  bondKey: number;
  rank: number;
}

/** Canonical serialization via iterative invariant refinement.
 *
 * Atom ranks start from local invariants (element, aromaticity, charge,
 * isotope, hydrogen count, degree) and are refined with sorted neighbor
 * (bond, rank) signatures until stable; remaining ties (symmetry orbits)
 * are broken by promoting one member and re-refining, which yields the
 * same serialization for any member of a true automorphism orbit.
 */
export function canonicalKey(mol: Molecule): string {
  const n = mol.atoms.length;
  const adjacency: NeighborEntry[][] = Array.from({ length: n }, () => []);
  mol.bonds.forEach((bond) => {
    const key = bond.aromatic ? 9 : bond.order;
    adjacency[bond.a]!.push({ bondKey: key, rank: bond.b });
    adjacency[bond.b]!.push({ bondKey: key, rank: bond.a });
  });

  const base = mol.atoms.map((atom, i) =>
    [
      atom.element,
      atom.aromatic ? 1 : 0,
      atom.charge,
      atom.isotope,
      totalHydrogens(mol, i),
      adjacency[i]!.length,
    ].join(","),
  );
  let ranks = ranksOf(base);

  const refine = (): void => {
    for (;;) {
      const signatures = ranks.map((rank, i) => {
        const neigh = adjacency[i]!
          .map((e) => `${e.bondKey}:${ranks[e.rank]}`)
          .sort()
          .join("|");
        return `${rank}#${neigh}`;
      });
      const next = ranksOf(signatures);
      const done = distinctCount(next) === distinctCount(ranks);
      ranks = next;
      if (done) return;
    }
  };

  refine();
  while (distinctCount(ranks) < n) {
    // promote the lowest-indexed member of the first tied class
    const byRank = new Map<number, number[]>();
    ranks.forEach((rank, i) => {
      const list = byRank.get(rank) ?? [];
      list.push(i);
      byRank.set(rank, list);
    });
    const tiedRank = [...byRank.keys()]
      .sort((a, b) => a - b)
      .find((r) => byRank.get(r)!.length > 1)!;
    const chosen = byRank.get(tiedRank)![0]!;
    ranks = renumber(ranks.map((rank, i) => (i === chosen ? rank * 2 : rank * 2 + 1)));
    refine();
  }

  const order = [...Array(n).keys()].sort((a, b) => ranks[a]! - ranks[b]!);
  const position = new Array<number>(n);
  order.forEach((atom, rank) => {
    position[atom] = rank;
  });
  const atomPart = order
    .map((i) => {
      const atom = mol.atoms[i]!;
      return [
        atom.element,
        atom.aromatic ? "a" : "",
        atom.charge ? `q${atom.charge}` : "",
        atom.isotope ? `i${atom.isotope}` : "",
        `h${totalHydrogens(mol, i)}`,
      ].join("");
    })
    .join(" ");
  const bondPart = mol.bonds
    .map((bond) => {
      const a = position[bond.a]!;
      const b = position[bond.b]!;
      const key = bond.aromatic ? "a" : String(bond.order);
      return a < b ? `${a}-${b}${key}` : `${b}-${a}${key}`;
    })
    .sort()
    .join(" ");
  return `${atomPart}/${bondPart}`;
}

function ranksOf(keys: string[]): number[] {
  const unique = [...new Set(keys)].sort();
  const index = new Map(unique.map((k, i) => [k, i]));
  return keys.map((k) => index.get(k)!);
}

function renumber(ranks: number[]): number[] {
  const unique = [...new Set(ranks)].sort((a, b) => a - b);
  const index = new Map(unique.map((v, i) => [v, i]));
  return ranks.map((v) => index.get(v)!);
}

function distinctCount(ranks: number[]): number {
  return new Set(ranks).size;
}
