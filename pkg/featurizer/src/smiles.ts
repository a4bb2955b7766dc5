// SMILES parser covering the organic subset, bracket atoms, branches,
// ring closures (including %nn), aromatic lowercase atoms, charges and
// isotopes. Stereo markers (/ \ @) are accepted and ignored; fingerprints
// and canonical keys here are constitution-only.

export interface Atom {
  element: string; // canonical symbol, e.g. "C", "Cl", "Na"
  aromatic: boolean;
  charge: number;
  isotope: number; // 0 = unspecified
  explicitH: number | null; // bracket H count; null = derive implicit H
}

export interface Bond {
  a: number;
  b: number;
  order: number; // 1, 2, 3 (aromatic bonds carry order 1 plus the flag)
  aromatic: boolean;
}

export interface Molecule {
  atoms: Atom[];
  bonds: Bond[];
}

export class SmilesError extends Error {
  constructor(message: string, public readonly position: number) {
    super(`${message} (at position ${position})`);
    this.name = "SmilesError";
  }
}

const ORGANIC_TWO = new Set(["Cl", "Br"]);
const ORGANIC_ONE = new Set(["B", "C", "N", "O", "P", "S", "F", "I"]);
const AROMATIC_ORGANIC = new Set(["b", "c", "n", "o", "p", "s"]);

export const ATOMIC_NUMBERS: Record<string, number> = {
  H: 1, He: 2, Li: 3, Be: 4, B: 5, C: 6, N: 7, O: 8, F: 9, Ne: 10,
  Na: 11, Mg: 12, Al: 13, Si: 14, P: 15, S: 16, Cl: 17, Ar: 18, K: 19,
  Ca: 20, Mn: 25, Fe: 26, Co: 27, Ni: 28, Cu: 29, Zn: 30, As: 33, Se: 34,
  Br: 35, Ag: 47, Sn: 50, I: 53, Pt: 78, Au: 79, Hg: 80,
};

// Standard valence lists for implicit-hydrogen derivation (organic subset).
const VALENCES: Record<string, number[]> = {
  B: [3],
  C: [4],
  N: [3, 5],
  O: [2],
  P: [3, 5],
  S: [2, 4, 6],
  F: [1],
  Cl: [1],
  Br: [1],
  I: [1],
};

interface PendingBond {
  order: number;
  aromatic: boolean;
  explicit: boolean;
}

interface RingOpening {
  atom: number;
  bond: PendingBond | null;
  position: number;
}

export function parseSmiles(text: string): Molecule {
  if (!text || !text.trim()) {
    throw new SmilesError("empty SMILES", 0);
  }
  const atoms: Atom[] = [];
  const bonds: Bond[] = [];
  const branchStack: number[] = [];
  const rings = new Map<number, RingOpening>();
  let prev: number | null = null;
  let pending: PendingBond | null = null;
  let pos = 0;

  const addAtom = (atom: Atom): void => {
    atoms.push(atom);
    const index = atoms.length - 1;
    if (prev !== null) {
      bonds.push(makeBond(prev, index, pending, atoms));
    }
    pending = null;
    prev = index;
  };

  const closeRing = (label: number): void => {
    const open = rings.get(label);
    if (prev === null) {
      throw new SmilesError(`ring closure ${label} before any atom`, pos);
    }
    if (open === undefined) {
      rings.set(label, { atom: prev, bond: pending, position: pos });
      pending = null;
      return;
    }
    rings.delete(label);
    const bond = pending ?? open.bond;
    if (open.atom === prev) {
      throw new SmilesError(`ring closure ${label} bonds an atom to itself`, pos);
    }
    bonds.push(makeBond(open.atom, prev, bond, atoms));
    pending = null;
  };

  while (pos < text.length) {
    const ch = text[pos]!;
    if (ch === " " || ch === "\t") {
      break; // SMILES body ends at whitespace
    }
    if (ch === "(") {
      if (prev === null) {
        throw new SmilesError("branch before any atom", pos);
      }
      branchStack.push(prev);
      pos += 1;
      continue;
    }
    if (ch === ")") {
      const back = branchStack.pop();
      if (back === undefined) {
        throw new SmilesError("unmatched ')'", pos);
      }
      prev = back;
      pos += 1;
      continue;
    }
    if (ch === "-" || ch === "/" || ch === "\\") {
      pending = { order: 1, aromatic: false, explicit: true };
      pos += 1;
      continue;
    }
    if (ch === "=") {
      pending = { order: 2, aromatic: false, explicit: true };
      pos += 1;
      continue;
    }
    if (ch === "#") {
      pending = { order: 3, aromatic: false, explicit: true };
      pos += 1;
      continue;
    }
    if (ch === ":") {
      pending = { order: 1, aromatic: true, explicit: true };
      pos += 1;
      continue;
    }
    if (ch === ".") {
      if (pending !== null) {
        throw new SmilesError("bond symbol before '.'", pos);
      }
      prev = null;
      pos += 1;
      continue;
    }
    if (ch >= "0" && ch <= "9") {
      closeRing(Number(ch));
      pos += 1;
      continue;
    }
    if (ch === "%") {
      const digits = text.slice(pos + 1, pos + 3);
      if (!/^\d\d$/.test(digits)) {
        throw new SmilesError("'%' needs two digits", pos);
      }
      closeRing(Number(digits));
      pos += 3;
      continue;
    }
    if (ch === "[") {
      const end = text.indexOf("]", pos);
      if (end < 0) {
        throw new SmilesError("unclosed bracket atom", pos);
      }
      addAtom(parseBracket(text.slice(pos + 1, end), pos));
      pos = end + 1;
      continue;
    }
    const two = text.slice(pos, pos + 2);
    if (ORGANIC_TWO.has(two)) {
      addAtom({ element: two, aromatic: false, charge: 0, isotope: 0, explicitH: null });
      pos += 2;
      continue;
    }
    if (ORGANIC_ONE.has(ch)) {
      addAtom({ element: ch, aromatic: false, charge: 0, isotope: 0, explicitH: null });
      pos += 1;
      continue;
    }
    if (AROMATIC_ORGANIC.has(ch)) {
      addAtom({
        element: ch.toUpperCase(),
        aromatic: true,
        charge: 0,
        isotope: 0,
        explicitH: null,
      });
      pos += 1;
      continue;
    }
    throw new SmilesError(`unexpected character ${JSON.stringify(ch)}`, pos);
  }

  if (branchStack.length > 0) {
    throw new SmilesError("unclosed '('", pos);
  }
  if (rings.size > 0) {
    const open = [...rings.values()][0]!;
    throw new SmilesError("unclosed ring bond", open.position);
  }
  if (pending !== null) {
    throw new SmilesError("dangling bond symbol", pos);
  }
  if (atoms.length === 0) {
    throw new SmilesError("no atoms", 0);
  }
  return { atoms, bonds };
}

function makeBond(
  a: number,
  b: number,
  pending: PendingBond | null,
  atoms: Atom[],
): Bond {
  if (pending !== null) {
    return { a, b, order: pending.aromatic ? 1 : pending.order, aromatic: pending.aromatic };
  }
  const aromatic = atoms[a]!.aromatic && atoms[b]!.aromatic;
  return { a, b, order: 1, aromatic };
}

function parseBracket(body: string, pos: number): Atom {
  // [isotope? symbol chirality? Hcount? charge? (:class)?]
  const match = body.match(
    /^(\d+)?([A-Z][a-z]?|[a-z])(@{1,2})?(H\d*)?((?:\+{1,3}|-{1,3})|[+-]\d+)?(?::\d+)?$/,
  );
  if (!match) {
    throw new SmilesError(`cannot parse bracket atom [${body}]`, pos);
  }
  const [, isotope, rawSymbol, , hPart, chargePart] = match;
  const aromatic = rawSymbol === rawSymbol!.toLowerCase();
  const element = aromatic
    ? rawSymbol!.charAt(0).toUpperCase() + rawSymbol!.slice(1)
    : rawSymbol!;
  if (!(element in ATOMIC_NUMBERS)) {
    throw new SmilesError(`unknown element ${element}`, pos);
  }
  let charge = 0;
  if (chargePart) {
    if (/^\+{1,3}$/.test(chargePart)) charge = chargePart.length;
    else if (/^-{1,3}$/.test(chargePart)) charge = -chargePart.length;
    else charge = Number(chargePart);
  }
  let explicitH = 0;
  if (hPart) {
    explicitH = hPart === "H" ? 1 : Number(hPart.slice(1));
  }
  return {
    element,
    aromatic,
    charge,
    isotope: isotope ? Number(isotope) : 0,
    explicitH,
  };
}

export function degreeOf(mol: Molecule, index: number): number {
  let n = 0;
  for (const bond of mol.bonds) {
    if (bond.a === index || bond.b === index) n += 1;
  }
  return n;
}

/** Total hydrogen count: bracket-explicit, or derived from standard valences.
 *
 * Aromatic atoms follow the lowercase-SMILES convention: aromatic carbon
 * carries 3 - degree hydrogens; every other aromatic element carries none
 * (pyrrole-type nitrogens must be written [nH]).
 */
export function totalHydrogens(mol: Molecule, index: number): number {
  const atom = mol.atoms[index]!;
  if (atom.explicitH !== null) {
    return atom.explicitH;
  }
  const degree = degreeOf(mol, index);
  if (atom.aromatic) {
    return atom.element === "C" ? Math.max(0, 3 - degree) : 0;
  }
  const valences = VALENCES[atom.element];
  if (!valences) {
    return 0; // bare metals etc. never get implicit hydrogens
  }
  let orderSum = 0;
  for (const bond of mol.bonds) {
    if (bond.a === index || bond.b === index) {
      orderSum += bond.aromatic ? 1.5 : bond.order;
    }
  }
  const needed = Math.ceil(orderSum);
  for (const v of valences) {
    if (v >= needed) return v - needed;
  }
  return 0;
}

/** Atom indices that sit on at least one cycle (endpoints of non-bridge bonds). */
export function ringMembership(mol: Molecule): boolean[] {
  const n = mol.atoms.length;
  const adjacency: Array<Array<{ to: number; bond: number }>> = Array.from(
    { length: n },
    () => [],
  );
  mol.bonds.forEach((bond, i) => {
    adjacency[bond.a]!.push({ to: bond.b, bond: i });
    adjacency[bond.b]!.push({ to: bond.a, bond: i });
  });
  const disc = new Array<number>(n).fill(-1);
  const low = new Array<number>(n).fill(0);
  const isBridge = new Array<boolean>(mol.bonds.length).fill(false);
  let timer = 0;
  // iterative DFS lowlink bridge finding
  for (let root = 0; root < n; root++) {
    if (disc[root] !== -1) continue;
    const stack: Array<{ node: number; parentBond: number; edgeIndex: number }> = [
      { node: root, parentBond: -1, edgeIndex: 0 },
    ];
    disc[root] = low[root] = timer++;
    while (stack.length > 0) {
      const frame = stack[stack.length - 1]!;
      const edges = adjacency[frame.node]!;
      if (frame.edgeIndex < edges.length) {
        const { to, bond } = edges[frame.edgeIndex]!;
        frame.edgeIndex += 1;
        if (bond === frame.parentBond) continue;
        if (disc[to] === -1) {
          disc[to] = low[to] = timer++;
          stack.push({ node: to, parentBond: bond, edgeIndex: 0 });
        } else {
          low[frame.node] = Math.min(low[frame.node]!, disc[to]!);
        }
      } else {
        stack.pop();
        const parent = stack[stack.length - 1];
        if (parent) {
          low[parent.node] = Math.min(low[parent.node]!, low[frame.node]!);
          if (low[frame.node]! > disc[parent.node]!) {
            isBridge[frame.parentBond] = true;
          }
        }
      }
    }
  }
  const inRing = new Array<boolean>(n).fill(false);
  mol.bonds.forEach((bond, i) => {
    if (!isBridge[i]) {
      inRing[bond.a] = true;
      inRing[bond.b] = true;
    }
  });
  return inRing;
}

/** Connected components as lists of atom indices, in first-seen order. */
export function fragments(mol: Molecule): number[][] {
  const n = mol.atoms.length;
  const adjacency: number[][] = Array.from({ length: n }, () => []);
  for (const bond of mol.bonds) {
    adjacency[bond.a]!.push(bond.b);
    adjacency[bond.b]!.push(bond.a);
  }
  const seen = new Array<boolean>(n).fill(false);
  const out: number[][] = [];
  for (let start = 0; start < n; start++) {
    if (seen[start]) continue;
    const queue = [start];
    seen[start] = true;
    const component: number[] = [];
    while (queue.length > 0) {
      const node = queue.shift()!;
      component.push(node);
      for (const next of adjacency[node]!) {
        if (!seen[next]) {
          seen[next] = true;
          queue.push(next);
        }
      }
    }
    out.push(component);
  }
  return out;
}

/** Extract the sub-molecule induced by the given atom indices. */
export function subMolecule(mol: Molecule, atomIndices: number[]): Molecule {
  const remap = new Map<number, number>();
  atomIndices.forEach((original, fresh) => remap.set(original, fresh));
  const atoms = atomIndices.map((i) => ({ ...mol.atoms[i]! }));
  const bonds: Bond[] = [];
  for (const bond of mol.bonds) {
    const a = remap.get(bond.a);
    const b = remap.get(bond.b);
    if (a !== undefined && b !== undefined) {
      bonds.push({ a, b, order: bond.order, aromatic: bond.aromatic });
    }
  }
  return { atoms, bonds };
}
