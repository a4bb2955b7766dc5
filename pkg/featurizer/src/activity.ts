// Activity-value handling: nanomolar IC50 to pIC50, and replicate
// averaging in log space.
//
// pIC50 is the negative log10 of the *molar* IC50, so a reading stored in
// nM converts as 9 - log10(nM): 1 nM -> 9, 1 uM -> 6. This is the only
// convention that puts typical bioactivity data in the familiar 4-10 band.

export class ActivityError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ActivityError";
  }
}

export function toPIC50(ic50nM: number): number {
  if (!Number.isFinite(ic50nM) || ic50nM <= 0) {
    throw new ActivityError(`IC50 must be a positive number of nM, got ${ic50nM}`);
  }
  return 9 - Math.log10(ic50nM);
}

export interface ReplicateGroup {
  canonicalKey: string;
  pic50Values: number[];
}

export interface AggregatedActivity {
  canonicalKey: string;
  pic50: number; // arithmetic mean in log space
  replicates: number;
}

export function aggregateReplicates(groups: ReplicateGroup[]): AggregatedActivity[] {
  return groups.map((group) => {
    if (group.pic50Values.length === 0) {
      throw new ActivityError(`no values for ${group.canonicalKey}`);
    }
    const mean =
      group.pic50Values.reduce((acc, v) => acc + v, 0) / group.pic50Values.length;
    return {
      canonicalKey: group.canonicalKey,
      pic50: mean,
      replicates: group.pic50Values.length,
    };
  });
}
