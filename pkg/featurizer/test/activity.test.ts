import { describe, expect, it } from "vitest";

import { ActivityError, aggregateReplicates, toPIC50 } from "../src/activity.js";

describe("toPIC50", () => {
  it("maps the molar-convention anchor points", () => {
    expect(toPIC50(1)).toBeCloseTo(9.0, 12);
    expect(toPIC50(10)).toBeCloseTo(8.0, 12);
    expect(toPIC50(1000)).toBeCloseTo(6.0, 12);
  });

  it("rejects non-positive and non-finite input", () => {
    expect(() => toPIC50(0)).toThrow(ActivityError);
    expect(() => toPIC50(-5)).toThrow(ActivityError);
    expect(() => toPIC50(Number.NaN)).toThrow(ActivityError);
  });
});

describe("aggregateReplicates", () => {
  it("passes single measurements through", () => {
    const [out] = aggregateReplicates([{ canonicalKey: "k", pic50Values: [7.4] }]);
    expect(out).toMatchObject({ pic50: 7.4, replicates: 1 });
  });

  it("averages in log space", () => {
    const [out] = aggregateReplicates([{ canonicalKey: "k", pic50Values: [6.0, 8.0] }]);
    expect(out!.pic50).toBeCloseTo(7.0, 12);
    expect(out!.replicates).toBe(2);
  });

  it("rejects empty groups", () => {
    expect(() => aggregateReplicates([{ canonicalKey: "k", pic50Values: [] }])).toThrow(
      ActivityError,
    );
  });
});
