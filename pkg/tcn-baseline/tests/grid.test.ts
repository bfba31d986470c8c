import { describe, expect, it } from "vitest";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";

import { fluxScale, gridCurve, MISSING_SIGMA, N_STEPS, readDatasetCsv,
         slotOf, slotTime } from "../src/grid.js";

function curve(observations: Array<[number, string, number, number]>) {
  return {
    id: "t-1",
    label: "c",
    observations: observations.map(([time, passband, flux, fluxErr]) =>
      ({ time, passband, flux, fluxErr })),
  };
}

describe("gridding", () => {
  it("maps jittered epochs to their nearest slots", () => {
    expect(slotOf(-70)).toBe(0);
    expect(slotOf(-68.6)).toBe(0);
    expect(slotOf(-66.9)).toBe(1);
    expect(slotOf(80)).toBe(N_STEPS - 1);
    expect(slotTime(0)).toBe(-70);
    expect(slotTime(N_STEPS - 1)).toBe(80);
  });

  it("fills observed slots and marks the rest with the sigma sentinel", () => {
    const g = gridCurve(curve([
      [-70, "g", 10, 2],
      [-67.2, "r", 20, 3],
    ]), 10);
    expect(g.features[0]).toBeCloseTo(1.0, 6);       // g flux, slot 0, scaled
    expect(g.features[1]).toBeCloseTo(0.2, 6);       // g err
    expect(g.features[2]).toBe(0);                   // r missing at slot 0
    expect(g.features[3]).toBe(0);                   // sigma 0 flags missing
    expect(g.features[4 + 2]).toBeCloseTo(2.0, 6);   // r flux, slot 1
  });

  it("targets are the next slot's content with a validity mask", () => {
    const g = gridCurve(curve([
      [-70, "g", 10, 2],
      [-67, "g", 30, 2],
    ]), 10);
    expect(g.targets[0]).toBeCloseTo(3.0, 6);  // step 0 predicts slot 1 (g)
    expect(g.targets[2]).toBe(1);              // valid
    expect(g.targets[3 + 2]).toBe(0);          // r target at step 0: masked
    expect(g.targets[3 + 1]).toBe(MISSING_SIGMA); // masked slots carry the sentinel
    expect(g.targets[(N_STEPS - 1) * 6 + 2]).toBe(0); // last step has no target
  });

  it("keeps the epoch closest to the slot center on collisions", () => {
    const g = gridCurve(curve([
      [-68.9, "g", 10, 2],   // 1.1 d from slot 0 center
      [-69.8, "g", 50, 2],   // 0.2 d from slot 0 center: wins
    ]), 1);
    expect(g.features[0]).toBe(50);
  });

  it("round-trips the shared dataset schema", () => {
    const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "tcn-grid-"));
    const p = path.join(tmp, "ds.csv");
    fs.writeFileSync(p, [
      "transient_id,class_label,time,passband,flux,flux_err",
      "a-1,demo,0.0,g,5.0,1.0",
      "a-1,demo,0.0,r,6.0,1.5",
      "b-2,demo,3.0,g,7.0,1.0",
      "b-2,demo,3.5,r,8.0,1.0",
      "",
    ].join("\n"));
    const curves = readDatasetCsv(p);
    expect(curves.map((c) => c.id)).toEqual(["a-1", "b-2"]);
    expect(curves[0].observations).toHaveLength(2);
    expect(curves[1].observations[1].flux).toBe(8.0);
  });

  it("rejects a wrong header", () => {
    const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "tcn-grid-"));
    const p = path.join(tmp, "bad.csv");
    fs.writeFileSync(p, "id,time,band,flux,err\n");
    expect(() => readDatasetCsv(p)).toThrow(/header/);
  });

  it("flux scale tracks the population peak", () => {
    const curves = [
      curve([[0, "g", 100, 1], [3, "r", -40, 1]]),
      curve([[0, "g", 60, 1], [3, "r", 20, 1]]),
    ];
    expect(fluxScale(curves)).toBe(80);
    expect(fluxScale([])).toBe(1);
  });
});
