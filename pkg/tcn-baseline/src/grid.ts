/**
 * Dataset loading and resampling onto the uniform 3-day grid.
 *
 * Light curves arrive as irregular per-passband epochs in the shared CSV
 * schema; the network wants a regular sequence. Each observation lands in
 * its nearest grid slot over [-70, +80] days (51 slots, 3 days apart);
 * missing slots carry zero flux and a huge uncertainty sentinel so the
 * likelihood ignores them. Fluxes are divided by a population scale so the
 * network trains on O(1) numbers.
 */

import fs from "node:fs";
import Papa from "papaparse";

export const TIME_MIN = -70;
export const TIME_MAX = 80;
export const CADENCE_DAYS = 3;
export const N_STEPS = 51; // grid slots covering [-70, 80]
export const PASSBANDS = ["g", "r"] as const;
export const N_FEATURES = 2 * PASSBANDS.length; // flux + error per band
/**
 * Sigma recorded for unobserved TARGET slots (those terms are masked out
 * of the likelihood, the value is never used numerically).
 *
 * Input features encode a missing slot as (flux 0, sigma 0) instead: every
 * real observation has sigma > 0, so zero uniquely flags "no data" while
 * keeping the input magnitudes of order one; a large sentinel value fed
 * through the network destroys its conditioning under dropout.
 */
export const MISSING_SIGMA = 1e3;

export interface Observation {
  time: number;
  passband: string;
  flux: number;
  fluxErr: number;
}

export interface LightCurve {
  id: string;
  label: string;
  observations: Observation[];
}

export interface GriddedCurve {
  id: string;
  label: string;
  /** (N_STEPS, 4): scaled [fluxG, errG, fluxR, errR] per slot */
  features: Float32Array;
  /** (N_STEPS, 6): scaled [fluxG, errG, maskG, fluxR, errR, maskR] of the NEXT slot */
  targets: Float32Array;
}

const DATASET_HEADER = "transient_id,class_label,time,passband,flux,flux_err";

export function readDatasetCsv(path: string): LightCurve[] {
  const text = fs.readFileSync(path, "utf-8");
  const firstLine = text.slice(0, text.indexOf("\n")).trim();
  if (firstLine !== DATASET_HEADER) {
    throw new Error(`${path}: expected header '${DATASET_HEADER}', got '${firstLine}'`);
  }
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true, skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new Error(`${path}:${(e.row ?? 0) + 2}: ${e.message}`);
  }
  const byId = new Map<string, LightCurve>();
  for (const row of parsed.data) {
    const id = row.transient_id;
    let lc = byId.get(id);
    if (!lc) {
      lc = { id, label: row.class_label, observations: [] };
      byId.set(id, lc);
    }
    lc.observations.push({
      time: Number(row.time),
      passband: row.passband,
      flux: Number(row.flux),
      fluxErr: Number(row.flux_err),
    });
  }
  return [...byId.values()].sort((a, b) => a.id.localeCompare(b.id));
}

export function slotOf(time: number): number {
  const slot = Math.round((time - TIME_MIN) / CADENCE_DAYS);
  return Math.min(Math.max(slot, 0), N_STEPS - 1);
}

export function slotTime(slot: number): number {
  return TIME_MIN + CADENCE_DAYS * slot;
}

/** Population flux scale: mean over curves of the per-curve peak |flux|. */
export function fluxScale(curves: LightCurve[]): number {
  if (curves.length === 0) return 1;
  let total = 0;
  for (const lc of curves) {
    let peak = 0;
    for (const o of lc.observations) peak = Math.max(peak, Math.abs(o.flux));
    total += peak;
  }
  return Math.max(total / curves.length, 1);
}

export function gridCurve(lc: LightCurve, scale: number): GriddedCurve {
  const features = new Float32Array(N_STEPS * N_FEATURES); // zeros = missing
  const observed = new Float32Array(N_STEPS * 2); // per (slot, band): 1 if filled
  const slotDist = new Float32Array(N_STEPS * 2).fill(Infinity);
  for (const o of lc.observations) {
    const band = PASSBANDS.indexOf(o.passband as "g" | "r");
    if (band < 0) throw new Error(`${lc.id}: unknown passband ${o.passband}`);
    const s = slotOf(o.time);
    // on a slot collision keep the observation closer to the slot center
    const d = Math.abs(o.time - slotTime(s));
    if (observed[s * 2 + band] && d >= slotDist[s * 2 + band]) continue;
    slotDist[s * 2 + band] = d;
    features[s * N_FEATURES + band * 2] = o.flux / scale;
    features[s * N_FEATURES + band * 2 + 1] = o.fluxErr / scale;
    observed[s * 2 + band] = 1;
  }
  // target at step s is the slot s+1 content; the final step has no target
  const targets = new Float32Array(N_STEPS * 6);
  for (let s = 0; s < N_STEPS; s++) {
    const next = s + 1;
    for (let band = 0; band < 2; band++) {
      const base = s * 6 + band * 3;
      if (next < N_STEPS && observed[next * 2 + band]) {
        targets[base] = features[next * N_FEATURES + band * 2];
        targets[base + 1] = features[next * N_FEATURES + band * 2 + 1];
        targets[base + 2] = 1;
      } else {
        targets[base + 1] = MISSING_SIGMA;
      }
    }
  }
  return { id: lc.id, label: lc.label, features, targets };
}

export function gridDataset(curves: LightCurve[], scale: number): GriddedCurve[] {
  return curves.map((lc) => gridCurve(lc, scale));
}
