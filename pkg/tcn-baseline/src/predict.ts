/**
 * Monte-Carlo dropout inference.
 *
 * With dropout left active, each stochastic forward pass yields per step a
 * predictive mean and intrinsic std; a latent flux is sampled from that
 * Normal, and the reported forecast is the sample mean and standard
 * deviation of the sampled fluxes over all passes. Rows are emitted in the
 * shared prediction schema at the grid target times, in original flux
 * units.
 */

import fs from "node:fs";
import * as tf from "@tensorflow/tfjs";
import { GriddedCurve, N_FEATURES, N_STEPS, PASSBANDS, slotTime, TIME_MAX } from "./grid.js";
import { headToMeanSigma } from "./model.js";
import { Rng } from "./rng.js";
import { TrainedModel } from "./train.js";

export interface PredictionRow {
  transientId: string;
  time: number;
  passband: string;
  y: number;
  sigmaY: number;
}

const PREDICTION_HEADER = "transient_id,time,passband,y,sigma_y";

export interface McMoments {
  /** per (curve, step, band): mean of the sampled latent fluxes (scaled) */
  mean: Float64Array;
  /** per (curve, step, band): population std of the sampled fluxes (scaled) */
  std: Float64Array;
  /** per (curve, step, band): mean of the per-draw intrinsic variances */
  meanIntVar: Float64Array;
  nDraws: number;
}

/**
 * Run n stochastic forward passes and accumulate latent-flux moments.
 * Draws are batched (several dropout samples of every curve per pass) to
 * amortize backend overhead. With mcDropout=false the network runs
 * deterministically and only the intrinsic noise is sampled, so the total
 * spread collapses to the intrinsic spread alone.
 */
export function mcMoments(trained: TrainedModel, curves: GriddedCurve[],
                          rng: Rng, drawsPerBatch = 10,
                          mcDropout = true): McMoments {
  const { model, cfg } = trained;
  const n = curves.length;
  const xBuf = new Float32Array(n * N_STEPS * N_FEATURES);
  curves.forEach((c, i) => xBuf.set(c.features, i * N_STEPS * N_FEATURES));
  const size = n * N_STEPS * 2;
  const sum = new Float64Array(size);
  const sumSq = new Float64Array(size);
  const sumIntVar = new Float64Array(size);
  let done = 0;
  while (done < cfg.nMcDraws) {
    const reps = Math.min(drawsPerBatch, cfg.nMcDraws - done);
    const { mu, sig } = tf.tidy(() => {
      const xs = tf.tensor3d(xBuf, [n, N_STEPS, N_FEATURES]);
      const tiled = tf.tile(xs, [reps, 1, 1]);
      const yPred = model.apply(tiled, { training: mcDropout }) as tf.Tensor;
      const { mean, sigma } = headToMeanSigma(yPred, cfg.sigmaFloor);
      return { mu: mean.dataSync(), sig: sigma.dataSync() };
    });
    for (let r = 0; r < reps; r++) {
      const base = r * size;
      for (let j = 0; j < size; j++) {
        const latent = mu[base + j] + sig[base + j] * rng.normal();
        sum[j] += latent;
        sumSq[j] += latent * latent;
        sumIntVar[j] += sig[base + j] * sig[base + j];
      }
    }
    done += reps;
  }
  const mean = new Float64Array(size);
  const std = new Float64Array(size);
  const meanIntVar = new Float64Array(size);
  for (let j = 0; j < size; j++) {
    mean[j] = sum[j] / cfg.nMcDraws;
    const varj = Math.max(sumSq[j] / cfg.nMcDraws - mean[j] * mean[j], 0);
    std[j] = Math.sqrt(varj);
    meanIntVar[j] = sumIntVar[j] / cfg.nMcDraws;
  }
  return { mean, std, meanIntVar, nDraws: cfg.nMcDraws };
}

/** Forecast rows at every grid target time that stays inside the window. */
export function predictMc(trained: TrainedModel, curves: GriddedCurve[],
                          rng: Rng): PredictionRow[] {
  const moments = mcMoments(trained, curves, rng);
  const rows: PredictionRow[] = [];
  const scale = trained.fluxScale;
  curves.forEach((curve, i) => {
    for (let s = 0; s < N_STEPS - 1; s++) {
      const target = slotTime(s + 1);
      if (target > TIME_MAX) continue;
      for (let band = 0; band < PASSBANDS.length; band++) {
        const j = (i * N_STEPS + s) * 2 + band;
        rows.push({
          transientId: curve.id,
          time: target,
          passband: PASSBANDS[band],
          y: moments.mean[j] * scale,
          sigmaY: Math.max(moments.std[j] * scale, 1e-9),
        });
      }
    }
  });
  return rows;
}

export function writePredictionCsv(rows: PredictionRow[], path: string): void {
  const lines = [PREDICTION_HEADER];
  for (const r of rows) {
    lines.push(`${r.transientId},${r.time},${r.passband},${r.y},${r.sigmaY}`);
  }
  fs.writeFileSync(path, lines.join("\n") + "\n");
}
