/**
 * Training loop: Adam on the masked Gaussian NLL plus the prior-derived
 * L2 penalty lambda * sum(w^2) over all trainable weights, with early
 * stopping on a held-out tail of the (seeded, pre-shuffled) training set.
 *
 * The loop is explicit (no model.fit) because the targets carry six
 * channels per step (flux, error, mask per band) while the network emits
 * four, which the built-in fit API refuses to pair.
 */

import * as tf from "@tensorflow/tfjs";
import { GriddedCurve, N_FEATURES, N_STEPS } from "./grid.js";
import { maskedNllLoss } from "./loss.js";
import { buildNetwork } from "./model.js";
import { Rng } from "./rng.js";
import { NetConfig, weightDecay } from "./types.js";

export class DivergenceError extends Error {}

export interface TrainedModel {
  model: tf.LayersModel;
  cfg: NetConfig;
  fluxScale: number;
  lambda: number;
  history: { loss: number[]; valLoss: number[] };
}

export function tensorsFrom(curves: GriddedCurve[]):
    { xs: tf.Tensor3D; ys: tf.Tensor3D } {
  const n = curves.length;
  const xBuf = new Float32Array(n * N_STEPS * N_FEATURES);
  const yBuf = new Float32Array(n * N_STEPS * 6);
  curves.forEach((c, i) => {
    xBuf.set(c.features, i * N_STEPS * N_FEATURES);
    yBuf.set(c.targets, i * N_STEPS * 6);
  });
  return {
    xs: tf.tensor3d(xBuf, [n, N_STEPS, N_FEATURES]),
    ys: tf.tensor3d(yBuf, [n, N_STEPS, 6]),
  };
}

export async function train(curves: GriddedCurve[], cfg: NetConfig,
                            fluxScale: number): Promise<TrainedModel> {
  if (curves.length < 5) {
    throw new Error(`need at least 5 curves to train, got ${curves.length}`);
  }
  const lambda = weightDecay(cfg, curves.length, N_STEPS);
  const { model } = buildNetwork(cfg);
  // LayerVariable.val is typed protected but is the supported handle to the
  // underlying tf.Variable needed for optimizer.minimize
  const variables = model.trainableWeights.map(
    (w) => (w as unknown as { val: tf.Variable }).val);
  const lossFn = maskedNllLoss(cfg.sigmaFloor);
  const optimizer = tf.train.adam(cfg.learningRate);

  const order = new Rng(cfg.seed ^ 0x5eed).shuffle([...curves]);
  const nVal = Math.max(1, Math.round(0.1 * order.length));
  const { xs, ys } = tensorsFrom(order.slice(0, order.length - nVal));
  const { xs: xsVal, ys: ysVal } = tensorsFrom(order.slice(order.length - nVal));
  const nTrain = order.length - nVal;

  const history = { loss: [] as number[], valLoss: [] as number[] };
  let bestVal = Infinity;
  let sinceBest = 0;
  try {
    for (let epoch = 0; epoch < cfg.epochs; epoch++) {
      let epochLoss = 0;
      let nBatches = 0;
      for (let start = 0; start < nTrain; start += cfg.batchSize) {
        const size = Math.min(cfg.batchSize, nTrain - start);
        const cost = tf.tidy(() => {
          const xb = tf.slice(xs, [start, 0, 0], [size, -1, -1]);
          const yb = tf.slice(ys, [start, 0, 0], [size, -1, -1]);
          return optimizer.minimize(() => {
            const yPred = model.apply(xb, { training: true }) as tf.Tensor;
            const l2 = tf.addN(variables.map((v) => tf.sum(tf.square(v))));
            return tf.add(lossFn(yb, yPred),
                          tf.mul(lambda, l2)) as tf.Scalar;
          }, true, variables) as tf.Scalar;
        });
        const costVal = cost.dataSync()[0];
        cost.dispose();
        if (!Number.isFinite(costVal)) {
          throw new DivergenceError(`training loss became ${costVal}`);
        }
        epochLoss += costVal;
        nBatches += 1;
      }
      const valLoss = tf.tidy(() =>
        lossFn(ysVal, model.apply(xsVal, { training: false }) as tf.Tensor)
          .dataSync()[0]);
      history.loss.push(epochLoss / nBatches);
      history.valLoss.push(valLoss);
      if (valLoss < bestVal - 1e-6) {
        bestVal = valLoss;
        sinceBest = 0;
      } else if (++sinceBest > cfg.earlyStopPatience) {
        break;
      }
    }
  } finally {
    xs.dispose();
    ys.dispose();
    xsVal.dispose();
    ysVal.dispose();
  }
  return { model, cfg, fluxScale, lambda, history };
}

/** Loss of a model on a curve set without updating weights (dropout off). */
export function evaluateLoss(model: tf.LayersModel, cfg: NetConfig,
                             curves: GriddedCurve[]): number {
  const { xs, ys } = tensorsFrom(curves);
  try {
    return tf.tidy(() => {
      const yPred = model.apply(xs, { training: false }) as tf.Tensor;
      return maskedNllLoss(cfg.sigmaFloor)(ys, yPred).dataSync()[0];
    });
  } finally {
    xs.dispose();
    ys.dispose();
  }
}
