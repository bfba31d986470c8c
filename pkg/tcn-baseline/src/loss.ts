/**
 * Heteroscedastic Gaussian negative log likelihood.
 *
 * Each valid target contributes
 *   0.5 * [ log(2 pi (sigma_int^2 + sigma_D^2)) + (mu - D)^2 / (sigma_int^2 + sigma_D^2) ]
 * so both the learned intrinsic variance and the measurement variance
 * enter the residual weighting and the normalization. Unobserved targets
 * are masked out.
 */

import * as tf from "@tensorflow/tfjs";
import { headToMeanSigma } from "./model.js";

export class NonFiniteLossError extends Error {}

export interface NllElement {
  observed: number;       // D
  mean: number;           // mu
  sigmaInt: number;       // learned intrinsic std (after the positive transform)
  sigmaMeas: number;      // sigma_D
}

/**
 * Reference negative log likelihood plus L2 penalty, computed in float64.
 *
 * This is the quantity the network minimizes (up to the constant factor of
 * averaging); tests compare the tensor-graph training loss against it.
 */
export function nllLoss(elements: NllElement[], lambda: number,
                        weights: number[] = []): number {
  let total = 0;
  for (const e of elements) {
    const v = e.sigmaInt ** 2 + e.sigmaMeas ** 2;
    if (!(v > 0) || !Number.isFinite(e.mean) || !Number.isFinite(e.observed)) {
      throw new NonFiniteLossError(`bad element ${JSON.stringify(e)}`);
    }
    total += 0.5 * (Math.log(2 * Math.PI * v) + (e.observed - e.mean) ** 2 / v);
  }
  let l2 = 0;
  for (const w of weights) l2 += w * w;
  const out = total + lambda * l2;
  if (!Number.isFinite(out)) throw new NonFiniteLossError(`loss = ${out}`);
  return out;
}

/**
 * Tensor-graph loss for training: masked mean NLL per valid target.
 * The L2 term is contributed separately by the layers' kernel regularizers.
 *
 * yTrue: (batch, steps, 6) = [D_g, sigmaD_g, mask_g, D_r, sigmaD_r, mask_r]
 * yPred: (batch, steps, 4) = [mu_g, mu_r, raw_g, raw_r]
 */
export function maskedNllLoss(sigmaFloor: number) {
  return (yTrue: tf.Tensor, yPred: tf.Tensor): tf.Tensor =>
    tf.tidy(() => {
      const { mean, sigma } = headToMeanSigma(yPred, sigmaFloor);
      const observed = tf.concat([
        tf.slice(yTrue, [0, 0, 0], [-1, -1, 1]),
        tf.slice(yTrue, [0, 0, 3], [-1, -1, 1]),
      ], -1);
      const sigmaMeas = tf.concat([
        tf.slice(yTrue, [0, 0, 1], [-1, -1, 1]),
        tf.slice(yTrue, [0, 0, 4], [-1, -1, 1]),
      ], -1);
      const mask = tf.concat([
        tf.slice(yTrue, [0, 0, 2], [-1, -1, 1]),
        tf.slice(yTrue, [0, 0, 5], [-1, -1, 1]),
      ], -1);
      const v = tf.add(tf.square(sigma), tf.square(sigmaMeas));
      const nll = tf.mul(0.5, tf.add(
        tf.log(tf.mul(2 * Math.PI, v)),
        tf.div(tf.square(tf.sub(observed, mean)), v)));
      const totalValid = tf.maximum(tf.sum(mask), 1);
      return tf.div(tf.sum(tf.mul(nll, mask)), totalValid);
    });
}
