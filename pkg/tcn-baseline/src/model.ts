/**
 * Causal dilated temporal-convolution stack with a heteroscedastic
 * Gaussian head.
 *
 * Each block applies two causal convolutions with dropout plus a residual
 * skip. A kernel-2 convolution at dilation d computes
 * y[t] = W * [x[t-d], x[t]] + b, which is built here from a temporal-shift
 * layer, a channel concat, and a pointwise dense layer: identical math,
 * but expressed through operations the pure-JS/WASM backends can
 * differentiate (their conv kernels lack dilated gradients).
 *
 * The head outputs, per passband, a predictive mean and a raw value that
 * becomes the intrinsic standard deviation through softplus plus a floor.
 */

import * as tf from "@tensorflow/tfjs";
import { N_FEATURES, N_STEPS } from "./grid.js";
import { NetConfig, validateConfig } from "./types.js";

/** y[t] = x[t - shift], zero-padded at the sequence start. */
export class TemporalShift extends tf.layers.Layer {
  static className = "TemporalShift";

  constructor(private readonly shift: number) {
    super({ name: `temporal_shift_${shift}_${Math.random().toString(36).slice(2, 7)}` });
  }

  override computeOutputShape(inputShape: tf.Shape): tf.Shape {
    return inputShape;
  }

  override call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    const x = Array.isArray(inputs) ? inputs[0] : inputs;
    return tf.tidy(() => {
      const steps = x.shape[1] as number;
      const padded = tf.pad(x, [[0, 0], [this.shift, 0], [0, 0]]);
      return tf.slice(padded, [0, 0, 0], [-1, steps, -1]);
    });
  }
}

export interface BuiltNetwork {
  model: tf.LayersModel;
  receptiveField: number;
}

function causalConv(x: tf.SymbolicTensor, dilation: number, units: number,
                    seed: number,
                    activation: "relu" | undefined): tf.SymbolicTensor {
  const shifted = new TemporalShift(dilation).apply(x) as tf.SymbolicTensor;
  const both = tf.layers.concatenate({ axis: -1 })
    .apply([shifted, x]) as tf.SymbolicTensor;
  return tf.layers.dense({
    units,
    activation,
    kernelInitializer: tf.initializers.glorotUniform({ seed }),
  }).apply(both) as tf.SymbolicTensor;
}

/**
 * Build the sequence-to-sequence network: input (steps, 4) of per-band
 * scaled fluxes and errors, output (steps, 4) of per-band predictive mean
 * and raw intrinsic-scatter value for the NEXT step.
 */
export function buildNetwork(cfg: NetConfig): BuiltNetwork {
  validateConfig(cfg);
  const input = tf.input({ shape: [N_STEPS, N_FEATURES] });
  let x = input;
  let seed = cfg.seed;
  for (const d of cfg.dilations) {
    const pre = x;
    let h = causalConv(x, d, cfg.channels, seed++, "relu");
    h = tf.layers.dropout({ rate: cfg.dropoutRate }).apply(h) as tf.SymbolicTensor;
    h = causalConv(h, d, cfg.channels, seed++, "relu");
    h = tf.layers.dropout({ rate: cfg.dropoutRate }).apply(h) as tf.SymbolicTensor;
    const skip = (pre.shape[2] as number) === cfg.channels
      ? pre
      : tf.layers.dense({
          units: cfg.channels,
          kernelInitializer: tf.initializers.glorotUniform({ seed: seed++ }),
        }).apply(pre) as tf.SymbolicTensor;
    x = tf.layers.add().apply([h, skip]) as tf.SymbolicTensor;
  }
  const out = tf.layers.dense({
    units: 4, // [meanG, meanR, rawSigmaG, rawSigmaR]
    kernelInitializer: tf.initializers.glorotUniform({ seed: seed++ }),
  }).apply(x) as tf.SymbolicTensor;
  const model = tf.model({ inputs: input, outputs: out });
  const receptiveField = 1 + 2 * cfg.dilations.reduce((a, b) => a + b, 0);
  return { model, receptiveField };
}

/** Split a raw head output tensor into means and positive sigmas. */
export function headToMeanSigma(yPred: tf.Tensor, sigmaFloor: number):
    { mean: tf.Tensor; sigma: tf.Tensor } {
  const mean = tf.slice(yPred, [0, 0, 0], [-1, -1, 2]);
  const raw = tf.slice(yPred, [0, 0, 2], [-1, -1, 2]);
  const sigma = tf.add(tf.softplus(raw), sigmaFloor);
  return { mean, sigma };
}
