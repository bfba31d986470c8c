import { beforeAll, describe, expect, it } from "vitest";
import * as tf from "@tensorflow/tfjs";

import { initBackend } from "../src/backend.js";
import { N_FEATURES, N_STEPS } from "../src/grid.js";
import { buildNetwork } from "../src/model.js";
import { ConfigError, DEFAULT_NET_CONFIG } from "../src/types.js";

beforeAll(async () => {
  await initBackend();
});

function randomInput(seed: number, batch = 1): tf.Tensor3D {
  return tf.randomNormal([batch, N_STEPS, N_FEATURES], 0, 1, "float32", seed);
}

describe("network structure", () => {
  it("rejects bad settings", () => {
    expect(() => buildNetwork({ ...DEFAULT_NET_CONFIG, dropoutRate: 0 }))
      .toThrow(ConfigError);
    expect(() => buildNetwork({ ...DEFAULT_NET_CONFIG, dilations: [] }))
      .toThrow(ConfigError);
  });

  it("covers at least 50 steps of context", () => {
    const { receptiveField } = buildNetwork(DEFAULT_NET_CONFIG);
    expect(receptiveField).toBeGreaterThanOrEqual(50);
  });

  it("is causal at every step", () => {
    const { model } = buildNetwork(DEFAULT_NET_CONFIG);
    const a = randomInput(1);
    const ya = tf.tidy(() =>
      (model.apply(a, { training: false }) as tf.Tensor).arraySync()) as number[][][];
    for (const cut of [0, 1, 5, 25, 49]) {
      // perturb all inputs strictly after `cut`
      const mask = tf.concat([
        tf.zeros([1, cut + 1, N_FEATURES]),
        tf.ones([1, N_STEPS - cut - 1, N_FEATURES]),
      ], 1);
      const yb = tf.tidy(() =>
        (model.apply(a.add(mask.mul(7.0)), { training: false }) as tf.Tensor)
          .arraySync()) as number[][][];
      for (let s = 0; s <= cut; s++) {
        for (let f = 0; f < 4; f++) {
          expect(yb[0][s][f]).toBe(ya[0][s][f]);
        }
      }
      // sanity: the step right after the cut does feel the change
      if (cut + 1 < N_STEPS) {
        const changed = yb[0][cut + 1].some((v, f) => v !== ya[0][cut + 1][f]);
        expect(changed).toBe(true);
      }
    }
  });

  it("is deterministic with dropout disabled at inference", () => {
    const { model } = buildNetwork(DEFAULT_NET_CONFIG);
    const x = randomInput(2);
    const y1 = (model.apply(x, { training: false }) as tf.Tensor).dataSync();
    const y2 = (model.apply(x, { training: false }) as tf.Tensor).dataSync();
    expect(Array.from(y1)).toEqual(Array.from(y2));
  });

  it("varies across passes with dropout active", () => {
    const { model } = buildNetwork(DEFAULT_NET_CONFIG);
    const x = randomInput(3);
    const y1 = (model.apply(x, { training: true }) as tf.Tensor).dataSync();
    const y2 = (model.apply(x, { training: true }) as tf.Tensor).dataSync();
    let different = false;
    for (let i = 0; i < y1.length; i++) {
      if (y1[i] !== y2[i]) { different = true; break; }
    }
    expect(different).toBe(true);
  });

  it("propagates gradients across the advertised receptive field", async () => {
    // finite-difference probe: with the default dilation schedule, input
    // step T-50 must influence the output at step T
    const { model, receptiveField } = buildNetwork(
      { ...DEFAULT_NET_CONFIG, seed: 9 });
    expect(receptiveField).toBeGreaterThanOrEqual(50);
    const x = randomInput(4);
    const base = (model.apply(x, { training: false }) as tf.Tensor)
      .arraySync() as number[][][];
    const lastStep = N_STEPS - 1;
    const probeStep = lastStep - 50;
    const delta = tf.buffer([1, N_STEPS, N_FEATURES]);
    delta.set(3.0, 0, probeStep, 0);
    const bumped = (model.apply(x.add(delta.toTensor()),
                                { training: false }) as tf.Tensor)
      .arraySync() as number[][][];
    const moved = bumped[0][lastStep].some((v, f) => v !== base[0][lastStep][f]);
    expect(moved).toBe(true);
  });
});
