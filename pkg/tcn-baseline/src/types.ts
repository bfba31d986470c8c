/** Network settings and the prior-derived weight decay. */

export interface NetConfig {
  /** dropout rate applied after every hidden layer (also at inference) */
  dropoutRate: number;
  /** prior length-scale regularizing weight magnitudes */
  lengthScale: number;
  channels: number;
  /** temporal shift offsets of the stacked causal blocks */
  dilations: number[];
  nMcDraws: number;
  epochs: number;
  learningRate: number;
  batchSize: number;
  earlyStopPatience: number;
  seed: number;
  /** lower bound on the learned intrinsic standard deviation (scaled units) */
  sigmaFloor: number;
}

export const DEFAULT_NET_CONFIG: NetConfig = {
  dropoutRate: 0.2,
  lengthScale: 0.2,
  channels: 16,
  dilations: [1, 2, 4, 8, 16],
  nMcDraws: 100,
  epochs: 300,
  learningRate: 2e-3,
  batchSize: 16,
  earlyStopPatience: 25,
  seed: 0,
  sigmaFloor: 1e-4,
};

export class ConfigError extends Error {}

export function validateConfig(cfg: NetConfig): void {
  if (!(cfg.dropoutRate > 0 && cfg.dropoutRate < 1)) {
    throw new ConfigError(`dropout rate must be in (0, 1), got ${cfg.dropoutRate}`);
  }
  if (cfg.lengthScale <= 0) throw new ConfigError("length scale must be > 0");
  if (cfg.channels < 1 || cfg.dilations.length < 1) {
    throw new ConfigError("need at least one block with at least one channel");
  }
  if (cfg.nMcDraws < 2) throw new ConfigError("nMcDraws must be >= 2");
  if (cfg.sigmaFloor <= 0) throw new ConfigError("sigmaFloor must be > 0");
}

/**
 * L2 coefficient derived from the weight prior: lambda = l^2 (1-d) / (2 Ns Nt),
 * recomputed from the training-set size rather than hand-set.
 */
export function weightDecay(cfg: NetConfig, nTransients: number,
                            nTimeSteps: number): number {
  if (nTransients < 1 || nTimeSteps < 1) {
    throw new ConfigError("weight decay needs a non-empty training set");
  }
  return (cfg.lengthScale ** 2 * (1 - cfg.dropoutRate)) /
    (2 * nTransients * nTimeSteps);
}
