#!/usr/bin/env node
/**
 * tcn-baseline run: train on one class, forecast the test set, write the
 * shared prediction CSV for `sentinel score --model external`.
 *
 * Settings come from the same pipeline YAML under its `tcn:` section;
 * flags override. Paths resolve relative to the config file.
 */

import path from "node:path";
import { parseArgs } from "node:util";
import fs from "node:fs";
import yaml from "js-yaml";

import { initBackend } from "./backend.js";
import { fluxScale, gridDataset, readDatasetCsv } from "./grid.js";
import { predictMc, writePredictionCsv } from "./predict.js";
import { Rng } from "./rng.js";
import { train } from "./train.js";
import { DEFAULT_NET_CONFIG, NetConfig } from "./types.js";

interface TcnSection {
  train_class?: string;
  train_csv?: string;
  test_csv?: string;
  predictions_out?: string;
  dropout_rate?: number;
  length_scale?: number;
  channels?: number;
  dilations?: number[];
  n_mc_draws?: number;
  epochs?: number;
  learning_rate?: number;
  batch_size?: number;
  early_stop_patience?: number;
  seed?: number;
}

function netConfigFrom(section: TcnSection, seed: number): NetConfig {
  return {
    ...DEFAULT_NET_CONFIG,
    dropoutRate: section.dropout_rate ?? DEFAULT_NET_CONFIG.dropoutRate,
    lengthScale: section.length_scale ?? DEFAULT_NET_CONFIG.lengthScale,
    channels: section.channels ?? DEFAULT_NET_CONFIG.channels,
    dilations: section.dilations ?? DEFAULT_NET_CONFIG.dilations,
    nMcDraws: section.n_mc_draws ?? DEFAULT_NET_CONFIG.nMcDraws,
    epochs: section.epochs ?? DEFAULT_NET_CONFIG.epochs,
    learningRate: section.learning_rate ?? DEFAULT_NET_CONFIG.learningRate,
    batchSize: section.batch_size ?? DEFAULT_NET_CONFIG.batchSize,
    earlyStopPatience: section.early_stop_patience
      ?? DEFAULT_NET_CONFIG.earlyStopPatience,
    seed: section.seed ?? seed,
  };
}

export async function run(argv: string[]): Promise<number> {
  const { values, positionals } = parseArgs({
    args: argv,
    allowPositionals: true,
    options: {
      config: { type: "string" },
      "train-class": { type: "string" },
      "train-csv": { type: "string" },
      "test-csv": { type: "string" },
      out: { type: "string" },
    },
  });
  if (positionals[0] !== "run" || !values.config) {
    console.error(
      "usage: tcn-baseline run --config <pipeline.yaml> [--train-class c]\n" +
      "                        [--train-csv p] [--test-csv p] [--out p]");
    return 2;
  }
  const cfgPath = path.resolve(values.config);
  const doc = yaml.load(fs.readFileSync(cfgPath, "utf-8")) as Record<string, unknown>;
  const section = ((doc.tcn ?? {}) as TcnSection);
  const baseDir = path.dirname(cfgPath);
  const resolve = (p: string | undefined, fallback: string) =>
    path.resolve(baseDir, p ?? fallback);

  const outputDir = path.resolve(baseDir, String(doc.output_dir ?? "out"));
  const trainClass = values["train-class"] ?? section.train_class;
  if (!trainClass) {
    console.error("error: no training class (set tcn.train_class or --train-class)");
    return 2;
  }
  const trainCsv = values["train-csv"]
    ? path.resolve(values["train-csv"])
    : resolve(section.train_csv, path.join(outputDir, "train.csv"));
  const testCsv = values["test-csv"]
    ? path.resolve(values["test-csv"])
    : resolve(section.test_csv, path.join(outputDir, "test.csv"));
  const outCsv = values.out
    ? path.resolve(values.out)
    : resolve(section.predictions_out, path.join(baseDir, "tcn_predictions.csv"));
  const cfg = netConfigFrom(section, Number(doc.seed ?? 0));

  const backend = await initBackend();
  console.error(`backend: ${backend}`);

  const trainCurves = readDatasetCsv(trainCsv).filter((c) => c.label === trainClass);
  if (trainCurves.length === 0) {
    console.error(`error: no curves of class '${trainClass}' in ${trainCsv}`);
    return 2;
  }
  const scale = fluxScale(trainCurves);
  console.error(`training on ${trainCurves.length} ${trainClass} curves ` +
    `(flux scale ${scale.toFixed(1)})`);
  const t0 = Date.now();
  const trained = await train(gridDataset(trainCurves, scale), cfg, scale);
  const h = trained.history;
  console.error(
    `trained ${h.loss.length} epochs in ${((Date.now() - t0) / 1000).toFixed(1)}s ` +
    `(loss ${h.loss[0].toFixed(3)} -> ${h.loss[h.loss.length - 1].toFixed(3)}, ` +
    `lambda ${trained.lambda.toExponential(2)})`);

  const testCurves = readDatasetCsv(testCsv);
  const rows = predictMc(trained, gridDataset(testCurves, scale),
                         new Rng(cfg.seed ^ 0xd0a));
  writePredictionCsv(rows, outCsv);
  console.error(`wrote ${rows.length} prediction rows for ` +
    `${testCurves.length} curves to ${outCsv}`);
  return 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("tcn-baseline")) {
  run(process.argv.slice(2)).then((code) => { process.exitCode = code; });
}
