/**
 * Cross-model comparison on the synthetic benchmark, driven through the
 * primary pipeline's external-model interface.
 *
 * Expected outcome: the network, trained on one rise/fall class, predicts
 * a morphology it has never seen (plateau) better than the parametric
 * model does (smaller measurement-scaled error spread), and precisely
 * because of that flexibility its anomaly-detection AUC is lower.
 */

import { beforeAll, describe, expect, it } from "vitest";
import { execFileSync } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import yaml from "js-yaml";

import { initBackend } from "../src/backend.js";
import { run as tcnRun } from "../src/cli.js";

const REPO_ROOT = path.resolve(__dirname, "..", "..");
const TRAINED = "snia_like";
const ANOMALY_CLASSES = ["double_peak", "plateau", "linear_rise", "flat_agn_like"];

function sentinel(args: string[], cwd: string): void {
  execFileSync("sentinel", args, { cwd, stdio: ["ignore", "pipe", "pipe"] });
}

interface ScoreRow {
  transientId: string;
  muspe: number;
  runningScore: number;
}

function readScores(file: string): Map<string, ScoreRow[]> {
  const lines = fs.readFileSync(file, "utf-8").trim().split(/\r?\n/);
  expect(lines[0]).toBe(
    "transient_id,model_class,time,passband,chi2,muspe,running_score");
  const byId = new Map<string, ScoreRow[]>();
  for (const line of lines.slice(1)) {
    const [tid, , , , , muspe, running] = line.split(",");
    const rows = byId.get(tid) ?? [];
    rows.push({ transientId: tid, muspe: Number(muspe),
                runningScore: Number(running) });
    byId.set(tid, rows);
  }
  return byId;
}

function classOfTestCurves(testCsv: string): Map<string, string> {
  const lines = fs.readFileSync(testCsv, "utf-8").trim().split(/\r?\n/).slice(1);
  const map = new Map<string, string>();
  for (const line of lines) {
    const [tid, label] = line.split(",");
    map.set(tid, label);
  }
  return map;
}

function stdAboutMean(values: number[]): number {
  const mean = values.reduce((a, b) => a + b, 0) / values.length;
  const varSum = values.reduce((a, b) => a + (b - mean) ** 2, 0) / values.length;
  return Math.sqrt(varSum);
}

function perModelAucs(summaryCsv: string, modelClass: string): Map<string, number> {
  const lines = fs.readFileSync(summaryCsv, "utf-8").trim().split(/\r?\n/).slice(1);
  const aucs = new Map<string, number>();
  for (const line of lines) {
    const [model, anomalyClass, auc] = line.split(",");
    if (model === modelClass) aucs.set(anomalyClass, Number(auc));
  }
  return aucs;
}

beforeAll(async () => {
  await initBackend();
});

describe("flexibility vs detectability", () => {
  it("predicts an unseen class better than the parametric model, "
     + "and detects anomalies worse", async () => {
    const work = fs.mkdtempSync(path.join(os.tmpdir(), "tcn-flex-"));
    const benchmark = yaml.load(fs.readFileSync(
      path.join(REPO_ROOT, "configs", "benchmark.yaml"), "utf-8"),
    ) as Record<string, any>;
    benchmark.output_dir = "out";
    benchmark.trained_classes = [TRAINED];
    benchmark.gen.n_null_per_class = 0; // null control not needed here
    benchmark.scoring = {
      ...(benchmark.scoring ?? {}),
      external: [{ model_class: "tcn_snia_like",
                   predictions: "tcn_predictions.csv" }],
    };
    benchmark.tcn = {
      train_class: TRAINED,
      seed: 7,
    };
    const cfgPath = path.join(work, "benchmark.yaml");
    fs.writeFileSync(cfgPath, yaml.dump(benchmark));

    // parametric side, through the public CLI
    sentinel(["generate", "--config", cfgPath], work);
    sentinel(["fit-priors", "--config", cfgPath], work);
    sentinel(["score", "--config", cfgPath, "--model", "bazin"], work);

    // network side: train on the same training split, forecast the test set
    const code = await tcnRun(["run", "--config", cfgPath]);
    expect(code).toBe(0);
    expect(fs.existsSync(path.join(work, "tcn_predictions.csv"))).toBe(true);
    sentinel(["score", "--config", cfgPath, "--model", "external"], work);
    sentinel(["evaluate", "--config", cfgPath], work);

    const classOf = classOfTestCurves(path.join(work, "out", "test.csv"));
    const bazinScores = readScores(
      path.join(work, "out", "scores", "bazin", `scores_${TRAINED}.csv`));
    const tcnScores = readScores(
      path.join(work, "out", "scores", "external", "scores_tcn_snia_like.csv"));

    // measurement-scaled prediction errors on the unseen plateau class
    const muspeOf = (scores: Map<string, ScoreRow[]>, cls: string) => {
      const vals: number[] = [];
      for (const [tid, rows] of scores) {
        if (classOf.get(tid) === cls) vals.push(...rows.map((r) => r.muspe));
      }
      return vals;
    };
    const bazinPlateauRms = stdAboutMean(muspeOf(bazinScores, "plateau"));
    const tcnPlateauRms = stdAboutMean(muspeOf(tcnScores, "plateau"));
    expect(tcnPlateauRms).toBeLessThan(bazinPlateauRms);

    // and the flexibility costs detection power: mean AUC over the
    // anomaly classes is lower for the network
    const bazinAucs = perModelAucs(
      path.join(work, "out", "metrics", "bazin", "summary.csv"), TRAINED);
    const tcnAucs = perModelAucs(
      path.join(work, "out", "metrics", "external", "summary.csv"),
      "tcn_snia_like");
    const mean = (m: Map<string, number>) => {
      const vals = ANOMALY_CLASSES.map((c) => {
        expect(m.has(c)).toBe(true);
        return m.get(c)!;
      });
      return vals.reduce((a, b) => a + b, 0) / vals.length;
    };
    const bazinMean = mean(bazinAucs);
    const tcnMean = mean(tcnAucs);
    expect(tcnMean).toBeLessThan(bazinMean);

    console.log(`plateau MUSPE rms: bazin=${bazinPlateauRms.toFixed(2)} ` +
      `tcn=${tcnPlateauRms.toFixed(2)}`);
    console.log(`mean anomaly AUC: bazin=${bazinMean.toFixed(3)} ` +
      `tcn=${tcnMean.toFixed(3)}`);
  }, 900_000);
});
