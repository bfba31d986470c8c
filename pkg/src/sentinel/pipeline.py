"""Pipeline stages: generate -> fit-priors -> score -> evaluate.

Each stage reads and writes files under the config's output directory, so
stages can be re-run independently and an external model can inject
predictions at the score stage through the shared prediction schema. All
outputs are written atomically (temp file + rename) and all iteration
orders are sorted, so identical configs produce byte-identical files.
"""

from __future__ import annotations

import csv
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics
from .anomaly import (AnomalyScoreSeries, ExternalPredictor, read_prediction_csv,
                      read_score_csv)
from .bazin import BazinPredictor, ClassPrior, build_class_prior
from .config import PipelineConfig
from .lightcurve import Dataset, LightCurve, load_dataset, save_dataset
from .metrics import roc_curve
from .synthgen import generate_null_population, generate_population

logger = logging.getLogger(__name__)

AGGREGATED = "aggregated"
NULL_CONTROL = "__null_control__"


class PipelineError(Exception):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def _atomic_write(path: Path, write_fn) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def split_dataset(ds: Dataset, train_fraction: float, seed: int,
                  ) -> tuple[Dataset, Dataset]:
    """Per-class seeded split; the first floor(frac * n) shuffled curves train."""
    train: list[LightCurve] = []
    test: list[LightCurve] = []
    for ci, label in enumerate(sorted(ds.class_labels)):
        curves = sorted(ds.by_class(label), key=lambda c: c.transient_id)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 21, ci]))
        order = rng.permutation(len(curves))
        n_train = int(len(curves) * train_fraction + 1e-9)
        for rank, idx in enumerate(order):
            (train if rank < n_train else test).append(curves[idx])
    return Dataset(tuple(train)), Dataset(tuple(test))


def run_generate(cfg: PipelineConfig) -> tuple[int, int]:
    """Generate the labeled population and write the train/test split.

    When the config asks for a null-control set, an extra batch of
    held-out curves from the trained classes goes to null.csv.
    """
    ds = generate_population(cfg.gen)
    train, test = split_dataset(ds, cfg.train_fraction, cfg.seed)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    save_dataset(train, cfg.train_csv)
    save_dataset(test, cfg.test_csv)
    if cfg.gen.n_null_per_class > 0:
        null = generate_null_population(cfg.gen, cfg.trained_classes)
        save_dataset(null, cfg.null_csv)
        logger.info("wrote %s (%d held-out null-control curves)",
                    cfg.null_csv, null.n_s)
    logger.info("generated %d curves: %d train / %d test across %d classes",
                ds.n_s, train.n_s, test.n_s, len(ds.class_labels))
    return train.n_s, test.n_s


# ---------------------------------------------------------------------------
# fit-priors
# ---------------------------------------------------------------------------

def run_fit_priors(cfg: PipelineConfig) -> dict[str, ClassPrior]:
    """Build and persist one population prior per trained class."""
    if not cfg.train_csv.exists():
        raise FileNotFoundError(f"{cfg.train_csv}: run `sentinel generate` first")
    train = load_dataset(cfg.train_csv)
    priors = {}
    for name in sorted(cfg.trained_classes):
        prior = build_class_prior(train, name, seed=cfg.seed)
        path = cfg.prior_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        prior.to_json(path)
        logger.info("wrote %s (fit failure rate %.1f%%)", path,
                    100 * prior.fit_failure_rate)
        priors[name] = prior
    return priors


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

def _score_one(task) -> tuple[str, str, str, AnomalyScoreSeries | None, str]:
    """Worker: score one (trained class, transient) pair.

    Returns (batch tag, model_class, transient_id, series or None, error).
    Errors are captured, not raised, so a bad curve cannot kill the run.
    """
    tag, prior, lc, sampler_cfg, entropy, horizon, window, min_obs = task
    predictor = BazinPredictor(prior, sampler_cfg, entropy=entropy,
                               min_fit_obs=min_obs)
    from .anomaly import score_lightcurve
    try:
        series = score_lightcurve(lc, predictor, horizon_days=horizon,
                                  match_window=window)
        return tag, prior.class_name, lc.transient_id, series, ""
    except Exception as err:  # per-curve isolation
        return (tag, prior.class_name, lc.transient_id, None,
                f"{type(err).__name__}: {err}")


def run_score(cfg: PipelineConfig, model: str = "bazin", jobs: int = 1) -> float:
    """Score every (trained class, test transient) pair; returns failure rate."""
    if not cfg.test_csv.exists():
        raise FileNotFoundError(f"{cfg.test_csv}: run `sentinel generate` first")
    test = load_dataset(cfg.test_csv)
    curves = list(test.light_curves)  # already sorted by transient_id
    failures: list[tuple[str, str, str, str]] = []
    out_dir = cfg.scores_dir(model)
    if model == "bazin":
        priors = {}
        for name in sorted(cfg.trained_classes):
            path = cfg.prior_path(name)
            if not path.exists():
                raise FileNotFoundError(f"{path}: run `sentinel fit-priors` first")
            priors[name] = ClassPrior.from_json(path)
        tasks = []
        for ci, name in enumerate(sorted(cfg.trained_classes)):
            for ti, lc in enumerate(curves):
                tasks.append(("main", priors[name], lc, cfg.sampler,
                              (cfg.seed, 31, ci, ti),
                              cfg.scoring.horizon_days, cfg.scoring.match_window_days,
                              cfg.scoring.min_fit_observations))
        if cfg.null_csv.exists():
            # null-control curves are scored against their own class only
            null_ds = load_dataset(cfg.null_csv)
            for ci, name in enumerate(sorted(cfg.trained_classes)):
                for ni, lc in enumerate(null_ds.by_class(name)):
                    tasks.append(("null", priors[name], lc, cfg.sampler,
                                  (cfg.seed, 37, ci, ni),
                                  cfg.scoring.horizon_days,
                                  cfg.scoring.match_window_days,
                                  cfg.scoring.min_fit_observations))
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_score_one, tasks, chunksize=4))
        else:
            results = [_score_one(t) for t in tasks]
        by_model: dict[str, list[AnomalyScoreSeries]] = {}
        null_by_model: dict[str, list[AnomalyScoreSeries]] = {}
        n_failed = 0
        for tag, model_class, tid, series, err in results:
            if series is None or not series.steps:
                n_failed += 1
                failures.append((tid, model_class, "curve",
                                 err or "no scorable steps"))
            else:
                target = by_model if tag == "main" else null_by_model
                target.setdefault(model_class, []).append(series)
            if series is not None:
                for f in series.failures:
                    failures.append((tid, model_class, "step", f))
        total = len(tasks)
        for model_class in sorted(null_by_model):
            path = out_dir / f"null_scores_{model_class}.csv"
            _atomic_write(path, lambda fh, s=null_by_model[model_class]:
                          _write_scores(fh, s))
    elif model == "external":
        if not cfg.scoring.external:
            raise FileNotFoundError(
                "no scoring.external entries in the config; nothing to score")
        from .anomaly import score_lightcurve
        by_model = {}
        n_failed = total = 0
        for spec in cfg.scoring.external:
            if not spec.predictions_path.exists():
                raise FileNotFoundError(f"{spec.predictions_path}: prediction file missing")
            rows = read_prediction_csv(spec.predictions_path)
            predictor = ExternalPredictor(rows, spec.model_class,
                                          cfg.scoring.match_window_days)
            for lc in curves:
                total += 1
                try:
                    series = score_lightcurve(lc, predictor,
                                              horizon_days=cfg.scoring.horizon_days,
                                              match_window=cfg.scoring.match_window_days)
                    for f in series.failures:
                        failures.append((lc.transient_id, spec.model_class, "step", f))
                    if series.steps:
                        by_model.setdefault(spec.model_class, []).append(series)
                    else:
                        n_failed += 1
                        failures.append((lc.transient_id, spec.model_class,
                                         "curve", "no scorable steps"))
                except Exception as err:
                    n_failed += 1
                    failures.append((lc.transient_id, spec.model_class, "curve",
                                     f"{type(err).__name__}: {err}"))
    else:
        raise ValueError(f"unknown model {model!r}; expected 'bazin' or 'external'")

    for model_class in sorted(by_model):
        path = out_dir / f"scores_{model_class}.csv"
        _atomic_write(path, lambda fh, s=by_model[model_class]: _write_scores(fh, s))
        logger.info("wrote %s (%d series)", path, len(by_model[model_class]))
    _atomic_write(out_dir / "failures.csv", lambda fh: _write_failures(fh, failures))
    rate = n_failed / total if total else 0.0
    if n_failed:
        logger.warning("%d/%d curve scorings failed", n_failed, total)
    return rate


def _write_scores(fh, series_list):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["transient_id", "model_class", "time", "passband",
                "chi2", "muspe", "running_score"])
    for series in sorted(series_list, key=lambda s: s.transient_id):
        for step, rs in zip(series.steps, series.running_score):
            w.writerow([series.transient_id, series.model_class, _fmt(step.time),
                        step.passband, _fmt(step.chi2), _fmt(step.muspe), _fmt(rs)])


def _write_failures(fh, failures):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["transient_id", "model_class", "kind", "message"])
    for row in sorted(failures):
        w.writerow(row)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _aggregate_running(series_by_model: dict[str, dict[str, AnomalyScoreSeries]],
                       tid: str, t: float | None) -> float:
    """Min over trained models of one transient's running score (nan if none)."""
    vals = []
    for per_tid in series_by_model.values():
        s = per_tid.get(tid)
        if s is None or not s.steps:
            continue
        v = s.final_score if t is None else s.running_score_at(t)
        if np.isfinite(v):
            vals.append(v)
    return min(vals) if vals else float("nan")


def evaluate_scores(cfg: PipelineConfig, model: str) -> dict:
    """Compute all metric tables for one model's score files."""
    score_dir = cfg.scores_dir(model)
    files = sorted(score_dir.glob("scores_*.csv"))
    if not files:
        raise FileNotFoundError(f"no score files under {score_dir}")
    test = load_dataset(cfg.test_csv)
    class_of = {lc.transient_id: lc.class_label for lc in test.light_curves}
    series_by_model: dict[str, dict[str, AnomalyScoreSeries]] = {}
    for path in files:
        for s in read_score_csv(path):
            series_by_model.setdefault(s.model_class, {})[s.transient_id] = s

    test_classes = sorted({c for c in class_of.values()})
    normal_classes = [c for c in test_classes if c in cfg.trained_classes]
    anomaly_classes = [c for c in test_classes if c not in cfg.trained_classes]
    tids_by_class = {c: sorted(t for t, cl in class_of.items() if cl == c)
                     for c in test_classes}

    agg_final = {tid: _aggregate_running(series_by_model, tid, None)
                 for tid in class_of}
    normal_finals = [agg_final[t] for c in normal_classes for t in tids_by_class[c]
                     if np.isfinite(agg_final[t])]

    result = {"model": model, "anomaly_auc": {}, "roc": {}, "auc_time": {},
              "score_hist": {}, "muspe": {}, "null_auc": None,
              "per_model_auc": {}, "notice": ""}
    if not anomaly_classes:
        result["notice"] = "no anomaly classes: every test class is a trained class"

    grid = cfg.evaluation.grid()
    for ac in anomaly_classes:
        anom_finals = [agg_final[t] for t in tids_by_class[ac]
                       if np.isfinite(agg_final[t])]
        if not normal_finals or not anom_finals:
            continue
        roc = roc_curve(normal_finals, anom_finals)
        result["anomaly_auc"][ac] = roc.auc
        result["roc"][ac] = roc
        aucs, n_n, n_a = [], [], []
        for t in grid:
            nv = [v for c in normal_classes for tid in tids_by_class[c]
                  if np.isfinite(v := _aggregate_running(series_by_model, tid, t))]
            av = [v for tid in tids_by_class[ac]
                  if np.isfinite(v := _aggregate_running(series_by_model, tid, t))]
            n_n.append(len(nv))
            n_a.append(len(av))
            aucs.append(roc_curve(nv, av).auc if nv and av else float("nan"))
        result["auc_time"][ac] = (grid, np.array(aucs), np.array(n_n), np.array(n_a))

    for mc in sorted(series_by_model):
        per_tid = series_by_model[mc]
        normals = [per_tid[t].final_score for c in normal_classes
                   for t in tids_by_class[c] if t in per_tid and per_tid[t].steps]
        for ac in anomaly_classes:
            anoms = [per_tid[t].final_score for t in tids_by_class[ac]
                     if t in per_tid and per_tid[t].steps]
            if normals and anoms:
                result["per_model_auc"][(mc, ac)] = roc_curve(normals, anoms).auc

    for tc in test_classes:
        finals = [agg_final[t] for t in tids_by_class[tc] if np.isfinite(agg_final[t])]
        if finals:
            result["score_hist"][tc] = metrics.summarize_values(finals, tc)

    for mc in sorted(series_by_model):
        per_tid = series_by_model[mc]
        for tc in test_classes:
            group = [per_tid[t] for t in tids_by_class[tc] if t in per_tid]
            group = [s for s in group if s.steps]
            if group:
                result["muspe"][(mc, tc)] = metrics.muspe_histograms(
                    group, cfg.evaluation.muspe_time_slices)

    own_finals = []
    for c in normal_classes:
        if c in series_by_model:
            per_tid = series_by_model[c]
            own_finals.extend((c, t, per_tid[t].final_score)
                              for t in tids_by_class[c]
                              if t in per_tid and per_tid[t].steps)
    null_files = sorted(score_dir.glob("null_scores_*.csv"))
    if null_files and own_finals:
        # dedicated held-out same-class population vs the test curves
        null_finals = [s.final_score for path in null_files
                       for s in read_score_csv(path) if s.steps]
        result["null_auc"] = roc_curve([v for _, _, v in own_finals],
                                       null_finals).auc
    elif len(own_finals) >= 4:
        # no dedicated null set: split the own-class test scores in two
        own_finals.sort()
        evens = [v for i, (_, _, v) in enumerate(own_finals) if i % 2 == 0]
        odds = [v for i, (_, _, v) in enumerate(own_finals) if i % 2 == 1]
        result["null_auc"] = roc_curve(evens, odds).auc
    return result


def run_evaluate(cfg: PipelineConfig, models: Sequence[str] | None = None) -> dict:
    """Evaluate every scored model and write the metric tables."""
    scores_root = cfg.output_dir / "scores"
    if models is None:
        models = sorted(p.name for p in scores_root.iterdir() if p.is_dir()) \
            if scores_root.exists() else []
    if not models:
        raise FileNotFoundError(f"no score directories under {scores_root}")
    summaries = {}
    for model in models:
        res = evaluate_scores(cfg, model)
        mdir = cfg.metrics_dir(model)
        _atomic_write(mdir / "roc.csv", lambda fh: _write_roc(fh, res))
        _atomic_write(mdir / "auc_vs_time.csv", lambda fh: _write_auc_time(fh, res))
        _atomic_write(mdir / "score_hist.csv", lambda fh: _write_score_hist(fh, res))
        _atomic_write(mdir / "muspe_hist.csv", lambda fh: _write_muspe_hist(fh, res))
        _atomic_write(mdir / "summary.csv", lambda fh: _write_summary(fh, res))
        if res["notice"]:
            logger.warning("%s: %s", model, res["notice"])
        for ac, auc in sorted(res["anomaly_auc"].items()):
            logger.info("%s: %s AUC = %.3f", model, ac, auc)
        summaries[model] = res
    return summaries


def _write_roc(fh, res):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["anomaly_class", "threshold", "false_anomaly_rate",
                "true_anomaly_rate", "auc"])
    for ac in sorted(res["roc"]):
        roc = res["roc"][ac]
        for th, fr, tr in zip(roc.thresholds, roc.false_anomaly_rate,
                              roc.true_anomaly_rate):
            w.writerow([ac, _fmt(th), _fmt(fr), _fmt(tr), _fmt(roc.auc)])


def _write_auc_time(fh, res):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["anomaly_class", "time", "auc", "n_normal", "n_anomaly"])
    for ac in sorted(res["auc_time"]):
        grid, aucs, n_n, n_a = res["auc_time"][ac]
        for t, a, nn, na in zip(grid, aucs, n_n, n_a):
            w.writerow([ac, _fmt(t), _fmt(a) if np.isfinite(a) else "", nn, na])


def _write_score_hist(fh, res):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["test_class", "bin_left", "bin_right", "count", "mean", "rms",
                "n_values"])
    for tc in sorted(res["score_hist"]):
        h = res["score_hist"][tc]
        for left, right, c in zip(h.bin_edges[:-1], h.bin_edges[1:], h.counts):
            w.writerow([tc, _fmt(left), _fmt(right), int(c), _fmt(h.mean),
                        _fmt(h.rms), h.n_values])


def _write_muspe_hist(fh, res):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["model_class", "test_class", "passband", "time_slice", "bin_left",
                "bin_right", "count", "mean", "rms", "n_values"])
    for (mc, tc) in sorted(res["muspe"]):
        for h in res["muspe"][(mc, tc)]:
            slice_label, band = h.label.split("|")
            for left, right, c in zip(h.bin_edges[:-1], h.bin_edges[1:], h.counts):
                w.writerow([mc, tc, band, slice_label, _fmt(left), _fmt(right),
                            int(c), _fmt(h.mean), _fmt(h.rms), h.n_values])


def _write_summary(fh, res):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["model_class", "anomaly_class", "auc"])
    for ac in sorted(res["anomaly_auc"]):
        w.writerow([AGGREGATED, ac, _fmt(res["anomaly_auc"][ac])])
    for (mc, ac) in sorted(res["per_model_auc"]):
        w.writerow([mc, ac, _fmt(res["per_model_auc"][(mc, ac)])])
    if res["null_auc"] is not None:
        w.writerow([AGGREGATED, NULL_CONTROL, _fmt(res["null_auc"])])
    if res["notice"]:
        w.writerow(["notice", res["notice"], ""])
