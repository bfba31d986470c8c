"""Detection-quality metrics: ROC curves, AUC over time, score histograms.

Anomalies are the positive class: the true-anomaly rate is the fraction of
anomalous transients flagged at a score threshold, the false-anomaly rate
the fraction of normal transients flagged. AUC is computed from integer
flag counts so it equals the pairwise Mann-Whitney statistic exactly,
including ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .anomaly import AnomalyScoreSeries
from .lightcurve import PASSBANDS


class EmptyInputError(Exception):
    pass


@dataclass(frozen=True)
class ROCResult:
    """ROC curve over descending thresholds, anomaly = positive class."""

    thresholds: np.ndarray
    true_anomaly_rate: np.ndarray
    false_anomaly_rate: np.ndarray
    auc: float


def roc_curve(normal_scores: Sequence[float], anomaly_scores: Sequence[float]) -> ROCResult:
    """Sweep thresholds over the union of scores; flag score >= threshold.

    The returned curve starts at (0, 0) (threshold above every score) and
    ends at (1, 1). The AUC numerator is accumulated in exact integer
    arithmetic, so equal scores in both populations contribute exactly
    half a pair each.
    """
    normal = np.asarray(list(normal_scores), dtype=float)
    anomaly = np.asarray(list(anomaly_scores), dtype=float)
    if normal.size == 0 or anomaly.size == 0:
        raise EmptyInputError("both score populations must be non-empty")
    thresholds = np.unique(np.concatenate([normal, anomaly]))[::-1]
    normal_sorted = np.sort(normal)
    anomaly_sorted = np.sort(anomaly)
    n_n, n_a = normal.size, anomaly.size
    # counts of scores >= threshold
    fp = n_n - np.searchsorted(normal_sorted, thresholds, side="left")
    tp = n_a - np.searchsorted(anomaly_sorted, thresholds, side="left")
    fp = np.concatenate([[0], fp])
    tp = np.concatenate([[0], tp])
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    auc = twice_area / (2 * n_n * n_a)
    return ROCResult(
        thresholds=np.concatenate([[np.inf], thresholds]),
        true_anomaly_rate=tp / n_a,
        false_anomaly_rate=fp / n_n,
        auc=auc,
    )


@dataclass(frozen=True)
class AUCTimeSeries:
    """AUC of running scores truncated at each grid time.

    Entries are nan where either population has no scored step yet; counts
    record how many transients entered each cell.
    """

    times: np.ndarray
    auc_at_time: np.ndarray
    anomaly_class: str
    n_normal: np.ndarray
    n_anomaly: np.ndarray


def auc_over_time(series_normal: Sequence[AnomalyScoreSeries],
                  series_anom: Sequence[AnomalyScoreSeries],
                  grid: Sequence[float],
                  anomaly_class: str = "") -> AUCTimeSeries:
    """AUC as light curves evolve: truncate every running score at each grid time."""
    if not series_normal or not series_anom:
        raise EmptyInputError("need at least one series per population")
    classes = {s.model_class for s in series_normal} | {s.model_class for s in series_anom}
    if len(classes) > 1:
        raise ValueError(f"series scored by different models: {sorted(classes)}")
    grid = np.asarray(list(grid), dtype=float)
    aucs = np.full(grid.size, np.nan)
    n_n = np.zeros(grid.size, dtype=int)
    n_a = np.zeros(grid.size, dtype=int)
    for i, t in enumerate(grid):
        normal = [v for s in series_normal if np.isfinite(v := s.running_score_at(t))]
        anom = [v for s in series_anom if np.isfinite(v := s.running_score_at(t))]
        n_n[i], n_a[i] = len(normal), len(anom)
        if normal and anom:
            aucs[i] = roc_curve(normal, anom).auc
    return AUCTimeSeries(times=grid, auc_at_time=aucs, anomaly_class=anomaly_class,
                         n_normal=n_n, n_anomaly=n_a)


@dataclass(frozen=True)
class HistogramSummary:
    """Histogram with mean and rms computed from the raw values, not the bins.

    rms is the root-mean-square spread about the mean (zero for constant
    values).
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    rms: float
    label: str = ""
    n_values: int = 0


def summarize_values(values: np.ndarray, label: str) -> HistogramSummary:
    """Freedman-Diaconis histogram plus raw-value mean and rms."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInputError("no values to summarize")
    return _summarize(values, label)


def _summarize(values: np.ndarray, label: str) -> HistogramSummary:
    edges = np.histogram_bin_edges(values, bins="fd")
    counts, _ = np.histogram(values, bins=edges)
    return HistogramSummary(bin_edges=edges, counts=counts,
                            mean=float(values.mean()),
                            rms=float(values.std(ddof=0)),
                            label=label, n_values=values.size)


def score_distribution(series_list: Sequence[AnomalyScoreSeries],
                       label: str = "final") -> HistogramSummary:
    """Distribution of per-transient final scores."""
    if not series_list:
        raise EmptyInputError("no series")
    finals = np.array([s.final_score for s in series_list if s.steps], dtype=float)
    if finals.size == 0:
        raise EmptyInputError("no scored steps in any series")
    return _summarize(finals, label)


def muspe_histograms(series_list: Sequence[AnomalyScoreSeries],
                     time_slices: Sequence[tuple[float, float]],
                     ) -> list[HistogramSummary]:
    """Per-(slice, passband) histograms of step errors plus an all-times one.

    Slices are half-open [lo, hi) day ranges and must not overlap. Labels
    are "<lo>..<hi>|<band>" and "all|<band>".
    """
    if not series_list:
        raise EmptyInputError("no series")
    slices = sorted((float(lo), float(hi)) for lo, hi in time_slices)
    for (lo1, hi1), (lo2, hi2) in zip(slices, slices[1:]):
        if hi1 > lo2:
            raise ValueError(f"overlapping slices [{lo1},{hi1}) and [{lo2},{hi2})")
    out = []
    for band in PASSBANDS:
        for lo, hi in slices:
            vals = np.concatenate([s.muspe_values(band, (lo, hi)) for s in series_list])
            if vals.size:
                out.append(_summarize(vals, f"{lo:g}..{hi:g}|{band}"))
        all_vals = np.concatenate([s.muspe_values(band) for s in series_list])
        if all_vals.size:
            out.append(_summarize(all_vals, f"all|{band}"))
    if not out:
        raise EmptyInputError("no scored steps in any series")
    return out
