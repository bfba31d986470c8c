"""Anomaly scores from prediction/observation mismatch.

Model-agnostic: anything with a ``predict(partial_curve, passband,
target_time) -> Prediction`` method and a ``model_class`` label can be
scored. Each scored step compares the forecast three days ahead against
the flux actually observed there:

* chi2   = (y - D)^2 / (sigma_y^2 + sigma_D^2)  (total-variance weighted)
* muspe  = (y - D) / sigma_D                    (measurement-scaled, signed)

The per-transient aggregate is the running mean of all per-passband chi2
values, so scores are comparable across curves with different observation
counts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .bazin import BandForecast, Prediction
from .lightcurve import PASSBANDS, LightCurve, Observation, PartialLightCurve, slice_until

SCORE_CSV_HEADER = ["transient_id", "model_class", "time", "passband",
                    "chi2", "muspe", "running_score"]
PREDICTION_CSV_HEADER = ["transient_id", "time", "passband", "y", "sigma_y"]


class ScoringError(Exception):
    pass


class TimeMismatchError(ScoringError):
    pass


class PassbandMismatchError(ScoringError):
    pass


class PredictorError(ScoringError):
    """A model failed to produce a prediction for one step."""


class Predictor(Protocol):
    model_class: str

    def predict(self, plc: PartialLightCurve, passband: str,
                target_time: float) -> Prediction: ...


def chi2_step(pred: Prediction, obs: Observation, match_window: float = 0.5) -> float:
    """Squared prediction error weighted by predictive plus measurement variance."""
    if obs.passband not in pred.bands:
        raise PassbandMismatchError(
            f"prediction has bands {sorted(pred.bands)}, observation is {obs.passband}")
    if abs(obs.time - pred.target_time) > match_window:
        raise TimeMismatchError(
            f"observation at {obs.time} vs prediction target {pred.target_time}")
    b = pred.bands[obs.passband]
    return float((b.y - obs.flux) ** 2 / (b.sigma_y**2 + obs.flux_err**2))


def muspe_step(pred: Prediction, obs: Observation, match_window: float = 0.5) -> float:
    """Signed prediction error in units of the measurement uncertainty only."""
    if obs.passband not in pred.bands:
        raise PassbandMismatchError(
            f"prediction has bands {sorted(pred.bands)}, observation is {obs.passband}")
    if abs(obs.time - pred.target_time) > match_window:
        raise TimeMismatchError(
            f"observation at {obs.time} vs prediction target {pred.target_time}")
    b = pred.bands[obs.passband]
    return float((b.y - obs.flux) / obs.flux_err)


@dataclass(frozen=True)
class ScoredStep:
    """One scored (epoch, passband): forecast vs the observation made there."""

    time: float
    passband: str
    chi2: float
    muspe: float
    prediction: Prediction | None = None
    observed: Observation | None = None

    def __post_init__(self):
        if self.chi2 < 0 or not np.isfinite(self.chi2) or not np.isfinite(self.muspe):
            raise ScoringError(f"bad step values chi2={self.chi2} muspe={self.muspe}")


@dataclass(frozen=True)
class AnomalyScoreSeries:
    """All scored steps of one transient under one trained class model.

    Steps are ordered by (time, passband); running_score[i] is the mean of
    chi2 over steps[0..i] and final_score is its last entry.
    """

    transient_id: str
    model_class: str
    steps: tuple[ScoredStep, ...]
    failures: tuple[str, ...] = ()
    running_score: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        steps = tuple(sorted(self.steps, key=lambda s: (s.time, s.passband)))
        object.__setattr__(self, "steps", steps)
        chi2 = np.array([s.chi2 for s in steps], dtype=float)
        running = (np.cumsum(chi2) / np.arange(1, chi2.size + 1)
                   if chi2.size else np.empty(0))
        object.__setattr__(self, "running_score", running)

    @property
    def final_score(self) -> float:
        return float(self.running_score[-1]) if self.steps else float("nan")

    def running_score_at(self, t: float) -> float:
        """Running score at the last step with time <= t (nan if none)."""
        idx = [i for i, s in enumerate(self.steps) if s.time <= t]
        return float(self.running_score[idx[-1]]) if idx else float("nan")

    def muspe_values(self, passband: str | None = None,
                     time_range: tuple[float, float] | None = None) -> np.ndarray:
        vals = [s.muspe for s in self.steps
                if (passband is None or s.passband == passband)
                and (time_range is None or time_range[0] <= s.time < time_range[1])]
        return np.array(vals, dtype=float)


def score_lightcurve(lc: LightCurve, model: Predictor, horizon_days: float = 3.0,
                     match_window: float = 0.5) -> AnomalyScoreSeries:
    """Walk the horizon over a light curve and score 3-day-ahead forecasts.

    For each observation time T (in order) and each passband, the earliest
    not-yet-scored epoch of that passband inside
    [T + horizon - match_window, T + horizon + match_window] is forecast
    from the data at times <= T and scored against the flux observed there.
    Forecasts therefore only ever see data from the past; each (epoch,
    passband) is scored once, from the earliest anchor that can reach it.
    A model failure at a step skips that step and records the failure.
    """
    band_times = {b: lc.band_arrays(b)[0] for b in PASSBANDS}
    band_obs = {b: [o for o in lc.observations if o.passband == b] for b in PASSBANDS}
    anchors = sorted({o.time for o in lc.observations})
    steps: list[ScoredStep] = []
    failures: list[str] = []
    scored: set[tuple[str, float]] = set()
    for T in anchors:
        plc = None
        for band in PASSBANDS:
            times = band_times[band]
            lo, hi = T + horizon_days - match_window, T + horizon_days + match_window
            idx = np.searchsorted(times, lo)
            if idx >= times.size or times[idx] > hi:
                continue
            obs = band_obs[band][idx]
            if (band, obs.time) in scored:
                continue
            scored.add((band, obs.time))
            if plc is None:
                plc = slice_until(lc, T)
            try:
                pred = model.predict(plc, band, obs.time)
                step = ScoredStep(time=obs.time, passband=band,
                                  chi2=chi2_step(pred, obs, match_window),
                                  muspe=muspe_step(pred, obs, match_window),
                                  prediction=pred, observed=obs)
            except ScoringError as err:
                failures.append(f"t={T:g}/{band}: {err}")
                continue
            steps.append(step)
    return AnomalyScoreSeries(transient_id=lc.transient_id,
                              model_class=model.model_class,
                              steps=tuple(steps), failures=tuple(failures))


# ---------------------------------------------------------------------------
# reference predictors
# ---------------------------------------------------------------------------

class OraclePredictor:
    """Predicts every future observation exactly (testing aid)."""

    def __init__(self, lc: LightCurve, model_class: str = "oracle"):
        self._obs = {(o.passband, o.time): o for o in lc.observations}
        self.model_class = model_class

    def predict(self, plc, passband, target_time):
        obs = self._obs.get((passband, target_time))
        if obs is None:
            raise PredictorError(f"no observation at {passband}@{target_time}")
        return Prediction(target_time=target_time, bands={
            passband: BandForecast(y=obs.flux, sigma_y=obs.flux_err, n_samples_used=1)})


class ConstantPredictor:
    """Always predicts the same flux and uncertainty (gross-misfit baseline)."""

    def __init__(self, y: float = 0.0, sigma_y: float = 1.0,
                 model_class: str = "constant"):
        self.y = y
        self.sigma_y = sigma_y
        self.model_class = model_class

    def predict(self, plc, passband, target_time):
        return Prediction(target_time=target_time, bands={
            passband: BandForecast(y=self.y, sigma_y=self.sigma_y, n_samples_used=1)})


class ExternalPredictor:
    """Serves predictions from a shared-schema prediction table.

    Rows are matched by (transient_id, passband) and nearest time within
    the match window; a missing row raises PredictorError so the scorer
    records a skipped step.
    """

    def __init__(self, rows: Sequence[tuple[str, float, str, float, float]],
                 model_class: str, match_window: float = 0.5):
        self.model_class = model_class
        self.match_window = match_window
        table: dict[tuple[str, str], list[tuple[float, float, float]]] = {}
        for tid, time, band, y, sigma_y in rows:
            table.setdefault((tid, band), []).append((time, y, sigma_y))
        self._table = {k: sorted(v) for k, v in table.items()}

    def predict(self, plc, passband, target_time):
        entries = self._table.get((plc.transient_id, passband), [])
        best = None
        for time, y, sigma_y in entries:
            d = abs(time - target_time)
            if d <= self.match_window and (best is None or d < best[0]):
                best = (d, time, y, sigma_y)
        if best is None:
            raise PredictorError(
                f"no prediction for {plc.transient_id}/{passband} near {target_time}")
        _, time, y, sigma_y = best
        return Prediction(target_time=time, bands={
            passband: BandForecast(y=y, sigma_y=sigma_y, n_samples_used=0)})


# ---------------------------------------------------------------------------
# shared CSV schemas
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_score_csv(series_list: Iterable[AnomalyScoreSeries], path: str | Path) -> None:
    """Write score series in the shared schema, sorted by transient then time."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_CSV_HEADER)
        for series in sorted(series_list, key=lambda s: s.transient_id):
            for step, rs in zip(series.steps, series.running_score):
                w.writerow([series.transient_id, series.model_class, _fmt(step.time),
                            step.passband, _fmt(step.chi2), _fmt(step.muspe), _fmt(rs)])


def read_score_csv(path: str | Path) -> list[AnomalyScoreSeries]:
    """Rebuild score series (without prediction objects) from the shared schema."""
    groups: dict[tuple[str, str], list[ScoredStep]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SCORE_CSV_HEADER:
            raise ScoringError(f"{path}: bad score header {header}")
        for row in reader:
            if not row:
                continue
            tid, model_class = row[0], row[1]
            groups.setdefault((tid, model_class), []).append(
                ScoredStep(time=float(row[2]), passband=row[3],
                           chi2=float(row[4]), muspe=float(row[5])))
    return [AnomalyScoreSeries(transient_id=tid, model_class=mc, steps=tuple(steps))
            for (tid, mc), steps in sorted(groups.items())]


def write_prediction_csv(rows: Iterable[tuple[str, float, str, float, float]],
                         path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_CSV_HEADER)
        for tid, time, band, y, sigma_y in rows:
            w.writerow([tid, _fmt(time), band, _fmt(y), _fmt(sigma_y)])


def read_prediction_csv(path: str | Path) -> list[tuple[str, float, str, float, float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != PREDICTION_CSV_HEADER:
            raise ScoringError(f"{path}: bad prediction header {header}")
        for row in reader:
            if not row:
                continue
            rows.append((row[0], float(row[1]), row[2], float(row[3]), float(row[4])))
    return rows
