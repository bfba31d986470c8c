"""Light curve containers, validation, slicing, and CSV/JSON serialization.

A light curve is a time series of flux measurements with per-point
uncertainties, observed in the g and r passbands. Times are stored in days
relative to the trigger (first detection), restricted to the modeled window
of [-70, +80] days. Flux is in arbitrary linear units.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PASSBANDS = ("g", "r")
TIME_MIN = -70.0
TIME_MAX = 80.0

CSV_HEADER = ["transient_id", "class_label", "time", "passband", "flux", "flux_err"]


class LightCurveError(Exception):
    """Base class for light curve validation and IO errors."""


class MissingColumnError(LightCurveError):
    pass


class NonPositiveFluxError(LightCurveError):
    """flux_err must be strictly positive."""


class UnknownPassbandError(LightCurveError):
    pass


class DuplicateObservationError(LightCurveError):
    """Two observations share the same (time, passband)."""


class TimeWindowError(LightCurveError):
    """Observation time outside the modeled window."""


class HorizonOutOfRangeError(LightCurveError):
    pass


class UnsortedInputWarning(UserWarning):
    """Observations arrived unsorted and were sorted automatically."""


@dataclass(frozen=True, order=True)
class Observation:
    """One flux measurement: (time, passband, flux, flux_err).

    `time` is in days relative to trigger, `flux_err` is the 1-sigma
    measurement uncertainty in the same linear units as `flux`.
    """

    time: float
    passband: str
    flux: float
    flux_err: float

    def __post_init__(self):
        if self.passband not in PASSBANDS:
            raise UnknownPassbandError(
                f"passband {self.passband!r} not one of {PASSBANDS}"
            )
        if not np.isfinite([self.time, self.flux, self.flux_err]).all():
            raise LightCurveError(f"non-finite observation: {self}")
        if self.flux_err <= 0:
            raise NonPositiveFluxError(
                f"flux_err must be > 0, got {self.flux_err} at time {self.time}"
            )
        if not (TIME_MIN <= self.time <= TIME_MAX):
            raise TimeWindowError(
                f"time {self.time} outside [{TIME_MIN}, {TIME_MAX}]"
            )


def _sorted_observations(observations: Iterable[Observation]) -> tuple[Observation, ...]:
    obs = tuple(observations)
    key = lambda o: (o.time, o.passband)
    if any(key(a) > key(b) for a, b in zip(obs, obs[1:])):
        warnings.warn("observations were unsorted; sorting by (time, passband)",
                      UnsortedInputWarning, stacklevel=3)
        obs = tuple(sorted(obs, key=key))
    seen = set()
    for o in obs:
        k = (o.time, o.passband)
        if k in seen:
            raise DuplicateObservationError(f"duplicate observation at {k}")
        seen.add(k)
    return obs


@dataclass(frozen=True)
class LightCurve:
    """A full multi-passband light curve for one transient.

    Observations are kept strictly sorted by (time, passband). Every
    passband must appear at least once and at least one observation must
    lie at time >= 0 (the trigger). Instances are immutable and safe to
    share across threads.
    """

    transient_id: str
    class_label: str
    observations: tuple[Observation, ...]
    trigger_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "observations", _sorted_observations(self.observations))
        if not self.observations:
            raise LightCurveError(f"{self.transient_id}: empty light curve")
        bands = {o.passband for o in self.observations}
        missing = set(PASSBANDS) - bands
        if missing:
            raise LightCurveError(
                f"{self.transient_id}: passband(s) {sorted(missing)} never observed"
            )
        if not any(o.time >= 0 for o in self.observations):
            raise LightCurveError(f"{self.transient_id}: no observation at time >= 0")

    def band_arrays(self, passband: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (times, fluxes, flux_errs) arrays for one passband."""
        sel = [o for o in self.observations if o.passband == passband]
        t = np.array([o.time for o in sel], dtype=float)
        f = np.array([o.flux for o in sel], dtype=float)
        e = np.array([o.flux_err for o in sel], dtype=float)
        return t, f, e

    @property
    def times(self) -> np.ndarray:
        return np.array([o.time for o in self.observations], dtype=float)


@dataclass(frozen=True)
class PartialLightCurve:
    """The observations of a light curve up to a horizon time T.

    Contains exactly the source observations with time <= T; the source
    light curve is never modified. Unlike LightCurve, a partial curve may
    be empty or single-band (early horizons see little data).
    """

    source: LightCurve
    horizon: float
    observations: tuple[Observation, ...] = field(default=())

    def __post_init__(self):
        if not (TIME_MIN <= self.horizon <= TIME_MAX):
            raise HorizonOutOfRangeError(
                f"horizon {self.horizon} outside [{TIME_MIN}, {TIME_MAX}]"
            )

    @property
    def transient_id(self) -> str:
        return self.source.transient_id

    def n_in_band(self, passband: str) -> int:
        return sum(1 for o in self.observations if o.passband == passband)

    def band_arrays(self, passband: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        sel = [o for o in self.observations if o.passband == passband]
        t = np.array([o.time for o in sel], dtype=float)
        f = np.array([o.flux for o in sel], dtype=float)
        e = np.array([o.flux_err for o in sel], dtype=float)
        return t, f, e


def slice_until(lc: LightCurve, T: float) -> PartialLightCurve:
    """Restrict a light curve to observations with time <= T (inclusive)."""
    if not (TIME_MIN <= T <= TIME_MAX):
        raise HorizonOutOfRangeError(f"T={T} outside [{TIME_MIN}, {TIME_MAX}]")
    kept = tuple(o for o in lc.observations if o.time <= T)
    return PartialLightCurve(source=lc, horizon=T, observations=kept)


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of light curves with class labels.

    Curves are kept sorted by transient_id so that serialization is
    canonical: saving and re-loading a dataset reproduces it exactly.
    """

    light_curves: tuple[LightCurve, ...]

    def __post_init__(self):
        curves = tuple(sorted(self.light_curves, key=lambda c: c.transient_id))
        ids = [c.transient_id for c in curves]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise LightCurveError(f"duplicate transient_id(s): {dupes}")
        object.__setattr__(self, "light_curves", curves)

    @property
    def class_labels(self) -> set[str]:
        return {c.class_label for c in self.light_curves}

    @property
    def n_s(self) -> int:
        return len(self.light_curves)

    @property
    def n_p(self) -> int:
        return len(PASSBANDS)

    @property
    def n_t(self) -> int:
        """Number of 3-day steps covering the modeled window."""
        return int(round((TIME_MAX - TIME_MIN) / 3.0)) + 1

    def by_class(self, label: str) -> list[LightCurve]:
        return [c for c in self.light_curves if c.class_label == label]

    def get(self, transient_id: str) -> LightCurve:
        for c in self.light_curves:
            if c.transient_id == transient_id:
                return c
        raise KeyError(transient_id)


def _fmt(x: float) -> str:
    # repr() of a float is the shortest string that round-trips exactly
    return repr(float(x))


def save_dataset(ds: Dataset, path: str | Path, format: str = "csv") -> None:
    """Write a dataset to disk; load_dataset(path) reproduces it exactly."""
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for lc in ds.light_curves:
                for o in lc.observations:
                    w.writerow([lc.transient_id, lc.class_label, _fmt(o.time),
                                o.passband, _fmt(o.flux), _fmt(o.flux_err)])
    elif format == "json":
        payload = [
            {
                "transient_id": lc.transient_id,
                "class_label": lc.class_label,
                "observations": [
                    {"time": o.time, "passband": o.passband,
                     "flux": o.flux, "flux_err": o.flux_err}
                    for o in lc.observations
                ],
            }
            for lc in ds.light_curves
        ]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def _build_curves(rows: Sequence[tuple[str, str, Observation]], source: str) -> Dataset:
    by_id: dict[str, tuple[str, list[Observation]]] = {}
    for tid, label, obs in rows:
        if tid in by_id:
            prev_label, lst = by_id[tid]
            if prev_label != label:
                raise LightCurveError(
                    f"{source}: transient {tid!r} has conflicting class labels "
                    f"{prev_label!r} and {label!r}"
                )
            lst.append(obs)
        else:
            by_id[tid] = (label, [obs])
    curves = [LightCurve(tid, label, tuple(obs_list))
              for tid, (label, obs_list) in by_id.items()]
    return Dataset(tuple(curves))


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Load a dataset saved by save_dataset.

    The format is inferred from the file suffix unless given explicitly.
    Rows violating observation invariants are rejected with an error that
    names the offending row.
    """
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    rows: list[tuple[str, str, Observation]] = []
    if format == "csv":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MissingColumnError(f"{path}: empty file, expected header "
                                         f"{','.join(CSV_HEADER)}") from None
            if header != CSV_HEADER:
                missing = [c for c in CSV_HEADER if c not in header]
                raise MissingColumnError(
                    f"{path}: bad header {header}; missing column(s) {missing}"
                    if missing else f"{path}: header must be exactly {CSV_HEADER}"
                )
            for i, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    obs = Observation(time=float(row[2]), passband=row[3],
                                      flux=float(row[4]), flux_err=float(row[5]))
                except LightCurveError as err:
                    raise type(err)(f"{path}:{i}: {err}") from None
                rows.append((row[0], row[1], obs))
    elif format == "json":
        with open(path) as fh:
            payload = json.load(fh)
        for entry in payload:
            for key in ("transient_id", "class_label", "observations"):
                if key not in entry:
                    raise MissingColumnError(f"{path}: entry missing key {key!r}")
            for od in entry["observations"]:
                obs = Observation(time=float(od["time"]), passband=od["passband"],
                                  flux=float(od["flux"]), flux_err=float(od["flux_err"]))
                rows.append((entry["transient_id"], entry["class_label"], obs))
    else:
        raise ValueError(f"unknown format {format!r}")
    return _build_curves(rows, str(path))
