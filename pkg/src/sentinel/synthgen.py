"""Synthetic light-curve population generator.

Produces labeled populations on a ~3-day cadence over the [-70, +80] day
window. "Common" classes use the rise/fall parametric shape, so a
parametric model of that family is well-specified for them; "anomalous"
classes use deliberately different morphologies (double peak, plateau,
linear rise, stochastic flat level). Everything is a pure function of the
generation spec and its seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .bazin import bazin_core
from .lightcurve import (PASSBANDS, TIME_MAX, TIME_MIN, Dataset, LightCurve,
                         Observation)

SHAPES = ("bazin", "double_peak", "plateau", "linear_rise", "flat_agn_like")

#: order of the per-passband template parameter vector
TEMPLATE_PARAMS = ("A", "B", "t0", "tau_fall", "tau_rise")
_POSITIVE_IDX = (0, 3, 4)  # A, tau_fall, tau_rise

REJECTION_BUDGET = 1000
MAX_REGEN_TRIES = 10


class GenerationError(Exception):
    pass


class RejectionBudgetExceededError(GenerationError):
    """Could not draw positivity-respecting parameters within the budget."""


class EmptyAfterDropoutError(GenerationError):
    """Epoch dropout repeatedly left the curve without a valid observation set."""


@dataclass(frozen=True)
class ClassTemplate:
    """Population-level description of one transient class.

    `param_mean` maps passband -> mean of (A, B, t0, tau_fall, tau_rise);
    `param_cov` is the transient-to-transient scatter, shared between
    passbands (the same standardized deviation is applied to both bands so
    a bright draw is bright in both). Shape-specific constants (second-peak
    delay, plateau length, ...) live in `shape_params`.
    """

    name: str
    shape: str
    param_mean: Mapping[str, np.ndarray]
    param_cov: np.ndarray
    cadence_days: float = 3.0
    noise_floor: float = 1.0
    noise_scale: float = 0.02
    shape_params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise GenerationError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        means = {b: np.asarray(v, dtype=float) for b, v in self.param_mean.items()}
        if set(means) != set(PASSBANDS):
            raise GenerationError(f"{self.name}: param_mean must cover passbands {PASSBANDS}")
        for b, v in means.items():
            if v.shape != (len(TEMPLATE_PARAMS),):
                raise GenerationError(
                    f"{self.name}/{b}: expected {len(TEMPLATE_PARAMS)} parameters "
                    f"({', '.join(TEMPLATE_PARAMS)}), got shape {v.shape}")
        object.__setattr__(self, "param_mean", means)
        cov = np.asarray(self.param_cov, dtype=float)
        n = len(TEMPLATE_PARAMS)
        if cov.shape != (n, n) or not np.allclose(cov, cov.T):
            raise GenerationError(f"{self.name}: param_cov must be a symmetric {n}x{n} matrix")
        if np.any(cov):  # a zero matrix is allowed as the degenerate no-scatter case
            try:
                np.linalg.cholesky(cov + 1e-12 * np.eye(n))
            except np.linalg.LinAlgError:
                raise GenerationError(f"{self.name}: param_cov is not positive definite") from None
        if self.cadence_days <= 0:
            raise GenerationError(f"{self.name}: cadence_days must be > 0")
        if self.noise_floor <= 0:
            raise GenerationError(f"{self.name}: noise_floor must be > 0")
        if not (0 <= self.noise_scale < 1):
            raise GenerationError(f"{self.name}: noise_scale must be in [0, 1)")

    def shape_param(self, key: str, default: float) -> float:
        return float(self.shape_params.get(key, default))


@dataclass(frozen=True)
class GenSpec:
    """Reproducible recipe for a labeled population.

    n_null_per_class adds an extra batch of held-out curves per trained
    class (disjoint seed substreams), used as the null-control population.
    """

    templates: tuple[ClassTemplate, ...]
    n_per_class: int
    seed: int
    time_window: tuple[float, float] = (TIME_MIN, TIME_MAX)
    dropout_prob: float = 0.1
    n_null_per_class: int = 0

    def __post_init__(self):
        object.__setattr__(self, "templates", tuple(self.templates))
        if self.n_per_class < 1:
            raise GenerationError("n_per_class must be >= 1")
        if self.n_null_per_class < 0:
            raise GenerationError("n_null_per_class must be >= 0")
        if not (0 <= self.dropout_prob < 1):
            raise GenerationError("dropout_prob must be in [0, 1)")
        lo, hi = self.time_window
        if not (TIME_MIN <= lo < hi <= TIME_MAX):
            raise GenerationError(f"time_window must be within [{TIME_MIN}, {TIME_MAX}]")
        names = [t.name for t in self.templates]
        if len(set(names)) != len(names):
            raise GenerationError("template names must be unique")


def sample_class_params(tpl: ClassTemplate, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Draw one transient's per-passband parameter vectors from the template.

    The same standardized normal deviation is applied to every passband's
    mean, so per-band parameters are fully correlated across bands. Draws
    are rejected until A, tau_fall and tau_rise are all strictly positive
    in every band.
    """
    if not np.any(tpl.param_cov):
        return {b: tpl.param_mean[b].copy() for b in PASSBANDS}
    chol = np.linalg.cholesky(tpl.param_cov + 1e-12 * np.eye(len(TEMPLATE_PARAMS)))
    for _ in range(REJECTION_BUDGET):
        z = rng.standard_normal(len(TEMPLATE_PARAMS))
        offset = chol @ z
        drawn = {b: tpl.param_mean[b] + offset for b in PASSBANDS}
        if all((v[list(_POSITIVE_IDX)] > 0).all() for v in drawn.values()):
            return drawn
    raise RejectionBudgetExceededError(
        f"{tpl.name}: {REJECTION_BUDGET} rejected draws; check param_mean/param_cov")


def _bazin_peak_time(p: np.ndarray) -> float:
    A, B, t0, tau_fall, tau_rise = p
    if tau_fall <= tau_rise:
        return t0
    return t0 + tau_rise * np.log(tau_fall / tau_rise - 1.0)


def latent_flux(tpl: ClassTemplate, p: np.ndarray, t: np.ndarray,
                rng: np.random.Generator) -> np.ndarray:
    """Evaluate the noiseless latent flux of one template shape.

    Only the flat_agn_like shape consumes randomness (its level wanders as
    a stationary Ornstein-Uhlenbeck sequence over the epoch grid).
    """
    A, B, t0, tau_fall, tau_rise = p
    if tpl.shape == "bazin":
        return A * bazin_core(t - t0, tau_fall, tau_rise) + B
    if tpl.shape == "double_peak":
        frac = tpl.shape_param("second_peak_frac", 0.75)
        delay = tpl.shape_param("second_peak_delay", 28.0)
        first = A * bazin_core(t - t0, tau_fall, tau_rise)
        second = frac * A * bazin_core(t - t0 - delay, tau_fall, tau_rise)
        return first + second + B
    if tpl.shape == "plateau":
        length = tpl.shape_param("plateau_days", 40.0)
        t_peak = _bazin_peak_time(p)
        shifted = np.where(t < t_peak, t,
                           np.where(t < t_peak + length, t_peak, t - length))
        return A * bazin_core(shifted - t0, tau_fall, tau_rise) + B
    if tpl.shape == "linear_rise":
        rise_days = tpl.shape_param("rise_days", 50.0)
        return B + A * np.clip(t - t0, 0.0, None) / rise_days
    if tpl.shape == "flat_agn_like":
        corr = tpl.shape_param("correlation_days", 20.0)
        w = np.empty_like(t)
        w[0] = rng.standard_normal()
        for i in range(1, len(t)):
            rho = np.exp(-abs(t[i] - t[i - 1]) / corr)
            w[i] = rho * w[i - 1] + np.sqrt(1.0 - rho * rho) * rng.standard_normal()
        return B + A * w
    raise GenerationError(f"unknown shape {tpl.shape!r}")


def _epoch_grid(spec: GenSpec, tpl: ClassTemplate, rng: np.random.Generator) -> np.ndarray:
    lo, hi = spec.time_window
    base = np.arange(lo, hi + 1e-9, tpl.cadence_days)
    jitter = rng.uniform(-0.5, 0.5, size=base.shape)
    t = np.clip(base + jitter, lo, hi)  # edge epochs stay inside the window
    if spec.dropout_prob > 0:
        t = t[rng.random(base.shape) >= spec.dropout_prob]
    return t


def generate_lightcurve(tpl: ClassTemplate, params: Mapping[str, np.ndarray],
                        spec: GenSpec, rng: np.random.Generator,
                        transient_id: str) -> LightCurve:
    """Simulate one light curve: latent shape plus heteroscedastic noise.

    Per passband, epochs sit on a jittered cadence grid with random
    dropout; each flux is latent(t) + N(0, sigma(t)^2) with
    sigma(t) = noise_floor + noise_scale * |latent(t)|.
    """
    for attempt in range(MAX_REGEN_TRIES):
        obs: list[Observation] = []
        for band in PASSBANDS:
            t = _epoch_grid(spec, tpl, rng)
            if t.size == 0:
                obs = []
                break
            latent = latent_flux(tpl, params[band], t, rng)
            sigma = tpl.noise_floor + tpl.noise_scale * np.abs(latent)
            flux = latent + rng.normal(0.0, sigma)
            obs.extend(Observation(time=float(ti), passband=band,
                                   flux=float(fi), flux_err=float(si))
                       for ti, fi, si in zip(t, flux, sigma))
        if obs and any(o.time >= 0 for o in obs):
            obs.sort(key=lambda o: (o.time, o.passband))
            return LightCurve(transient_id=transient_id, class_label=tpl.name,
                              observations=tuple(obs))
    raise EmptyAfterDropoutError(
        f"{transient_id}: no valid epoch set after {MAX_REGEN_TRIES} tries")


def _one_curve(tpl: ClassTemplate, spec: GenSpec, ti: int, ci: int) -> LightCurve:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, ti, ci]))
    params = sample_class_params(tpl, rng)
    return generate_lightcurve(tpl, params, spec, rng, f"{tpl.name}-{ci:04d}")


def generate_population(spec: GenSpec) -> Dataset:
    """Generate n_per_class labeled curves per template, reproducibly.

    Every curve draws from its own seed substream derived from
    (spec.seed, template index, curve index), so results are identical
    whether curves are generated serially or in parallel.
    """
    curves = []
    for ti, tpl in enumerate(spec.templates):
        for ci in range(spec.n_per_class):
            curves.append(_one_curve(tpl, spec, ti, ci))
    return Dataset(tuple(curves))


def generate_null_population(spec: GenSpec, class_names) -> Dataset:
    """Extra held-out curves for the named classes, disjoint from the
    main population's seed substreams and transient ids."""
    wanted = set(class_names)
    curves = []
    for ti, tpl in enumerate(spec.templates):
        if tpl.name not in wanted:
            continue
        for ci in range(spec.n_per_class, spec.n_per_class + spec.n_null_per_class):
            curves.append(_one_curve(tpl, spec, ti, ci))
    return Dataset(tuple(curves))
