"""Forecasting one transient as its light curve grows.

Generates a single rise/fall transient, then walks the observation horizon
forward and prints the 3-day-ahead forecast against what was actually
observed, showing how the predictive uncertainty tightens once the peak is
in view.

Run: python demos/forecast_walkthrough.py
"""

import numpy as np

from sentinel import (GenSpec, build_class_prior, generate_population,
                      predict, sample_posterior, slice_until)
from sentinel.bazin import SamplerConfig
from sentinel.synthgen import ClassTemplate

template = ClassTemplate(
    name="snia_like", shape="bazin",
    param_mean={"g": np.array([95.0, 0.0, 8.0, 16.0, 4.5]),
                "r": np.array([110.0, 0.0, 10.0, 20.0, 5.5])},
    param_cov=np.diag(np.array([12.0, 0.8, 2.5, 2.0, 0.6]) ** 2),
    noise_floor=2.0, noise_scale=0.02)

spec = GenSpec(templates=(template,), n_per_class=40, seed=1234, dropout_prob=0.1)
population = generate_population(spec)

print("building the population prior from 40 curves ...")
prior = build_class_prior(population, "snia_like")

target_curve = population.light_curves[0]
times, fluxes, errs = target_curve.band_arrays("g")
cfg = SamplerConfig(n_chains=4, n_draws=500, burn_in=400)

print(f"\nforecasting {target_curve.transient_id} (g band), 3 days ahead:")
print(f"{'T':>7} {'target':>8} {'forecast':>9} {'sigma_y':>8} "
      f"{'observed':>9} {'pull':>6}")
for horizon in times[8::5]:  # every 5th observed epoch as the anchor
    # the next epoch roughly three days past the horizon
    future = times[(times >= horizon + 2.5) & (times <= horizon + 3.5)]
    if future.size == 0:
        continue
    target = float(future[0])
    observed = float(fluxes[times == target][0])
    sigma_d = float(errs[times == target][0])

    partial = slice_until(target_curve, horizon)
    if partial.n_in_band("g") < 3:
        continue
    samples = sample_posterior(partial, prior, "g", cfg, seed=int(horizon) + 100)
    forecast = predict(samples, target, "g", np.random.default_rng(0)).band("g")
    pull = (forecast.y - observed) / np.hypot(forecast.sigma_y, sigma_d)
    print(f"{horizon:7.1f} {target:8.2f} {forecast.y:9.2f} "
          f"{forecast.sigma_y:8.2f} {observed:9.2f} {pull:6.2f}")

print("\nearly horizons lean on the population prior (wide sigma_y); once")
print("the rise and peak are observed the forecasts sharpen to the few-")
print("percent level and the pulls stay of order one.")
