"""Separating an unseen morphology from the trained class.

Trains a population prior on rise/fall transients, scores held-out curves
of the same class plus a double-peaked class the model has never seen, and
prints the score distributions and the resulting detection AUC.

Run: python demos/anomaly_separation.py
"""

import numpy as np

from sentinel import (BazinPredictor, GenSpec, build_class_prior,
                      generate_population, roc_curve, score_lightcurve)
from sentinel.bazin import SamplerConfig
from sentinel.synthgen import ClassTemplate

common = ClassTemplate(
    name="snia_like", shape="bazin",
    param_mean={"g": np.array([95.0, 0.0, 8.0, 16.0, 4.5]),
                "r": np.array([110.0, 0.0, 10.0, 20.0, 5.5])},
    param_cov=np.diag(np.array([12.0, 0.8, 2.5, 2.0, 0.6]) ** 2),
    noise_floor=2.0, noise_scale=0.02)

double_peak = ClassTemplate(
    name="double_peak", shape="double_peak",
    param_mean={"g": np.array([85.0, 0.0, 6.0, 17.0, 4.0]),
                "r": np.array([95.0, 0.0, 8.0, 21.0, 5.0])},
    param_cov=np.diag(np.array([10.0, 0.8, 2.5, 2.0, 0.5]) ** 2),
    noise_floor=2.0, noise_scale=0.02,
    shape_params={"second_peak_frac": 0.75, "second_peak_delay": 28.0})

spec = GenSpec(templates=(common, double_peak), n_per_class=40, seed=99,
               dropout_prob=0.1)
population = generate_population(spec)

print("fitting the snia_like population prior ...")
prior = build_class_prior(population, "snia_like")
cfg = SamplerConfig(n_chains=4, n_draws=128, burn_in=300, warm_burn_in=80)


def final_scores(label, n=10, tag=0):
    scores = []
    for i, lc in enumerate(population.by_class(label)[-n:]):
        predictor = BazinPredictor(prior, cfg, entropy=(99, tag, i))
        series = score_lightcurve(lc, predictor)
        scores.append(series.final_score)
    return np.array(scores)


print("scoring 10 held-out curves of each class under the snia_like model ...")
own = final_scores("snia_like", tag=0)
other = final_scores("double_peak", tag=1)

print(f"\n{'class':>12} {'median':>8} {'min':>7} {'max':>8}")
for name, vals in (("snia_like", own), ("double_peak", other)):
    print(f"{name:>12} {np.median(vals):8.2f} {vals.min():7.2f} {vals.max():8.2f}")

auc = roc_curve(own, other).auc
print(f"\ndetection AUC (double_peak vs snia_like): {auc:.3f}")
print("the second bump breaks the single rise/fall assumption, so forecasts")
print("keep missing it and the running chi2 accumulates well above the")
print("in-class level of about one.")
