"""Real-time anomaly detection for astronomical transient light curves.

Fit a Bayesian rise/fall flux model to the observed portion of a light
curve, forecast the flux three days ahead with calibrated uncertainty,
and turn forecast misses into chi-squared anomaly scores that separate
transients the model was trained on from everything else.
"""

from .anomaly import (AnomalyScoreSeries, ConstantPredictor, ExternalPredictor,
                      OraclePredictor, ScoredStep, chi2_step, muspe_step,
                      score_lightcurve)
from .bazin import (BazinParams, BazinPredictor, ClassPrior, PosteriorSamples,
                    Prediction, SamplerConfig, bazin_flux, broad_hyper_prior,
                    build_class_prior, fit_map, log_likelihood, predict,
                    sample_posterior)
from .lightcurve import (Dataset, LightCurve, Observation, PartialLightCurve,
                         load_dataset, save_dataset, slice_until)
from .metrics import (AUCTimeSeries, HistogramSummary, ROCResult, auc_over_time,
                      muspe_histograms, roc_curve, score_distribution)
from .synthgen import ClassTemplate, GenSpec, generate_lightcurve, generate_population, sample_class_params

__version__ = "0.1.0"
