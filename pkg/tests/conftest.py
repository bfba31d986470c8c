"""Shared fixtures: small synthetic populations and a fitted class prior."""

import numpy as np
import pytest

from sentinel.bazin import SamplerConfig, build_class_prior
from sentinel.synthgen import ClassTemplate, GenSpec, generate_population

#: sampler settings for tests that need speed over posterior resolution
FAST_SAMPLER = SamplerConfig(n_chains=4, n_draws=128, burn_in=300, warm_burn_in=80)


def make_template(name="snia_like", shape="bazin", *, amp=(95.0, 110.0),
                  t0=(8.0, 10.0), tau_fall=(16.0, 20.0), tau_rise=(4.5, 5.5),
                  baseline=(0.0, 0.0), std=(12.0, 0.8, 2.5, 2.0, 0.6),
                  noise_floor=2.0, noise_scale=0.02, shape_params=None):
    return ClassTemplate(
        name=name, shape=shape,
        param_mean={"g": np.array([amp[0], baseline[0], t0[0], tau_fall[0], tau_rise[0]]),
                    "r": np.array([amp[1], baseline[1], t0[1], tau_fall[1], tau_rise[1]])},
        param_cov=np.diag(np.asarray(std, dtype=float) ** 2),
        noise_floor=noise_floor, noise_scale=noise_scale,
        shape_params=shape_params or {})


@pytest.fixture(scope="session")
def bazin_population():
    spec = GenSpec(templates=(make_template(),), n_per_class=30, seed=7,
                   dropout_prob=0.1)
    return generate_population(spec)


@pytest.fixture(scope="session")
def bazin_prior(bazin_population):
    return build_class_prior(bazin_population, "snia_like")


@pytest.fixture(scope="session")
def double_peak_population():
    tpl = make_template(name="double_peak", shape="double_peak",
                        amp=(85.0, 95.0), t0=(6.0, 8.0),
                        shape_params={"second_peak_frac": 0.75,
                                      "second_peak_delay": 28.0})
    spec = GenSpec(templates=(tpl,), n_per_class=10, seed=11, dropout_prob=0.1)
    return generate_population(spec)
