"""Flux model identities, likelihood correctness, and posterior behavior.

Expected values come from independent routes: mpmath high-precision
arithmetic for the flux formula, per-point scipy normal log-densities for
the likelihood, and the conjugate closed form for the baseline-only
posterior.
"""

import mpmath
import numpy as np
import pytest
from scipy import stats

from sentinel.bazin import (BazinParams, ClassPrior, EmptySamplesError,
                            InsufficientDataError, SamplerConfig, bazin_flux,
                            broad_hyper_prior, fit_map, log_likelihood, predict,
                            sample_posterior)
from sentinel.lightcurve import LightCurve, Observation, PASSBANDS, slice_until

from conftest import FAST_SAMPLER


def mp_bazin(A, B, t0, tau_fall, tau_rise, t):
    """Independent high-precision evaluation of the flux formula."""
    with mpmath.workdps(50):
        u = mpmath.mpf(t) - mpmath.mpf(t0)
        val = (mpmath.mpf(A) * mpmath.exp(-u / mpmath.mpf(tau_fall))
               / (1 + mpmath.exp(-u / mpmath.mpf(tau_rise))) + mpmath.mpf(B))
        return float(val)


def curve_from_arrays(t, flux, err, band="g", label="c"):
    other = "r" if band == "g" else "g"
    obs = [Observation(float(ti), band, float(fi), float(ei))
           for ti, fi, ei in zip(t, flux, err)]
    # satisfy the both-passbands invariant with one far-off point
    obs.append(Observation(80.0, other, 0.0, 1.0))
    return LightCurve("t-0", label, tuple(sorted(obs, key=lambda o: (o.time, o.passband))))


THETA = BazinParams(A=100.0, B=10.0, t0=0.0, tau_fall=20.0, tau_rise=5.0,
                    sigma_int=0.01)


class TestFluxModel:
    def test_half_amplitude_at_t0(self):
        assert bazin_flux(THETA, THETA.t0) == THETA.A / 2 + THETA.B

    def test_far_tail_reaches_baseline(self):
        val = bazin_flux(THETA, THETA.t0 + 50 * THETA.tau_fall)
        assert abs(val - THETA.B) < 1e-6 * THETA.A

    def test_against_high_precision_oracle(self):
        cases = [(100.0, 10.0, 0.0, 20.0, 5.0, 10.0)]
        rng = np.random.default_rng(0)
        for _ in range(50):
            A = rng.uniform(1, 500)
            B = rng.uniform(-50, 50)
            t0 = rng.uniform(-30, 50)
            tf = rng.uniform(2, 60)
            tr = rng.uniform(0.5, 15)
            t = rng.uniform(-70, 80)
            cases.append((A, B, t0, tf, tr, t))
        for A, B, t0, tf, tr, t in cases:
            ours = bazin_flux(BazinParams(A, B, t0, tf, tr, 0.01), t)
            oracle = mp_bazin(A, B, t0, tf, tr, t)
            assert abs(ours - oracle) <= 1e-12 * max(abs(oracle), 1e-300)

    def test_stable_at_extreme_phases(self):
        theta = BazinParams(A=100.0, B=5.0, t0=0.0, tau_fall=2.0, tau_rise=1.0,
                            sigma_int=0.01)
        for u in (-2000.0, -1000.0, 1000.0, 2000.0):  # |u|/tau up to 2e3
            val = bazin_flux(theta, u)
            assert np.isfinite(val)
            assert abs(val - theta.B) < 1e-6

    def test_monotone_rise_then_fall(self):
        t_peak = THETA.t0 + THETA.tau_rise * np.log(THETA.tau_fall / THETA.tau_rise - 1)
        before = bazin_flux(THETA, np.linspace(-60.0, t_peak - 1e-6, 2000))
        after = bazin_flux(THETA, np.linspace(t_peak + 1e-6, 80.0, 2000))
        assert (np.diff(before) > 0).all()
        assert (np.diff(after) < 0).all()

    def test_transform_roundtrip(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            theta = BazinParams(A=rng.uniform(0.1, 300), B=rng.uniform(-30, 30),
                                t0=rng.uniform(-60, 60), tau_fall=rng.uniform(1, 60),
                                tau_rise=rng.uniform(0.3, 20),
                                sigma_int=rng.uniform(2e-4, 0.5))
            back = BazinParams.from_vector(theta.to_vector())
            for name in ("A", "B", "t0", "tau_fall", "tau_rise", "sigma_int"):
                a, b = getattr(theta, name), getattr(back, name)
                assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)

    def test_invalid_params_rejected(self):
        with pytest.raises(Exception):
            BazinParams(A=-1.0, B=0.0, t0=0.0, tau_fall=20.0, tau_rise=5.0,
                        sigma_int=0.01)
        with pytest.raises(Exception):
            BazinParams(A=1.0, B=0.0, t0=0.0, tau_fall=20.0, tau_rise=5.0,
                        sigma_int=np.inf)


class TestLogLikelihood:
    def test_zero_residual_single_point(self):
        t = np.array([4.0])
        f = bazin_flux(THETA, 4.0)
        lc = curve_from_arrays(t, [f], [2.0])
        v = THETA.A**2 * THETA.sigma_int**2 + 4.0
        got = log_likelihood(THETA, slice_until(lc, 10.0), "g")
        assert abs(got - (-0.5 * np.log(2 * np.pi * v))) < 1e-12

    def test_normalization_penalizes_wider_errors(self):
        f = bazin_flux(THETA, 4.0)
        lc1 = curve_from_arrays([4.0], [f], [2.0])
        lc2 = curve_from_arrays([4.0], [f], [4.0])
        assert (log_likelihood(THETA, slice_until(lc2, 10.0), "g")
                < log_likelihood(THETA, slice_until(lc1, 10.0), "g"))

    def test_maximal_at_zero_residual(self):
        t = np.linspace(-10, 40, 12)
        f = bazin_flux(THETA, t)
        err = np.full_like(t, 2.0)
        base = log_likelihood(THETA, slice_until(curve_from_arrays(t, f, err), 80.0), "g")
        for i in (0, 5, 11):
            bumped = f.copy()
            bumped[i] += 1.0
            worse = log_likelihood(
                THETA, slice_until(curve_from_arrays(t, bumped, err), 80.0), "g")
            assert worse < base

    def test_brute_force_oracle(self):
        # sum of independent per-point normal log-densities, point by point;
        # data are drawn around the model so the total stays well scaled
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(3, 40))
            theta = BazinParams(A=rng.uniform(5, 200), B=rng.uniform(-20, 20),
                                t0=rng.uniform(-20, 40), tau_fall=rng.uniform(3, 50),
                                tau_rise=rng.uniform(1, 12),
                                sigma_int=rng.uniform(1e-3, 0.3))
            t = np.sort(rng.uniform(-70, 80, n))
            err = rng.uniform(0.5, 5.0, n)
            flux = bazin_flux(theta, t) + rng.normal(0, 3 * err)
            lc = curve_from_arrays(t, flux, err)
            got = log_likelihood(theta, slice_until(lc, 80.0), "g")
            expected = 0.0
            for ti, fi, ei in zip(t, flux, err):
                sd = np.sqrt(theta.A**2 * theta.sigma_int**2 + ei**2)
                expected += stats.norm.logpdf(fi, loc=bazin_flux(theta, ti), scale=sd)
            assert abs(got - expected) <= 1e-10

    def test_insufficient_data(self):
        lc = curve_from_arrays([5.0], [10.0], [1.0], band="g")
        with pytest.raises(InsufficientDataError):
            log_likelihood(THETA, slice_until(lc, 2.0), "g")


def _tight_prior(theta: BazinParams, b_mean: float, b_std: float = 4.0,
                 tight: float = 1e-7) -> ClassPrior:
    """Prior pinning every parameter except the baseline B."""
    mean = theta.to_vector()
    mean[1] = b_mean
    var = np.full(6, tight**2)
    var[1] = b_std**2
    cov = np.diag(var)
    return ClassPrior("tight", {b: mean for b in PASSBANDS},
                      {b: cov for b in PASSBANDS})


def _population_prior(center: BazinParams, stds) -> ClassPrior:
    mean = center.to_vector()
    cov = np.diag(np.asarray(stds, dtype=float) ** 2)
    return ClassPrior("pop", {b: mean for b in PASSBANDS},
                      {b: cov for b in PASSBANDS})


def _synthetic_curve(theta: BazinParams, rng, cadence=3.0, sigma_d=3.0,
                     lo=-70.0, hi=80.0, intrinsic=True):
    t = np.arange(lo, hi, cadence) + rng.uniform(-0.5, 0.5, size=len(np.arange(lo, hi, cadence)))
    t = np.clip(t, lo, hi)
    f = bazin_flux(theta, t)
    if intrinsic:
        f = f + theta.A * theta.sigma_int * rng.standard_normal(t.size)
    flux = f + rng.normal(0, sigma_d, t.size)
    err = np.full(t.size, sigma_d)
    return curve_from_arrays(t, flux, err)


class TestFitMap:
    def test_noiseless_recovery(self):
        theta = BazinParams(A=100.0, B=2.0, t0=8.0, tau_fall=22.0, tau_rise=5.0,
                            sigma_int=0.01)
        rng = np.random.default_rng(4)
        lc = _synthetic_curve(theta, rng, sigma_d=1e-6, intrinsic=False)
        prior = _population_prior(theta, [0.3, 5.0, 5.0, 0.3, 0.3, 1.0])
        fitted = fit_map(slice_until(lc, 80.0), prior, "g", rng=rng)
        for name in ("A", "B", "t0", "tau_fall", "tau_rise"):
            a, b = getattr(theta, name), getattr(fitted, name)
            assert abs(a - b) <= 1e-3 * max(abs(a), 1.0), name
        assert fitted.sigma_int < 1e-3  # driven to the floor

    def test_insufficient_data(self):
        lc = curve_from_arrays([0.0, 3.0], [5.0, 6.0], [1.0, 1.0])
        with pytest.raises(InsufficientDataError):
            fit_map(slice_until(lc, 80.0), broad_hyper_prior(), "g")

    def test_median_amplitude_within_5pct(self):
        theta = BazinParams(A=100.0, B=0.0, t0=8.0, tau_fall=20.0, tau_rise=5.0,
                            sigma_int=0.02)
        prior = _population_prior(theta, [0.3, 5.0, 5.0, 0.3, 0.3, 1.0])
        amps = []
        for i in range(100):
            rng = np.random.default_rng(1000 + i)
            lc = _synthetic_curve(theta, rng, sigma_d=3.0)
            amps.append(fit_map(slice_until(lc, 80.0), prior, "g", rng=rng).A)
        assert abs(np.median(amps) - theta.A) <= 0.05 * theta.A


class TestSampler:
    def test_zero_width_prior_pins_draws(self):
        theta = THETA
        prior = ClassPrior("pin", {b: theta.to_vector() for b in PASSBANDS},
                           {b: 1e-12 * np.eye(6) for b in PASSBANDS})
        rng = np.random.default_rng(5)
        lc = _synthetic_curve(theta, rng)
        samples = sample_posterior(slice_until(lc, 80.0), prior, "g",
                                   FAST_SAMPLER, seed=5)
        spread = np.abs(np.log(samples.params[:, 0]) - theta.to_vector()[0])
        assert spread.max() < 1e-3

    def test_prior_only_recovery(self):
        center = BazinParams(A=80.0, B=3.0, t0=10.0, tau_fall=18.0, tau_rise=4.0,
                             sigma_int=0.03)
        stds = np.array([0.4, 4.0, 5.0, 0.3, 0.3, 0.5])
        prior = _population_prior(center, stds)
        cfg = SamplerConfig(n_draws=2000, burn_in=600)
        reps = []
        for seed in range(6):
            s = sample_posterior(None, prior, "g", cfg, seed=seed, prior_only=True)
            x = np.column_stack([np.log(s.params[:, 0]), s.params[:, 1],
                                 s.params[:, 2], np.log(s.params[:, 3]),
                                 np.log(s.params[:, 4]), np.log(s.params[:, 5])])
            reps.append((x.mean(axis=0), x.std(axis=0, ddof=1)))
        means = np.array([r[0] for r in reps])
        sds = np.array([r[1] for r in reps])
        target_mean = center.to_vector()
        se_mean = means.std(axis=0, ddof=1) / np.sqrt(len(reps)) + 1e-3 * stds
        assert (np.abs(means.mean(axis=0) - target_mean) <= 3.5 * se_mean).all()
        se_sd = sds.std(axis=0, ddof=1) / np.sqrt(len(reps)) + 1e-3 * stds
        assert (np.abs(sds.mean(axis=0) - stds) <= 3.5 * se_sd).all()

    def test_conjugate_baseline_posterior(self):
        # every parameter pinned except B: the posterior is a Gaussian with
        # a closed-form mean and standard deviation
        theta = BazinParams(A=100.0, B=3.0, t0=10.0, tau_fall=20.0, tau_rise=5.0,
                            sigma_int=0.01)
        b_mu0, b_sd0 = 5.0, 4.0
        prior = _tight_prior(theta, b_mean=b_mu0, b_std=b_sd0)
        rng = np.random.default_rng(6)
        n, sigma_d = 15, 3.0
        t = np.sort(rng.uniform(-10, 60, n))
        g = np.array([bazin_flux(theta, ti) for ti in t]) - theta.B
        D = g + theta.B + rng.normal(0, sigma_d, n)
        lc = curve_from_arrays(t, D, np.full(n, sigma_d))
        v = theta.A**2 * theta.sigma_int**2 + sigma_d**2
        prec = 1 / b_sd0**2 + n / v
        closed_mean = (b_mu0 / b_sd0**2 + np.sum(D - g) / v) / prec
        closed_sd = 1 / np.sqrt(prec)

        cfg = SamplerConfig(n_draws=2000, burn_in=600)
        means, sds = [], []
        for seed in range(8):
            s = sample_posterior(slice_until(lc, 80.0), prior, "g", cfg, seed=seed)
            means.append(s.params[:, 1].mean())
            sds.append(s.params[:, 1].std(ddof=1))
        se_mean = np.std(means, ddof=1) / np.sqrt(len(means)) + 0.01 * closed_sd
        se_sd = np.std(sds, ddof=1) / np.sqrt(len(sds)) + 0.01 * closed_sd
        assert abs(np.mean(means) - closed_mean) <= 3 * se_mean
        assert abs(np.mean(sds) - closed_sd) <= 3 * se_sd

    def test_draw_count_and_positivity(self, bazin_population, bazin_prior):
        lc = bazin_population.light_curves[0]
        samples = sample_posterior(slice_until(lc, 80.0), bazin_prior, "g",
                                   FAST_SAMPLER, seed=1)
        assert samples.n_draws >= 128 >= 100
        assert (samples.params[:, 0] > 0).all()
        assert (samples.params[:, 3] > 0).all()
        assert (samples.params[:, 4] > 0).all()
        assert (samples.params[:, 5] >= 1e-4).all()
        assert samples.diagnostics.rhat.shape == (6,)
        assert 0 < samples.diagnostics.acceptance_rate < 1

    def test_insufficient_data(self, bazin_prior):
        lc = curve_from_arrays([0.0, 3.0], [5.0, 6.0], [1.0, 1.0])
        with pytest.raises(InsufficientDataError):
            sample_posterior(slice_until(lc, 80.0), bazin_prior, "g", FAST_SAMPLER)

    def test_contraction_with_more_data(self):
        # doubling the observation count should not raise the posterior
        # spread of the amplitude (allow one violation across repetitions)
        theta = BazinParams(A=100.0, B=0.0, t0=8.0, tau_fall=20.0, tau_rise=5.0,
                            sigma_int=0.02)
        prior = _population_prior(theta, [0.3, 4.0, 4.0, 0.3, 0.3, 0.7])
        cfg = SamplerConfig(n_draws=1000, burn_in=500)
        violations = 0
        for i in range(20):
            rng = np.random.default_rng(2000 + i)
            lc_n = _synthetic_curve(theta, rng, cadence=6.0)
            lc_2n = _synthetic_curve(theta, rng, cadence=3.0)
            s_n = sample_posterior(slice_until(lc_n, 80.0), prior, "g",
                                   cfg, seed=3000 + i)
            s_2n = sample_posterior(slice_until(lc_2n, 80.0), prior, "g",
                                    cfg, seed=4000 + i)
            if s_2n.params[:, 0].std() > s_n.params[:, 0].std():
                violations += 1
        assert violations <= 1

    def test_samples_csv_dump(self, tmp_path, bazin_population, bazin_prior):
        lc = bazin_population.light_curves[0]
        samples = sample_posterior(slice_until(lc, 80.0), bazin_prior, "g",
                                   FAST_SAMPLER, seed=1)
        path = tmp_path / "draws.csv"
        samples.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == "A,B,t0,tau_fall,tau_rise,sigma_int,log_posterior"
        assert len(path.read_text().splitlines()) == samples.n_draws + 1


class TestPredict:
    def _degenerate_samples(self, theta, n=400):
        from sentinel.bazin import PosteriorSamples, SamplerDiagnostics
        params = np.tile(theta.as_raw_array(), (n, 1))
        diag = SamplerDiagnostics(acceptance_rate=1.0, rhat=np.ones(6),
                                  n_chains=4, burn_in=0)
        return PosteriorSamples(params=params, log_posterior=np.zeros(n),
                                diagnostics=diag)

    def test_degenerate_posterior_small_sigma(self):
        theta = BazinParams(A=100.0, B=10.0, t0=0.0, tau_fall=20.0, tau_rise=5.0,
                            sigma_int=1e-4)
        samples = self._degenerate_samples(theta)
        pred = predict(samples, 12.0, "g", np.random.default_rng(0))
        fc = pred.band("g")
        assert abs(fc.y - bazin_flux(theta, 12.0)) < 3 * theta.A * 1e-4
        assert fc.sigma_y < 2 * theta.A * 1e-4

    def test_pure_intrinsic_scatter(self):
        theta = BazinParams(A=100.0, B=10.0, t0=0.0, tau_fall=20.0, tau_rise=5.0,
                            sigma_int=0.05)
        n = 2000
        samples = self._degenerate_samples(theta, n=n)
        pred = predict(samples, 5.0, "g", np.random.default_rng(1))
        target = theta.A * theta.sigma_int
        se = target / np.sqrt(2 * n)
        assert abs(pred.band("g").sigma_y - target) <= 3 * se

    def test_empty_samples(self):
        from sentinel.bazin import PosteriorSamples, SamplerDiagnostics
        diag = SamplerDiagnostics(1.0, np.ones(6), 4, 0)
        empty = PosteriorSamples(np.empty((0, 6)), np.empty(0), diag)
        with pytest.raises(EmptySamplesError):
            predict(empty, 3.0, "g")

    def test_coverage_of_future_observation(self, bazin_prior):
        # nominal 95% interval from total variance covers the held-out flux
        theta_center = BazinParams(A=95.0, B=0.0, t0=8.0, tau_fall=16.0,
                                   tau_rise=4.5, sigma_int=0.01)
        covered = total = 0
        for i in range(200):
            rng = np.random.default_rng(5000 + i)
            x = bazin_prior.means["g"] + bazin_prior.chol("g") @ rng.standard_normal(6)
            theta = BazinParams.from_vector(x)
            lc = _synthetic_curve(theta, rng, sigma_d=2.0)
            t_all = lc.band_arrays("g")[0]
            anchor = float(t_all[np.argmin(np.abs(t_all - 40.0))])
            future = t_all[(t_all >= anchor + 2.5) & (t_all <= anchor + 3.5)]
            if future.size == 0:
                continue
            target = float(future[0])
            samples = sample_posterior(slice_until(lc, anchor), bazin_prior, "g",
                                       FAST_SAMPLER, seed=6000 + i)
            pred = predict(samples, target, "g", rng)
            obs = next(o for o in lc.observations
                       if o.passband == "g" and o.time == target)
            half = 1.96 * np.sqrt(pred.band("g").sigma_y**2 + obs.flux_err**2)
            covered += abs(pred.band("g").y - obs.flux) <= half
            total += 1
        assert total >= 100
        assert 0.90 <= covered / total <= 1.0

    def test_sigma_shrinks_with_more_data(self, bazin_population, bazin_prior):
        early, late = [], []
        for i, lc in enumerate(bazin_population.light_curves[:12]):
            s0 = sample_posterior(slice_until(lc, 0.0), bazin_prior, "g",
                                  FAST_SAMPLER, seed=100 + i)
            s1 = sample_posterior(slice_until(lc, 40.0), bazin_prior, "g",
                                  FAST_SAMPLER, seed=200 + i)
            rng = np.random.default_rng(300 + i)
            early.append(predict(s0, 3.0, "g", rng).band("g").sigma_y)
            late.append(predict(s1, 43.0, "g", rng).band("g").sigma_y)
        assert np.median(late) <= np.median(early)
