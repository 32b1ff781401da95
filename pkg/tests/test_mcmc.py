import math

import numpy as np
import pytest
from scipy import stats

from restorecast import (
    McmcConfig,
    McmcError,
    PosteriorSamples,
    ProgressObservation,
    betainc,
    chain_diagnostics,
    effective_sample_size,
    log_likelihood,
    log_prior,
    mh_chain,
    prior_from_history,
)

DEFAULTS = McmcConfig()
LOG_NORM = -math.log(3.911 * math.sqrt(2 * math.pi))
VAGUE = dict(initial=(1, 1, 80), prior_a=(1, 10), prior_b=(1, 10), prior_U=(80, 40),
             proposal_sd=(0.15, 0.15, 1.0), likelihood_sd=1.0)


def noisy_curve(seed, n=30, a=2.0, b=2.0, upper=68.0, noise=0.01):
    rng = np.random.default_rng(100 + seed)
    t = np.sort(rng.uniform(0, upper, n))
    q = np.clip(betainc(a, b, t / upper) + rng.normal(0, noise, n), 0, 1)
    return t, q


def prior_ks(samples, cfg):
    return [stats.kstest(samples[:, k], stats.norm(m, s).cdf).statistic
            for k, (m, s) in enumerate(zip(cfg.prior_means, cfg.prior_sds))]


def test_table_defaults():
    assert DEFAULTS.initial == (1.0, 2.0, 70.0)
    assert DEFAULTS.prior_a == (1.0, 0.1) and DEFAULTS.prior_b == (1.772, 0.177) and DEFAULTS.prior_U == (68.0, 6.8)
    assert DEFAULTS.proposal_sd == (0.02, 0.0354, 1.36) and DEFAULTS.likelihood_sd == 3.911
    assert DEFAULTS.n_retained == 4000


def test_config_validation():
    with pytest.raises(ValueError):
        McmcConfig(burn_in=60_000)
    with pytest.raises(ValueError):
        McmcConfig(prior_a=(1, 0))
    with pytest.raises(ValueError):
        McmcConfig(thin=0)
    assert McmcConfig.from_dict(DEFAULTS.to_dict()) == DEFAULTS


def test_log_prior_at_means():
    expected = sum(-math.log(s * math.sqrt(2 * math.pi)) for s in (0.1, 0.177, 6.8))
    assert log_prior((1, 1.772, 68), DEFAULTS) == pytest.approx(expected, abs=1e-12)


def test_log_prior_support():
    assert log_prior((-1, 1.772, 68), DEFAULTS) == -math.inf
    assert log_prior((1, 0, 68), DEFAULTS) == -math.inf
    assert log_prior((1, 1.772, 50), DEFAULTS, [ProgressObservation(60, 0.9)]) == -math.inf


def test_log_likelihood_cases():
    t = np.array([10.0, 20.0, 30.0])
    q = betainc(2, 2, t / 68)
    assert log_likelihood((2, 2, 68), (t, q), 3.911) == pytest.approx(3 * LOG_NORM, abs=1e-12)
    off = [ProgressObservation(34.0, 0.5 + 0.03911)]
    assert log_likelihood((2, 2, 68), off, 3.911) == pytest.approx(LOG_NORM - 0.5, abs=1e-12)
    assert log_likelihood((2, 2, 68), [], 3.911) == 0.0


def test_observation_validation():
    with pytest.raises(ValueError):
        ProgressObservation(-1, 0.5)
    with pytest.raises(ValueError):
        ProgressObservation(1, 1.2)


def test_prior_recovery_default_run():
    post = mh_chain(McmcConfig(seed=0))
    assert len(post) == 4000
    diag = chain_diagnostics(post)
    for name, m in zip("abU", DEFAULTS.prior_means):
        p = diag["parameters"][name]
        se = p["sd"] / math.sqrt(p["ess"])
        assert abs(p["mean"] - m) < 3 * se
    assert max(prior_ks(post.samples, DEFAULTS)) < 0.05


def test_prior_recovery_at_ten_thousand_effective_samples():
    cfg = McmcConfig(iterations=2_000_000, burn_in=10_000, thin=100, seed=1)
    post = mh_chain(cfg)
    ess = [chain_diagnostics(post)["parameters"][n]["ess"] for n in "abU"]
    assert min(ess) > 10_000 or len(post) >= 10_000
    assert max(prior_ks(post.samples, cfg)) < 0.05


def test_truth_recovery_most_seeds():
    hits = 0
    for seed in range(10):
        post = mh_chain(McmcConfig(**VAGUE, seed=seed), noisy_curve(seed))
        hits += bool(np.all(np.abs(post.samples.mean(0) / [2, 2, 68] - 1) < 0.1))
    assert hits >= 8


def test_posterior_contracts_with_data():
    prior = mh_chain(McmcConfig(**VAGUE, seed=3)).samples.std(0)
    post = mh_chain(McmcConfig(**VAGUE, seed=3), noisy_curve(3)).samples.std(0)
    assert np.all(post < 0.25 * prior)


def test_determinism():
    obs = noisy_curve(0)
    one = mh_chain(McmcConfig(seed=5, iterations=20_000, burn_in=1000), obs)
    two = mh_chain(McmcConfig(seed=5, iterations=20_000, burn_in=1000), obs)
    np.testing.assert_array_equal(one.samples, two.samples)
    other = mh_chain(McmcConfig(seed=6, iterations=20_000, burn_in=1000), obs)
    assert not np.array_equal(one.samples, other.samples)


def test_u_stays_beyond_last_observation():
    t, q = noisy_curve(1)
    post = mh_chain(McmcConfig(**{**VAGUE, "initial": (1, 1, 30)}, seed=0), (t, q))
    assert post.U.min() > t.max()


def test_zero_acceptance_is_an_error():
    # start on an exact fit with a razor likelihood and huge steps
    t = np.linspace(1, 60, 30)
    q = betainc(2, 2, t / 68)
    cfg = McmcConfig(initial=(2, 2, 68), prior_a=(2, 1), prior_b=(2, 1), prior_U=(68, 10),
                     proposal_sd=(50, 50, 500), likelihood_sd=1e-3, iterations=500, burn_in=100, seed=0)
    with pytest.raises(McmcError, match="proposal"):
        mh_chain(cfg, (t, q))


def test_csv_round_trip(tmp_path):
    post = mh_chain(McmcConfig(iterations=2000, burn_in=0, thin=1, seed=0))
    post.to_csv(tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "a,b,U"
    back = PosteriorSamples.from_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(back.samples, post.samples)


def test_ess_constant_and_iid():
    assert effective_sample_size(np.ones(500)) == 1.0
    diag = chain_diagnostics(np.ones((200, 3)))
    assert diag["acceptance_rate"] == 0.0 and diag["parameters"]["a"]["ess"] == 1.0
    draws = np.random.default_rng(0).standard_normal(20_000)
    assert effective_sample_size(draws) == pytest.approx(20_000, rel=0.2)


def test_ess_detects_autocorrelation():
    rng = np.random.default_rng(1)
    x = np.zeros(20_000)
    for i in range(1, x.size):
        x[i] = 0.9 * x[i - 1] + rng.standard_normal()
    # AR(1) with phi = 0.9: n (1 - phi) / (1 + phi)
    assert effective_sample_size(x) == pytest.approx(20_000 * 0.1 / 1.9, rel=0.3)


def test_diagnostics_match_direct_computation():
    samples = np.random.default_rng(2).normal(size=(300, 3)) * [1, 2, 3]
    diag = chain_diagnostics(samples)
    for k, name in enumerate("abU"):
        assert diag["parameters"][name]["mean"] == pytest.approx(samples[:, k].mean())
        assert diag["parameters"][name]["sd"] == pytest.approx(samples[:, k].std(ddof=1))


def test_prior_from_history_centres_on_past_events():
    histories = []
    for seed, upper in enumerate((60.0, 66.0, 72.0)):
        t = np.arange(0.0, upper + 1)
        histories.append((t, betainc(2.0, 3.0, t / upper), upper))
    cfg = prior_from_history(histories, McmcConfig(iterations=20_000, burn_in=5000))
    assert cfg.prior_U[0] == pytest.approx(66.0, rel=0.02)
    assert cfg.prior_a[0] == pytest.approx(2.0, rel=0.1) and cfg.prior_b[0] == pytest.approx(3.0, rel=0.1)
    assert cfg.proposal_sd == pytest.approx(tuple(0.2 * s for s in cfg.prior_sds))
    assert cfg.prior_a[1] >= 0.1 * cfg.prior_a[0]
