import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from restorecast import (
    BetaProgressRegressor,
    DamageState,
    McmcConfig,
    NetworkEfficiencyTransformer,
    betainc,
    build_network,
)

VAGUE = dict(initial=(1, 1, 80), prior_a=(1, 10), prior_b=(1, 10), prior_U=(80, 40),
             proposal_sd=(0.15, 0.15, 1.0), likelihood_sd=1.0, iterations=30_000, burn_in=5000)


def curve(n=30, seed=0):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 68, n))
    return t.reshape(-1, 1), np.clip(betainc(2, 2, t / 68) + rng.normal(0, 0.01, n), 0, 1)


def test_params_round_trip_and_clone():
    est = BetaProgressRegressor(**VAGUE, seed=3)
    assert est.get_params()["prior_U"] == (80, 40)
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    est.set_params(seed=4)
    assert est.seed == 4
    assert BetaProgressRegressor.from_config(McmcConfig()).get_params()["likelihood_sd"] == 3.911


def test_fit_predict_forecast():
    X, y = curve()
    est = BetaProgressRegressor(**VAGUE).fit(X, y)
    assert est.posterior_.samples.shape == (est.config_.n_retained, 3)
    pred = est.predict(np.array([[0.0], [34.0], [68.0]]))
    assert pred[0] == pytest.approx(0, abs=0.01) and pred[1] == pytest.approx(0.5, abs=0.05)
    assert est.score(X, y) > 0.99
    d = est.forecast(30.0, float(betainc(2, 2, 30 / 68)), 1.0, n_draws=2000)
    # on schedule at 30 h, so completion is forecast near the fitted U
    assert d.mean == pytest.approx(est.posterior_.U.mean(), rel=0.05)
    env = est.forecast_envelope(30.0, 0.3, n_draws=1000)
    assert np.all(np.diff(env.means) >= 0)


def test_not_fitted():
    with pytest.raises(NotFittedError):
        BetaProgressRegressor().predict([[1.0]])


@pytest.mark.parametrize("X, y", [
    ([[1.0, 2.0]], [0.1]),
    ([1.0, 2.0], [0.1]),
    ([1.0], [1.5]),
    ([-1.0], [0.1]),
    ([np.nan], [0.1]),
])
def test_input_validation(X, y):
    with pytest.raises(ValueError):
        BetaProgressRegressor(iterations=100, burn_in=10).fit(X, y)


def test_efficiency_transformer():
    net = build_network([1, 2, 3], [(1, 2), (2, 3)])
    states = [DamageState(), DamageState(damaged_edges={(1, 2)}), DamageState(damaged_nodes={2})]
    out = NetworkEfficiencyTransformer(net).fit_transform(states)
    np.testing.assert_allclose(out, [5 / 6, 1 / 3, 0.0])
    norm = NetworkEfficiencyTransformer(net, normalize=True).fit(None).transform(states[:2])
    np.testing.assert_allclose(norm, [1.0, 0.4])
    with pytest.raises(TypeError):
        NetworkEfficiencyTransformer("nope").fit()
