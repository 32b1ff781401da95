"""scikit-learn style wrappers around the functional core."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_hours, check_progress
from .beta import betainc
from .forecast import (
    DEFAULT_DRAWS,
    ForecastDistribution,
    ForecastEnvelope,
    ForecastQuery,
    forecast_distribution,
    forecast_envelope,
)
from .mcmc import McmcConfig, PosteriorSamples, chain_diagnostics, mh_chain
from .network import DamageState, HighwayNetwork, apply_damage, network_efficiency

__all__ = ["BetaProgressRegressor", "NetworkEfficiencyTransformer"]

_DEFAULTS = McmcConfig()


class BetaProgressRegressor(RegressorMixin, BaseEstimator):
    """Posterior Beta progress curve fitted by Metropolis-Hastings.

    ``X`` is elapsed hours since the trough (one column), ``y`` the
    normalized progress. Hyperparameters mirror :class:`McmcConfig`.

    Attributes
    ----------
    posterior_ : PosteriorSamples
    config_ : McmcConfig
    diagnostics_ : dict
    """

    def __init__(
        self,
        initial=_DEFAULTS.initial,
        prior_a=_DEFAULTS.prior_a,
        prior_b=_DEFAULTS.prior_b,
        prior_U=_DEFAULTS.prior_U,
        proposal_sd=_DEFAULTS.proposal_sd,
        likelihood_sd=_DEFAULTS.likelihood_sd,
        iterations=_DEFAULTS.iterations,
        burn_in=_DEFAULTS.burn_in,
        thin=_DEFAULTS.thin,
        seed=0,
    ):
        self.initial = initial
        self.prior_a = prior_a
        self.prior_b = prior_b
        self.prior_U = prior_U
        self.proposal_sd = proposal_sd
        self.likelihood_sd = likelihood_sd
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.seed = seed

    @classmethod
    def from_config(cls, cfg: McmcConfig) -> "BetaProgressRegressor":
        return cls(**cfg.to_dict())

    def fit(self, X, y):
        t, q = check_progress(X, y)
        self.config_ = McmcConfig(**self.get_params())
        self.posterior_ = mh_chain(self.config_, (t, q))
        self.diagnostics_ = chain_diagnostics(self.posterior_)
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        """Posterior-mean progress at the given hours."""
        check_is_fitted(self, "posterior_")
        t = check_hours(X)
        post = self.posterior_.samples
        total = np.zeros_like(t)
        for a, b, upper in post:
            total += betainc(a, b, np.clip(t / upper, 0.0, 1.0))
        return total / len(post)

    def forecast(self, t_r: float, q_r: float, q_s: float = 0.99,
                 n_draws: int = DEFAULT_DRAWS, seed=0) -> ForecastDistribution:
        check_is_fitted(self, "posterior_")
        return forecast_distribution(self.posterior_, ForecastQuery(t_r, q_r, q_s), n_draws, seed)

    def forecast_envelope(self, t_r: float, q_r: float, grid: Sequence[float] | None = None,
                          n_draws: int = DEFAULT_DRAWS, seed=0) -> ForecastEnvelope:
        check_is_fitted(self, "posterior_")
        return forecast_envelope(self.posterior_, t_r, q_r, grid, n_draws, seed)


class NetworkEfficiencyTransformer(TransformerMixin, BaseEstimator):
    """Map damage states to the efficiency of the damaged network.

    Parameters
    ----------
    network : HighwayNetwork
        Undamaged network.
    normalize : bool
        Divide by the baseline efficiency so an intact network maps to 1.
    """

    def __init__(self, network: HighwayNetwork | None = None, normalize: bool = False):
        self.network = network
        self.normalize = normalize

    def fit(self, X=None, y=None):
        if not isinstance(self.network, HighwayNetwork):
            raise TypeError("network must be a HighwayNetwork")
        self.baseline_ = network_efficiency(self.network)
        return self

    def transform(self, X: Sequence[DamageState]) -> np.ndarray:
        check_is_fitted(self, "baseline_")
        cache: dict = {}
        out = np.empty(len(X))
        for k, state in enumerate(X):
            if not isinstance(state, DamageState):
                raise TypeError(f"item {k} is not a DamageState")
            key = (state.damaged_nodes, state.damaged_edges)
            if key not in cache:
                cache[key] = network_efficiency(apply_damage(self.network, state))
            out[k] = cache[key]
        return out / self.baseline_ if self.normalize else out
