"""Bayesian updating of the progress-curve parameters (a, b, U).

Component-wise random-walk Metropolis-Hastings: every iteration perturbs
``a``, then ``b``, then ``U`` with its own Gaussian proposal and accepts or
rejects each move separately. Priors are independent Normals; the
likelihood treats observed progress, in percent, as Normal around the
model curve.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numba as nb
import numpy as np

from .beta import _betainc

__all__ = [
    "McmcError",
    "McmcConfig",
    "ProgressObservation",
    "PosteriorSamples",
    "log_prior",
    "log_likelihood",
    "mh_chain",
    "chain_diagnostics",
    "effective_sample_size",
    "prior_from_history",
]

logger = logging.getLogger(__name__)

PARAM_NAMES = ("a", "b", "U")
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_BLOCK = 65_536


class McmcError(RuntimeError):
    """The chain produced nothing usable (mis-tuned configuration)."""


@dataclass(frozen=True)
class McmcConfig:
    """Sampler inputs. Defaults are the published case-study settings.

    Priors are ``(mean, sd)`` pairs. ``likelihood_sd`` is in percentage
    points of progress.
    """

    initial: tuple[float, float, float] = (1.0, 2.0, 70.0)
    prior_a: tuple[float, float] = (1.0, 0.100)
    prior_b: tuple[float, float] = (1.772, 0.177)
    prior_U: tuple[float, float] = (68.0, 6.8)
    proposal_sd: tuple[float, float, float] = (0.0200, 0.0354, 1.36)
    likelihood_sd: float = 3.911
    iterations: int = 50_000
    burn_in: int = 10_000
    thin: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))
        object.__setattr__(self, "proposal_sd", tuple(float(v) for v in self.proposal_sd))
        for name in ("prior_a", "prior_b", "prior_U"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.initial) != 3 or len(self.proposal_sd) != 3:
            raise ValueError("initial and proposal_sd need one value per parameter (a, b, U)")
        sds = [self.prior_a[1], self.prior_b[1], self.prior_U[1], *self.proposal_sd, self.likelihood_sd]
        if not all(math.isfinite(s) and s > 0 for s in sds):
            raise ValueError("all standard deviations must be positive")
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def prior_means(self) -> np.ndarray:
        return np.array([self.prior_a[0], self.prior_b[0], self.prior_U[0]])

    @property
    def prior_sds(self) -> np.ndarray:
        return np.array([self.prior_a[1], self.prior_b[1], self.prior_U[1]])

    @property
    def n_retained(self) -> int:
        return -(-(self.iterations - self.burn_in) // self.thin)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "McmcConfig":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


@dataclass(frozen=True)
class ProgressObservation:
    t: float
    q: float

    def __post_init__(self):
        if not (self.t >= 0):
            raise ValueError(f"observation time must be >= 0, got {self.t}")
        if not (0.0 <= self.q <= 1.0):
            raise ValueError(f"observed progress must lie in [0, 1], got {self.q}")


@dataclass
class PosteriorSamples:
    """Retained (a, b, U) draws, one row each."""

    samples: np.ndarray
    acceptance_rate: float
    n_proposals: int = 0
    n_accepted: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.shape[0] == 0 or self.samples.shape[1] != 3:
            raise ValueError("posterior needs a non-empty (n, 3) array of (a, b, U)")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def a(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def b(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def U(self) -> np.ndarray:
        return self.samples[:, 2]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(PARAM_NAMES)
            for row in self.samples:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path, acceptance_rate: float = float("nan")) -> "PosteriorSamples":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != PARAM_NAMES:
                raise ValueError(f"{path}: expected header 'a,b,U', got {header!r}")
            rows = [[float(v) for v in row] for row in reader if row]
        return cls(np.array(rows, dtype=np.float64).reshape(-1, 3), acceptance_rate)


def _as_arrays(obs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(obs, tuple) and len(obs) == 2 and isinstance(obs[0], np.ndarray):
        t, q = obs
        return np.asarray(t, dtype=np.float64), np.asarray(q, dtype=np.float64)
    obs = list(obs)
    t = np.array([o.t for o in obs], dtype=np.float64)
    q = np.array([o.q for o in obs], dtype=np.float64)
    return t, q


@nb.njit(cache=True)
def _log_prior(a, b, upper, means, sds, t_max):
    if a <= 0.0 or b <= 0.0 or upper <= t_max:
        return -np.inf
    total = 0.0
    vals = (a, b, upper)
    for k in range(3):
        z = (vals[k] - means[k]) / sds[k]
        total += -0.5 * z * z - math.log(sds[k]) - _LOG_SQRT_2PI
    return total


@nb.njit(cache=True)
def _log_likelihood(a, b, upper, t, q, sigma):
    total = 0.0
    norm = -math.log(sigma) - _LOG_SQRT_2PI
    for i in range(t.size):
        r = (100.0 * q[i] - 100.0 * _betainc(a, b, t[i] / upper)) / sigma
        total += norm - 0.5 * r * r
    return total


@nb.njit(cache=True)
def _mh_block(state, cur_lp, cur_ll, means, sds, prop_sd, sigma, t, q, t_max,
              normals, log_u, start, burn_in, thin, out, n_out, accepted):
    for i in range(normals.shape[0]):
        for k in range(3):
            proposal = state.copy()
            proposal[k] += prop_sd[k] * normals[i, k]
            lp = _log_prior(proposal[0], proposal[1], proposal[2], means, sds, t_max)
            if lp == -np.inf:
                continue
            ll = _log_likelihood(proposal[0], proposal[1], proposal[2], t, q, sigma)
            if log_u[i, k] < (lp + ll) - (cur_lp + cur_ll):
                state[:] = proposal
                cur_lp = lp
                cur_ll = ll
                accepted[0] += 1
                if start + i >= burn_in:
                    accepted[1] += 1
        it = start + i
        if it >= burn_in and (it - burn_in) % thin == 0:
            out[n_out, :] = state
            n_out += 1
    return cur_lp, cur_ll, n_out


def log_prior(params: Sequence[float], cfg: McmcConfig, obs: Iterable = ()) -> float:
    """Sum of Normal prior log-densities; ``-inf`` outside the support.

    The support requires ``a > 0``, ``b > 0`` and ``U`` beyond the latest
    observation time.
    """
    t, _ = _as_arrays(obs)
    t_max = float(t.max()) if t.size else 0.0
    a, b, upper = (float(v) for v in params)
    return float(_log_prior(a, b, upper, cfg.prior_means, cfg.prior_sds, t_max))


def log_likelihood(params: Sequence[float], obs: Iterable, sigma: float) -> float:
    """Normal log-likelihood of observed progress in percentage points."""
    if not sigma > 0:
        raise ValueError("likelihood sd must be positive")
    t, q = _as_arrays(obs)
    a, b, upper = (float(v) for v in params)
    return float(_log_likelihood(a, b, upper, t, q, float(sigma)))


def mh_chain(cfg: McmcConfig, obs: Iterable = ()) -> PosteriorSamples:
    """Run one chain and return the retained post-burn-in, thinned draws."""
    t, q = _as_arrays(obs)
    t_max = float(t.max()) if t.size else 0.0
    means, sds = cfg.prior_means, cfg.prior_sds
    prop_sd = np.array(cfg.proposal_sd)

    state = np.array(cfg.initial, dtype=np.float64)
    if state[2] <= t_max:
        moved = t_max + prop_sd[2]
        logger.warning("initial U=%g does not exceed last observation at %g h; starting at U=%g",
                       state[2], t_max, moved)
        state[2] = moved
    cur_lp = _log_prior(state[0], state[1], state[2], means, sds, t_max)
    if cur_lp == -np.inf:
        raise McmcError(f"initial value {tuple(state)} lies outside the prior support")
    cur_ll = _log_likelihood(state[0], state[1], state[2], t, q, cfg.likelihood_sd)

    rng = np.random.default_rng(cfg.seed)
    out = np.empty((cfg.n_retained, 3))
    n_out = 0
    accepted = np.zeros(2, dtype=np.int64)
    for start in range(0, cfg.iterations, _BLOCK):
        size = min(_BLOCK, cfg.iterations - start)
        normals = rng.standard_normal((size, 3))
        log_u = np.log(rng.random((size, 3)))
        cur_lp, cur_ll, n_out = _mh_block(
            state, cur_lp, cur_ll, means, sds, prop_sd, cfg.likelihood_sd, t, q, t_max,
            normals, log_u, start, cfg.burn_in, cfg.thin, out, n_out, accepted,
        )

    n_proposals = 3 * cfg.iterations
    if accepted[1] == 0:
        raise McmcError(
            "no proposal was accepted after burn-in; shrink proposal_sd or check "
            "that the priors and observations are compatible"
        )
    return PosteriorSamples(
        out[:n_out],
        acceptance_rate=float(accepted[0]) / n_proposals,
        n_proposals=n_proposals,
        n_accepted=int(accepted[0]),
    )


def effective_sample_size(x: np.ndarray) -> float:
    """ESS from the autocorrelation sum truncated at the first negative lag."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    centered = x - x.mean()
    var = float(centered @ centered)
    if n < 2 or var == 0.0:
        return 1.0
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n]
    rho = acov / acov[0]
    negative = np.flatnonzero(rho[1:] < 0)
    stop = negative[0] + 1 if negative.size else n
    tau = 1.0 + 2.0 * rho[1:stop].sum()
    return float(n / tau)


def chain_diagnostics(s: PosteriorSamples | np.ndarray) -> dict:
    """Acceptance rate and per-parameter mean, sd and effective sample size."""
    if isinstance(s, PosteriorSamples):
        samples, rate = s.samples, s.acceptance_rate
    else:
        samples = np.asarray(s, dtype=np.float64)
        samples = samples.reshape(-1, 1) if samples.ndim == 1 else samples
        moves = np.any(np.diff(samples, axis=0) != 0, axis=1)
        rate = float(moves.mean()) if moves.size else 0.0
    if samples.shape[0] == 0:
        raise ValueError("no samples")
    names = PARAM_NAMES if samples.shape[1] == 3 else tuple(f"x{i}" for i in range(samples.shape[1]))
    ddof = 1 if samples.shape[0] > 1 else 0
    summary = {"acceptance_rate": float(rate), "n_samples": int(samples.shape[0]), "parameters": {}}
    for j, name in enumerate(names):
        col = samples[:, j]
        summary["parameters"][name] = {
            "mean": float(col.mean()),
            "sd": float(col.std(ddof=ddof)),
            "ess": effective_sample_size(col),
        }
    return summary


def prior_from_history(
    histories: Iterable[tuple[np.ndarray, np.ndarray, float]],
    base: McmcConfig | None = None,
    min_relative_sd: float = 0.1,
    seed: int = 0,
) -> McmcConfig:
    """Build priors from the complete progress curves of past events.

    Parameters
    ----------
    histories : iterable of (t, q, duration)
        Observed hours, progress in [0, 1] and the observed completion
        duration of each past event.
    base : McmcConfig, optional
        Run-length and seed settings to keep; priors, proposals, initial
        value and likelihood sd are replaced.
    min_relative_sd : float
        Floor on each prior sd as a fraction of its mean.

    Returns
    -------
    McmcConfig
        Prior means are the average per-event fit, sds the spread across
        events (floored) and proposal sds a fifth of the prior sds. The
        likelihood sd is the RMS fit residual in percentage points,
        widened by the square root of the residuals' mean integrated
        autocorrelation time (n / ESS).

    Notes
    -----
    Each event is fitted under vague priors on ``a`` and ``b`` with ``U``
    held close to the event's observed duration, since a finished curve
    pins its own end.

    Hourly progress residuals come in runs (the curve moves in steps), so
    treating them as independent overstates how much each hour tells the
    sampler. Scaling the variance by n / ESS restores the information
    content of an independent sample of size ESS.
    """
    base = base or McmcConfig()
    fits, residuals, inflation = [], [], []
    for k, (t, q, duration) in enumerate(histories):
        t = np.asarray(t, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64)
        duration = float(duration)
        if not duration > 0 or t.size == 0:
            raise ValueError(f"history {k}: need observations and a positive duration")
        cfg = McmcConfig(
            initial=(1.0, 1.0, duration * 1.001),
            prior_a=(1.0, 10.0),
            prior_b=(1.0, 10.0),
            prior_U=(duration, 0.01 * duration),
            proposal_sd=(0.05, 0.05, 0.002 * duration),
            likelihood_sd=base.likelihood_sd,
            iterations=base.iterations,
            burn_in=base.burn_in,
            thin=base.thin,
            seed=seed + k,
        )
        est = mh_chain(cfg, (t, q)).samples.mean(axis=0)
        fits.append(est)
        model = np.array([_betainc(est[0], est[1], min(x / est[2], 1.0)) for x in t])
        resid = 100.0 * (q - model)
        residuals.append(resid)
        inflation.append(resid.size / effective_sample_size(resid))
    if not fits:
        raise ValueError("no historical curves given")
    fits = np.array(fits)
    means = fits.mean(axis=0)
    spread = fits.std(axis=0, ddof=1) if len(fits) > 1 else np.zeros(3)
    sds = np.maximum(spread, min_relative_sd * means)
    sigma = float(np.sqrt(np.mean(np.concatenate(residuals) ** 2) * np.mean(inflation)))
    return McmcConfig(
        initial=tuple(means),
        prior_a=(means[0], sds[0]),
        prior_b=(means[1], sds[1]),
        prior_U=(means[2], sds[2]),
        proposal_sd=tuple(0.2 * sds),
        likelihood_sd=max(sigma, 1e-3),
        iterations=base.iterations,
        burn_in=base.burn_in,
        thin=base.thin,
        seed=base.seed,
    )
