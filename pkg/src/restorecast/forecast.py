"""Earned-schedule duration forecasts and their Monte Carlo envelopes.

``PT(q)`` below is the planned hour at which a progress curve reaches
level ``q`` (the scaled inverse CDF). With actual elapsed time ``t_r`` at
progress ``q_r`` the schedule performance index is ``PT(q_r) / t_r`` and
the remaining planned time ``PT(q_s) - PT(q_r)`` is stretched by its
inverse.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .beta import BetaRestorationModel, beta_inverse_cdf, inverse_hours_many
from .mcmc import PosteriorSamples

__all__ = [
    "ForecastError",
    "DegenerateForecastError",
    "ForecastQuery",
    "ForecastDistribution",
    "ForecastEnvelope",
    "earned_schedule_duration",
    "forecast_distribution",
    "forecast_envelope",
]

MIN_PLANNED_HOURS = 1e-9
DEFAULT_DRAWS = 10_000


class ForecastError(ValueError):
    pass


class DegenerateForecastError(ForecastError, RuntimeError):
    """Every posterior draw is unusable for the query."""


@dataclass(frozen=True)
class ForecastQuery:
    t_r: float
    q_r: float
    q_s: float

    def __post_init__(self):
        if not self.t_r > 0:
            raise ForecastError(f"elapsed time t_r must be positive, got {self.t_r}")
        if not 0 < self.q_r <= self.q_s <= 1:
            raise ForecastError(
                f"need 0 < q_r <= q_s <= 1, got q_r={self.q_r}, q_s={self.q_s}"
            )


@dataclass
class ForecastDistribution:
    target: float
    draws: np.ndarray = field(repr=False)
    mean: float
    ci95: tuple[float, float]
    rejected: int = 0


@dataclass
class ForecastEnvelope:
    t_r: float
    q_r: float
    levels: list[ForecastDistribution]
    n_draws: int
    seed: int
    rejected: int = 0

    @property
    def grid(self) -> np.ndarray:
        return np.array([lvl.target for lvl in self.levels])

    @property
    def means(self) -> np.ndarray:
        return np.array([lvl.mean for lvl in self.levels])

    def level(self, q_s: float) -> ForecastDistribution:
        for lvl in self.levels:
            if lvl.target == q_s:
                return lvl
        raise KeyError(q_s)

    def metadata(self) -> dict:
        return {
            "t_r": self.t_r,
            "q_r": self.q_r,
            "n_draws": self.n_draws,
            "seed": self.seed,
            "rejected_draws": self.rejected,
        }

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["q_s", "mean_hours", "ci_low", "ci_high"])
            for lvl in self.levels:
                writer.writerow([repr(float(v)) for v in (lvl.target, lvl.mean, *lvl.ci95)])

    def write_metadata(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")


def earned_schedule_duration(model: BetaRestorationModel, query: ForecastQuery) -> float:
    """Forecast hours from restoration start until progress ``q_s``."""
    planned_now = beta_inverse_cdf(query.q_r, model)
    if not planned_now > 0:
        raise ForecastError(
            f"planned time at progress {query.q_r} is zero; the schedule index is undefined"
        )
    planned_target = beta_inverse_cdf(query.q_s, model)
    remaining = max(planned_target - planned_now, 0.0)
    return query.t_r + remaining / (planned_now / query.t_r)


def _resample(post: PosteriorSamples, q_r: float, n_draws: int, seed) -> tuple[np.ndarray, np.ndarray, int]:
    planned_now = inverse_hours_many(float(q_r), post.a, post.b, post.U)
    usable = planned_now >= MIN_PLANNED_HOURS
    if not usable.any():
        raise DegenerateForecastError(
            f"every posterior sample plans zero time for progress {q_r}; nothing to forecast"
        )
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(post), n_draws)
    rejected = 0
    bad = ~usable[idx]
    while bad.any():
        n_bad = int(bad.sum())
        rejected += n_bad
        idx[bad] = rng.integers(0, len(post), n_bad)
        bad = ~usable[idx]
    return idx, planned_now, rejected


def _summarize(q_s: float, draws: np.ndarray, rejected: int) -> ForecastDistribution:
    ordered = np.sort(draws)
    low, high = np.percentile(ordered, [2.5, 97.5])
    return ForecastDistribution(q_s, draws, float(ordered.mean()), (float(low), float(high)), rejected)


def _durations(post, t_r, q_s, planned_now, idx) -> np.ndarray:
    planned_target = inverse_hours_many(float(q_s), post.a, post.b, post.U)
    remaining = np.maximum(planned_target - planned_now, 0.0)
    per_sample = t_r + remaining / (planned_now / t_r)
    return per_sample[idx]


def _check_draws(n_draws: int) -> None:
    if n_draws < 1000:
        raise ForecastError(f"n_draws must be at least 1000, got {n_draws}")


def forecast_distribution(
    post: PosteriorSamples,
    query: ForecastQuery,
    n_draws: int = DEFAULT_DRAWS,
    seed=0,
) -> ForecastDistribution:
    """Monte Carlo distribution of the forecast duration to ``query.q_s``.

    Parameter triples are drawn uniformly, with replacement, from the
    posterior. Triples that plan (almost) no time for ``q_r`` would divide
    by zero and are redrawn; the count is kept in ``rejected``.
    """
    _check_draws(n_draws)
    idx, planned_now, rejected = _resample(post, query.q_r, n_draws, seed)
    draws = _durations(post, query.t_r, query.q_s, planned_now, idx)
    return _summarize(query.q_s, draws, rejected)


def forecast_envelope(
    post: PosteriorSamples,
    t_r: float,
    q_r: float,
    grid: Sequence[float] | None = None,
    n_draws: int = DEFAULT_DRAWS,
    seed=0,
) -> ForecastEnvelope:
    """Forecast distributions over a grid of target levels.

    Every level reuses the same posterior draws, so each level's result is
    what :func:`forecast_distribution` gives for that level and seed, and
    the mean is nondecreasing along the grid.
    """
    _check_draws(n_draws)
    if grid is None:
        grid = np.linspace(q_r, max(q_r, 0.999), 50)
    grid = [float(g) for g in grid]
    if not grid:
        raise ForecastError("empty target grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ForecastError("target grid must be sorted ascending")
    ForecastQuery(t_r, q_r, grid[0])
    ForecastQuery(t_r, q_r, grid[-1])

    idx, planned_now, rejected = _resample(post, q_r, n_draws, seed)
    levels = [
        _summarize(q_s, _durations(post, t_r, q_s, planned_now, idx), rejected) for q_s in grid
    ]
    return ForecastEnvelope(float(t_r), float(q_r), levels, n_draws, seed, rejected)
