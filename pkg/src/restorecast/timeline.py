"""Hourly damage timeline, functionality series and restoration-progress curve."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Hashable, NamedTuple, Sequence

import numpy as np

from .network import DamageState, HighwayNetwork, apply_damage, network_efficiency

__all__ = [
    "TimelineError",
    "ComponentRef",
    "IncidentRecord",
    "DamageTimeline",
    "FunctionalitySeries",
    "RestorationProgressCurve",
    "round_to_hour",
    "expand_incidents",
    "functionality_series",
    "extract_restoration_curve",
]

HOUR = timedelta(hours=1)


class TimelineError(ValueError):
    pass


class ComponentRef(NamedTuple):
    kind: str  # "node" or "edge"
    id: Hashable


@dataclass(frozen=True)
class IncidentRecord:
    id: Hashable
    longitude: float
    latitude: float
    start: datetime
    end: datetime
    component: ComponentRef | None = None

    def __post_init__(self):
        if self.start > self.end:
            raise TimelineError(f"incident {self.id!r}: end {self.end} is before start {self.start}")
        if not (math.isfinite(self.latitude) and abs(self.latitude) <= 90):
            raise TimelineError(f"incident {self.id!r}: latitude {self.latitude} out of range")
        if not (math.isfinite(self.longitude) and abs(self.longitude) <= 180):
            raise TimelineError(f"incident {self.id!r}: longitude {self.longitude} out of range")


@dataclass(frozen=True)
class DamageTimeline:
    timesteps: tuple
    states: tuple

    def __len__(self) -> int:
        return len(self.timesteps)


@dataclass(frozen=True)
class FunctionalitySeries:
    baseline_efficiency: float
    timestamps: tuple
    efficiency: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def points(self) -> list[tuple[datetime, float]]:
        return list(zip(self.timestamps, self.efficiency.tolist()))


@dataclass(frozen=True)
class RestorationProgressCurve:
    """Normalized progress from the functionality trough to completion."""

    t0: datetime
    completion_time: datetime
    duration_hours: float
    hours: np.ndarray = field(repr=False)
    progress: np.ndarray = field(repr=False)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.hours.tolist(), self.progress.tolist()))

    def observations(self, up_to: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """``(t, q)`` arrays for every point at or before ``up_to`` hours."""
        keep = slice(None) if up_to is None else self.hours <= up_to
        return self.hours[keep].copy(), self.progress[keep].copy()

    def progress_at(self, hours: float) -> float:
        """Latest observed progress at or before ``hours``."""
        idx = np.searchsorted(self.hours, hours, side="right") - 1
        if idx < 0:
            raise TimelineError(f"no observation at or before {hours} h")
        return float(self.progress[idx])


def round_to_hour(ts: datetime) -> datetime:
    """Round to the nearest whole hour; exactly half past rounds up."""
    floor = ts.replace(minute=0, second=0, microsecond=0)
    if ts - floor >= timedelta(minutes=30):
        floor += HOUR
    return floor


def _hour_span(first: datetime, last: datetime) -> int:
    return int((last - first) // HOUR)


def expand_incidents(
    incidents: Sequence[IncidentRecord], base: HighwayNetwork, trailing_hours: int = 0
) -> DamageTimeline:
    """One damage state per hour between the rounded earliest start and latest end.

    An incident is present in every hour from its rounded start to its
    rounded end, both ends included. The last hour therefore always holds
    at least one incident; ``trailing_hours`` appends that many hours after
    it so the cleared network is observed too.
    """
    if trailing_hours < 0:
        raise TimelineError("trailing_hours must be >= 0")
    if not incidents:
        raise TimelineError("no incidents to expand")
    for inc in incidents:
        if inc.component is None:
            raise TimelineError(f"incident {inc.id!r} is not snapped to a network component")
        kind, cid = inc.component
        if kind == "node":
            known = cid in base._index
        elif kind == "edge":
            known = cid in base.edges
        else:
            raise TimelineError(f"incident {inc.id!r}: unknown component kind {kind!r}")
        if not known:
            raise TimelineError(f"incident {inc.id!r} references unknown {kind} {cid!r}")

    spans = [(round_to_hour(inc.start), round_to_hour(inc.end)) for inc in incidents]
    first = min(s for s, _ in spans)
    last = max(e for _, e in spans)
    n_steps = _hour_span(first, last) + 1 + trailing_hours
    nodes = [set() for _ in range(n_steps)]
    edges = [set() for _ in range(n_steps)]
    for inc, (s, e) in zip(incidents, spans):
        target = nodes if inc.component.kind == "node" else edges
        for k in range(_hour_span(first, s), _hour_span(first, e) + 1):
            target[k].add(inc.component.id)

    timesteps = tuple(first + k * HOUR for k in range(n_steps))
    states = tuple(
        DamageState(frozenset(nodes[k]), frozenset(edges[k]), timesteps[k]) for k in range(n_steps)
    )
    return DamageTimeline(timesteps, states)


def functionality_series(base: HighwayNetwork, tl: DamageTimeline) -> FunctionalitySeries:
    """Network efficiency of the damaged network at every timestep."""
    baseline = network_efficiency(base)
    cache: dict = {(frozenset(), frozenset()): baseline}
    values = np.empty(len(tl))
    for k, state in enumerate(tl.states):
        key = (state.damaged_nodes, state.damaged_edges)
        if key not in cache:
            cache[key] = network_efficiency(apply_damage(base, state))
        values[k] = cache[key]
    return FunctionalitySeries(baseline, tuple(tl.timesteps), values)


def extract_restoration_curve(
    series: FunctionalitySeries, completion_fraction: float = 0.99
) -> RestorationProgressCurve:
    """Normalize the recovery from the efficiency trough to declared completion.

    Restoration starts at the (earliest) minimum-efficiency hour and is
    complete at the first later hour whose efficiency reaches
    ``completion_fraction`` of the baseline. Progress is rescaled so the
    trough maps to 0 and the completion hour to 1.
    """
    if not 0 < completion_fraction <= 1:
        raise TimelineError(f"completion_fraction must lie in (0, 1], got {completion_fraction}")
    eff = np.asarray(series.efficiency, dtype=np.float64)
    if eff.size == 0:
        raise TimelineError("empty functionality series")
    i0 = int(np.argmin(eff))
    if i0 == eff.size - 1:
        raise TimelineError("efficiency minimum is at the last timestep; no restoration phase")
    threshold = completion_fraction * series.baseline_efficiency
    reached = np.flatnonzero(eff[i0:] >= threshold)
    if reached.size == 0:
        raise TimelineError(
            f"efficiency never recovers to {completion_fraction:g} x baseline "
            f"({threshold:.6g}) after the trough"
        )
    i1 = i0 + int(reached[0])
    if i1 == i0:
        raise TimelineError("trough already meets the completion threshold; no restoration phase")

    e_min, e_done = eff[i0], eff[i1]
    window = eff[i0 : i1 + 1]
    progress = np.clip((window - e_min) / (e_done - e_min), 0.0, 1.0)
    t0 = series.timestamps[i0]
    completion = series.timestamps[i1]
    hours = np.array([(ts - t0) / HOUR for ts in series.timestamps[i0 : i1 + 1]], dtype=np.float64)
    return RestorationProgressCurve(t0, completion, (completion - t0) / HOUR, hours, progress)
