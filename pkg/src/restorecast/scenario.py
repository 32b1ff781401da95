"""Synthetic restoration scenarios with known ground truth.

A scenario is a county-scale network geometry plus a stream of incident
reports. Each incident sits on its own edge. Reports appear over a damage
window; restoration starts when the last one appears, and the k-th of n
clearances happens when the known Beta(a, b, 0, U) curve reaches k/n, so
the fraction of cleared incidents tracks that CDF and the last incident
clears exactly U hours into restoration.

Incidents only land on edges whose removal alone costs at least
``min_edge_impact`` of the baseline efficiency. With the default above the
1% completion slack, the network cannot pass a 99% completion test while
any incident is open, so the observed completion is the last clearance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from typing import Any

import networkx as nx
import numpy as np

from .beta import BetaRestorationModel, betainc_inv
from .ingest import EdgeGeometry, NetworkGeometry, snap_incident
from .network import DamageState, apply_damage, network_efficiency
from .timeline import ComponentRef, IncidentRecord

__all__ = ["ScenarioError", "ScenarioSpec", "Scenario", "generate_scenario", "TOPOLOGIES"]

TOPOLOGIES = ("ring_chords", "grid", "random_regular")
_METERS_PER_DEG_LAT = math.pi / 180.0 * 6_371_008.8


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    n_nodes: int = 100
    n_edges: int = 110
    topology: str = "ring_chords"
    truth: tuple[float, float, float] = (2.0, 2.0, 68.0)
    incident_count: int = 50
    damage_window: float = 24.0
    seed: int = 0
    origin: str = "2017-08-26T00:00:00"
    center: tuple[float, float] = (-95.3698, 29.7604)
    spacing_m: float = 2_000.0
    jitter_m: float = 20.0
    snap_tolerance_m: float = 250.0
    min_edge_impact: float = 0.015

    def __post_init__(self):
        object.__setattr__(self, "truth", tuple(float(v) for v in self.truth))
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        self.validate()

    def validate(self) -> None:
        n, m = self.n_nodes, self.n_edges
        if self.topology not in TOPOLOGIES:
            raise ScenarioError(f"unknown topology {self.topology!r}; choose from {', '.join(TOPOLOGIES)}")
        if n < 3:
            raise ScenarioError("need at least 3 nodes")
        if self.topology == "ring_chords" and not n <= m <= n * (n - 1) // 2:
            raise ScenarioError(f"ring_chords with {n} nodes needs {n} <= n_edges <= {n * (n - 1) // 2}")
        if self.topology == "grid":
            rows, cols = _grid_shape(n)
            full = rows * (cols - 1) + cols * (rows - 1)
            if not n - 1 <= m <= full:
                raise ScenarioError(f"grid {rows}x{cols} needs {n - 1} <= n_edges <= {full}")
        if self.topology == "random_regular":
            if (2 * m) % n:
                raise ScenarioError("random_regular needs 2*n_edges divisible by n_nodes")
            degree = 2 * m // n
            if not 2 < degree < n:
                raise ScenarioError(f"random_regular degree {degree} must lie in (2, {n})")
        if not 1 <= self.incident_count <= m:
            raise ScenarioError(f"incident_count must lie in [1, n_edges={m}]")
        try:
            BetaRestorationModel(*self.truth)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad truth model: {exc}") from exc
        if not self.damage_window >= 0:
            raise ScenarioError("damage_window must be >= 0")
        if not 0 <= self.min_edge_impact < 1:
            raise ScenarioError("min_edge_impact must lie in [0, 1)")
        if not self.spacing_m > 4 * self.snap_tolerance_m:
            raise ScenarioError("spacing_m must exceed 4 x snap_tolerance_m so edges snap unambiguously")
        if self.jitter_m < 0 or self.jitter_m >= self.snap_tolerance_m:
            raise ScenarioError("jitter_m must lie in [0, snap_tolerance_m)")
        try:
            datetime.fromisoformat(self.origin)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad origin timestamp {self.origin!r}") from exc

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ScenarioError(f"unknown scenario field(s): {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from exc


@dataclass
class Scenario:
    geometry: NetworkGeometry
    incidents: list[IncidentRecord]
    truth: dict[str, Any] = field(default_factory=dict)


def _grid_shape(n: int) -> tuple[int, int]:
    rows = int(math.isqrt(n))
    while n % rows:
        rows -= 1
    return rows, n // rows


def _topology(spec: ScenarioSpec, rng: np.random.Generator) -> tuple[list[tuple[int, int]], np.ndarray]:
    """Edge list and planar positions in meters (centered on 0)."""
    n, m = spec.n_nodes, spec.n_edges
    if spec.topology == "ring_chords":
        radius = n * spec.spacing_m / (2 * math.pi)
        angle = 2 * math.pi * np.arange(n) / n
        pos = radius * np.column_stack([np.cos(angle), np.sin(angle)])
        edges = [(i, (i + 1) % n) for i in range(n)]
        present = {frozenset(e) for e in edges}
        candidates = [(i, j) for i in range(n) for j in range(i + 2, n) if frozenset((i, j)) not in present]
        chosen = rng.choice(len(candidates), size=m - n, replace=False) if m > n else []
        edges += [candidates[k] for k in sorted(chosen)]
        return edges, pos

    if spec.topology == "grid":
        rows, cols = _grid_shape(n)
        step = spec.spacing_m
        pos = np.array([((c - (cols - 1) / 2) * step, (r - (rows - 1) / 2) * step)
                        for r in range(rows) for c in range(cols)])
        lattice = [(r * cols + c, r * cols + c + 1) for r in range(rows) for c in range(cols - 1)]
        lattice += [(r * cols + c, (r + 1) * cols + c) for r in range(rows - 1) for c in range(cols)]
        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        for k, (u, v) in enumerate(lattice):
            graph.add_edge(u, v, weight=float(rng.random()), order=k)
        tree = {frozenset(e) for e in nx.minimum_spanning_edges(graph, data=False)}
        rest = [e for e in lattice if frozenset(e) not in tree]
        extra = rng.choice(len(rest), size=m - len(tree), replace=False) if m > len(tree) else []
        keep = tree | {frozenset(rest[k]) for k in extra}
        return [e for e in lattice if frozenset(e) in keep], pos

    degree = 2 * m // n
    for attempt in range(100):
        graph = nx.random_regular_graph(degree, n, seed=int(rng.integers(2**32)))
        if nx.is_connected(graph):
            break
    else:
        raise ScenarioError("could not draw a connected random regular graph")
    half = math.sqrt(n) * spec.spacing_m / 2
    pos = rng.uniform(-half, half, size=(n, 2))
    return sorted(tuple(sorted(e)) for e in graph.edges()), pos


def _to_lonlat(xy: np.ndarray, center: tuple[float, float]) -> np.ndarray:
    lon0, lat0 = center
    lon = lon0 + xy[..., 0] / (_METERS_PER_DEG_LAT * math.cos(math.radians(lat0)))
    lat = lat0 + xy[..., 1] / _METERS_PER_DEG_LAT
    return np.stack([lon, lat], axis=-1)


def _incident_point(geom, eid, p, q, rng, spec) -> tuple[float, float]:
    # a point along the segment (plus jitter) that snaps back to this edge
    direction = q - p
    normal = np.array([-direction[1], direction[0]]) / (np.hypot(*direction) or 1.0)
    for frac in (0.5, 0.35, 0.65, 0.25, 0.75, 0.15, 0.85):
        offset = spec.jitter_m * (2 * rng.random() - 1)
        xy = p + frac * direction + offset * normal
        lon, lat = (float(v) for v in _to_lonlat(xy, spec.center))
        if snap_incident((lon, lat), geom, spec.snap_tolerance_m) == ComponentRef("edge", eid):
            return lon, lat
    raise ScenarioError(f"edge {eid} has no point that snaps unambiguously; spread the network out")


def _eligible_edges(geom: NetworkGeometry, min_impact: float) -> np.ndarray:
    if min_impact <= 0:
        return np.arange(len(geom.edges))
    net = geom.to_network()
    e0 = network_efficiency(net)
    keep = [
        k for k, eid in enumerate(net.edge_ids)
        if network_efficiency(apply_damage(net, DamageState(damaged_edges={eid}))) <= (1 - min_impact) * e0
    ]
    return np.array(keep, dtype=np.intp)


def generate_scenario(spec: ScenarioSpec) -> Scenario:
    """Draw a network, incidents and the ground-truth record for ``spec``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    edges, pos = _topology(spec, rng)
    lonlat = _to_lonlat(pos, spec.center)

    nodes = {i: (float(lonlat[i, 0]), float(lonlat[i, 1])) for i in range(spec.n_nodes)}
    edge_geoms = {k: EdgeGeometry(u, v, (nodes[u], nodes[v])) for k, (u, v) in enumerate(edges)}
    geom = NetworkGeometry(nodes, edge_geoms)

    truth = BetaRestorationModel(*spec.truth)
    n = spec.incident_count
    eligible = _eligible_edges(geom, spec.min_edge_impact)
    if eligible.size < n:
        raise ScenarioError(
            f"only {eligible.size} edges cost at least {spec.min_edge_impact:g} of the baseline "
            f"efficiency; cannot place {n} incidents"
        )
    hit = np.sort(rng.choice(eligible, size=n, replace=False))

    # appearance times in (0, W], the last one exactly at W
    raw = rng.random(n)
    appear = spec.damage_window * raw / raw.max()
    # inverse transform at the upper stratum edges k/n, so the last
    # clearance lands exactly on U
    strata = np.arange(1, n + 1) / n
    clear = np.array([truth.U * betainc_inv(truth.a, truth.b, float(u)) for u in strata])
    clear = clear[rng.permutation(n)]

    origin = datetime.fromisoformat(spec.origin)
    restoration_start = origin + timedelta(hours=spec.damage_window)
    incidents = []
    for k, eid in enumerate(hit.tolist()):
        u, v = edges[eid]
        lon, lat = _incident_point(geom, eid, pos[u], pos[v], rng, spec)
        start = origin + timedelta(seconds=round(appear[k] * 3600))
        end = restoration_start + timedelta(seconds=round(clear[k] * 3600))
        incidents.append(IncidentRecord(f"inc{k:04d}", lon, lat, start, end, ComponentRef("edge", eid)))

    completion = float((max(i.end for i in incidents) - restoration_start) / timedelta(hours=1))
    record = {
        "spec": spec.to_dict(),
        "truth_model": {"a": truth.a, "b": truth.b, "L": 0.0, "U": truth.U},
        "restoration_start": restoration_start.isoformat(timespec="seconds"),
        "completion_hours": completion,
        # an incident still counts in the hour its end rounds to
        "observed_duration_hours": float(math.floor(completion + 0.5) + 1),
        "clearance_offsets_hours": sorted(float((i.end - restoration_start) / timedelta(hours=1)) for i in incidents),
        "damaged_edges": hit.tolist(),
    }
    return Scenario(geom, incidents, record)
