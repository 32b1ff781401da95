"""Network geometry / incident file IO and snapping of incidents to components.

Geometry JSON::

    {"nodes": [{"id": ..., "lon": ..., "lat": ...}, ...],
     "edges": [{"id": ..., "from": ..., "to": ..., "polyline": [[lon, lat], ...]}, ...]}

``polyline`` is optional; without it the edge is the straight segment
between its end nodes.

Incident CSV header: ``id,longitude,latitude,start,end`` with ISO-8601
timestamps.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .network import HighwayNetwork, build_network
from .timeline import ComponentRef, IncidentRecord, TimelineError

__all__ = [
    "IngestError",
    "EdgeGeometry",
    "NetworkGeometry",
    "parse_network_geometry",
    "write_network_geometry",
    "parse_incidents",
    "write_incidents",
    "snap_incident",
    "snap_incidents",
    "local_distance_m",
    "INCIDENT_HEADER",
    "DEFAULT_SNAP_TOLERANCE_M",
]

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_008.8
DEFAULT_SNAP_TOLERANCE_M = 250.0
INCIDENT_HEADER = ("id", "longitude", "latitude", "start", "end")


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeGeometry:
    source: Hashable
    target: Hashable
    polyline: tuple = ()
    explicit_polyline: bool = False


@dataclass(frozen=True)
class NetworkGeometry:
    nodes: Mapping[Hashable, tuple[float, float]]
    edges: Mapping[Hashable, EdgeGeometry]

    def to_network(self) -> HighwayNetwork:
        return build_network(
            list(self.nodes),
            [(e.source, e.target) for e in self.edges.values()],
            list(self.edges),
        )

    def edge_points(self, edge_id: Hashable) -> tuple:
        return self.edges[edge_id].polyline

    @cached_property
    def _node_arrays(self):
        ids = list(self.nodes)
        coords = np.array([self.nodes[i] for i in ids], dtype=np.float64).reshape(-1, 2)
        return ids, coords

    @cached_property
    def _segment_arrays(self):
        ids = list(self.edges)
        owner, starts, ends = [], [], []
        for k, eid in enumerate(ids):
            pts = self.edges[eid].polyline
            for p, q in zip(pts, pts[1:]):
                owner.append(k)
                starts.append(p)
                ends.append(q)
        return (
            ids,
            np.array(owner, dtype=np.intp),
            np.array(starts, dtype=np.float64).reshape(-1, 2),
            np.array(ends, dtype=np.float64).reshape(-1, 2),
        )


def _project(lonlat: np.ndarray, origin: tuple[float, float]) -> np.ndarray:
    # equirectangular projection around `origin`, in meters
    lon0, lat0 = origin
    scale = math.pi / 180.0 * EARTH_RADIUS_M
    xy = np.empty_like(lonlat, dtype=np.float64)
    xy[..., 0] = (lonlat[..., 0] - lon0) * scale * math.cos(math.radians(lat0))
    xy[..., 1] = (lonlat[..., 1] - lat0) * scale
    return xy


def local_distance_m(p: Sequence[float], q: Sequence[float]) -> float:
    """Equirectangular distance in meters between two (lon, lat) points."""
    xy = _project(np.array([q], dtype=np.float64), (float(p[0]), float(p[1])))
    return float(np.hypot(xy[0, 0], xy[0, 1]))


def _check_coordinate(lon, lat, where: str) -> tuple[float, float]:
    try:
        lon, lat = float(lon), float(lat)
    except (TypeError, ValueError) as exc:
        raise IngestError(f"{where}: coordinate is not numeric") from exc
    if not (math.isfinite(lon) and abs(lon) <= 180):
        raise IngestError(f"{where}: longitude {lon} out of range")
    if not (math.isfinite(lat) and abs(lat) <= 90):
        raise IngestError(f"{where}: latitude {lat} out of range")
    return lon, lat


def _hashable_id(value, where: str):
    if isinstance(value, (list, dict)) or value is None:
        raise IngestError(f"{where}: id must be a string or number, got {value!r}")
    return value


def geometry_from_dict(doc: Mapping, endpoint_tolerance_m: float = DEFAULT_SNAP_TOLERANCE_M,
                       source: str = "<geometry>") -> NetworkGeometry:
    if not isinstance(doc, Mapping) or "nodes" not in doc or "edges" not in doc:
        raise IngestError(f"{source}: expected an object with 'nodes' and 'edges' arrays")

    nodes: dict = {}
    for k, item in enumerate(doc["nodes"]):
        where = f"{source}: nodes[{k}]"
        try:
            nid = _hashable_id(item["id"], where)
            coord = _check_coordinate(item["lon"], item["lat"], where)
        except (KeyError, TypeError) as exc:
            raise IngestError(f"{where}: missing field {exc}") from exc
        if nid in nodes:
            raise IngestError(f"{where}: duplicate node id {nid!r}")
        nodes[nid] = coord

    edges: dict = {}
    for k, item in enumerate(doc["edges"]):
        where = f"{source}: edges[{k}]"
        try:
            eid = _hashable_id(item["id"], where)
            u, v = item["from"], item["to"]
        except (KeyError, TypeError) as exc:
            raise IngestError(f"{where}: missing field {exc}") from exc
        if eid in edges:
            raise IngestError(f"{where}: duplicate edge id {eid!r}")
        for end in (u, v):
            if end not in nodes:
                raise IngestError(f"{where}: edge {eid!r} references missing node {end!r}")
        raw = item.get("polyline")
        if raw:
            pts = tuple(_check_coordinate(p[0], p[1], f"{where}.polyline") for p in raw)
            if len(pts) < 2:
                raise IngestError(f"{where}: polyline needs at least 2 points")
            for end, pt in ((u, pts[0]), (v, pts[-1])):
                gap = local_distance_m(nodes[end], pt)
                if gap > endpoint_tolerance_m:
                    raise IngestError(
                        f"{where}: polyline endpoint is {gap:.1f} m from node {end!r}"
                    )
            edges[eid] = EdgeGeometry(u, v, pts, True)
        else:
            edges[eid] = EdgeGeometry(u, v, (nodes[u], nodes[v]), False)

    geom = NetworkGeometry(nodes, edges)
    try:
        geom.to_network()
    except ValueError as exc:
        raise IngestError(f"{source}: {exc}") from exc
    return geom


def parse_network_geometry(path: str | Path, endpoint_tolerance_m: float = DEFAULT_SNAP_TOLERANCE_M) -> NetworkGeometry:
    """Read a geometry JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return geometry_from_dict(doc, endpoint_tolerance_m, str(path))


def geometry_to_dict(geom: NetworkGeometry) -> dict:
    nodes = [{"id": nid, "lon": lon, "lat": lat} for nid, (lon, lat) in geom.nodes.items()]
    edges = []
    for eid, e in geom.edges.items():
        item = {"id": eid, "from": e.source, "to": e.target}
        if e.explicit_polyline:
            item["polyline"] = [list(p) for p in e.polyline]
        edges.append(item)
    return {"nodes": nodes, "edges": edges}


def write_network_geometry(geom: NetworkGeometry, path: str | Path) -> None:
    Path(path).write_text(json.dumps(geometry_to_dict(geom), indent=1) + "\n", encoding="utf-8")


def _parse_timestamp(text: str, where: str) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError as exc:
        raise IngestError(f"{where}: bad ISO-8601 timestamp {text!r}") from exc


def parse_incidents(path: str | Path) -> list[IncidentRecord]:
    """Read the incident CSV, validating each row; file order is kept."""
    path = Path(path)
    records = []
    seen: set = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != INCIDENT_HEADER:
            raise IngestError(f"{path}: expected header {','.join(INCIDENT_HEADER)}, got {header!r}")
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            where = f"{path}:{line}"
            if len(row) != len(INCIDENT_HEADER):
                raise IngestError(f"{where}: expected {len(INCIDENT_HEADER)} fields, got {len(row)}")
            rid, lon, lat, start, end = (cell.strip() for cell in row)
            if rid in seen:
                raise IngestError(f"{where}: duplicate incident id {rid!r}")
            seen.add(rid)
            lon, lat = _check_coordinate(lon, lat, where)
            t_start = _parse_timestamp(start, where)
            t_end = _parse_timestamp(end, where)
            try:
                records.append(IncidentRecord(rid, lon, lat, t_start, t_end))
            except (TimelineError, TypeError) as exc:
                raise IngestError(f"{where}: {exc}") from exc
    return records


def write_incidents(incidents: Iterable[IncidentRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(INCIDENT_HEADER)
        for inc in incidents:
            writer.writerow([
                inc.id,
                repr(float(inc.longitude)),
                repr(float(inc.latitude)),
                inc.start.isoformat(timespec="seconds"),
                inc.end.isoformat(timespec="seconds"),
            ])


_TIE_M = 1e-6


def _first_min(dist: np.ndarray, ids: Sequence) -> int:
    # distances within a micrometre are a tie; the smaller id wins
    best = dist.min()
    ties = np.flatnonzero(dist <= best + _TIE_M)
    if ties.size == 1:
        return int(ties[0])
    try:
        return int(min(ties, key=lambda k: ids[k]))
    except TypeError:
        return int(min(ties, key=lambda k: str(ids[k])))


def snap_incident(coord: Sequence[float], geom: NetworkGeometry,
                  tolerance_m: float = DEFAULT_SNAP_TOLERANCE_M) -> ComponentRef | None:
    """Nearest node within tolerance, else nearest edge within tolerance, else None."""
    origin = (float(coord[0]), float(coord[1]))

    node_ids, node_coords = geom._node_arrays
    if node_ids:
        xy = _project(node_coords, origin)
        dist = np.hypot(xy[:, 0], xy[:, 1])
        k = _first_min(dist, node_ids)
        if dist[k] <= tolerance_m:
            return ComponentRef("node", node_ids[k])

    edge_ids, owner, starts, ends = geom._segment_arrays
    if owner.size == 0:
        return None
    p = _project(starts, origin)
    d = _project(ends, origin) - p
    length2 = np.einsum("ij,ij->i", d, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(length2 > 0, -np.einsum("ij,ij->i", p, d) / length2, 0.0)
    s = np.clip(s, 0.0, 1.0)
    closest = p + s[:, None] * d
    seg_dist = np.hypot(closest[:, 0], closest[:, 1])
    per_edge = np.full(len(edge_ids), np.inf)
    np.minimum.at(per_edge, owner, seg_dist)
    k = _first_min(per_edge, edge_ids)
    if per_edge[k] <= tolerance_m:
        return ComponentRef("edge", edge_ids[k])
    return None


def snap_incidents(incidents: Iterable[IncidentRecord], geom: NetworkGeometry,
                   tolerance_m: float = DEFAULT_SNAP_TOLERANCE_M
                   ) -> tuple[list[IncidentRecord], list[IncidentRecord]]:
    """Attach components to incidents; returns ``(snapped, unsnapped)``."""
    snapped, unsnapped = [], []
    for inc in incidents:
        ref = snap_incident((inc.longitude, inc.latitude), geom, tolerance_m)
        if ref is None:
            logger.warning("incident %s at (%.6f, %.6f) is farther than %g m from the network; skipped",
                           inc.id, inc.longitude, inc.latitude, tolerance_m)
            unsnapped.append(inc)
        else:
            snapped.append(IncidentRecord(inc.id, inc.longitude, inc.latitude, inc.start, inc.end, ref))
    return snapped, unsnapped
