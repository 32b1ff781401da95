import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from restorecast import ComponentRef, IngestError, parse_incidents, parse_network_geometry, snap_incident, snap_incidents
from restorecast.ingest import geometry_from_dict, local_distance_m, write_incidents, write_network_geometry

M_PER_DEG = math.pi / 180 * 6_371_008.8


def two_node_doc():
    return {
        "nodes": [{"id": 1, "lon": -95.0, "lat": 29.0}, {"id": 2, "lon": -94.98, "lat": 29.0}],
        "edges": [{"id": "e1", "from": 1, "to": 2}],
    }


def grid_doc(rows=4, cols=5, step_deg=0.02):
    nodes = [{"id": r * cols + c, "lon": -95 + c * step_deg, "lat": 29 + r * step_deg}
             for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                edges.append({"id": f"h{k}", "from": k, "to": k + 1})
            if r + 1 < rows:
                edges.append({"id": f"v{k}", "from": k, "to": k + cols})
    return {"nodes": nodes, "edges": edges}


def write_json(tmp_path, doc, name="g.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_two_node_file(tmp_path):
    geom = parse_network_geometry(write_json(tmp_path, two_node_doc()))
    net = geom.to_network()
    assert net.n_nodes == 2 and net.n_edges == 1


def test_dangling_reference_names_the_id(tmp_path):
    doc = two_node_doc()
    doc["edges"][0]["to"] = 99
    with pytest.raises(IngestError, match="99"):
        parse_network_geometry(write_json(tmp_path, doc))


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nodes: ")
    with pytest.raises(IngestError, match="line 1"):
        parse_network_geometry(path)


def test_harris_like_fixture_counts(data_dir):
    geom = parse_network_geometry(data_dir / "harris_like_geometry.json")
    assert (len(geom.nodes), len(geom.edges)) == (272, 390)
    incidents = parse_incidents(data_dir / "harris_like_incidents.csv")
    assert len(incidents) == 328
    assert min(i.start for i in incidents).isoformat() == "2017-08-25T23:41:00"
    assert max(i.end for i in incidents).isoformat() == "2017-09-05T13:15:00"


def test_incident_rows(tmp_path):
    path = tmp_path / "inc.csv"
    path.write_text("id,longitude,latitude,start,end\nA,-95.0,29.0,2017-08-26T01:20:00,2017-08-26T03:40:00\n")
    [rec] = parse_incidents(path)
    assert rec.id == "A" and rec.end.hour == 3


def test_end_before_start_cites_row(tmp_path):
    path = tmp_path / "inc.csv"
    path.write_text("id,longitude,latitude,start,end\n"
                    "A,-95.0,29.0,2017-08-26T01:00:00,2017-08-26T02:00:00\n"
                    "B,-95.0,29.0,2017-08-26T05:00:00,2017-08-26T04:00:00\n")
    with pytest.raises(IngestError, match=r"inc\.csv:3"):
        parse_incidents(path)


def test_bad_header(tmp_path):
    path = tmp_path / "inc.csv"
    path.write_text("id,lon,lat,start,end\n")
    with pytest.raises(IngestError, match="header"):
        parse_incidents(path)


def test_round_trips(tmp_path, data_dir):
    geom = parse_network_geometry(data_dir / "harris_like_geometry.json")
    write_network_geometry(geom, tmp_path / "g.json")
    again = parse_network_geometry(tmp_path / "g.json")
    assert again.nodes == geom.nodes and again.to_network() == geom.to_network()
    incidents = parse_incidents(data_dir / "harris_like_incidents.csv")
    write_incidents(incidents, tmp_path / "i.csv")
    assert parse_incidents(tmp_path / "i.csv") == incidents


def test_snap_basic_cases():
    geom = geometry_from_dict(two_node_doc())
    assert snap_incident((-95.0, 29.0), geom) == ComponentRef("node", 1)
    assert snap_incident((-94.99, 29.0), geom) == ComponentRef("edge", "e1")
    assert snap_incident((-94.99, 29.09), geom, tolerance_m=500) is None


def test_snap_prefers_node_within_tolerance():
    geom = geometry_from_dict(two_node_doc())
    near_node = (-95.0 + 100 / (M_PER_DEG * math.cos(math.radians(29))), 29.0)
    assert snap_incident(near_node, geom, tolerance_m=250) == ComponentRef("node", 1)


def test_snap_tie_goes_to_smaller_id():
    doc = {"nodes": [{"id": 5, "lon": -95.0, "lat": 29.0}, {"id": 3, "lon": -94.99, "lat": 29.0}], "edges": []}
    geom = geometry_from_dict(doc)
    mid = (-94.995, 29.0)
    assert snap_incident(mid, geom, tolerance_m=1000) == ComponentRef("node", 3)


def test_unsnapped_incidents_are_reported(tmp_path):
    geom = geometry_from_dict(two_node_doc())
    path = tmp_path / "inc.csv"
    path.write_text("id,longitude,latitude,start,end\n"
                    "near,-94.99,29.0,2017-08-26T01:00:00,2017-08-26T02:00:00\n"
                    "far,-90.0,31.0,2017-08-26T01:00:00,2017-08-26T02:00:00\n")
    snapped, unsnapped = snap_incidents(parse_incidents(path), geom)
    assert [i.id for i in snapped] == ["near"] and snapped[0].component == ComponentRef("edge", "e1")
    assert [i.id for i in unsnapped] == ["far"]


def test_local_distance():
    assert local_distance_m((-95.0, 29.0), (-95.0, 30.0)) == pytest.approx(M_PER_DEG, rel=1e-9)


GRID = geometry_from_dict(grid_doc())


@given(st.sampled_from(sorted(GRID.nodes)))
def test_node_coordinates_snap_to_their_node(nid):
    assert snap_incident(GRID.nodes[nid], GRID) == ComponentRef("node", nid)


@given(st.sampled_from(sorted(GRID.edges)), st.floats(0.3, 0.7))
def test_points_along_an_edge_snap_to_that_edge(eid, frac):
    pts = np.array(GRID.edge_points(eid))
    point = tuple(pts[0] + frac * (pts[-1] - pts[0]))
    ref = snap_incident(point, GRID)
    assert ref == ComponentRef("edge", eid)
    # idempotence: the snapped edge's point snaps back to it
    assert snap_incident(point, GRID) == ref
