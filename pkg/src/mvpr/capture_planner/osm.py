"""OpenStreetMap street data: Overpass fetch and graph extraction.

Both Overpass JSON and OSM XML are accepted. Ways without a highway tag
are ignored. Way node chains are condensed: a node becomes a graph node
only where ways meet (used more than once across highway ways) or at way
endpoints; everything in between becomes edge polyline geometry.
"""

from __future__ import annotations

import json
import logging
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import requests

from ..errors import FormatError, InputError, TransportError
from ..geo import LocalProjection
from .graph import StreetGraph

logger = logging.getLogger(__name__)

FETCH_ATTEMPTS = 3
BACKOFF_S = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class OsmWay:
    way_id: int
    node_ids: tuple[int, ...]
    tags: dict


@dataclass(frozen=True)
class OsmDocument:
    nodes: dict[int, tuple[float, float]]  # id -> (lat, lon)
    ways: tuple[OsmWay, ...]


def overpass_query(bbox) -> str:
    south, west, north, east = bbox
    return (
        f"[out:json][timeout:60];"
        f'(way["highway"]({south},{west},{north},{east});>;);'
        f"out body;"
    )


def fetch_osm(bbox, endpoint_url: str, *, attempts: int = FETCH_ATTEMPTS,
              sleep=time.sleep) -> str:
    """POST an Overpass query for highway ways in bbox; returns the body.

    bbox is (south, west, north, east) in degrees. Retries with exponential
    backoff before raising TransportError.
    """
    south, west, north, east = (float(v) for v in bbox)
    if south >= north or west >= east:
        raise InputError(f"invalid bbox {bbox}: min must be < max on both axes")
    query = overpass_query((south, west, north, east))
    last_error = None
    for attempt in range(attempts):
        try:
            resp = requests.post(endpoint_url, data={"data": query}, timeout=60)
            if resp.status_code != 200:
                raise TransportError(f"HTTP {resp.status_code} from {endpoint_url}")
            body = resp.text
            parse_osm_document(body)  # reject malformed bodies early
            return body
        except (requests.RequestException, TransportError, FormatError) as exc:
            last_error = exc
            logger.warning("OSM fetch attempt %d/%d failed: %s", attempt + 1, attempts, exc)
            if attempt + 1 < attempts:
                sleep(BACKOFF_S[min(attempt, len(BACKOFF_S) - 1)])
    raise TransportError(
        f"OSM fetch failed after {attempts} attempts: {last_error}"
    ) from last_error


def parse_osm_document(text: str) -> OsmDocument:
    """Parse OSM XML or Overpass JSON into nodes and ways."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return _parse_json(stripped)
    if stripped.startswith("<"):
        return _parse_xml(stripped)
    raise FormatError("OSM document is neither XML nor JSON")


def _parse_json(text: str) -> OsmDocument:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad Overpass JSON: {exc}") from exc
    nodes = {}
    ways = []
    for el in doc.get("elements", []):
        if el.get("type") == "node":
            nodes[int(el["id"])] = (float(el["lat"]), float(el["lon"]))
        elif el.get("type") == "way":
            ways.append(
                OsmWay(
                    way_id=int(el["id"]),
                    node_ids=tuple(int(n) for n in el.get("nodes", [])),
                    tags=dict(el.get("tags", {})),
                )
            )
    return OsmDocument(nodes=nodes, ways=tuple(ways))


def _parse_xml(text: str) -> OsmDocument:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise FormatError(f"bad OSM XML: {exc}") from exc
    nodes = {}
    ways = []
    for el in root:
        if el.tag == "node":
            nodes[int(el.attrib["id"])] = (float(el.attrib["lat"]), float(el.attrib["lon"]))
        elif el.tag == "way":
            node_ids = tuple(int(nd.attrib["ref"]) for nd in el.findall("nd"))
            tags = {t.attrib["k"]: t.attrib["v"] for t in el.findall("tag")}
            ways.append(OsmWay(way_id=int(el.attrib["id"]), node_ids=node_ids, tags=tags))
    return OsmDocument(nodes=nodes, ways=tuple(ways))


def parse_osm(doc: str | OsmDocument) -> StreetGraph:
    """Condense highway ways into a street graph in local meters."""
    if isinstance(doc, str):
        doc = parse_osm_document(doc)
    highway_ways = [w for w in doc.ways if "highway" in w.tags]

    usage: dict[int, int] = {}
    for way in highway_ways:
        for nid in way.node_ids:
            if nid not in doc.nodes:
                raise FormatError(f"way {way.way_id} references missing node {nid}")
            usage[nid] = usage.get(nid, 0) + 1

    if not usage:
        return StreetGraph(nodes={}, edges=[], projection=None)

    lats = [doc.nodes[n][0] for n in usage]
    lons = [doc.nodes[n][1] for n in usage]
    projection = LocalProjection(
        lat0=(min(lats) + max(lats)) / 2.0, lon0=(min(lons) + max(lons)) / 2.0
    )
    local = {nid: projection.to_local(*doc.nodes[nid]) for nid in usage}

    nodes: dict[int, tuple[float, float]] = {}
    segments = []
    for way in highway_ways:
        ids = way.node_ids
        if len(ids) < 2:
            continue
        junctions = [
            i
            for i, nid in enumerate(ids)
            if i == 0 or i == len(ids) - 1 or usage[nid] > 1
        ]
        for i0, i1 in zip(junctions, junctions[1:]):
            a, b = ids[i0], ids[i1]
            poly = [local[n] for n in ids[i0 : i1 + 1]]
            nodes[a] = local[a]
            nodes[b] = local[b]
            segments.append((a, b, poly))
    return StreetGraph.from_segments(nodes, segments, projection=projection)
