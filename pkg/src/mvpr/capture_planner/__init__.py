from .graph import StreetEdge, StreetGraph, all_pairs_shortest, odd_degree_nodes
from .matching import MatchingResult, min_weight_perfect_matching
from .osm import OsmDocument, fetch_osm, parse_osm, parse_osm_document
from .route import (
    RoutePath,
    RouteStep,
    SampledViewpoint,
    plan_route,
    read_viewpoints_csv,
    route_to_geojson,
    sample_path,
    write_route_geojson,
    write_viewpoints_csv,
)

__all__ = [
    "MatchingResult",
    "OsmDocument",
    "RoutePath",
    "RouteStep",
    "SampledViewpoint",
    "StreetEdge",
    "StreetGraph",
    "all_pairs_shortest",
    "fetch_osm",
    "min_weight_perfect_matching",
    "odd_degree_nodes",
    "parse_osm",
    "parse_osm_document",
    "plan_route",
    "read_viewpoints_csv",
    "route_to_geojson",
    "sample_path",
    "write_route_geojson",
    "write_viewpoints_csv",
]
