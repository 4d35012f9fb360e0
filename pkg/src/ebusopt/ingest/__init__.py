from .build import (IngestError, build_compatibility, build_instance, min_fleet_bound,
                    select_depots, terminal_counts, unserviceable_trips)
from .geometry import GeometryError, StopDeadhead, build_deadhead, haversine_km, node_deadhead
from .gtfs import GtfsBundle, GtfsError, parse_gtfs, read_distance_override
from .store import instances_equal, load_instance, save_instance
from .synthetic import SyntheticSpec, generate_synthetic

__all__ = [
    "IngestError", "build_compatibility", "build_instance", "min_fleet_bound", "select_depots",
    "terminal_counts", "unserviceable_trips", "GeometryError", "StopDeadhead", "build_deadhead",
    "haversine_km", "node_deadhead", "GtfsBundle", "GtfsError", "parse_gtfs",
    "read_distance_override", "instances_equal", "load_instance", "save_instance",
    "SyntheticSpec", "generate_synthetic",
]
