"""Multi-agent scenes: data model, synthetic generators, files, splits, neighbor graphs."""

from .generate import (
    EGO_AGENT_ID,
    LANE_BOUNDARY,
    LANE_WIDTH,
    GenConfig,
    gap_accepted,
    generate_gap,
    generate_urban,
)
from .graph import DEFAULT_RADIUS, NeighborGraph, build_neighbor_graph, edge_keys
from .io import load_gap_meta, load_tracks, save_gap_meta, save_tracks
from .splits import criticality, make_split, split_critical, split_random
from .standardize import Standardizer, standardize
from .types import (
    NUM_CLASSES,
    AgentClass,
    AgentTrack,
    DataSplit,
    GapMeta,
    Scene,
    SceneSet,
    SplitMethod,
)

__all__ = [
    "AgentClass", "AgentTrack", "DataSplit", "DEFAULT_RADIUS", "EGO_AGENT_ID", "GapMeta",
    "GenConfig", "LANE_BOUNDARY", "LANE_WIDTH", "NUM_CLASSES", "NeighborGraph", "Scene",
    "SceneSet", "SplitMethod", "Standardizer", "build_neighbor_graph", "criticality",
    "edge_keys", "gap_accepted", "generate_gap", "generate_urban", "load_gap_meta",
    "load_tracks", "make_split", "save_gap_meta", "save_tracks", "split_critical",
    "split_random", "standardize",
]
