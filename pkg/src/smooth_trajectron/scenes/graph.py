"""Class-keyed neighbor lists over a history window."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ValidationError
from .types import AgentClass, Scene

DEFAULT_RADIUS = {AgentClass.VEHICLE: 20.0, AgentClass.PEDESTRIAN: 10.0}


@dataclass
class NeighborGraph:
    """``edges[(focal_class, neighbor_class)][k]`` lists neighbor ids at ``frames[k]``."""

    focal_id: int
    focal_class: AgentClass
    frames: tuple
    edges: dict

    def keys(self):
        return edge_keys(self.focal_class)


def edge_keys(focal_class) -> list:
    """Edge-class keys for a focal class, in fixed neighbor-class order."""
    return [(AgentClass(focal_class), c) for c in AgentClass]


def build_neighbor_graph(scene: Scene, focal_id: int, t: int, T: int, radius=None) -> NeighborGraph:
    """Neighbors within ``radius`` meters of the focal at each frame of ``[t - T*step, t]``.

    ``radius`` may be a number or a per-focal-class mapping; the default is
    20 m for vehicles and 10 m for pedestrians. Frames where the focal itself
    is absent (front padding) have empty lists.
    """
    focal = scene.track(focal_id)
    if not focal.is_present(t):
        raise ValidationError(f"scene {scene.scene_id}: focal {focal_id} absent at frame {t}")
    step = scene.frame_step
    start = t - T * step
    if start < scene.first_frame:
        raise ValidationError(f"window start {start} precedes first frame {scene.first_frame}")
    if radius is None:
        radius = DEFAULT_RADIUS
    r = float(radius[focal.semantic_class]) if isinstance(radius, dict) else float(radius)

    frames = tuple(range(start, t + 1, step))
    keys = edge_keys(focal.semantic_class)
    edges = {k: [] for k in keys}
    others = sorted((tr for tr in scene.tracks if tr.agent_id != focal.agent_id), key=lambda tr: tr.agent_id)
    for f in frames:
        lists = {k: [] for k in keys}
        if focal.is_present(f):
            p = focal.state_at(f)[:2]
            for tr in others:
                if tr.is_present(f) and np.hypot(*(tr.state_at(f)[:2] - p)) <= r and r > 0:
                    lists[(focal.semantic_class, tr.semantic_class)].append(tr.agent_id)
        for k in keys:
            edges[k].append(lists[k])
    return NeighborGraph(focal.agent_id, focal.semantic_class, frames, edges)
