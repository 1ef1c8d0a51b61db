"""Scene data model: typed agent tracks on a shared frame grid."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from ..exceptions import ValidationError


class AgentClass(enum.IntEnum):
    VEHICLE = 0
    PEDESTRIAN = 1

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "AgentClass":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown agent class {label!r}") from None


NUM_CLASSES = len(AgentClass)


class SplitMethod(str, enum.Enum):
    RANDOM = "random"
    CRITICAL = "critical"


@dataclass(eq=False)
class AgentTrack:
    """States of one agent.

    ``states`` has columns ``(x, y, vx, vy)``; rows where ``presence`` is
    False are placeholders (zeros) and must not be read as observations.
    """

    agent_id: int
    semantic_class: AgentClass
    frames: np.ndarray
    states: np.ndarray
    presence: np.ndarray

    def __post_init__(self):
        self.agent_id = int(self.agent_id)
        self.semantic_class = AgentClass(self.semantic_class)
        self.frames = np.asarray(self.frames, dtype=np.int64)
        self.states = np.asarray(self.states, dtype=np.float64)
        self.presence = np.asarray(self.presence, dtype=bool)
        n = len(self.frames)
        if self.frames.ndim != 1 or n == 0:
            raise ValidationError(f"agent {self.agent_id}: frames must be a nonempty 1-D sequence")
        if self.states.shape != (n, 4):
            raise ValidationError(
                f"agent {self.agent_id}: states shape {self.states.shape} != ({n}, 4)"
            )
        if self.presence.shape != (n,):
            raise ValidationError(f"agent {self.agent_id}: presence length != states length")
        if n > 1:
            steps = np.diff(self.frames)
            if steps[0] <= 0 or np.any(steps != steps[0]):
                raise ValidationError(
                    f"agent {self.agent_id}: frames must be strictly increasing and uniformly spaced"
                )
        if not np.all(np.isfinite(self.states)):
            raise ValidationError(f"agent {self.agent_id}: non-finite state entries")

    @property
    def frame_step(self) -> int:
        return int(self.frames[1] - self.frames[0]) if len(self.frames) > 1 else 1

    def index_of(self, frame: int) -> Optional[int]:
        """Row index of ``frame``, or None when outside the track."""
        offset = frame - int(self.frames[0])
        step = self.frame_step
        if offset < 0 or offset % step:
            return None
        idx = offset // step
        return idx if idx < len(self.frames) else None

    def is_present(self, frame: int) -> bool:
        idx = self.index_of(frame)
        return idx is not None and bool(self.presence[idx])

    def state_at(self, frame: int) -> np.ndarray:
        idx = self.index_of(frame)
        if idx is None or not self.presence[idx]:
            raise ValidationError(f"agent {self.agent_id} absent at frame {frame}")
        return self.states[idx]

    def __eq__(self, other):
        # states at absent frames carry no information and are not compared
        if not isinstance(other, AgentTrack):
            return NotImplemented
        return (
            self.agent_id == other.agent_id
            and self.semantic_class == other.semantic_class
            and np.array_equal(self.frames, other.frames)
            and np.array_equal(self.presence, other.presence)
            and np.array_equal(self.states[self.presence], other.states[other.presence])
        )


@dataclass(frozen=True)
class GapMeta:
    gap_size: float
    accepted: bool
    decision_frame: int


@dataclass(eq=False)
class Scene:
    scene_id: int
    dt: float
    tracks: list
    gap_meta: Optional[GapMeta] = None

    def __post_init__(self):
        self.scene_id = int(self.scene_id)
        self.dt = float(self.dt)
        self.tracks = list(self.tracks)
        if not self.dt > 0:
            raise ValidationError(f"scene {self.scene_id}: dt must be > 0")
        if not self.tracks:
            raise ValidationError(f"scene {self.scene_id}: no tracks")
        first = int(self.tracks[0].frames[0])
        step = self.tracks[0].frame_step
        ids = set()
        for tr in self.tracks:
            if int(tr.frames[0]) != first or (len(tr.frames) > 1 and tr.frame_step != step):
                raise ValidationError(f"scene {self.scene_id}: tracks do not share one frame grid")
            if tr.agent_id in ids:
                raise ValidationError(f"scene {self.scene_id}: duplicate agent id {tr.agent_id}")
            ids.add(tr.agent_id)
        self._by_id = {tr.agent_id: tr for tr in self.tracks}

    @property
    def first_frame(self) -> int:
        return int(self.tracks[0].frames[0])

    @property
    def last_frame(self) -> int:
        return max(int(tr.frames[-1]) for tr in self.tracks)

    @property
    def frame_step(self) -> int:
        return max(tr.frame_step for tr in self.tracks)

    def track(self, agent_id: int) -> AgentTrack:
        try:
            return self._by_id[int(agent_id)]
        except KeyError:
            raise ValidationError(f"scene {self.scene_id}: no agent {agent_id}") from None

    def classes(self) -> set:
        return {tr.semantic_class for tr in self.tracks}

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return (
            self.scene_id == other.scene_id
            and self.dt == other.dt
            and self.gap_meta == other.gap_meta
            and len(self.tracks) == len(other.tracks)
            and all(a == b for a, b in zip(self.tracks, other.tracks))
        )


@dataclass(eq=False)
class SceneSet:
    scenes: list = field(default_factory=list)
    source_tag: str = ""

    def __post_init__(self):
        self.scenes = list(self.scenes)
        ids = [s.scene_id for s in self.scenes]
        if len(set(ids)) != len(ids):
            raise ValidationError("scene ids must be unique within a SceneSet")

    def __len__(self) -> int:
        return len(self.scenes)

    def __iter__(self) -> Iterator[Scene]:
        return iter(self.scenes)

    def __getitem__(self, i) -> Scene:
        return self.scenes[i]

    def __eq__(self, other):
        if not isinstance(other, SceneSet):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self, other))

    def subset(self, indices: Sequence[int], tag: Optional[str] = None) -> "SceneSet":
        return SceneSet([self.scenes[i] for i in indices], tag if tag is not None else self.source_tag)


@dataclass(frozen=True)
class DataSplit:
    train: tuple
    val: tuple
    test: tuple
    method: SplitMethod
    seed: int = 0

    def check_covers(self, n: int) -> None:
        parts = [set(self.train), set(self.val), set(self.test)]
        total = sum(len(p) for p in parts)
        union = parts[0] | parts[1] | parts[2]
        if total != len(union) or union != set(range(n)):
            raise ValidationError("split parts must be disjoint and cover the scene set")
