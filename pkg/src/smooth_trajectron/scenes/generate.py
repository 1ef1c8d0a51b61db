"""Synthetic scene generators.

Both generators are pure functions of ``(config, seed)``: scene ``i`` draws
from its own generator seeded with ``seed + i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..exceptions import ConfigurationError
from .types import AgentClass, AgentTrack, GapMeta, Scene, SceneSet

# Highway geometry shared by the gap generator and the acceptance score.
LANE_WIDTH = 3.5
LANE_BOUNDARY = LANE_WIDTH / 2.0
EGO_AGENT_ID = 0

# Urban road: one lane per direction, sidewalks on both sides.
_URBAN_LANES = (-1.75, 1.75)
_URBAN_SIDEWALKS = (-6.0, 6.0)

_MAX_RESAMPLE_ROUNDS = 200
_BASE_RATE_BAND = (0.3, 0.7)
_BASE_RATE_MIN_SCENES = 10


@dataclass
class GenConfig:
    """Generator settings. Urban and gap generators read different subsets."""

    n_scenes: int = 20
    n_frames: int = 24
    dt: float = 0.5
    # urban
    n_vehicles: int = 3
    n_pedestrians: int = 3
    interaction_radius: float = 12.0
    vehicle_speed: tuple = (7.0, 12.0)
    pedestrian_speed: tuple = (0.9, 1.6)
    crossing_prob: float = 0.4
    process_noise: float = 0.1
    # gap acceptance
    gap_min: float = 6.0
    gap_max: float = 36.0
    decision_noise: float = 3.0
    gap_threshold: Optional[float] = None
    highway_speed: float = 25.0
    decision_offset: int = 10
    merge_duration: float = 3.0
    reject_decel: float = 1.5

    @property
    def threshold(self) -> float:
        if self.gap_threshold is not None:
            return float(self.gap_threshold)
        return 0.5 * (self.gap_min + self.gap_max)


def _require(cond, field, message):
    if not cond:
        raise ConfigurationError(f"{field}: {message}", field=field)


def _check_common(cfg: GenConfig):
    _require(cfg.n_scenes >= 1, "n_scenes", "must be >= 1")
    _require(cfg.dt > 0, "dt", "must be > 0")
    _require(cfg.n_frames >= 2, "n_frames", "must be >= 2")
    _require(cfg.process_noise >= 0, "process_noise", "must be >= 0")


def _finite_difference(pos: np.ndarray, dt: float) -> np.ndarray:
    vel = np.empty_like(pos)
    vel[1:] = np.diff(pos, axis=0) / dt
    vel[0] = vel[1]
    return vel


def _make_track(agent_id, cls, pos, dt):
    n = len(pos)
    states = np.hstack([pos, _finite_difference(pos, dt)])
    return AgentTrack(agent_id, cls, np.arange(n), states, np.ones(n, dtype=bool))


def check_urban_config(cfg: GenConfig, min_frames: int = 2) -> None:
    _check_common(cfg)
    _require(cfg.n_frames >= min_frames, "n_frames", f"must be >= {min_frames}")
    _require(cfg.n_vehicles >= 1, "n_vehicles", "must be >= 1")
    _require(cfg.n_pedestrians >= 1, "n_pedestrians", "must be >= 1")
    _require(cfg.interaction_radius > 0, "interaction_radius", "must be > 0")
    _require(0 <= cfg.crossing_prob <= 1, "crossing_prob", "must lie in [0, 1]")


def generate_urban(config: GenConfig, seed: int, min_frames: int = 2) -> SceneSet:
    """Mixed vehicle/pedestrian street scenes.

    Vehicles drive noisy constant-velocity lane motion and slow down when an
    agent is inside ``interaction_radius`` ahead of them in their lane;
    pedestrians walk the sidewalks and sometimes cross the road.
    ``min_frames`` lets callers demand room for history plus horizon.
    """
    check_urban_config(config, min_frames)
    scenes = [_urban_scene(config, i, np.random.default_rng(seed + i)) for i in range(config.n_scenes)]
    return SceneSet(scenes, f"urban-seed{seed}")


def _urban_scene(cfg: GenConfig, scene_id: int, rng: np.random.Generator) -> Scene:
    nv, npd, nf, dt = cfg.n_vehicles, cfg.n_pedestrians, cfg.n_frames, cfg.dt
    n = nv + npd
    pos = np.zeros((nf, n, 2))
    vel = np.zeros((n, 2))

    direction = rng.choice([-1.0, 1.0], size=nv)
    lane_y = np.where(direction > 0, _URBAN_LANES[0], _URBAN_LANES[1])
    span = nf * dt * cfg.vehicle_speed[1]
    pos[0, :nv, 0] = rng.uniform(-0.5 * span, 0.5 * span, size=nv)
    pos[0, :nv, 1] = lane_y
    desired = rng.uniform(*cfg.vehicle_speed, size=nv)
    vel[:nv, 0] = direction * desired

    side = rng.choice([0, 1], size=npd)
    pos[0, nv:, 0] = rng.uniform(-0.3 * span, 0.3 * span, size=npd)
    pos[0, nv:, 1] = np.take(_URBAN_SIDEWALKS, side)
    walk = rng.uniform(*cfg.pedestrian_speed, size=npd) * rng.choice([-1.0, 1.0], size=npd)
    vel[nv:, 0] = walk
    will_cross = rng.random(npd) < cfg.crossing_prob
    cross_start = rng.integers(0, max(nf // 2, 1), size=npd)
    crossing = np.zeros(npd, dtype=bool)

    for k in range(1, nf):
        prev = pos[k - 1]
        # vehicles: repulsive slow-down toward anything ahead in the lane corridor
        for v in range(nv):
            ahead = (prev[:, 0] - prev[v, 0]) * direction[v]
            in_lane = np.abs(prev[:, 1] - lane_y[v]) < 2.5
            in_lane[v] = False
            d = ahead[in_lane & (ahead > 0)]
            target = desired[v]
            if d.size and d.min() < cfg.interaction_radius:
                target = desired[v] * np.clip((d.min() - 4.0) / (cfg.interaction_radius - 4.0), 0.0, 1.0)
            speed = abs(vel[v, 0])
            speed += np.clip(target - speed, -5.0 * dt, 2.0 * dt)
            speed = max(speed + cfg.process_noise * rng.normal(), 0.0)
            vel[v, 0] = direction[v] * speed
            vel[v, 1] = 0.2 * (lane_y[v] - prev[v, 1]) / dt + 0.2 * cfg.process_noise * rng.normal()
        for p in range(npd):
            a = nv + p
            if will_cross[p] and k == cross_start[p] + 1:
                crossing[p] = True
            if crossing[p]:
                goal = _URBAN_SIDEWALKS[1 - side[p]]
                vel[a, 1] = np.sign(goal - prev[a, 1]) * 1.3
                vel[a, 0] = 0.3 * walk[p]
                if abs(goal - prev[a, 1]) < 1.3 * dt:
                    crossing[p] = False
                    will_cross[p] = False
                    side[p] = 1 - side[p]
            else:
                vel[a, 0] = walk[p]
                vel[a, 1] = 0.5 * (_URBAN_SIDEWALKS[side[p]] - prev[a, 1]) / dt
            vel[a] += 0.5 * cfg.process_noise * rng.normal(size=2)
        pos[k] = prev + dt * vel

    tracks = [
        _make_track(a, AgentClass.VEHICLE if a < nv else AgentClass.PEDESTRIAN, pos[:, a], dt)
        for a in range(n)
    ]
    return Scene(scene_id, dt, tracks)


def gap_accepted(gap_size: float, threshold: float, noise: float = 0.0) -> bool:
    """Noisy threshold rule: accept when the perceived gap exceeds ``threshold``."""
    return bool(gap_size + noise > threshold)


def check_gap_config(cfg: GenConfig, min_history: int = 0, min_future: int = 1) -> None:
    _check_common(cfg)
    _require(cfg.gap_min < cfg.gap_max, "gap_min", "gap_min must be < gap_max")
    _require(cfg.gap_min > 0, "gap_min", "must be > 0")
    _require(cfg.decision_noise >= 0, "decision_noise", "must be >= 0")
    _require(cfg.highway_speed > 0, "highway_speed", "must be > 0")
    _require(cfg.decision_offset >= min_history, "decision_offset", f"must be >= {min_history}")
    _require(
        cfg.n_frames - 1 - cfg.decision_offset >= min_future,
        "n_frames",
        f"must leave >= {min_future} frames after the decision frame",
    )


def generate_gap(config: GenConfig, seed: int, min_history: int = 0, min_future: int = 1) -> SceneSet:
    """Highway lane-change scenes around a two-vehicle gap.

    The ego (agent 0) drives beside a gap between a follower (agent 1) and a
    leader (agent 2) in the adjacent lane. At the decision frame it merges
    if ``gap_size + N(0, decision_noise)`` exceeds the threshold, otherwise
    it brakes and stays in its lane. For sets of at least ten scenes the
    acceptance rate is pushed into [0.3, 0.7] by redrawing gap sizes of the
    over-represented label.
    """
    check_gap_config(config, min_history, min_future)
    g_star = config.threshold
    n = config.n_scenes
    gaps = np.empty(n)
    labels = np.empty(n, dtype=bool)
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        gaps[i], labels[i] = _draw_gap(config, g_star, rng)

    if n >= _BASE_RATE_MIN_SCENES:
        lo, hi = _BASE_RATE_BAND
        for rnd in range(1, _MAX_RESAMPLE_ROUNDS + 1):
            rate = labels.mean()
            if lo <= rate <= hi:
                break
            majority = rate > hi
            for i in np.flatnonzero(labels == majority):
                rng = np.random.default_rng([seed + i, rnd])
                gaps[i], labels[i] = _draw_gap(config, g_star, rng)
                if lo <= labels.mean() <= hi:
                    break
        else:
            raise ConfigurationError(
                "gap_threshold: cannot reach an acceptance rate within [0.3, 0.7]",
                field="gap_threshold",
            )

    scenes = [
        _gap_scene(config, i, gaps[i], bool(labels[i]), np.random.default_rng([seed + i, 0]))
        for i in range(n)
    ]
    return SceneSet(scenes, f"gap-seed{seed}")


def _draw_gap(cfg, g_star, rng):
    gap = rng.uniform(cfg.gap_min, cfg.gap_max)
    noise = rng.normal(0.0, cfg.decision_noise) if cfg.decision_noise > 0 else 0.0
    return gap, gap_accepted(gap, g_star, noise)


def _gap_scene(cfg: GenConfig, scene_id, gap, accepted, rng) -> Scene:
    nf, dt, d = cfg.n_frames, cfg.dt, cfg.decision_offset
    t = np.arange(nf) * dt
    v = cfg.highway_speed + rng.uniform(-2.0, 2.0)
    x0 = rng.uniform(0.0, 40.0)
    jitter = cfg.process_noise

    def lane_vehicle(x_start, y):
        speed = v + jitter * np.cumsum(rng.normal(size=nf))
        x = x_start + np.concatenate([[0.0], np.cumsum(speed[:-1] * dt)])
        return np.column_stack([x, np.full(nf, y) + 0.5 * jitter * rng.normal(size=nf)])

    follower = lane_vehicle(x0, LANE_WIDTH)
    leader = lane_vehicle(x0 + gap, LANE_WIDTH)

    ego_offset = rng.uniform(1.0, max(1.0, min(5.0, 0.5 * gap)))
    ego = lane_vehicle(x0 + ego_offset, 0.0)
    after = t[d:] - t[d]
    if accepted:
        s = np.clip(after / cfg.merge_duration, 0.0, 1.0)
        ego[d:, 1] += LANE_WIDTH * 0.5 * (1.0 - np.cos(np.pi * s))
    else:
        ego[d:, 0] -= 0.5 * cfg.reject_decel * after**2

    tracks = [
        _make_track(EGO_AGENT_ID, AgentClass.VEHICLE, ego, dt),
        _make_track(1, AgentClass.VEHICLE, follower, dt),
        _make_track(2, AgentClass.VEHICLE, leader, dt),
    ]
    return Scene(scene_id, dt, tracks, GapMeta(float(gap), bool(accepted), int(d)))
