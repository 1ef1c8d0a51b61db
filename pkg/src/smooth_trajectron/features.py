"""Turn scenes into fixed-shape per-sample arrays for the network.

A sample is one focal agent at one prediction frame ``t``. The history
window covers frames ``t - T .. t`` (``T + 1`` steps), of which only the
last ``n_input`` are observed; older steps are zero with presence 0.
Positions are expressed relative to the focal position at ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .exceptions import ValidationError
from .scenes.graph import DEFAULT_RADIUS, NeighborGraph, build_neighbor_graph
from .scenes.types import NUM_CLASSES, AgentClass, Scene

STATE_DIM = 4 + NUM_CLASSES + 1  # x, y, vx, vy, class one-hot, presence
EDGE_DIM = 4


def aggregate_edges(graph: NeighborGraph, scene: Scene, key) -> np.ndarray:
    """Per-frame sum of neighbor states relative to the focal for one edge key.

    Returns shape ``(len(graph.frames), 4)``; frames with no listed
    neighbor give a zero row.
    """
    focal = scene.track(graph.focal_id)
    out = np.zeros((len(graph.frames), EDGE_DIM))
    for k, (f, ids) in enumerate(zip(graph.frames, graph.edges[key])):
        if not ids:
            continue
        ref = focal.state_at(f)
        for aid in ids:
            out[k] += scene.track(aid).state_at(f) - ref
    return out


@dataclass
class SampleBatch:
    hist: np.ndarray  # (N, T+1, STATE_DIM)
    agg: np.ndarray  # (N, K, T+1, 4)
    focal_class: np.ndarray  # (N,)
    x_t: np.ndarray  # (N, 4) absolute focal state at t
    future: np.ndarray  # (N, H, 4) positions relative to x_t, velocities
    key_present: np.ndarray  # (N, K)
    scene_id: np.ndarray
    agent_id: np.ndarray
    frame: np.ndarray
    scene_index: np.ndarray

    def __len__(self):
        return len(self.focal_class)

    def subset(self, idx) -> "SampleBatch":
        return SampleBatch(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    @classmethod
    def concat(cls, batches, T, H) -> "SampleBatch":
        if not batches:
            return cls.empty(T, H)
        return cls(**{f.name: np.concatenate([getattr(b, f.name) for b in batches]) for f in fields(cls)})

    @classmethod
    def empty(cls, T, H) -> "SampleBatch":
        L = T + 1
        return cls(
            np.zeros((0, L, STATE_DIM)), np.zeros((0, NUM_CLASSES, L, EDGE_DIM)),
            np.zeros(0, dtype=np.int64), np.zeros((0, 4)), np.zeros((0, H, 4)),
            np.zeros((0, NUM_CLASSES), dtype=bool), np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
        )


def _scene_arrays(scene: Scene):
    """Dense (agents, grid frames, 4) states and presence over the scene grid."""
    step = scene.frame_step
    grid = np.arange(scene.first_frame, scene.last_frame + 1, step)
    n = len(scene.tracks)
    states = np.zeros((n, len(grid), 4))
    present = np.zeros((n, len(grid)), dtype=bool)
    for a, tr in enumerate(scene.tracks):
        off = (tr.frames - grid[0]) // step
        states[a, off] = tr.states
        present[a, off] = tr.presence
    return grid, states, present


def prediction_frames(scene: Scene, T: int, H: int, stride: int = 1, require_future: bool = True) -> list:
    """Frames at which samples are cut: the decision frame for gap scenes, a strided sweep otherwise."""
    step = scene.frame_step
    first = scene.first_frame + T * step
    if scene.gap_meta is not None:
        t = scene.gap_meta.decision_frame
        ok = t >= first and (not require_future or t + H * step <= scene.last_frame)
        return [t] if ok else []
    last = scene.last_frame - (H * step if require_future else 0)
    return list(range(first, last + 1, stride * step))


def _radius_for(radius, cls):
    return float(radius[cls]) if isinstance(radius, dict) else float(radius)


def extract_samples(
    scenes,
    T: int,
    H: int,
    n_input=None,
    radius=None,
    stride: int = 1,
    require_future: bool = True,
) -> SampleBatch:
    """Cut every eligible (focal, t) sample from ``scenes``.

    A focal agent is eligible when present at all ``n_input`` observed steps
    and, if ``require_future``, at all ``H`` future steps.
    """
    n_input = T + 1 if n_input is None else int(n_input)
    if not 1 <= n_input <= T + 1:
        raise ValidationError(f"n_input must lie in [1, {T + 1}], got {n_input}")
    radius = DEFAULT_RADIUS if radius is None else radius
    L = T + 1
    out = []
    for si, scene in enumerate(scenes):
        grid, states, present = _scene_arrays(scene)
        classes = np.array([int(tr.semantic_class) for tr in scene.tracks])
        ids = np.array([tr.agent_id for tr in scene.tracks])
        step = scene.frame_step
        for t in prediction_frames(scene, T, H, stride, require_future):
            k_t = (t - grid[0]) // step
            win = np.arange(k_t - T, k_t + 1)
            obs = np.zeros(L, dtype=bool)
            obs[L - n_input :] = True
            fut = np.arange(k_t + 1, k_t + 1 + H)
            for a in range(len(ids)):
                if not present[a, win[obs]].all():
                    continue
                if require_future and (fut[-1] >= len(grid) or not present[a, fut].all()):
                    continue
                out.append(_one_sample(si, scene, t, a, win, obs, fut, states, present, classes, ids, radius, H))
    return SampleBatch.concat(out, T, H)


def _one_sample(si, scene, t, a, win, obs, fut, states, present, classes, ids, radius, H):
    L = len(win)
    x_t = states[a, win[-1]]
    fpres = present[a, win] & obs
    hist = np.zeros((1, L, STATE_DIM))
    hist[0, :, :2] = states[a, win, :2] - x_t[:2]
    hist[0, :, 2:4] = states[a, win, 2:4]
    hist[0, :, 4 + classes[a]] = 1.0
    hist[0, :, -1] = 1.0
    hist[0, ~fpres] = 0.0

    r = _radius_for(radius, AgentClass(classes[a]))
    rel = states[:, win] - states[a, win][None]  # (agents, L, 4)
    dist = np.hypot(rel[..., 0], rel[..., 1])
    nbr = present[:, win] & fpres[None] & (dist <= r) & (r > 0)
    nbr[a] = False
    agg = np.zeros((1, NUM_CLASSES, L, 4))
    for c in range(NUM_CLASSES):
        m = nbr & (classes == c)[:, None]
        agg[0, c] = (rel * m[..., None]).sum(axis=0)
    key_present = np.array([[(nbr & (classes == c)[:, None]).any() for c in range(NUM_CLASSES)]])

    future = np.zeros((1, H, 4))
    if fut[-1] < states.shape[1]:
        future[0, :, :2] = states[a, fut, :2] - x_t[:2]
        future[0, :, 2:] = states[a, fut, 2:]
    return SampleBatch(
        hist, agg, np.array([classes[a]]), x_t[None].copy(), future, key_present,
        np.array([scene.scene_id]), np.array([ids[a]]), np.array([t]), np.array([si]),
    )


def reference_sample(scene: Scene, focal_id: int, t: int, T: int, n_input=None, radius=None):
    """Single-sample features through ``build_neighbor_graph`` + ``aggregate_edges``.

    Slow path used to cross-check :func:`extract_samples`; returns
    ``(hist, agg)`` with the same layout as one row of a SampleBatch.
    """
    n_input = T + 1 if n_input is None else n_input
    focal = scene.track(focal_id)
    L = T + 1
    step = scene.frame_step
    frames = [t - (T - k) * step for k in range(L)]
    observed = [k >= L - n_input and focal.is_present(f) for k, f in enumerate(frames)]
    x_t = focal.state_at(t)
    hist = np.zeros((L, STATE_DIM))
    for k, f in enumerate(frames):
        if observed[k]:
            s = focal.state_at(f)
            hist[k, :2] = s[:2] - x_t[:2]
            hist[k, 2:4] = s[2:]
            hist[k, 4 + int(focal.semantic_class)] = 1.0
            hist[k, -1] = 1.0
    graph = build_neighbor_graph(scene, focal_id, t, T, DEFAULT_RADIUS if radius is None else radius)
    agg = np.zeros((NUM_CLASSES, L, EDGE_DIM))
    for key in graph.keys():
        seq = aggregate_edges(graph, scene, key)
        seq[~np.asarray(observed)] = 0.0
        agg[int(key[1])] = seq
    return hist, agg
