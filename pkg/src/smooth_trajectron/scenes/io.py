"""Track and gap-metadata CSV files.

Track file header: ``scene_id,frame,agent_id,class,x,y,vx,vy``; one row per
present agent state. Gap file header: ``scene_id,gap_size,accepted,decision_frame``.
Floats are written with ``repr`` so a save/load round trip is exact.
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict
from typing import Optional

import numpy as np

from ..exceptions import ParseError, ValidationError
from .types import AgentClass, AgentTrack, GapMeta, Scene, SceneSet

TRACK_HEADER = ["scene_id", "frame", "agent_id", "class", "x", "y", "vx", "vy"]
GAP_HEADER = ["scene_id", "gap_size", "accepted", "decision_frame"]


def save_tracks(scene_set: SceneSet, path, gap_path=None) -> None:
    """Write ``scene_set`` to ``path``; gap metadata goes to ``gap_path`` if given."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACK_HEADER)
        for scene in scene_set:
            rows = []
            for tr in scene.tracks:
                for f, st, p in zip(tr.frames, tr.states, tr.presence):
                    if p:
                        rows.append((int(f), tr.agent_id, tr.semantic_class.label, st))
            rows.sort(key=lambda r: (r[0], r[1]))
            for f, aid, label, st in rows:
                w.writerow([scene.scene_id, f, aid, label, *(repr(float(v)) for v in st)])
    if gap_path is not None:
        save_gap_meta(scene_set, gap_path)


def save_gap_meta(scene_set: SceneSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GAP_HEADER)
        for scene in scene_set:
            m = scene.gap_meta
            if m is not None:
                w.writerow([scene.scene_id, repr(float(m.gap_size)), int(m.accepted), m.decision_frame])


def _read_header(reader, expected, path):
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path}: missing header", line=1) from None
    if [h.strip() for h in header] != expected:
        raise ParseError(f"{path}: header must be {','.join(expected)}", line=1)


def load_gap_meta(path) -> dict:
    meta = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _read_header(reader, GAP_HEADER, path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(GAP_HEADER):
                raise ParseError(f"expected {len(GAP_HEADER)} fields, got {len(row)}", line=lineno)
            try:
                sid = int(row[0])
                gap = float(row[1])
                acc = row[2].strip()
                if acc not in ("0", "1"):
                    raise ValueError(f"accepted must be 0 or 1, got {acc!r}")
                meta[sid] = GapMeta(gap, acc == "1", int(row[3]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not np.isfinite(gap):
                raise ParseError("non-finite gap_size", line=lineno)
    return meta


def load_tracks(path, gap_path=None, dt: float = 0.5, source_tag: Optional[str] = None) -> SceneSet:
    """Read a track CSV (and optional gap CSV) into a SceneSet.

    Each scene's frame grid is the union of its frames, which must be
    uniformly spaced; agents absent from a grid frame get ``presence=False``.
    """
    per_scene = defaultdict(dict)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _read_header(reader, TRACK_HEADER, path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRACK_HEADER):
                raise ParseError(f"expected {len(TRACK_HEADER)} fields, got {len(row)}", line=lineno)
            try:
                sid, frame, aid = int(row[0]), int(row[1]), int(row[2])
                cls = AgentClass.from_label(row[3])
                state = tuple(float(v) for v in row[4:])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not all(np.isfinite(state)):
                raise ParseError("non-finite state value", line=lineno)
            agents = per_scene[sid]
            prev_cls, rows = agents.setdefault(aid, (cls, {}))
            if prev_cls != cls:
                raise ParseError(f"agent {aid} changes class", line=lineno)
            if frame in rows:
                raise ParseError(f"duplicate frame {frame} for agent {aid}", line=lineno)
            rows[frame] = state

    meta = load_gap_meta(gap_path) if gap_path is not None else {}
    scenes = []
    for sid in sorted(per_scene):
        agents = per_scene[sid]
        frames = sorted({f for _, rows in agents.values() for f in rows})
        grid = np.asarray(frames, dtype=np.int64)
        if len(grid) > 1:
            steps = np.diff(grid)
            if np.any(steps != steps[0]):
                raise ValidationError(f"scene {sid}: non-uniform frame grid")
        tracks = []
        for aid in sorted(agents):
            cls, rows = agents[aid]
            states = np.zeros((len(grid), 4))
            presence = np.zeros(len(grid), dtype=bool)
            for k, f in enumerate(frames):
                if f in rows:
                    states[k] = rows[f]
                    presence[k] = True
            tracks.append(AgentTrack(aid, cls, grid, states, presence))
        scenes.append(Scene(sid, dt, tracks, meta.get(sid)))
    missing = set(meta) - set(per_scene)
    if missing:
        raise ValidationError(f"gap metadata for unknown scenes {sorted(missing)}")
    tag = source_tag if source_tag is not None else os.path.splitext(os.path.basename(str(path)))[0]
    return SceneSet(scenes, tag)
