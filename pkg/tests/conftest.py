import numpy as np
import pytest

from smooth_trajectron.scenes import AgentClass, AgentTrack, GapMeta, GenConfig, Scene, SceneSet, generate_gap, generate_urban

TINY = dict(hidden_dim=8, edge_hidden_dim=6, attention_dim=6, future_dim=6, latent_hidden_dim=8, decoder_dim=8, n_modes=3)


def track(agent_id, cls, xy, frames=None, vel=None, presence=None):
    xy = np.asarray(xy, dtype=float)
    n = len(xy)
    frames = np.arange(n) if frames is None else np.asarray(frames)
    vel = np.zeros((n, 2)) if vel is None else np.asarray(vel, dtype=float)
    presence = np.ones(n, bool) if presence is None else np.asarray(presence, bool)
    return AgentTrack(agent_id, AgentClass(cls), frames, np.hstack([xy, vel]), presence)


def static_scene(positions, classes, n_frames=12, scene_id=0, gap_meta=None):
    """Agents parked at fixed positions for ``n_frames`` frames."""
    tracks = [track(i, c, np.tile(p, (n_frames, 1))) for i, (p, c) in enumerate(zip(positions, classes))]
    return Scene(scene_id, 0.5, tracks, gap_meta)


@pytest.fixture(scope="session")
def urban_small():
    return generate_urban(GenConfig(n_scenes=6), seed=1)


@pytest.fixture(scope="session")
def gap_small():
    return generate_gap(GenConfig(n_scenes=30), seed=3)


@pytest.fixture(scope="session")
def fitted_tiny(urban_small):
    from smooth_trajectron import SmoothTrajectron

    return SmoothTrajectron(epochs=2, n_samples=20, **TINY).fit(urban_small)
