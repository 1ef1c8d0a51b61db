import numpy as np
import pytest

from smooth_trajectron.exceptions import ValidationError
from smooth_trajectron.features import EDGE_DIM, STATE_DIM, aggregate_edges, extract_samples, reference_sample
from smooth_trajectron.scenes import AgentClass, DEFAULT_RADIUS, build_neighbor_graph

from conftest import static_scene


def test_vectorized_matches_reference(urban_small):
    s = extract_samples(urban_small, 9, 8, n_input=4, stride=2)
    assert len(s) > 0
    rng = np.random.default_rng(0)
    for i in rng.choice(len(s), size=20, replace=False):
        scene = urban_small[int(s.scene_index[i])]
        hist, agg = reference_sample(scene, int(s.agent_id[i]), int(s.frame[i]), 9, n_input=4)
        np.testing.assert_allclose(s.hist[i], hist, atol=1e-12)
        np.testing.assert_allclose(s.agg[i], agg, atol=1e-12)


def test_shapes(urban_small):
    s = extract_samples(urban_small, 9, 8)
    assert s.hist.shape[1:] == (10, STATE_DIM)
    assert s.agg.shape[1:] == (2, 10, EDGE_DIM)
    assert s.future.shape[1:] == (8, 4)


def test_n_input_masks_front():
    sc = static_scene([(0, 0), (1, 0)], [0, 0], n_frames=20)
    s = extract_samples([sc], 9, 8, n_input=2)
    assert np.all(s.hist[:, :8] == 0) and np.all(s.hist[:, 8:, -1] == 1)
    assert np.all(s.agg[:, :, :8] == 0)


def test_n_input_out_of_range():
    sc = static_scene([(0, 0)], [0], n_frames=20)
    with pytest.raises(ValidationError):
        extract_samples([sc], 9, 8, n_input=11)


def test_aggregate_empty_is_zero():
    sc = static_scene([(0, 0), (50, 0)], [0, 0])
    g = build_neighbor_graph(sc, 0, 9, 9, DEFAULT_RADIUS)
    assert np.all(aggregate_edges(g, sc, (AgentClass.VEHICLE, AgentClass.VEHICLE)) == 0)


def test_aggregate_single_and_sum():
    sc = static_scene([(0, 0), (1, 0), (2, 0)], [0, 0, 0])
    g = build_neighbor_graph(sc, 0, 9, 9, DEFAULT_RADIUS)
    agg = aggregate_edges(g, sc, (AgentClass.VEHICLE, AgentClass.VEHICLE))
    assert np.allclose(agg[:, :2], [3.0, 0.0])
    sc1 = static_scene([(0, 0), (1, 2)], [0, 1])
    g1 = build_neighbor_graph(sc1, 0, 9, 9, DEFAULT_RADIUS)
    assert np.allclose(aggregate_edges(g1, sc1, (AgentClass.VEHICLE, AgentClass.PEDESTRIAN))[:, :2], [1.0, 2.0])
