import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smooth_trajectron.exceptions import ConfigurationError, ParseError, ValidationError
from smooth_trajectron.scenes import (
    AgentClass,
    GapMeta,
    GenConfig,
    LANE_BOUNDARY,
    Scene,
    SceneSet,
    Standardizer,
    build_neighbor_graph,
    criticality,
    edge_keys,
    gap_accepted,
    generate_gap,
    generate_urban,
    load_tracks,
    make_split,
    save_tracks,
    split_critical,
    split_random,
    standardize,
)

from conftest import static_scene, track


# -- types -----------------------------------------------------------------


def test_track_rejects_nonuniform_frames():
    with pytest.raises(ValidationError):
        track(0, 0, np.zeros((3, 2)), frames=[0, 1, 3])


def test_track_rejects_nonfinite():
    with pytest.raises(ValidationError):
        track(0, 0, [[0, 0], [np.nan, 0]])


def test_state_at_absent_raises():
    tr = track(0, 0, np.zeros((3, 2)), presence=[True, False, True])
    assert tr.is_present(0) and not tr.is_present(1)
    with pytest.raises(ValidationError):
        tr.state_at(1)


def test_scene_duplicate_ids():
    with pytest.raises(ValidationError):
        Scene(0, 0.5, [track(1, 0, np.zeros((3, 2))), track(1, 1, np.zeros((3, 2)))])


def test_class_labels_round_trip():
    for c in AgentClass:
        assert AgentClass.from_label(c.label) is c


# -- generators ------------------------------------------------------------


def test_urban_has_both_classes():
    scenes = generate_urban(GenConfig(n_scenes=20), seed=1)
    assert len(scenes) == 20
    assert all(s.classes() == {AgentClass.VEHICLE, AgentClass.PEDESTRIAN} for s in scenes)


def test_urban_byte_identical(tmp_path):
    for name in ("a.csv", "b.csv"):
        save_tracks(generate_urban(GenConfig(n_scenes=3), seed=1), tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_urban_zero_pedestrians_rejected():
    with pytest.raises(ConfigurationError):
        generate_urban(GenConfig(n_scenes=2, n_pedestrians=0), seed=1)


def test_gap_threshold_noiseless():
    cfg = GenConfig()
    assert gap_accepted(cfg.gap_max, cfg.threshold, 0.0)
    assert not gap_accepted(cfg.gap_min, cfg.threshold, 0.0)


def test_gap_base_rate():
    scenes = generate_gap(GenConfig(n_scenes=200), seed=3)
    rate = np.mean([s.gap_meta.accepted for s in scenes])
    assert 0.3 <= rate <= 0.7


def test_gap_bad_range():
    with pytest.raises(ConfigurationError):
        generate_gap(GenConfig(n_scenes=2, gap_min=10, gap_max=10), seed=0)


def test_gap_accepted_ego_crosses_boundary(gap_small):
    for s in gap_small:
        ego = s.track(0)
        crossed = (ego.states[:, 1] > LANE_BOUNDARY).any()
        assert crossed == s.gap_meta.accepted


# -- io --------------------------------------------------------------------


def test_round_trip_two_scenes(tmp_path, gap_small):
    two = gap_small.subset([0, 1])
    save_tracks(two, tmp_path / "t.csv", tmp_path / "g.csv")
    assert load_tracks(tmp_path / "t.csv", tmp_path / "g.csv") == two


def test_round_trip_with_absences(tmp_path):
    sc = Scene(4, 0.5, [track(0, 0, np.arange(8.0).reshape(4, 2), presence=[True, False, True, True]),
                        track(1, 1, np.ones((4, 2)))])
    save_tracks(SceneSet([sc]), tmp_path / "t.csv")
    assert load_tracks(tmp_path / "t.csv")[0] == sc


def test_unknown_class_names_line(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("scene_id,frame,agent_id,class,x,y,vx,vy\n0,0,0,vehicle,0,0,0,0\n0,1,0,bicycle,0,0,0,0\n")
    with pytest.raises(ParseError, match="line 3"):
        load_tracks(p)


def test_header_only_is_empty(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("scene_id,frame,agent_id,class,x,y,vx,vy\n")
    assert len(load_tracks(p)) == 0


def test_nonuniform_grid(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("scene_id,frame,agent_id,class,x,y,vx,vy\n0,0,0,vehicle,0,0,0,0\n0,1,0,vehicle,0,0,0,0\n"
                 "0,3,0,vehicle,0,0,0,0\n")
    with pytest.raises(ValidationError):
        load_tracks(p)


# -- splits ----------------------------------------------------------------


def _gap_set(accepted, rejected):
    scenes = []
    for i, (g, a) in enumerate([(g, True) for g in accepted] + [(g, False) for g in rejected]):
        scenes.append(static_scene([(0, 0)], [0], n_frames=3, scene_id=i, gap_meta=GapMeta(g, a, 1)))
    return SceneSet(scenes)


def test_random_split_counts():
    ss = _gap_set(range(10), [])
    sp = split_random(ss, (0.8, 0.0, 0.2), seed=7)
    assert len(sp.train) == 8 and len(sp.test) == 2
    assert sorted(sp.train + sp.test) == list(range(10))
    assert sp == split_random(ss, (0.8, 0.0, 0.2), seed=7)


def test_random_split_bad_fractions():
    with pytest.raises(ConfigurationError):
        split_random(_gap_set(range(4), []), (0.5, 0.5, 0.5))


def test_critical_split_hand_case():
    ss = _gap_set([5, 10, 15, 20], [8, 12, 25])
    sp = split_critical(ss, 0.25)
    gaps = {(ss[i].gap_meta.gap_size, ss[i].gap_meta.accepted) for i in sp.test}
    assert (5, True) in gaps and (25, False) in gaps


def test_critical_split_needs_gap_meta():
    with pytest.raises(ValidationError):
        split_critical(SceneSet([static_scene([(0, 0)], [0], n_frames=3)]), 0.2)


def test_critical_tie_break_by_scene_id():
    ss = _gap_set([7.0] * 5, [7.0] * 5)
    sp = split_critical(ss, 0.2)
    assert sp.test == (0, 5)
    sp.check_covers(len(ss))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(6, 36), min_size=2, max_size=15), st.lists(st.floats(6, 36), min_size=2, max_size=15),
       st.floats(0.1, 0.5))
def test_critical_accepted_test_gaps_smallest(acc, rej, frac):
    ss = _gap_set(acc, rej)
    sp = split_critical(ss, frac)
    sp.check_covers(len(ss))
    test_acc = [ss[i].gap_meta.gap_size for i in sp.test if ss[i].gap_meta.accepted]
    train_acc = [ss[i].gap_meta.gap_size for i in sp.train if ss[i].gap_meta.accepted]
    if test_acc and train_acc:
        assert max(test_acc) <= min(train_acc)
    test_rej = [ss[i].gap_meta.gap_size for i in sp.test if not ss[i].gap_meta.accepted]
    train_rej = [ss[i].gap_meta.gap_size for i in sp.train if not ss[i].gap_meta.accepted]
    if test_rej and train_rej:
        assert min(test_rej) >= max(train_rej)


def test_criticality_sign():
    assert criticality(_gap_set([5], [])[0]) == -5
    assert criticality(_gap_set([], [9])[0]) == 9


def test_make_split_dispatch(gap_small):
    assert make_split(gap_small, "critical").method.value == "critical"
    assert make_split(gap_small, "random", seed=2).seed == 2


# -- graph -----------------------------------------------------------------


def test_radius_zero_empty():
    sc = static_scene([(0, 0), (1, 0), (0, 1)], [0, 0, 1])
    g = build_neighbor_graph(sc, 0, 9, 9, radius=0.0)
    assert all(len(ids) == 0 for per_frame in g.edges.values() for ids in per_frame)


def _neighbors(g, key):
    return g.edges[key]


def test_pedestrian_within_radius_listed_every_step():
    sc = static_scene([(0, 0), (3, 0)], [0, 1])
    g = build_neighbor_graph(sc, 0, 9, 9, radius=5.0)
    for ids in _neighbors(g, (AgentClass.VEHICLE, AgentClass.PEDESTRIAN)):
        assert list(ids) == [1]


def test_radius_threshold():
    sc = static_scene([(0, 0), (4, 0), (6, 0)], [0, 0, 0])
    g = build_neighbor_graph(sc, 0, 9, 9, radius=5.0)
    for ids in _neighbors(g, (AgentClass.VEHICLE, AgentClass.VEHICLE)):
        assert list(ids) == [1]


def test_focal_absent_raises():
    sc = Scene(0, 0.5, [track(0, 0, np.zeros((12, 2)), presence=[True] * 11 + [False])])
    with pytest.raises(ValidationError):
        build_neighbor_graph(sc, 0, 11, 9)


def test_edge_keys_order():
    assert edge_keys(AgentClass.PEDESTRIAN) == [(AgentClass.PEDESTRIAN, AgentClass.VEHICLE),
                                                (AgentClass.PEDESTRIAN, AgentClass.PEDESTRIAN)]


# -- standardize -----------------------------------------------------------


def test_standardizer_identity_case():
    rng = np.random.default_rng(0)
    xy = rng.normal(size=(50, 2))
    xy = (xy - xy.mean(0)) / xy.std(0)
    st_ = Standardizer().fit(SceneSet([Scene(0, 0.5, [track(0, 0, xy)])]))
    assert np.abs(st_.mean_).max() < 1e-9 and np.abs(st_.scale_ - 1).max() < 1e-9


def test_standardize_round_trip(urban_small):
    out, st_ = standardize(urban_small)
    back = st_.inverse_transform(out)
    for a, b in zip(back, urban_small):
        for ta, tb in zip(a.tracks, b.tracks):
            assert np.abs(ta.states - tb.states).max() < 1e-9


def test_standardizer_degenerate():
    with pytest.warns(RuntimeWarning):
        st_ = Standardizer().fit(SceneSet([Scene(0, 0.5, [track(0, 0, np.ones((5, 2)))])]))
    assert np.all(st_.scale_ == 1e-6) and st_.warning_


def test_standardize_uses_train_only(urban_small):
    _, full = standardize(urban_small)
    _, part = standardize(urban_small, train_indices=[0])
    assert not np.allclose(full.mean_, part.mean_)
