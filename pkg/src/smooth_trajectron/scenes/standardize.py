"""Position/velocity standardization fitted on training scenes."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ValidationError
from .types import AgentTrack, Scene, SceneSet

MIN_SCALE = 1e-6


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-coordinate shift/scale of positions; velocities share the scale.

    ``degenerate_`` flags coordinates whose spread fell below ``MIN_SCALE``
    and were floored.
    """

    def fit(self, X, y=None):
        pts = [tr.states[tr.presence, :2] for s in X for tr in s.tracks]
        pts = np.concatenate(pts) if pts else np.empty((0, 2))
        if len(pts) == 0:
            raise ValidationError("cannot fit a Standardizer on an empty scene set")
        self.mean_ = pts.mean(axis=0)
        std = pts.std(axis=0)
        self.degenerate_ = std < MIN_SCALE
        self.scale_ = np.where(self.degenerate_, MIN_SCALE, std)
        if self.degenerate_.any():
            warnings.warn("zero-variance coordinate; scale floored at 1e-6", RuntimeWarning, stacklevel=2)
        return self

    @property
    def warning_(self) -> bool:
        return bool(np.any(self.degenerate_))

    def transform_positions(self, pos):
        check_is_fitted(self)
        return (np.asarray(pos) - self.mean_) / self.scale_

    def inverse_positions(self, pos):
        check_is_fitted(self)
        return np.asarray(pos) * self.scale_ + self.mean_

    def transform_velocities(self, vel):
        check_is_fitted(self)
        return np.asarray(vel) / self.scale_

    def inverse_velocities(self, vel):
        check_is_fitted(self)
        return np.asarray(vel) * self.scale_

    def _map(self, X, pos_fn, vel_fn):
        out = []
        for s in X:
            tracks = []
            for tr in s.tracks:
                st = tr.states.copy()
                p = tr.presence
                st[p, :2] = pos_fn(st[p, :2])
                st[p, 2:] = vel_fn(st[p, 2:])
                tracks.append(AgentTrack(tr.agent_id, tr.semantic_class, tr.frames, st, tr.presence))
            out.append(Scene(s.scene_id, s.dt, tracks, s.gap_meta))
        return SceneSet(out, getattr(X, "source_tag", ""))

    def transform(self, X):
        return self._map(X, self.transform_positions, self.transform_velocities)

    def inverse_transform(self, X):
        return self._map(X, self.inverse_positions, self.inverse_velocities)


def standardize(scene_set: SceneSet, train_indices=None):
    """Fit on ``train_indices`` (default: all scenes), transform the whole set."""
    if len(scene_set) == 0:
        raise ValidationError("standardize needs a nonempty scene set")
    fit_on = scene_set if train_indices is None else scene_set.subset(train_indices)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        st = Standardizer().fit(fit_on)
    return st.transform(scene_set), st
