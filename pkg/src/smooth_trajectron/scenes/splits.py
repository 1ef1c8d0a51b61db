"""Train/val/test partitions: random and critical (extrapolation) splits."""

from __future__ import annotations

import math

import numpy as np

from ..exceptions import ConfigurationError, ValidationError
from .types import DataSplit, SceneSet, SplitMethod


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_random(scene_set: SceneSet, fractions=(0.8, 0.0, 0.2), seed: int = 0) -> DataSplit:
    """Seeded random partition; rounding remainders go to train."""
    fr = np.asarray(fractions, dtype=float)
    if fr.shape != (3,) or np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise ConfigurationError(
            f"fractions: must be three nonnegative values summing to 1, got {tuple(fractions)}",
            field="fractions",
        )
    n = len(scene_set)
    n_val = _round_half_up(fr[1] * n)
    n_test = _round_half_up(fr[2] * n)
    n_train = n - n_val - n_test
    if n_train < 0:
        n_test += n_train
        n_train = 0
    perm = np.random.default_rng(seed).permutation(n)
    split = DataSplit(
        train=tuple(sorted(int(i) for i in perm[:n_train])),
        val=tuple(sorted(int(i) for i in perm[n_train : n_train + n_val])),
        test=tuple(sorted(int(i) for i in perm[n_train + n_val :])),
        method=SplitMethod.RANDOM,
        seed=seed,
    )
    split.check_covers(n)
    return split


def criticality(scene) -> float:
    """Higher is more unusual: small accepted gaps and large rejected gaps."""
    m = scene.gap_meta
    return -m.gap_size if m.accepted else m.gap_size


def split_critical(scene_set: SceneSet, test_fraction: float = 0.2) -> DataSplit:
    """Send the most unusual decisions of each label to test.

    Within each label class the top ``round(test_fraction * n_class)`` scenes
    by criticality form the test set; ties go to the lower scene id first.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError("test_fraction: must lie in (0, 1)", field="test_fraction")
    for s in scene_set:
        if s.gap_meta is None:
            raise ValidationError(f"scene {s.scene_id} has no gap metadata; critical split needs it")
    test = []
    for label in (True, False):
        idx = [i for i, s in enumerate(scene_set) if s.gap_meta.accepted == label]
        idx.sort(key=lambda i: (-criticality(scene_set[i]), scene_set[i].scene_id))
        test.extend(idx[: _round_half_up(test_fraction * len(idx))])
    test_set = set(test)
    split = DataSplit(
        train=tuple(i for i in range(len(scene_set)) if i not in test_set),
        val=(),
        test=tuple(sorted(test_set)),
        method=SplitMethod.CRITICAL,
        seed=0,
    )
    split.check_covers(len(scene_set))
    return split


def make_split(scene_set: SceneSet, method, seed: int = 0, test_fraction: float = 0.2, val_fraction: float = 0.0) -> DataSplit:
    method = SplitMethod(method)
    if method is SplitMethod.CRITICAL:
        return split_critical(scene_set, test_fraction)
    return split_random(scene_set, (1.0 - test_fraction - val_fraction, val_fraction, test_fraction), seed)
