"""Bagged regression forest over the tree kernels.

Each tree grows on a bootstrap sample (n draws with replacement) with
``mtry`` features considered per node (default max(1, p // 3)), splits
chosen by variance reduction at midpoints between distinct sorted
values, and at least ``min_node_size`` observations per child.  Leaf
values are means over the full training rows routed through the grown
tree, so bagging randomizes structure while every tree's degenerate
single-leaf form predicts exactly the training mean.  Predictions
average the trees and are therefore always convex combinations of
training targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import DomainError
from ..numkit import RngStream

__all__ = ["ForestState", "fit_forest"]


@dataclass(frozen=True)
class ForestState:
    """Packed node arrays for all trees; tree t spans
    ``offsets[t]:offsets[t+1]`` and left/right hold global ids."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray

    def predict_inner(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[0], dtype=np.float64)
        _kernels.predict_forest(
            self.feature, self.threshold, self.left, self.right, self.value,
            self.offsets, x, out,
        )
        return out


def fit_forest(
    x: np.ndarray,
    y: np.ndarray,
    n_trees: int,
    mtry: int | None,
    min_node_size: int,
    max_depth: int,
    rng: RngStream,
) -> ForestState:
    n, p = x.shape
    if mtry is None:
        mtry = max(1, p // 3)
    if mtry > p:
        raise DomainError(f"mtry={mtry} exceeds the {p} available features")

    streams = rng.split(n_trees)
    parts: list[tuple[np.ndarray, ...]] = []
    for t in range(n_trees):
        gen = streams[t].generator()
        boot = gen.integers(0, n, size=n, dtype=np.int64)
        seed = np.uint64(streams[t].key64())
        feature, threshold, left, right, value = _kernels.build_tree(
            x, y, boot, mtry, min_node_size, max_depth, seed
        )
        _kernels.refine_leaf_values(feature, threshold, left, right, value, x, y)
        parts.append((feature, threshold, left, right, value))

    sizes = [part[0].shape[0] for part in parts]
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    feature = np.concatenate([part[0] for part in parts])
    threshold = np.concatenate([part[1] for part in parts])
    value = np.concatenate([part[4] for part in parts])
    left = np.concatenate(
        [np.where(part[2] >= 0, part[2] + offsets[t], -1).astype(np.int32) for t, part in enumerate(parts)]
    )
    right = np.concatenate(
        [np.where(part[3] >= 0, part[3] + offsets[t], -1).astype(np.int32) for t, part in enumerate(parts)]
    )
    return ForestState(
        feature=feature, threshold=threshold, left=left, right=right,
        value=value, offsets=offsets,
    )
