"""Synchronization metrics over states and trajectories.

All metrics accept states of shape ``(..., p, 2)`` and reduce the last two
axes, so they work equally on a single state, a batch, or a whole sampled
trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory

__all__ = [
    "SyncMetrics",
    "dist_to_manifold",
    "max_pairwise",
    "pairwise_distances",
    "sync_metrics",
    "settle_time",
    "settle_index",
    "hull_diameter_series",
    "averaging_error",
]


def _blocks(state) -> np.ndarray:
    state = np.asarray(getattr(state, "coords", state), dtype=float)
    if state.ndim == 1:
        state = state.reshape(-1, 2)
    return state


def dist_to_manifold(state):
    """Euclidean distance from the stacked state to the set of equal blocks.

    The nearest synchronized point repeats the block mean, so the distance is
    ``sqrt(sum_i |x_i - mean|^2)``.
    """
    x = _blocks(state)
    centered = x - x.mean(axis=-2, keepdims=True)
    out = np.sqrt(np.sum(centered * centered, axis=(-2, -1)))
    return float(out) if out.ndim == 0 else out


def pairwise_distances(state) -> np.ndarray:
    x = _blocks(state)
    d = x[..., :, None, :] - x[..., None, :, :]
    return np.hypot(d[..., 0], d[..., 1])


def max_pairwise(state):
    out = pairwise_distances(state).max(axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


@dataclass
class SyncMetrics:
    dist_to_manifold: float
    max_pairwise: float
    pairwise: np.ndarray

    def to_dict(self) -> dict:
        return {"dist_to_manifold": self.dist_to_manifold,
                "max_pairwise": self.max_pairwise,
                "pairwise": self.pairwise.tolist()}


def sync_metrics(state) -> SyncMetrics:
    x = _blocks(state)
    if x.ndim != 2:
        raise ValueError("sync_metrics expects a single (p, 2) state")
    return SyncMetrics(dist_to_manifold(x), max_pairwise(x), pairwise_distances(x))


_METRICS = {"max_pairwise": max_pairwise, "dist_to_manifold": dist_to_manifold}


def settle_index(series, eps: float) -> int | None:
    """First index from which ``series <= eps`` holds through the end."""
    series = np.asarray(series)
    if series.size == 0:
        raise ValueError("empty series")
    above = np.nonzero(~(series <= eps))[0]
    if above.size == 0:
        return 0
    k = int(above[-1]) + 1
    return k if k < series.size else None


def settle_time(traj: Trajectory, eps: float, metric: str = "max_pairwise"):
    """Smallest sample time after which ``metric <= eps`` at every later sample.

    Returns ``None`` when the final sample still exceeds ``eps``.  For
    batched trajectories the result is per batch member (list).
    """
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    series = np.asarray(_METRICS[metric](traj.states))
    if series.ndim == 1:
        k = settle_index(series, eps)
        return None if k is None else float(traj.times[k])
    flat = series.reshape(len(traj), -1)
    out = []
    for col in flat.T:
        k = settle_index(col, eps)
        out.append(None if k is None else float(traj.times[k]))
    return out


def hull_diameter_series(traj: Trajectory) -> np.ndarray:
    """Max pairwise distance at every sample (diameter of the point cloud)."""
    if traj.frame != "averaged":
        raise ValueError("hull diameter series is defined for averaged trajectories")
    return np.asarray(max_pairwise(traj.states))


def averaging_error(traj_rotating: Trajectory, traj_averaged: Trajectory) -> float:
    """Sup over common samples of the stacked-state distance between two runs."""
    a, b = traj_rotating, traj_averaged
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0.0, atol=1e-9):
        raise ValueError("trajectories are sampled on different grids")
    if a.states.shape != b.states.shape:
        raise ValueError("trajectories have different state shapes")
    diff = a.states - b.states
    return float(np.sqrt(np.sum(diff * diff, axis=(-2, -1))).max())
