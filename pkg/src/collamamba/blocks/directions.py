"""Scan orders over a 2D token grid.

A direction order is a permutation over the H*W row-major token ids:
``seq = tokens_flat[perm]`` lays tokens out in visit order, and
``y_restored = y_scanned[inverse]`` puts results back.  Left/right walk
rows; top-down/bottom-up walk columns.
"""

from __future__ import annotations

import enum
from functools import lru_cache

import numpy as np


class DirectionOrder(enum.Enum):
    LEFT_RIGHT = "left_right"
    RIGHT_LEFT = "right_left"
    TOP_DOWN = "top_down"
    BOTTOM_UP = "bottom_up"


SCAN_DIRECTIONS = (DirectionOrder.LEFT_RIGHT, DirectionOrder.RIGHT_LEFT,
                   DirectionOrder.TOP_DOWN, DirectionOrder.BOTTOM_UP)


@lru_cache(maxsize=None)
def order_directions(h: int, w: int, direction: DirectionOrder) -> np.ndarray:
    if h < 1 or w < 1:
        raise ValueError("grid extents must be >= 1")
    ids = np.arange(h * w, dtype=np.int64)
    if direction is DirectionOrder.LEFT_RIGHT:
        perm = ids
    elif direction is DirectionOrder.RIGHT_LEFT:
        perm = ids[::-1]
    elif direction is DirectionOrder.TOP_DOWN:
        perm = ids.reshape(h, w).T.reshape(-1)
    elif direction is DirectionOrder.BOTTOM_UP:
        perm = ids.reshape(h, w).T.reshape(-1)[::-1]
    else:  # pragma: no cover
        raise ValueError(f"unknown direction {direction}")
    perm = np.ascontiguousarray(perm)
    perm.setflags(write=False)
    return perm


@lru_cache(maxsize=None)
def inverse_order(h: int, w: int, direction: DirectionOrder) -> np.ndarray:
    perm = order_directions(h, w, direction)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size, dtype=np.int64)
    inv.setflags(write=False)
    return inv


@lru_cache(maxsize=None)
def temporal_order(n_frames: int, frame_len: int) -> np.ndarray:
    """Position-major, time-minor order over T*HW tokens laid out
    frame-major: visit every frame's token at position 0, then position 1..."""
    perm = (np.arange(n_frames, dtype=np.int64)[None, :] * frame_len
            + np.arange(frame_len, dtype=np.int64)[:, None]).reshape(-1)
    perm.setflags(write=False)
    return perm


@lru_cache(maxsize=None)
def temporal_order_inverse(n_frames: int, frame_len: int) -> np.ndarray:
    perm = temporal_order(n_frames, frame_len)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size, dtype=np.int64)
    inv.setflags(write=False)
    return inv
