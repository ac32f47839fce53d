"""Coarsening of lattice paths.

Paths are ``(m, 2)`` integer arrays of ``[x, y]`` points, consecutive points
4-adjacent.  The box grid of side ``L`` is always anchored at the global origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "as_path",
    "is_lattice_path",
    "CoarsePath",
    "l_coarsening",
    "is_simple",
    "is_l_segment",
    "last_hit_left_of",
    "loop_erase",
]


def as_path(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) == 0:
        raise ValueError("a path is a nonempty sequence of (x, y) pairs")
    return arr


def is_lattice_path(points) -> bool:
    arr = as_path(points)
    if len(arr) == 1:
        return True
    return bool(np.all(np.abs(np.diff(arr, axis=0)).sum(axis=1) == 1))


@dataclass(frozen=True, eq=False)
class CoarsePath:
    side: float
    centers: np.ndarray  # (k, 2) float, exact half-integers

    def __len__(self):
        return len(self.centers)


def l_coarsening(path, side) -> CoarsePath:
    """Sequence of ``side``-box centers visited, one entry per box change.

    ``side`` must be a power of two.  ``side = 0.5`` is accepted as the
    identity coarsening of a level-0 crossing.
    """
    pts = as_path(path)
    if side == 0.5:
        return CoarsePath(0.5, pts.astype(np.float64))
    side = int(side)
    if side < 1 or side & (side - 1):
        raise ValueError("side must be a power of two")
    boxes = pts // side
    keep = np.ones(len(boxes), dtype=bool)
    keep[1:] = np.any(boxes[1:] != boxes[:-1], axis=1)
    centers = boxes[keep] * side + (side - 1) / 2.0
    return CoarsePath(float(side), centers)


def is_simple(coarse: CoarsePath) -> bool:
    c = coarse.centers
    return len(np.unique(c, axis=0)) == len(c)


def is_l_segment(path, level: int) -> bool:
    """True iff the ``2**level``-coarsening is a three-box L: vertical step
    (up or down) followed by a step to the right."""
    side = 1 << level
    c = l_coarsening(path, side).centers
    if len(c) != 3:
        return False
    d1, d2 = c[1] - c[0], c[2] - c[1]
    return d1[0] == 0 and abs(d1[1]) == side and d2[0] == side and d2[1] == 0


def last_hit_left_of(coarse: CoarsePath, x_line) -> np.ndarray:
    """Last center strictly to the left of the vertical line ``x = x_line``."""
    left = np.flatnonzero(coarse.centers[:, 0] < x_line)
    if len(left) == 0:
        raise ValueError(f"no center lies left of x = {x_line}")
    return coarse.centers[left[-1]]


def loop_erase(path) -> np.ndarray:
    """Chronological loop erasure: the returned path is simple and its points
    are a subsequence of the input."""
    pts = as_path(path)
    out: list[tuple[int, int]] = []
    where: dict[tuple[int, int], int] = {}
    for x, y in pts.tolist():
        p = (x, y)
        if p in where:
            cut = where[p] + 1
            for q in out[cut:]:
                del where[q]
            del out[cut:]
        else:
            where[p] = len(out)
            out.append(p)
    return np.array(out, dtype=np.int64)
