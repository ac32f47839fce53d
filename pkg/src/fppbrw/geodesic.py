"""Vertex-weighted shortest crossings on lattice rectangles.

Distances count the weight of every visited vertex, both endpoints included.
All paths are ``(m, 2)`` int64 arrays of global ``[x, y]`` coordinates.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numba
import numpy as np

from .coarsen import as_path

__all__ = [
    "WeightGrid",
    "CrossingResult",
    "shortest_path",
    "crossing_distance",
    "crossing_bruteforce",
    "path_weight",
    "splice",
    "segment",
    "annulus_pieces",
    "annulus_contour",
]


@dataclass(frozen=True, eq=False)
class WeightGrid:
    """Positive vertex weights over a rectangle; ``weights[y - y0, x - x0]``."""

    weights: np.ndarray
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.size == 0:
            raise ValueError("weights must be a nonempty 2-d array")
        if not np.all(w > 0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))

    @classmethod
    def from_field(cls, values, gamma: float, origin=(0, 0)):
        return cls(np.exp(gamma * np.asarray(values, dtype=np.float64)), origin)

    @property
    def bounds(self) -> tuple[int, int, int, int]:
        h, w = self.weights.shape
        return self.origin[0], self.origin[1], self.origin[0] + w - 1, self.origin[1] + h - 1

    def window(self, rect) -> np.ndarray:
        x0, y0, x1, y1 = rect
        gx0, gy0, gx1, gy1 = self.bounds
        if x0 > x1 or y0 > y1:
            raise ValueError(f"empty rectangle {rect}")
        if x0 < gx0 or y0 < gy0 or x1 > gx1 or y1 > gy1:
            raise ValueError(f"rectangle {rect} not inside grid {self.bounds}")
        return self.weights[y0 - gy0:y1 - gy0 + 1, x0 - gx0:x1 - gx0 + 1]


@dataclass(frozen=True, eq=False)
class CrossingResult:
    weight: float
    path: np.ndarray


@numba.njit(cache=True, nogil=True)
def _dijkstra(w, rank, src, dst):
    h, wd = w.shape
    n = h * wd
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, np.int64)
    done = np.zeros(n, np.bool_)
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for v in range(n):
        y = v // wd
        x = v - y * wd
        if src[y, x] and rank[y, x] >= 0:
            dist[v] = w[y, x]
            heapq.heappush(heap, (dist[v], np.int64(v)))
    target = -1
    while len(heap) > 0:
        d, v = heapq.heappop(heap)
        if done[v] or d > dist[v]:
            continue
        done[v] = True
        y = v // wd
        x = v - y * wd
        if dst[y, x]:
            target = v
            break
        r = rank[y, x]
        for step in range(4):
            if step == 0:
                ny, nx = y - 1, x
            elif step == 1:
                ny, nx = y, x - 1
            elif step == 2:
                ny, nx = y, x + 1
            else:
                ny, nx = y + 1, x
            if ny < 0 or ny >= h or nx < 0 or nx >= wd:
                continue
            rr = rank[ny, nx]
            if rr != r and rr != r + 1:
                continue
            u = ny * wd + nx
            if done[u]:
                continue
            nd = d + w[ny, nx]
            if nd < dist[u]:
                dist[u] = nd
                pred[u] = v
                heapq.heappush(heap, (nd, np.int64(u)))
            elif nd == dist[u] and v < pred[u]:
                pred[u] = v
    if target < 0:
        return np.inf, np.empty(0, np.int64)
    length = 0
    v = target
    while v >= 0:
        length += 1
        v = pred[v]
    out = np.empty(length, np.int64)
    v = target
    for i in range(length - 1, -1, -1):
        out[i] = v
        v = pred[v]
    return dist[target], out


def shortest_path(weights, rank, src, dst, origin=(0, 0)):
    """Minimum-weight path from any ``src`` vertex to the first reachable ``dst`` vertex.

    A move from ``a`` to ``b`` is allowed only when ``rank[b]`` equals
    ``rank[a]`` or ``rank[a] + 1``; negative rank blocks a vertex.  Returns
    ``(weight, path)`` or ``(inf, None)`` when no path exists.
    """
    w = np.ascontiguousarray(weights, dtype=np.float64)
    rank = np.ascontiguousarray(rank, dtype=np.int32)
    d, idx = _dijkstra(w, rank, np.ascontiguousarray(src, dtype=np.bool_), np.ascontiguousarray(dst, dtype=np.bool_))
    if len(idx) == 0:
        return np.inf, None
    ys, xs = np.divmod(idx, w.shape[1])
    return float(d), np.stack([xs + origin[0], ys + origin[1]], axis=1)


def crossing_distance(grid: WeightGrid, sub=None, direction: str = "lr") -> CrossingResult:
    """Exact minimum-weight crossing of ``sub`` (inclusive ``x0, y0, x1, y1``).

    ``direction`` is ``"lr"`` (left to right) or ``"td"`` (top row to bottom row).
    """
    rect = grid.bounds if sub is None else tuple(int(v) for v in sub)
    w = grid.window(rect)
    src = np.zeros(w.shape, dtype=bool)
    dst = np.zeros(w.shape, dtype=bool)
    if direction == "lr":
        src[:, 0] = True
        dst[:, -1] = True
    elif direction == "td":
        src[-1, :] = True
        dst[0, :] = True
    else:
        raise ValueError(f"unknown direction {direction!r}")
    d, path = shortest_path(w, np.zeros(w.shape, np.int32), src, dst, (rect[0], rect[1]))
    return CrossingResult(d, path)


def crossing_bruteforce(weights, direction: str = "lr") -> float:
    """Minimum crossing weight by exhaustive search over simple paths.

    Branch-and-bound depth-first search; meant for grids of a few dozen vertices.
    """
    w = np.asarray(weights, dtype=np.float64)
    if direction == "td":
        w = w[::-1].T  # top row becomes left column
    elif direction != "lr":
        raise ValueError(f"unknown direction {direction!r}")
    h, wd = w.shape
    wl = w.tolist()
    best = [float(w.sum()) + 1.0]
    seen = [[False] * wd for _ in range(h)]

    def dfs(y, x, acc):
        if acc >= best[0]:
            return
        if x == wd - 1:
            best[0] = acc
            return
        seen[y][x] = True
        for ny, nx in ((y, x + 1), (y - 1, x), (y + 1, x), (y, x - 1)):
            if 0 <= ny < h and 0 <= nx < wd and not seen[ny][nx]:
                dfs(ny, nx, acc + wl[ny][nx])
        seen[y][x] = False

    for y0 in range(h):
        dfs(y0, 0, wl[y0][0])
    return best[0]


def path_weight(grid: WeightGrid, path) -> float:
    """Sum of weights over the set of visited vertices."""
    pts = np.unique(as_path(path), axis=0)
    x0, y0, x1, y1 = grid.bounds
    if np.any(pts[:, 0] < x0) or np.any(pts[:, 0] > x1) or np.any(pts[:, 1] < y0) or np.any(pts[:, 1] > y1):
        raise ValueError("path leaves the grid")
    return float(grid.weights[pts[:, 1] - y0, pts[:, 0] - x0].sum())


def _first_common(a: np.ndarray, b: np.ndarray):
    bidx = {}
    for k, p in enumerate(map(tuple, b.tolist())):
        bidx.setdefault(p, k)
    for k, p in enumerate(map(tuple, a.tolist())):
        if p in bidx:
            return k, bidx[p]
    return None


def splice(a, b) -> np.ndarray:
    """Follow ``a`` to its first vertex shared with ``b``, then ``b`` onward."""
    a, b = as_path(a), as_path(b)
    hit = _first_common(a, b)
    if hit is None:
        raise ValueError("paths share no vertex")
    ia, ib = hit
    return np.concatenate([a[:ia], b[ib:]])


def segment(path: np.ndarray, i: int, j: int) -> np.ndarray:
    """Sub-path between indices ``i`` and ``j`` inclusive, in the direction i -> j."""
    return path[i:j + 1] if i <= j else path[j:i + 1][::-1]


def _clip(rect, bounds):
    x0, y0, x1, y1 = rect
    bx0, by0, bx1, by1 = bounds
    r = (max(x0, bx0), max(y0, by0), min(x1, bx1), min(y1, by1))
    return None if r[0] > r[2] or r[1] > r[3] else r


def annulus_pieces(grid: WeightGrid, corner, side: int, width: int | None = None, clip=None):
    """Minimum crossings of the four side strips around an inner box.

    The inner box has lower-left ``corner`` and side ``side``; the outer box
    extends ``width`` (default ``side // 2``) beyond it.  Strips are clipped to
    ``clip`` (default: the grid); strips that become empty or lose their
    crossing direction are skipped.  Returns ``{"top", "bottom", "left",
    "right"} -> path`` for the strips that survive.
    """
    width = side // 2 if width is None else width
    if width < 1:
        raise ValueError("annulus too thin")
    cx, cy = corner
    ox0, oy0 = cx - width, cy - width
    ox1, oy1 = cx + side - 1 + width, cy + side - 1 + width
    strips = {
        "top": ((ox0, cy + side, ox1, oy1), "lr"),
        "bottom": ((ox0, oy0, ox1, cy - 1), "lr"),
        "left": ((ox0, oy0, cx - 1, oy1), "td"),
        "right": ((cx + side, oy0, ox1, oy1), "td"),
    }
    bounds = grid.bounds if clip is None else _clip(clip, grid.bounds)
    out = {}
    for name, (rect, direction) in strips.items():
        r = _clip(rect, bounds) if bounds is not None else None
        if r is None:
            continue
        out[name] = crossing_distance(grid, r, direction).path
    return out


def annulus_contour(grid: WeightGrid, corner, side: int, width: int | None = None) -> CrossingResult:
    """Closed walk in the annulus around an inner box, separating it from the outside.

    Formed from the four strip crossings by joining consecutive ones at a
    shared vertex; its vertex set lies in their union.
    """
    width = side // 2 if width is None else width
    if width < 1:
        raise ValueError("annulus too thin")
    cx, cy = corner
    outer = (cx - width, cy - width, cx + side - 1 + width, cy + side - 1 + width)
    if _clip(outer, grid.bounds) != outer:
        raise ValueError("annulus does not fit in the grid")
    pieces = annulus_pieces(grid, corner, side, width)
    order = [pieces["top"], pieces["right"], pieces["bottom"], pieces["left"]]
    joints = []
    for a, b in zip(order, order[1:] + order[:1]):
        hit = _first_common(a, b)
        if hit is None:  # strips overlap in the corner squares, so this cannot happen
            raise AssertionError("annulus strips failed to intersect")
        joints.append(hit)
    walk = []
    for k, piece in enumerate(order):
        start = joints[k - 1][1]  # where the previous piece entered this one
        end = joints[k][0]
        walk.append(segment(piece, start, end)[:-1])
    walk = np.concatenate(walk + [walk[0][:1]])
    return CrossingResult(path_weight(grid, walk), walk)
