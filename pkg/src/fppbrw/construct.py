"""Inductive construction of light crossings on the switched-sign field.

Level ``l`` crossings live on rectangles ``V_L^(Gamma, u)`` with ``L = 2**l``
and ``u`` in ``A_(l, Gamma)``; they are evaluated under the level-``l`` field
``chi^(L, u)``.  A level ``l + 1`` crossing is assembled from the four level
``l`` crossings of its quadrants:

* Case 1/2 keeps one row per half, chosen by the sign of the row-dependent
  part of ``sum_j d_j Z_(i, k, j)``, and links the halves through the two
  middle columns.
* Case 3 joins each row across the middle first, then switches rows wherever
  the regularized-total-variation optimum of the process ``S`` changes sign,
  using a switching gadget (two annulus contours and a vertical crossing).

Every join is realised by a box-monotone shortest path through the union of
the linking crossings (falling back to the full corridor of boxes when that
union is disconnected), followed by loop erasure.  This keeps the
``L``-coarsening equal to the planned staircase and preserves the last-hit
points of the sub-crossings on every even column line.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .coarsen import CoarsePath, is_lattice_path, is_simple, l_coarsening, last_hit_left_of, loop_erase
from .field import GaussianSource, chi_step_increment, chi_step_tables, level_coeffs
from .geodesic import WeightGrid, annulus_pieces, crossing_distance, path_weight, shortest_path
from .rtv import rtv_dp, rtv_signs

__all__ = [
    "Case",
    "ConstructParams",
    "CrossingLevel",
    "SwitchPlan",
    "base_crossing",
    "classify_case",
    "case1_extend",
    "case3_extend",
    "extend",
    "level_stats",
    "check_crossing",
    "check_last_hits",
    "run_induction",
    "reflect_coarse",
    "MAX_CONSTRUCT_LEVEL",
]

MAX_CONSTRUCT_LEVEL = 12


class Case(enum.Enum):
    CASE1 = 1
    CASE2 = 2
    CASE3 = 3


@dataclass(frozen=True)
class ConstructParams:
    gamma: float
    gamma_cells: int = 3
    delta_exp: int = 2
    cutoff: int = 2
    mass_exponents: tuple[float, float] = (2.0 / 3.0, 1.0 / 10.0)
    penalty_factor: float | None = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.gamma_cells < 3 or self.gamma_cells % 2 == 0:
            raise ValueError("gamma_cells must be odd and at least 3")
        if self.delta_exp < 0:
            raise ValueError("delta_exp must be nonnegative")

    @classmethod
    def paper_defaults(cls, gamma: float, gamma_cells: int = 3) -> "ConstructParams":
        """delta = 2**-100 and cutoff 60; both are inert at reachable sizes."""
        return cls(gamma, gamma_cells, delta_exp=100, cutoff=60)

    @property
    def delta(self) -> float:
        return 2.0 ** (-self.delta_exp)

    @property
    def penalty(self) -> float:
        if self.penalty_factor is not None:
            return self.penalty_factor
        return (1.0 + 20.0 * self.delta) / self.gamma_cells

    def hit_box(self, side: int) -> int:
        """Side of the boxes that localise last hits at scale ``side``."""
        return max(side >> self.delta_exp, 1)

    def gadget_box(self, side: int) -> int:
        return max(side >> self.delta_exp, 2)


@dataclass(frozen=True, eq=False)
class SwitchPlan:
    rows: tuple[int, ...]  # row (1 top, 2 bottom) of each of the 2*Gamma columns
    half_rows: tuple[int, int] | None = None  # Case 1/2: (i(1), i(2))
    signs: np.ndarray | None = None  # Case 3: RTV signs over the doubled index list

    @property
    def switch_columns(self) -> list[int]:
        return [g + 1 for g in range(len(self.rows) - 1) if self.rows[g] != self.rows[g + 1]]

    @property
    def switches(self) -> int:
        return len(self.switch_columns)


@dataclass(eq=False)
class CrossingLevel:
    level: int
    origin: tuple[int, int]
    gamma_cells: int
    path: np.ndarray
    d_total: float
    d_cells: np.ndarray
    coarse: CoarsePath
    last_hits: np.ndarray  # (Gamma, 2) centers of the hit boxes, one per line x = u_x + jL - 1
    case: Case | None = None
    plan: SwitchPlan | None = None
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def side(self) -> int:
        return 1 << self.level

    @property
    def rect(self) -> tuple[int, int, int, int]:
        L = self.side
        return (self.origin[0], self.origin[1], self.origin[0] + self.gamma_cells * L - 1, self.origin[1] + L - 1)


# -- geometry helpers --------------------------------------------------------

def _box(u, L, row, col):
    """Child box of side ``L`` in parent ``u``: ``row`` 1 top / 2 bottom, ``col`` 1..2 Gamma."""
    x0 = u[0] + (col - 1) * L
    y0 = u[1] + (L if row == 1 else 0)
    return (x0, y0, x0 + L - 1, y0 + L - 1)


def _in_rect(pts, rect):
    x0, y0, x1, y1 = rect
    return (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)


def _last_on_column(path, x):
    idx = np.flatnonzero(path[:, 0] == x)
    if len(idx) == 0:
        raise AssertionError(f"path never meets column x = {x}")
    return int(idx[-1])


def _finish(level, u, gamma_cells, path, weights: WeightGrid, params: ConstructParams, **extra) -> CrossingLevel:
    L = 1 << level
    x0, y0 = weights.origin
    w = weights.weights[path[:, 1] - y0, path[:, 0] - x0]
    cells = np.bincount((path[:, 0] - u[0]) // L, weights=w, minlength=gamma_cells)
    coarse = l_coarsening(path, L // 2 if L > 1 else 0.5)
    hb = params.hit_box(L)
    hit_coarse = l_coarsening(path, hb)
    hits = np.array([last_hit_left_of(hit_coarse, u[0] + j * L - 1 + 0.5) for j in range(1, gamma_cells + 1)])
    return CrossingLevel(level, (int(u[0]), int(u[1])), gamma_cells, path, float(cells.sum()), cells, coarse, hits, **extra)


def base_crossing(gamma_cells: int, origin=(0, 0), params: ConstructParams | None = None) -> CrossingLevel:
    """Level-0 crossing: the straight row of ``Gamma`` points; the field is 0 there."""
    params = params or ConstructParams(0.0, gamma_cells)
    u = (int(origin[0]), int(origin[1]))
    path = np.stack([u[0] + np.arange(gamma_cells), np.full(gamma_cells, u[1])], axis=1).astype(np.int64)
    grid = WeightGrid(np.ones((1, gamma_cells)), u)
    return _finish(0, u, gamma_cells, path, grid, params)


def classify_case(d_cells, d_total: float, level: int, params: ConstructParams) -> Case:
    if level < params.cutoff:
        return Case.CASE2
    d = np.asarray(d_cells, dtype=np.float64)
    g = params.gamma_cells
    heavy_exp, mass_exp = params.mass_exponents
    heavy = d[d >= g ** (-heavy_exp) * d_total].sum()
    return Case.CASE1 if heavy >= d_total * g ** (-mass_exp) else Case.CASE3


# -- joins -------------------------------------------------------------------

class _Mask:
    """Boolean vertex set over the parent rectangle."""

    def __init__(self, rect):
        self.rect = rect
        self.a = np.zeros((rect[3] - rect[1] + 1, rect[2] - rect[0] + 1), dtype=bool)

    def add(self, pts):
        if pts is None or len(pts) == 0:
            return
        pts = pts[_in_rect(pts, self.rect)]
        self.a[pts[:, 1] - self.rect[1], pts[:, 0] - self.rect[0]] = True

    def sub(self, rect):
        return self.a[rect[1] - self.rect[1]:rect[3] - self.rect[1] + 1, rect[0] - self.rect[0]:rect[2] - self.rect[0] + 1]


def _corridor_path(weights: WeightGrid, boxes, src, dst, union: _Mask | None, src_only_first=False):
    """Shortest path from ``src`` to ``dst`` visiting ``boxes`` in order, never going back.

    With ``union`` given, only vertices of the union (plus the endpoints) are used.
    """
    bx0 = min(b[0] for b in boxes)
    by0 = min(b[1] for b in boxes)
    bx1 = max(b[2] for b in boxes)
    by1 = max(b[3] for b in boxes)
    win = (bx0, by0, bx1, by1)
    rank = np.full((by1 - by0 + 1, bx1 - bx0 + 1), -1, dtype=np.int32)
    for r, (x0, y0, x1, y1) in enumerate(boxes):
        rank[y0 - by0:y1 - by0 + 1, x0 - bx0:x1 - bx0 + 1] = r
    if src_only_first:
        x0, y0, x1, y1 = boxes[0]
        rank[y0 - by0:y1 - by0 + 1, x0 - bx0:x1 - bx0 + 1] = -1
        rank[src[1] - by0, src[0] - bx0] = 0
    if union is not None:
        allowed = union.sub(win).copy()
        allowed[src[1] - by0, src[0] - bx0] = True
        allowed[dst[1] - by0, dst[0] - bx0] = True
        rank[~allowed] = -1
    s = np.zeros(rank.shape, dtype=bool)
    t = np.zeros(rank.shape, dtype=bool)
    s[src[1] - by0, src[0] - bx0] = True
    t[dst[1] - by0, dst[0] - bx0] = True
    _, path = shortest_path(weights.window(win), rank, s, t, (bx0, by0))
    return path


def _join(weights, boxes, src, dst, union, stats, key, src_only_first=False):
    path = _corridor_path(weights, boxes, src, dst, union, src_only_first)
    if path is None:
        stats[key] = stats.get(key, 0) + 1
        path = _corridor_path(weights, boxes, src, dst, None, src_only_first)
    if path is None:
        raise AssertionError("corridor is disconnected")
    return path


def _link_pieces(weights, u, L, G):
    """The four minimum crossings used to link the two halves across the middle."""
    x0, y0 = u
    return [
        crossing_distance(weights, (x0 + (G - 1) * L, y0, x0 + G * L - 1, y0 + 2 * L - 1), "td").path,
        crossing_distance(weights, (x0 + G * L, y0, x0 + (G + 1) * L - 1, y0 + 2 * L - 1), "td").path,
        crossing_distance(weights, (x0 + (G - 1) * L, y0 + L, x0 + (G + 1) * L - 1, y0 + 2 * L - 1), "lr").path,
        crossing_distance(weights, (x0 + (G - 1) * L, y0, x0 + (G + 1) * L - 1, y0 + L - 1), "lr").path,
    ]


def _pieces_weight(weights, pieces):
    x0, y0 = weights.origin
    return float(sum(weights.weights[p[:, 1] - y0, p[:, 0] - x0].sum() for p in pieces))


def _link(left, right, i1, i2, u, L, G, weights, pieces, parent_rect, stats):
    """Join a left-half crossing in row ``i1`` to a right-half crossing in row ``i2``."""
    ia = _last_on_column(left, u[0] + (G - 1) * L - 1)
    ib = _last_on_column(right, u[0] + (G + 1) * L - 1)
    boxes = [_box(u, L, i1, G - 1), _box(u, L, i1, G)]
    if i1 != i2:
        boxes.append(_box(u, L, i2, G))
    boxes.append(_box(u, L, i2, G + 1))
    union = _Mask(parent_rect)
    union.add(left[ia:])
    union.add(right[:ib + 1])
    for p in pieces:
        union.add(p)
    conn = _join(weights, boxes, tuple(left[ia]), tuple(right[ib]), union, stats, "link_fallbacks", src_only_first=True)
    return np.concatenate([left[:ia], conn, right[ib + 1:]])


def _final_entry(path, rect):
    """First index of the last contiguous stay of ``path`` in ``rect``."""
    inside = _in_rect(path, rect)
    idx = np.flatnonzero(inside)
    e = int(idx[-1])
    while e > 0 and inside[e - 1]:
        e -= 1
    return e


def _gadget_switch(src_path, dst_path, r, rp, g, u, L, weights, params, parent_rect, stats):
    """Indices ``(q_src, q_dst)`` and the connector for a switch in column ``g``."""
    s = params.gadget_box(L)
    x_line = u[0] + g * L - 1
    corners = []
    for p in (src_path, dst_path):
        c = last_hit_left_of(l_coarsening(p, s), x_line + 0.5)
        corners.append((int(c[0] - (s - 1) / 2), int(c[1] - (s - 1) / 2)))
    gadget = _Mask(parent_rect)
    for corner in corners:
        for piece in annulus_pieces(weights, corner, s, s // 2, clip=parent_rect).values():
            gadget.add(piece)
    ylo = min(c[1] for c in corners)
    yhi = max(c[1] for c in corners) + s - 1
    gadget.add(crossing_distance(weights, (x_line - s + 1, ylo, x_line, yhi), "td").path)

    def anchor(p, row, corner):
        box = _box(u, L, row, g)
        a_box = (corner[0], corner[1], corner[0] + s - 1, corner[1] + s - 1)
        w0 = int(np.flatnonzero(_in_rect(p, box))[0])
        e = _final_entry(p, a_box)
        on = gadget.a[p[w0:e + 1, 1] - parent_rect[1], p[w0:e + 1, 0] - parent_rect[0]]
        hits = np.flatnonzero(on)
        return w0 + int(hits[-1]) if len(hits) else e

    q_src = anchor(src_path, r, corners[0])
    q_dst = anchor(dst_path, rp, corners[1])
    union = _Mask(parent_rect)
    union.a |= gadget.a
    union.add(src_path)
    union.add(dst_path)
    boxes = [_box(u, L, r, g), _box(u, L, rp, g)]
    conn = _join(weights, boxes, tuple(src_path[q_src]), tuple(dst_path[q_dst]), union, stats, "gadget_fallbacks")
    return q_src, q_dst, conn


def _quad(children):
    """Children as ``quad[i][k]`` with rows i in {1, 2} and halves k in {1, 2}."""
    return {1: {1: children[0], 2: children[1]}, 2: {1: children[2], 2: children[3]}}


def _z_table(tables_at_parent, level_next):
    """``Z[i][g-1]`` for rows i in {1, 2} and columns g = 1..2 Gamma."""
    a_rt, a_b = tables_at_parent
    b, c = level_coeffs(level_next)
    g = np.arange(1, len(a_rt) + 1)
    base = np.where(g % 2 == 0, 1.0, -1.0) * b * a_rt
    return {1: base - c * a_b, 2: base + c * a_b}


def _errs(d_bar, z, rows, gamma, level_next):
    G = len(d_bar)
    b, c = level_coeffs(level_next)
    a2 = b * b + c * c
    out = {}
    for k in (1, 2):
        zz = np.array([z[rows[(k - 1) * G + j]][(k - 1) * G + j] for j in range(G)])
        out[f"err1_{k}"] = float(0.5 * gamma ** 2 * np.sum(d_bar * (zz ** 2 - a2)))
        out[f"err2_{k}"] = float(np.sum(d_bar * (np.exp(gamma * zz) - 1 - gamma * zz - 0.5 * (gamma * zz) ** 2)))
    return out


def _half_choice(d_bar, z, G):
    rows = []
    for k in (1, 2):
        cols = slice((k - 1) * G, k * G)
        s1 = float(np.dot(d_bar, z[1][cols]))
        s2 = float(np.dot(d_bar, z[2][cols]))
        rows.append(1 if s1 <= s2 else 2)
    return tuple(rows)


def case1_extend(children, u, weights: WeightGrid, tables, params: ConstructParams, case=Case.CASE1) -> CrossingLevel:
    """Keep one row per half (the one minimising ``sum_j d_j Z``) and link the halves.

    ``children`` are the level-``l`` crossings ordered top-left, top-right,
    bottom-left, bottom-right; ``weights`` is the level ``l + 1`` weight grid;
    ``tables`` the step ``l + 1`` Gaussians of this parent.
    """
    level = children[0].level
    L, G = 1 << level, params.gamma_cells
    q = _quad(children)
    d_bar = np.mean([c.d_cells for c in children], axis=0)
    z = _z_table(tables, level + 1)
    i1, i2 = _half_choice(d_bar, z, G)
    rows = (i1,) * G + (i2,) * G
    parent_rect = (u[0], u[1], u[0] + 2 * G * L - 1, u[1] + 2 * L - 1)
    stats: dict = {}
    pieces = _link_pieces(weights, u, L, G)
    path = _link(q[i1][1].path, q[i2][2].path, i1, i2, u, L, G, weights, pieces, parent_rect, stats)
    path = loop_erase(path)
    diag = {"link_fallbacks": 0, "gadget_fallbacks": 0, **stats, **_errs(d_bar, z, rows, params.gamma, level + 1),
            "m_dis": float("nan"), "first_half_top": rows[0] == 1, "link_weight": _pieces_weight(weights, pieces)}
    plan = SwitchPlan(rows, half_rows=(i1, i2))
    return _finish(level + 1, u, G, path, weights, params, case=case, plan=plan, diagnostics=diag)


def case3_extend(children, u, weights: WeightGrid, tables, params: ConstructParams) -> CrossingLevel:
    """Switch rows along the optimal regularized-total-variation partition of ``S``."""
    level = children[0].level
    L, G = 1 << level, params.gamma_cells
    q = _quad(children)
    d_bar = np.mean([c.d_cells for c in children], axis=0)
    d_tot = float(d_bar.sum())
    heavy_exp = params.mass_exponents[0]
    J = [j for j in range(1, G + 1) if d_bar[j - 1] <= G ** (-heavy_exp) * d_tot]
    if not J:
        return replace(case1_extend(children, u, weights, tables, params), case=Case.CASE3)
    z = _z_table(tables, level + 1)
    _, c = level_coeffs(level + 1)
    a_b = tables[1]
    cols = J + [G + j for j in J]
    dvals = np.array([d_bar[j - 1] for j in J] * 2)
    inc = c * params.gamma * dvals * a_b[np.array(cols) - 1]
    S = np.concatenate([[0.0], np.cumsum(inc)])
    part = rtv_dp(S, params.penalty * d_tot)
    signs = rtv_signs(part)
    chosen = {col: (1 if sg < 0 else 2) for col, sg in zip(cols, signs)}
    rows = []
    for g in range(1, 2 * G + 1):
        left = [cc for cc in cols if cc <= g]
        rows.append(chosen[left[-1]] if left else chosen[cols[0]])
    rows = tuple(rows)
    plan = SwitchPlan(rows, signs=signs)

    parent_rect = (u[0], u[1], u[0] + 2 * G * L - 1, u[1] + 2 * L - 1)
    stats: dict = {}
    pieces = _link_pieces(weights, u, L, G)
    rows_paths = {i: _link(q[i][1].path, q[i][2].path, i, i, u, L, G, weights, pieces, parent_rect, stats) for i in (1, 2)}
    out = []
    cur, pos = rows[0], 0
    for g in plan.switch_columns:
        nxt = rows[g]
        q_src, q_dst, conn = _gadget_switch(rows_paths[cur], rows_paths[nxt], cur, nxt, g, u, L, weights, params, parent_rect, stats)
        out.append(rows_paths[cur][pos:q_src])
        out.append(conn)
        cur, pos = nxt, q_dst + 1
    out.append(rows_paths[cur][pos:])
    path = loop_erase(np.concatenate(out))
    diag = {"link_fallbacks": 0, "gadget_fallbacks": 0, **stats, **_errs(d_bar, z, rows, params.gamma, level + 1),
            "m_dis": float(np.abs(inc).max()), "first_half_top": rows[0] == 1, "rtv_value": part.value, "rtv_k": part.k,
            "link_weight": _pieces_weight(weights, pieces)}
    return _finish(level + 1, u, G, path, weights, params, case=Case.CASE3, plan=plan, diagnostics=diag)


def extend(children, u, weights, tables, params: ConstructParams) -> CrossingLevel:
    level = children[0].level
    d_bar = np.mean([c.d_cells for c in children], axis=0)
    case = classify_case(d_bar, float(d_bar.sum()), level, params)
    if case is Case.CASE3:
        return case3_extend(children, u, weights, tables, params)
    return case1_extend(children, u, weights, tables, params, case=case)


# -- checks ------------------------------------------------------------------

def level_stats(crossing: CrossingLevel, values, gamma: float, origin=(0, 0)):
    """Recompute ``(d_total, d_cells, diagnostics)`` under a field given as values."""
    vals = np.asarray(values, dtype=np.float64)
    x0, y0, x1, y1 = crossing.rect
    ox, oy = origin
    if x0 < ox or y0 < oy or y1 - oy >= vals.shape[0] or x1 - ox >= vals.shape[1]:
        raise ValueError("crossing lies outside the field")
    p = crossing.path
    w = np.exp(gamma * vals[p[:, 1] - oy, p[:, 0] - ox])
    cells = np.bincount((p[:, 0] - x0) // crossing.side, weights=w, minlength=crossing.gamma_cells)
    return float(cells.sum()), cells, dict(crossing.diagnostics)


def check_crossing(cl: CrossingLevel, weights: WeightGrid | None = None) -> list[str]:
    """Invariant violations of a constructed crossing (empty list when valid)."""
    bad = []
    p = cl.path
    x0, y0, x1, y1 = cl.rect
    if not is_lattice_path(p):
        bad.append("not a lattice path")
    if len(np.unique(p, axis=0)) != len(p):
        bad.append("path not simple")
    if not np.all(_in_rect(p, cl.rect)):
        bad.append("path leaves its rectangle")
    if p[0, 0] != x0 or p[-1, 0] != x1:
        bad.append("not a left-right crossing")
    if not is_simple(cl.coarse):
        bad.append("coarsening not simple")
    if not math.isclose(cl.d_total, float(np.sum(cl.d_cells)), rel_tol=1e-12):
        bad.append("d_total != sum(d_cells)")
    if weights is not None:
        pw = path_weight(weights, p)
        if not math.isclose(pw, cl.d_total, rel_tol=1e-9):
            bad.append("d_total != path weight")
        geo = crossing_distance(weights, cl.rect, "lr").weight
        if geo > cl.d_total * (1 + 1e-12):
            bad.append("constructed weight below geodesic")
    return bad


def check_last_hits(parent: CrossingLevel, children, params: ConstructParams) -> list[int]:
    """Lines ``j`` where parent and the quadrant crossing containing the parent's
    last hit disagree on the last-hit box of side ``hit_box(2L)``."""
    L2 = parent.side
    L = L2 // 2
    s = params.hit_box(L2)
    u = parent.origin
    pc = l_coarsening(parent.path, s)
    coarse_children = [l_coarsening(c.path, s) for c in children]
    bad = []
    for j in range(1, parent.gamma_cells + 1):
        x_line = u[0] + j * L2 - 1
        v = last_hit_left_of(pc, x_line + 0.5)
        hit = parent.path[_last_on_column(parent.path, x_line)]
        k = 1 if hit[0] < u[0] + parent.gamma_cells * L else 2
        i = 1 if hit[1] >= u[1] + L else 2
        child = coarse_children[(i - 1) * 2 + (k - 1)]
        vc = last_hit_left_of(child, x_line + 0.5)
        if not np.array_equal(v, vc):
            bad.append(j)
    return bad


def reflect_coarse(coarse: CoarsePath, origin, side: int) -> np.ndarray:
    """Mirror centers about the horizontal midline of ``V_side^(Gamma, origin)``."""
    c = coarse.centers.copy()
    c[:, 1] = 2 * (origin[1] + side / 2 - 0.5) - c[:, 1]
    return c


# -- driver ------------------------------------------------------------------

def run_induction(n: int, gamma_cells: int, gamma: float, seed: int, params: ConstructParams | None = None,
                  validate: bool = True, max_level: int = MAX_CONSTRUCT_LEVEL, observer=None):
    """Build crossings of every tile at every level ``0..n`` of ``V_(2**n)^Gamma``.

    Returns ``(crossings, report)``: ``crossings[l]`` is the level-``l``
    crossing of the tile at the origin; ``report[l]`` aggregates all tiles of
    level ``l`` (mean weight, ratio to the previous level, case counts, mean
    switch count, validity flags and averaged diagnostics).  ``observer``, if
    given, is called as ``observer(parent, children, weights, tables)`` after
    every extension step.
    """
    if n > max_level:
        raise ValueError(f"n={n} exceeds max_level={max_level}")
    params = params or ConstructParams(gamma, gamma_cells)
    if params.gamma != gamma or params.gamma_cells != gamma_cells:
        params = replace(params, gamma=gamma, gamma_cells=gamma_cells)
    G = gamma_cells
    N = 1 << n
    source = GaussianSource(seed)
    field = np.zeros((N, G * N))
    base = base_crossing(G, (0, 0), params)
    tiles = {(b, a): replace(base, origin=(a * G, b), path=base.path + [a * G, b], coarse=l_coarsening(base.path + [a * G, b], 0.5),
                             last_hits=base.last_hits + [a * G, b]) for b in range(N) for a in range(N)}
    crossings = [tiles[(0, 0)]]
    report = [{"level": 0, "tiles": len(tiles), "d_mean": float(np.mean([t.d_total for t in tiles.values()])),
               "ratio": float("nan"), "cases": {}, "switches": 0.0, "valid": True, "hyp3_failures": 0}]
    for level in range(n):
        m = level + 1
        tables = chi_step_tables(m, n, G, source)
        field += chi_step_increment(m, n, G, source, tables=tables)
        weights = WeightGrid(np.exp(gamma * field))
        side = 1 << m
        nt = N // side
        new_tiles = {}
        cases: dict[str, int] = {}
        invalid = 0
        hyp3 = 0
        diag_acc: dict[str, list] = {}
        for b in range(nt):
            for a in range(nt):
                children = [tiles[(2 * b + 1, 2 * a)], tiles[(2 * b + 1, 2 * a + 1)], tiles[(2 * b, 2 * a)], tiles[(2 * b, 2 * a + 1)]]
                u = (a * G * side, b * side)
                tab = (tables[0][b, a], tables[1][b, a])
                cl = extend(children, u, weights, tab, params)
                if observer is not None:
                    observer(cl, children, weights, tab)
                cases[cl.case.name] = cases.get(cl.case.name, 0) + 1
                for key, val in cl.diagnostics.items():
                    diag_acc.setdefault(key, []).append(float(val))
                if validate:
                    problems = check_crossing(cl, weights)
                    if check_last_hits(cl, children, params):
                        hyp3 += 1
                        problems.append("last-hit mismatch")
                    if problems:
                        invalid += 1
                        cl.diagnostics["problems"] = problems
                new_tiles[(b, a)] = cl
        tiles = new_tiles
        crossings.append(tiles[(0, 0)])
        d_mean = float(np.mean([t.d_total for t in tiles.values()]))
        report.append({
            "level": m,
            "tiles": len(tiles),
            "d_mean": d_mean,
            "ratio": d_mean / report[-1]["d_mean"],
            "cases": cases,
            "switches": float(np.mean([t.plan.switches for t in tiles.values()])),
            "valid": invalid == 0,
            "hyp3_failures": hyp3,
            "diagnostics": {k: float(np.nanmean(v)) if not np.all(np.isnan(v)) else float("nan") for k, v in diag_acc.items()},
        })
    return crossings, report
