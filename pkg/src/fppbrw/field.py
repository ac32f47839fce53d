"""Hierarchical Gaussian fields on lattice rectangles.

Four field kinds are supported, all indexed over ``V_N^Gamma``, a rectangle of
``Gamma`` side-by-side ``N x N`` cells (``N = 2**n``) with lower-left corner at
an origin ``u``:

* ``BRW``        branching random walk, one unit Gaussian per dyadic box
                 containing the point at levels ``0..n-1`` (``Gamma == 1``).
* ``CONCAT_BRW`` ``Gamma`` independent branching random walks placed side by side.
* ``CHI``        switched-sign construction: at every doubling step the two rows
                 receive opposite-signed multiples of one Gaussian per column and
                 adjacent column pairs share a stacked-rectangle Gaussian.
* ``TILDE_CHI``  ``CHI`` plus ``b_n`` times one Gaussian per top-level cell; it has
                 the same law as ``CONCAT_BRW``.

Every unit Gaussian is a pure function of ``(seed, DyadicKey)``, so fields can be
sampled lazily, in any order, and reconstructed from sparse coefficient vectors.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtri

__all__ = [
    "KeyKind",
    "DyadicKey",
    "GaussianSource",
    "FieldKind",
    "FieldSample",
    "MAX_LEVEL",
    "derive_gaussian",
    "derive_array",
    "level_coeffs",
    "tilde_r_lookup",
    "chi_step_tables",
    "chi_step_increment",
    "sample_field",
    "coeff_vector",
    "exact_cov",
    "cov_matrix",
    "dump_field",
    "load_field",
]

MAX_LEVEL = 15

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


class KeyKind(enum.IntEnum):
    BOX = 0
    STACKED_RECT = 1
    BM_INCREMENT = 2


@dataclass(frozen=True, order=True)
class DyadicKey:
    """Label of one i.i.d. unit Gaussian.

    ``BOX`` keys name the dyadic box of side ``2**level`` with lower-left
    ``corner``; ``STACKED_RECT`` keys name the ``2**level x 2**(level+1)``
    rectangle with that lower-left corner; ``BM_INCREMENT`` keys name the
    increment over ``[stream - 1, stream]`` of the Brownian motion attached to
    the level-``level`` rectangle with origin ``corner``.
    """

    kind: KeyKind
    level: int
    x: int
    y: int
    stream: int = 0

    def __post_init__(self):
        if self.level < 0 or self.stream < 0:
            raise ValueError(f"negative level/stream in {self}")
        if self.kind in (KeyKind.BOX, KeyKind.STACKED_RECT):
            side = 1 << self.level
            if self.x % side or self.y % side:
                raise ValueError(f"corner of {self} is not aligned to 2**{self.level}")


@dataclass(frozen=True)
class GaussianSource:
    master_seed: int

    def __call__(self, key: DyadicKey) -> float:
        return derive_gaussian(self.master_seed, key)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _as_u64(v):
    return np.asarray(v, dtype=np.int64).view(np.uint64)


def derive_array(seed, kind, level, x, y, stream=0):
    """Vectorised ``derive_gaussian`` over broadcastable key components."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(int(seed) & _MASK64) + _GOLDEN)
        for part in (kind, level, x, y, stream):
            h = _mix((h ^ _as_u64(part)) + _GOLDEN)
    u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)
    return ndtri(u)


def derive_gaussian(seed: int, key: DyadicKey) -> float:
    """Standard normal deviate attached to ``key`` under ``seed``."""
    return float(derive_array(seed, int(key.kind), key.level, key.x, key.y, key.stream))


def level_coeffs(level: int) -> tuple[float, float]:
    """Coefficients ``(b, c)`` applied at doubling step ``level``.

    ``b**2 = (1 - 4**-level) / 3`` and ``c**2 = 2 * b**2``.
    """
    if level < 1:
        raise ValueError("level coefficients are defined for level >= 1")
    b2 = (1.0 - 4.0 ** (-level)) / 3.0
    return math.sqrt(b2), math.sqrt(2.0 * b2)


class FieldKind(enum.Enum):
    BRW = "brw"
    CONCAT_BRW = "concat-brw"
    CHI = "chi"
    TILDE_CHI = "tilde-chi"


_KIND_CODES = {FieldKind.BRW: 0, FieldKind.CONCAT_BRW: 1, FieldKind.CHI: 2, FieldKind.TILDE_CHI: 3}


def _check_params(kind: FieldKind, n: int, gamma_cells: int, origin=(0, 0), max_level=MAX_LEVEL):
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > max_level:
        raise ValueError(f"n={n} exceeds the memory guard max_level={max_level}")
    if gamma_cells < 1 or gamma_cells % 2 == 0:
        raise ValueError("gamma_cells must be an odd positive integer")
    if kind is FieldKind.BRW and gamma_cells != 1:
        raise ValueError("BRW requires gamma_cells == 1")
    side = 1 << n
    ux, uy = origin
    if ux % (gamma_cells * side) or uy % side:
        raise ValueError(f"origin {origin} is not in A_(n, Gamma) for n={n}, Gamma={gamma_cells}")


@dataclass(frozen=True, eq=False)
class FieldSample:
    kind: FieldKind
    n: int
    gamma_cells: int
    origin: tuple[int, int]
    values: np.ndarray  # shape (2**n, gamma_cells * 2**n), indexed [y - u_y, x - u_x]

    @property
    def side(self) -> int:
        return 1 << self.n

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def at(self, x: int, y: int) -> float:
        return float(self.values[y - self.origin[1], x - self.origin[0]])


def tilde_r_lookup(k: int, j: int, gamma_cells: int, origin=(0, 0), level: int = 0) -> DyadicKey:
    """Key of the stacked rectangle shared by column ``j`` of half ``k``.

    Columns are numbered globally as ``g = (k - 1) * Gamma + j``; odd ``g`` owns
    its own rectangle and even ``g`` borrows the one of column ``g - 1`` (for
    ``j == 1`` that is the last column of the left half).
    """
    if k not in (1, 2) or not 1 <= j <= gamma_cells:
        raise ValueError(f"invalid column index k={k}, j={j}")
    g = (k - 1) * gamma_cells + j
    if g % 2 == 0:
        assert not (k == 1 and j == 1)
        if j > 1:
            k_src, j_src = k, j - 1
        else:
            k_src, j_src = k - 1, gamma_cells
    else:
        k_src, j_src = k, j
    side = 1 << level
    g_src = (k_src - 1) * gamma_cells + j_src
    return DyadicKey(KeyKind.STACKED_RECT, level, origin[0] + (g_src - 1) * side, origin[1])


def chi_step_tables(m: int, n: int, gamma_cells: int, source: GaussianSource, origin=(0, 0)):
    """Gaussians used by doubling step ``m`` of the switched-sign recursion.

    The rectangle ``V_N^Gamma`` (``N = 2**n``) is tiled by parents of size
    ``Gamma 2**m x 2**m``; each parent has ``2 Gamma`` columns of side
    ``L = 2**(m-1)``.

    Returns
    -------
    a_rt : ndarray, shape (n_py, n_px, 2 Gamma)
        ``a_rt[py, px, g-1]`` is the stacked-rectangle Gaussian used by column
        ``g`` (already resolved through :func:`tilde_r_lookup`).
    a_b : ndarray, shape (n_py, n_px, 2 Gamma)
        Increment of the parent's Brownian stream over ``[g-1, g]``, used as
        the bottom-box Gaussian of column ``g``.
    """
    if not 1 <= m <= n:
        raise ValueError(f"step m={m} outside 1..{n}")
    side = 1 << m
    half = side >> 1
    n_py = (1 << n) // side
    n_px = gamma_cells * (1 << n) // (gamma_cells * side)
    py, px, g = np.meshgrid(np.arange(n_py), np.arange(n_px), np.arange(1, 2 * gamma_cells + 1), indexing="ij")
    p_x = origin[0] + px * gamma_cells * side
    p_y = origin[1] + py * side
    g_src = np.where(g % 2 == 1, g, g - 1)
    a_rt = derive_array(source.master_seed, int(KeyKind.STACKED_RECT), m - 1, p_x + (g_src - 1) * half, p_y)
    a_b = derive_array(source.master_seed, int(KeyKind.BM_INCREMENT), m - 1, p_x, p_y, g)
    return a_rt, a_b


def chi_step_increment(m: int, n: int, gamma_cells: int, source: GaussianSource, origin=(0, 0), tables=None):
    """Increment added to the whole rectangle by doubling step ``m``."""
    a_rt, a_b = tables if tables is not None else chi_step_tables(m, n, gamma_cells, source, origin)
    b, c = level_coeffs(m)
    n_py, n_px, ncol = a_rt.shape
    g = np.arange(1, ncol + 1)
    sign_b = np.where(g % 2 == 0, 1.0, -1.0)
    base = (sign_b * b) * a_rt  # (n_py, n_px, 2G)
    cb = c * a_b
    # box rows inside a parent: index 0 is the bottom row (i = 2), 1 the top row (i = 1)
    boxes = np.empty((n_py, 2, n_px, ncol))
    boxes[:, 0] = base + cb
    boxes[:, 1] = base - cb
    boxes = boxes.reshape(2 * n_py, n_px * ncol)
    half = 1 << (m - 1)
    return np.repeat(np.repeat(boxes, half, axis=0), half, axis=1)


def _brw_values(n: int, gamma_cells: int, source: GaussianSource, origin) -> np.ndarray:
    side = 1 << n
    vals = np.zeros((side, gamma_cells * side))
    for k in range(n):
        s = 1 << k
        by = np.arange(side // s)[:, None]
        bx = np.arange(gamma_cells * side // s)[None, :]
        a = derive_array(source.master_seed, int(KeyKind.BOX), k, origin[0] + bx * s, origin[1] + by * s)
        vals += np.repeat(np.repeat(a, s, axis=0), s, axis=1)
    return vals


def sample_field(kind: FieldKind, n: int, gamma_cells: int, source: GaussianSource,
                 origin=(0, 0), max_level: int = MAX_LEVEL) -> FieldSample:
    """Realise a field of the given kind on ``V_(2**n)^Gamma`` shifted to ``origin``."""
    kind = FieldKind(kind)
    _check_params(kind, n, gamma_cells, origin, max_level)
    origin = (int(origin[0]), int(origin[1]))
    side = 1 << n
    if kind in (FieldKind.BRW, FieldKind.CONCAT_BRW):
        vals = _brw_values(n, gamma_cells, source, origin)
    else:
        vals = np.zeros((side, gamma_cells * side))
        for m in range(1, n + 1):
            vals += chi_step_increment(m, n, gamma_cells, source, origin)
        if kind is FieldKind.TILDE_CHI and n >= 1:
            b_n, _ = level_coeffs(n)
            cells = derive_array(source.master_seed, int(KeyKind.BOX), n,
                                 origin[0] + np.arange(gamma_cells) * side, origin[1])
            vals += np.repeat(b_n * cells, side)[None, :]
    return FieldSample(kind, n, gamma_cells, origin, vals)


def coeff_vector(kind: FieldKind, n: int, gamma_cells: int, z, origin=(0, 0)) -> dict[DyadicKey, float]:
    """Sparse representation ``field(z) = sum(coeff[key] * a_key)``.

    Computed point-wise by walking the recursion, independently of the
    vectorised sampler.
    """
    kind = FieldKind(kind)
    _check_params(kind, n, gamma_cells, origin, max_level=62)
    zx, zy = int(z[0]), int(z[1])
    ux, uy = int(origin[0]), int(origin[1])
    side = 1 << n
    if not (ux <= zx < ux + gamma_cells * side and uy <= zy < uy + side):
        raise ValueError(f"point {z} outside the field rectangle")
    out: dict[DyadicKey, float] = {}
    if kind in (FieldKind.BRW, FieldKind.CONCAT_BRW):
        for k in range(n):
            s = 1 << k
            out[DyadicKey(KeyKind.BOX, k, (zx // s) * s, (zy // s) * s)] = 1.0
        return out
    for m in range(1, n + 1):
        b, c = level_coeffs(m)
        width, height, half = gamma_cells << m, 1 << m, 1 << (m - 1)
        px = ux + ((zx - ux) // width) * width
        py = uy + ((zy - uy) // height) * height
        g = (zx - px) // half + 1
        k, j = (1, g) if g <= gamma_cells else (2, g - gamma_cells)
        i = 1 if zy - py >= half else 2
        rkey = tilde_r_lookup(k, j, gamma_cells, (px, py), m - 1)
        out[rkey] = (-1.0) ** g * b
        out[DyadicKey(KeyKind.BM_INCREMENT, m - 1, px, py, g)] = (-1.0) ** i * c
    if kind is FieldKind.TILDE_CHI and n >= 1:
        cell = (zx - ux) // side
        out[DyadicKey(KeyKind.BOX, n, ux + cell * side, uy)] = level_coeffs(n)[0]
    return out


def exact_cov(kind: FieldKind, n: int, gamma_cells: int, z1, z2, origin=(0, 0)) -> float:
    """Exact covariance of the field at two points (inner product of coefficients)."""
    c1 = coeff_vector(kind, n, gamma_cells, z1, origin)
    c2 = coeff_vector(kind, n, gamma_cells, z2, origin)
    if len(c2) < len(c1):
        c1, c2 = c2, c1
    return float(sum(v * c2[key] for key, v in c1.items() if key in c2))


def cov_matrix(kind: FieldKind, n: int, gamma_cells: int, points, origin=(0, 0)) -> np.ndarray:
    """Exact covariance matrix over ``points``, built from sparse coefficient vectors."""
    from scipy import sparse

    index: dict[DyadicKey, int] = {}
    rows, cols, vals = [], [], []
    for r, z in enumerate(points):
        for key, v in coeff_vector(kind, n, gamma_cells, z, origin).items():
            rows.append(r)
            cols.append(index.setdefault(key, len(index)))
            vals.append(v)
    c = sparse.csr_matrix((vals, (rows, cols)), shape=(len(points), max(len(index), 1)))
    return (c @ c.T).toarray()


# -- binary dump -------------------------------------------------------------

_MAGIC = b"FPBW"
_VERSION = 1
_HEADER = struct.Struct("<4sHBBIqq4x")


def dump_field(sample: FieldSample, path) -> None:
    """Write a 32-byte header followed by little-endian float64 values, row-major."""
    header = _HEADER.pack(_MAGIC, _VERSION, _KIND_CODES[sample.kind], sample.n,
                          sample.gamma_cells, sample.origin[0], sample.origin[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(sample.values, dtype="<f8").tobytes())


def load_field(path) -> FieldSample:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated field dump")
    magic, version, kind_code, n, gamma_cells, ux, uy = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError("not a field dump (bad magic)")
    if version != _VERSION:
        raise ValueError(f"unsupported dump version {version}")
    kind = {v: k for k, v in _KIND_CODES.items()}[kind_code]
    side = 1 << n
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if vals.size != gamma_cells * side * side:
        raise ValueError("payload size does not match header")
    return FieldSample(kind, n, gamma_cells, (ux, uy), vals.reshape(side, gamma_cells * side).astype(np.float64))
