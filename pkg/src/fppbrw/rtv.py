"""Regularized total variation of sampled paths.

For values ``B_0..B_m`` and a penalty ``lam > 0`` the objective of a partition
``0 = t_0 < t_1 < ... < t_(k+1) = m`` is

    sum_i |B_(t_(i+1)) - B_(t_i)| - lam * k

and :func:`rtv_dp` finds its exact maximiser in linear time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .field import derive_array, KeyKind

__all__ = ["RtvPartition", "rtv_dp", "rtv_bruteforce", "rtv_signs", "brownian_path", "rtv_scaling", "BRUTEFORCE_MAX"]

BRUTEFORCE_MAX = 18
# level tag reserved for Brownian paths drawn by the scaling experiment
_BM_LEVEL = 62


@dataclass(frozen=True, eq=False)
class RtvPartition:
    breakpoints: np.ndarray  # strictly increasing grid indices, first 0, last m
    value: float
    lam: float
    increments: np.ndarray  # B[t_(i+1)] - B[t_i] for each interval

    @property
    def k(self) -> int:
        return len(self.breakpoints) - 2


def _as_values(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or len(v) < 2:
        raise ValueError("need at least two samples B_0, B_1")
    return v


@numba.njit(cache=True, nogil=True)
def _rtv_kernel(b, lam):
    m = len(b) - 1
    # state s = 0 means the last interval is counted as +(B_i - B_t), s = 1 as -(B_i - B_t)
    f = np.empty((2, m + 1))
    kk = np.zeros((2, m + 1), np.int64)
    bp = np.zeros((2, m + 1), np.int64)
    g = np.empty(m + 1)
    gk = np.zeros(m + 1, np.int64)
    gs = np.zeros(m + 1, np.int64)
    # best[s]: max over admissible previous breakpoints t of (value before t) - sgn * B_t
    best = np.empty(2)
    best_k = np.zeros(2, np.int64)
    best_t = np.zeros(2, np.int64)
    best[0] = -b[0]
    best[1] = b[0]
    for i in range(1, m + 1):
        for s in range(2):
            sg = 1.0 if s == 0 else -1.0
            f[s, i] = sg * b[i] + best[s]
            kk[s, i] = best_k[s]
            bp[s, i] = best_t[s]
        if f[0, i] > f[1, i] or (f[0, i] == f[1, i] and kk[0, i] <= kk[1, i]):
            g[i], gk[i], gs[i] = f[0, i], kk[0, i], 0
        else:
            g[i], gk[i], gs[i] = f[1, i], kk[1, i], 1
        if i < m:
            for s in range(2):
                sg = 1.0 if s == 0 else -1.0
                cand = g[i] - lam - sg * b[i]
                ck = gk[i] + 1
                if cand > best[s] or (cand == best[s] and ck < best_k[s]):
                    best[s] = cand
                    best_k[s] = ck
                    best_t[s] = i
    if f[0, m] > f[1, m] or (f[0, m] == f[1, m] and kk[0, m] <= kk[1, m]):
        s = 0
    else:
        s = 1
    value = f[s, m]
    k = kk[s, m]
    out = np.empty(k + 2, np.int64)
    out[k + 1] = m
    i = m
    pos = k
    while pos >= 1:
        t = bp[s, i]
        out[pos] = t
        s = gs[t]
        i = t
        pos -= 1
    out[0] = 0
    return value, out


def _partition(b, lam, bps, value=None) -> RtvPartition:
    inc = np.diff(b[bps])
    if value is None:
        value = float(np.abs(inc).sum() - lam * (len(bps) - 2))
    return RtvPartition(bps, float(value), float(lam), inc)


def rtv_dp(values, lam: float) -> RtvPartition:
    """Exact maximiser of the penalised variation over grid partitions.

    Ties prefer fewer breakpoints, then the earliest last breakpoint.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    b = _as_values(values)
    value, bps = _rtv_kernel(b, float(lam))
    return _partition(b, lam, bps, value)


_SUBSETS: dict[int, np.ndarray] = {}


def _subsets(m: int) -> np.ndarray:
    if m not in _SUBSETS:
        codes = np.arange(1 << (m - 1), dtype=np.int64)
        _SUBSETS[m] = ((codes[:, None] >> np.arange(m - 1)) & 1).astype(bool)
    return _SUBSETS[m]


def rtv_bruteforce(values, lam: float) -> RtvPartition:
    """Exhaustive search over all ``2**(m-1)`` breakpoint subsets (``m <= 18``)."""
    b = _as_values(values)
    m = len(b) - 1
    if m > BRUTEFORCE_MAX:
        raise ValueError(f"m={m} too large for exhaustive search")
    if m == 1:
        return _partition(b, lam, np.array([0, 1]))
    mask = _subsets(m)
    last = np.full(len(mask), b[0])
    acc = np.zeros(len(mask))
    for j in range(1, m + 1):
        on = mask[:, j - 1] if j < m else np.ones(len(mask), dtype=bool)
        acc[on] += np.abs(b[j] - last[on])
        last[on] = b[j]
    ks = mask.sum(axis=1)
    vals = acc - lam * ks
    top = np.flatnonzero(vals >= vals.max() - 1e-12)
    best = None
    for row in top:
        bps = np.concatenate([[0], np.flatnonzero(mask[row]) + 1, [m]])
        cand = (ks[row], tuple(bps))
        if best is None or cand < best[0]:
            best = (cand, bps)
    return _partition(b, lam, best[1])


def rtv_signs(partition: RtvPartition) -> np.ndarray:
    """Per grid cell, -1 if its covering interval rises and +1 if it falls."""
    bps = partition.breakpoints
    lengths = np.diff(bps)
    per_interval = np.where(partition.increments > 0, -1, 1)
    return np.repeat(per_interval, lengths)


def brownian_path(m: int, seed: int, replicate: int = 0, horizon: float = 1.0) -> np.ndarray:
    """Standard Brownian motion on ``[0, horizon]`` sampled at ``m + 1`` grid points."""
    steps = derive_array(seed, int(KeyKind.BM_INCREMENT), _BM_LEVEL, replicate, 0, np.arange(1, m + 1))
    out = np.zeros(m + 1)
    np.cumsum(steps * np.sqrt(horizon / m), out=out[1:])
    return out


def rtv_scaling(lams, m: int, reps: int, seed: int, workers: int = 1):
    """Monte Carlo of the optimal penalised variation for Brownian paths on [0, 1].

    Returns one dict per penalty with keys ``lambda``, ``mean_phi``,
    ``stderr``, ``mean_k`` and ``lambda_phi`` (``lambda * mean_phi``).
    Replicate ``r`` always uses the same path, so rows for different
    penalties are coupled and results do not depend on ``workers``.
    """
    lams = [float(x) for x in lams]

    def one(r):
        path = brownian_path(m, seed, r)
        out = []
        for lam in lams:
            p = rtv_dp(path, lam)
            out.append((p.value, p.k))
        return out

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, range(reps)))
    else:
        results = [one(r) for r in range(reps)]
    arr = np.array(results, dtype=np.float64).reshape(reps, len(lams), 2)
    rows = []
    for a, lam in enumerate(lams):
        phi = arr[:, a, 0]
        se = float(phi.std(ddof=1) / np.sqrt(reps)) if reps > 1 else float("nan")
        rows.append({
            "lambda": lam,
            "mean_phi": float(phi.mean()),
            "stderr": se,
            "mean_k": float(arr[:, a, 1].mean()),
            "lambda_phi": lam * float(phi.mean()),
        })
    return rows
