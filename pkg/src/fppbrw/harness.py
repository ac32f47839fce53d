"""Experiment orchestration: exponent fits, Monte Carlo checks and reports.

Every replicate draws its field from a seed derived from ``(master seed, n,
replicate)``, so results are identical for any degree of parallelism.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import (FieldKind, GaussianSource, KeyKind, cov_matrix, derive_array, exact_cov, sample_field)
from .geodesic import WeightGrid, crossing_distance

__all__ = [
    "ExperimentConfig",
    "ExponentFit",
    "resolve_workers",
    "replicate_seed",
    "parallel_map",
    "median_of_means",
    "fit_exponent",
    "run_exponent",
    "straight_line_weight",
    "STRAIGHT_LINE_SLOPE",
    "check_min_toy",
    "check_lemma1",
    "check_brw_cov",
    "rows_to_csv",
    "to_json",
    "EXPONENT_COLUMNS",
    "MAX_EXPONENT_LEVEL",
]

MAX_EXPONENT_LEVEL = 13
MOM_GROUPS = 16
# E exp(gamma R) = exp(gamma^2 n / 2) = N^(gamma^2 / (2 ln 2)) per vertex; at gamma = 1
STRAIGHT_LINE_SLOPE = 1.0 + 1.0 / (2.0 * math.log(2.0))
EXPONENT_COLUMNS = ("n", "N", "reps", "mean_d", "stderr_d", "mom_d", "mean_min_row", "row_violations")


def resolve_workers(workers: int | None = None) -> int:
    """``FPP_THREADS`` overrides the requested degree; default is 1."""
    env = os.environ.get("FPP_THREADS")
    if env:
        return max(1, int(env))
    return max(1, int(workers or 1))


def replicate_seed(master: int, *tags: int) -> int:
    return int(np.random.SeedSequence([int(master), *map(int, tags)]).generate_state(1, np.uint64)[0] >> 1)


def parallel_map(fn, items, workers: int = 1) -> list:
    """Ordered map; threads help because the numba kernels release the GIL."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def median_of_means(x, groups: int = MOM_GROUPS) -> float:
    x = np.asarray(x, dtype=np.float64)
    groups = min(groups, len(x))
    return float(np.median([g.mean() for g in np.array_split(x, groups)]))


@dataclass
class ExperimentConfig:
    gamma: float
    n_values: tuple[int, ...]
    replicates: int
    seed: int = 0
    gamma_cells: int = 1
    kind: FieldKind = FieldKind.BRW
    output: str | None = None
    workers: int | None = None
    bootstrap: int = 1000

    def __post_init__(self):
        self.n_values = tuple(int(n) for n in self.n_values)
        if not self.n_values:
            raise ValueError("n_range must be nonempty")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.gamma_cells % 2 == 0:
            raise ValueError("gamma_cells must be odd")
        if max(self.n_values) > MAX_EXPONENT_LEVEL:
            raise ValueError(f"n > {MAX_EXPONENT_LEVEL} exceeds the memory guard")
        self.kind = FieldKind(self.kind)


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    ns: list[int]
    means: list[float]
    stderrs: list[float]
    moms: list[float]
    ci: tuple[float, float]
    bootstrap: int = 0
    extra: dict = dc_field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "ci_low": self.ci[0],
            "ci_high": self.ci[1],
            "bootstrap": self.bootstrap,
            "n": list(self.ns),
            "mean_d": list(self.means),
            "stderr_d": list(self.stderrs),
            "mom_d": list(self.moms),
        }


def _lsq(x, y):
    slope, intercept = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return float(slope), float(intercept)


def fit_exponent(ns, samples, bootstrap: int = 1000, seed: int = 0) -> ExponentFit:
    """Least squares of ``log2`` median-of-means against ``n = log2 N``, equal weights per ``n``.

    The confidence interval is the 2.5-97.5 percentile range of slopes refitted
    on replicates resampled with replacement within each ``n``.
    """
    ns = [int(n) for n in ns]
    samples = [np.asarray(s, dtype=np.float64) for s in samples]
    if len(ns) < 2:
        raise ValueError("need at least two sizes to fit a slope")
    moms = [median_of_means(s) for s in samples]
    slope, intercept = _lsq(ns, np.log2(moms))
    ci = (float("nan"), float("nan"))
    if bootstrap > 0:
        rng = np.random.default_rng(seed)
        slopes = np.empty(bootstrap)
        for b in range(bootstrap):
            m = [median_of_means(s[rng.integers(0, len(s), len(s))]) for s in samples]
            slopes[b] = _lsq(ns, np.log2(m))[0]
        ci = (float(np.percentile(slopes, 2.5)), float(np.percentile(slopes, 97.5)))
    means = [float(s.mean()) for s in samples]
    ses = [float(s.std(ddof=1) / math.sqrt(len(s))) if len(s) > 1 else float("nan") for s in samples]
    return ExponentFit(slope, intercept, ns, means, ses, moms, ci, bootstrap)


def _weights(kind, n, gamma_cells, gamma, seed):
    f = sample_field(kind, n, gamma_cells, GaussianSource(seed))
    return np.exp(gamma * f.values)


def _one_crossing(args):
    kind, n, gamma_cells, gamma, seed = args
    w = _weights(kind, n, gamma_cells, gamma, seed)
    d = crossing_distance(WeightGrid(w)).weight
    return d, float(w.sum(axis=1).min())


def run_exponent(config: ExperimentConfig):
    """Left-right crossing weights for each ``n``; returns ``(rows, fit, samples)``.

    ``rows`` follow :data:`EXPONENT_COLUMNS`.  ``row_violations`` counts
    samples whose crossing weight exceeds their lightest row (always 0 for a
    correct geodesic).  A size that runs out of memory gets a row with an
    ``error`` entry and is left out of the fit.
    """
    workers = resolve_workers(config.workers)
    rows, ns, samples = [], [], []
    for n in config.n_values:
        jobs = [(config.kind, n, config.gamma_cells, config.gamma, replicate_seed(config.seed, n, r))
                for r in range(config.replicates)]
        try:
            res = np.array(parallel_map(_one_crossing, jobs, workers))
        except MemoryError:
            rows.append({"n": n, "N": 1 << n, "reps": 0, "error": "out of memory"})
            continue
        d, min_row = res[:, 0], res[:, 1]
        reps = len(d)
        rows.append({
            "n": n,
            "N": 1 << n,
            "reps": reps,
            "mean_d": float(d.mean()),
            "stderr_d": float(d.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan"),
            "mom_d": median_of_means(d),
            "mean_min_row": float(min_row.mean()),
            "row_violations": int(np.sum(d > min_row * (1 + 1e-12))),
        })
        ns.append(n)
        samples.append(d)
    fit = fit_exponent(ns, samples, config.bootstrap, config.seed) if len(ns) >= 2 else None
    return rows, fit, samples


def straight_line_weight(n: int, gamma: float, seed: int, row: int = 0, gamma_cells: int = 1,
                         kind: FieldKind = FieldKind.BRW) -> float:
    """Weight of the horizontal row ``y = row`` of the sampled field."""
    if not 0 <= row < (1 << n):
        raise ValueError("row out of range")
    f = sample_field(kind, n, gamma_cells, GaussianSource(seed))
    return float(np.exp(gamma * f.values[row]).sum())


# toy identity: independent key families for X and Y
_TOY_LEVEL = 63


def check_min_toy(reps: int, seed: int, antithetic: bool = False) -> float:
    """Monte Carlo estimate of ``E min(X, Y)`` for independent standard normals.

    With ``antithetic`` each pair also contributes ``min(-X, -Y)``.
    """
    if reps < 10_000:
        raise ValueError("reps must be at least 1e4")
    idx = np.arange(reps)
    x = derive_array(seed, int(KeyKind.BM_INCREMENT), _TOY_LEVEL, 0, 0, idx)
    y = derive_array(seed, int(KeyKind.BM_INCREMENT), _TOY_LEVEL, 1, 0, idx)
    m = np.minimum(x, y)
    if antithetic:
        m = 0.5 * (m + np.minimum(-x, -y))
    return float(m.mean())


def check_lemma1(n: int, gamma_cells: int, pairs: int = 10_000, seed: int = 0) -> dict:
    """Max ``|exact_cov(tilde-chi) - exact_cov(concat-brw)|`` over point pairs.

    All pairs are used when there are at most ``pairs`` of them, otherwise a
    seeded random sample.
    """
    if n > 4 or gamma_cells > 5:
        raise ValueError("check_lemma1 is limited to n <= 4 and gamma_cells <= 5")
    side = 1 << n
    npts = gamma_cells * side * side
    pts = [(x, y) for y in range(side) for x in range(gamma_cells * side)]
    exhaustive = npts * npts <= pairs
    if exhaustive:
        a = cov_matrix(FieldKind.TILDE_CHI, n, gamma_cells, pts)
        b = cov_matrix(FieldKind.CONCAT_BRW, n, gamma_cells, pts)
        dev = float(np.abs(a - b).max())
        count = npts * npts
    else:
        rng = np.random.default_rng(seed)
        ij = rng.integers(0, npts, size=(pairs, 2))
        dev = 0.0
        for i, j in ij:
            d = exact_cov(FieldKind.TILDE_CHI, n, gamma_cells, pts[i], pts[j]) - \
                exact_cov(FieldKind.CONCAT_BRW, n, gamma_cells, pts[i], pts[j])
            dev = max(dev, abs(d))
        count = pairs
    return {"n": n, "gamma_cells": gamma_cells, "pairs": count, "exhaustive": exhaustive, "max_dev": dev, "pass": dev < 1e-9}


def check_brw_cov(n: int) -> dict:
    """Compare the BRW covariance matrix with shared dyadic box counts on all point pairs."""
    side = 1 << n
    pts = np.array([(x, y) for y in range(side) for x in range(side)], dtype=np.int64)
    cov = cov_matrix(FieldKind.BRW, n, 1, [tuple(p) for p in pts])
    shared = np.zeros_like(cov)
    for k in range(n):
        b = pts >> k
        key = b[:, 0] * side + b[:, 1]
        shared += key[:, None] == key[None, :]
    mismatches = int(np.sum(cov != shared))
    return {"n": n, "pairs": len(pts) ** 2, "mismatches": mismatches, "pass": mismatches == 0}


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def to_json(obj) -> str:
    """Indented JSON in insertion order; non-finite floats become null."""
    return json.dumps(_finite(obj), indent=2, allow_nan=False) + "\n"
