"""Command line entry point: ``fppbrw <subcommand> ...`` (or ``python -m fppbrw``)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .construct import ConstructParams, run_induction
from .field import FieldKind, GaussianSource, dump_field, load_field, sample_field
from .geodesic import WeightGrid, crossing_distance
from .harness import (EXPONENT_COLUMNS, ExperimentConfig, check_brw_cov, check_lemma1, check_min_toy,
                      resolve_workers, rows_to_csv, run_exponent, to_json)
from .rtv import rtv_scaling

RTV_COLUMNS = ("lambda", "mean_phi", "stderr", "mean_k")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def parse_range(text: str) -> tuple[int, ...]:
    """``"4..8"`` -> (4, 5, 6, 7, 8); ``"4,6,9"`` and ``"5"`` also accepted."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            out = tuple(range(int(lo), int(hi) + 1))
        else:
            out = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    if not out:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return out


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}")


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _meta_path(field_path) -> Path:
    return Path(str(field_path) + ".meta.json")


def cmd_sample_field(a):
    kind = FieldKind(a.kind)
    sample = sample_field(kind, a.n, a.gamma_cells, GaussianSource(a.seed), (a.origin_x, a.origin_y))
    dump_field(sample, a.out)
    meta = {"kind": kind.value, "n": a.n, "gamma_cells": a.gamma_cells, "seed": a.seed,
            "origin": [a.origin_x, a.origin_y]}
    _meta_path(a.out).write_text(to_json(meta))
    return 0


def cmd_fpp(a):
    sample = load_field(a.field)
    meta = _meta_path(a.field)
    seed = json.loads(meta.read_text()).get("seed") if meta.exists() else None
    grid = WeightGrid.from_field(sample.values, a.gamma, sample.origin)
    res = crossing_distance(grid, direction=a.dir)
    out = {"weight": res.weight, "path_length": int(len(res.path)), "n": sample.n, "seed": seed}
    if a.json:
        sys.stdout.write(to_json(out))
    else:
        sys.stdout.write(f"weight={res.weight!r} path_length={len(res.path)} n={sample.n} seed={seed}\n")
    return 0


def cmd_exponent(a):
    cfg = ExperimentConfig(a.gamma, a.n, a.reps, a.seed, a.gamma_cells, FieldKind(a.kind), a.csv, a.workers, a.bootstrap)
    rows, fit, _ = run_exponent(cfg)
    csv_text = rows_to_csv(rows, EXPONENT_COLUMNS)
    fit_json = to_json(fit.as_dict() if fit else None)
    if a.csv or a.json:
        if a.csv:
            Path(a.csv).write_text(csv_text)
        if a.json:
            Path(a.json).write_text(fit_json)
    else:
        sys.stdout.write(csv_text)
    if fit:
        sys.stderr.write(f"slope={fit.slope:.4f} ci=[{fit.ci[0]:.4f}, {fit.ci[1]:.4f}]\n")
    return 1 if any("error" in r for r in rows) else 0


def cmd_rtv(a):
    rows = rtv_scaling(a.lam, a.grid, a.reps, a.seed, resolve_workers(a.workers))
    _emit(rows_to_csv(rows, RTV_COLUMNS), a.csv)
    return 0


def cmd_construct(a):
    if a.paper_defaults:
        params = ConstructParams.paper_defaults(a.gamma, a.gamma_cells)
    else:
        params = ConstructParams(a.gamma, a.gamma_cells, delta_exp=a.delta_exp, cutoff=a.cutoff)
    _, report = run_induction(a.n, a.gamma_cells, a.gamma, a.seed, params, validate=not a.no_validate)
    levels = []
    for r in report:
        levels.append({
            "level": r["level"],
            "case": "+".join(f"{k}:{v}" for k, v in sorted(r["cases"].items())) or "BASE",
            "d_total": r["d_mean"],
            "ratio": r["ratio"],
            "switches": r["switches"],
            "valid": r["valid"],
        })
    out = {"n": a.n, "gamma": a.gamma, "gamma_cells": a.gamma_cells, "delta_exp": params.delta_exp,
           "cutoff": params.cutoff, "seed": a.seed, "levels": levels}
    _emit(to_json(out), a.json)
    return 0 if all(lv["valid"] for lv in levels) else 1


def cmd_check_cov(a):
    out = {"lemma1": check_lemma1(a.n, a.gamma_cells, a.pairs, a.seed), "brw": check_brw_cov(a.brw_n)}
    sys.stdout.write(to_json(out))
    return 0 if out["lemma1"]["pass"] and out["brw"]["pass"] else 1


def cmd_check_toy(a):
    est = check_min_toy(a.reps, a.seed, a.antithetic)
    target = -1.0 / np.sqrt(np.pi)
    sys.stdout.write(to_json({"estimate": est, "target": float(target), "abs_err": abs(est - target), "reps": a.reps}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fppbrw", description="First-passage percolation on branching-random-walk fields.")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    s = sub.add_parser("sample-field", help="sample a field and write a binary dump")
    s.add_argument("--kind", choices=[k.value for k in FieldKind], default="brw")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--gamma-cells", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--origin-x", type=int, default=0)
    s.add_argument("--origin-y", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample_field)

    s = sub.add_parser("fpp", help="minimum crossing weight of a dumped field")
    s.add_argument("--field", required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--dir", choices=["lr", "td"], default="lr")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_fpp)

    s = sub.add_parser("exponent", help="crossing-weight scaling experiment")
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--n", type=parse_range, required=True)
    s.add_argument("--reps", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--gamma-cells", type=int, default=1)
    s.add_argument("--kind", choices=[k.value for k in FieldKind], default="brw")
    s.add_argument("--bootstrap", type=int, default=1000)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--csv", default=None)
    s.add_argument("--json", default=None)
    s.set_defaults(func=cmd_exponent)

    s = sub.add_parser("rtv", help="regularized total variation of Brownian paths")
    s.add_argument("--lambda", dest="lam", type=_floats, required=True)
    s.add_argument("--grid", type=int, default=100_000)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--csv", default=None)
    s.set_defaults(func=cmd_rtv)

    s = sub.add_parser("construct", help="inductive crossing construction")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--gamma-cells", type=int, default=3)
    s.add_argument("--delta-exp", type=int, default=2)
    s.add_argument("--cutoff", type=int, default=2)
    s.add_argument("--paper-defaults", action="store_true", help="delta = 2^-100, cutoff = 60 (inert at desk scale)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-validate", action="store_true")
    s.add_argument("--json", default=None)
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("check-cov", help="covariance identities")
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--gamma-cells", type=int, default=3)
    s.add_argument("--pairs", type=int, default=10_000)
    s.add_argument("--brw-n", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_check_cov)

    s = sub.add_parser("check-toy", help="E min(X, Y) for independent standard normals")
    s.add_argument("--reps", type=int, default=1_000_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--antithetic", action="store_true")
    s.set_defaults(func=cmd_check_toy)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.cmd is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, OSError, MemoryError) as e:
        sys.stderr.write(f"fppbrw {args.cmd}: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
