"""Command-line interface.

Subcommands: ``sample``, ``transport``, ``contours``, ``test-unif``,
``manova`` and ``replicate``. Exit status is 0 on success, 2 on invalid
input or configuration and 1 when a computation fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from pathlib import Path

import jsonschema
import numpy as np

from spherank import experiments
from spherank.geometry import NORM_TOLERANCE
from spherank.gof import rayleigh_test, test_uniformity
from spherank.grids import auto_factorization, check_factorization
from spherank.manova import SCORE_KINDS, PooledSample, pvmf_test, q_statistic
from spherank.models import (
    SineSkewParams,
    TangentVmfParams,
    VmfParams,
    sample_mixture,
    sample_sine_skew,
    sample_tangent_vmf,
    sample_uniform,
    sample_vmf,
)
from spherank.transport import EmpiricalTransport, fit

EXIT_OK, EXIT_COMPUTE, EXIT_INVALID = 0, 1, 2
FAMILIES = ("uniform", "vmf", "tangent_vmf", "mixture", "sine_skew")

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "n_mc": {"type": "integer", "minimum": 100},
        "grid": {
            "oneOf": [
                {"const": "auto"},
                {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 3, "maxItems": 3},
            ]
        },
        "score": {"enum": [*SCORE_KINDS, "pvmf"]},
        "output": {"type": "string"},
    },
}
DEFAULTS = {"seed": 0, "alpha": 0.05, "n_mc": 2000, "grid": "auto", "score": "uniform", "output": None}


class InputError(ValueError):
    """Invalid user input; reported with exit status 2."""


# --------------------------------------------------------------------------
# datasets


def read_dataset(path: str | Path) -> np.ndarray:
    """Parse a CSV of direction cosines, or of ``lon,lat`` degrees (d = 3).

    Rows whose norm is off by more than the normalization tolerance are
    rejected with their line number; the others are renormalized.
    """
    text = Path(path).read_text() if str(path) != "-" else sys.stdin.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: no data rows")
    header = [c.strip().lower() for c in rows[0]]
    lonlat = header == ["lon", "lat"]
    start = 1 if lonlat or not _is_numeric(rows[0]) else 0
    data = []
    for k, row in enumerate(rows[start:], start=start + 1):
        try:
            data.append([float(c) for c in row])
        except ValueError:
            raise InputError(f"{path}: line {k}: non-numeric entry in {row}") from None
    if len({len(r) for r in data}) != 1:
        raise InputError(f"{path}: rows have different numbers of columns")
    arr = np.array(data, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{path}: non-finite entries")
    if lonlat:
        lon, lat = np.radians(arr[:, 0]), np.radians(arr[:, 1])
        return np.column_stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])
    if arr.shape[1] < 2:
        raise InputError(f"{path}: need at least two columns")
    norms = np.linalg.norm(arr, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
    if bad.size:
        line = int(bad[0]) + start + 1
        raise InputError(f"{path}: line {line}: not a unit vector (norm {norms[bad[0]]:.8g}); {bad.size} bad row(s)")
    return arr / norms[:, None]


def _is_numeric(row) -> bool:
    try:
        [float(c) for c in row]
    except ValueError:
        return False
    return True


def write_dataset(x: np.ndarray, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(x.shape[1])])
    for row in x:
        w.writerow([repr(float(v)) for v in row])


def _open_out(path):
    if path in (None, "-"):
        return nullcontext(sys.stdout)
    return open(path, "w", newline="")


def _emit_json(obj: dict, path) -> None:
    text = json.dumps(obj, indent=2)
    print(text)
    if path not in (None, "-"):
        Path(path).write_text(text + "\n")


# --------------------------------------------------------------------------
# argument helpers


def _vector(text: str) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    return v


def _grid(text: str):
    if text == "auto":
        return "auto"
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be 'auto' or n_R,n_S,n_0")
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}") from None


def _resolve(args, keys) -> dict:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    settings = {k: DEFAULTS[k] for k in keys}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        try:
            jsonschema.validate(cfg, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise InputError(f"invalid config {args.config}: {exc.message}") from None
        settings.update({k: v for k, v in cfg.items() if k in keys})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            settings[k] = v
    if "alpha" in settings and not 0.0 < settings["alpha"] < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    if "n_mc" in settings and settings["n_mc"] < 100:
        raise InputError("n_mc must be >= 100")
    return settings


def _grid_for(grid, n: int, d: int) -> tuple[int, int, int]:
    if grid == "auto":
        return auto_factorization(n, d)
    n_R, n_S, n_0 = grid
    try:
        check_factorization(n_R, n_S, n_0, n)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if d == 2 and n_S > 2:
        raise InputError("for d = 2 the equator has two points; use n_S <= 2")
    return n_R, n_S, n_0


# --------------------------------------------------------------------------
# commands


def cmd_sample(args) -> int:
    rng = np.random.default_rng(args.seed)
    fam = args.family
    resolved: dict = {"family": fam, "n": args.n, "seed": args.seed}
    try:
        if fam == "uniform":
            x = sample_uniform(args.n, args.d, rng)
            resolved["d"] = args.d
        elif fam == "vmf":
            theta = args.theta if args.theta is not None else np.eye(args.d)[-1]
            p = VmfParams(theta, args.kappa)
            x = sample_vmf(args.n, p, rng)
            resolved.update(theta=p.theta.tolist(), kappa=p.kappa)
        elif fam == "tangent_vmf":
            theta = args.theta if args.theta is not None else np.eye(args.d)[-1]
            mu = args.mu if args.mu is not None else np.eye(theta.size - 1)[-1]
            p = TangentVmfParams(theta, mu, args.kappa, args.beta_a, args.beta_b)
            x = sample_tangent_vmf(args.n, p, rng)
            resolved.update(theta=p.theta.tolist(), mu=p.mu.tolist(), kappa=p.kappa, beta_a=p.beta_a, beta_b=p.beta_b)
        elif fam == "sine_skew":
            p = SineSkewParams(args.location, args.lam, args.kappa)
            x = sample_sine_skew(args.n, p, rng)
            resolved.update(d=2, location=p.mu, **{"lambda": p.lam}, kappa=p.base_kappa)
        else:
            if not args.component:
                raise InputError("mixture needs at least one --component weight:kappa:theta")
            comps, spec = [], []
            for c in args.component:
                try:
                    w, k, th = c.split(":")
                    params = VmfParams(_vector(th), float(k))
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise InputError(f"invalid component {c!r}: {exc}") from None
                comps.append((float(w), lambda n, r, p=params: sample_vmf(n, p, r)))
                spec.append({"weight": float(w), "kappa": params.kappa, "theta": params.theta.tolist()})
            x = sample_mixture(args.n, comps, rng)
            resolved["components"] = spec
    except InputError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from None
    print(json.dumps(resolved), file=sys.stderr)
    with _open_out(args.out) as out:
        write_dataset(x, out)
    return EXIT_OK


def cmd_transport(args) -> int:
    x = read_dataset(args.input)
    s = _resolve(args, ("seed", "grid", "output"))
    grid = _grid_for(s["grid"], *x.shape)
    if args.pole is not None and args.pole.size != x.shape[1]:
        raise InputError(f"--pole has {args.pole.size} entries, data has {x.shape[1]} columns")
    t = fit(x, *grid, seed=s["seed"], pole=args.pole)
    hist = np.bincount(t.ranks, minlength=grid[0] + 1)
    summary = {
        "total_cost": t.total_cost,
        "pole": t.pole.tolist(),
        "grid": list(grid),
        "rank_histogram": {str(j): int(c) for j, c in enumerate(hist)},
    }
    print(json.dumps(summary, indent=2), file=sys.stderr)
    with _open_out(s["output"]) as out:
        out.write(t.to_json() + "\n")
    return EXIT_OK


def cmd_contours(args) -> int:
    try:
        t = EmpiricalTransport.from_dict(json.loads(Path(args.transport).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"cannot read transport {args.transport}: {exc}") from None
    ranks = [int(r) for r in args.ranks.split(",")]
    for j in ranks:
        if not 1 <= j <= t.grid.n_R:
            raise InputError(f"rank {j} outside 1..{t.grid.n_R}")
    with _open_out(args.out) as out:
        w = csv.writer(out, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(t.d)] + ["rank", "meridian_index"])
        for j in ranks:
            idx = np.flatnonzero(t.ranks == j)
            idx = idx[np.argsort(t.meridians[idx], kind="stable")]
            for i in idx:
                w.writerow([repr(float(v)) for v in t.sample[i]] + [j, int(t.meridians[i])])
    return EXIT_OK


def cmd_test_unif(args) -> int:
    x = read_dataset(args.input)
    s = _resolve(args, ("seed", "alpha", "n_mc", "grid", "output"))
    grid = _grid_for(s["grid"], *x.shape)
    with _pool(args.workers) as pool:
        report = test_uniformity(x, s["alpha"], s["n_mc"], s["seed"], grid, map_fn=pool.map if pool else None)
    out = report.to_dict()
    if args.rayleigh:
        out["rayleigh"] = rayleigh_test(x, s["alpha"]).to_dict()
    _emit_json(out, s["output"])
    return EXIT_OK


def cmd_manova(args) -> int:
    if len(args.input) < 2:
        raise InputError("manova needs at least two group files")
    groups = [read_dataset(p) for p in args.input]
    s = _resolve(args, ("seed", "alpha", "grid", "score", "output"))
    try:
        pooled = PooledSample(groups)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if np.any(pooled.sizes < 2):
        raise InputError("every group needs at least two observations")
    if s["score"] == "pvmf":
        report = pvmf_test(pooled, s["alpha"], seed=s["seed"])
    else:
        grid = _grid_for(s["grid"], pooled.pooled.shape[0], pooled.d)
        report = q_statistic(pooled, s["score"], *grid, seed=s["seed"], alpha=s["alpha"])
    _emit_json(report.to_dict(), s["output"])
    return EXIT_OK


def cmd_replicate(args) -> int:
    s = _resolve(args, ("seed", "alpha", "n_mc", "output"))
    n_reps = args.reps or experiments.SCALES[args.scale]
    log = (lambda msg: print(msg, file=sys.stderr)) if not args.quiet else None
    with _pool(args.workers) as pool:
        rows = experiments.replicate(
            args.target, n_reps, s["seed"], s["n_mc"], s["alpha"], map_fn=pool.map if pool else None, progress=log,
        )
    with _open_out(s["output"]) as out:
        w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return EXIT_OK


def _pool(workers: int | None):
    if workers and workers > 1:
        return ProcessPoolExecutor(max_workers=workers)
    return nullcontext(None)


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spherank", description="Transport-based ranks and tests for directional data.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, alpha=False, n_mc=False, grid=False, workers=False):
        p.add_argument("--config", help="JSON run configuration (seed, alpha, n_mc, grid, score, output)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", dest="output", help="output path (default: stdout)")
        if alpha:
            p.add_argument("--alpha", type=float)
        if n_mc:
            p.add_argument("--n-mc", dest="n_mc", type=int)
        if grid:
            p.add_argument("--grid", type=_grid, help="n_R,n_S,n_0 or 'auto'")
        if workers:
            p.add_argument("--workers", type=int, default=1, help="worker processes")

    p = sub.add_parser("sample", help="draw a synthetic dataset")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--theta", type=_vector)
    p.add_argument("--mu", type=_vector, help="tangent vMF skewness direction")
    p.add_argument("--beta-a", type=float, default=1.0)
    p.add_argument("--beta-b", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="sine-skew intensity")
    p.add_argument("--location", type=float, default=0.0, help="sine-skew angular location")
    p.add_argument("--component", action="append", help="mixture component weight:kappa:theta (repeatable)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("transport", help="fit the empirical transport")
    p.add_argument("input")
    p.add_argument("--pole", type=_vector, help="fix the pole instead of estimating it")
    common(p, grid=True)
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("contours", help="export empirical quantile contours")
    p.add_argument("transport", help="transport JSON written by 'transport'")
    p.add_argument("--ranks", default="5,20,29")
    p.add_argument("--out")
    p.set_defaults(func=cmd_contours)

    p = sub.add_parser("test-unif", help="Monte Carlo calibrated uniformity test")
    p.add_argument("input")
    p.add_argument("--rayleigh", action="store_true", help="also report the Rayleigh test")
    common(p, alpha=True, n_mc=True, grid=True, workers=True)
    p.set_defaults(func=cmd_test_unif)

    p = sub.add_parser("manova", help="rank-score MANOVA across group files")
    p.add_argument("input", nargs="+")
    p.add_argument("--score", choices=[*SCORE_KINDS, "pvmf"])
    common(p, alpha=True, grid=True)
    p.set_defaults(func=cmd_manova)

    p = sub.add_parser("replicate", help="rejection-frequency tables and power curves")
    p.add_argument("--target", choices=experiments.TARGETS, required=True)
    p.add_argument("--scale", choices=tuple(experiments.SCALES), default="desk")
    p.add_argument("--reps", type=int, help="override the number of replications")
    p.add_argument("--quiet", action="store_true")
    common(p, alpha=True, n_mc=True, workers=True)
    p.set_defaults(func=cmd_replicate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
