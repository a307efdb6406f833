"""Simulation designs and replication loops for the uniformity tables and
the MANOVA power curves.

Every design is a picklable sampler (``functools.partial`` of a module-level
function), so replications can be mapped over a process pool. Random streams
derive from one master seed and a stream name, then one child per
replication; output order follows the replication index.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np

from spherank.geometry import rotation_z
from spherank.gof import cvm_statistic, mc_critical_value, rayleigh_test
from spherank.grids import auto_factorization
from spherank.manova import SCORE_KINDS, PooledSample, ScoreFunction, pvmf_test, q_statistic
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
from spherank.transport import fit

Sampler = Callable[[int, np.random.Generator], np.ndarray]

E3 = (0.0, 0.0, 1.0)
MANOVA_SIZES = (500, 600)
MANOVA_GRID = (44, 25, 0)
SCALES = {"desk": 200, "paper": 1000}
FIG3_XI = {
    "fig3-case1": (0.0, 0.2, 0.4, 0.6, 0.8),
    "fig3-case2": (0.0, 0.5, 1.0, 1.5, 2.0),
    "fig3-case3": (0.0, 1.0, 2.0, 3.0, 4.0, 5.0),
    "fig3-case4": (0.0, 0.2, 0.4, 0.6, 0.8, 1.0),
}
TARGETS = ("table1", "table2") + tuple(FIG3_XI)


def streams(seed: int, name: str, count: int) -> list[np.random.SeedSequence]:
    """``count`` independent child streams of the named stream under ``seed``."""
    return np.random.SeedSequence([seed, zlib.crc32(name.encode())]).spawn(count)


# --------------------------------------------------------------------------
# samplers


def _uniform(n, rng, d):
    return sample_uniform(n, d, rng)


def _vmf(n, rng, theta, kappa):
    return sample_vmf(n, VmfParams(np.asarray(theta), kappa), rng)


def _tangent(n, rng, theta, mu, kappa, beta_a=1.0, beta_b=1.0):
    return sample_tangent_vmf(n, TangentVmfParams(np.asarray(theta), np.asarray(mu), kappa, beta_a, beta_b), rng)


def _sine_skew(n, rng, lam, kappa, mu=0.0):
    return sample_sine_skew(n, SineSkewParams(mu, lam, kappa), rng)


def _mixture(n, rng, components):
    return sample_mixture(n, components, rng)


@dataclass(frozen=True)
class GofDesign:
    label: str
    d: int
    n: int
    sampler: Sampler


def table1_designs() -> list[GofDesign]:
    """Uniformity alternatives on S^2, n = 400."""
    th1 = (0.0, -0.3, math.sqrt(0.91))
    th2 = (0.3, math.sqrt(0.66), 0.5)
    rows = [GofDesign("uniform", 3, 400, partial(_uniform, d=3))]
    for k in (0.05, 0.1, 0.5):
        rows.append(GofDesign(f"vmf(kappa={k})", 3, 400, partial(_vmf, theta=E3, kappa=k)))
    for k in (0.05, 0.1, 0.2):
        rows.append(GofDesign(f"tangent-vmf(kappa={k})", 3, 400, partial(_tangent, theta=E3, mu=(0.0, 1.0), kappa=k)))
    for k in (0.1, 0.2, 0.3):
        comps = ((0.5, partial(_vmf, theta=th1, kappa=k)), (0.5, partial(_vmf, theta=th2, kappa=k)))
        rows.append(GofDesign(f"mix2-vmf(kappa={k})", 3, 400, partial(_mixture, components=comps)))
    for k in (0.07, 0.1, 0.2):
        comps = (
            (0.5, partial(_tangent, theta=E3, mu=(0.0, 1.0), kappa=k)),
            (0.25, partial(_vmf, theta=th1, kappa=k)),
            (0.25, partial(_vmf, theta=th2, kappa=k)),
        )
        rows.append(GofDesign(f"mix2-vmf+tangent(kappa={k})", 3, 400, partial(_mixture, components=comps)))
    return rows


def table2_designs() -> list[GofDesign]:
    """Uniformity alternatives on S^1, n = 100."""
    th1 = (-0.3, math.sqrt(0.91))
    th2 = (0.6, 0.8)
    rows = [GofDesign("uniform", 2, 100, partial(_uniform, d=2))]
    for k in (0.05, 0.1, 0.5):
        rows.append(GofDesign(f"vmf(kappa={k})", 2, 100, partial(_vmf, theta=(0.0, 1.0), kappa=k)))
    for k in (0.1, 0.25, 0.5):
        comps = ((0.7, partial(_vmf, theta=th1, kappa=k)), (0.3, partial(_vmf, theta=th2, kappa=k)))
        rows.append(GofDesign(f"mix2-vmf(kappa={k})", 2, 100, partial(_mixture, components=comps)))
    for lam in (0.1, 0.3, 0.35):
        rows.append(GofDesign(f"sine-skew(lambda={lam})", 2, 100, partial(_sine_skew, lam=lam, kappa=0.1)))
    return rows


def gof_designs(target: str) -> list[GofDesign]:
    if target == "table1":
        return table1_designs()
    if target == "table2":
        return table2_designs()
    raise ValueError(f"unknown uniformity target {target!r}")


# --------------------------------------------------------------------------
# uniformity replications


def _gof_task(task) -> tuple[float, bool]:
    sampler, n, grid, grid_seed, alpha, ss = task
    x = sampler(n, np.random.default_rng(ss))
    return cvm_statistic(x, *grid, seed=grid_seed), rayleigh_test(x, alpha).reject


def gof_rejection(
    design: GofDesign,
    n_reps: int,
    seed: int,
    n_mc: int = 2000,
    alpha: float = 0.05,
    grid: tuple[int, int, int] | None = None,
    map_fn: Callable | None = None,
) -> dict:
    """Rejection frequencies of the transport test and the Rayleigh test.

    The Monte Carlo null uses stream ``seed`` and is computed once; each
    replication then only evaluates the statistic.
    """
    grid = grid or auto_factorization(design.n, design.d)
    crit = mc_critical_value(design.n, design.d, *grid, alpha, n_mc, seed, map_fn=map_fn)
    tasks = [(design.sampler, design.n, grid, 0, alpha, ss) for ss in streams(seed, design.label, n_reps)]
    results = list((map_fn or map)(_gof_task, tasks))
    stats = np.array([r[0] for r in results])
    return {
        "row": design.label,
        "ot": float(np.mean(stats > crit)),
        "rayleigh": float(np.mean([r[1] for r in results])),
        "critical_value": crit,
        "n_reps": n_reps,
    }


# --------------------------------------------------------------------------
# MANOVA power curves


def _case_groups(case: str, xi: float, rng: np.random.Generator, sizes=MANOVA_SIZES):
    n1, n2 = sizes
    e1 = np.array([1.0, 0.0, 0.0])
    if case == "fig3-case1":
        return sample_vmf(n1, VmfParams(e1, 3.0), rng), sample_vmf(n2, VmfParams(rotation_z(xi) @ e1, 3.0), rng)
    if case == "fig3-case2":
        return sample_vmf(n1, VmfParams(e1, 3.0), rng), sample_vmf(n2, VmfParams(e1, 3.0 + xi), rng)
    if case == "fig3-case3":
        comps = (
            (3 / 8, partial(_vmf, theta=(1.0, 0.0, 0.0), kappa=3.0)),
            (3 / 8, partial(_vmf, theta=(-0.8, 0.3, math.sqrt(0.27)), kappa=2.0)),
            (1 / 4, partial(_vmf, theta=(0.0, -0.7, math.sqrt(0.51)), kappa=3.0)),
        )
        g1 = sample_mixture(n1, comps, rng)
        g2 = sample_mixture(n2, comps, rng) @ rotation_z(xi).T
        return g1, g2
    if case == "fig3-case4":
        mu = (0.7, math.sqrt(0.51))
        g1 = _tangent(n1, rng, E3, mu, 1.0, 2.0, 5.0)
        g2 = _tangent(n2, rng, E3, mu, 1.0, 2.0, 5.0 + xi)
        return g1, g2
    raise ValueError(f"unknown MANOVA case {case!r}")


def _manova_task(task) -> dict[str, bool]:
    case, xi, sizes, grid, alpha, scores, ss = task
    g1, g2 = _case_groups(case, xi, np.random.default_rng(ss), sizes)
    pooled = PooledSample([g1, g2])
    t = fit(pooled.pooled, *grid)
    out = {}
    for kind in scores:
        out[kind] = q_statistic(pooled, ScoreFunction.from_transport(kind, t), transport=t, alpha=alpha).reject
    out["pvmf"] = pvmf_test(pooled, alpha=alpha).reject
    return out


def manova_rejection(
    case: str,
    xi: float,
    n_reps: int,
    seed: int,
    alpha: float = 0.05,
    sizes: tuple[int, int] = MANOVA_SIZES,
    grid: tuple[int, int, int] = MANOVA_GRID,
    scores: Sequence[str] = SCORE_KINDS,
    map_fn: Callable | None = None,
) -> dict[str, float]:
    """Rejection frequency of each rank-score test and of pvMF at one ``xi``.

    One pooled transport per replication is shared by all scores.
    """
    name = f"{case}:xi={xi:g}:n={sizes[0]},{sizes[1]}"
    tasks = [(case, xi, sizes, grid, alpha, tuple(scores), ss) for ss in streams(seed, name, n_reps)]
    results = list((map_fn or map)(_manova_task, tasks))
    return {k: float(np.mean([r[k] for r in results])) for k in (*scores, "pvmf")}


# --------------------------------------------------------------------------
# table emitters


def replicate(
    target: str,
    n_reps: int,
    seed: int = 0,
    n_mc: int = 2000,
    alpha: float = 0.05,
    map_fn: Callable | None = None,
    progress: Callable[[str], None] | None = None,
) -> list[dict]:
    """Rows of rejection frequencies for one target.

    Tables yield ``target, row, test, rejection_rate, n_reps, seed``;
    power curves yield ``xi, score, rejection_rate, n_reps, seed``.
    """
    rows: list[dict] = []
    if target in ("table1", "table2"):
        for design in gof_designs(target):
            res = gof_rejection(design, n_reps, seed, n_mc, alpha, map_fn=map_fn)
            for test in ("ot", "rayleigh"):
                rows.append({"target": target, "row": design.label, "test": test,
                             "rejection_rate": res[test], "n_reps": n_reps, "seed": seed})
            if progress:
                progress(f"{target} {design.label}: ot={res['ot']:.3f} rayleigh={res['rayleigh']:.3f}")
        return rows
    if target in FIG3_XI:
        for xi in FIG3_XI[target]:
            rates = manova_rejection(target, xi, n_reps, seed, alpha, map_fn=map_fn)
            for score, rate in rates.items():
                rows.append({"xi": xi, "score": score, "rejection_rate": rate, "n_reps": n_reps, "seed": seed})
            if progress:
                progress(f"{target} xi={xi:g}: " + " ".join(f"{k}={v:.3f}" for k, v in rates.items()))
        return rows
    raise ValueError(f"unknown target {target!r}; choose from {TARGETS}")
