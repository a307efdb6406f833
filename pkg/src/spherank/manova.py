"""Distribution-free rank-score MANOVA on the sphere and the pseudo-vMF
comparator.

The pooled sample is transported once; each group's statistic is a
centred sum of scores of its transported observations. The quadratic form
in those sums is compared with a chi-square law.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from spherank.geometry import as_unit
from spherank.grids import StructuredGrid, auto_factorization
from spherank.models import frechet_mean, g_kappa_inv, vmf_kappa_mle
from spherank.transport import EmpiricalTransport, fit

SCORE_KINDS = ("uniform", "vmf-location", "vmf-concentration", "vmf-location-concentration")
RANK0_CLAMP = 1.0 - 1e-12
PINV_RTOL = 1e-10

# --------------------------------------------------------------------------
# chi-square tail and quantile


def _chi2_cdf(x: float, df: float) -> float:
    return float(special.gammainc(0.5 * df, 0.5 * x)) if x > 0 else 0.0


def _chi2_logpdf(x: float, df: float) -> float:
    k = 0.5 * df
    return (k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k)


def chi2_sf(x: float, df: float) -> float:
    """Upper tail ``P(X > x)`` of the chi-square law."""
    if df <= 0:
        raise ValueError("df must be positive")
    if x <= 0:
        return 1.0
    return float(special.gammaincc(0.5 * df, 0.5 * x))


def chi2_quantile(p: float, df: float, rtol: float = 1e-12) -> float:
    """Inverse chi-square distribution function.

    Brackets the root by doubling, then runs Newton steps on the regularized
    lower incomplete gamma, falling back to bisection whenever a step leaves
    the bracket.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if df <= 0:
        raise ValueError("df must be positive")
    lo, hi = 0.0, max(1.0, float(df))
    while _chi2_cdf(hi, df) < p:
        lo, hi = hi, 2.0 * hi
    x = 0.5 * (lo + hi)
    for _ in range(200):
        f = _chi2_cdf(x, df) - p
        if f > 0:
            hi = x
        else:
            lo = x
        dens = math.exp(_chi2_logpdf(x, df)) if x > 0 else 0.0
        new = x - f / dens if dens > 0 else 0.5 * (lo + hi)
        if not lo < new < hi:
            new = 0.5 * (lo + hi)
        if abs(new - x) <= rtol * max(x, 1e-300):
            return new
        x = new
    return x


# --------------------------------------------------------------------------
# data containers


@dataclass(frozen=True)
class PooledSample:
    """Groups of observations pooled in order (group 1 first)."""

    groups: tuple[np.ndarray, ...]

    def __init__(self, groups: Sequence):
        arrs = tuple(as_unit(np.atleast_2d(g)) for g in groups)
        if len(arrs) < 2:
            raise ValueError("need at least two groups")
        if len({a.shape[1] for a in arrs}) != 1:
            raise ValueError("groups have different dimensions")
        object.__setattr__(self, "groups", arrs)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.shape[0] for g in self.groups])

    @property
    def pooled(self) -> np.ndarray:
        return np.vstack(self.groups)

    @property
    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.groups)), self.sizes)

    @property
    def d(self) -> int:
        return self.groups[0].shape[1]


@dataclass(frozen=True)
class ScoreFunction:
    """Score attached to a fitted pooled transport.

    ``pole``, ``kappa`` and ``n_R`` are only used by the vMF kinds.
    """

    kind: str
    d: int
    pole: np.ndarray | None = None
    kappa: float = 0.0
    n_R: int = 0

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown score {self.kind!r}; choose from {SCORE_KINDS}")

    @property
    def d_J(self) -> int:
        return 1 if self.kind == "vmf-concentration" else self.d

    @classmethod
    def from_transport(cls, kind: str, t: EmpiricalTransport, kappa: float | None = None) -> "ScoreFunction":
        """Fit the score context; ``kappa`` defaults to the vMF MLE on the pooled sample."""
        if kind == "uniform":
            return cls(kind=kind, d=t.d)
        if kappa is None:
            kappa = vmf_kappa_mle(t.sample)
        return cls(kind=kind, d=t.d, pole=t.pole, kappa=float(kappa), n_R=t.grid.n_R)

    def latitude_table(self) -> np.ndarray:
        """``G_kappa^{-1}(1 - r / (n_R + 1))`` for ranks ``r = 0..n_R``."""
        args = 1.0 - np.arange(self.n_R + 1) / (self.n_R + 1.0)
        args[0] = RANK0_CLAMP
        return np.asarray(g_kappa_inv(args, self.kappa, self.d), dtype=float)

    def evaluate(self, images: np.ndarray, ranks: np.ndarray, signs: np.ndarray) -> np.ndarray:
        if self.kind == "uniform":
            return np.asarray(images, dtype=float).copy()
        g = self.latitude_table()[ranks]
        if self.kind == "vmf-concentration":
            return g[:, None]
        radial = np.sqrt(np.clip(1.0 - g * g, 0.0, None))
        if self.kind == "vmf-location":
            return self.kappa * radial[:, None] * signs
        return self.kappa * (g[:, None] * self.pole[None, :] + radial[:, None] * signs)


@dataclass(frozen=True)
class ManovaReport:
    test: str
    statistic: float
    df: int
    d_star: int
    p_value: float
    alpha: float
    reject: bool
    delta: list = field(default_factory=list)
    kappa_hat: float | None = None
    grid: tuple[int, int, int] | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.grid is not None:
            out["grid"] = list(self.grid)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# --------------------------------------------------------------------------
# score statistics


def score_values(t: EmpiricalTransport, score: ScoreFunction) -> np.ndarray:
    """Scores of the transported observations, shape ``(n, d_J)``."""
    return score.evaluate(t.images, t.ranks, t.signs)


def d_matrix(score: ScoreFunction, grid: StructuredGrid) -> np.ndarray:
    """Covariance of the score under the uniform law.

    Exact ``I_d / d`` for the uniform score; otherwise the covariance of the
    score over the grid positions.
    """
    if score.kind == "uniform":
        return np.eye(score.d) / score.d
    idx = np.arange(grid.n)
    vals = score.evaluate(grid.points, grid.rank_of(idx), grid.signs())
    centred = vals - vals.mean(axis=0)
    cov = centred.T @ centred / grid.n
    return 0.5 * (cov + cov.T)


def pseudo_inverse(m, rtol: float = PINV_RTOL) -> tuple[np.ndarray, int]:
    """Moore-Penrose inverse of a symmetric PSD matrix and its numerical rank."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1] or not np.allclose(m, m.T, atol=1e-12, rtol=1e-10):
        raise ValueError("pseudo_inverse expects a symmetric matrix")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    top = vals.max(initial=0.0)
    keep = vals > rtol * top if top > 0 else np.zeros_like(vals, dtype=bool)
    inv = (vecs[:, keep] / vals[keep]) @ vecs[:, keep].T
    return inv, int(keep.sum())


def group_deltas(scores: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    """Centred, scaled group sums ``Delta_i``, one row per group."""
    scores = np.asarray(scores, dtype=float)
    sizes = np.asarray(sizes)
    n = int(sizes.sum())
    total = scores.sum(axis=0)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    out = np.empty((sizes.size, scores.shape[1]))
    for i, n_i in enumerate(sizes):
        group_sum = scores[bounds[i] : bounds[i + 1]].sum(axis=0)
        out[i] = (math.sqrt(n / n_i) * group_sum - math.sqrt(n_i / n) * total) / math.sqrt(n)
    return out


def q_form(deltas: np.ndarray, d_inv: np.ndarray) -> float:
    return float(np.einsum("ij,jk,ik->", deltas, d_inv, deltas))


def q_statistic(
    pooled: PooledSample,
    score: str | ScoreFunction = "uniform",
    n_R: int | None = None,
    n_S: int | None = None,
    n_0: int | None = None,
    seed: int = 0,
    alpha: float = 0.05,
    transport: EmpiricalTransport | None = None,
) -> ManovaReport:
    """Rank-score MANOVA statistic and its chi-square test.

    Pass ``transport`` to reuse a fit of ``pooled.pooled`` across scores.
    """
    sizes = pooled.sizes
    if np.any(sizes < 2):
        raise ValueError("every group needs at least two observations")
    x = pooled.pooled
    if transport is None:
        if n_R is None:
            n_R, n_S, n_0 = auto_factorization(x.shape[0], pooled.d)
        transport = fit(x, n_R, n_S, n_0, seed=seed)
    elif transport.n != x.shape[0]:
        raise ValueError("transport was fitted on a different sample")
    if isinstance(score, str):
        score = ScoreFunction.from_transport(score, transport)
    scores = score_values(transport, score)
    d_inv, d_star = pseudo_inverse(d_matrix(score, transport.grid))
    deltas = group_deltas(scores, sizes)
    q = q_form(deltas, d_inv)
    m = sizes.size
    df = (m - 1) * d_star
    crit = chi2_quantile(1.0 - alpha, df)
    g = transport.grid
    return ManovaReport(
        test=score.kind,
        statistic=q,
        df=df,
        d_star=d_star,
        p_value=chi2_sf(q, df),
        alpha=alpha,
        reject=bool(q > crit),
        delta=deltas.tolist(),
        kappa_hat=None if score.kind == "uniform" else score.kappa,
        grid=(g.n_R, g.n_S, g.n_0),
    )


def pvmf_test(pooled: PooledSample, alpha: float = 0.05, seed: int = 0) -> ManovaReport:
    """Pseudo-von Mises-Fisher MANOVA test (valid under rotational symmetry)."""
    sizes = pooled.sizes
    if np.any(sizes < 2):
        raise ValueError("every group needs at least two observations")
    x = pooled.pooled
    n = int(sizes.sum())
    d = pooled.d
    m = sizes.size
    theta = frechet_mean(x, seed=seed)
    proj = np.eye(d) - np.outer(theta, theta)

    means = np.array([g.mean(axis=0) for g in pooled.groups])
    lat = [g @ theta for g in pooled.groups]
    e = np.array([v.mean() for v in lat])
    b = np.array([1.0 - np.mean(v * v) for v in lat])
    if np.any(b <= 1e-12):
        raise ValueError("degenerate group concentration")
    dd = e / b
    r = sizes / n
    h = float(np.sum(r * dd * dd * b))

    cross = means @ proj @ means.T
    first = np.sum(sizes * dd / e * np.diag(cross))
    second = np.sum(np.outer(sizes, sizes) / n * np.outer(dd, dd) / h * cross)
    q = float((d - 1) * (first - second))
    df = (m - 1) * (d - 1)
    crit = chi2_quantile(1.0 - alpha, df)
    return ManovaReport(
        test="pvmf", statistic=q, df=df, d_star=d - 1, p_value=chi2_sf(q, df),
        alpha=alpha, reject=bool(q > crit),
    )
