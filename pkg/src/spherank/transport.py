"""Empirical directional distribution function.

The sample is coupled to a grid by an exact optimal assignment under the
cost ``d^2 / 2``. A first coupling to a plain grid yields the pole; a second
coupling to the structured grid about that pole yields images, ranks and
signs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from spherank.assignment import solve
from spherank.geometry import as_unit, cost_matrix, geodesic_distance
from spherank.grids import PlainGrid, StructuredGrid, check_factorization, plain_grid, structured_grid
from spherank.models import frechet_mean


@dataclass(frozen=True)
class EmpiricalTransport:
    """Fitted coupling of a sample with a structured grid.

    ``grid_index[i]`` is the grid row matched to ``sample[i]``; ``ranks``,
    ``meridians`` and ``signs`` are read off that row.
    """

    sample: np.ndarray
    grid: StructuredGrid
    grid_index: np.ndarray
    images: np.ndarray
    ranks: np.ndarray
    meridians: np.ndarray
    signs: np.ndarray
    total_cost: float
    seed: int = 0

    @property
    def pole(self) -> np.ndarray:
        return self.grid.pole

    @property
    def n(self) -> int:
        return self.sample.shape[0]

    @property
    def d(self) -> int:
        return self.sample.shape[1]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "n_R": self.grid.n_R,
            "n_S": self.grid.n_S,
            "n_0": self.grid.n_0,
            "seed": self.seed,
            "pole": self.pole.tolist(),
            "total_cost": self.total_cost,
            "sample": self.sample.tolist(),
            "images": self.images.tolist(),
            "grid_index": self.grid_index.tolist(),
            "ranks": self.ranks.tolist(),
            "meridians": self.meridians.tolist(),
            "signs": self.signs.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "EmpiricalTransport":
        grid = structured_grid(np.asarray(data["pole"]), data["n_R"], data["n_S"], data["n_0"])
        idx = np.asarray(data["grid_index"], dtype=np.intp)
        return _from_index(
            np.asarray(data["sample"], dtype=float), grid, idx,
            float(data["total_cost"]), int(data.get("seed", 0)),
        )


def _from_index(sample, grid: StructuredGrid, idx, total_cost: float, seed: int) -> EmpiricalTransport:
    return EmpiricalTransport(
        sample=sample,
        grid=grid,
        grid_index=idx,
        images=grid.points[idx],
        ranks=grid.rank_of(idx).astype(int),
        meridians=grid.meridian_of(idx).astype(int),
        signs=grid.signs()[idx],
        total_cost=total_cost,
        seed=seed,
    )


def _sample_rows(sample) -> np.ndarray:
    x = as_unit(sample)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] == 0:
        raise ValueError("empty sample")
    return x


def fit_plain(sample, grid: PlainGrid | np.ndarray, method: str = "auto"):
    """Optimal coupling of the sample with a plain grid.

    Returns
    -------
    images : ndarray, shape (n, d)
        ``images[i]`` is the grid point matched to ``sample[i]``.
    total_cost : float
    perm : ndarray of int
    """
    x = _sample_rows(sample)
    pts = grid.points if isinstance(grid, PlainGrid) else np.asarray(grid, dtype=float)
    if pts.shape != x.shape:
        raise ValueError(f"sample shape {x.shape} and grid shape {pts.shape} differ")
    result = solve(cost_matrix(x, pts), method=method)
    return pts[result.perm], result.total_cost, result.perm


def estimate_pole(sample, seed: int = 0) -> np.ndarray:
    """Empirical image of the Frechet mean.

    The sample is coupled with an n-point plain grid; the pole is the image
    of the observation closest to the Frechet mean (first index on ties).
    """
    x = _sample_rows(sample)
    n, d = x.shape
    center = frechet_mean(x, seed=seed)
    images, _, _ = fit_plain(x, plain_grid(n, d, seed))
    closest = int(np.argmin(geodesic_distance(x, center)))
    return images[closest].copy()


def fit(sample, n_R: int, n_S: int, n_0: int, seed: int = 0, pole=None) -> EmpiricalTransport:
    """Empirical transport to the structured grid.

    Parameters
    ----------
    sample : array_like, shape (n, d)
    n_R, n_S, n_0 : int
        Grid shape with ``n = n_R * n_S + n_0`` and ``n_0 < min(n_R, n_S)``.
    seed : int
        Seeds the plain grid (``d != 3``) and the Frechet-mean restarts.
    pole : array_like, optional
        Skip pole estimation and use this pole.
    """
    x = _sample_rows(sample)
    check_factorization(n_R, n_S, n_0, x.shape[0])
    if pole is None:
        pole = estimate_pole(x, seed=seed)
    grid = structured_grid(pole, n_R, n_S, n_0)
    result = solve(cost_matrix(x, grid.points))
    return _from_index(x, grid, result.perm, result.total_cost, seed)


def _check_rank(t: EmpiricalTransport, j: int) -> None:
    if not 1 <= j <= t.grid.n_R:
        raise ValueError(f"rank {j} outside 1..{t.grid.n_R}")


def contour(t: EmpiricalTransport, j: int) -> np.ndarray:
    """Sample points of rank exactly ``j``; content ``j / (n_R + 1)``."""
    _check_rank(t, j)
    return t.sample[t.ranks == j]


def region(t: EmpiricalTransport, j: int) -> np.ndarray:
    """Sample points of rank at most ``j`` (pole points included)."""
    _check_rank(t, j)
    return t.sample[t.ranks <= j]


def meridian(t: EmpiricalTransport, j_s: int) -> np.ndarray:
    """Sample points whose image lies on equator index ``j_s``, ordered by rank."""
    if not 0 <= j_s < t.grid.n_S:
        raise ValueError(f"meridian index {j_s} outside 0..{t.grid.n_S - 1}")
    idx = np.flatnonzero(t.meridians == j_s)
    return t.sample[idx[np.argsort(t.ranks[idx], kind="stable")]]


def transport_median(t: EmpiricalTransport) -> tuple[np.ndarray, dict]:
    """Heuristic plug-in for the transport median.

    Scores each observation ``z`` by the fraction of observations that lie
    within a quarter turn of ``z`` and whose image lies in the hemisphere of
    the image of ``z``; the best-scoring observation is returned (first index
    on ties). The returned metadata marks the estimate as heuristic.
    """
    near = (t.sample @ t.sample.T) >= 0.0
    concordant = (t.images @ t.images.T) >= 0.0
    score = np.mean(near & concordant, axis=1)
    best = int(np.argmax(score))
    return t.sample[best].copy(), {"heuristic": True, "score": float(score[best]), "index": best}
