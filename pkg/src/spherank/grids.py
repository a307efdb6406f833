"""Target grids for the empirical transport.

A *plain* grid is any point set whose empirical law approaches the uniform
law on the sphere; it is used to locate the pole. The *structured* grid is a
product of ``n_R`` parallels and ``n_S`` meridians around that pole, plus
``n_0`` copies of the pole itself, and carries ranks and signs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spherank.geometry import ComplementBasis, as_unit, complement_basis
from spherank.models import q_star, sample_uniform

GOLDEN = (1.0 + 5.0**0.5) / 2.0
EQUATOR_SEED = 20240611


@dataclass(frozen=True)
class PlainGrid:
    points: np.ndarray
    seed: int


@dataclass(frozen=True)
class StructuredGrid:
    """Parallels x meridians grid about ``pole``.

    ``points`` holds the ``n_0`` pole copies first, then point ``(i, j)`` at
    row ``n_0 + (i - 1) * n_S + j`` for rank ``i = 1..n_R`` and equator index
    ``j = 0..n_S-1``.
    """

    pole: np.ndarray
    basis: ComplementBasis
    equator: np.ndarray
    latitudes: np.ndarray
    n_R: int
    n_S: int
    n_0: int
    points: np.ndarray

    @property
    def n(self) -> int:
        return self.n_R * self.n_S + self.n_0

    def rank_of(self, index) -> np.ndarray:
        """Rank carried by grid row(s): 0 for pole copies, else the parallel index."""
        index = np.asarray(index)
        return np.where(index < self.n_0, 0, (index - self.n_0) // self.n_S + 1)

    def meridian_of(self, index) -> np.ndarray:
        """Equator index of grid row(s); -1 for pole copies."""
        index = np.asarray(index)
        return np.where(index < self.n_0, -1, (index - self.n_0) % self.n_S)

    def signs(self) -> np.ndarray:
        """Tangent sign of every grid row (zero for pole copies)."""
        out = np.zeros_like(self.points)
        out[self.n_0 :] = np.tile(self.basis.to_ambient(self.equator), (self.n_R, 1))
        return out


def fibonacci_sphere(n: int) -> np.ndarray:
    """Spherical Fibonacci lattice of ``n`` points on S^2."""
    k = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = 2.0 * np.pi * k / GOLDEN
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def plain_grid(n: int, d: int, seed: int = 0) -> PlainGrid:
    """Fibonacci lattice for ``d = 3``, seeded uniform draws otherwise."""
    if n < 1 or d < 2:
        raise ValueError(f"invalid grid request n={n}, d={d}")
    if d == 3:
        pts = fibonacci_sphere(n)
    else:
        pts = sample_uniform(n, d, np.random.default_rng(seed))
    return PlainGrid(points=pts, seed=seed)


def equator_grid(n_S: int, d: int) -> np.ndarray:
    """Reference grid of ``n_S`` points on S^(d-2).

    ``d = 3``: equispaced on the circle starting at ``(1, 0)``, counterclockwise.
    ``d = 2``: the two-point sphere ``{+1, -1}`` (``n_S <= 2``).
    ``d > 3``: a plain grid on S^(d-2) with a fixed seed.
    """
    if n_S < 1 or d < 2:
        raise ValueError(f"invalid equator request n_S={n_S}, d={d}")
    if d == 2:
        if n_S > 2:
            raise ValueError("for d = 2 the equator has only two points, n_S <= 2")
        return np.array([[1.0], [-1.0]])[:n_S]
    if d == 3:
        ang = 2.0 * np.pi * np.arange(n_S) / n_S
        return np.column_stack([np.cos(ang), np.sin(ang)])
    return plain_grid(n_S, d - 1, EQUATOR_SEED).points


def check_factorization(n_R: int, n_S: int, n_0: int, n: int | None = None) -> None:
    if n_R < 1 or n_S < 1 or n_0 < 0:
        raise ValueError(f"invalid grid shape ({n_R}, {n_S}, {n_0})")
    if n_0 >= min(n_R, n_S):
        raise ValueError(f"n_0 = {n_0} must be < min(n_R, n_S) = {min(n_R, n_S)}")
    if n is not None and n_R * n_S + n_0 != n:
        raise ValueError(f"n = {n} does not factor as {n_R} * {n_S} + {n_0}")


def structured_grid(pole, n_R: int, n_S: int, n_0: int) -> StructuredGrid:
    """Build the parallels x meridians grid about ``pole``.

    Parallel ``i`` sits at latitude ``Q_*(1 - i / (n_R + 1))``, so rank 1 is
    the parallel nearest the pole.
    """
    check_factorization(n_R, n_S, n_0)
    pole = as_unit(pole)
    d = pole.size
    basis = complement_basis(pole)
    equator = equator_grid(n_S, d)
    lat = np.asarray(q_star(1.0 - np.arange(1, n_R + 1) / (n_R + 1.0), d), dtype=float)
    radial = np.sqrt(np.clip(1.0 - lat * lat, 0.0, None))
    signs = basis.to_ambient(equator)
    body = lat[:, None, None] * pole[None, None, :] + radial[:, None, None] * signs[None, :, :]
    body = body.reshape(n_R * n_S, d)
    body /= np.linalg.norm(body, axis=1, keepdims=True)
    points = np.vstack([np.tile(pole, (n_0, 1)), body])
    return StructuredGrid(
        pole=pole, basis=basis, equator=equator, latitudes=lat,
        n_R=n_R, n_S=n_S, n_0=n_0, points=points,
    )


def auto_factorization(n: int, d: int = 3) -> tuple[int, int, int]:
    """Convenience grid shape with ``n_R ~ n_S ~ sqrt(n)``.

    Starts from ``n_S = round(sqrt(n))`` and moves ``n_S`` outwards until
    ``n_0 < min(n_R, n_S)``. For ``d = 2`` the equator has two points, so
    ``n_S = 2`` (``n_S = 1`` when ``n < 2``).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if d == 2:
        n_S = 2 if n >= 2 else 1
        n_R, n_0 = divmod(n, n_S)
        check_factorization(n_R, n_S, n_0, n)
        return n_R, n_S, n_0
    base = max(1, round(math.sqrt(n)))
    for delta in range(0, n):
        for n_S in (base + delta, base - delta) if delta else (base,):
            if n_S < 1 or n_S > n:
                continue
            n_R, n_0 = divmod(n, n_S)
            if n_R >= 1 and n_0 < min(n_R, n_S):
                return n_R, n_S, n_0
    raise ValueError(f"no admissible factorization for n = {n}")
