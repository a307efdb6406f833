"""Exact spherical primitives: distances, transport cost, tangent-normal
decomposition, complement bases and the rotation used for location shifts.

Points on S^(d-1) are plain numpy arrays, either a single vector of shape
``(d,)`` or a batch of row vectors of shape ``(n, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: inputs whose norm deviates from one by more than this are rejected
NORM_TOLERANCE = 1e-6

#: below this residual norm the tangent sign is the zero vector (0/0 = 0)
SIGN_EPS = 1e-12


class DimensionError(ValueError):
    """Raised when points of different dimensions are combined."""


def as_unit(x, tol: float = NORM_TOLERANCE) -> np.ndarray:
    """Validate and renormalize a point (or rows of points) on the sphere.

    Parameters
    ----------
    x : array_like, shape (d,) or (n, d)
        Direction cosines, d >= 2.
    tol : float
        Largest accepted deviation of the Euclidean norm from one.

    Returns
    -------
    ndarray
        A float copy with every row of unit norm.

    Raises
    ------
    ValueError
        If the dimension is below two, entries are not finite or a norm
        deviates from one by more than ``tol``.
    """
    arr = np.array(x, dtype=float)
    if arr.ndim not in (1, 2) or arr.shape[-1] < 2:
        raise ValueError(f"expected points of dimension >= 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points contain non-finite entries")
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    bad = np.abs(norms - 1.0) > tol
    if np.any(bad):
        rows = np.flatnonzero(bad.ravel())
        raise ValueError(
            f"{rows.size} point(s) are not unit vectors (first offending row {rows[0]}, "
            f"norm {norms.ravel()[rows[0]]:.8g})"
        )
    return arr / norms


def _check_dims(y: np.ndarray, z: np.ndarray) -> None:
    if y.shape[-1] != z.shape[-1]:
        raise DimensionError(f"dimension mismatch: {y.shape[-1]} vs {z.shape[-1]}")


def geodesic_distance(y, z) -> np.ndarray | float:
    """Great-circle distance ``arccos(y'z)`` in radians, broadcasting over rows."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_dims(y, z)
    cos = np.clip(np.sum(y * z, axis=-1), -1.0, 1.0)
    out = np.arccos(cos)
    return float(out) if out.ndim == 0 else out


def transport_cost(y, z) -> np.ndarray | float:
    """Squared geodesic distance halved, the cost used for all couplings."""
    dist = geodesic_distance(y, z)
    return 0.5 * np.square(dist) if isinstance(dist, np.ndarray) else 0.5 * dist * dist


def cost_matrix(sample: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Dense ``(n, m)`` matrix of transport costs between two point sets."""
    sample = np.asarray(sample, dtype=float)
    grid = np.asarray(grid, dtype=float)
    _check_dims(sample, grid)
    cos = np.clip(sample @ grid.T, -1.0, 1.0)
    return 0.5 * np.square(np.arccos(cos))


@dataclass(frozen=True)
class TangentDecomposition:
    """Latitude ``u'pole`` and unit tangent sign of a point about a pole."""

    latitude: np.ndarray | float
    sign: np.ndarray


def tangent_decompose(u, pole) -> TangentDecomposition:
    """Split ``u`` into its latitude about ``pole`` and its equatorial sign.

    The sign is ``(u - latitude * pole) / ||u - latitude * pole||`` and the zero
    vector when that residual vanishes (``u`` equal to the pole or its antipode).
    Works on a single point or on rows of points against one pole.
    """
    u = np.asarray(u, dtype=float)
    pole = np.asarray(pole, dtype=float)
    _check_dims(u, pole)
    latitude = u @ pole
    resid = u - np.multiply.outer(latitude, pole)
    norm = np.linalg.norm(resid, axis=-1, keepdims=True)
    safe = np.where(norm < SIGN_EPS, 1.0, norm)
    sign = np.where(norm < SIGN_EPS, 0.0, resid / safe)
    if np.ndim(latitude) == 0:
        latitude = float(latitude)
    return TangentDecomposition(latitude=latitude, sign=sign)


@dataclass(frozen=True)
class ComplementBasis:
    """Orthonormal basis ``columns`` (d x (d-1)) of the hyperplane orthogonal to ``pole``."""

    pole: np.ndarray
    columns: np.ndarray

    def to_ambient(self, s: np.ndarray) -> np.ndarray:
        """Map coordinates on S^(d-2) (rows) into the equatorial hyperplane."""
        return np.asarray(s, dtype=float) @ self.columns.T

    def to_equator(self, v: np.ndarray) -> np.ndarray:
        """Coordinates of ambient vectors (rows) in the basis."""
        return np.asarray(v, dtype=float) @ self.columns


def complement_basis(pole) -> ComplementBasis:
    """Householder-based complement of ``pole``.

    The reflector sending ``pole`` to ``e_d`` (or to ``-e_d`` when the last
    coordinate is negative) is applied to ``e_1, ..., e_(d-1)``. For
    ``pole = +-e_d`` the result is exactly ``(e_1, ..., e_(d-1))``.
    """
    pole = as_unit(pole)
    if pole.ndim != 1:
        raise ValueError("complement_basis expects a single pole")
    d = pole.size
    head = pole[:-1]
    s2 = float(head @ head)
    if s2 == 0.0:
        return ComplementBasis(pole=pole, columns=np.eye(d)[:, : d - 1])
    last = pole[-1]
    v = np.empty(d)
    v[:-1] = head
    # pole - e_d or pole + e_d, last entry written without cancellation
    v[-1] = -s2 / (1.0 + last) if last >= 0 else s2 / (1.0 - last)
    reflector = np.eye(d) - 2.0 * np.outer(v, v) / (v @ v)
    return ComplementBasis(pole=pole, columns=reflector[:, : d - 1])


def rotation_z(xi: float) -> np.ndarray:
    """Rotation by ``pi * xi / 15`` about the third axis of R^3."""
    angle = np.pi * xi / 15.0
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix with determinant one."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
