"""Distribution families on S^(d-1), their latitude distribution functions,
samplers, the Frechet mean and the closed-form transport of rotationally
symmetric laws.

Latitude CDFs are evaluated through the angle substitution ``s = cos(phi)``,
under which the density of ``Z'theta`` becomes ``exp(kappa cos phi) sin^(d-2) phi``
on ``[0, pi]``. The integrand is smooth for every ``d >= 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from spherank.geometry import as_unit, complement_basis, geodesic_distance, tangent_decompose

QUAD_EPS = 1e-13
BISECT_TOL = 1e-12


def _scalar_or_array(values: np.ndarray, like) -> np.ndarray | float:
    return float(values) if np.ndim(like) == 0 else values


def _check_latitude(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any((u < -1.0 - 1e-12) | (u > 1.0 + 1e-12)) or np.any(np.isnan(u)):
        raise ValueError("latitude must lie in [-1, 1]")
    return np.clip(u, -1.0, 1.0)


def _check_prob(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)) or np.any(np.isnan(p)):
        raise ValueError("probability must lie in [0, 1]")
    return p


def _angular_mass(lo: float, hi: float, kappa: float, d: int) -> float:
    # integral of exp(kappa (cos phi - 1)) sin^(d-2) phi over [lo, hi]
    if hi <= lo:
        return 0.0
    if kappa == 0.0:
        fn = lambda phi: np.sin(phi) ** (d - 2)
    else:
        fn = lambda phi: np.exp(kappa * (np.cos(phi) - 1.0)) * np.sin(phi) ** (d - 2)
    val, _ = integrate.quad(fn, lo, hi, epsabs=QUAD_EPS, epsrel=QUAD_EPS, limit=200)
    return val


def _angular_cdf(t: float, kappa: float, d: int, total: float) -> float:
    # P(Z'theta <= t) = mass of phi in [arccos t, pi]; integrate the shorter side
    a = math.acos(t)
    if a >= 0.5 * math.pi:
        return _angular_mass(a, math.pi, kappa, d) / total
    return 1.0 - _angular_mass(0.0, a, kappa, d) / total


def _bisect(fn: Callable[[float], float], target: float, lo: float = -1.0, hi: float = 1.0) -> float:
    flo = fn(lo) - target
    if flo >= 0:
        return lo
    if fn(hi) - target <= 0:
        return hi
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if fn(mid) - target < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# uniform latitude law


def f_star(u, d: int):
    """Distribution function of the latitude ``U'theta`` when ``U`` is uniform.

    Closed forms for ``d = 2`` and ``d = 3``; adaptive quadrature otherwise.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    uu = _check_latitude(u)
    if d == 2:
        out = 1.0 - np.arccos(uu) / np.pi
    elif d == 3:
        out = 0.5 * (uu + 1.0)
    else:
        total = _angular_mass(0.0, math.pi, 0.0, d)
        flat = [_angular_cdf(float(x), 0.0, d, total) for x in np.ravel(uu)]
        out = np.clip(np.reshape(flat, uu.shape), 0.0, 1.0)
    return _scalar_or_array(out, u)


def q_star(p, d: int):
    """Quantile function of the uniform latitude law (inverse of :func:`f_star`)."""
    if d < 2:
        raise ValueError("d must be >= 2")
    pp = _check_prob(p)
    if d == 2:
        out = np.cos(np.pi * (1.0 - pp))
    elif d == 3:
        out = 2.0 * pp - 1.0
    else:
        flat = [_bisect(lambda t: f_star(t, d), float(x)) for x in np.ravel(pp)]
        out = np.reshape(flat, pp.shape)
    return _scalar_or_array(out, p)


# --------------------------------------------------------------------------
# von Mises-Fisher latitude law


def g_kappa_cdf(t, kappa: float, d: int):
    """Distribution function of ``Z'theta`` for ``Z ~ vMF(theta, kappa)`` on S^(d-1)."""
    if kappa < 0 or not np.isfinite(kappa):
        raise ValueError("kappa must be finite and >= 0")
    if kappa == 0.0:
        return f_star(t, d)
    tt = _check_latitude(t)
    if d == 3:
        e2 = math.exp(-2.0 * kappa)
        out = (np.exp(kappa * (tt - 1.0)) - e2) / (1.0 - e2)
        out = np.clip(out, 0.0, 1.0)
    else:
        total = _angular_mass(0.0, math.pi, kappa, d)
        flat = [_angular_cdf(float(x), kappa, d, total) for x in np.ravel(tt)]
        out = np.clip(np.reshape(flat, tt.shape), 0.0, 1.0)
    return _scalar_or_array(out, t)


def g_kappa_inv(p, kappa: float, d: int):
    """Quantile function of the vMF latitude law (inverse of :func:`g_kappa_cdf`)."""
    if kappa < 0 or not np.isfinite(kappa):
        raise ValueError("kappa must be finite and >= 0")
    if kappa == 0.0:
        return q_star(p, d)
    pp = _check_prob(p)
    if d == 3:
        e2 = math.exp(-2.0 * kappa)
        out = 1.0 + np.log(pp * (1.0 - e2) + e2) / kappa
        out = np.clip(out, -1.0, 1.0)
    else:
        flat = [_bisect(lambda t: g_kappa_cdf(t, kappa, d), float(x)) for x in np.ravel(pp)]
        out = np.reshape(flat, pp.shape)
    return _scalar_or_array(out, p)


def vmf_mean_resultant(kappa, d: int):
    """``A_d(kappa) = E[Z'theta] = I_{d/2}(kappa) / I_{d/2-1}(kappa)``."""
    kappa = np.asarray(kappa, dtype=float)
    small = kappa < 1e-8
    k = np.where(small, 1.0, kappa)
    out = np.where(small, kappa / d, special.ive(d / 2.0, k) / special.ive(d / 2.0 - 1.0, k))
    return _scalar_or_array(out, kappa)


def vmf_kappa_mle(sample, max_iter: int = 100) -> float:
    """Maximum-likelihood concentration of a vMF fit.

    Solves ``A_d(kappa) = R`` where ``R`` is the mean resultant length, by
    Newton steps from the Banerjee et al. approximation.
    """
    x = as_unit(sample)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two observations")
    n, d = x.shape
    rbar = float(np.linalg.norm(x.mean(axis=0)))
    if rbar >= 1.0 - 1e-12:
        raise ValueError("degenerate concentration: all observations coincide")
    if rbar <= 1e-8:
        return 0.0
    kappa = rbar * (d - rbar**2) / (1.0 - rbar**2)
    for _ in range(max_iter):
        a = vmf_mean_resultant(kappa, d)
        deriv = 1.0 - a * a - (d - 1.0) / kappa * a
        step = (a - rbar) / deriv
        new = kappa - step
        if new <= 0:
            new = 0.5 * kappa
        if abs(new - kappa) <= 1e-12 * max(1.0, kappa):
            kappa = new
            break
        kappa = new
    return float(kappa)


@dataclass(frozen=True)
class LatitudeCdf:
    """Distribution function of the latitude ``Z'theta`` of a rotationally symmetric law.

    ``kind`` is ``"uniform"``, ``"vmf"`` (uses ``kappa``) or ``"custom"``
    (uses ``func``; its inverse is found by bisection).
    """

    d: int
    kind: str = "uniform"
    kappa: float = 0.0
    func: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("uniform", "vmf", "custom"):
            raise ValueError(f"unknown latitude law {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom latitude law needs func")

    def cdf(self, t):
        if self.kind == "uniform":
            return f_star(t, self.d)
        if self.kind == "vmf":
            return g_kappa_cdf(t, self.kappa, self.d)
        tt = _check_latitude(t)
        out = np.reshape([self.func(float(x)) for x in np.ravel(tt)], tt.shape)
        return _scalar_or_array(out, t)

    def inv(self, p):
        if self.kind == "uniform":
            return q_star(p, self.d)
        if self.kind == "vmf":
            return g_kappa_inv(p, self.kappa, self.d)
        pp = _check_prob(p)
        out = np.reshape([_bisect(self.func, float(x)) for x in np.ravel(pp)], pp.shape)
        return _scalar_or_array(out, p)


def rotsym_transport(z, theta, latitude_cdf: LatitudeCdf):
    """Population transport of a rotationally symmetric law to the uniform.

    The latitude is pushed through ``Q_* o F_f`` and the tangent sign about
    ``theta`` is left untouched.
    """
    z = as_unit(z)
    theta = as_unit(theta)
    parts = tangent_decompose(z, theta)
    lat = q_star(latitude_cdf.cdf(parts.latitude), theta.size)
    lat = np.asarray(lat, dtype=float)
    radial = np.sqrt(np.clip(1.0 - lat * lat, 0.0, None))
    out = np.multiply.outer(lat, theta) + radial[..., None] * parts.sign
    return out


# --------------------------------------------------------------------------
# samplers


@dataclass(frozen=True)
class VmfParams:
    theta: np.ndarray
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "theta", as_unit(self.theta))
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError("kappa must be finite and >= 0")


@dataclass(frozen=True)
class TangentVmfParams:
    """Tangent vMF law: ``Z = V theta + sqrt(1 - V^2) Gamma_theta U`` with
    ``V = 2 Beta(beta_a, beta_b) - 1`` and ``U ~ vMF(mu, kappa)`` on S^(d-2)."""

    theta: np.ndarray
    mu: np.ndarray
    kappa: float
    beta_a: float = 1.0
    beta_b: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta", as_unit(self.theta))
        if self.theta.size < 3:
            raise ValueError("tangent vMF needs d >= 3")
        object.__setattr__(self, "mu", as_unit(self.mu))
        if self.mu.size != self.theta.size - 1:
            raise ValueError("mu must live in dimension d - 1")
        if self.kappa < 0 or self.beta_a <= 0 or self.beta_b <= 0:
            raise ValueError("invalid tangent vMF parameters")


@dataclass(frozen=True)
class SineSkewParams:
    mu: float = 0.0
    lam: float = 0.0
    base_kappa: float = 0.0

    def __post_init__(self):
        if not -1.0 < self.lam < 1.0:
            raise ValueError("skewness must lie in (-1, 1)")
        if self.base_kappa < 0:
            raise ValueError("base_kappa must be >= 0")


def sample_uniform(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. uniform points on S^(d-1) (normalized Gaussians)."""
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _wood_latitude(n: int, kappa: float, d: int, rng: np.random.Generator) -> np.ndarray:
    # Wood (1994) envelope rejection for W = Z'theta
    m = d - 1.0
    b = m / (2.0 * kappa + math.sqrt(4.0 * kappa * kappa + m * m))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * math.log(1.0 - x0 * x0)
    out = np.empty(n)
    filled = 0
    while filled < n:
        k = max(16, int(1.2 * (n - filled)))
        z = rng.beta(m / 2.0, m / 2.0, size=k)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random(k)
        ok = kappa * w + m * np.log(1.0 - x0 * w) - c >= np.log(u)
        take = w[ok][: n - filled]
        out[filled : filled + take.size] = take
        filled += take.size
    return out


def _uniform_signs(n: int, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    basis = complement_basis(theta)
    s = sample_uniform(n, theta.size - 1, rng)
    return basis.to_ambient(s)


def _compose(latitude: np.ndarray, theta: np.ndarray, signs: np.ndarray) -> np.ndarray:
    radial = np.sqrt(np.clip(1.0 - latitude * latitude, 0.0, None))
    z = np.multiply.outer(latitude, theta) + radial[:, None] * signs
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sample_vmf(n: int, params: VmfParams, rng: np.random.Generator) -> np.ndarray:
    """von Mises-Fisher draws: Wood latitude, uniform tangent sign."""
    theta = params.theta
    w = _wood_latitude(n, float(params.kappa), theta.size, rng)
    return _compose(w, theta, _uniform_signs(n, theta, rng))


def sample_tangent_vmf(n: int, params: TangentVmfParams, rng: np.random.Generator) -> np.ndarray:
    theta = params.theta
    v = 2.0 * rng.beta(params.beta_a, params.beta_b, size=n) - 1.0
    u = sample_vmf(n, VmfParams(params.mu, params.kappa), rng)
    signs = complement_basis(theta).to_ambient(u)
    return _compose(v, theta, signs)


def sample_sine_skew(n: int, params: SineSkewParams, rng: np.random.Generator) -> np.ndarray:
    """Sine-skewed von Mises draws on the circle, returned as ``(cos, sin)`` rows.

    A symmetric base angle is kept with probability ``(1 + lam sin phi) / 2``
    and reflected otherwise, which yields the density
    ``f(phi - mu) (1 + lam sin(phi - mu))``.
    """
    base = rng.vonmises(0.0, params.base_kappa, size=n) if params.base_kappa > 0 else rng.uniform(-np.pi, np.pi, n)
    keep = rng.random(n) < 0.5 * (1.0 + params.lam * np.sin(base))
    phi = np.where(keep, base, -base) + params.mu
    return np.column_stack([np.cos(phi), np.sin(phi)])


def sample_mixture(
    n: int,
    components: Sequence[tuple[float, Callable[[int, np.random.Generator], np.ndarray]]],
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw from a finite mixture; ``components`` are ``(weight, sampler)`` pairs.

    Each observation picks its component from one uniform draw, in order.
    """
    weights = np.array([w for w, _ in components], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("mixture weights must be >= 0 and sum to 1")
    cuts = np.cumsum(weights)
    labels = np.minimum(np.searchsorted(cuts, rng.random(n), side="left"), len(components) - 1)
    out = None
    for k, (_, sampler) in enumerate(components):
        idx = np.flatnonzero(labels == k)
        if idx.size == 0:
            continue
        draws = sampler(idx.size, rng)
        if out is None:
            out = np.empty((n, draws.shape[1]))
        out[idx] = draws
    return out


# --------------------------------------------------------------------------
# Frechet mean


def _log_map_mean(base: np.ndarray, x: np.ndarray) -> np.ndarray:
    cos = np.clip(x @ base, -1.0, 1.0)
    ang = np.arccos(cos)
    resid = x - cos[:, None] * base
    norm = np.sqrt(np.einsum("ij,ij->i", resid, resid))
    # points at the base (angle 0) or its antipode (undefined direction) contribute nothing
    ok = norm > 1e-14
    scale = np.zeros_like(ang)
    scale[ok] = ang[ok] / norm[ok]
    return (scale[:, None] * resid).mean(axis=0)


def _exp_map(base: np.ndarray, v: np.ndarray) -> np.ndarray:
    t = float(np.linalg.norm(v))
    if t < 1e-300:
        return base
    out = math.cos(t) * base + math.sin(t) * (v / t)
    return out / np.linalg.norm(out)


def frechet_objective(sample: np.ndarray, z: np.ndarray) -> float:
    """Mean of the transport costs from ``z`` to the sample."""
    dist = geodesic_distance(sample, z)
    return float(0.5 * np.mean(np.square(dist)))


def frechet_mean(
    sample,
    seed: int = 0,
    n_random_starts: int = 4,
    max_iter: int = 200,
    tol: float = 1e-10,
) -> np.ndarray:
    """Minimizer of the mean squared geodesic distance to the sample.

    Riemannian gradient descent with unit step, started at the normalized
    Euclidean mean and at ``n_random_starts`` seeded uniform points. The start
    reaching the lowest objective wins; exact ties are broken at random.
    """
    x = as_unit(sample)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] == 0:
        raise ValueError("empty sample")
    rng = np.random.default_rng(seed)
    d = x.shape[1]
    starts = []
    m = x.mean(axis=0)
    norm = np.linalg.norm(m)
    starts.append(m / norm if norm > 1e-12 else x[0])
    starts.extend(sample_uniform(n_random_starts, d, rng))

    results = []
    for z in starts:
        for _ in range(max_iter):
            step = _log_map_mean(z, x)
            z = _exp_map(z, step)
            # the exponential map moves z by exactly |step| along a geodesic
            if math.sqrt(step @ step) < tol:
                break
        results.append((frechet_objective(x, z), z))
    values = np.array([r[0] for r in results])
    best = values.min()
    ties = np.flatnonzero(values <= best + 1e-12 * max(1.0, abs(best)))
    pick = ties[0] if ties.size == 1 else ties[rng.integers(ties.size)]
    return results[pick][1]
