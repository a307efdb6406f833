"""Optimal-transport ranks, signs, quantiles and tests for data on the unit hypersphere."""

from spherank.assignment import Assignment, brute_force, solve
from spherank.geometry import (
    ComplementBasis,
    TangentDecomposition,
    as_unit,
    complement_basis,
    geodesic_distance,
    rotation_z,
    tangent_decompose,
    transport_cost,
)
from spherank.gof import GofReport, cvm_statistic, mc_critical_value, rayleigh_test, test_uniformity
from spherank.grids import PlainGrid, StructuredGrid, auto_factorization, equator_grid, plain_grid, structured_grid
from spherank.manova import (
    ManovaReport,
    PooledSample,
    ScoreFunction,
    chi2_quantile,
    chi2_sf,
    d_matrix,
    pseudo_inverse,
    pvmf_test,
    q_statistic,
    score_values,
)
from spherank.models import (
    LatitudeCdf,
    SineSkewParams,
    TangentVmfParams,
    VmfParams,
    f_star,
    frechet_mean,
    g_kappa_cdf,
    g_kappa_inv,
    q_star,
    rotsym_transport,
    sample_mixture,
    sample_sine_skew,
    sample_tangent_vmf,
    sample_uniform,
    sample_vmf,
    vmf_kappa_mle,
)
from spherank.transport import (
    EmpiricalTransport,
    contour,
    estimate_pole,
    fit,
    fit_plain,
    meridian,
    region,
    transport_median,
)

__version__ = "0.1.0"
