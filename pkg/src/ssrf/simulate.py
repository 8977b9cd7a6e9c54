"""Gaussian random-field simulation on scattered locations.

Fields are drawn exactly through Cholesky factorization of the covariance
matrix.  Reproducibility contract: randomness comes from the Philox
counter-based generator (NumPy's ``np.random.Philox``) with normal
variates from ``Generator.standard_normal`` (ziggurat); replicate ``m`` of
an experiment with master seed ``s`` uses the key ``s XOR m``, so any
replicate can be regenerated in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs
from scipy.spatial.distance import cdist, pdist, squareform

from .data import SampleData
from .errors import FactorizationError
from .spectral import DEFAULT_QUADRATURE, QuadratureConfig, SsrfParams
from . import spectral

__all__ = [
    "CovarianceModel",
    "SimulationPlan",
    "model_covariance",
    "tabulated_covariance",
    "sample_locations",
    "covariance_matrix",
    "cholesky",
    "gaussian_field",
    "replicate_rng",
    "simulate_replicate",
]

MODEL_FAMILIES = ("spherical", "exponential", "gaussian", "ssrf")


@dataclass(frozen=True)
class CovarianceModel:
    """Classical generator models plus the fitted spectral model.

    ``range_param`` is the spherical range, exponential scale, or Gaussian
    scale; for ``family="ssrf"`` the embedded parameter vector and the
    working dimension are used instead.
    """

    family: str
    sigma2: float = 1.0
    range_param: float = 1.0
    ssrf: SsrfParams = None
    d: int = 2
    quadrature: QuadratureConfig = DEFAULT_QUADRATURE

    def __post_init__(self):
        if self.family not in MODEL_FAMILIES:
            raise ValueError(
                f"unknown covariance family {self.family!r}; choose from {MODEL_FAMILIES}"
            )
        if self.family == "ssrf":
            if self.ssrf is None:
                raise ValueError("family 'ssrf' requires embedded parameters")
        else:
            if self.sigma2 <= 0:
                raise ValueError("sigma2 must be positive")
            if self.range_param <= 0:
                raise ValueError("range_param must be positive")
        if self.family == "spherical" and self.d > 3:
            raise ValueError("the spherical model is a valid covariance only in d <= 3")


def model_covariance(model: CovarianceModel, r):
    """Covariance at lag(s) r >= 0."""
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise ValueError("lag must be nonnegative")
    if model.family == "spherical":
        t = r / model.range_param
        out = np.where(t <= 1.0, model.sigma2 * (1.0 - 1.5 * t + 0.5 * t**3), 0.0)
    elif model.family == "exponential":
        out = model.sigma2 * np.exp(-r / model.range_param)
    elif model.family == "gaussian":
        out = model.sigma2 * np.exp(-(r**2) / model.range_param**2)
    else:
        out = np.array(
            [spectral.covariance(model.ssrf, float(a), model.d, model.quadrature) for a in r]
        )
    return float(out[0]) if scalar else out


def tabulated_covariance(model: CovarianceModel, max_lag: float, n: int = 512):
    """Cubic-spline interpolant of the model covariance on [0, max_lag].

    Spectral-model matrices need thousands of lag evaluations; a dense
    table keeps that affordable.  Interpolation error is far below the
    statistical tolerances it feeds (checked in tests).
    """
    from scipy.interpolate import CubicSpline

    lags = np.linspace(0.0, max_lag, n)
    vals = model_covariance(model, lags)
    spline = CubicSpline(lags, vals)

    def cov(r):
        r = np.asarray(r, dtype=float)
        out = spline(np.clip(r, 0.0, max_lag))
        out = np.where(r > max_lag, model_covariance(model, max_lag) * 0.0, out)
        return out if out.ndim else float(out)

    return cov


@dataclass(frozen=True)
class SimulationPlan:
    """A seeded batch of field simulations on a box domain."""

    n: int
    domain: tuple  # ((lo, hi), ...) per axis
    model: CovarianceModel
    mean: float = 0.0
    replicates: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need n >= 2 sampling locations")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        dom = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        if any(hi <= lo for lo, hi in dom):
            raise ValueError("domain box must have positive volume")
        object.__setattr__(self, "domain", dom)

    @property
    def d(self) -> int:
        return len(self.domain)


def replicate_rng(seed: int, m: int = 0) -> np.random.Generator:
    """Independent, re-runnable stream for replicate m: Philox keyed by seed XOR m."""
    return np.random.Generator(np.random.Philox(key=seed ^ m))


def sample_locations(plan: SimulationPlan, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. uniform locations in the plan's box."""
    lo = np.array([b[0] for b in plan.domain])
    hi = np.array([b[1] for b in plan.domain])
    return rng.uniform(lo, hi, size=(plan.n, plan.d))


def cholesky(matrix) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T equal to the input."""
    a = np.asarray(matrix, dtype=float)
    (potrf,) = get_lapack_funcs(("potrf",), (a,))
    l, info = potrf(a, lower=True, clean=True, overwrite_a=False)
    if info > 0:
        raise FactorizationError(
            f"matrix is not positive definite (pivot {info - 1})", pivot=info - 1
        )
    if info < 0:
        raise FactorizationError(f"invalid factorization input (argument {-info})")
    return l


def covariance_matrix(locations, model: CovarianceModel) -> np.ndarray:
    """Dense covariance matrix over distinct locations.

    If plain factorization fails, a one-off diagonal jitter of
    1e-10 * sigma2 is added (and kept in the returned matrix).
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    if model.family == "spherical" and locations.shape[1] > 3:
        raise ValueError("spherical model restricted to d <= 3")
    dists = squareform(pdist(locations))
    cov = model_covariance(model, dists.ravel()).reshape(dists.shape)
    try:
        cholesky(cov)
    except FactorizationError:
        sigma2 = cov[0, 0]
        cov = cov + 1e-10 * sigma2 * np.eye(len(cov))
        cholesky(cov)  # propagate if the jitter is not enough
    return cov


def gaussian_field(
    locations, model: CovarianceModel, mean: float, rng: np.random.Generator
) -> np.ndarray:
    """One exact Gaussian realization: mean + L z with z standard normal."""
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    factor = cholesky(covariance_matrix(locations, model))
    z = rng.standard_normal(len(locations))
    return mean + factor @ z


def simulate_replicate(plan: SimulationPlan, m: int) -> SampleData:
    """Replicate m of the plan as a SampleData (locations and values)."""
    rng = replicate_rng(plan.seed, m)
    locs = sample_locations(plan, rng)
    vals = gaussian_field(locs, plan.model, plan.mean, rng)
    return SampleData(locations=locs, values=vals)
