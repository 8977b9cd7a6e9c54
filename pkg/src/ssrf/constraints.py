"""Kernel-weighted sample constraints on scattered data.

Implements the sample variance, the generalized-gradient and
generalized-curvature constraint estimators, and their supporting pieces:
the distance-step estimate, normalized pairwise kernel averages, the
layout-dependent mu coefficients of the curvature combination, and the
lattice (regular-grid) constraint definitions used for reference checks.

Conventions
-----------
Pair sums run over all ordered pairs i != j; since kernel weights are
symmetric in (i, j), normalized averages are computed over unordered pairs
without loss.  The squared-increment average ``f_bar`` carries a factor
1/2 so that it estimates the semivariogram at the lag selected by the
bandwidth; the gradient estimate ``phi1_bar = d * f_bar(h1)`` therefore
targets ``d * F(a1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .data import SampleData
from .errors import DegenerateDataError, InsufficientPairsError
from .kernels import (
    KernelSpec,
    bandwidth_for_curvature,
    bandwidth_for_gradient,
    kernel_eval,
)

__all__ = [
    "ConstraintEstimates",
    "estimate_step",
    "kernel_pair_average",
    "f_bar",
    "sample_variance",
    "gradient_constraint",
    "mu_coefficients",
    "curvature_combination",
    "curvature_constraint",
    "lattice_constraints",
    "estimate_all",
]

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ConstraintEstimates:
    """Sample constraints with their steps, bandwidths, and mu coefficients."""

    s0_bar: float
    phi1_bar: float
    phi2_bar: float
    s1_bar: float
    s2_bar: float
    a1: float
    a2: float
    h1: float
    h2: float
    mu1: float
    mu2: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintEstimates":
        return cls(**{k: float(d[k]) for k in cls.__dataclass_fields__})


def estimate_step(data: SampleData, neighbor_k: int = 1) -> float:
    """Distance step: d-power average of near-neighbor distances.

    For every point the distances to its ``neighbor_k`` nearest neighbors
    enter the average; ``a = (mean(dist^d))^(1/d)``.  ``neighbor_k`` is
    capped at n-1.
    """
    if neighbor_k < 1:
        raise ValueError("neighbor_k must be >= 1")
    k = min(neighbor_k, data.n - 1)
    tree = cKDTree(data.locations)
    dist, _ = tree.query(data.locations, k=k + 1)
    nn = dist[:, 1:]
    if np.any(nn == 0):
        raise DegenerateDataError("duplicate sampling locations (zero distance)")
    return float(np.mean(nn**data.d) ** (1.0 / data.d))


def _condensed_payload(payload, locations, dists):
    """Normalize the payload argument to a condensed pair-value array."""
    n = locations.shape[0]
    m = n * (n - 1) // 2
    if callable(payload):
        iu, ju = np.triu_indices(n, k=1)
        return np.asarray(payload(locations[iu], locations[ju]), dtype=float)
    arr = np.asarray(payload, dtype=float)
    if arr.shape == (n, n):
        iu, ju = np.triu_indices(n, k=1)
        return arr[iu, ju]
    if arr.shape == (m,):
        return arr
    raise ValueError(
        f"payload must be callable, ({n},{n}) square, or condensed ({m},)"
    )


def _condensed_average(dists, h, spec, values, min_pairs):
    """Normalized kernel average over condensed pair arrays."""
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    w = kernel_eval(spec, dists / h)
    count = int(np.count_nonzero(w))
    if count < min_pairs:
        raise InsufficientPairsError(h, count, min_pairs)
    return float(np.dot(w, values) / np.sum(w))


def kernel_pair_average(
    locations,
    h: float,
    spec: KernelSpec,
    payload,
    min_pairs: int = 1,
    method: str = "direct",
) -> float:
    """Normalized kernel average of a two-point function over all pairs.

    ``payload`` may be a vectorized callable ``(s_i, s_j) -> values`` on
    pair coordinate arrays, a full (n, n) matrix, or a condensed
    upper-triangle array.  ``method="grid"`` gathers only pairs within the
    kernel support through uniform spatial binning; it must (and does)
    reproduce the direct sum to within floating-point roundoff.
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    if method == "grid":
        return _grid_pair_average(locations, h, spec, payload, min_pairs)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    dists = pdist(locations)
    values = _condensed_payload(payload, locations, dists)
    return _condensed_average(dists, h, spec, values, min_pairs)


def _grid_pair_average(locations, h, spec, payload, min_pairs):
    """Uniform-grid binned evaluation; only in-support pairs are visited."""
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    n, d = locations.shape
    cutoff = spec.support_radius * h
    cell = cutoff
    lo = locations.min(axis=0)
    keys = np.floor((locations - lo) / cell).astype(np.int64)
    buckets: dict = {}
    for idx, key in enumerate(map(tuple, keys)):
        buckets.setdefault(key, []).append(idx)
    offsets = np.array(
        np.meshgrid(*([[-1, 0, 1]] * d), indexing="ij")
    ).reshape(d, -1).T
    ii, jj = [], []
    for key, members in buckets.items():
        for off in offsets:
            other = tuple(np.asarray(key) + off)
            if other < key:
                continue
            cand = buckets.get(other)
            if cand is None:
                continue
            if other == key:
                a = np.asarray(members)
                iu, ju = np.triu_indices(len(a), k=1)
                ii.append(a[iu])
                jj.append(a[ju])
            else:
                a = np.asarray(members)
                b = np.asarray(cand)
                gi, gj = np.meshgrid(a, b, indexing="ij")
                ii.append(gi.ravel())
                jj.append(gj.ravel())
    ii = np.concatenate(ii) if ii else np.empty(0, dtype=int)
    jj = np.concatenate(jj) if jj else np.empty(0, dtype=int)
    # canonical (i < j) ordering keeps the summation order deterministic
    swap = ii > jj
    ii2 = np.where(swap, jj, ii)
    jj2 = np.where(swap, ii, jj)
    order = np.lexsort((jj2, ii2))
    ii2, jj2 = ii2[order], jj2[order]
    diff = locations[ii2] - locations[jj2]
    dists = np.sqrt(np.sum(diff * diff, axis=1))
    keep = dists <= cutoff
    ii2, jj2, dists = ii2[keep], jj2[keep], dists[keep]
    if callable(payload):
        values = np.asarray(payload(locations[ii2], locations[jj2]), dtype=float)
    else:
        arr = np.asarray(payload, dtype=float)
        if arr.shape == (n, n):
            values = arr[ii2, jj2]
        else:
            full_i, full_j = np.triu_indices(n, k=1)
            lookup = {}
            pos = full_i * n + full_j
            lookup = dict(zip(pos.tolist(), range(len(pos))))
            values = arr[[lookup[i * n + j] for i, j in zip(ii2, jj2)]]
    return _condensed_average(dists, h, spec, values, min_pairs)


def f_bar(data: SampleData, h: float, spec: KernelSpec, min_pairs: int = 1) -> float:
    """Half the kernel average of squared value increments at bandwidth h.

    Estimates the semivariogram at the lag scale the bandwidth selects.
    """
    dists = pdist(data.locations)
    sq_inc = pdist(data.values.reshape(-1, 1), metric="sqeuclidean")
    return 0.5 * _condensed_average(dists, h, spec, sq_inc, min_pairs)


def sample_variance(data: SampleData) -> float:
    """Mean squared deviation from the sample mean (divisor n)."""
    return float(np.mean((data.values - data.values.mean()) ** 2))


def gradient_constraint(
    data: SampleData, spec: KernelSpec, a1: float, min_pairs: int = 1
):
    """Gradient constraint estimate at step a1.

    Returns ``(phi1_bar, s1_bar, h1)`` with ``phi1_bar = d * f_bar(h1)``
    and ``s1_bar = phi1_bar / a1^2``.
    """
    if a1 <= 0:
        raise ValueError("step must be positive")
    h1 = bandwidth_for_gradient(a1, spec, data.d)
    phi1 = data.d * f_bar(data, h1, spec, min_pairs)
    return phi1, phi1 / a1**2, h1


def _distance_moment_averages(dists, spec, h2, min_pairs):
    s2 = {}
    s4 = {}
    d2 = dists * dists
    d4 = d2 * d2
    for r in (1.0, SQRT2, 2.0):
        s2[r] = _condensed_average(dists, r * h2, spec, d2, min_pairs)
        s4[r] = _condensed_average(dists, r * h2, spec, d4, min_pairs)
    return s2, s4


def mu_coefficients(
    locations, spec: KernelSpec, h2: float, min_pairs: int = 1, d: int = None
):
    """Layout coefficients (mu1, mu2) of the curvature combination.

    Built from kernel averages of squared and fourth-power pair distances
    at bandwidths h2, sqrt(2) h2, and 2 h2.  Both tend to 1 under network
    densification.  d = 1 has no cross-direction term, so mu2's defining
    ratio degenerates.
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    if d is None:
        d = locations.shape[1]
    c1, c2, c3 = 2 * d, 8 * d * d, 4 * d * (d - 1)
    if c3 == 0:
        raise DegenerateDataError(
            "mu2 is undefined in d = 1 (no mixed second-difference pairs)"
        )
    dists = pdist(locations)
    s2, s4 = _distance_moment_averages(dists, spec, h2, min_pairs)
    den = c3 * s4[SQRT2] - c3 * s4[1.0] * s2[SQRT2] / s2[1.0]
    if den == 0:
        raise DegenerateDataError("degenerate layout: mu2 denominator vanishes")
    mu2 = (
        (c2 + 8 * c1) * s4[1.0]
        + c1 * s4[1.0] * s2[2.0] / s2[1.0]
        - c1 * s4[2.0]
    ) / den
    mu1 = (c3 * mu2 * s2[SQRT2] + c1 * s2[2.0]) / (c2 * s2[1.0])
    return mu1, mu2


def curvature_combination(f_h, f_sqrt2h, f_2h, mu1, mu2, d):
    """Three-bandwidth combination giving the curvature estimate phi2_bar."""
    c1, c2, c3 = 2 * d, 8 * d * d, 4 * d * (d - 1)
    return 0.5 * (c2 * mu1 * f_h - c3 * mu2 * f_sqrt2h - c1 * f_2h)


def curvature_constraint(
    data: SampleData, spec: KernelSpec, a2: float, min_pairs: int = 1
):
    """Curvature constraint estimate at step a2.

    Returns ``(phi2_bar, s2_bar, h2, mu1, mu2)``.  In d = 1 the
    cross-direction term is absent (its coefficient is zero); mu2 is
    reported as 1 and mu1 reduces to its single-direction form.
    """
    if a2 <= 0:
        raise ValueError("step must be positive")
    d = data.d
    h2 = bandwidth_for_curvature(a2, spec, d)
    if d == 1:
        c1, c2 = 2 * d, 8 * d * d
        dists = pdist(data.locations)
        sq = dists * dists
        s2_h = _condensed_average(dists, h2, spec, sq, min_pairs)
        s2_2h = _condensed_average(dists, 2 * h2, spec, sq, min_pairs)
        mu1, mu2 = c1 * s2_2h / (c2 * s2_h), 1.0
        f_s = 0.0
    else:
        mu1, mu2 = mu_coefficients(data.locations, spec, h2, min_pairs, d=d)
        f_s = f_bar(data, SQRT2 * h2, spec, min_pairs)
    f_h = f_bar(data, h2, spec, min_pairs)
    f_2h = f_bar(data, 2 * h2, spec, min_pairs)
    phi2 = curvature_combination(f_h, f_s, f_2h, mu1, mu2, d)
    return phi2, phi2 / a2**4, h2, mu1, mu2


def lattice_constraints(values, spacing: float):
    """Local energy averages (S0, S1, S2) on a full hypercubic lattice.

    ``values`` is a d-dimensional array of field values with grid spacing
    ``spacing``.  S0 is the variance about the grid mean; S1 averages the
    squared forward differences over sites where every forward neighbor
    exists; S2 averages the squared sum of centered second differences
    over interior sites.
    """
    x = np.asarray(values, dtype=float)
    a = float(spacing)
    if a <= 0:
        raise ValueError("spacing must be positive")
    d = x.ndim
    if any(s < 3 for s in x.shape):
        raise ValueError("lattice too small for the second-difference stencil")

    s0 = float(np.mean((x - x.mean()) ** 2))

    interior_fwd = tuple(slice(0, s - 1) for s in x.shape)
    s1_field = np.zeros(x[interior_fwd].shape)
    for axis in range(d):
        fwd = np.diff(x, axis=axis)
        s1_field += fwd[tuple(
            slice(0, s - 1) if ax != axis else slice(None)
            for ax, s in enumerate(x.shape)
        )] ** 2
    s1 = float(np.mean(s1_field)) / a**2

    interior = tuple(slice(1, s - 1) for s in x.shape)
    lap = np.zeros(x[interior].shape)
    for axis in range(d):
        plus = tuple(
            slice(2, s) if ax == axis else slice(1, s - 1)
            for ax, s in enumerate(x.shape)
        )
        minus = tuple(
            slice(0, s - 2) if ax == axis else slice(1, s - 1)
            for ax, s in enumerate(x.shape)
        )
        lap += (x[plus] + x[minus] - 2 * x[interior]) / a**2
    s2 = float(np.mean(lap**2))

    return s0, s1, s2


def estimate_all(
    data: SampleData,
    spec: KernelSpec,
    neighbor_k: int = 1,
    min_pairs: int = 10,
) -> ConstraintEstimates:
    """Full constraint-estimation pipeline with a shared step a1 = a2."""
    a = estimate_step(data, neighbor_k=neighbor_k)
    s0 = sample_variance(data)
    phi1, s1, h1 = gradient_constraint(data, spec, a, min_pairs=min_pairs)
    phi2, s2, h2, mu1, mu2 = curvature_constraint(
        data, spec, a, min_pairs=min_pairs
    )
    return ConstraintEstimates(
        s0_bar=s0,
        phi1_bar=phi1,
        phi2_bar=phi2,
        s1_bar=s1,
        s2_bar=s2,
        a1=a,
        a2=a,
        h1=h1,
        h2=h2,
        mu1=mu1,
        mu2=mu2,
    )
