"""Parameter inference: distance metric, simplex search, fit pipeline.

The fit matches three dimensionless ratios to 1: the normalization
integral S0', the variance-to-gradient ratio, and the gradient-to-
curvature ratio.  All three are independent of eta0, which is recovered
afterwards from the sample variance.

The sample estimators normalize squared increments by 1/2 (semivariogram
convention), while the ensemble constraints follow the lattice-difference
convention, which is twice that; the ratio terms halve the ensemble side
so both enter on equal footing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintEstimates, estimate_all
from .data import SampleData
from .errors import DegenerateDataError, PermissibilityError, QuadratureError, SsrfError
from .kernels import KernelSpec
from .spectral import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    SsrfParams,
    band_profile,
    eta0_from_variance,
)

__all__ = [
    "FitConfig",
    "FitResult",
    "objective_phi",
    "z_values",
    "initial_guess",
    "nelder_mead",
    "fit_ssrf",
]

SQRT2 = math.sqrt(2.0)

# Impermissible or out-of-domain iterates get a large finite value so the
# simplex can retreat.
PENALTY = 1.0e6

# Dimensionless cutoff ceiling: beyond a few hundred the band integrals are
# insensitive to kc and the optimizer would wander along a flat valley of
# ever-costlier oscillatory integrals.
BAND_LIMIT = 1.0e3

_JITTER_ETA1 = (-1.0, 2.0, 1.0)
_JITTER_FACTORS = (
    (0.5, 1.5),
    (1.5, 0.5),
    (0.7, 1.3),
    (1.3, 0.7),
    (0.6, 0.6),
    (1.4, 1.4),
)


@dataclass(frozen=True)
class FitConfig:
    beta: float = 1.0
    max_iterations: int = 2000
    simplex_tolerance: float = 1e-10
    eta1_lower_bound: float = -2.0 + 1e-6
    restarts: int = 2
    freeze_kc: bool = False

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.max_iterations < 100:
            raise ValueError("max_iterations must be >= 100")


@dataclass
class FitResult:
    params: SsrfParams
    phi_value: float
    iterations: int
    converged: bool
    constraints_used: ConstraintEstimates
    z_values: tuple
    warnings: list = field(default_factory=list)
    solutions: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "eta0": self.params.eta0,
            "eta1": self.params.eta1,
            "xi": self.params.xi,
            "kc": self.params.kc,
            "phi": self.phi_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "z": list(self.z_values),
            "a1": self.constraints_used.a1,
            "h1": self.constraints_used.h1,
            "h2": self.constraints_used.h2,
            "warnings": list(self.warnings),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def z_values(
    theta_prime,
    constraints: ConstraintEstimates,
    d: int,
    q: QuadratureConfig = DEFAULT_QUADRATURE,
):
    """Constraint ratios (z1, z2, z3) at theta' = (eta1, xi, kc), eta0 = 1.

    z3 is None when the sample curvature is nonpositive.
    """
    eta1, xi, kc = theta_prime
    params = SsrfParams(eta0=1.0, eta1=eta1, xi=xi, kc=kc)
    a = constraints.a1
    c1, c2, c3 = 2 * d, 8 * d * d, 4 * d * (d - 1)
    s0p, g0, cov = band_profile(params, (a, SQRT2 * a, 2.0 * a), d, q)
    f = {lag: g0 - c for lag, c in cov.items()}
    phi1 = c1 * f[a]
    phi2 = c2 * f[a] - c3 * f[SQRT2 * a] - c1 * f[2.0 * a]
    z1 = s0p
    z2 = (constraints.s0_bar / g0) * (0.5 * phi1 / constraints.phi1_bar)
    if constraints.phi2_bar > 0:
        z3 = (constraints.phi1_bar / constraints.phi2_bar) * (phi2 / phi1)
    else:
        z3 = None
    return z1, z2, z3


def objective_phi(
    theta_prime,
    constraints: ConstraintEstimates,
    d: int,
    beta: float = 1.0,
    q: QuadratureConfig = DEFAULT_QUADRATURE,
    eta1_lower_bound: float = -2.0 + 1e-6,
) -> float:
    """Distance metric Phi = sum_i (1 - z_i^(1/beta))^2, penalized outside
    the permissible domain."""
    eta1, xi, kc = theta_prime
    if eta1 < eta1_lower_bound:
        return PENALTY * (1.0 + (eta1_lower_bound - eta1))
    if xi <= 0 or kc <= 0:
        return PENALTY
    band = kc * xi
    if band > BAND_LIMIT:
        return PENALTY * (1.0 + math.log(band / BAND_LIMIT))
    try:
        zs = z_values(theta_prime, constraints, d, q)
    except (PermissibilityError, QuadratureError, ValueError):
        return PENALTY * (1.0 + abs(eta1))
    total = 0.0
    for z in zs:
        if z is None:
            continue
        if not np.isfinite(z) or z <= 0:
            return PENALTY
        total += (1.0 - z ** (1.0 / beta)) ** 2
    return total


def initial_guess(constraints: ConstraintEstimates):
    """Starting point (eta1, xi, kc) for the simplex search.

    eta1 starts at 1; xi at sqrt(S1/S2); kc at 2 pi over the step.  A
    nonpositive curvature falls back to xi = a1.
    """
    if constraints.s2_bar > 0 and constraints.s1_bar > 0:
        xi0 = math.sqrt(constraints.s1_bar / constraints.s2_bar)
    else:
        xi0 = constraints.a1
    return 1.0, xi0, 2.0 * math.pi / constraints.a1


def nelder_mead(f, x0, config: FitConfig, initial_step: float = 0.25, trace=None):
    """Nelder-Mead simplex minimization.

    Coefficients (reflection, expansion, contraction, shrink) =
    (1, 2, 0.5, 0.5).  Stops when the simplex function-value spread falls
    below ``config.simplex_tolerance`` or after ``config.max_iterations``
    iterations.  Returns ``(x_min, f_min, iterations, converged)``.
    """
    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    f0 = f(x0)
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")

    simplex = [x0]
    for i in range(n):
        xi = x0.copy()
        xi[i] += initial_step * max(1.0, abs(x0[i]))
        simplex.append(xi)
    simplex = np.asarray(simplex)
    fvals = np.array([f0] + [f(x) for x in simplex[1:]])

    iterations = 0
    converged = False
    while iterations < config.max_iterations:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if trace is not None:
            trace.append(fvals[0])
        if fvals[-1] - fvals[0] < config.simplex_tolerance:
            converged = True
            break
        iterations += 1
        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - simplex[-1])
        fr = f(xr)
        if fvals[0] <= fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:  # outside contraction
            xc = centroid + rho * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:  # inside contraction
            xc = centroid - rho * (centroid - simplex[-1])
            fc = f(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        # shrink toward the best vertex
        for i in range(1, n + 1):
            simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
            fvals[i] = f(simplex[i])

    order = np.argsort(fvals, kind="stable")
    simplex, fvals = simplex[order], fvals[order]
    return simplex[0], float(fvals[0]), iterations, converged


def _start_points(guess, restarts: int):
    eta1_0, xi0, kc0 = guess
    starts = [(eta1_0, xi0, kc0)]
    for i in range(restarts):
        e1 = _JITTER_ETA1[i % len(_JITTER_ETA1)]
        fx, fk = _JITTER_FACTORS[i % len(_JITTER_FACTORS)]
        starts.append((e1, xi0 * fx, kc0 * fk))
    return starts


def fit_ssrf(
    data: SampleData,
    spec: KernelSpec,
    config: FitConfig = FitConfig(),
    q: QuadratureConfig = DEFAULT_QUADRATURE,
    neighbor_k: int = 1,
    min_pairs: int = 10,
    constraints: ConstraintEstimates = None,
) -> FitResult:
    """Full fit: constraint estimation, simplex search, eta0 recovery.

    Optimizes (eta1, log xi, log kc); with ``config.freeze_kc`` the cutoff
    stays at its initial value 2 pi / a1.  Non-convergence is reported in
    the result, not raised.
    """
    d = data.d
    est = constraints if constraints is not None else estimate_all(
        data, spec, neighbor_k=neighbor_k, min_pairs=min_pairs
    )
    warnings = []
    if est.s0_bar <= 0 or est.phi1_bar <= 0:
        raise DegenerateDataError(
            "constant or degenerate field: variance/gradient constraints vanish"
        )
    if est.s2_bar <= 0:
        warnings.append("curvature constraint nonpositive; z3 term dropped "
                        "and xi initialized from the step")

    guess = initial_guess(est)

    def objective_x(x):
        if config.freeze_kc:
            eta1, lxi = x
            kc = guess[2]
        else:
            eta1, lxi, lkc = x
            kc = math.exp(lkc)
        return objective_phi(
            (eta1, math.exp(lxi), kc), est, d,
            beta=config.beta, q=q, eta1_lower_bound=config.eta1_lower_bound,
        )

    solutions = []
    best = None
    for eta1_s, xi_s, kc_s in _start_points(guess, config.restarts):
        if config.freeze_kc:
            x0 = [eta1_s, math.log(xi_s)]
        else:
            x0 = [eta1_s, math.log(xi_s), math.log(kc_s)]
        x_min, f_min, iters, conv = nelder_mead(objective_x, x0, config)
        sol = {
            "eta1": float(x_min[0]),
            "xi": math.exp(x_min[1]),
            "kc": guess[2] if config.freeze_kc else math.exp(x_min[2]),
            "phi": f_min,
            "iterations": iters,
            "converged": conv,
        }
        solutions.append(sol)
        if best is None or f_min < best["phi"]:
            best = sol

    eta0_hat = eta0_from_variance(est.s0_bar, d)
    params = SsrfParams(
        eta0=eta0_hat, eta1=best["eta1"], xi=best["xi"], kc=best["kc"]
    )
    zs = z_values((best["eta1"], best["xi"], best["kc"]), est, d, q)
    if best["eta1"] < 0:
        warnings.append("fit converged to negative eta1")
    if not best["converged"]:
        warnings.append("simplex search hit the iteration limit")
    return FitResult(
        params=params,
        phi_value=best["phi"],
        iterations=best["iterations"],
        converged=best["converged"],
        constraints_used=est,
        z_values=tuple(z if z is not None else float("nan") for z in zs),
        warnings=warnings,
        solutions=solutions,
    )
