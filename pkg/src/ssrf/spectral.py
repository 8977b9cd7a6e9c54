"""Model-side spectral machinery: covariance, semivariogram, constraints.

The covariance model has spectral density proportional to
``1 / (1 + eta1 (k xi)^2 + (k xi)^4)`` inside a sharp wavevector cutoff
``k <= kc`` (boxcar coarse graining) and zero outside.  All ensemble
quantities reduce to radial integrals over the band.  With ``u = k xi``
(so ``v = u^2``) and ``U = kc xi``:

* normalization integral   S0' = int_0^U 2 u^(d-1) / Pi(u^2) du
* variance                 E[S0] = eta0 S0' / (2^d pi^(d/2) Gamma(d/2))
* covariance at lag a > 0  G(a) = pref(a) int_0^U 2 u^(d/2) J_nu(a u / xi)
                           / Pi(u^2) du,  nu = d/2 - 1,
                           pref(a) = eta0 xi^(d/2-1) /
                           (2 (2 pi)^(d/2) a^(d/2-1)).

Integrands with many Bessel oscillations are integrated panel-by-panel
between consecutive Bessel zeros with fixed Gauss-Legendre rules and a
panel-halving error estimate; smooth integrands go through adaptive
Gauss-Kronrod quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import j0, j1, jn_zeros

from .errors import PermissibilityError, QuadratureError

__all__ = [
    "SsrfParams",
    "QuadratureConfig",
    "pi_poly",
    "bessel_j",
    "gamma_half",
    "normalization_integral",
    "variance_constraint",
    "covariance",
    "semivariogram",
    "band_profile",
    "gradient_stoch",
    "curvature_stoch",
    "gradient_stoch_spectral",
    "curvature_stoch_spectral",
    "eta0_from_variance",
]

# Beyond this many Bessel oscillations across the band, plain adaptive
# quadrature becomes unreliable and the panel scheme takes over.
OSCILLATION_THRESHOLD = 20.0
_MAX_PANELS = 400_000

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class SsrfParams:
    """Model parameter vector (eta0, eta1, xi, kc)."""

    eta0: float
    eta1: float
    xi: float
    kc: float

    def __post_init__(self):
        if self.eta0 <= 0:
            raise ValueError("eta0 must be positive")
        if self.xi <= 0:
            raise ValueError("xi must be positive")
        if self.kc <= 0:
            raise ValueError("kc must be positive")

    @property
    def band(self) -> float:
        """Dimensionless cutoff kc * xi."""
        return self.kc * self.xi

    def check_permissible(self, grid: int = 1024, floor: float = 1e-12) -> None:
        """Raise PermissibilityError unless Pi(v) > floor across the band."""
        if self.eta1 >= 0:
            return
        v = np.linspace(0.0, self.band**2, grid)
        if np.min(pi_poly(self.eta1, v)) <= floor:
            raise PermissibilityError(
                f"Pi(v) is not positive on [0, {self.band**2:g}] "
                f"for eta1 = {self.eta1:g}"
            )


@dataclass(frozen=True)
class QuadratureConfig:
    """Controls for the band integrals."""

    relative_tolerance: float = 1e-8
    max_subdivisions: int = 200
    oscillatory_split: bool = True

    def __post_init__(self):
        if not (0 < self.relative_tolerance <= 1e-3):
            raise ValueError("relative_tolerance must be in (0, 1e-3]")
        if self.max_subdivisions < 16:
            raise ValueError("max_subdivisions must be >= 16")


DEFAULT_QUADRATURE = QuadratureConfig()


def pi_poly(eta1: float, v):
    """Characteristic polynomial Pi(v) = 1 + eta1 v + v^2 of the spectral density."""
    v = np.asarray(v, dtype=float)
    out = 1.0 + eta1 * v + v * v
    return float(out) if out.ndim == 0 else out


def bessel_j(nu: float, x):
    """Bessel J of half-integer or 0/1 order (dimensions 1 through 4).

    Orders +-1/2 use the closed trigonometric forms; J_(-1/2) diverges at
    x = 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be nonnegative")
    if nu == 0:
        out = j0(x)
    elif nu == 1:
        out = j1(x)
    elif nu == 0.5:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(x > 0, np.sqrt(2.0 / (np.pi * np.where(x > 0, x, 1.0))) * np.sin(x), 0.0)
    elif nu == -0.5:
        with np.errstate(divide="ignore"):
            out = np.sqrt(2.0 / (np.pi * x)) * np.cos(x)
    else:
        raise ValueError(f"unsupported Bessel order {nu}")
    return float(out) if out.ndim == 0 else out


def gamma_half(d: int) -> float:
    """Gamma(d/2) with exact values in the working dimensions."""
    exact = {1: math.sqrt(math.pi), 2: 1.0, 3: math.sqrt(math.pi) / 2, 4: 1.0}
    return exact.get(d, math.gamma(d / 2))


def _log_breaks(hi: float):
    """Interior breakpoints at powers of ten for wide smooth domains."""
    if hi <= 10.0:
        return None
    breaks = []
    b = 10.0
    while b < hi:
        breaks.append(b)
        b *= 10.0
    return breaks or None


def _quad_smooth(f, hi: float, q: QuadratureConfig) -> float:
    pts = _log_breaks(hi)
    limit = max(q.max_subdivisions, (len(pts) + 20) if pts else 0)
    out = quad(
        f, 0.0, hi, epsabs=0.0, epsrel=q.relative_tolerance,
        limit=limit, points=pts, full_output=1,
    )
    val, abserr = out[0], out[1]
    if len(out) > 3:  # QUADPACK flagged trouble
        scale = max(abs(val), 1e-290)
        if abserr > 100 * q.relative_tolerance * scale:
            raise QuadratureError(
                f"quadrature did not converge (error {abserr:g} on value {val:g})",
                achieved=abserr / scale,
            )
    return val


def _bessel_zeros(nu: float, count: int) -> np.ndarray:
    if count > _MAX_PANELS:
        raise QuadratureError(
            f"integrand requires {count} oscillation panels (limit {_MAX_PANELS})"
        )
    if nu == 0 or nu == 1:
        return jn_zeros(int(nu), count)
    if nu == 0.5:
        return np.pi * np.arange(1, count + 1)
    if nu == -0.5:
        return np.pi * (np.arange(1, count + 1) - 0.5)
    raise ValueError(f"unsupported Bessel order {nu}")


def _panel_gauss(f, edges: np.ndarray) -> float:
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = f(x.ravel()).reshape(x.shape)
    return float(np.sum(half * (vals @ _GL_WEIGHTS)))


def _quad_oscillatory(f, hi: float, freq: float, nu: float, q: QuadratureConfig) -> float:
    """Integrate f on [0, hi] where f oscillates like J_nu(freq * u)."""
    x_max = freq * hi
    n_zeros = int(x_max / math.pi) + 2
    zeros = _bessel_zeros(nu, n_zeros) / freq
    edges = np.concatenate([[0.0], zeros[zeros < hi], [hi]])
    coarse = _panel_gauss(f, edges)
    fine_edges = np.sort(np.concatenate([edges, 0.5 * (edges[:-1] + edges[1:])]))
    fine = _panel_gauss(f, fine_edges)
    err = abs(fine - coarse)
    scale = max(abs(fine), 1e-290)
    if err > max(10 * q.relative_tolerance * scale, 1e-250):
        # rare pre-asymptotic shapes: fall back to adaptive quadrature
        pts = list(edges[1:-1])
        limit = max(q.max_subdivisions, len(pts) + 20)
        out = quad(
            f, 0.0, hi, epsabs=0.0, epsrel=q.relative_tolerance,
            limit=limit, points=pts, full_output=1,
        )
        val, abserr = out[0], out[1]
        if len(out) > 3 and abserr > 100 * q.relative_tolerance * max(abs(val), 1e-290):
            raise QuadratureError(
                f"oscillatory quadrature did not converge (error {abserr:g})",
                achieved=abserr / max(abs(val), 1e-290),
            )
        return val
    return fine


def _band_integral(f, hi, q, freq=0.0, nu=None):
    if (
        q.oscillatory_split
        and nu is not None
        and freq * hi > OSCILLATION_THRESHOLD
    ):
        return _quad_oscillatory(f, hi, freq, nu, q)
    return _quad_smooth(f, hi, q)


def _radial_bessel(d: int, a_over_xi: float):
    """Vectorized u -> u^(d/2) J_(d/2-1)(a u / xi), with closed half-integer forms."""
    if d == 1:
        c = math.sqrt(2.0 / (math.pi * a_over_xi))
        return lambda u: c * np.cos(a_over_xi * u)
    if d == 2:
        return lambda u: u * j0(a_over_xi * u)
    if d == 3:
        c = math.sqrt(2.0 / (math.pi * a_over_xi))
        return lambda u: c * u * np.sin(a_over_xi * u)
    if d == 4:
        return lambda u: u * u * j1(a_over_xi * u)
    raise ValueError("dimension must be in 1..4")


def normalization_integral(
    eta1: float, kc_xi: float, d: int, q: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """S0' = int_0^(kc xi)^2 v^(d/2-1) / Pi(v) dv (u-substituted)."""
    if kc_xi <= 0:
        raise ValueError("kc * xi must be positive")
    return _quad_smooth(
        lambda u: 2.0 * u ** (d - 1) / pi_poly(eta1, u * u), kc_xi, q
    )


def variance_constraint(
    params: SsrfParams, d: int, q: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """Ensemble variance E[S0] of the model."""
    params.check_permissible()
    s0p = normalization_integral(params.eta1, params.band, d, q)
    return params.eta0 * s0p / (2**d * math.pi ** (d / 2) * gamma_half(d))


def covariance(
    params: SsrfParams, a: float, d: int, q: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """Covariance G(a) at lag a >= 0."""
    if a < 0:
        raise ValueError("lag must be nonnegative")
    if a == 0.0:
        return variance_constraint(params, d, q)
    params.check_permissible()
    eta1, xi = params.eta1, params.xi
    hi = params.band
    freq = a / xi
    radial = _radial_bessel(d, freq)
    val = _band_integral(
        lambda u: 2.0 * radial(u) / pi_poly(eta1, u * u),
        hi, q, freq=freq, nu=d / 2 - 1,
    )
    pref = params.eta0 * xi ** (d / 2 - 1) / (
        2.0 * (2.0 * math.pi) ** (d / 2) * a ** (d / 2 - 1)
    )
    return pref * val


def semivariogram(
    params: SsrfParams, a: float, d: int, q: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """F(a) = G(0) - G(a)."""
    if a == 0.0:
        return 0.0
    return variance_constraint(params, d, q) - covariance(params, a, d, q)


def band_profile(
    params: SsrfParams,
    lags,
    d: int,
    q: QuadratureConfig = DEFAULT_QUADRATURE,
):
    """Shared evaluation of (S0', G(0), {a: G(a)}) over several lags.

    Computes the normalization integral once; fitting objectives call this
    on every iterate.
    """
    params.check_permissible()
    s0p = normalization_integral(params.eta1, params.band, d, q)
    g0 = params.eta0 * s0p / (2**d * math.pi ** (d / 2) * gamma_half(d))
    cov = {}
    for a in lags:
        cov[a] = g0 if a == 0.0 else covariance(params, a, d, q)
    return s0p, g0, cov


def gradient_stoch(
    params: SsrfParams, a1: float, d: int, q: QuadratureConfig = DEFAULT_QUADRATURE
):
    """Gradient constraint (phi1, S1) via the semivariogram route.

    phi1(a1) = 2 d F(a1); S1 = phi1 / a1^2.
    """
    if a1 <= 0:
        raise ValueError("step must be positive")
    phi1 = 2 * d * semivariogram(params, a1, d, q)
    return phi1, phi1 / a1**2


def curvature_stoch(
    params: SsrfParams, a2: float, d: int, q: QuadratureConfig = DEFAULT_QUADRATURE
):
    """Curvature constraint (phi2, S2) via the semivariogram route.

    phi2(a2) = 8 d^2 F(a2) - 4 d (d-1) F(sqrt(2) a2) - 2 d F(2 a2).
    """
    if a2 <= 0:
        raise ValueError("step must be positive")
    c1, c2, c3 = 2 * d, 8 * d * d, 4 * d * (d - 1)
    _, g0, cov = band_profile(
        params, (a2, math.sqrt(2.0) * a2, 2.0 * a2), d, q
    )
    f = {a: g0 - c for a, c in cov.items()}
    phi2 = (
        c2 * f[a2]
        - c3 * f[math.sqrt(2.0) * a2]
        - c1 * f[2.0 * a2]
    )
    return phi2, phi2 / a2**4


def _sigma2_of(params: SsrfParams, d: int) -> float:
    """Variance scale implied by eta0 when S0' is normalized to 1."""
    return params.eta0 / (2**d * math.pi ** (d / 2) * gamma_half(d))


def gradient_stoch_spectral(
    params: SsrfParams, a1: float, d: int, q: QuadratureConfig = DEFAULT_QUADRATURE
):
    """Gradient constraint from its direct spectral form (test oracle).

    Single band integral of v^(d/2-1) minus the Bessel term; algebraically
    identical to the semivariogram route.
    """
    if a1 <= 0:
        raise ValueError("step must be positive")
    params.check_permissible()
    eta1, xi = params.eta1, params.xi
    hi = params.band
    gam = (2.0 * xi) ** (d / 2 - 1) * gamma_half(d)
    freq = a1 / xi
    radial = _radial_bessel(d, freq)
    scale = gam / a1 ** (d / 2 - 1)

    def f(u):
        # radial(u) = u^(d/2) J_nu(a1 u / xi) carries the substituted measure
        u = np.asarray(u, dtype=float)
        return 2.0 * (u ** (d - 1) - scale * radial(u)) / pi_poly(eta1, u * u)

    val = _band_integral(f, hi, q, freq=freq, nu=d / 2 - 1)
    c1 = 2 * d
    phi1 = c1 * _sigma2_of(params, d) * val
    return phi1, phi1 / a1**2


def curvature_stoch_spectral(
    params: SsrfParams, a2: float, d: int, q: QuadratureConfig = DEFAULT_QUADRATURE
):
    """Curvature constraint from its direct spectral form (test oracle)."""
    if a2 <= 0:
        raise ValueError("step must be positive")
    params.check_permissible()
    eta1, xi = params.eta1, params.xi
    hi = params.band
    c1, c2, c3 = 2 * d, 8 * d * d, 4 * d * (d - 1)
    gam = (2.0 * xi) ** (d / 2 - 1) * gamma_half(d)
    freqs = (a2 / xi, math.sqrt(2.0) * a2 / xi, 2.0 * a2 / xi)
    radials = [_radial_bessel(d, fq) for fq in freqs]
    coefs = (
        c2,
        -c3 / 2 ** (d / 4 - 0.5),
        -c1 / 2 ** (d / 2 - 1),
    )
    scale = gam / a2 ** (d / 2 - 1)

    def f(u):
        u = np.asarray(u, dtype=float)
        bess = sum(c * r(u) for c, r in zip(coefs, radials))
        return 2.0 * (
            (c3 + 3 * c1) * u ** (d - 1) - scale * bess
        ) / pi_poly(eta1, u * u)

    # highest oscillation frequency rules the panel layout
    val = _band_integral(f, hi, q, freq=freqs[2], nu=d / 2 - 1)
    phi2 = _sigma2_of(params, d) * val
    return phi2, phi2 / a2**4


def eta0_from_variance(sigma2_hat: float, d: int) -> float:
    """Scale coefficient matching the model variance to sigma2_hat."""
    if sigma2_hat <= 0:
        raise ValueError("variance must be positive")
    return 2**d * math.pi ** (d / 2) * gamma_half(d) * sigma2_hat
