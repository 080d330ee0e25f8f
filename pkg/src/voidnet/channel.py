"""Composite Nakagami-m / log-normal channel gains and association weights.

A link gain H is gamma-distributed with shape m around a log-normally
distributed local mean, i.e. H | X ~ Gamma(m, X/m) with
ln X ~ Normal(mu, sigma2).  Its fractional moments drive every closed-form
void-probability expression, via the moment product
E[(WH)^(2/alpha)] * E[(WH)^(-2/alpha)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

LN10_OVER_10 = math.log(10.0) / 10.0

SIGMA_IN_DB = "sigma-in-db"
SIGMA2_IN_DB = "sigma2-in-db"


class QuadratureError(RuntimeError):
    """Raised when the gain-density quadrature misses its tolerance."""

    def __init__(self, message: str, achieved_tol: float):
        super().__init__(f"{message} (achieved tolerance {achieved_tol:.3e})")
        self.achieved_tol = achieved_tol


def shadowing_sigma2_from_db(value_db: float, convention: str) -> float:
    """Natural-log shadowing variance from a quoted dB figure.

    ``"sigma-in-db"`` reads the figure as the standard deviation in dB;
    ``"sigma2-in-db"`` reads it as the variance in dB^2.  Both reduce to
    sigma_ln = sigma_dB * ln(10) / 10.
    """
    if value_db < 0:
        raise ValueError("dB shadowing figure must be >= 0")
    if convention == SIGMA_IN_DB:
        sigma_db = value_db
    elif convention == SIGMA2_IN_DB:
        sigma_db = math.sqrt(value_db)
    else:
        raise ValueError(f"unknown dB convention {convention!r}")
    return (sigma_db * LN10_OVER_10) ** 2


@dataclass(frozen=True)
class ChannelParams:
    """Nakagami shape m, log-normal (mu, sigma2) and path-loss exponent."""

    m: float
    mu: float
    sigma2: float
    alpha: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.m) and self.m > 0):
            raise ValueError(f"Nakagami shape m must be > 0, got {self.m}")
        if not np.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if not (np.isfinite(self.sigma2) and self.sigma2 >= 0):
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if not (np.isfinite(self.alpha) and self.alpha > 2):
            raise ValueError(f"path-loss exponent must be > 2, got {self.alpha}")

    @property
    def mean_gain(self) -> float:
        """E[H] = exp(mu + sigma2 / 2); the gamma stage has unit mean."""
        return math.exp(self.mu + self.sigma2 / 2.0)


NEAREST = "nearest"
UNIT = "unit"
LOGNORMAL = "lognormal"


@dataclass(frozen=True)
class WeightLaw:
    """Per-base-station association weighting.

    ``nearest`` sets W = 1/H on each link so the association criterion
    collapses to pure path loss (nearest-base-station association);
    ``unit`` sets W = 1 (strongest received power); ``lognormal`` draws an
    independent log-normal weight per base station.
    """

    kind: str
    mu_w: float = 0.0
    sigma2_w: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (NEAREST, UNIT, LOGNORMAL):
            raise ValueError(f"unknown weight law {self.kind!r}")
        if self.kind == LOGNORMAL:
            if not np.isfinite(self.mu_w):
                raise ValueError("mu_w must be finite")
            if not (np.isfinite(self.sigma2_w) and self.sigma2_w >= 0):
                raise ValueError(f"sigma2_w must be >= 0, got {self.sigma2_w}")

    @classmethod
    def nearest(cls) -> "WeightLaw":
        return cls(kind=NEAREST)

    @classmethod
    def unit(cls) -> "WeightLaw":
        return cls(kind=UNIT)

    @classmethod
    def lognormal(cls, mu_w: float, sigma2_w: float) -> "WeightLaw":
        return cls(kind=LOGNORMAL, mu_w=mu_w, sigma2_w=sigma2_w)

    def sample_weights(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Per-base-station weights; the nearest law has none (per-link)."""
        if self.kind == LOGNORMAL:
            return np.exp(rng.normal(self.mu_w, math.sqrt(self.sigma2_w), size=n))
        return np.ones(n)


def sample_gain(cp: ChannelParams, rng: np.random.Generator, size=None):
    """Draw composite gains H = Gamma(m, X/m) with log-normal X.

    Exact two-stage composition; no quadrature in the sampling path.
    Returns a float for ``size=None``, else an ndarray.
    """
    x = np.exp(rng.normal(cp.mu, math.sqrt(cp.sigma2), size=size))
    h = rng.gamma(shape=cp.m, scale=x / cp.m, size=size)
    if size is None:
        return float(h)
    return h


def gain_pdf(cp: ChannelParams, h, abs_tol: float = 1e-8):
    """Density of the composite gain at ``h`` by adaptive quadrature.

    The mixture integral over the shadowing level x is evaluated on the
    log axis y = ln x, where the integrand
    exp(-m*y - m*h*exp(-y) - (y - mu)^2 / (2*sigma2)) is smooth and
    unimodal.  Degenerate shadowing (sigma2 = 0) collapses to the plain
    gamma density.  Raises :class:`QuadratureError` if the requested
    absolute tolerance is not met.
    """
    h_arr = np.atleast_1d(np.asarray(h, dtype=float))
    if np.any(h_arr <= 0):
        raise ValueError("gain density is defined for h > 0 only")

    m, mu, s2 = cp.m, cp.mu, cp.sigma2
    if s2 == 0.0:
        log_pdf = (
            m * math.log(m)
            + (m - 1.0) * np.log(h_arr)
            - m * h_arr * math.exp(-mu)
            - gammaln(m)
            - m * mu
        )
        out = np.exp(log_pdf)
        return float(out[0]) if np.isscalar(h) else out

    sigma = math.sqrt(s2)
    prefactor_log = m * math.log(m) - gammaln(m) - 0.5 * math.log(2.0 * math.pi * s2)
    out = np.empty_like(h_arr)
    for i, hv in enumerate(h_arr):
        def integrand(y, hv=hv):
            return math.exp(-m * y - m * hv * math.exp(-y) - (y - mu) ** 2 / (2.0 * s2))

        # The exponent peaks near the larger of mu and ln(h); integrate a
        # generous normal-tail range around both.
        lo = min(mu, math.log(hv)) - 12.0 * sigma - 5.0
        hi = max(mu, math.log(hv)) + 12.0 * sigma + 5.0
        value, err = integrate.quad(integrand, lo, hi, epsabs=abs_tol, epsrel=1e-10, limit=200)
        if err > max(abs_tol, 1e-10 * abs(value)) * 10.0:
            raise QuadratureError("gain-density quadrature did not converge", achieved_tol=err)
        out[i] = math.exp(prefactor_log + (m - 1.0) * math.log(hv)) * value
    return float(out[0]) if np.isscalar(h) else out


def _unit_law_log_moment(cp: ChannelParams, p: float) -> float:
    """ln E[H^p] for the composite gain; requires m + p > 0."""
    return (
        gammaln(cp.m + p)
        - gammaln(cp.m)
        - p * math.log(cp.m)
        + p * cp.mu
        + p * p * cp.sigma2 / 2.0
    )


def fractional_moment(cp: ChannelParams, law: WeightLaw, p: float) -> float:
    """E[(W H)^p] for the weighted composite gain.

    Under the nearest law W*H is identically 1.  Under the unit law the
    moment is Gamma(m+p) / (Gamma(m) m^p) * exp(p*mu + p^2*sigma2/2),
    finite only for m + p > 0; divergence is reported as +inf.  A custom
    log-normal weight contributes an independent factor
    exp(p*mu_w + p^2*sigma2_w/2).
    """
    if not np.isfinite(p):
        raise ValueError("moment order must be finite")
    if law.kind == NEAREST:
        return 1.0
    if cp.m + p <= 0:
        return math.inf
    log_moment = _unit_law_log_moment(cp, p)
    if law.kind == LOGNORMAL:
        log_moment += p * law.mu_w + p * p * law.sigma2_w / 2.0
    return math.exp(log_moment)


def zeta_dagger(cp: ChannelParams, law: WeightLaw) -> float:
    """Moment product E[(WH)^(2/alpha)] * E[(WH)^(-2/alpha)].

    At least 1 by Cauchy-Schwarz, with equality when W*H is constant
    (the nearest law).  Diverges, reported as +inf, when m <= 2/alpha
    under gain-dependent weighting.
    """
    p = 2.0 / cp.alpha
    plus = fractional_moment(cp, law, p)
    minus = fractional_moment(cp, law, -p)
    if math.isinf(plus) or math.isinf(minus):
        return math.inf
    return plus * minus
