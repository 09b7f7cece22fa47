"""Scalar Gaussian primitives and 1-D quadrature.

Everything here is a pure function; the only state is a cache of
Gauss-Legendre node tables.
"""

from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np
from scipy import special

LN2 = math.log(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


@dataclasses.dataclass(frozen=True)
class PufModel:
    """Gaussian source/noise model: enrollment X ~ N(0, sigma_p^2),
    reconstruction Y = X + N with N ~ N(0, sigma_n^2)."""

    sigma_p: float = 2241.0
    sigma_n: float = 129.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma_p) and self.sigma_p > 0):
            raise DomainError(
                f"sigma_p must be finite and positive, got {self.sigma_p!r}")
        # sigma_n = 0 (noiseless reconstruction) is a legal degenerate case
        if not (math.isfinite(self.sigma_n) and self.sigma_n >= 0):
            raise DomainError(
                f"sigma_n must be finite and nonnegative, got {self.sigma_n!r}")


def gaussian_cdf(x, mu=0.0, sigma=1.0):
    """CDF of N(mu, sigma^2).  Accurate in the lower tail down to ~1e-300."""
    if not (math.isfinite(mu) and math.isfinite(sigma)) or sigma <= 0:
        raise DomainError(f"invalid Gaussian parameters mu={mu}, sigma={sigma}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x) | np.isinf(x)):
        raise DomainError("non-finite (NaN) argument to gaussian_cdf")
    out = special.ndtr((x - mu) / sigma)
    return float(out) if out.ndim == 0 else out


def gaussian_sf(x, mu=0.0, sigma=1.0):
    """Upper tail P(X > x) of N(mu, sigma^2), accurate for large x."""
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x, dtype=float)
    out = special.ndtr((mu - x) / sigma)
    return float(out) if out.ndim == 0 else out


def gaussian_quantile(p, mu=0.0, sigma=1.0):
    """Inverse CDF of N(mu, sigma^2).  p may touch 0/1 (gives -/+inf)."""
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("quantile argument outside [0, 1]")
    out = mu + sigma * special.ndtri(p)
    return float(out) if out.ndim == 0 else out


def q_function(x):
    """Gaussian tail integral Q(x) = P(N(0,1) > x)."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("non-finite argument to q_function")
    out = special.ndtr(-x)
    return float(out) if out.ndim == 0 else out


def log_q_function(x):
    """Natural log of Q(x); usable far beyond double-precision underflow."""
    x = np.asarray(x, dtype=float)
    out = special.log_ndtr(-x)
    return float(out) if out.ndim == 0 else out


def _log_std_pdf(x):
    return -0.5 * x * x - math.log(SQRT_2PI)


def q_inverse(p=None, *, log2_p=None):
    """Inverse of the Gaussian Q-function.

    Pass either ``p`` in (0,1) directly or ``log2_p`` = log2(p) so that
    cryptographic security levels (p = 2^-256) stay representable.
    """
    if (p is None) == (log2_p is None):
        raise DomainError("pass exactly one of p or log2_p")
    if p is not None:
        if not (0.0 < p < 1.0):
            raise DomainError(f"p must lie in (0,1), got {p!r}")
        if p >= 1e-290:
            return float(-special.ndtri(p))
        log_p = math.log(p)
    else:
        if not (math.isfinite(log2_p) and log2_p < 0.0):
            raise DomainError(f"log2_p must be finite and negative, got {log2_p!r}")
        log_p = log2_p * LN2
        if log_p > math.log(1e-290):
            return float(-special.ndtri(math.exp(log_p)))

    # Deep tail: Newton on ln Q(x) = log_p, seeded from Q(x) ~ phi(x)/x.
    t = -2.0 * log_p
    x = math.sqrt(max(t - math.log(2.0 * math.pi * t), 1.0))
    for _ in range(60):
        f = log_q_function(x) - log_p
        fp = -math.exp(_log_std_pdf(x) - log_q_function(x))
        step = f / fp
        x -= step
        if abs(step) < 1e-13 * abs(x):
            break
    return x


@functools.lru_cache(maxsize=32)
def unit_interval_rule(nodes: int):
    """Gauss-Legendre nodes/weights mapped onto [0, 1]."""
    if nodes < 2:
        raise DomainError(f"need at least 2 quadrature nodes, got {nodes}")
    t, w = np.polynomial.legendre.leggauss(nodes)
    return (t + 1.0) / 2.0, w / 2.0


def integrate_unit_interval(f, nodes: int = 128):
    """Gauss-Legendre estimate of the integral of f over [0, 1].

    ``f`` is called once per node; vectorized callables get the full node
    array in a single call.
    """
    if nodes < 16:
        raise DomainError(f"nodes must be >= 16, got {nodes}")
    x, w = unit_interval_rule(nodes)
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        y = np.array([float(f(xi)) for xi in x])
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise DomainError(f"integrand not finite at node w={bad!r}")
    return float(y @ w)


def integrate_unit_interval_with_error(f, nodes: int = 128):
    """Same as integrate_unit_interval but also reports the change when the
    node count is doubled, usable as an error estimate."""
    coarse = integrate_unit_interval(f, nodes)
    fine = integrate_unit_interval(f, 2 * nodes)
    return coarse, abs(fine - coarse)
