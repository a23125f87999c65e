"""Limiting spectral laws of the pure-noise bulk.

Two bulk models appear in this package: the semicircle law for the spectrum
of a symmetric Gaussian noise matrix with independent N(0, sigma^2)
off-diagonal entries, and the Marchenko-Pastur law for the eigenvalues of
the sample covariance (1/n) H H^T of pure noise with aspect ratio p/n.

``bulk_density`` is the classical density written against raw eigenvalue
units.  For Marchenko-Pastur with p > n it deliberately carries total mass
n/p < 1: the remaining mass sits in an atom at zero (the rank deficiency of
the sample covariance).  ``density`` rescales to a probability density on
the continuous bulk, which is what the mass-1 invariant refers to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.integrate

from .errors import InvalidInput

QUAD_EPSABS = 1e-8


class LawKind(Enum):
    SEMICIRCLE = "semicircle"
    MARCHENKO_PASTUR = "marchenko_pastur"


@dataclass(frozen=True)
class NoiseSpectrumLaw:
    """A bulk spectral law with support ``[lam_minus, lam_plus]``.

    ``sigma`` is the noise standard deviation in both cases; ``p`` is only
    meaningful for Marchenko-Pastur and is ``None`` for the semicircle.
    """

    kind: LawKind
    sigma: float
    n: int
    p: int | None
    lam_minus: float
    lam_plus: float

    @classmethod
    def semicircle(cls, sigma: float, n: int) -> "NoiseSpectrumLaw":
        if sigma <= 0:
            raise InvalidInput(f"sigma must be positive, got {sigma}")
        if n < 1:
            raise InvalidInput(f"n must be >= 1, got {n}")
        edge = 2.0 * sigma * math.sqrt(n)
        return cls(LawKind.SEMICIRCLE, float(sigma), int(n), None, -edge, edge)

    @classmethod
    def marchenko_pastur(cls, sigma2: float, n: int, p: int) -> "NoiseSpectrumLaw":
        if sigma2 <= 0:
            raise InvalidInput(f"sigma2 must be positive, got {sigma2}")
        if n < 1 or p < 1:
            raise InvalidInput(f"n and p must be >= 1, got n={n}, p={p}")
        ratio = math.sqrt(p / n)
        lam_minus = sigma2 * (1.0 - ratio) ** 2
        lam_plus = sigma2 * (1.0 + ratio) ** 2
        return cls(
            LawKind.MARCHENKO_PASTUR, math.sqrt(sigma2), int(n), int(p), lam_minus, lam_plus
        )

    @property
    def bulk_mass(self) -> float:
        """Total mass of ``bulk_density``: 1, except min(1, n/p) for MP."""
        if self.kind is LawKind.MARCHENKO_PASTUR:
            return min(1.0, self.n / self.p)
        return 1.0

    def bulk_density(self, x):
        """Classical bulk density at ``x`` (vectorized, zero off support)."""
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lam_minus) & (x <= self.lam_plus)
        out = np.zeros_like(x)
        if self.kind is LawKind.SEMICIRCLE:
            scale = self.sigma * math.sqrt(self.n)
            t = x[inside] / scale
            out[inside] = np.sqrt(np.maximum(4.0 - t * t, 0.0)) / (2.0 * math.pi * scale)
        else:
            sigma2 = self.sigma**2
            xi = x[inside]
            prod = np.maximum((self.lam_plus - xi) * (xi - self.lam_minus), 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = self.n * np.sqrt(prod) / (2.0 * math.pi * sigma2 * self.p * xi)
            out[inside] = np.where(xi > 0.0, vals, 0.0)
        return out if out.ndim else float(out)

    def density(self, x):
        """Probability density on the continuous bulk (integrates to 1)."""
        return self.bulk_density(x) / self.bulk_mass

    def integrate(self, f, epsabs: float = QUAD_EPSABS) -> float:
        """Adaptive quadrature of ``f(x) * bulk_density(x)`` over the support."""
        value, _ = scipy.integrate.quad(
            lambda x: f(x) * self.bulk_density(x),
            self.lam_minus,
            self.lam_plus,
            epsabs=epsabs,
            epsrel=1e-10,
            limit=200,
        )
        return float(value)
