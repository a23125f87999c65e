"""Additive matrix denoising: estimate <a, u_l> from M = M* + H.

``M*`` is a rank-``r`` symmetric signal with spike eigenvalues sorted by
magnitude, ``H`` a symmetric Gaussian noise matrix (off-diagonal variance
sigma^2, diagonal variance 2 sigma^2).  The plug-in estimate ``<a, u_l>``
built from the observed top eigenvector is biased towards zero; multiplying
by ``sqrt(1 + b_l)`` with the bulk-sum correction

    b_l = sigma^2 * sum_{i > r} 1 / (lambda_l - lambda_i)^2

removes the bias to first order.  Everything here is expressed in terms of
observable quantities except the ``*_oracle`` helpers and theory bounds,
which consume the ground-truth model and exist for simulation studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .core import (
    ORTHONORMALITY_TOL,
    Ordering,
    SpectralDecomposition,
    SymmetricMatrix,
    check_unit_vector,
    eigendecompose,
    orthonormal_complement,
)
from .errors import (
    DegenerateSpectrum,
    InvalidInput,
    NumericalFailure,
    OutsideBulkRequired,
)

# Relative gap below which lambda_l is treated as colliding with a bulk
# eigenvalue (the correction is undefined rather than merely large).
COLLISION_RTOL = 1e-12

# Margin (in units of lambda / (sigma sqrt(n))) by which the evaluation
# point must clear the semicircle edge.
BULK_EDGE_MARGIN = 1e-6


def rng_from_seed(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or a ready Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if isinstance(seed, (int, np.integer)):
        return np.random.default_rng(int(seed))
    raise InvalidInput(f"seed must be an int, SeedSequence, or Generator, got {type(seed)!r}")


@dataclass(frozen=True)
class GroundTruthDenoising:
    """Planted low-rank signal plus noise level.

    ``eigvals_star`` holds the ``r`` nonzero signal eigenvalues sorted by
    magnitude descending (signs arbitrary); column ``U_star[:, k]`` is the
    matching unit eigenvector.  ``sigma`` may be zero (noiseless runs are
    legitimate edge cases even though most theory assumes sigma > 0).
    """

    n: int
    r: int
    eigvals_star: np.ndarray
    U_star: np.ndarray
    sigma: float

    def __post_init__(self):
        vals = np.array(self.eigvals_star, dtype=float)
        frame = np.array(self.U_star, dtype=float)
        object.__setattr__(self, "eigvals_star", vals)
        object.__setattr__(self, "U_star", frame)
        if self.n < 2:
            raise InvalidInput(f"n must be >= 2, got {self.n}")
        if not 1 <= self.r < self.n:
            raise InvalidInput(f"r must satisfy 1 <= r < n, got r={self.r}, n={self.n}")
        if vals.shape != (self.r,):
            raise InvalidInput(f"eigvals_star must have shape ({self.r},), got {vals.shape}")
        if np.any(vals == 0.0) or not np.all(np.isfinite(vals)):
            raise InvalidInput("signal eigenvalues must be finite and nonzero")
        mags = np.abs(vals)
        if np.any(mags[:-1] < mags[1:] - 1e-12 * (1.0 + mags.max())):
            raise InvalidInput("signal eigenvalues must be sorted by magnitude descending")
        if frame.shape != (self.n, self.r):
            raise InvalidInput(
                f"U_star must have shape ({self.n}, {self.r}), got {frame.shape}"
            )
        gram_gap = float(np.max(np.abs(frame.T @ frame - np.eye(self.r))))
        if gram_gap > ORTHONORMALITY_TOL:
            raise InvalidInput(f"U_star columns not orthonormal: deviation {gram_gap:.3e}")
        if not (np.isfinite(self.sigma) and self.sigma >= 0.0):
            raise InvalidInput(f"sigma must be >= 0, got {self.sigma}")
        vals.setflags(write=False)
        frame.setflags(write=False)

    @classmethod
    def canonical(cls, n: int, eigvals_star, sigma: float) -> "GroundTruthDenoising":
        """Model with the first ``r`` standard basis vectors as spikes."""
        vals = np.atleast_1d(np.asarray(eigvals_star, dtype=float))
        r = vals.shape[0]
        frame = np.zeros((n, r))
        frame[np.arange(r), np.arange(r)] = 1.0
        return cls(n=n, r=r, eigvals_star=vals, U_star=frame, sigma=float(sigma))

    @property
    def lambda_max_star(self) -> float:
        return float(np.abs(self.eigvals_star[0]))

    @property
    def lambda_min_star(self) -> float:
        return float(np.abs(self.eigvals_star[-1]))

    @property
    def kappa(self) -> float:
        return self.lambda_max_star / self.lambda_min_star

    def delta_star(self, l: int) -> float:
        """Signal eigengap around spike ``l``; the top magnitude when r = 1."""
        if not 1 <= l <= self.r:
            raise InvalidInput(f"l must be in 1..{self.r}, got {l}")
        if self.r == 1:
            return self.lambda_max_star
        others = np.delete(self.eigvals_star, l - 1)
        return float(np.min(np.abs(self.eigvals_star[l - 1] - others)))

    def low_rank_matrix(self) -> np.ndarray:
        m = (self.U_star * self.eigvals_star) @ self.U_star.T
        return (m + m.T) / 2.0

    def spike_vector(self, l: int) -> np.ndarray:
        if not 1 <= l <= self.r:
            raise InvalidInput(f"l must be in 1..{self.r}, got {l}")
        return self.U_star[:, l - 1]


def generate_noise(n: int, sigma: float, seed) -> SymmetricMatrix:
    """Symmetric Gaussian noise: N(0, sigma^2) above the diagonal (mirrored),
    N(0, 2 sigma^2) on the diagonal.  Deterministic in ``seed``."""
    if n < 1:
        raise InvalidInput(f"n must be >= 1, got {n}")
    if not (np.isfinite(sigma) and sigma >= 0.0):
        raise InvalidInput(f"sigma must be >= 0, got {sigma}")
    rng = rng_from_seed(seed)
    g = rng.standard_normal((n, n))
    upper = np.triu(g, 1)
    h = upper + upper.T + math.sqrt(2.0) * np.diag(np.diag(g))
    return SymmetricMatrix(sigma * h)


def observe(model: GroundTruthDenoising, seed) -> SymmetricMatrix:
    """Draw one observation M = M* + H."""
    noise = generate_noise(model.n, model.sigma, seed)
    return SymmetricMatrix(model.low_rank_matrix() + noise.entries)


def _check_spike_index(spec: SpectralDecomposition, l: int, r: int) -> None:
    if spec.ordering is not Ordering.BY_MAGNITUDE_DESC:
        raise InvalidInput("decomposition must be ordered by magnitude descending")
    if not 1 <= r < spec.dim:
        raise InvalidInput(f"r must satisfy 1 <= r < n, got r={r}, n={spec.dim}")
    if not 1 <= l <= r:
        raise InvalidInput(f"l must be in 1..{r}, got {l}")


def debias_factor_md(spec: SpectralDecomposition, l: int, r: int, sigma: float) -> float:
    """Bulk-sum correction b_l = sigma^2 * sum_{i>r} (lambda_l - lambda_i)^{-2}.

    Raises :class:`DegenerateSpectrum` if ``lambda_l`` collides with a bulk
    eigenvalue (relative gap below ``COLLISION_RTOL``); the correction is a
    divergent quantity there, not a large-but-usable one.
    """
    _check_spike_index(spec, l, r)
    if not (np.isfinite(sigma) and sigma >= 0.0):
        raise InvalidInput(f"sigma must be >= 0, got {sigma}")
    lam = spec.eigenvalues[l - 1]
    gaps = lam - spec.eigenvalues[r:]
    if np.min(np.abs(gaps)) <= COLLISION_RTOL * (1.0 + abs(lam)):
        raise DegenerateSpectrum(
            f"lambda_{l} = {lam!r} collides with a bulk eigenvalue"
        )
    return float(sigma**2 * np.sum(1.0 / gaps**2))


@dataclass(frozen=True)
class FunctionalEstimate:
    """Plug-in and de-biased estimates of <a, u_l> from one observation.

    ``debiased`` is exactly ``factor * plugin`` with
    ``factor = sqrt(1 + correction)``.
    """

    l: int
    lambda_l: float
    plugin: float
    correction: float
    factor: float
    debiased: float


def estimate_functional_md(
    matrix: SymmetricMatrix, a, l: int, r: int, sigma: float
) -> FunctionalEstimate:
    """Estimate <a, u_l> of the observed matrix and de-bias it.

    ``r`` is the (known or estimated) signal rank and ``sigma`` the noise
    standard deviation; both enter only through the correction ``b_l``.
    """
    a = check_unit_vector(a, matrix.dim)
    spec = eigendecompose(matrix, Ordering.BY_MAGNITUDE_DESC)
    correction = debias_factor_md(spec, l, r, sigma)
    plugin = float(a @ spec.eigenvector(l))
    factor = math.sqrt(1.0 + correction)
    return FunctionalEstimate(
        l=l,
        lambda_l=spec.eigenvalue(l),
        plugin=plugin,
        correction=correction,
        factor=factor,
        debiased=factor * plugin,
    )


def semicircle_b(lambda_l: float, sigma: float, n: int) -> float:
    """Semicircle-law approximation of the correction b_l.

    Replaces the bulk sum by its large-n limit: with x = lambda_l / (sigma
    sqrt(n)),

        b  ~=  integral_{-2}^{2} sqrt(4 - t^2) / (2 pi (x - t)^2) dt.

    The integrand is even in (x, t) -> (-x, -t), so the value depends only on
    |x|; |x| must clear the bulk edge 2 by more than ``BULK_EDGE_MARGIN``
    or :class:`OutsideBulkRequired` is raised.  Quadrature is adaptive with
    absolute tolerance 1e-8.
    """
    if sigma <= 0:
        raise InvalidInput(f"sigma must be positive, got {sigma}")
    if n < 1:
        raise InvalidInput(f"n must be >= 1, got {n}")
    x = abs(float(lambda_l)) / (sigma * math.sqrt(n))
    if x <= 2.0 + BULK_EDGE_MARGIN:
        raise OutsideBulkRequired(
            f"|lambda| / (sigma sqrt(n)) = {x!r} must exceed 2 + {BULK_EDGE_MARGIN}"
        )
    out = scipy.integrate.quad(
        lambda t: math.sqrt(4.0 - t * t) / (2.0 * math.pi * (x - t) ** 2),
        -2.0,
        2.0,
        epsabs=1e-8,
        epsrel=1e-10,
        limit=200,
        full_output=1,
    )
    value, abserr = float(out[0]), float(out[1])
    # Within a hair of the bulk edge the integral blows up and QUADPACK gives
    # up; surface that instead of returning an unconverged number.
    if len(out) > 3 or abserr > 1e-6 * (1.0 + abs(value)):
        raise NumericalFailure(
            f"quadrature did not converge at x = {x!r}: "
            f"error estimate {abserr!r} on value {value!r}"
        )
    return value


@dataclass(frozen=True)
class OracleBiasDiagnosticsMD:
    """Oracle eigenvalue correction gamma evaluated at one point.

    ``corrected = lam - gamma`` estimates the signal eigenvalue when ``lam``
    is the matching observed eigenvalue.  ``residual`` is filled when the
    true signal eigenvalue was supplied.
    """

    lam: float
    gamma: float
    corrected: float
    residual: float | None


def gamma_oracle(
    model: GroundTruthDenoising,
    noise: SymmetricMatrix,
    lam: float,
    lambda_star: float | None = None,
) -> OracleBiasDiagnosticsMD:
    """Oracle bias gamma(lam) = sigma^2 tr[(lam I - W)^{-1}] with W the noise
    compressed onto the orthogonal complement of the signal frame.

    Requires the actual noise realization, hence "oracle": available in
    simulations, not from data.
    """
    if noise.dim != model.n:
        raise InvalidInput(f"noise dim {noise.dim} does not match model n {model.n}")
    u_perp = orthonormal_complement(model.U_star)
    w = u_perp.T @ noise.entries @ u_perp
    mu = np.linalg.eigvalsh((w + w.T) / 2.0)
    gaps = lam - mu
    if np.min(np.abs(gaps)) <= COLLISION_RTOL * (1.0 + abs(lam)):
        raise DegenerateSpectrum(f"lam = {lam!r} collides with a compressed noise eigenvalue")
    gamma = float(model.sigma**2 * np.sum(1.0 / gaps))
    corrected = float(lam) - gamma
    residual = abs(corrected - float(lambda_star)) if lambda_star is not None else None
    return OracleBiasDiagnosticsMD(lam=float(lam), gamma=gamma, corrected=corrected, residual=residual)


def estimate_rank(spec: SpectralDecomposition, sigma: float, threshold_factor: float = 2.0) -> int:
    """Largest ``l`` whose magnitude gap ``|lambda_l| - |lambda_{l+1}|``
    exceeds ``threshold_factor * sigma * sqrt(n)``; 0 if no gap qualifies.

    Scans ``l = n-1`` downward so the first qualifying gap is the largest
    index, i.e. the most inclusive rank consistent with the threshold.
    """
    if spec.ordering is not Ordering.BY_MAGNITUDE_DESC:
        raise InvalidInput("decomposition must be ordered by magnitude descending")
    if not (np.isfinite(sigma) and sigma >= 0.0):
        raise InvalidInput(f"sigma must be >= 0, got {sigma}")
    if threshold_factor <= 0:
        raise InvalidInput(f"threshold_factor must be positive, got {threshold_factor}")
    mags = np.abs(spec.eigenvalues)
    threshold = threshold_factor * sigma * math.sqrt(spec.dim)
    for l in range(spec.dim - 1, 0, -1):
        if mags[l - 1] - mags[l] > threshold:
            return l
    return 0


def estimate_noise_md(spec: SpectralDecomposition, r: int) -> float:
    """Crude noise-scale estimate |lambda_{r+1}| / (2 sqrt(n)).

    Treats the largest residual eigenvalue as sitting at the bulk edge.
    Plumbing for rank/noise bootstrapping; no accuracy guarantee.
    """
    if spec.ordering is not Ordering.BY_MAGNITUDE_DESC:
        raise InvalidInput("decomposition must be ordered by magnitude descending")
    if not 0 <= r < spec.dim:
        raise InvalidInput(f"r must satisfy 0 <= r < n, got r={r}, n={spec.dim}")
    return float(abs(spec.eigenvalues[r]) / (2.0 * math.sqrt(spec.dim)))


def eigengap_conditions_md(model: GroundTruthDenoising, l: int) -> bool:
    """Feasibility gate for the de-biasing theory (all constants set to 1):
    noise below the smallest spike, rank small relative to n / log^2 n, and
    the eigengap around spike ``l`` clearing sigma sqrt(r) log n."""
    n = model.n
    log_n = math.log(n)
    return (
        model.sigma * math.sqrt(n) <= model.lambda_min_star
        and model.r <= n / log_n**2
        and model.delta_star(l) > model.sigma * math.sqrt(model.r) * log_n
    )


@dataclass(frozen=True)
class TheoryBoundsMD:
    """Evaluated error bounds for one (model, a, l) triple.

    ``e_estimate`` bounds the de-biased estimator's fluctuation,
    ``e_bias`` the plug-in estimator's systematic shrinkage; their ratio
    quantifies how dominant the removable bias is.  ``eigengap_ok`` reports
    the feasibility gate.
    """

    e_estimate: float
    e_bias: float
    eigengap_ok: bool


def bounds_md(
    model: GroundTruthDenoising, a, l: int, lambda_max_emp: float
) -> TheoryBoundsMD:
    """Evaluate the theory bounds at unit direction ``a`` and spike ``l``.

    ``lambda_max_emp`` is the top observed eigenvalue magnitude; it only
    enters through a logarithmic factor.
    """
    a = check_unit_vector(a, model.n)
    if not 1 <= l <= model.r:
        raise InvalidInput(f"l must be in 1..{model.r}, got {l}")
    if not (np.isfinite(lambda_max_emp) and lambda_max_emp > 0):
        raise InvalidInput(f"lambda_max_emp must be positive, got {lambda_max_emp}")

    n, r, sigma = model.n, model.r, model.sigma
    overlaps = model.U_star.T @ a
    ip_l = abs(float(overlaps[l - 1]))
    lam_l = float(model.eigvals_star[l - 1])
    delta = model.delta_star(l)
    log_arg = n * model.kappa * lambda_max_emp / delta
    if log_arg <= 1.0:
        raise InvalidInput(f"log factor undefined: n kappa lambda_max / delta = {log_arg!r} <= 1")
    big_l = math.log(log_arg)

    cross = 0.0
    for k in range(1, r + 1):
        if k == l:
            continue
        cross += abs(float(overlaps[k - 1])) / abs(lam_l - float(model.eigvals_star[k - 1]))

    e_estimate = (
        sigma**2 * r * math.log(n) / delta**2 * ip_l
        + sigma * math.sqrt(r * big_l) * cross
        + sigma * math.sqrt(big_l) / abs(lam_l)
    )
    e_bias = sigma**2 * n / lam_l**2 * ip_l
    return TheoryBoundsMD(
        e_estimate=float(e_estimate),
        e_bias=float(e_bias),
        eigengap_ok=eigengap_conditions_md(model, l),
    )
