"""Spiked-covariance PCA: estimate <a, u_l> of the top sample-covariance
eigenvectors and de-bias it.

Data are i.i.d. columns s_i = U* diag(sqrt(lambda*)) g_i + sigma h_i with
standard Gaussian g_i, h_i, so the population covariance is
Sigma* + sigma^2 I with Sigma* of rank r.  The plug-in estimate from the
sample covariance (1/n) S S^T is shrunk towards zero; multiplying by
sqrt(1 + c_l) removes the first-order bias, where c_l is assembled from the
sample spectrum itself (two branches depending on the aspect ratio p/n,
with the spectrum zero-padded to length n when p < n):

  n >= p:  c_l = [lam_l / (n + sum_i lam_i/(lam_l - lam_i))]
                 * sum_i lam_i / (lam_l - lam_i)^2
  n <  p:  with s = sigma^2 p / n,
           c_l = s/(lam_l - s) + lam_l/(lam_l - s)
                 * [lam_l / (n + sum_i lam_i/(lam_l - lam_i))]
                 * sum_i (lam_i - s) / (lam_l - lam_i)^2

(sums over bulk positions r < i <= n).  ``mp_debias`` evaluates the same
corrections with the bulk sums replaced by p times their Marchenko-Pastur
bulk expectations, which is the large-n limit of the data-driven form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    ORTHONORMALITY_TOL,
    Ordering,
    SpectralDecomposition,
    SymmetricMatrix,
    check_unit_vector,
    eigendecompose,
    orthonormal_complement,
)
from .denoise import COLLISION_RTOL, rng_from_seed
from .errors import DegenerateSpectrum, InvalidInput, OutsideBulkRequired
from .laws import NoiseSpectrumLaw

# Relative margin (in units of sigma^2) by which an evaluation point must
# clear the Marchenko-Pastur bulk edge.
MP_EDGE_MARGIN = 1e-6


class Branch(Enum):
    """Which aspect-ratio branch of the correction formula applied."""

    N_GE_P = "n_ge_p"
    N_LT_P = "n_lt_p"


@dataclass(frozen=True)
class SpikedModel:
    """Ground truth for spiked-covariance sampling.

    ``eigvals_star`` holds the r positive spike eigenvalues of the rank-r
    signal covariance, sorted descending; ``U_star`` the matching
    orthonormal directions; ``sigma2`` the isotropic noise variance; ``n``
    the number of samples drawn per observation.
    """

    p: int
    n: int
    r: int
    eigvals_star: np.ndarray
    U_star: np.ndarray
    sigma2: float

    def __post_init__(self):
        vals = np.array(self.eigvals_star, dtype=float)
        frame = np.array(self.U_star, dtype=float)
        object.__setattr__(self, "eigvals_star", vals)
        object.__setattr__(self, "U_star", frame)
        if self.p < 2:
            raise InvalidInput(f"p must be >= 2, got {self.p}")
        if self.n < 1:
            raise InvalidInput(f"n must be >= 1, got {self.n}")
        if not 1 <= self.r < self.p:
            raise InvalidInput(f"r must satisfy 1 <= r < p, got r={self.r}, p={self.p}")
        if vals.shape != (self.r,):
            raise InvalidInput(f"eigvals_star must have shape ({self.r},), got {vals.shape}")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise InvalidInput("spike eigenvalues must be finite and positive")
        if np.any(vals[:-1] < vals[1:] - 1e-12 * (1.0 + vals.max())):
            raise InvalidInput("spike eigenvalues must be sorted descending")
        if frame.shape != (self.p, self.r):
            raise InvalidInput(
                f"U_star must have shape ({self.p}, {self.r}), got {frame.shape}"
            )
        gram_gap = float(np.max(np.abs(frame.T @ frame - np.eye(self.r))))
        if gram_gap > ORTHONORMALITY_TOL:
            raise InvalidInput(f"U_star columns not orthonormal: deviation {gram_gap:.3e}")
        if not (np.isfinite(self.sigma2) and self.sigma2 >= 0.0):
            raise InvalidInput(f"sigma2 must be >= 0, got {self.sigma2}")
        vals.setflags(write=False)
        frame.setflags(write=False)

    @classmethod
    def canonical(cls, p: int, n: int, eigvals_star, sigma2: float) -> "SpikedModel":
        """Model with the first ``r`` standard basis vectors as spikes."""
        vals = np.atleast_1d(np.asarray(eigvals_star, dtype=float))
        r = vals.shape[0]
        frame = np.zeros((p, r))
        frame[np.arange(r), np.arange(r)] = 1.0
        return cls(p=p, n=n, r=r, eigvals_star=vals, U_star=frame, sigma2=float(sigma2))

    @property
    def lambda_max_star(self) -> float:
        return float(self.eigvals_star[0])

    @property
    def lambda_min_star(self) -> float:
        return float(self.eigvals_star[-1])

    @property
    def kappa(self) -> float:
        return self.lambda_max_star / self.lambda_min_star

    def delta_star(self, l: int) -> float:
        """Spike eigengap around position ``l``; the top spike when r = 1."""
        if not 1 <= l <= self.r:
            raise InvalidInput(f"l must be in 1..{self.r}, got {l}")
        if self.r == 1:
            return self.lambda_max_star
        others = np.delete(self.eigvals_star, l - 1)
        return float(np.min(np.abs(self.eigvals_star[l - 1] - others)))

    def signal_covariance(self) -> np.ndarray:
        m = (self.U_star * self.eigvals_star) @ self.U_star.T
        return (m + m.T) / 2.0

    def covariance(self) -> np.ndarray:
        """Population covariance Sigma* + sigma^2 I of one sample column."""
        return self.signal_covariance() + self.sigma2 * np.eye(self.p)

    def spike_vector(self, l: int) -> np.ndarray:
        if not 1 <= l <= self.r:
            raise InvalidInput(f"l must be in 1..{self.r}, got {l}")
        return self.U_star[:, l - 1]


def sample(model: SpikedModel, seed) -> np.ndarray:
    """Draw the p x n data matrix S, deterministic in ``seed``.

    Signal coefficients are drawn before the noise panel so the stream
    layout is part of the reproducibility contract.
    """
    rng = rng_from_seed(seed)
    g = rng.standard_normal((model.r, model.n))
    h = rng.standard_normal((model.p, model.n))
    signal = model.U_star @ (np.sqrt(model.eigvals_star)[:, None] * g)
    return signal + math.sqrt(model.sigma2) * h


def sample_covariance(data) -> SymmetricMatrix:
    """(1/n) S S^T for a p x n data matrix."""
    s = np.asarray(data, dtype=float)
    if s.ndim != 2 or s.shape[1] < 1:
        raise InvalidInput(f"data must be a p x n matrix with n >= 1, got shape {s.shape}")
    m = s @ s.T / s.shape[1]
    return SymmetricMatrix((m + m.T) / 2.0)


def _padded_spectrum(spec: SpectralDecomposition, n: int) -> np.ndarray:
    """First n sample eigenvalues, zero-padded when the matrix has fewer."""
    evs = np.zeros(n)
    m = min(spec.dim, n)
    evs[:m] = spec.eigenvalues[:m]
    return evs


def _check_pca_index(spec: SpectralDecomposition, l: int, r: int, n: int) -> None:
    if spec.ordering is not Ordering.BY_VALUE_DESC:
        raise InvalidInput("decomposition must be ordered by value descending")
    if not 1 <= r < min(spec.dim, n) + 1:
        raise InvalidInput(
            f"r must satisfy 1 <= r <= min(p, n), got r={r}, p={spec.dim}, n={n}"
        )
    if not 1 <= l <= r:
        raise InvalidInput(f"l must be in 1..{r}, got {l}")
    if r >= n:
        raise InvalidInput(f"bulk positions r < i <= n are empty for r={r}, n={n}")


def _bulk_sums(lam: float, bulk: np.ndarray) -> tuple[np.ndarray, float]:
    gaps = lam - bulk
    if np.min(np.abs(gaps)) <= COLLISION_RTOL * (1.0 + abs(lam)):
        raise DegenerateSpectrum(f"lambda = {lam!r} collides with a bulk eigenvalue")
    return gaps, float(np.sum(bulk / gaps))


def debias_factor_pca(
    spec: SpectralDecomposition, l: int, r: int, n: int, sigma2: float | None = None
) -> tuple[float, Branch]:
    """Data-driven correction c_l from the sample-covariance spectrum.

    ``spec`` decomposes the p x p sample covariance by value descending;
    ``n`` is the sample count.  ``sigma2`` is only consulted in the n < p
    branch (and required there).  Returns ``(c_l, branch)``.
    """
    _check_pca_index(spec, l, r, n)
    p = spec.dim
    lam = spec.eigenvalue(l)
    padded = _padded_spectrum(spec, n)
    bulk = padded[r:]
    gaps, s1 = _bulk_sums(lam, bulk)
    denom = n + s1
    if denom <= 0.0:
        raise DegenerateSpectrum(f"resolvent denominator n + sum = {denom!r} <= 0")

    if n >= p:
        s2 = float(np.sum(bulk / gaps**2))
        return float(lam / denom * s2), Branch.N_GE_P

    if sigma2 is None:
        raise InvalidInput("sigma2 is required in the n < p branch")
    if not (np.isfinite(sigma2) and sigma2 >= 0.0):
        raise InvalidInput(f"sigma2 must be >= 0, got {sigma2}")
    shift = sigma2 * p / n
    if lam <= shift:
        raise DegenerateSpectrum(
            f"lambda = {lam!r} does not exceed sigma^2 p / n = {shift!r}"
        )
    s3 = float(np.sum((bulk - shift) / gaps**2))
    c = shift / (lam - shift) + lam / (lam - shift) * (lam / denom) * s3
    return float(c), Branch.N_LT_P


@dataclass(frozen=True)
class FunctionalEstimatePCA:
    """Plug-in and de-biased estimates of <a, u_l> from one data panel.

    ``debiased`` is exactly ``factor * plugin`` with
    ``factor = sqrt(1 + correction)``.
    """

    l: int
    lambda_l: float
    plugin: float
    correction: float
    factor: float
    debiased: float
    branch: Branch


def estimate_functional_pca(
    data, a, l: int, r: int, sigma2: float | None = None
) -> FunctionalEstimatePCA:
    """Estimate <a, u_l> of the sample covariance and de-bias it.

    ``sigma2`` may be omitted when n >= p; the wide-data branch needs it.
    """
    s = np.asarray(data, dtype=float)
    if s.ndim != 2:
        raise InvalidInput(f"data must be a p x n matrix, got shape {s.shape}")
    p, n = s.shape
    a = check_unit_vector(a, p)
    spec = eigendecompose(sample_covariance(s), Ordering.BY_VALUE_DESC)
    correction, branch = debias_factor_pca(spec, l, r, n, sigma2)
    if correction < 0.0 and branch is Branch.N_GE_P:
        # Cannot happen for a genuine covariance spectrum (all terms are
        # nonnegative there); guard against silent misuse on synthetic input.
        raise DegenerateSpectrum(f"negative correction {correction!r} in the n >= p branch")
    plugin = float(a @ spec.eigenvector(l))
    factor = math.sqrt(1.0 + correction)
    return FunctionalEstimatePCA(
        l=l,
        lambda_l=spec.eigenvalue(l),
        plugin=plugin,
        correction=correction,
        factor=factor,
        debiased=factor * plugin,
        branch=branch,
    )


def mp_debias(lambda_l: float, sigma2: float, n: int, p: int) -> float:
    """Marchenko-Pastur limit of the correction c_l at spike location
    ``lambda_l``.

    Each bulk sum of a function g over sample eigenvalues is replaced by
    p * integral of g against the bulk law (the law's total bulk mass is
    min(1, n/p), so this matches the min(n, p) nonzero eigenvalues plus the
    zero-padding convention).  ``lambda_l`` must lie strictly outside the
    bulk support.  Quadrature absolute tolerance is 1e-8 per integral.
    """
    if n < 1 or p < 1:
        raise InvalidInput(f"n and p must be >= 1, got n={n}, p={p}")
    if not (np.isfinite(sigma2) and sigma2 >= 0.0):
        raise InvalidInput(f"sigma2 must be >= 0, got {sigma2}")
    lam = float(lambda_l)
    if sigma2 == 0.0:
        return 0.0
    law = NoiseSpectrumLaw.marchenko_pastur(sigma2, n, p)
    margin = MP_EDGE_MARGIN * sigma2
    if law.lam_minus - margin <= lam <= law.lam_plus + margin:
        raise OutsideBulkRequired(
            f"lambda = {lam!r} lies inside the bulk support "
            f"[{law.lam_minus!r}, {law.lam_plus!r}]"
        )
    i1 = law.integrate(lambda x: x / (lam - x))
    denom = n + p * i1
    if denom <= 0.0:
        raise DegenerateSpectrum(f"resolvent denominator n + p*I1 = {denom!r} <= 0")

    if n >= p:
        i2 = law.integrate(lambda x: x / (lam - x) ** 2)
        return float(lam / denom * (p * i2))

    shift = sigma2 * p / n
    if lam <= shift:
        raise DegenerateSpectrum(
            f"lambda = {lam!r} does not exceed sigma^2 p / n = {shift!r}"
        )
    i3 = law.integrate(lambda x: (x - shift) / (lam - x) ** 2)
    return float(shift / (lam - shift) + lam / (lam - shift) * (lam / denom) * (p * i3))


def shrink_eigenvalue(spec: SpectralDecomposition, l: int, r: int, n: int) -> float:
    """Data-driven eigenvalue shrinkage lam_l / (1 + beta_hat) with

        beta_hat = (1/n) * sum_{r < i <= n} lam_i / (lam_l - lam_i)

    (zero-padded like the correction sums).  The result estimates the
    signal eigenvalue plus noise variance.
    """
    _check_pca_index(spec, l, r, n)
    lam = spec.eigenvalue(l)
    bulk = _padded_spectrum(spec, n)[r:]
    _, s1 = _bulk_sums(lam, bulk)
    denom = 1.0 + s1 / n
    if denom <= 0.0:
        raise DegenerateSpectrum(f"shrinkage denominator {denom!r} <= 0")
    return float(lam / denom)


def estimate_noise_pca(spec: SpectralDecomposition, r: int, n: int) -> float:
    """Noise variance estimate: mean of the min(n, p) - r bulk sample
    eigenvalues, rescaled by n/p when p > n (the nonzero bulk then averages
    sigma^2 p / n rather than sigma^2).  Heuristic plumbing; no guarantee."""
    if spec.ordering is not Ordering.BY_VALUE_DESC:
        raise InvalidInput("decomposition must be ordered by value descending")
    p = spec.dim
    m = min(n, p)
    if not 0 <= r < m:
        raise InvalidInput(f"r must satisfy 0 <= r < min(n, p), got r={r}, min={m}")
    est = float(np.mean(spec.eigenvalues[r:m]))
    if p > n:
        est *= n / p
    return est


@dataclass(frozen=True)
class OracleBiasDiagnosticsPCA:
    """Oracle shrinkage diagnostics at one evaluation point.

    ``shrunk = lam / (1 + beta)`` estimates the signal eigenvalue plus the
    noise variance; ``residual`` is filled when the true signal eigenvalue
    was supplied.
    """

    lam: float
    beta: float
    shrunk: float
    residual: float | None


def beta_oracle(
    model: SpikedModel, data, lam: float, lambda_star: float | None = None
) -> OracleBiasDiagnosticsPCA:
    """Oracle bias beta(lam) from data compressed onto the orthogonal
    complement of the signal frame:

        beta(lam) = (1/n) tr[ B (lam I - B)^{-1} ],  B = (1/n) S_perp S_perp^T.

    Requires knowing the signal frame, hence "oracle"."""
    s = np.asarray(data, dtype=float)
    if s.ndim != 2 or s.shape[0] != model.p:
        raise InvalidInput(f"data must be p x n with p={model.p}, got shape {s.shape}")
    if s.shape[1] != model.n:
        raise InvalidInput(f"data has n={s.shape[1]} columns, model expects {model.n}")
    n = model.n
    u_perp = orthonormal_complement(model.U_star)
    s_perp = u_perp.T @ s
    b = s_perp @ s_perp.T / n
    mu = np.linalg.eigvalsh((b + b.T) / 2.0)
    gaps = lam - mu
    if np.min(np.abs(gaps)) <= COLLISION_RTOL * (1.0 + abs(lam)):
        raise DegenerateSpectrum(f"lam = {lam!r} collides with a compressed bulk eigenvalue")
    beta = float(np.sum(mu / gaps) / n)
    denom = 1.0 + beta
    if denom <= 0.0:
        raise DegenerateSpectrum(f"shrinkage denominator {denom!r} <= 0")
    shrunk = float(lam) / denom
    residual = (
        abs(shrunk - (float(lambda_star) + model.sigma2)) if lambda_star is not None else None
    )
    return OracleBiasDiagnosticsPCA(lam=float(lam), beta=beta, shrunk=shrunk, residual=residual)


def noise_condition_pca(model: SpikedModel) -> bool:
    """Sampling-noise smallness gate (constant set to 1): the spectral-norm
    fluctuation scale must stay below lambda_min* / log^2 n."""
    n, p = model.n, model.p
    log_n2 = math.log(n) ** 2
    lam_max, sigma2 = model.lambda_max_star, model.sigma2
    lhs = (
        lam_max * math.sqrt(model.r / n)
        + math.sqrt(lam_max * sigma2 * p / n)
        + sigma2 * (p / n + math.sqrt(p / n))
    )
    return lhs <= model.lambda_min_star / log_n2


def eigengap_condition_pca(model: SpikedModel, l: int) -> bool:
    """Eigengap gate (constant set to 1): the gap around spike ``l`` must
    exceed (lambda_max* + sigma^2) sqrt(r/n) log n."""
    rhs = (
        (model.lambda_max_star + model.sigma2)
        * math.sqrt(model.r / model.n)
        * math.log(model.n)
    )
    return model.delta_star(l) > rhs


@dataclass(frozen=True)
class TheoryBoundsPCA:
    """Evaluated error bounds for one (model, a, l) triple, plus the two
    feasibility gates."""

    e_estimate: float
    e_bias: float
    noise_ok: bool
    eigengap_ok: bool


def bounds_pca(model: SpikedModel, a, l: int, lambda_max_emp: float) -> TheoryBoundsPCA:
    """Evaluate the PCA error bounds at unit direction ``a`` and spike ``l``.

    ``lambda_max_emp`` is the top sample-covariance eigenvalue; it enters
    only through a logarithmic factor.
    """
    a = check_unit_vector(a, model.p)
    if not 1 <= l <= model.r:
        raise InvalidInput(f"l must be in 1..{model.r}, got {l}")
    if not (np.isfinite(lambda_max_emp) and lambda_max_emp > 0):
        raise InvalidInput(f"lambda_max_emp must be positive, got {lambda_max_emp}")

    n, p, r = model.n, model.p, model.r
    sigma2 = model.sigma2
    kappa = model.kappa
    lam_max = model.lambda_max_star
    overlaps = model.U_star.T @ a
    ip_l = abs(float(overlaps[l - 1]))
    lam_l = float(model.eigvals_star[l - 1])
    delta = model.delta_star(l)
    log_arg = n * kappa * lambda_max_emp / delta
    if log_arg <= 1.0:
        raise InvalidInput(f"log factor undefined: n kappa lambda_max / delta = {log_arg!r} <= 1")
    big_l = math.log(log_arg)
    log_n = math.log(n)

    cross = 0.0
    for k in range(1, r + 1):
        if k == l:
            continue
        cross += abs(float(overlaps[k - 1])) / (
            abs(lam_l - float(model.eigvals_star[k - 1])) * math.sqrt(n)
        )

    e_estimate = (
        (lam_max + sigma2) * (lam_l + sigma2) * r * log_n / (delta**2 * n) * ip_l
        + math.sqrt((lam_max + sigma2) * sigma2 * kappa**2 * r / (lam_l**2 * n)) * log_n**2
        + cross * math.sqrt((lam_l + sigma2) * (lam_max + sigma2) * (kappa**2 + r) * big_l)
    )
    e_bias = (lam_l + sigma2) * sigma2 * p / (lam_l**2 * n) * ip_l
    return TheoryBoundsPCA(
        e_estimate=float(e_estimate),
        e_bias=float(e_bias),
        noise_ok=noise_condition_pca(model),
        eigengap_ok=eigengap_condition_pca(model, l),
    )
