"""Two-point lower-bound constructions for spiked covariance estimation.

Each construction perturbs the ground-truth covariance into a nearby
alternative whose KL divergence over n samples stays bounded by a constant,
while the parameter of interest (an eigenvalue pair orientation, or the
overlap <a, u_l>) moves by a quantifiable amount.  Small KL with separated
parameters is what makes a minimax lower bound bite, so the pairs carry
their exact KL alongside the two covariances.

The plug-in experiment complements the constructions empirically: on the
additive-noise model it measures how often the *uncorrected* estimator's
error exceeds fixed fractions of its predicted systematic bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import SymmetricMatrix, check_unit_vector, dist, eigendecompose, Ordering
from .denoise import (
    GroundTruthDenoising,
    eigengap_conditions_md,
    estimate_functional_md,
    observe,
)
from .errors import InvalidInput
from .pca import SpikedModel

# Relative floor (times trace/p) below which a covariance eigenvalue counts
# as non-positive-definite.
PD_EIGENVALUE_RTOL = 1e-12

# Tuning constants small enough to keep the perturbations in their valid
# range; 0 is allowed as a degenerate diagnostic (identical hypotheses).
ALLOWED_TUNING = (0.0, 1.0 / 64.0, 1.0 / 16.0, 1.0 / 4.0)

# Thresholds (fractions c of the predicted plug-in bias) probed by the
# plug-in lower-bound experiment.
PLUGIN_THRESHOLDS = (0.25, 0.5, 1.0)


def gaussian_kl(sigma0: SymmetricMatrix, sigma1: SymmetricMatrix) -> float:
    """KL divergence between centered Gaussians, reference first:

        KL( N(0, sigma1) || N(0, sigma0) )
            = (1/2) [ tr(sigma0^{-1} sigma1) - p
                      + log det sigma0 - log det sigma1 ].

    Both matrices must be positive definite (smallest eigenvalue above
    ``PD_EIGENVALUE_RTOL * trace / p``), else :class:`InvalidInput`.
    Computed from eigendecompositions for numerical transparency.
    """
    if sigma0.dim != sigma1.dim:
        raise InvalidInput(f"dimension mismatch: {sigma0.dim} vs {sigma1.dim}")
    p = sigma0.dim
    spec0 = eigendecompose(sigma0, Ordering.BY_VALUE_DESC)
    spec1 = eigendecompose(sigma1, Ordering.BY_VALUE_DESC)
    for name, spec, mat in (("sigma0", spec0, sigma0), ("sigma1", spec1, sigma1)):
        floor = PD_EIGENVALUE_RTOL * float(np.trace(mat.entries)) / p
        if float(spec.eigenvalues[-1]) <= floor:
            raise InvalidInput(
                f"{name} is not positive definite: min eigenvalue "
                f"{float(spec.eigenvalues[-1])!r}"
            )
    logdet0 = float(np.sum(np.log(spec0.eigenvalues)))
    logdet1 = float(np.sum(np.log(spec1.eigenvalues)))
    b = spec0.eigenvectors.T @ sigma1.entries @ spec0.eigenvectors
    trace_term = float(np.sum(np.diag(b) / spec0.eigenvalues))
    return 0.5 * (trace_term - p + logdet0 - logdet1)


class PairKind(Enum):
    ROTATION = "rotation"
    DIRECTION = "direction"


@dataclass(frozen=True)
class HypothesisPair:
    """A null/alternative covariance pair with its exact n-sample KL.

    ``Sigma0`` is the ground-truth covariance (signal plus noise),
    ``Sigma1`` the perturbed alternative.  ``theta_n`` is the rotation
    angle (rotation pairs), ``delta_n`` the direction offset (direction
    pairs); the unused field is None.
    """

    kind: PairKind
    l: int
    k: int | None
    c_n: float
    n: int
    theta_n: float | None
    delta_n: float | None
    kl: float
    Sigma0: SymmetricMatrix
    Sigma1: SymmetricMatrix

    def frobenius_gap(self) -> float:
        return float(np.linalg.norm(self.Sigma1.entries - self.Sigma0.entries, "fro"))


def _check_tuning(c_n: float) -> float:
    for allowed in ALLOWED_TUNING:
        if abs(c_n - allowed) <= 1e-12:
            return allowed
    raise InvalidInput(f"c_n must be one of {ALLOWED_TUNING}, got {c_n!r}")


def minimax_sample_size(model: SpikedModel, l: int) -> float:
    """Smallest n (up to constants) at which the two-point perturbations
    around spike ``l`` stay in range: the worst pairwise eigenvalue-contrast
    term, floored by the direction term.  Infinite if some other spike ties
    ``lambda_l*`` exactly."""
    if not 1 <= l <= model.r:
        raise InvalidInput(f"l must be in 1..{model.r}, got {l}")
    lam_l = float(model.eigvals_star[l - 1])
    sigma2 = model.sigma2
    worst = (lam_l + sigma2) * sigma2 / lam_l**2
    for k in range(1, model.r + 1):
        if k == l:
            continue
        lam_k = float(model.eigvals_star[k - 1])
        if lam_k == lam_l:
            return math.inf
        worst = max(worst, (lam_l + sigma2) * (lam_k + sigma2) / (lam_l - lam_k) ** 2)
    return worst


def rotation_pair(model: SpikedModel, l: int, k: int, c_n: float) -> HypothesisPair:
    """Alternative obtained by rotating spikes ``l`` and ``k`` towards each
    other by the angle

        theta_n = c_n sqrt( (lam_l + s2)(lam_k + s2) / ((lam_l - lam_k)^2 n) ),

    which keeps the exact n-sample KL at

        n (lam_l - lam_k)^2 sin^2(theta_n) / (2 (lam_l + s2)(lam_k + s2)).

    Requires distinct spike values, sigma2 > 0, an allowed ``c_n``, and a
    sample size at or above :func:`minimax_sample_size` so |theta_n| <= 1/4.
    """
    c_n = _check_tuning(c_n)
    r = model.r
    if not (1 <= l <= r and 1 <= k <= r) or l == k:
        raise InvalidInput(f"need distinct spike indices in 1..{r}, got l={l}, k={k}")
    lam_l = float(model.eigvals_star[l - 1])
    lam_k = float(model.eigvals_star[k - 1])
    if lam_l == lam_k:
        raise InvalidInput(f"spikes l={l} and k={k} have equal values {lam_l!r}")
    if model.sigma2 <= 0.0:
        raise InvalidInput("rotation pairs need sigma2 > 0 for non-degenerate Gaussians")
    if model.n < minimax_sample_size(model, l):
        raise InvalidInput(
            f"n={model.n} is below the minimax sample size "
            f"{minimax_sample_size(model, l)!r} for spike {l}"
        )
    sigma2 = model.sigma2
    theta = c_n * math.sqrt(
        (lam_l + sigma2) * (lam_k + sigma2) / ((lam_l - lam_k) ** 2 * model.n)
    )

    u = model.U_star
    rotated = u.copy()
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    rotated[:, l - 1] = cos_t * u[:, l - 1] + sin_t * u[:, k - 1]
    rotated[:, k - 1] = -sin_t * u[:, l - 1] + cos_t * u[:, k - 1]
    signal1 = (rotated * model.eigvals_star) @ rotated.T

    eye = np.eye(model.p)
    sigma_null = SymmetricMatrix(model.signal_covariance() + sigma2 * eye)
    sigma_alt = SymmetricMatrix((signal1 + signal1.T) / 2.0 + sigma2 * eye)
    kl = (
        model.n
        * (lam_l - lam_k) ** 2
        * math.sin(theta) ** 2
        / (2.0 * (lam_l + sigma2) * (lam_k + sigma2))
    )
    return HypothesisPair(
        kind=PairKind.ROTATION,
        l=l,
        k=k,
        c_n=c_n,
        n=model.n,
        theta_n=theta,
        delta_n=None,
        kl=float(kl),
        Sigma0=sigma_null,
        Sigma1=sigma_alt,
    )


def direction_pair(model: SpikedModel, l: int, a, c_n: float) -> HypothesisPair:
    """Alternative that tilts spike ``l`` towards the component of ``a``
    outside the signal span:

        u~ = (u_l + delta_n a_perp) / sqrt(1 + delta_n^2),
        delta_n = c_n sqrt( (lam_l + s2) s2 / (lam_l^2 n) ),

    with exact n-sample KL

        n lam_l^2 delta_n^2 / (2 (lam_l + s2) s2 (1 + delta_n^2)).

    ``a`` must have a component outside span(U*) (norm above 1e-9).
    """
    c_n = _check_tuning(c_n)
    if not 1 <= l <= model.r:
        raise InvalidInput(f"l must be in 1..{model.r}, got {l}")
    if model.sigma2 <= 0.0:
        raise InvalidInput("direction pairs need sigma2 > 0 for non-degenerate Gaussians")
    a = check_unit_vector(a, model.p)
    proj = a - model.U_star @ (model.U_star.T @ a)
    proj_norm = float(np.linalg.norm(proj))
    if proj_norm <= 1e-9:
        raise InvalidInput("a lies in the signal span; no outside direction to tilt into")
    a_perp = proj / proj_norm

    lam_l = float(model.eigvals_star[l - 1])
    sigma2 = model.sigma2
    delta = c_n * math.sqrt((lam_l + sigma2) * sigma2 / (lam_l**2 * model.n))
    if delta > 1.0:
        raise InvalidInput(f"delta_n = {delta!r} exceeds 1; increase n or decrease c_n")

    u_l = model.U_star[:, l - 1]
    tilted = (u_l + delta * a_perp) / math.sqrt(1.0 + delta**2)
    signal1 = (
        model.signal_covariance()
        - lam_l * np.outer(u_l, u_l)
        + lam_l * np.outer(tilted, tilted)
    )
    eye = np.eye(model.p)
    sigma_null = SymmetricMatrix(model.signal_covariance() + sigma2 * eye)
    sigma_alt = SymmetricMatrix((signal1 + signal1.T) / 2.0 + sigma2 * eye)
    kl = (
        model.n
        * lam_l**2
        * delta**2
        / (2.0 * (lam_l + sigma2) * sigma2 * (1.0 + delta**2))
    )
    return HypothesisPair(
        kind=PairKind.DIRECTION,
        l=l,
        k=None,
        c_n=c_n,
        n=model.n,
        theta_n=None,
        delta_n=delta,
        kl=float(kl),
        Sigma0=sigma_null,
        Sigma1=sigma_alt,
    )


@dataclass(frozen=True)
class PluginLowerReport:
    """Empirical exceedance probabilities of the raw plug-in error over
    fractions of its predicted bias.  ``probabilities[i]`` is
    P[ dist >= thresholds[i] * bias_scale ] over the trials; nonincreasing
    by construction."""

    bias_scale: float
    thresholds: tuple[float, ...]
    probabilities: tuple[float, ...]
    trials: int
    distances: np.ndarray


def plugin_lower_experiment(
    model: GroundTruthDenoising, a, l: int, trials: int, seed: int
) -> PluginLowerReport:
    """Monte Carlo exceedance study of the uncorrected plug-in estimator.

    The model must pass the de-biasing feasibility gate (the regime where
    the bias prediction is meaningful).  Deterministic in ``seed``; trial t
    uses the spawn key (t,).
    """
    a = check_unit_vector(a, model.n)
    if not 1 <= l <= model.r:
        raise InvalidInput(f"l must be in 1..{model.r}, got {l}")
    if trials < 1:
        raise InvalidInput(f"trials must be >= 1, got {trials}")
    if not eigengap_conditions_md(model, l):
        raise InvalidInput("model fails the de-biasing feasibility conditions")

    truth = float(a @ model.spike_vector(l))
    lam_l = float(model.eigvals_star[l - 1])
    bias_scale = model.sigma**2 * model.n / lam_l**2 * abs(truth)

    distances = np.empty(trials)
    for t in range(trials):
        trial_seed = np.random.SeedSequence(entropy=seed, spawn_key=(t,))
        m = observe(model, trial_seed)
        est = estimate_functional_md(m, a, l, model.r, model.sigma)
        distances[t] = dist(est.plugin, truth)

    # Strict inequality so the noiseless edge case (all distances and all
    # thresholds exactly zero) reports no exceedances; at positive noise the
    # distinction is measure-zero.
    probabilities = tuple(
        float(np.mean(distances > c * bias_scale)) for c in PLUGIN_THRESHOLDS
    )
    return PluginLowerReport(
        bias_scale=bias_scale,
        thresholds=PLUGIN_THRESHOLDS,
        probabilities=probabilities,
        trials=trials,
        distances=distances,
    )
