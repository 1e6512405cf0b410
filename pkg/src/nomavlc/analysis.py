"""Analytic performance oracles for the superposed M-QAM downlink.

The composite-modulus ladder tracks, layer by SIC layer, the magnitudes
of all partial superpositions sum_{v<=b} sqrt(P_v) s_v. Consecutive-layer
modulus gaps feed Gaussian tail terms that upper-bound the bit error
rate of square M-QAM under SIC, with the effective noise variance taken
from the equalized-link budget (optionally augmented by CSI estimation
error). A Gibbs-sampling routine checks numerically that the exponent
assignment maximizes the admission rate gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .noma import Constellation


def q_func(z):
    """Standard Gaussian tail Q(z) = 0.5 erfc(z / sqrt(2))."""
    return 0.5 * erfc(np.asarray(z, dtype=float) / math.sqrt(2.0))


def composite_modulus(mu: float, amplitude: float, relative_phase: float) -> float:
    """|mu + amplitude e^{j phase}| for a real composite of modulus mu.

    This is the scalar layer recursion: adding one constellation vector of
    the given amplitude at the given phase relative to the composite.
    """
    return math.sqrt(mu * mu + amplitude * amplitude + 2.0 * mu * amplitude * math.cos(relative_phase))


@dataclass
class LadderLayer:
    """Composites of one SIC layer with the moduli of their parents."""

    composites: np.ndarray  # complex partial sums, length M^b
    parent_moduli: np.ndarray

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.composites)


@dataclass
class MuLadder:
    """Layered composite-modulus sets; layer b holds all b-user partial sums."""

    M: int
    powers: list[float]
    layers: list[LadderLayer]

    @property
    def num_layers(self) -> int:
        return len(self.layers)


def mu_ladder(constellation: Constellation, powers: list[float]) -> MuLadder:
    """Build the ladder layer by layer via vector addition.

    Layer 1 is the scaled constellation; layer b+1 adds the next layer's
    scaled constellation to every composite of layer b, enumerating all
    pairs. Powers are given in SIC order (strongest layer first).
    """
    if not powers:
        raise ValueError("need at least one layer power")
    points = constellation.points()
    layers: list[LadderLayer] = []
    prev = np.zeros(1, dtype=complex)
    for p in powers:
        add = np.sqrt(p) * points
        composites = (prev[:, None] + add[None, :]).ravel()
        parents = np.repeat(np.abs(prev), points.size)
        layers.append(LadderLayer(composites=composites, parent_moduli=parents))
        prev = composites
    return MuLadder(M=constellation.M, powers=list(powers), layers=layers)


def ber_sqrt_m(ladder: MuLadder, sigma2: float) -> float:
    """Tail-sum bound for the equivalent sqrt(M)-PAM bit error probability.

    P = 2 (sqrt(M)-1)/sqrt(M) * sum over layers and entries of
    Q(sqrt((mu - mu_parent)^2 / sigma2)), clamped to [0, 1]. Each entry
    pairs with the parent composite it grew from; the first layer pairs
    against modulus zero. sigma2 = 0 returns the zero-noise limit.
    """
    if sigma2 < 0:
        raise ValueError(f"noise variance must be nonnegative, got {sigma2}")
    if sigma2 == 0.0:
        return 0.0
    root_m = math.sqrt(ladder.M)
    total = 0.0
    for layer in ladder.layers:
        gaps = layer.moduli - layer.parent_moduli
        total += float(np.sum(q_func(np.sqrt(gaps * gaps / sigma2))))
    p = 2.0 * (root_m - 1.0) / root_m * total
    return min(1.0, max(0.0, p))


def ber_qam(p_sqrt_m: float) -> float:
    """Square M-QAM error from the per-rail PAM error: 1 - (1 - P)^2."""
    if not 0.0 <= p_sqrt_m <= 1.0:
        raise ValueError(f"P must lie in [0, 1], got {p_sqrt_m}")
    return 1.0 - (1.0 - p_sqrt_m) ** 2


def _trace_inverse_sq(singular_values: np.ndarray, rank: int) -> float:
    s = np.asarray(singular_values, dtype=float)[:rank]
    if np.any(s <= 0):
        raise ValueError("singular values on the rank support must be positive")
    return float(np.sum(1.0 / (s * s)))


def sigma_o_prime(
    sigma_o2: float,
    sigma_gamma2: float,
    exponent: float,
    s_transmit: np.ndarray,
    s_receive: np.ndarray,
    rank: int,
    mean_x_power: float,
) -> float:
    """Effective noise with CSI estimation error at both link ends.

    sigma_o'^2 = sigma_o^2
               + sigma_gamma2 * exponent^2     * Tr(S_rx^-T S_rx^-1) * E||x||^2
               + sigma_gamma2 * (1-exponent)^2 * Tr(S_tx^-T S_tx^-1) * E||x||^2
    with traces over the rank support. Equals sigma_o^2 iff sigma_gamma2 = 0.
    """
    rx = _trace_inverse_sq(s_receive, rank)
    tx = _trace_inverse_sq(s_transmit, rank)
    return sigma_o2 + sigma_gamma2 * mean_x_power * (exponent**2 * rx + (1.0 - exponent) ** 2 * tx)


def sum_rate(sinrs: list[float]) -> float:
    """Shannon sum rate sum_u log2(1 + Gamma_u) in bits per channel use."""
    return float(sum(math.log2(1.0 + g) for g in sinrs))


@dataclass
class TheoremReport:
    """Outcome of the Gibbs-sampled rate-gap inequality check."""

    kappa: float
    left: float
    right: float
    std_error: float
    holds: bool
    entropy: float
    log_z: float
    mean_dlambda: float
    degenerate: bool


def verify_theorem1(
    sigmas_b: np.ndarray,
    sigmas_bprime: np.ndarray,
    kappa: float,
    n_samples: int,
    rng: np.random.Generator,
    grid_points: int = 10_000,
    support_mult: float = 10.0,
) -> TheoremReport:
    """Check E[rate gap] >= K + sum_g sigma_g^{2 kappa (H - log Z)} by sampling.

    The exponent increment is drawn from a Gibbs density ~ exp(-d/kappa)
    truncated to [0, support_mult * kappa] and discretized on a uniform
    grid. The left side averages the high-SNR rate-gap expression over
    the samples; the right side plugs the sampled entropy into the bound.
    Requires positive channel strengths with log-strength > 0.
    """
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if grid_points < 2:
        raise ValueError("degenerate sampling support: need at least two grid points")
    sb = np.asarray(sigmas_b, dtype=float)
    sp = np.asarray(sigmas_bprime, dtype=float)
    if sb.shape != sp.shape or np.any(sb <= 0) or np.any(sp <= 0):
        raise ValueError("singular-value sets must be positive and equally sized")
    strength_b = float(np.sum(sb * sb))
    if math.log(strength_b) <= 0:
        raise ValueError("log channel strength must be positive for this check")
    lam_b = kappa / math.log(strength_b)

    grid = np.linspace(0.0, support_mult * kappa, grid_points)
    weights = np.exp(-grid / kappa)
    z = float(weights.sum())
    probs = weights / z
    samples = rng.choice(grid, size=n_samples, p=probs)

    mean_d = float(samples.mean())
    entropy = mean_d / kappa + math.log(z)  # -E[log p] under the discrete Gibbs law
    bound_exponent = 2.0 * kappa * (entropy - math.log(z))

    k_const = float(np.sum((sb / sp) ** (2.0 * lam_b)))
    gap_terms = np.sum(sp[None, :] ** (2.0 * samples[:, None]), axis=1)
    left = k_const + float(gap_terms.mean())
    se = float(gap_terms.std(ddof=1) / math.sqrt(n_samples))
    right = k_const + float(np.sum(sp**bound_exponent))

    degenerate = bool(np.allclose(sb, sp))
    return TheoremReport(
        kappa=kappa,
        left=left,
        right=right,
        std_error=se,
        holds=left >= right - 3.0 * se,
        entropy=entropy,
        log_z=math.log(z),
        mean_dlambda=mean_d,
        degenerate=degenerate,
    )
