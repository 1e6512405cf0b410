"""Superposition coding, square M-QAM, QoS power allocation and SIC detection.

Users share the downlink by power-domain superposition x = sum_u sqrt(P_u) s_u.
Power follows the QoS rule P_u = min(1, eps_u (1 + sigma_o^2) / (1 + eps_u))
with eps_u = 2^R_u - 1, admitting users while the unit power budget holds.
Each receiver detects layers in descending allocated power, subtracting
hard re-modulated decisions (errors propagate; no genie).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VALID_QAM_SIZES = (4, 16, 64)


@dataclass
class Constellation:
    """Gray-coded square M-QAM normalized to unit average symbol power."""

    M: int
    rail_levels: np.ndarray = field(init=False)
    bits_per_rail: int = field(init=False)

    def __post_init__(self):
        if self.M not in VALID_QAM_SIZES:
            raise ValueError(f"M must be one of {VALID_QAM_SIZES}, got {self.M}")
        m = int(round(np.sqrt(self.M)))
        self.bits_per_rail = m.bit_length() - 1
        scale = np.sqrt(2.0 * (self.M - 1) / 3.0)  # unit average power
        self.rail_levels = (2.0 * np.arange(m) - (m - 1)) / scale

    @property
    def bits_per_symbol(self) -> int:
        return 2 * self.bits_per_rail

    def points(self) -> np.ndarray:
        """All M constellation points."""
        re, im = np.meshgrid(self.rail_levels, self.rail_levels, indexing="ij")
        return (re + 1j * im).ravel()

    # Rail level index i carries the Gray code of i, so neighbors differ in one bit.
    def _bits_to_level(self, bits: np.ndarray) -> np.ndarray:
        k = self.bits_per_rail
        idx = np.zeros(bits.shape[0], dtype=int)
        for b in range(k):
            idx = (idx << 1) | bits[:, b]
        gray_to_pos = np.argsort(_gray_codes(k))
        return gray_to_pos[idx]

    def _level_to_bits(self, idx: np.ndarray) -> np.ndarray:
        k = self.bits_per_rail
        gray = _gray_codes(k)[idx]
        out = np.zeros((idx.shape[0], k), dtype=np.uint8)
        for b in range(k):
            out[:, b] = (gray >> (k - 1 - b)) & 1
        return out

    def nearest_level(self, rail: np.ndarray) -> np.ndarray:
        m = self.rail_levels.size
        scale = 1.0 / (self.rail_levels[1] - self.rail_levels[0])
        idx = np.rint((rail - self.rail_levels[0]) * scale).astype(int)
        return np.clip(idx, 0, m - 1)


def _gray_codes(k: int) -> np.ndarray:
    n = np.arange(2**k)
    return n ^ (n >> 1)


def qam_modulate(bits: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Map a flat bit array to unit-power QAM symbols (I bits first, then Q)."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    bps = constellation.bits_per_symbol
    if bits.size % bps:
        raise ValueError(f"bit count {bits.size} not divisible by {bps}")
    groups = bits.reshape(-1, bps)
    k = constellation.bits_per_rail
    i_idx = constellation._bits_to_level(groups[:, :k])
    q_idx = constellation._bits_to_level(groups[:, k:])
    return constellation.rail_levels[i_idx] + 1j * constellation.rail_levels[q_idx]


def qam_demodulate(samples: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Nearest-neighbor hard decisions per rail, returning the flat bit array."""
    samples = np.asarray(samples).ravel()
    i_idx = constellation.nearest_level(samples.real)
    q_idx = constellation.nearest_level(samples.imag)
    i_bits = constellation._level_to_bits(i_idx)
    q_bits = constellation._level_to_bits(q_idx)
    return np.concatenate([i_bits, q_bits], axis=1).ravel()


def hard_symbols(samples: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Project samples onto the nearest constellation points."""
    samples = np.asarray(samples)
    i_idx = constellation.nearest_level(samples.real)
    q_idx = constellation.nearest_level(samples.imag)
    return constellation.rail_levels[i_idx] + 1j * constellation.rail_levels[q_idx]


def superpose(symbol_streams: list[np.ndarray], powers: list[float]) -> np.ndarray:
    """x = sum_u sqrt(P_u) s_u with aligned per-component streams."""
    if len(symbol_streams) != len(powers):
        raise ValueError("one power per stream required")
    out = np.zeros_like(np.asarray(symbol_streams[0], dtype=complex))
    for s, p in zip(symbol_streams, powers):
        out = out + np.sqrt(p) * np.asarray(s)
    return out


@dataclass
class NoiseBudget:
    """Effective-noise accounting after equalization.

    sigma_v_prime2 = Tr(Z^T Z) sigma_v2 with Z = (H P)^+,
    sigma_delta2   = (eta / 2) sigma_v_prime2 (NLMS excess error),
    sigma_o2       = (Tr(W^T W) sigma_delta2 + sigma_v_prime2) / alpha^2
    with W = (H P)^+ H.
    """

    sigma_v2: float
    sigma_v_prime2: float
    sigma_delta2: float
    sigma_o2: float
    alpha: float = 1.0


def noise_budget(
    H: np.ndarray,
    P: np.ndarray,
    eta: float,
    sigma_v2: float,
    alpha: float = 1.0,
    rank: int | None = None,
) -> NoiseBudget:
    """Build the effective-noise budget for one user's equalized link.

    By default H P must have full column rank; passing rank=c accepts a
    rank-c support (precoders with truncated trailing columns) and uses
    the pseudo-inverse on that support.
    """
    HP = np.asarray(H) @ np.asarray(P)
    s = np.linalg.svd(HP, compute_uv=False)
    expected = min(HP.shape) if rank is None else rank
    got = int(np.sum(s > 1e-12 * max(s[0], 1e-300)))
    if got < expected:
        raise ValueError(f"H P is rank deficient: rank {got} < expected {expected}")
    Z = np.linalg.pinv(HP)
    W = Z @ np.asarray(H)
    sigma_v_prime2 = float(np.trace(Z.T @ Z)) * sigma_v2
    sigma_delta2 = 0.5 * eta * sigma_v_prime2
    sigma_o2 = (float(np.trace(W.T @ W)) * sigma_delta2 + sigma_v_prime2) / alpha**2
    return NoiseBudget(
        sigma_v2=sigma_v2,
        sigma_v_prime2=sigma_v_prime2,
        sigma_delta2=sigma_delta2,
        sigma_o2=sigma_o2,
        alpha=alpha,
    )


@dataclass
class UserPlan:
    """One admitted user's QoS target, power share and SIC layer."""

    user: int
    rate: float
    epsilon: float
    power: float
    layer: int
    exponent: float = 1.0
    sigma_o2: float = 0.0


@dataclass
class AllocationResult:
    plans: list[UserPlan]
    rejected: list[int]

    @property
    def total_power(self) -> float:
        return sum(p.power for p in self.plans)


def qos_power(rate: float, sigma_o2: float) -> float:
    """Minimum power meeting one user's rate: min(1, eps (1+sigma_o2)/(1+eps))."""
    eps = 2.0**rate - 1.0
    return min(1.0, eps * (1.0 + sigma_o2) / (1.0 + eps))


def allocate_power(
    rates: list[float], sigma_o2s: list[float], exponents: list[float] | None = None
) -> AllocationResult:
    """QoS allocation with opportunistic admission.

    Users are admitted in the given order while the running power total
    stays within the unit budget; the first violator and everyone after
    it are rejected. SIC layers are assigned in descending power with
    ties broken by user id.
    """
    if len(rates) != len(sigma_o2s):
        raise ValueError("need one sigma_o2 per rate")
    exps = exponents if exponents is not None else [1.0] * len(rates)
    plans: list[UserPlan] = []
    rejected: list[int] = []
    total = 0.0
    for u, (r, s2) in enumerate(zip(rates, sigma_o2s)):
        if r < 0:
            raise ValueError(f"rate of user {u} must be nonnegative, got {r}")
        p = qos_power(r, s2)
        if rejected or total + p > 1.0 + 1e-12:
            rejected.append(u)
            continue
        total += p
        plans.append(UserPlan(user=u, rate=r, epsilon=2.0**r - 1.0, power=p, layer=-1,
                              exponent=exps[u], sigma_o2=s2))
    order = sorted(range(len(plans)), key=lambda i: (-plans[i].power, plans[i].user))
    for layer, i in enumerate(order):
        plans[i].layer = layer
    return AllocationResult(plans=plans, rejected=rejected)


def grpa_allocate(strengths: list[float]) -> list[float]:
    """Gain-ratio baseline: P_u proportional to (S_1 / S_u)^u, sum normalized to 1.

    Callers pass strengths sorted by descending need (weakest channel first).
    """
    s = np.asarray(strengths, dtype=float)
    if np.any(s <= 0):
        raise ValueError("strengths must be positive")
    raw = (s[0] / s) ** np.arange(1, s.size + 1)
    return list(raw / raw.sum())


def sinr(plans: list[UserPlan], user: int) -> float:
    """Gamma_u = P_u / (sum of later-layer powers + sigma_o2_u)."""
    me = next(p for p in plans if p.user == user)
    interference = sum(p.power for p in plans if p.layer > me.layer)
    denom = interference + me.sigma_o2
    return float("inf") if denom == 0.0 else me.power / denom


def sic_detect(
    lhat: np.ndarray, plans: list[UserPlan], constellation: Constellation
) -> dict[int, np.ndarray]:
    """Successive cancellation over an equalized, bias-removed stream.

    Layers are detected in descending allocated power; each detected
    layer's sqrt(P) * hard symbols are subtracted before the next.
    Returns hard bits per user id over every stream component.
    """
    residual = np.asarray(lhat, dtype=complex).ravel().copy()
    bits: dict[int, np.ndarray] = {}
    for plan in sorted(plans, key=lambda p: p.layer):
        scaled = residual / np.sqrt(plan.power)
        bits[plan.user] = qam_demodulate(scaled, constellation)
        residual = residual - np.sqrt(plan.power) * hard_symbols(scaled, constellation)
    return bits
