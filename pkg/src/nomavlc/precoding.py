"""Per-user precoder construction from channel singular values.

The workhorse precoder is P = V diag(s_g^(exponent-1)) built from the
channel SVD: the effective channel becomes U diag(s_g^exponent), a virtual
parallel channel whose strength is tuned per user by the exponent. Zero
singular values map to zero for any exponent (rank truncation). A QR
variant triangularizes one favored user's effective channel, and a
zero-forcing pseudo-inverse precoder serves as the classical baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ChannelSvd


@dataclass
class Precoder:
    """Transmit matrix with its exponent, variant tag and non-negativity bias."""

    matrix: np.ndarray
    exponent: float
    variant: str = "svd"
    bias: float = field(init=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("precoder matrix has non-finite entries")
        self.bias = bias_offset(self.matrix)

    def scaled(self, gain: float) -> "Precoder":
        return Precoder(matrix=gain * self.matrix, exponent=self.exponent, variant=self.variant)


@dataclass
class LambdaPlan:
    """Per-user exponents keeping exponent * log(strength) constant."""

    exponents: list[float]
    strengths: list[float]
    constant: float


def _sigma_power(s: np.ndarray, rank: int, expo: float) -> np.ndarray:
    """diag entries s_g^expo on the rank support, zero beyond (no poles)."""
    out = np.zeros_like(np.asarray(s, dtype=float))
    out[:rank] = np.asarray(s[:rank], dtype=float) ** expo
    return out


def svd_precoder(
    svd: ChannelSvd, exponent: float, variant: str = "svd", rank: int | None = None
) -> Precoder:
    """P = V diag(s_1^(exponent-1), ..., s_c^(exponent-1), 0, ...).

    rank caps the support below the channel's own numerical rank, which
    keeps noisy trailing singular estimates out of the transmit matrix.
    """
    if svd.rank < 1:
        raise ValueError("channel has rank zero; cannot build a precoder")
    c = svd.rank if rank is None else min(rank, svd.rank)
    d = _sigma_power(svd.s, c, exponent - 1.0)
    n = svd.v.shape[0]
    diag = np.zeros(n)
    diag[: d.size] = d
    return Precoder(matrix=svd.v @ np.diag(diag), exponent=exponent, variant=variant)


def effective_channel(svd: ChannelSvd, exponent: float) -> np.ndarray:
    """U diag(s^exponent): what the user sees after H P with P = V diag(s^(exponent-1))."""
    m, n = svd.u.shape[0], svd.v.shape[0]
    sig = np.zeros((m, n))
    np.fill_diagonal(sig, _sigma_power(svd.s, svd.rank, exponent))
    return svd.u @ sig


def assign_lambdas(strengths: list[float], seed_exponent: float = 1.0) -> LambdaPlan:
    """Chain rule exponent_{u+1} = exponent_u * log(S_u) / log(S_{u+1}).

    Keeps exponent_u * log(S_u) equal to the seed product for every user.
    Strengths equal to 1 are rejected (log zero in the recursion).
    """
    if not strengths:
        raise ValueError("need at least one channel strength")
    logs = []
    for i, s in enumerate(strengths):
        if s <= 0:
            raise ValueError(f"strength of user {i} must be positive, got {s}")
        if s == 1.0:
            raise ValueError(f"strength of user {i} equals 1; exponent recursion undefined")
        logs.append(np.log(s))
    exps = [seed_exponent]
    for i in range(1, len(strengths)):
        exps.append(exps[-1] * logs[i - 1] / logs[i])
    return LambdaPlan(exponents=exps, strengths=list(strengths), constant=seed_exponent * logs[0])


def bias_offset(P: np.ndarray) -> float:
    """Largest l1 norm over rows of P.

    Adding offset*(1+1j) to the precoded vector keeps both rails
    nonnegative whenever the constellation rails lie in [-1, 1].
    """
    P = np.asarray(P, dtype=float)
    return float(np.max(np.sum(np.abs(P), axis=1)))


def qr_enhance(
    precoders: list[Precoder], svds: list[ChannelSvd], favored: int
) -> tuple[list[Precoder], np.ndarray]:
    """Right-multiply every precoder by the orthogonal factor that makes the
    favored user's effective channel lower triangular.

    The factor Q comes from the QR decomposition of (U diag(s^exponent))^T
    for the favored user; a rank-deficient factorization is reported.
    """
    if not 0 <= favored < len(precoders):
        raise ValueError(f"favored user index {favored} out of range")
    A = effective_channel(svds[favored], precoders[favored].exponent)
    if not np.any(A):
        raise ValueError("favored user's effective channel is zero; QR factor undefined")
    q, r = np.linalg.qr(A.T)
    enhanced = [
        Precoder(matrix=p.matrix @ q, exponent=p.exponent, variant=p.variant + "+qr")
        for p in precoders
    ]
    return enhanced, q


def zf_precoder(H: np.ndarray, rank: int | None = None) -> Precoder:
    """Pseudo-inverse precoder scaled to Frobenius norm sqrt(M_T).

    With rank=None the channel must have full row rank so the effective
    channel is a scaled identity; passing rank=c inverts only the top-c
    singular directions (the baseline on rank-deficient indoor links).
    """
    H = np.asarray(H, dtype=float)
    u, s, vt = np.linalg.svd(H)
    if rank is None:
        if s[-1] < 1e-12 * s[0]:
            raise ValueError("channel is rank deficient; zero-forcing undefined")
        rank = s.size
    inv = np.zeros_like(s)
    inv[:rank] = 1.0 / s[:rank]
    P = vt.T[:, : s.size] @ np.diag(inv) @ u.T[: s.size]
    P *= np.sqrt(H.shape[1]) / np.linalg.norm(P, "fro")
    return Precoder(matrix=P, exponent=1.0, variant="zero-forcing")


def precoder_csv(p: Precoder, user_id: int) -> str:
    lines = [f"# user={user_id} lambda={p.exponent:.10g} variant={p.variant} bias={p.bias:.10g}"]
    for row in p.matrix:
        lines.append(",".join(f"{x:.10g}" for x in row))
    return "\n".join(lines) + "\n"
