"""Lambertian line-of-sight MIMO channel generation for indoor optical links.

Ceiling-mounted LEDs face straight down, photodiodes face straight up.
Coordinates use the ceiling center as origin with z increasing upward,
so PDs on the floor of a 3 m room sit at z = -3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RANK_REL_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for physically invalid geometry (positions, angles, areas)."""


@dataclass
class RoomGeometry:
    """Room box, LED placement and emission half-angle.

    room_dims : (x, y, z) extents in meters
    led_positions : one 3-vector per LED, relative to the ceiling center
    half_angle : LED emission half-angle in radians, 0 < half_angle < pi/2
    """

    room_dims: tuple[float, float, float]
    led_positions: list[tuple[float, float, float]]
    led_height: float
    half_angle: float
    ceiling_center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.half_angle < math.pi / 2:
            raise GeometryError(f"half_angle must lie in (0, pi/2), got {self.half_angle}")
        w, dpt, h = self.room_dims
        if min(w, dpt, h) <= 0:
            raise GeometryError(f"room dimensions must be positive, got {self.room_dims}")
        for p in self.led_positions:
            x, y, z = p
            if abs(x) > w / 2 or abs(y) > dpt / 2 or not -h <= z <= 0:
                raise GeometryError(f"LED position {p} outside room bounds {self.room_dims}")
            if abs((h + z) - self.led_height) > 1e-9:
                raise GeometryError(
                    f"LED at {p} sits {h + z:.4f} m above the floor, expected led_height={self.led_height}"
                )


@dataclass
class UserGeometry:
    """Photodiode array of one user: positions, active area and field of view."""

    pd_positions: list[tuple[float, float, float]]
    pd_area: float
    fov: float

    def __post_init__(self):
        if self.pd_area <= 0:
            raise GeometryError(f"pd_area must be positive, got {self.pd_area}")
        if not 0.0 < self.fov <= math.pi / 2:
            raise GeometryError(f"fov must lie in (0, pi/2], got {self.fov}")
        if not self.pd_positions:
            raise GeometryError("user needs at least one photodiode")


def lambertian_order(half_angle: float) -> float:
    """Emission order kappa = -ln 2 / ln(cos(half_angle))."""
    if not 0.0 < half_angle < math.pi / 2:
        raise GeometryError(f"half_angle must lie in (0, pi/2), got {half_angle}")
    return -math.log(2.0) / math.log(math.cos(half_angle))


def radiant_intensity(order: float, phi: float) -> float:
    """Lambertian radiant intensity R(phi) = (kappa+1) cos^kappa(phi) / (2 pi)."""
    if order <= 0:
        raise GeometryError(f"Lambertian order must be positive, got {order}")
    if not 0.0 <= phi <= math.pi / 2:
        raise GeometryError(f"emission angle must lie in [0, pi/2], got {phi}")
    return (order + 1.0) * math.cos(phi) ** order / (2.0 * math.pi)


def build_channel_matrix(room: RoomGeometry, user: UserGeometry) -> np.ndarray:
    """Line-of-sight gain matrix of shape (num PDs, num LEDs).

    Entry (i, j) is A_e / (d^2 sin^2 fov) * R(phi) * cos(theta) for the
    link from LED j to PD i, and exactly 0 outside the field of view.
    LED axes point down, PD axes point up, so the emergence and incidence
    angles coincide for any LED above the PD plane.
    """
    order = lambertian_order(room.half_angle)
    sin2 = math.sin(user.fov) ** 2
    n_pd, n_led = len(user.pd_positions), len(room.led_positions)
    H = np.zeros((n_pd, n_led))
    for i, pd in enumerate(user.pd_positions):
        for j, led in enumerate(room.led_positions):
            v = np.asarray(pd, dtype=float) - np.asarray(led, dtype=float)
            d = float(np.linalg.norm(v))
            if d == 0.0:
                raise GeometryError(f"PD {i} coincides with LED {j}")
            cos_phi = -v[2] / d  # angle to the downward LED axis
            cos_theta = cos_phi  # upward PD axis sees the same angle
            if cos_phi <= 0.0:
                continue  # PD behind the LED plane
            phi = math.acos(min(1.0, cos_phi))
            if phi >= user.fov:
                continue
            H[i, j] = user.pd_area / (d * d * sin2) * radiant_intensity(order, phi) * cos_theta
    return H


def perturb_channel(
    H: np.ndarray, sigma_gamma2: float, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Add i.i.d. zero-mean Gaussian estimation error of variance sigma_gamma2.

    Returns the perturbed matrix and the spectral norm of the realized error.
    """
    if sigma_gamma2 < 0:
        raise ValueError(f"sigma_gamma2 must be nonnegative, got {sigma_gamma2}")
    if sigma_gamma2 == 0.0:
        return H.copy(), 0.0
    err = rng.normal(0.0, math.sqrt(sigma_gamma2), size=H.shape)
    return H + err, float(np.linalg.norm(err, 2))


def numerical_rank(singular_values: np.ndarray, rel_tol: float = RANK_REL_TOL) -> int:
    """Count singular values above rel_tol times the largest one."""
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


@dataclass
class ChannelSvd:
    """Full SVD H = U diag(s) V^T with the numerical rank of the support."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray  # right factor, columns are right singular vectors
    rank: int

    @classmethod
    def of(cls, H: np.ndarray) -> "ChannelSvd":
        u, s, vt = np.linalg.svd(H, full_matrices=True)
        return cls(u=u, s=s, v=vt.T, rank=numerical_rank(s))

    def reconstruct(self) -> np.ndarray:
        m, n = self.u.shape[0], self.v.shape[0]
        sigma = np.zeros((m, n))
        np.fill_diagonal(sigma, self.s)
        return self.u @ sigma @ self.v.T

    def strength(self) -> float:
        """Sum of squared singular values on the rank support."""
        return float(np.sum(self.s[: self.rank] ** 2))


@dataclass
class ChannelSet:
    """Per-user true and estimated channels with their SVD factors."""

    true: list[np.ndarray]
    estimated: list[np.ndarray]
    true_svd: list[ChannelSvd] = field(default_factory=list)
    est_svd: list[ChannelSvd] = field(default_factory=list)
    sigma_gamma2: float = 0.0

    def __post_init__(self):
        if not self.true_svd:
            self.true_svd = [ChannelSvd.of(H) for H in self.true]
        if not self.est_svd:
            self.est_svd = [ChannelSvd.of(H) for H in self.estimated]

    @property
    def num_users(self) -> int:
        return len(self.true)

    @classmethod
    def build(
        cls,
        room: RoomGeometry,
        users: list[UserGeometry],
        sigma_gamma2: float,
        rng: np.random.Generator,
    ) -> "ChannelSet":
        true = [build_channel_matrix(room, u) for u in users]
        est = [perturb_channel(H, sigma_gamma2, rng)[0] for H in true]
        return cls(true=true, estimated=est, sigma_gamma2=sigma_gamma2)


def channel_csv(H: np.ndarray, user_id: int) -> str:
    """Row-major CSV dump of one channel matrix, one row per PD."""
    lines = [f"# user={user_id} MR={H.shape[0]} MT={H.shape[1]}"]
    for row in H:
        lines.append(",".join(f"{x:.10g}" for x in row))
    return "\n".join(lines) + "\n"
