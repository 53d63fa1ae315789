"""Indoor scene, Lambertian line-of-sight channel gains and receiver noise.

Angles are given in degrees at the API boundary and converted to radians
internally. Positions are in metres with the origin at the centre of the
floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ELEMENTARY_CHARGE = 1.602176634e-19  # C

ROOM_DIMS = (5.0, 5.0, 3.0)
RECEIVER_HEIGHT = 0.5


@dataclass(frozen=True)
class LuminaryParams:
    position: tuple[float, float, float]
    semiangle_half_deg: float = 60.0
    conversion_factor: float = 2.0  # W/A

    def __post_init__(self):
        if not 0.0 < self.semiangle_half_deg < 90.0:
            raise ValueError(f"semi-angle must lie in (0, 90) deg, got {self.semiangle_half_deg}")
        if self.conversion_factor <= 0:
            raise ValueError("conversion factor must be positive")


@dataclass(frozen=True)
class ReceiverParams:
    position: tuple[float, float, float]
    active_area: float = 1e-4  # m^2
    fov_deg: float = 60.0
    filter_gain: float = 1.0
    refractive_index: float = 1.5
    responsivity: float = 0.54  # A/W
    orientation: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.active_area <= 0:
            raise ValueError("active area must be positive")
        if not 0.0 < self.fov_deg <= 90.0:
            raise ValueError(f"FOV must lie in (0, 90] deg, got {self.fov_deg}")
        if self.refractive_index < 1.0:
            raise ValueError("refractive index must be >= 1")
        if self.responsivity <= 0:
            raise ValueError("responsivity must be positive")


@dataclass(frozen=True)
class NoiseParams:
    bandwidth: float = 20e6  # Hz
    elementary_charge: float = ELEMENTARY_CHARGE
    ambient_photocurrent: float = 10.93  # A/(m^2 sr)
    preamp_density: float = 5e-12  # A/sqrt(Hz)

    def __post_init__(self):
        for name in ("bandwidth", "elementary_charge", "ambient_photocurrent", "preamp_density"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class Scene:
    luminaries: tuple[LuminaryParams, ...]
    users: tuple[ReceiverParams, ...]
    noise: NoiseParams = field(default_factory=NoiseParams)
    room_dims: tuple[float, float, float] = ROOM_DIMS

    def __post_init__(self):
        object.__setattr__(self, "luminaries", tuple(self.luminaries))
        object.__setattr__(self, "users", tuple(self.users))
        n_t, k = len(self.luminaries), len(self.users)
        if k < 1 or n_t < k:
            raise ValueError(f"need N_T >= K >= 1, got N_T={n_t}, K={k}")
        for obj in self.luminaries + self.users:
            if not _inside(obj.position, self.room_dims):
                raise ValueError(f"position {obj.position} lies outside the room")
        heights = {u.position[2] for u in self.users}
        if len(heights) > 1:
            raise ValueError("all users must lie on the same receiver plane")

    @property
    def n_tx(self) -> int:
        return len(self.luminaries)

    @property
    def n_users(self) -> int:
        return len(self.users)


@dataclass(frozen=True)
class ChannelMatrix:
    """Per-user LoS gains (K x N_T) and noise variances normalised by (gamma*eta)^2."""

    gains: np.ndarray
    noise_vars_effective: np.ndarray

    def __post_init__(self):
        gains = np.array(self.gains, dtype=float)
        nv = np.array(self.noise_vars_effective, dtype=float)
        if gains.ndim != 2 or nv.shape != (gains.shape[0],):
            raise ValueError("gains must be K x N_T and noise variances length K")
        if np.any(gains < 0) or np.any(nv <= 0):
            raise ValueError("gains must be >= 0 and noise variances > 0")
        gains.setflags(write=False)
        nv.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "noise_vars_effective", nv)

    @property
    def n_users(self) -> int:
        return self.gains.shape[0]

    @property
    def n_tx(self) -> int:
        return self.gains.shape[1]


def _inside(pos, room_dims, tol=1e-9) -> bool:
    x, y, z = pos
    lx, ly, lz = room_dims
    return abs(x) <= lx / 2 + tol and abs(y) <= ly / 2 + tol and -tol <= z <= lz + tol


def lambertian_order(semiangle_half_deg: float) -> float:
    """Lambertian order l = -ln 2 / ln(cos(semi-angle at half illuminance))."""
    if not 0.0 < semiangle_half_deg < 90.0:
        raise ValueError(f"semi-angle must lie in (0, 90) deg, got {semiangle_half_deg}")
    order = -math.log(2.0) / math.log(math.cos(math.radians(semiangle_half_deg)))
    # cos(60 deg) evaluates to 0.5000000000000001; snap round-off back onto integers
    if abs(order - round(order)) < 1e-12:
        return float(round(order))
    return order


def emission_intensity(irradiance_deg: float, order: float) -> float:
    return (order + 1.0) / (2.0 * math.pi) * math.cos(math.radians(irradiance_deg)) ** order


def concentrator_gain(incidence_deg: float, fov_deg: float, refractive_index: float) -> float:
    if incidence_deg > fov_deg:
        return 0.0
    return refractive_index**2 / math.sin(math.radians(fov_deg)) ** 2


def channel_gain(luminary: LuminaryParams, receiver: ReceiverParams) -> float:
    """LoS DC gain between one luminary (facing straight down) and one receiver."""
    src = np.asarray(luminary.position, dtype=float)
    dst = np.asarray(receiver.position, dtype=float)
    ray = dst - src
    dist = float(np.linalg.norm(ray))
    if dist == 0.0:
        raise ValueError("luminary and receiver positions coincide")
    unit = ray / dist
    cos_phi = float(np.dot(unit, (0.0, 0.0, -1.0)))
    normal = np.asarray(receiver.orientation, dtype=float)
    normal = normal / np.linalg.norm(normal)
    cos_psi = float(np.dot(-unit, normal))
    if cos_phi <= 0.0 or cos_psi <= 0.0:
        return 0.0
    psi = math.degrees(math.acos(min(cos_psi, 1.0)))
    if psi > receiver.fov_deg:
        return 0.0
    order = lambertian_order(luminary.semiangle_half_deg)
    radiance = (order + 1.0) / (2.0 * math.pi) * cos_phi**order
    g = concentrator_gain(psi, receiver.fov_deg, receiver.refractive_index)
    return receiver.active_area / dist**2 * radiance * receiver.filter_gain * g * cos_psi


def noise_variance(received_power: float, receiver: ReceiverParams, noise: NoiseParams) -> float:
    """Shot + ambient + preamplifier noise variance (A^2) at average received power."""
    e, b = noise.elementary_charge, noise.bandwidth
    gamma = receiver.responsivity
    shot = 2.0 * gamma * e * received_power * b
    ambient = (
        4.0 * math.pi * e * receiver.active_area * gamma * noise.ambient_photocurrent
        * (1.0 - math.cos(math.radians(receiver.fov_deg))) * b
    )
    thermal = noise.preamp_density**2 * b
    return shot + ambient + thermal


def build_channel(scene: Scene, dc_bias) -> ChannelMatrix:
    dc_bias = np.asarray(dc_bias, dtype=float)
    if dc_bias.shape != (scene.n_tx,):
        raise ValueError(f"dc_bias must have length {scene.n_tx}")
    if np.any(dc_bias < 0):
        raise ValueError("dc_bias must be nonnegative")
    gains = np.array([[channel_gain(led, user) for led in scene.luminaries] for user in scene.users])
    for k, row in enumerate(gains):
        if not np.any(row > 0):
            raise ValueError(f"user {k} has no line-of-sight link to any luminary")
    etas = {led.conversion_factor for led in scene.luminaries}
    if len(etas) != 1:
        raise ValueError("all luminaries must share one conversion factor")
    eta = etas.pop()
    nv = np.empty(scene.n_users)
    for k, user in enumerate(scene.users):
        p_rx = eta * float(np.dot(gains[k], dc_bias))
        sigma2 = noise_variance(p_rx, user, scene.noise)
        nv[k] = sigma2 / (user.responsivity * eta) ** 2
    return ChannelMatrix(gains=gains, noise_vars_effective=nv)


def led_layout(kind: str, room_dims=ROOM_DIMS, height: float | None = None) -> list[tuple[float, float, float]]:
    """Luminary positions for the 2x2, 2x3 and 3x3 ceiling grids."""
    lx, ly, lz = room_dims
    z = lz if height is None else height
    if kind == "2x2":
        if tuple(room_dims) == ROOM_DIMS:
            r = math.sqrt(2.0)
            xs, ys = (-r, r), (-r, r)
        else:
            xs = tuple(lx * (f - 0.5) for f in (0.25, 0.75))
            ys = tuple(ly * (f - 0.5) for f in (0.25, 0.75))
    elif kind == "2x3":
        xs = tuple(lx * (f - 0.5) for f in (1 / 6, 1 / 2, 5 / 6))
        ys = tuple(ly * (f - 0.5) for f in (0.25, 0.75))
    elif kind == "3x3":
        xs = tuple(lx * (f - 0.5) for f in (1 / 6, 1 / 2, 5 / 6))
        ys = tuple(ly * (f - 0.5) for f in (1 / 6, 1 / 2, 5 / 6))
    else:
        raise ValueError(f"unknown layout {kind!r}; expected 2x2, 2x3 or 3x3")
    # luminary 1 at (-x, -y), then counter-clockwise for the 2x2 grid
    if kind == "2x2":
        return [(xs[0], ys[0], z), (xs[1], ys[0], z), (xs[1], ys[1], z), (xs[0], ys[1], z)]
    return [(x, y, z) for y in ys for x in xs]


def sample_users(rng_seed, n_users: int, room_dims=ROOM_DIMS, height: float = RECEIVER_HEIGHT):
    """Uniform user drops on the receiver plane.

    ``rng_seed`` may be an int, a sequence of ints or a ``numpy.random.Generator``.
    """
    if n_users < 1:
        raise ValueError("need at least one user")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    lx, ly, _ = room_dims
    xy = rng.uniform(low=(-lx / 2, -ly / 2), high=(lx / 2, ly / 2), size=(n_users, 2))
    return [(float(x), float(y), float(height)) for x, y in xy]


def make_scene(layout: str, user_positions, room_dims=ROOM_DIMS, **overrides) -> Scene:
    """Scene with default optics for every luminary and receiver."""
    led_kw = {k: overrides[k] for k in ("semiangle_half_deg", "conversion_factor") if k in overrides}
    rx_kw = {k: overrides[k] for k in ("active_area", "fov_deg", "filter_gain", "refractive_index", "responsivity")
             if k in overrides}
    noise = overrides.get("noise", NoiseParams())
    leds = tuple(LuminaryParams(position=p, **led_kw) for p in led_layout(layout, room_dims))
    users = tuple(ReceiverParams(position=tuple(p), **rx_kw) for p in user_positions)
    return Scene(luminaries=leds, users=users, noise=noise, room_dims=tuple(room_dims))
