"""Geometry, kinematics and the first-order motion model.

Angles follow the steering-vector convention
``a(theta) = (1/c) [cos(az) sin(pol), sin(az) sin(pol), cos(pol)]``,
so the second angle is a *polar* angle measured from +z, not an elevation.
All angles seen by a node are expressed in that node's local frame: a global
direction ``u`` becomes ``R.T @ u`` for orientation ``R``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .blocks import as_samples
from .errors import InvalidRho, ZeroDistance

C = 299_792_458.0
"""Speed of light in m/s (exact SI value)."""

Vec3 = NDArray[np.float64]


def vec3(x) -> Vec3:
    v = np.asarray(x, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector {v}")
    return v


def _wrap_azimuth(az):
    return (np.asarray(az, dtype=np.float64) + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class Angle:
    """Spherical direction (azimuth, polar) in degrees."""

    azimuth_deg: float = 0.0
    polar_deg: float = 0.0

    def __post_init__(self):
        if not -180.0 <= self.azimuth_deg < 180.0:
            raise ValueError(f"azimuth {self.azimuth_deg} outside [-180, 180)")
        if not 0.0 <= self.polar_deg <= 180.0:
            raise ValueError(f"polar angle {self.polar_deg} outside [0, 180]")

    @classmethod
    def wrapped(cls, azimuth_deg: float, polar_deg: float) -> "Angle":
        """Build an angle, wrapping azimuth into [-180, 180)."""
        return cls(float(_wrap_azimuth(azimuth_deg)), float(polar_deg))

    @classmethod
    def from_vector(cls, v) -> "Angle":
        az, pol = direction_angles(np.asarray(v, dtype=np.float64)[None, :])
        return cls(float(az[0]), float(pol[0]))

    def unit(self) -> Vec3:
        return unit_vectors(np.array([self.azimuth_deg]), np.array([self.polar_deg]))[0]

    def antipode(self) -> "Angle":
        return Angle.from_vector(-self.unit())

    @property
    def radians(self) -> tuple[float, float]:
        return np.deg2rad(self.azimuth_deg), np.deg2rad(self.polar_deg)


def unit_vectors(azimuth_deg, polar_deg) -> NDArray[np.float64]:
    """Unit direction vectors, shape ``(..., 3)``."""
    az = np.deg2rad(np.asarray(azimuth_deg, dtype=np.float64))
    pol = np.deg2rad(np.asarray(polar_deg, dtype=np.float64))
    s = np.sin(pol)
    return np.stack([np.cos(az) * s, np.sin(az) * s, np.cos(pol)], axis=-1)


def direction_angles(vectors) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Azimuth and polar angle (degrees) of nonzero vectors of shape ``(..., 3)``."""
    v = np.asarray(vectors, dtype=np.float64)
    r = np.linalg.norm(v, axis=-1)
    pol = np.rad2deg(np.arccos(np.clip(v[..., 2] / r, -1.0, 1.0)))
    az = _wrap_azimuth(np.rad2deg(np.arctan2(v[..., 1], v[..., 0])))
    return az, pol


def steering_vector(theta: Angle) -> Vec3:
    """Delay per meter of displacement for a plane wave travelling along ``theta``."""
    return theta.unit() / C


@dataclass(frozen=True)
class Kinematics:
    """Position, velocity and orientation of an object at ``reference_time``."""

    position: Vec3
    velocity: Vec3 = field(default_factory=lambda: np.zeros(3))
    orientation: NDArray[np.float64] = field(default_factory=lambda: np.eye(3))
    reference_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position))
        object.__setattr__(self, "velocity", vec3(self.velocity))
        r = np.asarray(self.orientation, dtype=np.float64).reshape(3, 3)
        if np.linalg.norm(r.T @ r - np.eye(3)) > 1e-9 or np.linalg.det(r) < 0:
            raise ValueError("orientation must be a proper rotation matrix")
        object.__setattr__(self, "orientation", r)


def propagate(k: Kinematics, t: float) -> Vec3:
    """Position at time ``t`` under constant velocity."""
    return k.position + (t - k.reference_time) * k.velocity


@dataclass(frozen=True)
class PathState:
    """One-way channel from a source to a destination at one instant."""

    delay_s: float
    doppler_hz: float
    loss_amp: float
    incoming: Angle
    outgoing: Angle
    distance_m: float


def path_between(src: Kinematics, dst: Kinematics, fc: float, t: float,
                 loss_ref_m: float = 1.0) -> PathState:
    """Delay, Doppler, loss and local-frame angles of the path src -> dst at time ``t``.

    ``outgoing`` is the propagation direction leaving the source, in the source
    frame. ``incoming`` is the propagation direction arriving at the
    destination, in the destination frame.
    """
    d = propagate(dst, t) - propagate(src, t)
    dist = float(np.linalg.norm(d))
    if dist == 0.0:
        raise ZeroDistance("source and destination coincide")
    v_r = float(np.dot(d, dst.velocity - src.velocity)) / dist
    u = d / dist
    return PathState(
        delay_s=dist / C,
        doppler_hz=-fc * v_r / C,
        loss_amp=loss_ref_m / dist,
        incoming=Angle.from_vector(dst.orientation.T @ u),
        outgoing=Angle.from_vector(src.orientation.T @ u),
        distance_m=dist,
    )


def _sinc_interpolate(x, positions, half_width=64, beta=10.0):
    """Kaiser-windowed sinc interpolation of ``x`` at fractional sample ``positions``."""
    base = np.floor(positions).astype(np.int64)
    frac = positions - base
    offsets = np.arange(-half_width + 1, half_width + 1)
    idx = base[:, None] + offsets[None, :]
    arg = offsets[None, :] - frac[:, None]
    taper = np.sqrt(np.clip(1.0 - (arg / half_width) ** 2, 0.0, None))
    kernel = np.sinc(arg) * np.i0(beta * taper) / np.i0(beta)
    valid = (idx >= 0) & (idx < x.size)
    return np.sum(np.where(valid, x[np.clip(idx, 0, x.size - 1)], 0.0) * kernel, axis=1)


def doppler_approx_error(u, fc: float, rho: float, fs: float, margin: float = 0.05) -> float:
    """Relative RMS error of the Doppler modulation approximation.

    Compares ``exp(-j 2 pi fc rho t) u(t)`` with the exactly dilated signal
    ``exp(-j 2 pi fc rho t) u(t (1 - rho))``, where ``t`` runs from the first
    sample of the block. The dilated signal is evaluated by bandlimited
    (Kaiser-windowed sinc) interpolation of the samples. A fraction ``margin``
    of samples at each end is excluded because the interpolator runs out of
    neighbours there.
    """
    if abs(rho) >= 1e-3:
        raise InvalidRho(f"|rho| = {abs(rho):.3g} is outside the modulation regime")
    if rho == 0.0:
        return 0.0
    x = as_samples(u)
    n = x.size
    lo = max(int(np.ceil(margin * n)), 64)
    i = np.arange(lo, n - lo)
    carrier = np.exp(-2j * np.pi * fc * rho * i / fs)
    approx = carrier * x[i]
    exact = carrier * _sinc_interpolate(x, i * (1.0 - rho))
    return float(np.linalg.norm(approx - exact) / np.linalg.norm(exact))
