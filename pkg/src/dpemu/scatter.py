"""Point-scattering profiles and the routines that fit them.

A profile holds ``K`` points at local-frame offsets ``x_k`` from the object's
phase center. Point ``k`` responds to a wave arriving along ``theta_in`` and
leaving along ``theta_out`` (both propagation directions) with weight
``alpha_k(theta_in) * beta_k(theta_out)`` and net delay
``x_k . a(theta_in) - x_k . a(theta_out)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InsufficientData
from .geom import C, Angle, direction_angles, unit_vectors
from .sphharm import ShBasisSpec, angle_arrays, fit_coefficients, quadrature_grid, sh_matrix

ISOTROPIC = np.sqrt(4 * np.pi)
"""Order-0 coefficient of the constant function 1."""


@dataclass
class ScatterPoint:
    location: np.ndarray
    in_coeffs: np.ndarray
    out_coeffs: np.ndarray

    def __post_init__(self):
        self.location = np.asarray(self.location, dtype=float).reshape(3)
        self.in_coeffs = np.asarray(self.in_coeffs, dtype=np.complex128).ravel()
        self.out_coeffs = np.asarray(self.out_coeffs, dtype=np.complex128).ravel()


def isotropic_point(location, weight: complex = 1.0) -> ScatterPoint:
    return ScatterPoint(location, [ISOTROPIC * weight], [ISOTROPIC])


@dataclass
class ScatterProfile:
    spec: ShBasisSpec = field(default_factory=lambda: ShBasisSpec(0))
    points: list[ScatterPoint] = field(default_factory=list)

    def __post_init__(self):
        for p in self.points:
            if p.in_coeffs.size != self.spec.P or p.out_coeffs.size != self.spec.P:
                raise ValueError(f"point coefficients must have length {self.spec.P}")

    @property
    def K(self) -> int:
        return len(self.points)

    @property
    def storage(self) -> int:
        """Numbers stored: two coefficient vectors and a location per point."""
        return self.K * (2 * self.spec.P + 3)

    @property
    def locations(self) -> np.ndarray:
        return np.array([p.location for p in self.points]).reshape(self.K, 3)

    @property
    def in_matrix(self) -> np.ndarray:
        return np.array([p.in_coeffs for p in self.points]).reshape(self.K, self.spec.P)

    @property
    def out_matrix(self) -> np.ndarray:
        return np.array([p.out_coeffs for p in self.points]).reshape(self.K, self.spec.P)

    def incoming(self, azimuth_deg, polar_deg):
        """``alpha_k`` and ``tau^i_k`` (s) for each direction; both shape ``(n, K)``."""
        return self._side(self.in_matrix, azimuth_deg, polar_deg)

    def outgoing(self, azimuth_deg, polar_deg):
        """``beta_k`` and ``tau^o_k`` (s) for each direction; both shape ``(n, K)``."""
        return self._side(self.out_matrix, azimuth_deg, polar_deg)

    def _side(self, coeffs, azimuth_deg, polar_deg):
        weights = sh_matrix(self.spec, azimuth_deg, polar_deg) @ coeffs.T
        delays = unit_vectors(azimuth_deg, polar_deg).reshape(-1, 3) @ self.locations.T / C
        return weights, delays


def scatter_delays(point: ScatterPoint, theta_in: Angle, theta_out: Angle) -> tuple[float, float]:
    """Offsets ``(x . a(theta_in), x . a(theta_out))`` in seconds."""
    return (float(point.location @ theta_in.unit()) / C,
            float(point.location @ theta_out.unit()) / C)


def scatter_response(profile: ScatterProfile, theta_in: Angle, theta_out: Angle):
    """Taps ``(net_delay_s, weight)`` of the separable response; net delay is ``tau^i - tau^o``."""
    if profile.K == 0:
        return []
    a, ti = profile.incoming(*angle_arrays(theta_in))
    b, to = profile.outgoing(*angle_arrays(theta_out))
    return [(float(ti[0, k] - to[0, k]), complex(a[0, k] * b[0, k])) for k in range(profile.K)]


def general_response(locations, sigma: Sequence[Callable[[Angle, Angle], complex]],
                     theta_in: Angle, theta_out: Angle):
    """Taps of the general point-scattering model with per-point bistatic weights ``sigma_k``."""
    u_in, u_out = theta_in.unit(), theta_out.unit()
    return [(float(x @ u_in / C - x @ u_out / C), complex(s(theta_in, theta_out)))
            for x, s in zip(np.asarray(locations, dtype=float).reshape(-1, 3), sigma)]


@dataclass
class MonostaticTable:
    """Monostatic responses over uniformly spaced frequencies and a set of directions.

    ``values[f, a]`` is the response at frequency ``frequencies[f]`` (Hz) for a
    wave propagating along direction ``a`` and returning along its antipode.
    """

    frequencies: np.ndarray
    azimuth_deg: np.ndarray
    polar_deg: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float).ravel()
        self.azimuth_deg = np.asarray(self.azimuth_deg, dtype=float).ravel()
        self.polar_deg = np.asarray(self.polar_deg, dtype=float).ravel()
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.frequencies.size, self.azimuth_deg.size):
            raise ValueError("values must have shape (frequencies, angles)")
        if self.azimuth_deg.size != self.polar_deg.size:
            raise ValueError("azimuth and polar arrays differ in length")
        step = np.diff(self.frequencies)
        if step.size and not np.allclose(step, step[0], rtol=1e-9, atol=0):
            raise ValueError("frequency spacing must be uniform")


def _monostatic_phase(locations, frequencies, azimuth_deg, polar_deg):
    """``exp(-j 2 pi f 2 x.a(theta))``, shape ``(G, F, A)``."""
    tau = np.asarray(locations).reshape(-1, 3) @ unit_vectors(azimuth_deg, polar_deg).T / C
    return np.exp(-2j * np.pi * frequencies[None, :, None] * 2 * tau[:, None, :])


def monostatic_table(profile: ScatterProfile, frequencies, azimuth_deg, polar_deg) -> MonostaticTable:
    """Synthesize the monostatic table a profile would produce."""
    az = np.asarray(azimuth_deg, dtype=float).ravel()
    pol = np.asarray(polar_deg, dtype=float).ravel()
    f = np.asarray(frequencies, dtype=float).ravel()
    back_az, back_pol = direction_angles(-unit_vectors(az, pol))
    alpha, tau_i = profile.incoming(az, pol)
    beta, tau_o = profile.outgoing(back_az, back_pol)
    phase = np.exp(-2j * np.pi * f[:, None, None] * (tau_i - tau_o)[None])
    return MonostaticTable(f, az, pol, np.sum(phase * (alpha * beta)[None], axis=-1))


@dataclass
class OmpFit:
    profile: ScatterProfile
    selected: list[int]
    residual_energy: list[float]
    """Residual energy after 0, 1, ..., K selections."""

    @property
    def nmse(self) -> float:
        return self.residual_energy[-1] / self.residual_energy[0] if self.residual_energy[0] else 0.0


def omp_fit_monostatic(table: MonostaticTable, grid, K: int, spec: ShBasisSpec,
                       chunk: int = 256) -> OmpFit:
    """Greedy grid selection of ``K`` scattering points for a monostatic table.

    Each grid location contributes a block of ``P`` atoms (monostatic phase
    across all frequencies times each harmonic). The location whose block
    captures the most residual energy is selected; ties go to the lowest grid
    index. After every selection the harmonic coefficients of all selected
    points are re-solved jointly by least squares. Returned points scatter
    isotropically on the way out, so the fitted incoming pattern carries the
    whole monostatic response.
    """
    grid = np.asarray(grid, dtype=float).reshape(-1, 3)
    if K > 16:
        raise ValueError("at most 16 scattering points are supported")
    if K > grid.shape[0]:
        raise ValueError("more points requested than grid locations")
    if table.values.size < spec.P:
        raise InsufficientData(f"{table.values.size} samples for {spec.P} coefficients per point")
    f = table.frequencies
    psi = sh_matrix(spec, table.azimuth_deg, table.polar_deg)
    gram_inv = np.linalg.pinv(f.size * psi.conj().T @ psi)
    y = table.values
    residual = y.copy()
    energy = [float(np.sum(np.abs(y) ** 2))]
    selected: list[int] = []
    coeffs = np.zeros((0, spec.P), dtype=np.complex128)

    for _ in range(K):
        scores = np.empty(grid.shape[0])
        for lo in range(0, grid.shape[0], chunk):
            phase = _monostatic_phase(grid[lo:lo + chunk], f, table.azimuth_deg, table.polar_deg)
            corr = np.einsum("gfa,fa->ga", phase.conj(), residual) @ psi.conj()
            scores[lo:lo + chunk] = np.real(np.einsum("gp,pq,gq->g", corr, gram_inv, corr.conj()))
        scores[selected] = -np.inf
        selected.append(int(np.argmax(scores)))

        phase = _monostatic_phase(grid[selected], f, table.azimuth_deg, table.polar_deg)
        atoms = phase[:, :, :, None] * psi[None, None, :, :]          # (S, F, A, P)
        design = atoms.transpose(1, 2, 0, 3).reshape(y.size, -1)
        coeffs = fit_coefficients(design, y.ravel()).reshape(len(selected), spec.P)
        residual = y - (design @ coeffs.ravel()).reshape(y.shape)
        energy.append(float(np.sum(np.abs(residual) ** 2)))

    out = np.zeros(spec.P, dtype=np.complex128)
    out[0] = ISOTROPIC
    points = [ScatterPoint(grid[g], c, out) for g, c in zip(selected, coeffs)]
    return OmpFit(ScatterProfile(spec, points), selected, energy)


@dataclass
class BistaticSamples:
    """Bistatic measurements: directions in/out, frequency (Hz) and complex value per sample."""

    in_azimuth_deg: np.ndarray
    in_polar_deg: np.ndarray
    out_azimuth_deg: np.ndarray
    out_polar_deg: np.ndarray
    frequencies: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for name in ("in_azimuth_deg", "in_polar_deg", "out_azimuth_deg", "out_polar_deg", "frequencies"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        self.values = np.asarray(self.values, dtype=np.complex128).ravel()

    @classmethod
    def from_list(cls, samples: Sequence[tuple[Angle, Angle, float, complex]]) -> "BistaticSamples":
        ti = [s[0] for s in samples]
        to = [s[1] for s in samples]
        return cls([a.azimuth_deg for a in ti], [a.polar_deg for a in ti],
                   [a.azimuth_deg for a in to], [a.polar_deg for a in to],
                   [s[2] for s in samples], [s[3] for s in samples])


def bistatic_samples(profile: ScatterProfile, in_dirs, out_dirs, frequencies) -> BistaticSamples:
    """Evaluate a profile's frequency response at matched lists of directions and frequencies."""
    ia, ip = angle_arrays(in_dirs)
    oa, op = angle_arrays(out_dirs)
    f = np.asarray(frequencies, dtype=float).ravel()
    alpha, tau_i = profile.incoming(ia, ip)
    beta, tau_o = profile.outgoing(oa, op)
    values = np.sum(alpha * beta * np.exp(-2j * np.pi * f[:, None] * (tau_i - tau_o)), axis=1)
    return BistaticSamples(ia, ip, oa, op, f, values)


@dataclass
class BilinearFit:
    profile: ScatterProfile
    objective: list[float]
    """Normalized residual energy after each iteration."""


def bilinear_fit_bistatic(samples: BistaticSamples, locations, spec: ShBasisSpec, iters: int = 50,
                          init: ScatterProfile | None = None, seed: int | None = None,
                          ridge: float = 0.0, tol: float = 0.0) -> BilinearFit:
    """Alternating least squares for separable point weights at fixed locations.

    Starts from ``init``'s outgoing coefficients, random ones when ``seed`` is
    given, or isotropic outgoing patterns otherwise. Each iteration solves for
    all incoming coefficients, then all outgoing coefficients, then rescales
    each point so both coefficient vectors have equal norm. Stops early once
    the normalized objective drops below ``tol``.
    """
    if isinstance(samples, (list, tuple)):
        samples = BistaticSamples.from_list(samples)
    if iters < 1:
        raise ValueError("iters must be at least 1")
    x = np.asarray(locations, dtype=float).reshape(-1, 3)
    K, P = x.shape[0], spec.P
    psi_in = sh_matrix(spec, samples.in_azimuth_deg, samples.in_polar_deg)
    psi_out = sh_matrix(spec, samples.out_azimuth_deg, samples.out_polar_deg)
    u_in = unit_vectors(samples.in_azimuth_deg, samples.in_polar_deg)
    u_out = unit_vectors(samples.out_azimuth_deg, samples.out_polar_deg)
    net = (u_in - u_out) @ x.T / C
    steer = np.exp(-2j * np.pi * samples.frequencies[:, None] * net)    # (n, K)
    y = samples.values
    norm = float(np.sum(np.abs(y) ** 2))
    n = y.size
    if n < K * P:
        raise InsufficientData(f"{n} samples for {K * P} coefficients per factor")

    if init is not None:
        b_out = init.out_matrix.copy()
    elif seed is not None:
        rng = np.random.default_rng(seed)
        b_out = rng.standard_normal((K, P)) + 1j * rng.standard_normal((K, P))
    else:
        b_out = np.zeros((K, P), dtype=np.complex128)
        b_out[:, 0] = ISOTROPIC

    objective = []
    b_in = np.zeros((K, P), dtype=np.complex128)
    for _ in range(iters):
        other = (psi_out @ b_out.T) * steer
        design = (psi_in[:, None, :] * other[:, :, None]).reshape(n, K * P)
        b_in = fit_coefficients(design, y, ridge).reshape(K, P)
        other = (psi_in @ b_in.T) * steer
        design = (psi_out[:, None, :] * other[:, :, None]).reshape(n, K * P)
        b_out = fit_coefficients(design, y, ridge).reshape(K, P)
        n_in = np.linalg.norm(b_in, axis=1)
        n_out = np.linalg.norm(b_out, axis=1)
        scale = np.sqrt(np.where(n_in > 0, n_out / np.where(n_in > 0, n_in, 1), 1.0))
        scale = np.where(scale > 0, scale, 1.0)
        b_in *= scale[:, None]
        b_out /= scale[:, None]
        model = np.sum((psi_in @ b_in.T) * (psi_out @ b_out.T) * steer, axis=1)
        objective.append(float(np.sum(np.abs(y - model) ** 2) / norm) if norm else 0.0)
        if objective[-1] < tol:
            break

    points = [ScatterPoint(x[k], b_in[k], b_out[k]) for k in range(K)]
    return BilinearFit(ScatterProfile(spec, points), objective)


def swerling_profile(kind: int, count: int, extent_m: float, seed: int,
                     dominant_fraction: float = 0.95) -> ScatterProfile:
    """Isotropic points uniformly placed in a cube of side ``extent_m``.

    Kind 1 gives every point the same weight. Kind 3 puts ``dominant_fraction``
    of the total power on the first point and shares the rest equally.
    Total power is 1.
    """
    if kind not in (1, 3):
        raise ValueError("kind must be 1 or 3")
    if kind == 1 and count < 10:
        raise ValueError("Swerling 1 needs at least 10 points")
    if count < 2 and kind == 3:
        raise ValueError("Swerling 3 needs a dominant point plus at least one other")
    rng = np.random.default_rng(seed)
    locations = rng.uniform(-extent_m / 2, extent_m / 2, size=(count, 3))
    if kind == 1:
        power = np.full(count, 1.0 / count)
    else:
        power = np.full(count, (1.0 - dominant_fraction) / (count - 1))
        power[0] = dominant_fraction
    return ScatterProfile(ShBasisSpec(0), [isotropic_point(x, np.sqrt(p)) for x, p in zip(locations, power)])


def hemisphere_coeffs(spec: ShBasisSpec, axis, n_polar: int = 64, n_azimuth: int = 128) -> np.ndarray:
    """Harmonic projection of the indicator of the half-sphere ``u . axis > 0``."""
    u, analysis = _projector(spec.order, n_polar, n_azimuth)
    axis = np.asarray(axis, dtype=float)
    inside = (u @ (axis / np.linalg.norm(axis)) > 0).astype(float)
    return analysis @ inside


@functools.lru_cache(maxsize=8)
def _projector(order, n_polar, n_azimuth):
    """Grid directions and the quadrature projection matrix onto the basis."""
    az, pol, w = quadrature_grid(n_polar, n_azimuth)
    return unit_vectors(az, pol), (sh_matrix(ShBasisSpec(order), az, pol).conj() * w[:, None]).T


def heaviside_profile(locations, in_axes, out_axes, spec: ShBasisSpec = ShBasisSpec(15),
                      weights=None) -> ScatterProfile:
    """Anisotropic profile whose patterns are harmonic approximations of hemispherical indicators."""
    x = np.asarray(locations, dtype=float).reshape(-1, 3)
    w = np.ones(x.shape[0]) if weights is None else np.asarray(weights)
    points = [ScatterPoint(xk, wk * hemisphere_coeffs(spec, ai), hemisphere_coeffs(spec, ao))
              for xk, ai, ao, wk in zip(x, np.reshape(in_axes, (-1, 3)), np.reshape(out_axes, (-1, 3)), w)]
    return ScatterProfile(spec, points)
