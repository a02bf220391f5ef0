"""Spherical-harmonic bases, least-squares fits, and separable antenna models.

Basis functions are the orthonormal complex harmonics with the Condon-Shortley
phase, ``Y_l^m(polar, azimuth)`` as returned by ``scipy.special.sph_harm_y``,
stored at zero-based position ``l*l + l + m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import sph_harm_y_all

from .errors import RankDeficient
from .geom import Angle, unit_vectors

MAX_ORDER = 31
COND_LIMIT = 1e12


@dataclass(frozen=True)
class ShBasisSpec:
    order: int

    def __post_init__(self):
        if not 0 <= self.order <= MAX_ORDER:
            raise ValueError(f"order {self.order} outside [0, {MAX_ORDER}]")

    @property
    def P(self) -> int:
        return (self.order + 1) ** 2

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays ``(l, m)`` in storage order."""
        l = np.repeat(np.arange(self.order + 1), 2 * np.arange(self.order + 1) + 1)
        p = np.arange(self.P)
        return l, p - l * l - l

    @staticmethod
    def index(l: int, m: int) -> int:
        """One-based basis index of ``Y_l^m``."""
        return l * l + l + m + 1


def angle_arrays(angles) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth and polar arrays (degrees) from Angles, an ``(n, 2)`` array, or a pair of arrays."""
    if isinstance(angles, Angle):
        return np.array([angles.azimuth_deg]), np.array([angles.polar_deg])
    if isinstance(angles, tuple) and len(angles) == 2 and not isinstance(angles[0], Angle):
        return np.asarray(angles[0], dtype=float).ravel(), np.asarray(angles[1], dtype=float).ravel()
    if len(angles) and isinstance(angles[0], Angle):
        return (np.array([a.azimuth_deg for a in angles]), np.array([a.polar_deg for a in angles]))
    a = np.asarray(angles, dtype=float).reshape(-1, 2)
    return a[:, 0], a[:, 1]


def sh_matrix(spec: ShBasisSpec, azimuth_deg, polar_deg) -> np.ndarray:
    """Basis evaluations, shape ``(n, P)``."""
    az = np.deg2rad(np.asarray(azimuth_deg, dtype=float)).ravel()
    pol = np.deg2rad(np.asarray(polar_deg, dtype=float)).ravel()
    l, m = spec.degrees()
    # All (l, m) in one recursion; negative m index from the end of the order axis.
    table = sph_harm_y_all(spec.order, spec.order, pol, az)
    return table[l, m].T


def sh_eval(spec: ShBasisSpec, theta: Angle) -> np.ndarray:
    return sh_matrix(spec, [theta.azimuth_deg], [theta.polar_deg])[0]


@dataclass(frozen=True)
class ShFunction:
    """Band-limited function on the sphere, ``g(theta) = psi(theta)^T b``."""

    spec: ShBasisSpec
    coeffs: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.coeffs, dtype=np.complex128).ravel()
        if b.size != self.spec.P or not np.all(np.isfinite(b)):
            raise ValueError(f"expected {self.spec.P} finite coefficients, got {b.size}")
        object.__setattr__(self, "coeffs", b)

    def __call__(self, theta: Angle) -> complex:
        return complex(sh_eval(self.spec, theta) @ self.coeffs)

    def evaluate(self, azimuth_deg, polar_deg) -> np.ndarray:
        return sh_matrix(self.spec, azimuth_deg, polar_deg) @ self.coeffs


def quadrature_grid(n_polar: int, n_azimuth: int):
    """Gauss-Legendre (in cos polar) by uniform-azimuth grid.

    Returns flattened ``(azimuth_deg, polar_deg, weights)``; the weights
    integrate over the unit sphere. Exact for products of harmonics up to
    total degree ``min(2*n_polar - 1, n_azimuth - 1)``.
    """
    x, w = np.polynomial.legendre.leggauss(n_polar)
    pol = np.rad2deg(np.arccos(x))
    az = -180.0 + 360.0 * np.arange(n_azimuth) / n_azimuth
    P, A = np.meshgrid(pol, az, indexing="ij")
    W = np.repeat(w, n_azimuth) * (2 * np.pi / n_azimuth)
    return A.ravel(), P.ravel(), W


def project(spec: ShBasisSpec, values, azimuth_deg, polar_deg, weights) -> np.ndarray:
    """Quadrature projection of sampled function values onto the basis."""
    return sh_matrix(spec, azimuth_deg, polar_deg).conj().T @ (np.asarray(weights) * values)


def fit_coefficients(basis: np.ndarray, values: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Solve ``min ||basis @ b - values||^2 + ridge ||b||^2`` for one or many right-hand sides."""
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    n, p = basis.shape
    if ridge > 0:
        normal = basis.conj().T @ basis + ridge * np.eye(p)
        return np.linalg.solve(normal, basis.conj().T @ values)
    if n < p:
        raise RankDeficient(f"{n} samples for {p} unknowns")
    q, r = np.linalg.qr(basis)
    s = np.linalg.svd(r, compute_uv=False)
    if s[-1] == 0 or (s[0] / s[-1]) ** 2 > COND_LIMIT:
        raise RankDeficient("normal matrix condition number exceeds 1e12")
    return np.linalg.solve(r, q.conj().T @ values)


def sh_fit(samples: Sequence[tuple[Angle, complex]], spec: ShBasisSpec,
           ridge: float = 0.0) -> ShFunction:
    """Least-squares harmonic fit to ``(Angle, value)`` samples."""
    az, pol = angle_arrays([a for a, _ in samples])
    y = np.array([v for _, v in samples], dtype=np.complex128)
    return ShFunction(spec, fit_coefficients(sh_matrix(spec, az, pol), y, ridge))


def element_phase(positions_wl, azimuth_deg, polar_deg) -> np.ndarray:
    """Phase ``2 pi p_d . u(theta)`` of elements at ``positions_wl`` (wavelengths); shape ``(n, D)``."""
    u = unit_vectors(azimuth_deg, polar_deg)
    return 2 * np.pi * u @ np.asarray(positions_wl, dtype=float).T


@dataclass
class AntennaModel:
    """Separable antenna gain ``G(steer, theta) = sum_d conj(g^s_d(steer)) g_d(theta)``.

    Each factor is a harmonic expansion, optionally multiplied by the plane-wave
    phase ``exp(j 2 pi p_d . u(theta))`` of an element at known position
    ``p_d`` (in wavelengths).
    """

    spec: ShBasisSpec
    steer_coeffs: np.ndarray
    field_coeffs: np.ndarray
    element_positions: np.ndarray | None = None

    def __post_init__(self):
        self.steer_coeffs = np.atleast_2d(np.asarray(self.steer_coeffs, dtype=np.complex128))
        self.field_coeffs = np.atleast_2d(np.asarray(self.field_coeffs, dtype=np.complex128))
        if self.steer_coeffs.shape != self.field_coeffs.shape or self.steer_coeffs.shape[1] != self.spec.P:
            raise ValueError("steer and field coefficients must both be (D, P)")
        if self.element_positions is not None:
            self.element_positions = np.asarray(self.element_positions, dtype=float).reshape(self.D, 3)

    @classmethod
    def isotropic(cls) -> "AntennaModel":
        c = np.array([[np.sqrt(4 * np.pi)]])
        return cls(ShBasisSpec(0), c, c)

    @property
    def D(self) -> int:
        return self.steer_coeffs.shape[0]

    @property
    def n_parameters(self) -> int:
        return 2 * self.spec.P * self.D

    @property
    def steer_factors(self) -> list[ShFunction]:
        return [ShFunction(self.spec, b) for b in self.steer_coeffs]

    @property
    def field_factors(self) -> list[ShFunction]:
        return [ShFunction(self.spec, b) for b in self.field_coeffs]

    def _factor_values(self, coeffs, azimuth_deg, polar_deg):
        v = sh_matrix(self.spec, azimuth_deg, polar_deg) @ coeffs.T
        if self.element_positions is not None:
            v = v * np.exp(1j * element_phase(self.element_positions, azimuth_deg, polar_deg))
        return v

    def steer_values(self, azimuth_deg, polar_deg) -> np.ndarray:
        """``g^s_d`` at each direction, shape ``(n, D)``."""
        return self._factor_values(self.steer_coeffs, azimuth_deg, polar_deg)

    def field_values(self, azimuth_deg, polar_deg) -> np.ndarray:
        """``g_d`` at each direction, shape ``(n, D)``."""
        return self._factor_values(self.field_coeffs, azimuth_deg, polar_deg)

    def gain_matrix(self, steer, field) -> np.ndarray:
        """Gains over a steer grid (rows) by field grid (columns)."""
        return self.steer_values(*angle_arrays(steer)).conj() @ self.field_values(*angle_arrays(field)).T

    def gain(self, steer: Angle, theta: Angle) -> complex:
        return complex(self.gain_matrix(steer, theta)[0, 0])


def antenna_gain(model: AntennaModel, steer: Angle, theta: Angle) -> complex:
    return model.gain(steer, theta)


@dataclass
class AntennaFit:
    model: AntennaModel
    train_nmse: float
    test_nmse: float
    test_columns: np.ndarray = field(repr=False, default=None)


def _nmse(estimate, truth):
    return float(np.sum(np.abs(estimate - truth) ** 2) / np.sum(np.abs(truth) ** 2))


def fit_antenna_table(table, steer_grid, field_grid, D: int, spec: ShBasisSpec,
                      known_phase_geometry=None, ridge: float = 0.0,
                      train_fraction: float = 0.9, seed: int = 0) -> AntennaFit:
    """Fit a rank-``D`` separable model to a gain table.

    Parameters
    ----------
    table : (S, F) complex array
        Gains with steering directions along rows and field directions along columns.
    steer_grid, field_grid
        Directions of the rows and columns (see :func:`angle_arrays`).
    known_phase_geometry : (D, 3) array, optional
        Element positions in wavelengths. When given, steer factors are fixed
        to the pure element phases and each element pattern is found by linear
        least squares. Without it the table is factored by a truncated SVD and
        both factor sets are fitted harmonically.

    A seeded random ``train_fraction`` of the field columns is used for fitting,
    the rest is held out. Reports normalized MSE on both parts.
    """
    table = np.asarray(table, dtype=np.complex128)
    s_az, s_pol = angle_arrays(steer_grid)
    f_az, f_pol = angle_arrays(field_grid)
    if table.shape != (s_az.size, f_az.size):
        raise ValueError(f"table shape {table.shape} does not match grids")
    rng = np.random.default_rng(seed)
    order = rng.permutation(f_az.size)
    n_train = int(round(train_fraction * f_az.size))
    train, test = np.sort(order[:n_train]), np.sort(order[n_train:])
    psi_field = sh_matrix(spec, f_az[train], f_pol[train])

    if known_phase_geometry is not None:
        positions = np.asarray(known_phase_geometry, dtype=float).reshape(D, 3)
        steer_phase = np.exp(1j * element_phase(positions, s_az, s_pol))
        elements = fit_coefficients(steer_phase.conj(), table[:, train], ridge)
        field_phase = np.exp(-1j * element_phase(positions, f_az[train], f_pol[train]))
        field_coeffs = fit_coefficients(psi_field, (elements * field_phase.T).T, ridge).T
        steer_coeffs = np.zeros((D, spec.P), dtype=np.complex128)
        steer_coeffs[:, 0] = np.sqrt(4 * np.pi)
        model = AntennaModel(spec, steer_coeffs, field_coeffs, positions)
    else:
        u, s, vh = np.linalg.svd(table[:, train], full_matrices=False)
        root = np.sqrt(s[:D])
        steer_vals = (u[:, :D] * root).conj()
        field_vals = (vh[:D].T * root)
        steer_coeffs = fit_coefficients(sh_matrix(spec, s_az, s_pol), steer_vals, ridge).T
        field_coeffs = fit_coefficients(psi_field, field_vals, ridge).T
        model = AntennaModel(spec, steer_coeffs, field_coeffs)

    steer = (s_az, s_pol)
    fitted_train = model.gain_matrix(steer, (f_az[train], f_pol[train]))
    train_err = _nmse(fitted_train, table[:, train])
    if test.size:
        test_err = _nmse(model.gain_matrix(steer, (f_az[test], f_pol[test])), table[:, test])
    else:
        test_err = float("nan")
    return AntennaFit(model, train_err, test_err, test)
