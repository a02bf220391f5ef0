"""Fractional-delay FIR filters, their quality metrics, and ring-buffer delay lines.

A filter with ``R`` taps interpolates the input at position ``R/2 - 1 + mu``
inside its window: ``y[n] = sum_k taps[k] x[n - i0 - k]`` realizes a total
delay of ``i0 + R/2 - 1 + mu`` samples.

Two designs are provided:

``legendre``
    Degree ``R-1`` polynomial through the ``R`` window samples, expanded in the
    Legendre basis on [-1, 1] and evaluated at the delayed position.
``spline``
    Natural cubic spline (zero curvature at the window edges) through the
    ``R`` window samples, evaluated at the delayed position. It reproduces
    constants and straight lines exactly, so the DC gain is 1 and the DC group
    delay equals the requested delay.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.interpolate import CubicSpline

from .errors import BufferUnderrun, DelayOutOfRange, UnsupportedLength

METHODS = ("spline", "legendre")
TAP_COUNTS = (4, 8)
DEFAULT_STEPS = 1024
REFERENCE_BANDWIDTH_HZ = 2e9


def _check(method, R):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if R not in TAP_COUNTS:
        raise UnsupportedLength(f"R = {R}; supported tap counts are {TAP_COUNTS}")


@lru_cache(maxsize=None)
def _natural_spline(R):
    # Natural cubic spline through the R window samples; linear in the data, so
    # interpolating the columns of the identity gives every tap at once.
    return CubicSpline(np.arange(R, dtype=float), np.eye(R), bc_type="natural")


def _spline_taps(R, mu):
    p = R / 2 - 1 + np.asarray(mu, dtype=float)
    return _natural_spline(R)(p)


@lru_cache(maxsize=None)
def _legendre_inverse(R):
    nodes = np.linspace(-1.0, 1.0, R)
    return np.linalg.inv(legendre.legvander(nodes, R - 1))


def _legendre_taps(R, mu):
    p = R / 2 - 1 + np.asarray(mu, dtype=float)
    x = -1.0 + 2.0 * p / (R - 1)
    return legendre.legvander(x, R - 1) @ _legendre_inverse(R)


def design_taps(method: str, R: int, mu) -> np.ndarray:
    """Tap vectors for one or many fractional delays; shape ``mu.shape + (R,)``."""
    _check(method, R)
    mu = np.asarray(mu, dtype=float)
    taps = _spline_taps(R, mu) if method == "spline" else _legendre_taps(R, mu)
    taps = taps.reshape(mu.shape + (R,))
    taps = taps / taps.sum(axis=-1, keepdims=True)
    impulse = np.zeros(R)
    impulse[R // 2 - 1] = 1.0
    return np.where((mu == 0.0)[..., None], impulse, taps)


@dataclass(frozen=True)
class FracDelayFilter:
    taps: np.ndarray
    method: str
    mu: float
    R: int


def design(method: str, R: int, mu: float) -> FracDelayFilter:
    """Design an ``R``-tap filter delaying by ``R/2 - 1 + mu`` samples."""
    if not 0.0 <= mu < 1.0:
        raise ValueError(f"mu = {mu} outside [0, 1)")
    return FracDelayFilter(design_taps(method, R, mu), method, float(mu), R)


def frequency_response(taps, omega):
    """Complex response and its derivative with respect to ``omega`` (rad/sample)."""
    taps = np.asarray(taps)
    k = np.arange(taps.shape[-1])
    e = np.exp(-1j * np.multiply.outer(omega, k))
    return e @ taps.T, (-1j * k * e) @ taps.T


@dataclass(frozen=True)
class FilterMetrics:
    delay_accuracy_ns: float
    amplitude_ripple: float


def measure(method: str, R: int, oversample_pct: float, settings: int = 64,
            fs: float | None = None, n_freq: int = 512) -> FilterMetrics:
    """Worst-case group-delay error and amplitude ripple over the occupied band.

    The occupied band is ``fs / (1 + oversample_pct/100)`` wide and centred on
    DC. When ``fs`` is omitted it is chosen so that this band is 2 GHz. The
    fractional delay is swept over ``settings`` uniform values ``k/settings``.
    """
    if fs is None:
        fs = (1 + oversample_pct / 100) * REFERENCE_BANDWIDTH_HZ
    band = fs / (1 + oversample_pct / 100)
    omega = 2 * np.pi * np.linspace(-band / 2, band / 2, n_freq) / fs
    mu = np.arange(settings) / settings
    taps = design_taps(method, R, mu)
    h, dh = frequency_response(taps, omega)
    group_delay = -np.imag(dh / h)
    deviation = np.abs(group_delay - (R / 2 - 1 + mu)[None, :])
    mag = np.abs(h)
    return FilterMetrics(float(deviation.max() / fs * 1e9), float(mag.max() - mag.min()))


class FilterBank:
    """Filters for ``steps`` uniformly quantized fractional delays ``q/steps``."""

    def __init__(self, method: str = "spline", R: int = 4, steps: int = DEFAULT_STEPS):
        self.method = method
        self.R = R
        self.steps = steps
        self.taps = design_taps(method, R, np.arange(steps) / steps)
        self.taps.setflags(write=False)

    def split(self, delays):
        """Return (newest window offset ``i0``, tap rows) for real sample delays."""
        d = np.asarray(delays, dtype=float)
        whole = np.floor(d)
        q = np.rint((d - whole) * self.steps).astype(np.int64)
        carry = q == self.steps
        whole = whole + carry
        q = np.where(carry, 0, q)
        return whole.astype(np.int64) - (self.R // 2 - 1), self.taps[q]


class DelayLine:
    """Ring buffer of complex samples, optionally with several parallel channels.

    Sample ``i`` (absolute index) lives at ring position ``i % capacity``.
    ``write_index`` is the absolute index of the next sample to be written.
    """

    def __init__(self, capacity: int, channels: int | None = None):
        self.capacity = int(capacity)
        self.channels = channels
        shape = (self.capacity,) if channels is None else (channels, self.capacity)
        self.ring = np.zeros(shape, dtype=np.complex128)
        self.write_index = 0

    def write(self, samples) -> None:
        x = np.asarray(samples, dtype=np.complex128)
        n = x.shape[-1]
        if n > self.capacity:
            x = x[..., -self.capacity:]
            self.write_index += n - self.capacity
            n = self.capacity
        pos = (self.write_index + np.arange(n)) % self.capacity
        self.ring[..., pos] = x
        self.write_index += n

    def gather(self, index, channel=None):
        """Samples at absolute indices (and channels, for multichannel lines)."""
        index = np.asarray(index)
        if index.size:
            if index.min() < self.write_index - self.capacity:
                raise BufferUnderrun("requested sample is older than the buffered history")
            if index.max() >= self.write_index:
                raise DelayOutOfRange("requested sample has not been written yet")
        pos = index % self.capacity
        if self.channels is None:
            return self.ring[pos]
        return self.ring[channel, pos]

    def read(self, times, delays, bank: FilterBank, channel=None):
        """Values of the stored signal at ``times - delays`` (vectorized).

        ``times``, ``delays`` and ``channel`` broadcast against each other.
        """
        i0, taps = bank.split(delays)
        times = np.asarray(times)
        shape = np.broadcast_shapes(times.shape, i0.shape)
        idx = (np.broadcast_to(times, shape) - i0)[..., None] - np.arange(bank.R)
        if channel is not None:
            channel = np.broadcast_to(np.asarray(channel), shape)[..., None]
        return np.sum(self.gather(idx, channel) * taps, axis=-1)


def read_delayed(line: DelayLine, delay_samples: float, filter_bank: FilterBank) -> complex:
    """Signal value ``delay_samples`` before the most recently written sample."""
    return complex(line.read(line.write_index - 1, delay_samples, filter_bank))


def buffer_length(distance_m: float, fs: float) -> int:
    """Samples needed to hold a signal travelling ``distance_m`` at sample rate ``fs``."""
    from .geom import C

    return int(np.ceil(distance_m / C * fs))
