"""Matched filtering, spectra, analytic baselines and summary statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import signal, stats

from .blocks import SampleBlock, as_samples
from .errors import EmptyTemplate
from .geom import C


@dataclass
class MatchedFilterResult:
    lags: np.ndarray
    magnitude: np.ndarray
    peak_lag: int
    peak_mag: float


def matched_filter(received, template, normalize: bool = False) -> MatchedFilterResult:
    """Correlate ``received`` with ``template``; lag ``d`` means the template starts ``d`` samples later.

    Lags are absolute when SampleBlocks are given (start indices are taken
    into account). With ``normalize`` the magnitude is divided by the
    template energy.
    """
    x = as_samples(received)
    h = as_samples(template)
    if h.size == 0:
        raise EmptyTemplate("matched filter template is empty")
    offset = 0
    if isinstance(received, SampleBlock):
        offset += received.start_index
    if isinstance(template, SampleBlock):
        offset -= template.start_index
    corr = signal.correlate(x, h, mode="full")
    lags = signal.correlation_lags(x.size, h.size, mode="full") + offset
    mag = np.abs(corr)
    if normalize:
        mag = mag / np.sum(np.abs(h) ** 2)
    i = int(np.argmax(mag))
    return MatchedFilterResult(lags, mag, int(lags[i]), float(mag[i]))


def peak_near(received, template, lag: int, window: int) -> float:
    """Largest matched-filter magnitude for lags within ``window`` of ``lag``."""
    x = as_samples(received)
    h = as_samples(template)
    lo = lag - window
    seg = x[max(lo, 0):lag + window + h.size]
    corr = signal.correlate(seg, h, mode="valid")
    return float(np.abs(corr).max())


def periodogram(block, fs: float, normalize: str = "peak"):
    """Rectangular-window periodogram with centred frequency bins.

    ``normalize="peak"`` scales the maximum to 1. ``normalize="power"`` keeps
    ``|X|^2 / n^2`` so the bins sum to the mean-square value of the block.
    """
    x = as_samples(block)
    if x.size == 0:
        raise ValueError("empty block")
    p = np.abs(np.fft.fftshift(np.fft.fft(x))) ** 2 / x.size**2
    f = np.fft.fftshift(np.fft.fftfreq(x.size, 1 / fs))
    if normalize == "peak":
        p = p / p.max()
    elif normalize != "power":
        raise ValueError("normalize must be 'peak' or 'power'")
    return f, p


def spectral_deviation(measured, reference, freqs, band: float) -> float:
    """Max in-band ``|measured - reference|`` relative to the in-band peak of ``reference``."""
    inside = np.abs(freqs) <= band
    return float(np.max(np.abs(measured[inside] - reference[inside])) / np.max(reference[inside]))


def nrmse(estimate, reference) -> float:
    """RMS error relative to the RMS of the reference."""
    e = np.asarray(estimate) - np.asarray(reference)
    return float(np.sqrt(np.mean(np.abs(e) ** 2) / np.mean(np.abs(np.asarray(reference)) ** 2)))


@dataclass
class TwoPathGeometry:
    """Two transmit/receive nodes and a moving point reflector.

    ``pulse`` is the continuous transmit envelope as a function of time in
    samples (zero outside its support); ``template`` its sampled version.
    """

    stations: np.ndarray
    reflector: np.ndarray
    velocity: np.ndarray
    fc: float
    fs: float
    pulse: Callable[[np.ndarray], np.ndarray]
    template: np.ndarray
    loss_ref_m: float = 1.0

    def reflector_at(self, t):
        return np.asarray(self.reflector) + t * np.asarray(self.velocity)


@dataclass
class TwoPathPrediction:
    peak: np.ndarray
    """Predicted matched-filter peak magnitude per receiver."""
    normalized: np.ndarray
    """Peak divided by the value the same paths would give with equal carrier phases."""
    delay_s: np.ndarray
    """Round-trip delay of each path, indexed ``[receiver, transmitter]``."""


def two_path_baseline(geometry: TwoPathGeometry, t: float, search: int = 3) -> TwoPathPrediction:
    """Analytic matched-filter peak at each station for pulses emitted by both at time ``t``.

    Each station receives its own echo and the other station's echo off the
    reflector. For every path the bounce instant is found by fixed-point
    iteration (stations are static), giving the exact round-trip delay, the carrier phase
    ``-2 pi fc delay`` and the spherical-spreading amplitude. The predicted
    matched-filter output is the coherent sum of the two delayed
    pulse/template correlations, evaluated on the integer lag grid.
    """
    st = np.asarray(geometry.stations, dtype=float)
    h = np.asarray(geometry.template)
    idx = np.arange(h.size)
    peaks, norms = np.zeros(len(st)), np.zeros(len(st))
    delays = np.zeros((len(st), len(st)))
    for m, rx in enumerate(st):
        amp, phase, shift = [], [], []
        for n, tx in enumerate(st):
            tb = t
            for _ in range(4):
                tb = t + np.linalg.norm(geometry.reflector_at(tb) - tx) / C
            xb = geometry.reflector_at(tb)
            d_in = np.linalg.norm(xb - tx)
            d_out = np.linalg.norm(xb - rx)
            delay = tb + d_out / C - t
            delays[m, n] = delay
            amp.append(geometry.loss_ref_m**2 / (d_in * d_out))
            phase.append(-2 * np.pi * geometry.fc * delay)
            shift.append(delay * geometry.fs)
        centre = int(np.round(np.mean(shift)))
        best, constructive = 0.0, 0.0
        for lag in range(centre - search, centre + search + 1):
            corr = [a * np.sum(np.conj(h) * geometry.pulse(idx + lag - s)) for a, s in zip(amp, shift)]
            best = max(best, abs(sum(c * np.exp(1j * p) for c, p in zip(corr, phase))))
            constructive = max(constructive, abs(sum(corr)))
        peaks[m] = best
        norms[m] = best / constructive if constructive else 0.0
    return TwoPathPrediction(peaks, norms, delays)


def beam_sweep_extract(runs: Sequence, template, normalize: bool = True) -> np.ndarray:
    """Matched-filter peak magnitude of each recording, optionally scaled so the largest is 1."""
    peaks = np.array([matched_filter(r, template).peak_mag for r in runs])
    return peaks / peaks.max() if normalize else peaks


@dataclass
class RayleighFit:
    sigma: float
    ks_statistic: float
    p_value: float


def rayleigh_ks(samples) -> RayleighFit:
    """Maximum-likelihood Rayleigh fit and Kolmogorov-Smirnov statistic against it."""
    x = np.asarray(samples, dtype=float)
    sigma = float(np.sqrt(np.mean(x**2) / 2))
    res = stats.kstest(x, "rayleigh", args=(0.0, sigma))
    return RayleighFit(sigma, float(res.statistic), float(res.pvalue))
