"""Complex-baseband test waveforms and the cf32 sample format."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..blocks import SampleBlock
from ..errors import BandExceeded, ConfigError

DEFAULT_OVERSAMPLING = 0.25
KINDS = ("tone", "lfm", "pulse_train", "file")


def hann(n: int) -> np.ndarray:
    """Periodic Hann window ``sin^2(pi i / n)``."""
    return np.sin(np.pi * np.arange(n) / n) ** 2


def hann_envelope(n: int):
    """Continuous counterpart of :func:`hann` as a function of time in samples."""
    def envelope(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= n), np.sin(np.pi * x / n) ** 2, 0.0)
    return envelope


def _band_check(edge_hz, fs, oversampling):
    limit = fs / (2 * (1 + oversampling))
    if edge_hz > limit * (1 + 1e-12):
        raise BandExceeded(f"band edge {edge_hz:.6g} Hz exceeds {limit:.6g} Hz at fs = {fs:.6g} Hz")


def _window(name, n):
    if name in (None, "rect"):
        return np.ones(n)
    if name == "hann":
        return hann(n)
    raise ConfigError(f"unknown window {name!r}")


def _pulse(kind, params, fs, n, oversampling):
    t = np.arange(n) / fs
    amp = params.get("amplitude", 1.0)
    if kind == "tone":
        f = params.get("freq_hz", 0.0)
        _band_check(abs(f), fs, oversampling)
        x = np.exp(2j * np.pi * f * t)
    elif kind == "lfm":
        b = params["bandwidth_hz"]
        _band_check(b / 2, fs, oversampling)
        T = n / fs
        x = np.exp(1j * np.pi * b / T * (t - T / 2) ** 2)
    else:
        raise ConfigError(f"unknown pulse kind {kind!r}")
    return amp * x * _window(params.get("window"), n)


def read_cf32(path) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f4")
    return (raw[0::2] + 1j * raw[1::2]).astype(np.complex128)


def write_cf32(path, data, header: dict | None = None) -> None:
    """Write interleaved little-endian float32 I/Q, plus a JSON sidecar when a header is given."""
    x = np.asarray(data, dtype=np.complex128)
    out = np.empty(2 * x.size, dtype="<f4")
    out[0::2] = x.real
    out[1::2] = x.imag
    out.tofile(path)
    if header is not None:
        Path(str(path) + ".json").write_text(json.dumps(header, indent=2))


def waveform_gen(kind: str, params: dict, fs: float, duration: float,
                 oversampling: float = DEFAULT_OVERSAMPLING) -> SampleBlock:
    """Generate a complex baseband waveform.

    ``tone``: ``freq_hz`` (default 0), ``amplitude``, ``window`` (rect/hann).
    ``lfm``: ``bandwidth_hz``; sweeps linearly from -B/2 to +B/2 over ``duration``.
    ``pulse_train``: ``on_s``, ``off_s`` and a ``pulse`` {kind, params} repeated to fill ``duration``.
    ``file``: ``path`` to cf32 samples (truncated or zero-padded to ``duration``).
    Optional ``start_s`` delays the waveform.
    """
    n = int(round(duration * fs))
    start = int(round(params.get("start_s", 0.0) * fs))
    if kind in ("tone", "lfm"):
        return SampleBlock(start, _pulse(kind, params, fs, n, oversampling))
    if kind == "pulse_train":
        pulse, period = pulse_train_parts(params, fs, oversampling)
        reps = -(-n // period)
        frame = np.zeros(period, dtype=np.complex128)
        frame[:pulse.size] = pulse
        return SampleBlock(start, np.tile(frame, reps)[:n])
    if kind == "file":
        x = read_cf32(params["path"])
        out = np.zeros(n, dtype=np.complex128)
        out[:min(n, x.size)] = x[:n]
        return SampleBlock(start, out)
    raise ConfigError(f"unknown waveform kind {kind!r}")


def pulse_train_parts(params: dict, fs: float, oversampling: float = DEFAULT_OVERSAMPLING):
    """Sampled pulse and repetition period (samples) of a pulse-train description."""
    on = int(round(params["on_s"] * fs))
    period = on + int(round(params["off_s"] * fs))
    inner = params.get("pulse", {"kind": "tone", "params": {}})
    inner_params = dict(inner.get("params", {}))
    inner_params.setdefault("window", params.get("window"))
    return _pulse(inner["kind"], inner_params, fs, on, oversampling), period
