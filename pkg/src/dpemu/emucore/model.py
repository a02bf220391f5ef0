"""Scenario description: nodes, trajectories, schedules and transmit sources."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..blocks import SampleBlock
from ..errors import ConfigError
from ..fdelay import METHODS, TAP_COUNTS
from ..geom import Angle, Kinematics, propagate
from ..scatter import ScatterProfile
from ..sphharm import AntennaModel

MAX_POINTS = 16


class TxSource(Protocol):
    def samples(self, start: int, n: int) -> np.ndarray:
        """Transmit samples for absolute indices ``start .. start+n-1`` (zero where silent)."""


@dataclass
class BlockSource:
    """A finite waveform; silent outside its block."""

    block: SampleBlock
    spec: dict | None = None

    def samples(self, start, n):
        out = np.zeros(n, dtype=np.complex128)
        lo = max(start, self.block.start_index)
        hi = min(start + n, self.block.stop_index)
        if hi > lo:
            out[lo - start:hi - start] = self.block.data[lo - self.block.start_index:hi - self.block.start_index]
        return out


@dataclass
class PulseTrainSource:
    """``pulse`` repeated every ``period`` samples from ``start``; ``count`` pulses (None = forever)."""

    pulse: np.ndarray
    period: int
    start: int = 0
    count: int | None = None
    spec: dict | None = None

    def __post_init__(self):
        self.pulse = np.asarray(self.pulse, dtype=np.complex128).ravel()
        if self.period < self.pulse.size:
            raise ConfigError("pulse longer than its repetition period")

    def samples(self, start, n):
        idx = start + np.arange(n) - self.start
        k, offset = np.divmod(idx, self.period)
        on = (idx >= 0) & (offset < self.pulse.size)
        if self.count is not None:
            on &= k < self.count
        out = np.zeros(n, dtype=np.complex128)
        out[on] = self.pulse[offset[on]]
        return out


@dataclass(frozen=True)
class Waypoint:
    t: float
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))


def _latest(schedule, t):
    """Value of a time-sorted ``[(t_i, value_i)]`` schedule at ``t`` (held from each t_i)."""
    value = schedule[0][1]
    for ti, v in schedule:
        if ti <= t:
            value = v
        else:
            break
    return value


@dataclass
class NodeModel:
    """One object in the scene: motion, radiator, scattering profile and optional transmitter."""

    id: str
    waypoints: list[Waypoint]
    antenna: AntennaModel = field(default_factory=AntennaModel.isotropic)
    steer: list[tuple[float, Angle]] = field(default_factory=lambda: [(0.0, Angle(0.0, 0.0))])
    orientation: list[tuple[float, np.ndarray]] = field(default_factory=lambda: [(0.0, np.eye(3))])
    profile: ScatterProfile = field(default_factory=ScatterProfile)
    tx: TxSource | None = None
    rx_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mute: frozenset = frozenset()

    def __post_init__(self):
        if not self.waypoints:
            raise ConfigError(f"node {self.id}: at least one waypoint is required")
        self.waypoints = sorted(self.waypoints, key=lambda w: w.t)
        self.steer = sorted(self.steer, key=lambda s: s[0])
        self.orientation = sorted(((t, np.asarray(r, dtype=float)) for t, r in self.orientation),
                                  key=lambda s: s[0])
        self.rx_offset = np.asarray(self.rx_offset, dtype=float).reshape(3)
        self.mute = frozenset(self.mute)
        if self.id in self.mute:
            raise ConfigError(f"node {self.id}: cannot mute itself")
        if self.profile.K > MAX_POINTS:
            raise ConfigError(f"node {self.id}: {self.profile.K} scattering points exceeds {MAX_POINTS}")

    @property
    def K(self) -> int:
        return self.profile.K

    def kinematics(self, t: float) -> Kinematics:
        """Kinematic state at time ``t`` from the latest waypoint not after ``t``."""
        w = _latest([(w.t, w) for w in self.waypoints], t)
        ref = Kinematics(w.position, w.velocity, reference_time=w.t)
        return Kinematics(propagate(ref, t), w.velocity, _latest(self.orientation, t), t)

    def steer_at(self, t: float) -> Angle:
        return _latest(self.steer, t)


@dataclass
class Scenario:
    nodes: list[NodeModel]
    fc: float
    fs: float
    update_interval_s: float
    max_range_m: float
    duration_s: float
    loss_ref_m: float = 1.0
    filter_method: str = "spline"
    filter_taps: int = 4
    frac_steps: int = 1024

    def __post_init__(self):
        self.validate()

    @property
    def N(self) -> int:
        return len(self.nodes)

    @property
    def block_length(self) -> int:
        return int(round(self.update_interval_s * self.fs))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.fs))

    def index(self, node_id: str) -> int:
        return [n.id for n in self.nodes].index(node_id)

    def validate(self) -> None:
        if self.N < 2:
            raise ConfigError("a scenario needs at least two nodes")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ConfigError("node ids must be unique")
        for n in self.nodes:
            unknown = n.mute - set(ids)
            if unknown:
                raise ConfigError(f"node {n.id}: mute refers to unknown nodes {sorted(unknown)}")
        for name in ("fc", "fs", "update_interval_s", "max_range_m", "duration_s", "loss_ref_m"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        blocks = self.update_interval_s * self.fs
        if self.block_length < 1 or abs(blocks - self.block_length) > 1e-6 * max(blocks, 1.0):
            raise ConfigError("update_interval_s * fs must be a whole number of samples")
        if self.filter_method not in METHODS:
            raise ConfigError(f"unknown filter method {self.filter_method!r}")
        if self.filter_taps not in TAP_COUNTS:
            raise ConfigError(f"filter_taps must be one of {TAP_COUNTS}")
