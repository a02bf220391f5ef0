"""Scenario builders shared by the engine tests and the acceptance suite."""

import numpy as np

from dpemu.blocks import SampleBlock
from dpemu.emucore import BlockSource, NodeModel, Scenario, Waypoint
from dpemu.geom import Angle
from dpemu.scatter import ScatterPoint, ScatterProfile
from dpemu.sphharm import AntennaModel, ShBasisSpec


def random_profile(rng, K, order=2, extent_m=1.0):
    spec = ShBasisSpec(order)
    return ScatterProfile(spec, [
        ScatterPoint(rng.uniform(-extent_m, extent_m, 3),
                     rng.normal(size=spec.P) + 1j * rng.normal(size=spec.P),
                     rng.normal(size=spec.P) + 1j * rng.normal(size=spec.P)) for _ in range(K)])


def random_positions(rng, N, box_m=300.0, min_separation_m=60.0):
    while True:
        x = rng.uniform(-box_m, box_m, (N, 3))
        d = np.linalg.norm(x[:, None] - x[None], axis=-1) + np.eye(N) * 1e9
        if d.min() >= min_separation_m:
            return x


def random_scenario(seed, N, K, fs=50e6, n_samples=1200, block=200, speed_mps=40.0, mute=False):
    """``N`` moving nodes with random separable profiles, antennas and noise transmitters."""
    rng = np.random.default_rng(seed)
    pos = random_positions(rng, N)
    nodes = []
    for i in range(N):
        vel = rng.normal(size=3) * speed_mps
        antenna = AntennaModel(ShBasisSpec(1), rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4)),
                               rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4)))
        tx = None
        if i == 0 or rng.random() < 0.5:
            noise = rng.normal(size=n_samples) + 1j * rng.normal(size=n_samples)
            tx = BlockSource(SampleBlock(0, noise))
        nodes.append(NodeModel(
            str(i), [Waypoint(0.0, pos[i], vel)], antenna=antenna,
            steer=[(0.0, Angle(rng.uniform(-180, 180), rng.uniform(0, 180)))],
            profile=random_profile(rng, K), tx=tx,
            rx_offset=rng.normal(size=3) * 0.5 if rng.random() < 0.5 else np.zeros(3),
            mute=frozenset({str((i + 1) % N)}) if mute and N > 2 else frozenset()))
    return Scenario(nodes, fc=1e9, fs=fs, update_interval_s=block / fs, max_range_m=1500.0,
                    duration_s=n_samples / fs, loss_ref_m=50.0)


def relative_rms(a, b):
    a, b = np.asarray(a), np.asarray(b)
    ref = np.sqrt(np.mean(np.abs(b) ** 2))
    err = np.sqrt(np.mean(np.abs(a - b) ** 2))
    return err / ref if ref else err
