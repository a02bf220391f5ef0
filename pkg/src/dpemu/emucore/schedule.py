"""Per-update channel parameters for every ordered node pair.

All delays are in samples. Carrier phases of the scatterer and receiver
offsets are folded into the weights so that the engines only apply real
fractional delays and complex gains:

* ``alpha[u, m, n, k]`` weights the arrival from ``n`` into intermediate ``k``
  of node ``m`` and includes ``exp(-j 2 pi fc tau_{n,k})``;
* ``beta[u, m, l, k]`` weights intermediate ``k`` on the way to ``l`` and
  includes ``exp(+j 2 pi fc tau_{k,l})``;
* ``grx[u, m, n]`` is node ``m``'s receive gain toward ``n`` times
  ``exp(-j 2 pi fc tau_{n,r})``.

The propagation delay of pair ``(m, l)`` is sampled at every update boundary
and slews linearly in between. The Doppler frequency held over an update is
the mean over that update, ``-fc (tau_{u+1} - tau_u) / T``, which keeps the
carrier phase equal to ``-2 pi fc tau`` at every boundary. Everything else is
held over the update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CausalityViolation, ConfigError
from ..geom import C, direction_angles, path_between
from .model import Scenario

TWO_PI = 2 * np.pi


@dataclass
class Schedule:
    fs: float
    block: int
    n_updates: int
    n_samples: int
    R: int
    delay: np.ndarray        # (U+1, N, N) propagation delay m -> l at each boundary
    doppler: np.ndarray      # (U, N, N) Hz
    loss: np.ndarray         # (U, N, N)
    phase0: np.ndarray       # (U, N, N) carrier/Doppler phase at the start of each update
    gtx: np.ndarray          # (U, N, N) transmit gain m -> l
    grx: np.ndarray          # (U, N, N) receive gain at m from n
    rx_delay: np.ndarray     # (U, N, N) receive-offset delay at m for arrivals from n
    alpha: np.ndarray        # (U, N, N, Kmax)
    tau_in: np.ndarray       # (U, N, N, Kmax) includes the node latency Delta_m
    beta: np.ndarray         # (U, N, N, Kmax)
    tau_out: np.ndarray      # (U, N, N, Kmax)
    latency: np.ndarray      # (N,) integer Delta_m
    rx_latency: np.ndarray   # (N,) integer receive latency (0 = pass-through)
    K: np.ndarray            # (N,)

    def update_of(self, index):
        return np.clip(np.asarray(index) // self.block, 0, self.n_updates - 1)

    def max_segment(self, u: int) -> int:
        """Longest segment in update ``u`` whose outputs only read already-computed intermediates."""
        limit = self.block
        half = self.R // 2 - 1
        N = self.K.size
        for m in range(N):
            if self.K[m] == 0:
                continue
            for l in range(N):
                if l == m:
                    continue
                d = min(self.delay[u, m, l], self.delay[u + 1, m, l])
                d2 = d - self.tau_out[u, m, l, :self.K[m]].max() - self.latency[m]
                limit = min(limit, int(np.floor(d2)) - half)
        if limit < 1:
            raise CausalityViolation(
                "scatterer extent and node latency exceed the inter-node delay; nodes are too close")
        return limit


def _local_gain(antenna, steer, out_az, out_pol):
    return antenna.gain_matrix(steer, (out_az, out_pol))[0]


def build_schedule(scn: Scenario) -> Schedule:
    N, fs, fc = scn.N, scn.fs, scn.fc
    U = scn.block_length
    n_samples = scn.n_samples
    n_upd = max(1, -(-n_samples // U))
    R = scn.filter_taps
    K = np.array([n.K for n in scn.nodes])
    Kmax = max(1, int(K.max()))

    extent = np.array([np.linalg.norm(n.profile.locations, axis=1).max() if n.K else 0.0 for n in scn.nodes])
    latency = np.where(K > 0, np.ceil(extent / C * fs).astype(int) + R // 2, 0)
    rx_ext = np.array([np.linalg.norm(n.rx_offset) for n in scn.nodes])
    rx_latency = np.where(rx_ext > 0, np.ceil(rx_ext / C * fs).astype(int) + R // 2, 0)

    shape = (n_upd, N, N)
    delay = np.zeros((n_upd + 1, N, N))
    loss = np.zeros(shape)
    gtx, grx = np.zeros(shape, complex), np.zeros(shape, complex)
    rx_delay = np.zeros(shape)
    alpha, beta = np.zeros(shape + (Kmax,), complex), np.zeros(shape + (Kmax,), complex)
    tau_in, tau_out = np.zeros(shape + (Kmax,)), np.zeros(shape + (Kmax,))

    for u in range(n_upd + 1):
        t = u * U / fs
        kin = [n.kinematics(t) for n in scn.nodes]
        # out_dir[m, l]: propagation direction m -> l in m's frame; in_dir[l, m]: arriving at l from m.
        out_dir = np.zeros((N, N, 3))
        in_dir = np.zeros((N, N, 3))
        for m in range(N):
            for l in range(N):
                if l == m:
                    continue
                ps = path_between(kin[m], kin[l], fc, t, scn.loss_ref_m)
                if ps.distance_m > scn.max_range_m:
                    raise ConfigError(
                        f"distance {scn.nodes[m].id}->{scn.nodes[l].id} of {ps.distance_m:.1f} m "
                        f"exceeds max_range_m")
                delay[u, m, l] = ps.delay_s * fs
                if u == n_upd:
                    continue
                loss[u, m, l] = ps.loss_amp
                out_dir[m, l] = ps.outgoing.unit()
                in_dir[l, m] = ps.incoming.unit()
        if u == n_upd:
            break
        for m, node in enumerate(scn.nodes):
            others = [l for l in range(N) if l != m]
            steer = node.steer_at(t)
            o_az, o_pol = direction_angles(out_dir[m, others])
            g = _local_gain(node.antenna, steer, o_az, o_pol)
            rx_tau = in_dir[m, others] @ node.rx_offset / C
            for j, l in enumerate(others):
                on_tx = 0.0 if scn.nodes[l].id in node.mute else 1.0
                gtx[u, m, l] = on_tx * g[j]
                grx[u, m, l] = on_tx * g[j] * np.exp(-1j * TWO_PI * fc * rx_tau[j])
                rx_delay[u, m, l] = rx_latency[m] + rx_tau[j] * fs
            k = node.K
            if k:
                i_az, i_pol = direction_angles(in_dir[m, others])
                a, ti = node.profile.incoming(i_az, i_pol)
                b, to = node.profile.outgoing(o_az, o_pol)
                alpha[u, m, others, :k] = a * np.exp(-1j * TWO_PI * fc * ti)
                tau_in[u, m, others, :k] = latency[m] + ti * fs
                beta[u, m, others, :k] = b * np.exp(1j * TWO_PI * fc * to)
                tau_out[u, m, others, :k] = to * fs

    # Held Doppler of each update is its mean over the update, so the carrier phase
    # -2 pi fc tau is exact at every boundary and never drifts over long runs.
    doppler = -fc * np.diff(delay, axis=0) / U
    phase0 = np.mod(-TWO_PI * fc * delay[:-1] / fs, TWO_PI)
    return Schedule(fs, U, n_upd, n_samples, R, delay, doppler, loss, phase0, gtx, grx, rx_delay,
                    alpha, tau_in, beta, tau_out, latency, rx_latency, K)
