"""Direct-path and tapped-delay-line engines.

Both engines advance through the same segments and keep the same per-node
input lines (``arrivals[m]`` holds ``y_{n,m}`` on channel ``n``). They differ in
how a scattering node forms its outputs:

* direct: node ``m`` forms ``K`` intermediate signals once per sample,
  ``v_{m,k}(t) = sum_n alpha_{m,k,n} y_{n,m}(t - Delta_m - tau_{n,k})``, buffers
  them, and every output reads them back through one more fractional delay;
* TDL: every output re-evaluates the full double sum over ``(n, k)`` from the
  input lines, i.e. one long sparse filter per pair.

The TDL engine evaluates intermediates with the parameters of the update their
sample belongs to, exactly as the direct engine did when it produced them, so
the two engines agree to floating-point round-off.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..blocks import SampleBlock
from ..fdelay import DelayLine, FilterBank, buffer_length
from .model import Scenario
from .opcount import OpCount, count_ops
from .schedule import TWO_PI, Schedule, build_schedule

ENGINES = ("direct", "tdl")


@dataclass
class Segment:
    start: int
    times: np.ndarray
    u: int
    delay: np.ndarray      # (N, N, S) propagation delay per sample
    factor: np.ndarray     # (N, N, S) loss times Doppler/carrier phasor


@dataclass
class RunResult:
    receivers: dict[str, SampleBlock]
    latency_samples: dict[str, int]
    opcount: OpCount
    engine: str


class Emulator:
    """Stateful emulation of a scenario, one segment at a time."""

    def __init__(self, scn: Scenario, engine: str = "direct", workers: int = 1,
                 schedule: Schedule | None = None):
        if engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        self.scn = scn
        self.engine = engine
        self.workers = workers
        self.sched = schedule if schedule is not None else build_schedule(scn)
        self.bank = FilterBank(scn.filter_method, scn.filter_taps, scn.frac_steps)
        s = self.sched
        N = scn.N
        # A segment (at most one block) is written before any of it is read back.
        cap = (s.block + 2 * buffer_length(scn.max_range_m, scn.fs) + 2 * int(s.latency.max())
               + 2 * int(s.rx_latency.max()) + 8 * s.R + 16)
        self.capacity = cap
        self.tx_lines = [DelayLine(cap) if n.tx is not None else None for n in scn.nodes]
        self.arrivals = [DelayLine(cap, channels=N) for _ in range(N)]
        self.intermediates = [DelayLine(cap, channels=int(k)) if (k and engine == "direct") else None
                              for k in s.K]
        self.position = 0

    def _map(self, fn, items):
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(i) for i in items]

    def _segment(self, start: int, length: int) -> Segment:
        s = self.sched
        u = start // s.block
        times = start + np.arange(length)
        frac = (times - u * s.block) / s.block
        d0, d1 = s.delay[u], s.delay[u + 1]
        delay = d0[..., None] + (d1 - d0)[..., None] * frac
        phase = s.phase0[u][..., None] + TWO_PI * s.doppler[u][..., None] * ((times - u * s.block) / s.fs)
        factor = s.loss[u][..., None] * np.exp(1j * phase)
        return Segment(start, times, u, delay, factor)

    def _others(self, m):
        return np.array([l for l in range(self.scn.N) if l != m])

    def dp_node_output(self, m: int, seg: Segment) -> np.ndarray:
        """Outputs ``y_{m,l}`` of node ``m`` for all ``l`` over the segment; shape ``(N, S)``."""
        s, N = self.sched, self.scn.N
        L = self._others(m)
        S = seg.times.size
        acc = np.zeros((L.size, S), dtype=np.complex128)
        d = seg.delay[m, L]
        if self.tx_lines[m] is not None:
            acc += s.gtx[seg.u, m, L][:, None] * self.tx_lines[m].read(seg.times[None, :], d, self.bank)
        k = int(s.K[m])
        if k:
            d2 = d[:, None, :] - s.tau_out[seg.u, m, L, :k][:, :, None] - s.latency[m]
            if self.engine == "direct":
                v = self.intermediates[m].read(seg.times, d2, self.bank, channel=np.arange(k)[None, :, None])
            else:
                v = self._tdl_intermediates(m, seg.times, d2)
            acc += np.einsum("lk,lks->ls", s.beta[seg.u, m, L, :k], v)
        out = np.zeros((N, S), dtype=np.complex128)
        out[L] = seg.factor[m, L] * acc
        return out

    def _tdl_intermediates(self, m, times, d2):
        """Delayed intermediates recomputed from the input lines (no intermediate buffering)."""
        s = self.sched
        k = int(s.K[m])
        src = self._others(m)
        i0, taps = self.bank.split(d2)                                   # (L, k, S), (L, k, S, R)
        tp = (times - i0)[..., None] - np.arange(s.R)                     # (L, k, S, R)
        u = s.update_of(tp)
        kk = np.arange(k)[:, None, None]
        n = src[:, None, None, None, None]
        d1 = s.tau_in[u[None], m, n, kk[None, None]]
        a = s.alpha[u[None], m, n, kk[None, None]]
        w = self.arrivals[m].read(tp[None], d1, self.bank, channel=n)
        return np.sum(np.sum(a * w, axis=0) * taps, axis=-1)

    def dp_node_intermediates(self, m: int, seg: Segment) -> np.ndarray:
        """Intermediate signals ``v_{m,k}`` over the segment; shape ``(K, S)``."""
        s = self.sched
        k = int(s.K[m])
        src = self._others(m)
        d1 = s.tau_in[seg.u, m, src, :k][:, :, None]
        w = self.arrivals[m].read(seg.times[None, None, :], d1, self.bank, channel=src[:, None, None])
        return np.einsum("nk,nks->ks", s.alpha[seg.u, m, src, :k], w)

    def _receive(self, m: int, seg: Segment, y: np.ndarray) -> np.ndarray:
        s = self.sched
        src = self._others(m)
        g = s.grx[seg.u, m, src]
        if s.rx_latency[m] == 0:
            return g @ y[src, m]
        d = np.broadcast_to(s.rx_delay[seg.u, m, src][:, None], (src.size, seg.times.size))
        w = self.arrivals[m].read(seg.times[None, :], d, self.bank, channel=src[:, None])
        return g @ w

    def step(self, length: int | None = None) -> tuple[Segment, np.ndarray, np.ndarray]:
        """Advance one segment; returns (segment, outputs y[m, l, :], receiver streams r[m, :])."""
        s, N = self.sched, self.scn.N
        start = self.position
        u = start // s.block
        limit = min(s.max_segment(u), (u + 1) * s.block - start, s.n_samples - start)
        if length is not None:
            limit = min(limit, length)
        seg = self._segment(start, limit)
        for m, node in enumerate(self.scn.nodes):
            if node.tx is not None:
                self.tx_lines[m].write(node.tx.samples(start, limit))
        y = np.stack(self._map(lambda m: self.dp_node_output(m, seg), range(N)))
        for m in range(N):
            self.arrivals[m].write(y[:, m])
        if self.engine == "direct":
            active = [m for m in range(N) if s.K[m]]
            for m, v in zip(active, self._map(lambda m: self.dp_node_intermediates(m, seg), active)):
                self.intermediates[m].write(v)
        r = np.stack([self._receive(m, seg, y) for m in range(N)])
        self.position += limit
        return seg, y, r


def run(scn: Scenario, engine: str = "direct", workers: int = 1, record=None) -> RunResult:
    """Emulate the whole scenario and return the receiver stream of every recorded node.

    Receiver ``m``'s stream at index ``i`` is the received signal at time
    ``(i - latency) / fs``, where the latency is nonzero only for nodes whose
    receiver is offset from the phase center.
    """
    emu = Emulator(scn, engine, workers)
    ids = [n.id for n in scn.nodes]
    keep = [i for i, nid in enumerate(ids) if record is None or nid in record]
    streams = np.zeros((len(keep), scn.n_samples), dtype=np.complex128)
    while emu.position < scn.n_samples:
        seg, _, r = emu.step()
        streams[:, seg.start:seg.start + seg.times.size] = r[keep]
    return RunResult(
        receivers={ids[i]: SampleBlock(0, streams[j]) for j, i in enumerate(keep)},
        latency_samples={ids[i]: int(emu.sched.rx_latency[i]) for i in keep},
        opcount=count_ops(engine, scn.N, [n.K for n in scn.nodes], scn.filter_taps),
        engine=engine,
    )


def tdl_step(emu: Emulator, length: int | None = None):
    """One lockstep segment of the TDL reference engine."""
    if emu.engine != "tdl":
        raise ValueError("emulator was not built with the TDL engine")
    return emu.step(length)
