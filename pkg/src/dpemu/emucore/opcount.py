"""Per-output-sample operation counts of the two engines.

Convention: one operation is one complex multiply-accumulate (CMAC). Every
fractional-delay read costs ``R`` CMACs; scattering weights, antenna gains,
path loss and the link modulation are folded into the taps of the filter they
scale, so they add nothing.

Direct engine, per node ``m`` with ``K_m`` points:
  intermediates ``(N-1) K_m R`` + outputs ``(N-1)(K_m R + R)``.
TDL engine, per ordered pair ``(m, l)``:
  long sparse filter ``(N-1) K_m R`` + transmit path ``R``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONVENTION = (
    "1 op = 1 complex multiply-accumulate per output sample; each R-tap fractional-delay "
    "read costs R; scattering weights, antenna gains, path loss and Doppler modulation "
    "are folded into the taps and cost nothing extra"
)


@dataclass(frozen=True)
class OpCount:
    per_sample_ops: int
    convention: str
    engine: str
    N: int
    R: int


def count_ops(engine: str, N: int, K, R: int = 4) -> OpCount:
    """Operation count for ``N`` nodes with ``K`` points each (scalar or per-node list)."""
    k = np.broadcast_to(np.asarray(K, dtype=np.int64), (N,))
    links = N - 1
    if engine == "direct":
        ops = int(np.sum(links * k * R + links * (k * R + R)))
    elif engine == "tdl":
        ops = int(np.sum(links * (links * k * R + R)))
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return OpCount(ops, CONVENTION, engine, N, R)


SWEEP_N = (4, 8, 16, 32)
SWEEP_K = (1, 4, 16)


def scaling_r2(engine: str, Ns=SWEEP_N, Ks=SWEEP_K, R: int = 4) -> float:
    """R^2 of a through-origin fit of the counts to ``c N^2 K`` (direct) or ``c N^3 K`` (TDL)."""
    power = {"direct": 2, "tdl": 3}[engine]
    x, y = [], []
    for n in Ns:
        for k in Ks:
            x.append(float(n) ** power * k)
            y.append(count_ops(engine, n, k, R).per_sample_ops)
    x, y = np.array(x), np.array(y, dtype=float)
    c = x @ y / (x @ x)
    return float(1 - np.sum((y - c * x) ** 2) / np.sum((y - y.mean()) ** 2))
