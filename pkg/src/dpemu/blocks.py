"""Sample blocks shared by the signal-processing modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SampleBlock:
    """Contiguous complex samples starting at an absolute sample index."""

    start_index: int
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=np.complex128).ravel())

    def __len__(self):
        return self.data.size

    @property
    def stop_index(self) -> int:
        return self.start_index + self.data.size


def as_samples(u) -> np.ndarray:
    """Return the complex sample vector of a SampleBlock or array-like."""
    if isinstance(u, SampleBlock):
        return u.data
    return np.asarray(u, dtype=np.complex128).ravel()
