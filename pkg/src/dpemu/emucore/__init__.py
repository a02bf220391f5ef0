"""Nodal emulator: scenario model, update schedule, engines and op counts."""

from ..blocks import SampleBlock
from .engine import ENGINES, Emulator, RunResult, run, tdl_step
from .model import (MAX_POINTS, BlockSource, NodeModel, PulseTrainSource, Scenario, TxSource,
                    Waypoint)
from .opcount import CONVENTION, OpCount, count_ops, scaling_r2
from .schedule import Schedule, build_schedule

__all__ = [
    "BlockSource", "CONVENTION", "ENGINES", "Emulator", "MAX_POINTS", "NodeModel", "OpCount",
    "PulseTrainSource", "RunResult", "SampleBlock", "Scenario", "Schedule", "TxSource", "Waypoint",
    "build_schedule", "count_ops", "run", "scaling_r2", "tdl_step",
]
