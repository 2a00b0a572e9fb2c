"""Regret-driven curricula over scenario parameters."""

from .buffer import BufferEntry, LevelBuffer, buffer_insert, buffer_sample, read_snapshot
from .dcd import (
    METHODS,
    CurriculumConfig,
    CurriculumState,
    IterationRecord,
    dcd_iteration,
    initial_generator,
    new_state,
    replay_decision,
)
from .generator import format_generator, parse_generator, update_generator
from .regret import RegretEstimate, mm_regret

__all__ = [
    "BufferEntry", "CurriculumConfig", "CurriculumState", "IterationRecord", "LevelBuffer", "METHODS",
    "RegretEstimate", "buffer_insert", "buffer_sample", "dcd_iteration", "format_generator", "initial_generator",
    "mm_regret", "new_state", "parse_generator", "read_snapshot", "replay_decision", "update_generator",
]
