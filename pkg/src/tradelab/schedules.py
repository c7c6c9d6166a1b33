"""Shared hyperparameter schedules."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class LinearSchedule:
    """Linear interpolation from start to end over decay_steps, constant
    afterwards; value(decay_steps) == end exactly."""

    start: float
    end: float
    decay_steps: int

    def value(self, step: int) -> float:
        if self.decay_steps <= 0 or step >= self.decay_steps:
            return self.end
        frac = step / self.decay_steps
        return self.start + (self.end - self.start) * frac
