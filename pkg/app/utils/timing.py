import time
from contextlib import contextmanager
from typing import Iterator, List, Optional

from app.models.dtos import StepInfo, StepName


class StepClock:
    """Running clock of one step; the body may set `count` (samples, atoms, models)."""

    def __init__(self):
        self.started = time.perf_counter()
        self.count: Optional[int] = None

    def elapsed_ms(self) -> int:
        return elapsed_ms(self.started)


def elapsed_ms(started: float) -> int:
    return int((time.perf_counter() - started) * 1000)


@contextmanager
def step_timer(name: Optional[StepName] = None, steps: Optional[List[StepInfo]] = None) -> Iterator[StepClock]:
    """Yield a StepClock; record a StepInfo with its count on exit when named."""
    clock = StepClock()
    try:
        yield clock
    finally:
        if name is not None and steps is not None:
            steps.append(StepInfo(name=name, ms=clock.elapsed_ms(), count=clock.count))
