"""Deep-training slope schedules.

The leaky-ReLU slope a is driven from 0 toward 1 over training so that the
network starts deep (slope 0 means a real nonlinearity between the paired
convs) and ends shallow (slope 1 makes the pair linear and foldable):

    cosine: a(e) = 1 - cos(pi * e / (2 * E))
    linear: a(e) = e / E

Both are monotone on [0, E] with a(0) = 0 and a(E) = 1. The endpoints are
pinned exactly rather than left to floating point (cos(pi/2) in doubles is
6e-17, not 0), because downstream folding requires a == 1 precisely.
"""

import math
from dataclasses import dataclass

METHODS = ("cosine", "linear")


@dataclass(frozen=True)
class ScheduleSpec:
    method: str
    total_epochs: int

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.total_epochs < 1:
            raise ValueError(f"total_epochs must be >= 1, got {self.total_epochs}")


def slope(spec: ScheduleSpec, epoch: int) -> float:
    """Slope a(epoch) for epoch in 0..total_epochs inclusive."""
    e, total = epoch, spec.total_epochs
    if not 0 <= e <= total:
        raise ValueError(f"epoch must be in [0, {total}], got {e}")
    if e == 0:
        return 0.0
    if e == total:
        return 1.0
    if spec.method == "cosine":
        return 1.0 - math.cos(math.pi * e / (2.0 * total))
    return e / total
