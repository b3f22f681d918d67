"""Result containers and failure types shared by the recovery solvers."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Status(Enum):
    COMPLETED = "completed"
    EARLY_STOPPED = "early_stopped"
    DIVERGED = "diverged"
    FAILED = "failed"


@dataclass
class TraceRecord:
    """One iteration's worth of diagnostics.

    rel_dist is populated only when the ground truth is known.
    """

    t: int
    residual_norm: float
    nnz: int
    rel_dist: float | None = None


@dataclass
class RecoveryResult:
    """Final iterate plus the per-iteration trace of a solver run."""

    estimate: np.ndarray
    status: Status
    trace: list = field(default_factory=list)

    @property
    def iterations(self):
        """Number of update steps actually taken (the trace includes t=0)."""
        return max(len(self.trace) - 1, 0)


class DivergenceError(RuntimeError):
    """Iterate became non-finite; carries the last finite state."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class ProjectionError(RuntimeError):
    """A model projection could not produce a usable point."""


TRACE_HEADER = ("t", "residual_norm", "nnz", "rel_dist")


def trace_row(record):
    """CSV row for a trace record; blank rel_dist when truth was unknown."""
    rel = "" if record.rel_dist is None else format(record.rel_dist, ".17g")
    return (
        str(record.t),
        format(record.residual_norm, ".17g"),
        str(record.nnz),
        rel,
    )
