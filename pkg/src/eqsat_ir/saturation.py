"""The equality saturation driver: match, apply, rebuild, repeat."""

from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

from .ematch import Applier, RewriteError, find_matches
from .eqsat import EGraph
from .patterns import MatchProgram, rhs_actions
from .rebuild import PendingUnions, rebuild


@dataclass(frozen=True)
class SaturationLimits:
    max_iterations: int = 32
    max_enodes: int = 10_000
    time_budget: float = 10.0  # seconds

    def __post_init__(self) -> None:
        if self.max_iterations <= 0 or self.max_enodes <= 0 or self.time_budget <= 0:
            raise ValueError("saturation limits must be positive")


class StopReason(str, Enum):
    SATURATED = "saturated"
    ITERATION_LIMIT = "iteration_limit"
    NODE_LIMIT = "node_limit"
    TIME_LIMIT = "time_limit"


@dataclass(frozen=True)
class IterationStats:
    index: int
    matches: int
    created: int
    unions: int
    rebuild_rounds: int
    num_enodes: int
    num_eclasses: int


@dataclass
class SaturationReport:
    stop_reason: StopReason
    iterations: list[IterationStats] = field(default_factory=list)
    num_enodes: int = 0
    num_eclasses: int = 0
    elapsed: float = 0.0

    @property
    def num_iterations(self) -> int:
        return len(self.iterations)

    @property
    def saturated(self) -> bool:
        return self.stop_reason is StopReason.SATURATED


def saturate(
    egraph: EGraph,
    program: MatchProgram,
    limits: SaturationLimits | None = None,
    *,
    on_iteration: Callable[[IterationStats], None] | None = None,
) -> SaturationReport:
    """Grow ``egraph`` with the rules compiled into ``program``.

    Stops when an iteration changes nothing, or when a limit is hit.  Limits
    are checked before each iteration, so an iteration is never cut short.
    """
    limits = limits or SaturationLimits()
    start = time.monotonic()
    rebuild(egraph)
    report = SaturationReport(StopReason.SATURATED)

    while True:
        if report.num_iterations >= limits.max_iterations:
            report.stop_reason = StopReason.ITERATION_LIMIT
            break
        if egraph.num_enodes > limits.max_enodes:
            report.stop_reason = StopReason.NODE_LIMIT
            break
        if time.monotonic() - start > limits.time_budget:
            report.stop_reason = StopReason.TIME_LIMIT
            break

        matches = find_matches(program, egraph)
        applier = Applier(egraph)
        pending = PendingUnions()
        created = unions = 0
        try:
            for m in matches:
                changes = applier.apply(rhs_actions(program.rules[m.rule], m.bindings, m.root))
                created += len(changes.created)
                unions += len(changes.unions)
                pending.extend(changes.unions)
        except RewriteError:
            rebuild(egraph, pending)
            raise
        rounds = rebuild(egraph, pending)
        stats = IterationStats(
            report.num_iterations,
            len(matches),
            created,
            unions,
            rounds,
            egraph.num_enodes,
            egraph.num_eclasses,
        )
        report.iterations.append(stats)
        if on_iteration is not None:
            on_iteration(stats)
        if created == 0 and unions == 0 and rounds == 0:
            report.stop_reason = StopReason.SATURATED
            break

    report.num_enodes = egraph.num_enodes
    report.num_eclasses = egraph.num_eclasses
    report.elapsed = time.monotonic() - start
    return report
