"""Interval timelines and domain types for advance resource booking.

A timeline covers [0, INFINITE) with contiguous, sorted, half-open
intervals.  Each interval carries the ids of the tasks booked on it and the
summed load percentage of those tasks.  Booking a task splits intervals at
the task's window edges, raises usage inside the window, and re-merges
adjacent intervals whose task sets became identical, so two timelines
holding the same bookings always compare structurally equal regardless of
booking order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

INFINITE = 2**63 - 1

DEFAULT_MAX_LOAD = 85
DEFAULT_MAX_TASKS = 5

LOAD_CAP = "load_cap"
TASK_CAP = "task_cap"


class SchedulerError(Exception):
    """Base class for errors raised by this package."""


class DuplicateTaskError(SchedulerError):
    def __init__(self, task_id: str) -> None:
        self.task_id = task_id
        super().__init__(f"task {task_id!r} already present")


class InfeasibleError(SchedulerError):
    """Booking rejected; `condition` names the first violated cap."""

    def __init__(self, task_id: str, condition: str) -> None:
        self.task_id = task_id
        self.condition = condition  # LOAD_CAP or TASK_CAP
        super().__init__(f"cannot book task {task_id!r}: {condition}")


@dataclass(frozen=True)
class Task:
    """A unit of work over the half-open window [start, end), in seconds.

    Two tasks touching at a boundary (one ends where the other starts) do
    not interact.
    """

    task_id: str
    start: int
    end: int
    load: int

    def __post_init__(self) -> None:
        if not self.task_id:
            raise ValueError("task_id must be non-empty")
        if not 0 <= self.start < self.end <= INFINITE:
            raise ValueError(
                f"task {self.task_id!r}: need 0 <= start < end <= INFINITE"
            )
        if not 0 < self.load <= 100:
            raise ValueError(f"task {self.task_id!r}: load must be in 1..100")


@dataclass(frozen=True)
class NodeSpec:
    """A processing resource.

    The capability figures (cpu_power_mhz, memory_mb, cpu_idle_percent) are
    carried as metadata only; booking decisions use interval usage alone.
    """

    node_id: str
    node_name: str = ""
    cluster_name: str = ""
    farm_name: str = ""
    cpu_power_mhz: float = 0.0
    memory_mb: float = 0.0
    cpu_idle_percent: int = 100

    def __post_init__(self) -> None:
        if not self.node_id:
            raise ValueError("node_id must be non-empty")
        if self.cpu_power_mhz < 0 or self.memory_mb < 0:
            raise ValueError(f"node {self.node_id!r}: capabilities must be >= 0")
        if not 0 <= self.cpu_idle_percent <= 100:
            raise ValueError(f"node {self.node_id!r}: cpu_idle_percent in 0..100")


@dataclass(frozen=True)
class SchedulerLimits:
    """Caps applied to every interval: summed load and concurrent task count."""

    max_load: int = DEFAULT_MAX_LOAD
    max_tasks: int = DEFAULT_MAX_TASKS

    def __post_init__(self) -> None:
        if not 0 < self.max_load <= 100:
            raise ValueError("max_load must be in 1..100")
        if self.max_tasks < 1:
            raise ValueError("max_tasks must be >= 1")


@dataclass(frozen=True)
class Interval:
    """A maximal span during which the set of booked tasks is constant.

    task_ids is kept sorted; usage is the sum of the member tasks' loads.
    """

    start: int
    end: int
    task_ids: tuple[str, ...] = ()
    usage: int = 0


@dataclass(frozen=True)
class Feasibility:
    """Outcome of a placement probe; projected_peak is set only when feasible."""

    feasible: bool
    projected_peak: int | None = None

    def __bool__(self) -> bool:
        return self.feasible


@dataclass(frozen=True)
class Violation:
    rule: str
    index: int | None
    detail: str


def _merge_adjacent(intervals: list[Interval]) -> tuple[Interval, ...]:
    merged: list[Interval] = []
    for itv in intervals:
        if merged and merged[-1].task_ids == itv.task_ids:
            prev = merged[-1]
            merged[-1] = Interval(prev.start, itv.end, prev.task_ids, prev.usage)
        else:
            merged.append(itv)
    return tuple(merged)


@dataclass(frozen=True)
class ResourceTimeline:
    """Booking state of one resource: contiguous intervals plus a load lookup.

    Value semantics: `place` returns a new timeline and never mutates the
    receiver, so cloning a table of timelines is a shallow dict copy.
    """

    intervals: tuple[Interval, ...]
    loads: dict[str, int] = field(default_factory=dict)

    def interval_at(self, time: int) -> Interval:
        for itv in self.intervals:
            if itv.start <= time < itv.end:
                return itv
        raise ValueError(f"time {time} not covered by timeline")

    def _probe(self, task: Task, limits: SchedulerLimits):
        """Check caps on every interval the task window overlaps.

        Returns (feasible, projected_peak, first_violated_condition).
        """
        peak = 0
        for itv in self.intervals:
            if itv.end <= task.start or itv.start >= task.end:
                continue
            if itv.usage + task.load > limits.max_load:
                return False, None, LOAD_CAP
            if len(itv.task_ids) + 1 > limits.max_tasks:
                return False, None, TASK_CAP
            peak = max(peak, itv.usage + task.load)
        return True, peak, None

    def can_place(self, task: Task, limits: SchedulerLimits = SchedulerLimits()) -> Feasibility:
        """Probe whether the task fits without modifying the timeline."""
        if task.task_id in self.loads:
            raise DuplicateTaskError(task.task_id)
        feasible, peak, _ = self._probe(task, limits)
        return Feasibility(feasible, peak if feasible else None)

    def place(self, task: Task, limits: SchedulerLimits = SchedulerLimits()) -> ResourceTimeline:
        """Book the task, returning a new canonical timeline."""
        if task.task_id in self.loads:
            raise DuplicateTaskError(task.task_id)
        feasible, _, condition = self._probe(task, limits)
        if not feasible:
            raise InfeasibleError(task.task_id, condition)
        out: list[Interval] = []
        for itv in self.intervals:
            if itv.end <= task.start or itv.start >= task.end:
                out.append(itv)
                continue
            if itv.start < task.start:
                out.append(Interval(itv.start, task.start, itv.task_ids, itv.usage))
            lo = max(itv.start, task.start)
            hi = min(itv.end, task.end)
            ids = tuple(sorted(itv.task_ids + (task.task_id,)))
            out.append(Interval(lo, hi, ids, itv.usage + task.load))
            if itv.end > task.end:
                out.append(Interval(task.end, itv.end, itv.task_ids, itv.usage))
        loads = dict(self.loads)
        loads[task.task_id] = task.load
        return ResourceTimeline(_merge_adjacent(out), loads)

    def average_load(self) -> Fraction:
        """Unweighted mean usage over the bounded intervals.

        The trailing [x, INFINITE) interval is excluded; a pristine timeline
        averages to 0.
        """
        bounded = [itv for itv in self.intervals if itv.end != INFINITE]
        if not bounded:
            return Fraction(0)
        return Fraction(sum(itv.usage for itv in bounded), len(bounded))

    def validate(self, limits: SchedulerLimits = SchedulerLimits()) -> list[Violation]:
        """Structural invariant check; returns one record per breach."""
        v: list[Violation] = []
        if not self.intervals:
            return [Violation("coverage", None, "timeline has no intervals")]
        if self.intervals[0].start != 0:
            v.append(Violation("coverage_start", 0, f"first interval starts at {self.intervals[0].start}, not 0"))
        if self.intervals[-1].end != INFINITE:
            v.append(Violation("coverage_end", len(self.intervals) - 1, "last interval does not end at INFINITE"))
        for i, itv in enumerate(self.intervals):
            if itv.start >= itv.end:
                v.append(Violation("bounds", i, f"interval [{itv.start}, {itv.end}) is empty or inverted"))
            if i > 0:
                prev = self.intervals[i - 1]
                if itv.start > prev.end:
                    v.append(Violation("gap", i, f"gap between {prev.end} and {itv.start}"))
                elif itv.start < prev.end:
                    v.append(Violation("overlap", i, f"interval starts at {itv.start} before previous end {prev.end}"))
                elif itv.task_ids == prev.task_ids:
                    v.append(Violation("not_canonical", i, "adjacent intervals share an identical task set"))
            if tuple(sorted(set(itv.task_ids))) != itv.task_ids:
                v.append(Violation("task_ids_order", i, "task ids are not a sorted set"))
            unknown = [t for t in itv.task_ids if t not in self.loads]
            if unknown:
                v.append(Violation("unknown_task", i, f"tasks {unknown} missing from the load lookup"))
            else:
                expected = sum(self.loads[t] for t in itv.task_ids)
                if expected != itv.usage:
                    v.append(Violation("usage_sum", i, f"usage {itv.usage} != sum of member loads {expected}"))
            if itv.usage > limits.max_load:
                v.append(Violation("load_cap", i, f"usage {itv.usage} exceeds max_load {limits.max_load}"))
            if len(itv.task_ids) > limits.max_tasks:
                v.append(Violation("task_cap", i, f"{len(itv.task_ids)} tasks exceed max_tasks {limits.max_tasks}"))
        for task_id in sorted(self.loads):
            load = self.loads[task_id]
            if not 0 < load <= 100:
                v.append(Violation("load_value", None, f"task {task_id!r} has load {load} outside 1..100"))
            indices = [i for i, itv in enumerate(self.intervals) if task_id in itv.task_ids]
            if not indices:
                v.append(Violation("orphan_task", None, f"task {task_id!r} appears in no interval"))
            elif indices != list(range(indices[0], indices[-1] + 1)):
                v.append(Violation("task_coverage", None, f"task {task_id!r} covers non-contiguous intervals {indices}"))
        return v


def new_timeline() -> ResourceTimeline:
    """A pristine timeline: the single interval [0, INFINITE), no tasks, usage 0."""
    return ResourceTimeline((Interval(0, INFINITE, (), 0),), {})


# Mapping from node id to that node's timeline; one per agent.
DynamicTable = dict[str, ResourceTimeline]
