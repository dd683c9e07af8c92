"""Agent-side booking logic.

An agent owns a table of per-node timelines.  For each incoming batch it
schedules tentatively on a clone of the table and replies with offers; only
the subset the coordinator later accepts is committed to the real table,
and rejected offers leave no trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .model import (
    DynamicTable,
    NodeSpec,
    SchedulerError,
    SchedulerLimits,
    Task,
    DuplicateTaskError,
    new_timeline,
)


class DuplicateNodeError(SchedulerError):
    def __init__(self, node_id: str) -> None:
        self.node_id = node_id
        super().__init__(f"node {node_id!r} configured twice")


class BatchInFlightError(SchedulerError):
    def __init__(self, batch_id: str) -> None:
        self.batch_id = batch_id
        super().__init__(f"batch {batch_id!r} is still awaiting a decision")


class NoPendingBatchError(SchedulerError):
    def __init__(self) -> None:
        super().__init__("no batch is awaiting a decision")


class BatchIdMismatchError(SchedulerError):
    def __init__(self, expected: str, got: str) -> None:
        self.expected = expected
        self.got = got
        super().__init__(f"decision for batch {got!r} but {expected!r} is pending")


class UnknownTaskAcceptedError(SchedulerError):
    def __init__(self, task_ids: Sequence[str]) -> None:
        self.task_ids = tuple(task_ids)
        super().__init__(f"accepted tasks never offered: {', '.join(self.task_ids)}")


@dataclass(frozen=True)
class Offer:
    """A tentative booking: the task, the chosen node, and the peak load the
    node would reach inside the task's window."""

    task_id: str
    node_id: str
    projected_load: int


@dataclass(frozen=True)
class NodeMetrics:
    average_load: Fraction
    task_count: int


@dataclass(frozen=True)
class AgentMetrics:
    per_node: dict[str, NodeMetrics]

    @property
    def total_tasks(self) -> int:
        return sum(m.task_count for m in self.per_node.values())


@dataclass
class PendingBatch:
    batch_id: str
    clone: DynamicTable
    offers: list[Offer]
    tasks: dict[str, Task]  # bodies of the offered tasks, needed at commit
    limits: SchedulerLimits


def init_table(nodes: Iterable[NodeSpec]) -> DynamicTable:
    """One pristine timeline per configured node."""
    table: DynamicTable = {}
    for node in nodes:
        if node.node_id in table:
            raise DuplicateNodeError(node.node_id)
        table[node.node_id] = new_timeline()
    return table


class Agent:
    """Holds committed bookings and at most one in-flight batch proposal."""

    def __init__(self, name: str, nodes: Iterable[NodeSpec],
                 limits: SchedulerLimits = SchedulerLimits()) -> None:
        if not name:
            raise ValueError("agent name must be non-empty")
        nodes = list(nodes)
        self.name = name
        self.table: DynamicTable = init_table(nodes)
        self.nodes = {n.node_id: n for n in nodes}
        self.limits = limits
        self.pending: PendingBatch | None = None

    def _committed_ids(self) -> set[str]:
        ids: set[str] = set()
        for timeline in self.table.values():
            ids.update(timeline.loads)
        return ids

    def propose_batch(self, batch_id: str, tasks: Sequence[Task],
                      limits: SchedulerLimits | None = None) -> list[Offer]:
        """Schedule the batch tentatively on a clone of the table.

        Tasks are processed in batch order.  For each one the least-loaded
        feasible node wins (lowest projected peak, then fewest tasks already
        on the node, then smallest node id); tasks with no feasible node get
        no offer.  The committed table is untouched.
        """
        if self.pending is not None:
            raise BatchInFlightError(self.pending.batch_id)
        limits = limits if limits is not None else self.limits
        seen: set[str] = set()
        committed = self._committed_ids()
        for task in tasks:
            if task.task_id in seen or task.task_id in committed:
                raise DuplicateTaskError(task.task_id)
            seen.add(task.task_id)
        clone: DynamicTable = dict(self.table)
        offers: list[Offer] = []
        bodies: dict[str, Task] = {}
        for task in tasks:
            best: tuple[int, int, str] | None = None
            for node_id in sorted(clone):
                feas = clone[node_id].can_place(task, limits)
                if feas.feasible:
                    key = (feas.projected_peak, len(clone[node_id].loads), node_id)
                    if best is None or key < best:
                        best = key
            if best is not None:
                peak, _, node_id = best
                clone[node_id] = clone[node_id].place(task, limits)
                offers.append(Offer(task.task_id, node_id, peak))
                bodies[task.task_id] = task
        self.pending = PendingBatch(batch_id, clone, offers, bodies, limits)
        return list(offers)

    def commit(self, batch_id: str, accepted_task_ids: set[str]) -> int:
        """Apply the accepted subset of the pending offers to the table.

        Rejected offers are forgotten.  Placement cannot fail: the offers
        were validated together on the clone and the caps are upper bounds,
        so any subset still fits.  Returns the number of committed tasks.
        """
        if self.pending is None:
            raise NoPendingBatchError()
        if batch_id != self.pending.batch_id:
            raise BatchIdMismatchError(self.pending.batch_id, batch_id)
        offered = {offer.task_id for offer in self.pending.offers}
        unknown = sorted(set(accepted_task_ids) - offered)
        if unknown:
            raise UnknownTaskAcceptedError(unknown)
        committed = 0
        for offer in self.pending.offers:
            if offer.task_id in accepted_task_ids:
                task = self.pending.tasks[offer.task_id]
                self.table[offer.node_id] = self.table[offer.node_id].place(
                    task, self.pending.limits)
                committed += 1
        self.pending = None
        return committed

    def snapshot_metrics(self) -> AgentMetrics:
        """Per-node average load and committed task count (no batch in flight)."""
        if self.pending is not None:
            raise BatchInFlightError(self.pending.batch_id)
        per_node = {
            node_id: NodeMetrics(timeline.average_load(), len(timeline.loads))
            for node_id, timeline in sorted(self.table.items())
        }
        return AgentMetrics(per_node)
