"""Broker side: fold offers into a schedule and drive rounds over channels.

The fold is deterministic: replies are ordered by agent name before folding,
and a candidate offer replaces the held one only when it projects a strictly
lower load, or projects an equal load while its agent currently holds fewer
reservations.  Anything else keeps the existing assignment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .agent import Offer
from .model import SchedulerError, Task
from .protocol import CommitAck, Decision, OfferReply, TaskBatch
from .reporting import CommTiming
from .transport import Channel, timed_broadcast_collect

log = logging.getLogger(__name__)


class NoAgentsConnectedError(SchedulerError):
    def __init__(self) -> None:
        super().__init__("no agents connected")


class DuplicateAgentReplyError(SchedulerError):
    def __init__(self, agent_name: str) -> None:
        self.agent_name = agent_name
        super().__init__(f"agent {agent_name!r} replied twice to one batch")


class OfferForUnknownTaskError(SchedulerError):
    def __init__(self, agent_name: str, task_id: str) -> None:
        self.agent_name = agent_name
        self.task_id = task_id
        super().__init__(f"agent {agent_name!r} offered unknown task {task_id!r}")


class TaskIdMismatchError(SchedulerError):
    def __init__(self, left: str, right: str) -> None:
        super().__init__(f"cannot compare offers for {left!r} and {right!r}")


@dataclass(frozen=True)
class OfferRecord:
    agent_name: str
    offer: Offer


@dataclass(frozen=True)
class FinalSchedule:
    """Winning offer per task plus how many wins each agent holds."""

    winners: dict[str, OfferRecord]
    agent_counts: dict[str, int]


@dataclass(frozen=True)
class RoundResult:
    schedule: FinalSchedule
    unscheduled_task_ids: tuple[str, ...]
    per_agent_accepted: dict[str, tuple[str, ...]]
    committed_counts: dict[str, int]
    timings: tuple[CommTiming, ...] = ()
    rounds_executed: int = 1


def decide(existing: OfferRecord, candidate: OfferRecord,
           counts: Mapping[str, int]) -> bool:
    """True when the candidate should replace the held offer."""
    if existing.offer.task_id != candidate.offer.task_id:
        raise TaskIdMismatchError(existing.offer.task_id, candidate.offer.task_id)
    if candidate.offer.projected_load < existing.offer.projected_load:
        return True
    if candidate.offer.projected_load == existing.offer.projected_load:
        return counts[candidate.agent_name] < counts[existing.agent_name]
    return False


def fold_offers(batch: Sequence[Task],
                replies: Sequence[OfferReply]) -> FinalSchedule:
    """Fold per-agent offers into one winner per task."""
    known = {t.task_id for t in batch}
    seen: set[str] = set()
    for reply in replies:
        if reply.agent_name in seen:
            raise DuplicateAgentReplyError(reply.agent_name)
        seen.add(reply.agent_name)
        for offer in reply.offers:
            if offer.task_id not in known:
                raise OfferForUnknownTaskError(reply.agent_name, offer.task_id)
    winners: dict[str, OfferRecord] = {}
    counts: dict[str, int] = {r.agent_name: 0 for r in replies}
    for reply in sorted(replies, key=lambda r: r.agent_name):
        for offer in reply.offers:
            candidate = OfferRecord(reply.agent_name, offer)
            held = winners.get(offer.task_id)
            if held is None:
                winners[offer.task_id] = candidate
                counts[candidate.agent_name] += 1
            elif decide(held, candidate, counts):
                winners[offer.task_id] = candidate
                counts[held.agent_name] -= 1
                counts[candidate.agent_name] += 1
    return FinalSchedule(winners, counts)


def partition_decision(schedule: FinalSchedule) -> dict[str, set[str]]:
    """Task ids grouped by winning agent; losing agents get an empty set."""
    accepted: dict[str, set[str]] = {name: set() for name in schedule.agent_counts}
    for task_id, rec in schedule.winners.items():
        accepted[rec.agent_name].add(task_id)
    return accepted


def run_round(batch: Sequence[Task], channels: Mapping[str, Channel],
              timeout_s: float = 5.0, batch_id: str = "batch.1") -> RoundResult:
    """One offer/decide/commit exchange over already-connected channels."""
    if not channels:
        raise NoAgentsConnectedError()
    ordered = {name: channels[name] for name in sorted(channels)}
    msg = TaskBatch(batch_id, tuple(batch))
    collected = timed_broadcast_collect(ordered, msg, timeout_s,
                                        expect=OfferReply)
    timing = CommTiming(batch_id, collected.payload_bytes, collected.elapsed_ms)

    known = {t.task_id for t in batch}
    replies: list[OfferReply] = []
    for name, reply in collected.replies.items():
        if reply is None:
            continue
        if reply.batch_id != batch_id:
            log.warning("dropping reply from %s: batch %r, expected %r",
                        name, reply.batch_id, batch_id)
            continue
        bogus = [o.task_id for o in reply.offers if o.task_id not in known]
        if bogus:
            log.warning("dropping offers from %s for unknown tasks %s", name, bogus)
            reply = OfferReply(reply.batch_id, reply.agent_name,
                               tuple(o for o in reply.offers if o.task_id in known))
        replies.append(OfferReply(batch_id, name, reply.offers))

    schedule = fold_offers(batch, replies)
    accepted = partition_decision(schedule)

    decisions = {
        name: Decision(batch_id, tuple(sorted(accepted.get(name, ()))))
        for name in ordered
    }
    acks = timed_broadcast_collect(ordered, decisions, timeout_s,
                                   expect=CommitAck)
    committed: dict[str, int] = {}
    for name in ordered:
        ack = acks.replies.get(name)
        committed[name] = ack.committed_count if ack is not None else 0

    unscheduled = tuple(t.task_id for t in batch if t.task_id not in schedule.winners)
    per_agent = {name: tuple(sorted(ids)) for name, ids in accepted.items()}
    return RoundResult(schedule, unscheduled, per_agent, committed, (timing,))


def run(batch: Sequence[Task], channels: Mapping[str, Channel],
        max_retries: int = 1, timeout_s: float = 5.0,
        batch_id_prefix: str = "batch",
        on_round: Callable[[int, RoundResult], None] | None = None) -> RoundResult:
    """Run up to 1 + max_retries rounds, re-offering leftover tasks."""
    if max_retries < 0:
        raise ValueError("max_retries must be >= 0")
    by_id = {t.task_id: t for t in batch}
    pending: Sequence[Task] = tuple(batch)

    winners: dict[str, OfferRecord] = {}
    accepted: dict[str, set[str]] = {}
    committed: dict[str, int] = {}
    timings: list[CommTiming] = []
    rounds = 0

    for attempt in range(1 + max_retries):
        if not pending:
            break
        rounds += 1
        result = run_round(pending, channels, timeout_s,
                           batch_id=f"{batch_id_prefix}.{attempt + 1}")
        if on_round is not None:
            on_round(rounds, result)
        winners.update(result.schedule.winners)
        for name, ids in result.per_agent_accepted.items():
            accepted.setdefault(name, set()).update(ids)
        for name, count in result.committed_counts.items():
            committed[name] = committed.get(name, 0) + count
        timings.extend(result.timings)
        pending = tuple(by_id[tid] for tid in result.unscheduled_task_ids)

    counts: dict[str, int] = {name: 0 for name in accepted}
    for rec in winners.values():
        counts[rec.agent_name] = counts.get(rec.agent_name, 0) + 1
    unscheduled = tuple(t.task_id for t in batch if t.task_id not in winners)
    per_agent = {name: tuple(sorted(ids)) for name, ids in accepted.items()}
    return RoundResult(FinalSchedule(winners, counts), unscheduled, per_agent,
                       committed, tuple(timings), rounds)
