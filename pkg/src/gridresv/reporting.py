"""Performance indicators and report files.

Percentages are exact rationals internally and round to one decimal place
(half-even) only at render time.  The CSV writers are byte-deterministic:
fixed column order, rows sorted, LF line endings.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .model import (
    INFINITE,
    DynamicTable,
    Interval,
    ResourceTimeline,
    SchedulerError,
)

if TYPE_CHECKING:  # pragma: no cover - typing only, avoids an import cycle
    from .broker import FinalSchedule, RoundResult

TIMELINE_HEADER = "nodeId,start,end,usage,taskIds"
SCHEDULE_HEADER = "taskId,agentName,nodeId,projectedLoad"


class EmptyBatchError(SchedulerError):
    def __init__(self) -> None:
        super().__init__("cannot compute an indicator over an empty batch")


def performance_indicator(scheduled: int, total: int) -> Fraction:
    """scheduled / total * 100 as an exact rational."""
    if total == 0:
        raise EmptyBatchError()
    if total < 0 or not 0 <= scheduled <= total:
        raise ValueError(f"need 0 <= scheduled <= total, got {scheduled}/{total}")
    return Fraction(scheduled * 100, total)


def format_percent(value: Fraction | int) -> str:
    """Render with one decimal place, rounding half to even on the exact value."""
    tenths = round(Fraction(value) * 10)
    return f"{tenths // 10}.{tenths % 10}"


@dataclass(frozen=True)
class CommTiming:
    batch_id: str
    payload_bytes: int
    elapsed_ms: float


def comm_time_record(timings: list[CommTiming], batch_id: str,
                     payload_bytes: int, elapsed_ms: float) -> CommTiming:
    """Append one batch-delivery measurement to the running list."""
    timing = CommTiming(batch_id, payload_bytes, elapsed_ms)
    timings.append(timing)
    return timing


def summarize_timings(timings: Sequence[CommTiming]) -> tuple[float, float, float] | None:
    """(min, median, max) delivery time in ms, or None when nothing was timed."""
    if not timings:
        return None
    values = [t.elapsed_ms for t in timings]
    return min(values), statistics.median(values), max(values)


def agent_load_table(counts: Mapping[str, int], batch_total: int,
                     label: str = "1") -> list[tuple[str, str, str]]:
    """Rows (label, agent, "count (total)") sorted by agent name."""
    return [(label, name, f"{counts[name]} ({batch_total})")
            for name in sorted(counts)]


def _fmt_end(end: int) -> str:
    return "INF" if end == INFINITE else str(end)


def timeline_export(table: DynamicTable) -> list[str]:
    """One CSV row per interval, sorted by (nodeId, start)."""
    rows: list[str] = []
    for node_id in sorted(table):
        for itv in table[node_id].intervals:
            rows.append(f"{node_id},{itv.start},{_fmt_end(itv.end)},"
                        f"{itv.usage},{';'.join(itv.task_ids)}")
    return rows


def write_timelines_csv(path: Path, table: DynamicTable) -> None:
    lines = [TIMELINE_HEADER] + timeline_export(table)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_schedule_csv(path: Path, schedule: "FinalSchedule") -> None:
    """Winning offers, one row per task, sorted by task id."""
    lines = [SCHEDULE_HEADER]
    for task_id in sorted(schedule.winners):
        rec = schedule.winners[task_id]
        lines.append(f"{task_id},{rec.agent_name},{rec.offer.node_id},"
                     f"{rec.offer.projected_load}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_timeline_export(rows: Iterable[str]) -> tuple[dict[str, ResourceTimeline], bool]:
    """Rebuild timelines from exported rows.

    The export carries interval usage but not individual task loads, so the
    load lookup is inferred: singleton intervals pin loads directly and the
    remaining residuals are split over groups of tasks that always appear
    together.  Returns (tables, fully_inferred); when fully_inferred is
    False some loads are missing and load-sum validation is not meaningful.
    """
    per_node: dict[str, list[Interval]] = {}
    for row in rows:
        row = row.strip()
        if not row or row == TIMELINE_HEADER:
            continue
        parts = row.split(",")
        if len(parts) != 5:
            raise ValueError(f"bad timeline row: {row!r}")
        node_id, start_s, end_s, usage_s, ids_s = parts
        end = INFINITE if end_s == "INF" else int(end_s)
        task_ids = tuple(t for t in ids_s.split(";") if t)
        per_node.setdefault(node_id, []).append(
            Interval(int(start_s), end, task_ids, int(usage_s)))
    tables: dict[str, ResourceTimeline] = {}
    fully_inferred = True
    for node_id, intervals in per_node.items():
        loads, complete = _infer_loads(intervals)
        fully_inferred = fully_inferred and complete
        tables[node_id] = ResourceTimeline(tuple(intervals), loads)
    return tables, fully_inferred


def _infer_loads(intervals: Sequence[Interval]) -> tuple[dict[str, int], bool]:
    all_ids = {t for itv in intervals for t in itv.task_ids}
    loads: dict[str, int] = {}
    changed = True
    while changed:
        changed = False
        for itv in intervals:
            unknown = [t for t in itv.task_ids if t not in loads]
            if len(unknown) == 1:
                known = sum(loads[t] for t in itv.task_ids if t in loads)
                loads[unknown[0]] = itv.usage - known
                changed = True
    remaining = all_ids - loads.keys()
    if remaining:
        # Tasks that share exactly the same intervals form a group whose
        # total is pinned; any split of the total keeps every sum correct.
        footprint: dict[str, frozenset[int]] = {
            t: frozenset(i for i, itv in enumerate(intervals) if t in itv.task_ids)
            for t in remaining}
        for fp in set(footprint.values()):
            group = sorted(t for t in remaining if footprint[t] == fp)
            idx = next(iter(fp))
            others = [t for t in intervals[idx].task_ids if t not in group]
            if any(t not in loads for t in others):
                continue
            residual = intervals[idx].usage - sum(loads[t] for t in others)
            share, extra = divmod(residual, len(group))
            for j, t in enumerate(group):
                loads[t] = share + (extra if j == 0 else 0)
    return loads, all_ids <= loads.keys()


def render_indicators(result: "RoundResult", batch_total: int,
                      label: str = "1") -> str:
    """Human-readable indicators.txt body."""
    scheduled = len(result.schedule.winners)
    lines = [
        f"performance: {format_percent(performance_indicator(scheduled, batch_total))}%",
        f"scheduled: {scheduled} / {batch_total}",
        "unscheduled: " + (", ".join(result.unscheduled_task_ids) or "-"),
        f"rounds executed: {result.rounds_executed}",
        "",
        "agent load (reservations (batch total))",
    ]
    for _, name, cell in agent_load_table(result.committed_counts, batch_total, label):
        lines.append(f"{name}: {cell}")
    lines.append("")
    lines.append("communication time")
    for t in result.timings:
        lines.append(f"{t.batch_id}: {t.payload_bytes} bytes in {t.elapsed_ms:.1f} ms")
    summary = summarize_timings(result.timings)
    if summary is None:
        lines.append("summary: no deliveries timed")
    else:
        lines.append("summary: min {:.1f} ms / median {:.1f} ms / max {:.1f} ms".format(*summary))
    return "\n".join(lines) + "\n"


def write_indicators(path: Path, result: "RoundResult", batch_total: int,
                     label: str = "1") -> None:
    Path(path).write_text(render_indicators(result, batch_total, label), encoding="utf-8")
