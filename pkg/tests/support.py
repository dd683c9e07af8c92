"""Helpers shared by the test modules."""

from __future__ import annotations

from gridresv.model import ResourceTimeline

import oracle


def timeline_matches_reservations(timeline: ResourceTimeline,
                                  reservations: list[oracle.Reservation]) -> None:
    """Assert the timeline equals the sweep profile of `reservations`.

    The sweep profile is canonical by construction (every boundary changes
    the concurrent set), so boundaries, task sets and usage must all agree
    segment by segment.
    """
    profile = oracle.usage_profile(reservations)
    got = [(i.start, i.end, frozenset(i.task_ids), i.usage)
           for i in timeline.intervals]
    assert got == profile, f"\nengine:  {got}\nsweep:   {profile}"
    assert timeline.loads == {r[0]: r[3] for r in reservations}
