"""Interval timeline behaviour, checked against the event-sweep oracle."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridresv.model import (
    INFINITE,
    LOAD_CAP,
    TASK_CAP,
    DuplicateTaskError,
    InfeasibleError,
    Interval,
    ResourceTimeline,
    SchedulerLimits,
    Task,
    new_timeline,
)

import oracle
from support import timeline_matches_reservations

LIMITS = SchedulerLimits()


class TestConstruction:
    def test_pristine_shape(self):
        tl = new_timeline()
        assert tl.intervals == (Interval(0, INFINITE, (), 0),)
        assert tl.loads == {}

    def test_pristine_timelines_are_equal(self):
        assert new_timeline() == new_timeline()

    def test_pristine_average_load_is_zero(self):
        assert new_timeline().average_load() == 0

    def test_infinite_matches_signed_64_bit_max(self):
        assert INFINITE == 2**63 - 1


class TestCanPlace:
    def test_load_above_cap_infeasible(self):
        tl = new_timeline()
        feas = tl.can_place(Task("t", 0, 10, 86), LIMITS)
        assert not feas
        assert feas.projected_peak is None

    def test_load_at_cap_feasible(self):
        feas = new_timeline().can_place(Task("t", 0, 10, 85), LIMITS)
        assert feas
        assert feas.projected_peak == 85

    def test_overlapping_probe(self):
        tl = new_timeline().place(Task("T1", 0, 10, 50), LIMITS)
        ok = tl.can_place(Task("T2", 5, 15, 30), LIMITS)
        assert ok and ok.projected_peak == 80
        assert not tl.can_place(Task("T3", 5, 15, 40), LIMITS)

    def test_probe_agrees_with_sweep(self):
        existing = [("T1", 0, 10, 50)]
        tl = new_timeline().place(Task(*existing[0]), LIMITS)
        for probe in (("T2", 5, 15, 30), ("T3", 5, 15, 40)):
            feasible, peak = oracle.sweep_can_place(existing, *probe[1:], 85, 5)
            got = tl.can_place(Task(*probe), LIMITS)
            assert got.feasible == feasible
            if feasible:
                assert got.projected_peak == peak

    def test_duplicate_id_rejected(self):
        tl = new_timeline().place(Task("T1", 0, 10, 50), LIMITS)
        with pytest.raises(DuplicateTaskError):
            tl.can_place(Task("T1", 50, 60, 10), LIMITS)

    def test_task_count_cap(self):
        tl = new_timeline()
        for i in range(5):
            tl = tl.place(Task(f"t{i}", 0, 10, 1), LIMITS)
        assert not tl.can_place(Task("t5", 0, 10, 1), LIMITS)
        assert tl.can_place(Task("t5", 10, 20, 1), LIMITS)

    def test_touching_windows_do_not_interact(self):
        tl = new_timeline().place(Task("a", 0, 10, 60), LIMITS)
        assert tl.can_place(Task("b", 10, 20, 60), LIMITS)


class TestPlace:
    def test_first_placement_splits_once(self):
        tl = new_timeline().place(Task("T1", 10, 20, 30), LIMITS)
        assert tl.intervals == (
            Interval(0, 10, (), 0),
            Interval(10, 20, ("T1",), 30),
            Interval(20, INFINITE, (), 0),
        )

    def test_second_overlapping_placement(self):
        tl = new_timeline().place(Task("T1", 10, 20, 30), LIMITS)
        tl = tl.place(Task("T2", 5, 15, 30), LIMITS)
        assert tl.intervals == (
            Interval(0, 5, (), 0),
            Interval(5, 10, ("T2",), 30),
            Interval(10, 15, ("T1", "T2"), 60),
            Interval(15, 20, ("T1",), 30),
            Interval(20, INFINITE, (), 0),
        )

    def test_place_does_not_mutate(self):
        tl = new_timeline()
        tl.place(Task("T1", 10, 20, 30), LIMITS)
        assert tl == new_timeline()

    def test_infeasible_load_raises_with_condition(self):
        with pytest.raises(InfeasibleError) as err:
            new_timeline().place(Task("t", 0, 10, 86), LIMITS)
        assert err.value.condition == LOAD_CAP

    def test_infeasible_count_raises_with_condition(self):
        tl = new_timeline()
        for i in range(5):
            tl = tl.place(Task(f"t{i}", 0, 10, 1), LIMITS)
        with pytest.raises(InfeasibleError) as err:
            tl.place(Task("t5", 0, 10, 1), LIMITS)
        assert err.value.condition == TASK_CAP

    def test_duplicate_place_rejected(self):
        tl = new_timeline().place(Task("T1", 0, 10, 10), LIMITS)
        with pytest.raises(DuplicateTaskError):
            tl.place(Task("T1", 30, 40, 10), LIMITS)

    def test_booking_order_is_irrelevant(self):
        tasks = [Task("a", 0, 30, 10), Task("b", 10, 40, 10),
                 Task("c", 20, 50, 10), Task("d", 5, 45, 10)]
        rng = random.Random(2)
        reference = None
        for _ in range(10):
            rng.shuffle(tasks)
            tl = new_timeline()
            for task in tasks:
                tl = tl.place(task, LIMITS)
            if reference is None:
                reference = tl
            assert tl == reference


class TestAverageLoad:
    def test_single_booking(self):
        tl = new_timeline().place(Task("T1", 10, 20, 30), LIMITS)
        assert tl.average_load() == Fraction(15)

    def test_single_bounded_interval(self):
        tl = new_timeline().place(Task("T1", 0, 10, 85), LIMITS)
        # intervals: [0,10) u85 | [10, INF) u0; only the bounded one counts
        assert tl.average_load() == 85

    def test_exact_rational(self):
        tl = new_timeline().place(Task("T1", 10, 20, 31), LIMITS)
        got = tl.average_load()
        assert isinstance(got, Fraction)
        assert got == Fraction(31, 2)


class TestValidate:
    def test_pristine_is_clean(self):
        assert new_timeline().validate(LIMITS) == []

    def test_bookings_stay_clean(self):
        tl = new_timeline().place(Task("T1", 10, 20, 30), LIMITS)
        tl = tl.place(Task("T2", 5, 15, 30), LIMITS)
        assert tl.validate(LIMITS) == []

    def test_gap_detected(self):
        tl = ResourceTimeline((Interval(0, 10), Interval(12, INFINITE)), {})
        rules = [v.rule for v in tl.validate(LIMITS)]
        assert rules == ["gap"]
        assert tl.validate(LIMITS)[0].index == 1

    def test_overlap_detected(self):
        tl = ResourceTimeline((Interval(0, 10), Interval(8, INFINITE)), {})
        assert [v.rule for v in tl.validate(LIMITS)] == ["overlap"]

    def test_usage_sum_mismatch_detected(self):
        tl = ResourceTimeline(
            (Interval(0, 10, ("T1",), 31), Interval(10, INFINITE, (), 0)),
            {"T1": 30})
        assert [v.rule for v in tl.validate(LIMITS)] == ["usage_sum"]

    def test_non_canonical_detected(self):
        tl = ResourceTimeline((Interval(0, 10), Interval(10, INFINITE)), {})
        assert [v.rule for v in tl.validate(LIMITS)] == ["not_canonical"]

    def test_coverage_ends_checked(self):
        tl = ResourceTimeline((Interval(5, 40),), {})
        rules = {v.rule for v in tl.validate(LIMITS)}
        assert rules == {"coverage_start", "coverage_end"}

    def test_cap_breaches_detected(self):
        tl = ResourceTimeline(
            (Interval(0, 10, ("T1",), 90), Interval(10, INFINITE, (), 0)),
            {"T1": 90})
        assert {v.rule for v in tl.validate(LIMITS)} == {"load_cap"}

    def test_orphan_task_detected(self):
        tl = ResourceTimeline((Interval(0, INFINITE, (), 0),), {"T9": 10})
        assert [v.rule for v in tl.validate(LIMITS)] == ["orphan_task"]

    def test_empty_timeline_is_a_coverage_breach(self):
        assert [v.rule for v in ResourceTimeline((), {}).validate(LIMITS)] \
            == ["coverage"]


class TestIntervalAt:
    def test_boundaries_are_half_open(self):
        tl = new_timeline().place(Task("T1", 10, 20, 30), LIMITS)
        assert tl.interval_at(10).task_ids == ("T1",)
        assert tl.interval_at(19).task_ids == ("T1",)
        assert tl.interval_at(20).task_ids == ()
        assert tl.interval_at(0).task_ids == ()

    def test_uncovered_time_rejected(self):
        with pytest.raises(ValueError):
            new_timeline().interval_at(-1)


# Window shapes small enough that collisions are frequent.
task_windows = st.lists(
    st.tuples(st.integers(0, 120), st.integers(1, 50), st.integers(1, 60)),
    min_size=1, max_size=10)


@settings(max_examples=200, deadline=None)
@given(task_windows)
def test_greedy_booking_matches_sweep_oracle(windows):
    """Book whatever fits, in order; the result must equal the flat sweep."""
    tl = new_timeline()
    booked: list[oracle.Reservation] = []
    for i, (start, length, load) in enumerate(windows):
        task = Task(f"t{i}", start, start + length, load)
        feasible, peak = oracle.sweep_can_place(
            booked, task.start, task.end, task.load,
            LIMITS.max_load, LIMITS.max_tasks)
        got = tl.can_place(task, LIMITS)
        assert got.feasible == feasible
        if feasible:
            assert got.projected_peak == peak
            tl = tl.place(task, LIMITS)
            booked.append((task.task_id, task.start, task.end, task.load))
        assert tl.validate(LIMITS) == []
    timeline_matches_reservations(tl, booked)


@settings(max_examples=100, deadline=None)
@given(task_windows, st.randoms(use_true_random=False))
def test_structural_equality_across_orders(windows, rng):
    """Any two orders of the same feasible set yield the same timeline."""
    tasks = [Task(f"t{i}", s, s + d, min(load, 8))
             for i, (s, d, load) in enumerate(windows)]
    relaxed = SchedulerLimits(max_load=85, max_tasks=10)
    first = new_timeline()
    for task in tasks:
        first = first.place(task, relaxed)
    shuffled = list(tasks)
    rng.shuffle(shuffled)
    second = new_timeline()
    for task in shuffled:
        second = second.place(task, relaxed)
    assert first == second
