"""Agent offer/commit behaviour: clone semantics, tie-breaks, metrics."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from gridresv.agent import (
    Agent,
    BatchIdMismatchError,
    BatchInFlightError,
    DuplicateNodeError,
    NoPendingBatchError,
    Offer,
    UnknownTaskAcceptedError,
    init_table,
)
from gridresv.model import (
    DuplicateTaskError,
    NodeSpec,
    SchedulerLimits,
    Task,
    new_timeline,
)

import oracle


def nodes(*ids: str) -> list[NodeSpec]:
    return [NodeSpec(node_id=i) for i in ids]


class TestInitTable:
    def test_empty(self):
        assert init_table([]) == {}

    def test_one_pristine_timeline_per_node(self):
        table = init_table(nodes("n1", "n2"))
        assert sorted(table) == ["n1", "n2"]
        assert all(tl == new_timeline() for tl in table.values())

    def test_duplicate_node_rejected(self):
        with pytest.raises(DuplicateNodeError):
            init_table(nodes("a", "a"))


class TestProposeBatch:
    def test_lexicographic_tie_break_on_pristine_nodes(self):
        agent = Agent("a1", nodes("n1", "n2"))
        offers = agent.propose_batch("b1", [Task("T", 0, 10, 30)])
        assert offers == [Offer("T", "n1", 30)]

    def test_infeasible_everywhere_gets_no_offer(self):
        agent = Agent("a1", nodes("n1", "n2"))
        offers = agent.propose_batch("b1", [Task("T", 0, 10, 90)])
        assert offers == []

    def test_least_loaded_node_wins(self):
        agent = Agent("a1", nodes("n1", "n2"))
        agent.propose_batch("b0", [Task("T0", 0, 10, 40)])
        agent.commit("b0", {"T0"})  # T0 lands on n1
        offers = agent.propose_batch("b1", [Task("T", 5, 15, 30)])
        assert offers == [Offer("T", "n2", 30)]

    def test_fewer_held_tasks_breaks_peak_ties(self):
        agent = Agent("a1", nodes("n1", "n2"))
        # counts alternate: A on n1, B on the emptier n2, C back on n1
        agent.propose_batch("b0", [Task("A", 0, 5, 10), Task("B", 5, 10, 10),
                                   Task("C", 50, 60, 10)])
        agent.commit("b0", {"A", "B", "C"})
        assert sorted(agent.table["n1"].loads) == ["A", "C"]
        assert sorted(agent.table["n2"].loads) == ["B"]
        offers = agent.propose_batch("b1", [Task("T", 100, 200, 20)])
        assert offers == [Offer("T", "n2", 20)]

    def test_batch_interacts_with_itself_on_the_clone(self):
        agent = Agent("a1", nodes("n1"))
        offers = agent.propose_batch("b1", [Task("A", 0, 10, 50),
                                            Task("B", 0, 10, 50)])
        # B no longer fits beside A on the lone node
        assert offers == [Offer("A", "n1", 50)]

    def test_proposing_leaves_the_table_untouched(self):
        agent = Agent("a1", nodes("n1"))
        agent.propose_batch("b1", [Task("A", 0, 10, 50)])
        assert agent.table["n1"] == new_timeline()

    def test_second_batch_while_pending_rejected(self):
        agent = Agent("a1", nodes("n1"))
        agent.propose_batch("b1", [Task("A", 0, 10, 50)])
        with pytest.raises(BatchInFlightError):
            agent.propose_batch("b2", [Task("B", 0, 10, 50)])

    def test_duplicate_in_batch_rejected(self):
        agent = Agent("a1", nodes("n1"))
        with pytest.raises(DuplicateTaskError):
            agent.propose_batch("b1", [Task("A", 0, 10, 10),
                                       Task("A", 20, 30, 10)])

    def test_duplicate_against_committed_rejected(self):
        agent = Agent("a1", nodes("n1"))
        agent.propose_batch("b0", [Task("A", 0, 10, 10)])
        agent.commit("b0", {"A"})
        with pytest.raises(DuplicateTaskError):
            agent.propose_batch("b1", [Task("A", 20, 30, 10)])

    def test_per_batch_limit_override(self):
        agent = Agent("a1", nodes("n1"))
        tight = SchedulerLimits(max_load=20, max_tasks=5)
        assert agent.propose_batch("b1", [Task("A", 0, 10, 30)], tight) == []


class TestCommit:
    def test_empty_subset_changes_nothing(self):
        agent = Agent("a1", nodes("n1"))
        agent.propose_batch("b1", [Task("A", 0, 10, 50)])
        assert agent.commit("b1", set()) == 0
        assert agent.table["n1"] == new_timeline()
        assert agent.pending is None

    def test_full_subset_matches_the_clone(self):
        agent = Agent("a1", nodes("n1", "n2"))
        agent.propose_batch("b1", [Task("A", 0, 10, 50), Task("B", 5, 15, 40)])
        clone = dict(agent.pending.clone)
        assert agent.commit("b1", {"A", "B"}) == 2
        assert agent.table == clone

    def test_partial_subset_commits_alone(self):
        agent = Agent("a1", nodes("n1"))
        agent.propose_batch("b1", [Task("A", 0, 10, 40), Task("B", 5, 15, 40)])
        assert agent.commit("b1", {"A"}) == 1
        tl = agent.table["n1"]
        assert sorted(tl.loads) == ["A"]
        assert tl.validate(agent.limits) == []

    def test_commit_without_pending_rejected(self):
        with pytest.raises(NoPendingBatchError):
            Agent("a1", nodes("n1")).commit("b1", set())

    def test_batch_id_must_match(self):
        agent = Agent("a1", nodes("n1"))
        agent.propose_batch("b1", [Task("A", 0, 10, 40)])
        with pytest.raises(BatchIdMismatchError):
            agent.commit("b2", {"A"})

    def test_unoffered_task_rejected(self):
        agent = Agent("a1", nodes("n1"))
        agent.propose_batch("b1", [Task("A", 0, 10, 40)])
        with pytest.raises(UnknownTaskAcceptedError):
            agent.commit("b1", {"A", "Z"})


class TestMetrics:
    def test_pristine_metrics_are_zero(self):
        metrics = Agent("a1", nodes("n1", "n2")).snapshot_metrics()
        assert metrics.total_tasks == 0
        assert all(m.average_load == 0 and m.task_count == 0
                   for m in metrics.per_node.values())

    def test_average_load_after_commit(self):
        agent = Agent("a1", nodes("n1"))
        agent.propose_batch("b1", [Task("T1", 10, 20, 30)])
        agent.commit("b1", {"T1"})
        metrics = agent.snapshot_metrics()
        assert metrics.per_node["n1"].average_load == Fraction(15)
        assert metrics.per_node["n1"].task_count == 1
        assert metrics.total_tasks == 1

    def test_metrics_refused_mid_batch(self):
        agent = Agent("a1", nodes("n1"))
        agent.propose_batch("b1", [Task("T1", 10, 20, 30)])
        with pytest.raises(BatchInFlightError):
            agent.snapshot_metrics()


def test_proposals_match_sweep_oracle_on_random_instances():
    rng = random.Random(42)
    for _ in range(100):
        node_ids = [f"n{i}" for i in range(1, rng.randint(1, 3) + 1)]
        agent = Agent("a1", nodes(*node_ids))
        batch = []
        for i in range(rng.randint(1, 10)):
            start = rng.randint(0, 200)
            batch.append(Task(f"t{i}", start, start + rng.randint(1, 80),
                              rng.randint(1, 60)))
        offers = agent.propose_batch("b1", batch)
        expected = oracle.propose({n: [] for n in node_ids},
                                  [(t.task_id, t.start, t.end, t.load)
                                   for t in batch],
                                  agent.limits.max_load, agent.limits.max_tasks)
        assert [(o.task_id, o.node_id, o.projected_load) for o in offers] \
            == expected
        agent.commit("b1", {o.task_id for o in offers})
        for node_id in node_ids:
            assert agent.table[node_id].validate(agent.limits) == []
