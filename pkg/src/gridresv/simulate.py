"""Whole-system run in one process: broker plus threaded agents.

Channels are in-memory queues carrying the same encoded frames that the TCP
transport would, so a simulation exercises the full codec path and its
outputs are byte-identical to a loopback-socket run with the same inputs.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import broker
from .agent import Agent
from .model import NodeSpec, SchedulerLimits, Task
from .protocol import Shutdown
from .runtime import serve_agent
from .transport import ChannelClosedError, memory_pair
from .reporting import write_indicators, write_schedule_csv, write_timelines_csv


def make_agent_nodes(agent_name: str, count: int) -> list[NodeSpec]:
    """Uniform synthetic nodes; ids sort in creation order."""
    return [NodeSpec(node_id=f"{agent_name}-n{j}", node_name=f"wn{j:02d}",
                     cluster_name=agent_name, farm_name="sim",
                     cpu_power_mhz=2400.0, memory_mb=4096.0)
            for j in range(1, count + 1)]


def default_agents(agent_count: int, nodes_per_agent: int,
                   limits: SchedulerLimits = SchedulerLimits()) -> list[Agent]:
    return [Agent(f"agent{i}", make_agent_nodes(f"agent{i}", nodes_per_agent), limits)
            for i in range(1, agent_count + 1)]


@dataclass(frozen=True)
class SimulationOutcome:
    result: broker.RoundResult
    agents: tuple[Agent, ...]
    out_dir: Path | None


def run_simulation(tasks: Sequence[Task], agent_count: int = 2,
                   nodes_per_agent: int = 2,
                   limits: SchedulerLimits = SchedulerLimits(),
                   timeout_s: float = 5.0, max_retries: int = 1,
                   out_dir: Path | None = None,
                   agents: Sequence[Agent] | None = None) -> SimulationOutcome:
    if agents is None:
        agents = default_agents(agent_count, nodes_per_agent, limits)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    channels = {}
    threads = []
    for agent in agents:
        broker_end, agent_end = memory_pair()
        channels[agent.name] = broker_end
        thread = threading.Thread(target=serve_agent, args=(agent, agent_end),
                                  name=f"agent-{agent.name}", daemon=True)
        thread.start()
        threads.append(thread)

    def snapshot_round(round_no: int, _result: broker.RoundResult) -> None:
        # Commits are acked before run_round returns, so tables are settled.
        if out_dir is not None:
            merged = {nid: tl for agent in agents for nid, tl in agent.table.items()}
            write_timelines_csv(out_dir / f"timelines_round{round_no}.csv", merged)

    try:
        result = broker.run(tasks, channels, max_retries=max_retries,
                            timeout_s=timeout_s, on_round=snapshot_round)
    finally:
        for channel in channels.values():
            try:
                channel.send(Shutdown())
            except ChannelClosedError:
                pass
        for thread in threads:
            thread.join(timeout=5.0)
        for channel in channels.values():
            channel.close()

    if out_dir is not None:
        write_schedule_csv(out_dir / "schedule.csv", result.schedule)
        write_indicators(out_dir / "indicators.txt", result, len(tasks))
    return SimulationOutcome(result, tuple(agents), out_dir)
