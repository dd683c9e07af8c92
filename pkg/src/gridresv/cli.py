"""Command line entry points.

Subcommands::

    gridresv simulate  one-process run: threaded agents + broker
    gridresv broker    TCP broker: wait for agents, schedule task files
    gridresv agent     TCP agent: register and serve until shutdown
    gridresv gen       write a reproducible task file
    gridresv validate  check a task file, resource file or timeline export

Exit codes: 0 ok, 1 usage or I/O error, 2 tasks left unscheduled,
3 no agents connected, 4 broker unreachable, 5 bad resource file,
6 agent name rejected.

Flag defaults honour GRIDRESV_HOST, GRIDRESV_PORT, GRIDRESV_BROKER,
GRIDRESV_MAX_LOAD and GRIDRESV_MAX_TASKS environment variables.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import broker as broker_mod
from .agent import Agent
from .model import SchedulerLimits
from .reporting import (
    TIMELINE_HEADER,
    parse_timeline_export,
    render_indicators,
    write_indicators,
    write_schedule_csv,
)
from .runtime import (
    BrokerServer,
    RegistrationRejectedError,
    connect_agent,
    serve_agent,
)
from .scenario import ScenarioSpec, generate_scenario
from .simulate import run_simulation
from .xmlio import (
    XmlError,
    parse_nodes,
    parse_resource_file,
    parse_task_file,
    parse_tasks,
    write_task_file,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSCHEDULED = 2
EXIT_NO_AGENTS = 3
EXIT_CONNECT = 4
EXIT_BAD_RESOURCES = 5
EXIT_NAME_REJECTED = 6

_PROFILES = {"uniform": "uniform", "paired": "pairedSymmetric"}


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    return int(raw) if raw else default


def _add_limit_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-load", type=int,
                        default=_env_int("GRIDRESV_MAX_LOAD", 85),
                        help="per-interval usage cap in percent (default 85)")
    parser.add_argument("--max-tasks", type=int,
                        default=_env_int("GRIDRESV_MAX_TASKS", 5),
                        help="per-interval reservation cap (default 5)")


def _limits(args: argparse.Namespace) -> SchedulerLimits:
    return SchedulerLimits(max_load=args.max_load, max_tasks=args.max_tasks)


def _host_port(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {value!r}")
    return host or "127.0.0.1", int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridresv",
        description="advance-reservation task scheduling over grid nodes")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for info, -vv for debug logging")
    parser.add_argument("-q", "--quiet", action="store_true",
                        help="log errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run broker and agents in one process")
    sim.add_argument("--agents", type=int, default=2)
    sim.add_argument("--nodes-per-agent", type=int, default=2)
    sim.add_argument("--scenario", choices=sorted(_PROFILES), default="uniform")
    sim.add_argument("--tasks", type=int, default=20,
                     help="number of generated tasks")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--horizon", type=int, default=1000)
    sim.add_argument("--task-file", type=Path, default=None,
                     help="schedule this XML file instead of generating tasks")
    sim.add_argument("--max-retries", type=int, default=1)
    sim.add_argument("--timeout", type=float, default=5.0,
                     help="per-round reply timeout in seconds")
    sim.add_argument("--out", type=Path, default=None,
                     help="directory for schedule.csv, timelines_round<k>.csv, "
                          "indicators.txt")
    _add_limit_args(sim)
    sim.set_defaults(func=cmd_simulate)

    brk = sub.add_parser("broker", help="serve task files to TCP agents")
    brk.add_argument("--tasks", type=Path, default=None, dest="task_file",
                     help="task file for one-shot mode")
    brk.add_argument("--once", action="store_true",
                     help="schedule --tasks once and exit (default when "
                          "--tasks is given); otherwise read file names "
                          "from standard input")
    brk.add_argument("--host", default=os.environ.get("GRIDRESV_HOST", "127.0.0.1"))
    brk.add_argument("--port", type=int, default=_env_int("GRIDRESV_PORT", 9100))
    brk.add_argument("--wait-agents", type=int, default=1,
                     help="registrations to wait for before the first batch")
    brk.add_argument("--wait-timeout", type=float, default=30.0)
    brk.add_argument("--max-retries", type=int, default=1)
    brk.add_argument("--timeout", type=float, default=5.0)
    brk.add_argument("--out", type=Path, default=None)
    _add_limit_args(brk)
    brk.set_defaults(func=cmd_broker)

    agt = sub.add_parser("agent", help="serve one agent over TCP")
    agt.add_argument("--name", required=True)
    agt.add_argument("--resources", type=Path, required=True)
    agt.add_argument("--broker", type=_host_port, metavar="HOST:PORT",
                     default=os.environ.get("GRIDRESV_BROKER",
                                            "127.0.0.1:9100"))
    agt.add_argument("--connect-timeout", type=float, default=10.0,
                     help="seconds to keep retrying the broker connection")
    agt.add_argument("--out", type=Path, default=None,
                     help="directory for per-round timeline snapshots")
    _add_limit_args(agt)
    agt.set_defaults(func=cmd_agent)

    gen = sub.add_parser("gen", help="write a generated task file")
    gen.add_argument("--scenario", choices=sorted(_PROFILES), default="uniform")
    gen.add_argument("--tasks", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--horizon", type=int, default=1000)
    gen.add_argument("--dur-min", type=int, default=10)
    gen.add_argument("--dur-max", type=int, default=100)
    gen.add_argument("--load-min", type=int, default=10)
    gen.add_argument("--load-max", type=int, default=85)
    gen.add_argument("--out", type=Path, required=True)
    gen.set_defaults(func=cmd_gen)

    val = sub.add_parser("validate",
                         help="check a task file, resource file or exported "
                              "timeline CSV")
    val.add_argument("file", type=Path)
    _add_limit_args(val)
    val.set_defaults(func=cmd_validate)
    return parser


def _load_tasks(args: argparse.Namespace):
    if getattr(args, "task_file", None):
        return parse_task_file(args.task_file)
    spec = ScenarioSpec(seed=args.seed, task_count=args.tasks,
                        time_horizon=args.horizon,
                        overlap_profile=_PROFILES[args.scenario])
    return generate_scenario(spec)


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        tasks = _load_tasks(args)
    except (OSError, XmlError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    outcome = run_simulation(tasks, agent_count=args.agents,
                             nodes_per_agent=args.nodes_per_agent,
                             limits=_limits(args), timeout_s=args.timeout,
                             max_retries=args.max_retries,
                             out_dir=args.out)
    print(render_indicators(outcome.result, len(tasks)), end="")
    return EXIT_OK if not outcome.result.unscheduled_task_ids else EXIT_UNSCHEDULED


def _broker_submit(server: BrokerServer, args: argparse.Namespace,
                   task_file: Path, out_dir: Path | None,
                   prefix: str) -> int:
    try:
        tasks = parse_task_file(task_file)
    except (OSError, XmlError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    channels = server.channels()
    if not channels:
        print("error: no agents connected", file=sys.stderr)
        return EXIT_NO_AGENTS
    result = broker_mod.run(tasks, channels, max_retries=args.max_retries,
                            timeout_s=args.timeout, batch_id_prefix=prefix)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_schedule_csv(out_dir / "schedule.csv", result.schedule)
        write_indicators(out_dir / "indicators.txt", result, len(tasks))
    print(render_indicators(result, len(tasks)), end="")
    return EXIT_OK if not result.unscheduled_task_ids else EXIT_UNSCHEDULED


def cmd_broker(args: argparse.Namespace) -> int:
    once = args.once or args.task_file is not None
    if once and args.task_file is None:
        print("error: --once needs --tasks", file=sys.stderr)
        return EXIT_ERROR
    try:
        server = BrokerServer(args.host, args.port)
    except OSError as exc:
        print(f"error: cannot listen on {args.host}:{args.port}: {exc}",
              file=sys.stderr)
        return EXIT_ERROR
    try:
        server.wait_for_agents(args.wait_agents, args.wait_timeout)
        if once:
            return _broker_submit(server, args, args.task_file, args.out,
                                  "batch")
        status = EXIT_OK
        submission = 0
        for line in sys.stdin:
            name = line.strip()
            if not name:
                continue
            submission += 1
            out = args.out / f"submission{submission}" if args.out else None
            code = _broker_submit(server, args, Path(name), out,
                                  f"batch{submission}")
            if code == EXIT_UNSCHEDULED or (code and status == EXIT_OK):
                status = code
        return status
    finally:
        server.close()


def cmd_agent(args: argparse.Namespace) -> int:
    try:
        nodes = parse_resource_file(args.resources)
    except (OSError, XmlError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_RESOURCES
    agent = Agent(args.name, nodes, _limits(args))
    logging.getLogger(__name__).info("agent %s manages %d node timeline(s)",
                                     args.name, len(agent.table))
    host, port = args.broker if isinstance(args.broker, tuple) \
        else _host_port(args.broker)
    try:
        channel = connect_agent(host, port, args.name,
                                timeout_s=args.connect_timeout)
    except RegistrationRejectedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NAME_REJECTED
    except OSError as exc:
        print(f"error: cannot reach broker at {host}:{port}: {exc}",
              file=sys.stderr)
        return EXIT_CONNECT
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
    serve_agent(agent, channel, args.out)
    channel.close()
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    try:
        spec = ScenarioSpec(seed=args.seed, task_count=args.tasks,
                            time_horizon=args.horizon,
                            duration_range=(args.dur_min, args.dur_max),
                            load_range=(args.load_min, args.load_max),
                            overlap_profile=_PROFILES[args.scenario])
        tasks = generate_scenario(spec)
        write_task_file(args.out, tasks)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"wrote {len(tasks)} tasks to {args.out}")
    return EXIT_OK


# Rules that need per-task loads, which a timeline export does not always
# pin down.
_LOAD_RULES = {"usage_sum", "unknown_task", "orphan_task", "task_coverage",
               "load_value"}


def _validate_timelines(text: str, limits: SchedulerLimits) -> int:
    tables, fully_inferred = parse_timeline_export(text.splitlines())
    failures = 0
    for node_id in sorted(tables):
        violations = tables[node_id].validate(limits)
        if not fully_inferred:
            violations = [v for v in violations if v.rule not in _LOAD_RULES]
        for violation in violations:
            failures += 1
            print(f"{node_id}: {violation.rule} at interval {violation.index}:"
                  f" {violation.detail}")
    if not fully_inferred:
        print("note: per-task loads not fully recoverable from the export; "
              "load-sum rules skipped")
    print(f"checked {len(tables)} node timeline(s): "
          + ("ok" if failures == 0 else f"{failures} violation(s)"))
    return EXIT_OK if failures == 0 else EXIT_ERROR


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        text = args.file.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    stripped = text.lstrip()
    try:
        if stripped.startswith("<?xml") or stripped.startswith("<"):
            if "<nodes" in stripped[:200]:
                nodes = parse_nodes(text)
                print(f"{args.file}: {len(nodes)} node(s): ok")
            else:
                tasks = parse_tasks(text)
                print(f"{args.file}: {len(tasks)} task(s): ok")
            return EXIT_OK
        if stripped.startswith(TIMELINE_HEADER) or not stripped:
            return _validate_timelines(text, _limits(args))
        print(f"error: unrecognized file format in {args.file}",
              file=sys.stderr)
        return EXIT_ERROR
    except (XmlError, ValueError) as exc:
        print(f"{args.file}: {exc}")
        return EXIT_ERROR


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.quiet:
        level = logging.ERROR
    else:
        level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
