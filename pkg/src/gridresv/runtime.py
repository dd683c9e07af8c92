"""Long-running halves: the agent service loop and the TCP rendezvous.

``serve_agent`` speaks the batch/offer/decision/ack exchange over any
channel.  ``BrokerServer`` accepts TCP agents, runs the hello handshake on
the accept thread and hands registered channels to the broker loop.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from pathlib import Path

from .agent import Agent
from .model import SchedulerError
from .protocol import (
    CommitAck,
    Decision,
    Hello,
    HelloAck,
    OfferReply,
    Shutdown,
    TaskBatch,
)
from .reporting import write_timelines_csv
from .transport import Channel, ChannelClosedError, SocketChannel

log = logging.getLogger(__name__)


class RegistrationRejectedError(SchedulerError):
    def __init__(self, reason: str) -> None:
        self.reason = reason
        super().__init__(f"registration rejected: {reason}")


def serve_agent(agent: Agent, channel: Channel,
                metrics_dir: Path | None = None) -> None:
    """Answer broker messages until Shutdown or the channel closes."""
    rounds = 0
    while True:
        try:
            msg = channel.recv(None)
        except ChannelClosedError:
            return
        if msg is None or isinstance(msg, Shutdown):
            return
        if isinstance(msg, TaskBatch):
            try:
                offers = agent.propose_batch(msg.batch_id, msg.tasks)
            except SchedulerError as exc:
                log.warning("%s: refusing batch %s: %s", agent.name,
                            msg.batch_id, exc)
                offers = []
            channel.send(OfferReply(msg.batch_id, agent.name, tuple(offers)))
        elif isinstance(msg, Decision):
            try:
                count = agent.commit(msg.batch_id, msg.accepted_task_ids)
            except SchedulerError as exc:
                log.warning("%s: cannot commit %s: %s", agent.name,
                            msg.batch_id, exc)
                count = 0
            channel.send(CommitAck(msg.batch_id, agent.name, count))
            rounds += 1
            if metrics_dir is not None:
                path = Path(metrics_dir) / f"timelines_round{rounds}.csv"
                write_timelines_csv(path, agent.table)
        else:
            log.warning("%s: ignoring unexpected %s", agent.name,
                        type(msg).__name__)


class BrokerServer:
    """Listens for agents and registers them by unique name."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self._sock = socket.create_server((host, port))
        self.host, self.port = self._sock.getsockname()[:2]
        self._lock = threading.Lock()
        self._channels: dict[str, SocketChannel] = {}
        self._closing = False
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def _accept_loop(self) -> None:
        while True:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            threading.Thread(target=self._handshake, args=(conn,),
                             daemon=True).start()

    def _handshake(self, conn: socket.socket) -> None:
        channel = SocketChannel(conn)
        try:
            msg = channel.recv(10.0)
        except ChannelClosedError:
            return
        if not isinstance(msg, Hello):
            channel.send(HelloAck(False, "expected hello"))
            channel.close()
            return
        with self._lock:
            if self._closing:
                ok, reason = False, "shutting down"
            elif msg.agent_name in self._channels:
                ok, reason = False, "duplicate agent name"
            else:
                self._channels[msg.agent_name] = channel
                ok, reason = True, None
        channel.send(HelloAck(ok, reason))
        if not ok:
            channel.close()
        else:
            log.info("registered agent %s", msg.agent_name)

    def wait_for_agents(self, count: int, timeout_s: float = 30.0) -> bool:
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            with self._lock:
                if len(self._channels) >= count:
                    return True
            time.sleep(0.02)
        with self._lock:
            return len(self._channels) >= count

    def channels(self) -> dict[str, Channel]:
        with self._lock:
            return dict(sorted(self._channels.items()))

    def close(self) -> None:
        with self._lock:
            self._closing = True
            channels = list(self._channels.values())
            self._channels.clear()
        for channel in channels:
            try:
                channel.send(Shutdown())
            except ChannelClosedError:
                pass
            channel.close()
        self._sock.close()


def connect_agent(host: str, port: int, agent_name: str,
                  timeout_s: float = 10.0) -> SocketChannel:
    """Dial the broker and register; the returned channel is ready to serve.

    Refused connections are retried until `timeout_s` elapses so agents may
    be launched before the broker has bound its port.
    """
    deadline = time.monotonic() + timeout_s
    while True:
        try:
            sock = socket.create_connection((host, port),
                                            timeout=max(timeout_s, 0.1))
            break
        except ConnectionRefusedError:
            if time.monotonic() >= deadline:
                raise
            time.sleep(0.1)
    channel = SocketChannel(sock)
    channel.send(Hello(agent_name))
    try:
        ack = channel.recv(timeout_s)
    except ChannelClosedError:
        raise RegistrationRejectedError("connection closed during handshake") from None
    if not isinstance(ack, HelloAck):
        channel.close()
        raise RegistrationRejectedError("no handshake acknowledgement")
    if not ack.accepted:
        channel.close()
        raise RegistrationRejectedError(ack.reason or "rejected")
    return channel
