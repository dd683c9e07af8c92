"""Channels carrying protocol frames: in-process pairs and TCP sockets.

Both channel kinds move the same encoded line frames, so the simulated and
the networked deployments exercise identical bytes.  A channel endpoint is
owned by one sender and one receiver loop; `recv` returns None on timeout
and raises ChannelClosedError once the peer is gone.
"""

from __future__ import annotations

import logging
import queue
import socket
import time
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Protocol, Union

from .model import SchedulerError
from .protocol import FrameDecoder, Message, ProtocolError, encode

logger = logging.getLogger(__name__)


class ChannelClosedError(SchedulerError):
    def __init__(self) -> None:
        super().__init__("channel closed by peer")


class Channel(Protocol):
    def send(self, msg: Message) -> None: ...
    def send_bytes(self, data: bytes) -> None: ...
    def recv(self, timeout: float | None = None) -> Message | None: ...
    def close(self) -> None: ...


_CLOSE = object()


class MemoryChannel:
    """One endpoint of an in-process duplex pipe carrying encoded frames."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue) -> None:
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def send(self, msg: Message) -> None:
        self.send_bytes(encode(msg))

    def send_bytes(self, data: bytes) -> None:
        if self._closed:
            raise ChannelClosedError()
        self._outbox.put(data)

    def recv(self, timeout: float | None = None) -> Message | None:
        if self._closed:
            raise ChannelClosedError()
        try:
            data = self._inbox.get(timeout=timeout) if timeout is not None else self._inbox.get()
        except queue.Empty:
            return None
        if data is _CLOSE:
            self._inbox.put(_CLOSE)  # keep EOF visible to later recv calls
            raise ChannelClosedError()
        from .protocol import decode

        return decode(data)

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(_CLOSE)


def memory_pair() -> tuple[MemoryChannel, MemoryChannel]:
    """Two connected endpoints; what one sends the other receives."""
    a: queue.Queue = queue.Queue()
    b: queue.Queue = queue.Queue()
    return MemoryChannel(inbox=a, outbox=b), MemoryChannel(inbox=b, outbox=a)


class SocketChannel:
    """A connected stream socket speaking LF-framed protocol messages."""

    def __init__(self, sock: socket.socket) -> None:
        self._sock = sock
        self._decoder = FrameDecoder()
        self._ready: deque[Message] = deque()
        self._eof = False

    def send(self, msg: Message) -> None:
        self.send_bytes(encode(msg))

    def send_bytes(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise ChannelClosedError() from exc

    def recv(self, timeout: float | None = None) -> Message | None:
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            if self._ready:
                return self._ready.popleft()
            if self._eof:
                raise ChannelClosedError()
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._sock.settimeout(remaining)
            else:
                self._sock.settimeout(None)
            try:
                chunk = self._sock.recv(1 << 16)
            except socket.timeout:
                return None
            except OSError as exc:
                raise ChannelClosedError() from exc
            if not chunk:
                self._eof = True
                self._decoder.finish()  # raises on a truncated trailing frame
                raise ChannelClosedError()
            self._ready.extend(self._decoder.feed(chunk))

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


@dataclass
class CollectResult:
    """Joined outcome of one broadcast round: per-name reply or None (absent),
    wall-clock duration, and the payload size that was delivered."""

    replies: dict[str, Message | None]
    elapsed_ms: float
    payload_bytes: int


def timed_broadcast_collect(
    channels: Mapping[str, Channel],
    msg: Union[Message, Mapping[str, Message]],
    timeout_s: float,
    expect: type | tuple[type, ...] | None = None,
) -> CollectResult:
    """Send `msg` (or a per-name message map) everywhere, then collect one
    reply per channel against a shared deadline.

    Silent, closed or misbehaving channels are marked absent (None) and
    logged; they never abort the round.  For a uniform broadcast
    payload_bytes is the single frame size, for a per-name map the total.
    """
    start = time.perf_counter()
    if isinstance(msg, Mapping):
        encoded = {name: encode(m) for name, m in msg.items()}
        payload_bytes = sum(len(data) for data in encoded.values())
    else:
        data = encode(msg)
        encoded = {name: data for name in channels}
        payload_bytes = len(data)
    replies: dict[str, Message | None] = {}
    failed: set[str] = set()
    for name, channel in channels.items():
        try:
            channel.send_bytes(encoded[name])
        except (ChannelClosedError, KeyError) as exc:
            logger.warning("send to agent %s failed: %s", name, exc)
            failed.add(name)
    deadline = start + timeout_s
    for name, channel in channels.items():
        if name in failed:
            replies[name] = None
            continue
        remaining = max(0.0, deadline - time.perf_counter())
        try:
            reply = channel.recv(remaining)
        except ChannelClosedError:
            logger.warning("agent %s closed its channel mid-round", name)
            reply = None
        except ProtocolError as exc:
            logger.warning("agent %s sent a bad frame: %s", name, exc)
            reply = None
        if reply is None:
            logger.warning("agent %s did not reply within %.3fs", name, timeout_s)
        elif expect is not None and not isinstance(reply, expect):
            logger.warning("agent %s replied with unexpected %s", name, type(reply).__name__)
            reply = None
        replies[name] = reply
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    return CollectResult(replies, elapsed_ms, payload_bytes)
