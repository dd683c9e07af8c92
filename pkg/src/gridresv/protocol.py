"""Wire messages for the five-step request/offer/decide round.

One message per frame: a JSON object on a single UTF-8 line terminated by
LF.  The `type` discriminator comes first and the remaining keys are
alphabetical, inside nested objects too, so encoding is byte-deterministic
and golden files can assert exact bytes.  Unknown extra fields are ignored
on decode for forward compatibility.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Callable, Union

from .agent import Offer
from .model import SchedulerError, Task


class ProtocolError(SchedulerError):
    """Base class for wire-format errors."""


class MalformedFrameError(ProtocolError):
    pass


class UnknownTypeError(ProtocolError):
    def __init__(self, type_name: str) -> None:
        self.type_name = type_name
        super().__init__(f"unknown message type {type_name!r}")


class MissingFieldError(ProtocolError):
    def __init__(self, field: str) -> None:
        self.field = field
        super().__init__(f"missing required field {field!r}")


@dataclass(frozen=True)
class Hello:
    agent_name: str


@dataclass(frozen=True)
class HelloAck:
    accepted: bool
    reason: str | None = None


@dataclass(frozen=True)
class TaskBatch:
    batch_id: str
    tasks: tuple[Task, ...]


@dataclass(frozen=True)
class OfferReply:
    batch_id: str
    agent_name: str
    offers: tuple[Offer, ...]


@dataclass(frozen=True)
class Decision:
    batch_id: str
    accepted_task_ids: tuple[str, ...]


@dataclass(frozen=True)
class CommitAck:
    batch_id: str
    agent_name: str
    committed_count: int


@dataclass(frozen=True)
class Shutdown:
    pass


Message = Union[Hello, HelloAck, TaskBatch, OfferReply, Decision, CommitAck, Shutdown]


def _task_to_wire(task: Task) -> dict[str, Any]:
    return {"endTime": task.end, "load": task.load,
            "startTime": task.start, "taskId": task.task_id}


def _offer_to_wire(offer: Offer) -> dict[str, Any]:
    return {"nodeId": offer.node_id, "projectedLoad": offer.projected_load,
            "taskId": offer.task_id}


def encode(msg: Message) -> bytes:
    """One LF-terminated frame; raises TypeError for non-message values."""
    fields: dict[str, Any]
    if isinstance(msg, Hello):
        kind, fields = "hello", {"agentName": msg.agent_name}
    elif isinstance(msg, HelloAck):
        kind, fields = "helloAck", {"accepted": msg.accepted}
        if msg.reason is not None:
            fields["reason"] = msg.reason
    elif isinstance(msg, TaskBatch):
        kind = "taskBatch"
        fields = {"batchId": msg.batch_id,
                  "tasks": [_task_to_wire(t) for t in msg.tasks]}
    elif isinstance(msg, OfferReply):
        kind = "offerReply"
        fields = {"agentName": msg.agent_name, "batchId": msg.batch_id,
                  "offers": [_offer_to_wire(o) for o in msg.offers]}
    elif isinstance(msg, Decision):
        kind = "decision"
        fields = {"acceptedTaskIds": list(msg.accepted_task_ids),
                  "batchId": msg.batch_id}
    elif isinstance(msg, CommitAck):
        kind = "commitAck"
        fields = {"agentName": msg.agent_name, "batchId": msg.batch_id,
                  "committedCount": msg.committed_count}
    elif isinstance(msg, Shutdown):
        kind, fields = "shutdown", {}
    else:
        raise TypeError(f"not a protocol message: {msg!r}")
    obj: dict[str, Any] = {"type": kind}
    for key in sorted(fields):
        obj[key] = fields[key]
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False).encode("utf-8") + b"\n"


def _req(obj: dict, field: str) -> Any:
    if field not in obj:
        raise MissingFieldError(field)
    return obj[field]


def _req_str(obj: dict, field: str) -> str:
    value = _req(obj, field)
    if not isinstance(value, str) or not value:
        raise MalformedFrameError(f"field {field!r} must be a non-empty string")
    return value


def _req_int(obj: dict, field: str, minimum: int = 0) -> int:
    value = _req(obj, field)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise MalformedFrameError(f"field {field!r} must be an integer >= {minimum}")
    return value


def _req_bool(obj: dict, field: str) -> bool:
    value = _req(obj, field)
    if not isinstance(value, bool):
        raise MalformedFrameError(f"field {field!r} must be a boolean")
    return value


def _req_list(obj: dict, field: str) -> list:
    value = _req(obj, field)
    if not isinstance(value, list):
        raise MalformedFrameError(f"field {field!r} must be a list")
    return value


def _wire_to_task(item: Any) -> Task:
    if not isinstance(item, dict):
        raise MalformedFrameError("task entries must be objects")
    try:
        return Task(task_id=_req_str(item, "taskId"),
                    start=_req_int(item, "startTime"),
                    end=_req_int(item, "endTime"),
                    load=_req_int(item, "load", minimum=1))
    except ValueError as exc:
        raise MalformedFrameError(f"invalid task: {exc}") from exc


def _wire_to_offer(item: Any) -> Offer:
    if not isinstance(item, dict):
        raise MalformedFrameError("offer entries must be objects")
    return Offer(task_id=_req_str(item, "taskId"),
                 node_id=_req_str(item, "nodeId"),
                 projected_load=_req_int(item, "projectedLoad"))


def _decode_hello(obj: dict) -> Hello:
    return Hello(agent_name=_req_str(obj, "agentName"))


def _decode_hello_ack(obj: dict) -> HelloAck:
    reason = obj.get("reason")
    if reason is not None and not isinstance(reason, str):
        raise MalformedFrameError("field 'reason' must be a string")
    return HelloAck(accepted=_req_bool(obj, "accepted"), reason=reason)


def _decode_task_batch(obj: dict) -> TaskBatch:
    tasks = tuple(_wire_to_task(item) for item in _req_list(obj, "tasks"))
    return TaskBatch(batch_id=_req_str(obj, "batchId"), tasks=tasks)


def _decode_offer_reply(obj: dict) -> OfferReply:
    offers = tuple(_wire_to_offer(item) for item in _req_list(obj, "offers"))
    return OfferReply(batch_id=_req_str(obj, "batchId"),
                      agent_name=_req_str(obj, "agentName"), offers=offers)


def _decode_decision(obj: dict) -> Decision:
    ids = _req_list(obj, "acceptedTaskIds")
    for item in ids:
        if not isinstance(item, str) or not item:
            raise MalformedFrameError("acceptedTaskIds entries must be non-empty strings")
    return Decision(batch_id=_req_str(obj, "batchId"), accepted_task_ids=tuple(ids))


def _decode_commit_ack(obj: dict) -> CommitAck:
    return CommitAck(batch_id=_req_str(obj, "batchId"),
                     agent_name=_req_str(obj, "agentName"),
                     committed_count=_req_int(obj, "committedCount"))


_DECODERS: dict[str, Callable[[dict], Message]] = {
    "hello": _decode_hello,
    "helloAck": _decode_hello_ack,
    "taskBatch": _decode_task_batch,
    "offerReply": _decode_offer_reply,
    "decision": _decode_decision,
    "commitAck": _decode_commit_ack,
    "shutdown": lambda obj: Shutdown(),
}


def decode(line: bytes | str) -> Message:
    """Parse one frame (with or without its trailing LF)."""
    if isinstance(line, bytes):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFrameError(f"frame is not UTF-8: {exc}") from exc
    else:
        text = line
    if text.endswith("\n"):
        text = text[:-1]
    if "\n" in text or "\r" in text:
        raise MalformedFrameError("frame contains interior line breaks")
    try:
        obj = json.loads(text)
    except ValueError as exc:
        raise MalformedFrameError(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedFrameError("frame is not a JSON object")
    if "type" not in obj:
        raise MissingFieldError("type")
    kind = obj["type"]
    if not isinstance(kind, str):
        raise MalformedFrameError("field 'type' must be a string")
    decoder = _DECODERS.get(kind)
    if decoder is None:
        raise UnknownTypeError(kind)
    return decoder(obj)


class FrameDecoder:
    """Reassembles LF-terminated frames from arbitrary byte chunks."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, chunk: bytes) -> list[Message]:
        self._buf += chunk
        out: list[Message] = []
        while (idx := self._buf.find(b"\n")) != -1:
            line = bytes(self._buf[: idx + 1])
            del self._buf[: idx + 1]
            out.append(decode(line))
        return out

    def finish(self) -> None:
        """Signal end of stream; leftover bytes mean a truncated frame."""
        if self._buf:
            raise MalformedFrameError(f"stream ended mid-frame ({len(self._buf)} buffered bytes)")
