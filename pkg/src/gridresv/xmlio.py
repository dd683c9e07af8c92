"""XML task and resource descriptions.

Task files::

    <tasks>
      <task>
        <taskId>t001</taskId>
        <startTime>0</startTime>
        <endTime>50</endTime>
        <load>30</load>
      </task>
    </tasks>

Resource files::

    <nodes>
      <node>
        <Id>n1</Id>
        <nodeName>wn01</nodeName>
        <clusterName>c1</clusterName>
        <farmName>f1</farmName>
        <CPUPower>2400</CPUPower>
        <Memory>4096</Memory>
        <CPU_idle>100</CPU_idle>
      </node>
    </nodes>

Times and loads are integers; fractional values are rejected rather than
truncated so a bad generator fails loudly.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Iterable, Sequence

from .model import INFINITE, NodeSpec, SchedulerError, Task


class XmlError(SchedulerError):
    pass


class XmlMalformedError(XmlError):
    pass


class MissingTagError(XmlError):
    def __init__(self, tag: str, context: str = "") -> None:
        self.tag = tag
        where = f" in {context}" if context else ""
        super().__init__(f"missing <{tag}>{where}")


class InvalidValueError(XmlError):
    def __init__(self, tag: str, reason: str) -> None:
        self.tag = tag
        super().__init__(f"bad <{tag}>: {reason}")


class DuplicateTaskIdError(XmlError):
    def __init__(self, task_id: str) -> None:
        self.task_id = task_id
        super().__init__(f"duplicate task id {task_id!r}")


class DuplicateNodeIdError(XmlError):
    def __init__(self, node_id: str) -> None:
        self.node_id = node_id
        super().__init__(f"duplicate node id {node_id!r}")


def _parse_root(text: str, expected: str) -> ET.Element:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise XmlMalformedError(f"not well-formed XML: {exc}") from exc
    if root.tag != expected:
        raise XmlMalformedError(f"expected root <{expected}>, got <{root.tag}>")
    return root


def _text(elem: ET.Element, tag: str, context: str) -> str:
    child = elem.find(tag)
    if child is None:
        raise MissingTagError(tag, context)
    return (child.text or "").strip()


def _int(elem: ET.Element, tag: str, context: str) -> int:
    raw = _text(elem, tag, context)
    try:
        return int(raw)
    except ValueError:
        raise InvalidValueError(tag, f"{raw!r} is not an integer") from None


def _float(elem: ET.Element, tag: str, context: str) -> float:
    raw = _text(elem, tag, context)
    try:
        return float(raw)
    except ValueError:
        raise InvalidValueError(tag, f"{raw!r} is not a number") from None


def parse_tasks(text: str) -> list[Task]:
    root = _parse_root(text, "tasks")
    tasks: list[Task] = []
    seen: set[str] = set()
    for i, elem in enumerate(root):
        context = f"task #{i + 1}"
        if elem.tag != "task":
            raise XmlMalformedError(f"unexpected <{elem.tag}> under <tasks>")
        task_id = _text(elem, "taskId", context)
        if not task_id:
            raise InvalidValueError("taskId", "must be non-empty")
        if task_id in seen:
            raise DuplicateTaskIdError(task_id)
        seen.add(task_id)
        start = _int(elem, "startTime", context)
        end = _int(elem, "endTime", context)
        load = _int(elem, "load", context)
        if start < 0:
            raise InvalidValueError("startTime", "must be >= 0")
        if not start < end:
            raise InvalidValueError("endTime", "must be greater than startTime")
        if end > INFINITE:
            raise InvalidValueError("endTime", "out of range")
        if not 0 < load <= 100:
            raise InvalidValueError("load", "must be in 1..100")
        tasks.append(Task(task_id, start, end, load))
    return tasks


def parse_task_file(path: Path) -> list[Task]:
    return parse_tasks(Path(path).read_text(encoding="utf-8"))


def parse_nodes(text: str) -> list[NodeSpec]:
    root = _parse_root(text, "nodes")
    nodes: list[NodeSpec] = []
    seen: set[str] = set()
    for i, elem in enumerate(root):
        context = f"node #{i + 1}"
        if elem.tag != "node":
            raise XmlMalformedError(f"unexpected <{elem.tag}> under <nodes>")
        node_id = _text(elem, "Id", context)
        if not node_id:
            raise InvalidValueError("Id", "must be non-empty")
        if node_id in seen:
            raise DuplicateNodeIdError(node_id)
        seen.add(node_id)
        idle = _int(elem, "CPU_idle", context)
        if not 0 <= idle <= 100:
            raise InvalidValueError("CPU_idle", "must be in 0..100")
        nodes.append(NodeSpec(
            node_id=node_id,
            node_name=_text(elem, "nodeName", context),
            cluster_name=_text(elem, "clusterName", context),
            farm_name=_text(elem, "farmName", context),
            cpu_power_mhz=_float(elem, "CPUPower", context),
            memory_mb=_float(elem, "Memory", context),
            cpu_idle_percent=idle,
        ))
    return nodes


def parse_resource_file(path: Path) -> list[NodeSpec]:
    return parse_nodes(Path(path).read_text(encoding="utf-8"))


def _num(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(value)


def serialize_tasks(tasks: Iterable[Task]) -> str:
    root = ET.Element("tasks")
    for task in tasks:
        elem = ET.SubElement(root, "task")
        ET.SubElement(elem, "taskId").text = task.task_id
        ET.SubElement(elem, "startTime").text = str(task.start)
        ET.SubElement(elem, "endTime").text = str(task.end)
        ET.SubElement(elem, "load").text = str(task.load)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def serialize_nodes(nodes: Iterable[NodeSpec]) -> str:
    root = ET.Element("nodes")
    for node in nodes:
        elem = ET.SubElement(root, "node")
        ET.SubElement(elem, "Id").text = node.node_id
        ET.SubElement(elem, "nodeName").text = node.node_name
        ET.SubElement(elem, "clusterName").text = node.cluster_name
        ET.SubElement(elem, "farmName").text = node.farm_name
        ET.SubElement(elem, "CPUPower").text = _num(node.cpu_power_mhz)
        ET.SubElement(elem, "Memory").text = _num(node.memory_mb)
        ET.SubElement(elem, "CPU_idle").text = str(node.cpu_idle_percent)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def write_task_file(path: Path, tasks: Sequence[Task]) -> None:
    Path(path).write_text(serialize_tasks(tasks), encoding="utf-8")


def write_resource_file(path: Path, nodes: Sequence[NodeSpec]) -> None:
    Path(path).write_text(serialize_nodes(nodes), encoding="utf-8")
