"""Reproducible task-set generators.

Two shapes:

* ``uniform``: independent draws for duration, start and load.
* ``pairedSymmetric``: the horizon is cut into task_count/2 disjoint slots
  and each slot holds two identical tasks.  With two identically equipped
  agents every task is offered by both at the same projected load, so the
  tie-break on reservation counts alone splits the batch evenly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .model import Task

PROFILES = ("uniform", "pairedSymmetric")


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    task_count: int
    time_horizon: int = 1000
    duration_range: tuple[int, int] = (10, 100)
    load_range: tuple[int, int] = (10, 85)
    overlap_profile: str = "uniform"

    def __post_init__(self) -> None:
        if self.task_count <= 0:
            raise ValueError("task_count must be positive")
        if self.time_horizon <= 0:
            raise ValueError("time_horizon must be positive")
        dmin, dmax = self.duration_range
        if not 0 < dmin <= dmax:
            raise ValueError(f"bad duration_range {self.duration_range}")
        if dmin > self.time_horizon:
            raise ValueError("durations cannot exceed the horizon")
        lmin, lmax = self.load_range
        if not 0 < lmin <= lmax <= 100:
            raise ValueError(f"bad load_range {self.load_range}")
        if self.overlap_profile not in PROFILES:
            raise ValueError(f"unknown profile {self.overlap_profile!r}")
        if self.overlap_profile == "pairedSymmetric" and self.task_count % 2:
            raise ValueError("pairedSymmetric needs an even task_count")


def _task_id(index: int, total: int) -> str:
    width = max(3, len(str(total)))
    return f"t{index:0{width}d}"


def generate_scenario(spec: ScenarioSpec) -> list[Task]:
    rng = random.Random(spec.seed)
    if spec.overlap_profile == "pairedSymmetric":
        return _paired(spec, rng)
    return _uniform(spec, rng)


def _uniform(spec: ScenarioSpec, rng: random.Random) -> list[Task]:
    dmin, dmax = spec.duration_range
    lmin, lmax = spec.load_range
    tasks: list[Task] = []
    for i in range(spec.task_count):
        duration = rng.randint(dmin, min(dmax, spec.time_horizon))
        start = rng.randint(0, spec.time_horizon - duration)
        load = rng.randint(lmin, lmax)
        tasks.append(Task(_task_id(i + 1, spec.task_count),
                          start, start + duration, load))
    return tasks


def _paired(spec: ScenarioSpec, rng: random.Random) -> list[Task]:
    pairs = spec.task_count // 2
    slot = spec.time_horizon // pairs
    if slot < 1:
        raise ValueError("horizon too small for that many pairs")
    dmin, dmax = spec.duration_range
    lmin, lmax = spec.load_range
    tasks: list[Task] = []
    for k in range(pairs):
        duration = rng.randint(min(dmin, slot), min(dmax, slot))
        offset = rng.randint(0, slot - duration)
        start = k * slot + offset
        load = rng.randint(lmin, lmax)
        for half in range(2):
            index = 2 * k + half + 1
            tasks.append(Task(_task_id(index, spec.task_count),
                              start, start + duration, load))
    return tasks
