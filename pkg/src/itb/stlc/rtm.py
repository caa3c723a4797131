"""Requirement traceability matrix.

Links run requirement -> scenario -> condition -> case. An id lives at
exactly one level, which keeps every chain acyclic.
"""

from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum


class Source(str, Enum):
    MRD = "MRD"
    BRD = "BRD"
    FRD = "FRD"
    DESIGN = "DESIGN"


class Direction(str, Enum):
    FORWARD = "Forward"
    BACK = "Back"


class Level(str, Enum):
    REQUIREMENT = "requirement"
    SCENARIO = "scenario"
    CONDITION = "condition"
    CASE = "case"


LEVELS = (Level.REQUIREMENT, Level.SCENARIO, Level.CONDITION, Level.CASE)


class RtmError(KeyError):
    pass


class UncoveredRequirementWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Requirement:
    req_id: str
    source: Source
    text: str
    in_integration_scope: bool = True


@dataclass(frozen=True, order=True)
class Link:
    req_id: str
    scenario_id: str
    condition_id: str
    case_id: str

    def ids(self) -> tuple[str, str, str, str]:
        return (self.req_id, self.scenario_id, self.condition_id, self.case_id)


@dataclass(frozen=True)
class Coverage:
    covered: tuple[str, ...]
    uncovered: tuple[str, ...]


@dataclass
class Rtm:
    requirements: dict[str, Requirement] = field(default_factory=dict)
    links: set[Link] = field(default_factory=set)

    def __post_init__(self) -> None:
        self._level: dict[str, Level] = {}
        for r in self.requirements.values():
            self._claim(r.req_id, Level.REQUIREMENT)
        for link in list(self.links):
            self._index(link)

    def _claim(self, ident: str, level: Level) -> None:
        have = self._level.get(ident)
        if have is not None and have is not level:
            raise RtmError(f"id {ident!r} is already a {have.value}, cannot also be a {level.value}")
        self._level[ident] = level

    def _index(self, link: Link) -> None:
        if link.req_id not in self.requirements:
            raise RtmError(f"unknown requirement {link.req_id!r}")
        for ident, level in zip(link.ids(), LEVELS):
            self._claim(ident, level)

    def add_requirement(self, req: Requirement) -> None:
        if req.req_id in self.requirements:
            raise RtmError(f"duplicate requirement {req.req_id!r}")
        self._claim(req.req_id, Level.REQUIREMENT)
        self.requirements[req.req_id] = req

    def link(self, req_id: str, scenario_id: str, condition_id: str, case_id: str) -> Link:
        link = Link(req_id, scenario_id, condition_id, case_id)
        self._index(link)
        self.links.add(link)
        return link

    def level_of(self, ident: str) -> Level:
        try:
            return self._level[ident]
        except KeyError:
            raise RtmError(f"unknown id {ident!r}") from None

    def trace(self, direction: Direction | str, ident: str) -> set[str]:
        """Forward: case ids reachable from ``ident``. Back: requirement ids reachable from it."""
        direction = Direction(direction)
        pos = LEVELS.index(self.level_of(ident))
        target = 3 if direction is Direction.FORWARD else 0
        found = {link.ids()[target] for link in self.links if link.ids()[pos] == ident}
        if direction is Direction.FORWARD and pos == 0 and not found:
            warnings.warn(f"requirement {ident} is not covered by any case", UncoveredRequirementWarning, stacklevel=2)
        return found

    def forward(self, ident: str) -> set[str]:
        return self.trace(Direction.FORWARD, ident)

    def back(self, ident: str) -> set[str]:
        return self.trace(Direction.BACK, ident)

    def coverage(self) -> Coverage:
        linked = {link.req_id for link in self.links}
        in_scope = sorted(r for r, req in self.requirements.items() if req.in_integration_scope)
        return Coverage(tuple(r for r in in_scope if r in linked), tuple(r for r in in_scope if r not in linked))

    def cases(self) -> set[str]:
        return {link.case_id for link in self.links}

    def by_requirement(self) -> dict[str, list[Link]]:
        out: dict[str, list[Link]] = defaultdict(list)
        for link in sorted(self.links):
            out[link.req_id].append(link)
        return dict(out)
